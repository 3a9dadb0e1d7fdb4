"""End-to-end link: QAM source, TX Weaver chain, array, AWGN channel, RX chain, EVM.

Every random draw derives from the scenario seed through
``numpy.random.SeedSequence`` so a (scenario, seed) pair always produces the
same numbers.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from script.core.array_model import (
    ArrayGeometry,
    BeamReport,
    PhaseShifterModel,
    angle_grid,
    eirp,
    eirp_spread,
    steer,
)
from script.core.budget import LinkBudgetInput, PowerBudget, rx_snr, table1_figures
from script.core.freq_plan import BandPlan, LoPlan, PlanConstraints, plan_weaver
from script.core.model import (
    ComplexSignal,
    Direction,
    LinkError,
    Sideband,
    SimulationError,
    Stage,
)
from script.core.sigproc import (
    SUPPORTED_ORDERS,
    add_awgn,
    bit_error_rate,
    matched_filter,
    measure_evm,
    one_tap_calibration,
    power_spectrum,
    qam_constellation,
    qam_demodulate,
    qam_modulate,
    random_bits,
    rrc_shape,
)
from script.core.weaver import (
    IqImpairment,
    WeaverConfig,
    select_sideband,
    weaver_config_for,
    weaver_downconvert,
    weaver_upconvert,
)
from script.utils.unit_converter import UnitConverter

logger = logging.getLogger(__name__)

SWEEP_AXES = ("gain_imbalance_db", "phase_imbalance_deg", "gain_flatness_db")
_SPECTRUM_FFT = 1024


@dataclass(frozen=True)
class ModulationSpec:
    order: int = 64
    symbol_rate: float = 1.5e9
    n_symbols: int = 20_000

    def __post_init__(self):
        if self.order not in SUPPORTED_ORDERS:
            raise LinkError(f"modulation order {self.order} not in {SUPPORTED_ORDERS}")
        if self.symbol_rate <= 0 or self.n_symbols < 1:
            raise LinkError("symbol_rate and n_symbols must be positive")

    @property
    def label(self) -> str:
        return f"{self.order}-QAM"

    @property
    def data_rate(self) -> float:
        return math.log2(self.order) * self.symbol_rate


@dataclass(frozen=True)
class WeaverSettings:
    """
    Attributes:
        channel: Hz, centre of the calibrated RF channel
        conversion_gain_db: per mixer stage
        gain_flatness_db: conversion-gain droop at the IF1 band edge
        max_if1_bandwidth: Hz
    """

    channel: float = 73.5e9
    conversion_gain_db: float = 0.0
    gain_flatness_db: float = 0.0
    max_if1_bandwidth: float = 3e9


@dataclass(frozen=True)
class ArraySettings:
    geometry: ArrayGeometry = field(default_factory=ArrayGeometry)
    n_states: int = 32
    rms_phase_error_deg: float = 0.0
    feed_amp_db: float = 0.0
    feed_phase_deg: float = 0.0
    steer_angle: float = 0.0

    def phase_shifter(self, seed: np.random.SeedSequence) -> PhaseShifterModel:
        ps = PhaseShifterModel(self.n_states, self.rms_phase_error_deg)
        if self.feed_amp_db or self.feed_phase_deg:
            ps = ps.with_feed_mismatch(
                self.geometry.n_elements, self.feed_amp_db, self.feed_phase_deg, seed
            )
        return ps


@dataclass(frozen=True)
class PowerSettings:
    """TX/RX power figures; ``eirp_dbm`` overrides the derived EIRP when set."""

    budget: PowerBudget = field(default_factory=PowerBudget)
    pout_per_element_dbm: float = -6.0
    antenna_gain_dbi: float = 12.0
    antenna_gain_range_dbi: Tuple[float, float] = (11.0, 13.0)
    implementation_loss_db: float = 0.0
    eirp_dbm: Optional[float] = None
    rx_conversion_gain_db: float = 32.0
    noise_figure_db: float = 9.0

    def budget_for(self, n: int) -> PowerBudget:
        return replace(self.budget, n_elements=n)

    def derived_eirp(self, n: int) -> float:
        return eirp(
            self.pout_per_element_dbm, n, self.antenna_gain_dbi, self.implementation_loss_db
        )

    def eirp_spread(self, n: int) -> Tuple[float, float]:
        return eirp_spread(
            self.pout_per_element_dbm, n, self.antenna_gain_range_dbi, self.implementation_loss_db
        )

    def effective_eirp(self, n: int) -> float:
        return self.eirp_dbm if self.eirp_dbm is not None else self.derived_eirp(n)


@dataclass(frozen=True)
class ChannelSettings:
    """AWGN channel.

    ``snr_db=None`` derives the SNR from the link budget, ``inf`` disables noise.
    """

    snr_db: Optional[float] = None
    distance: float = 0.25
    rx_antenna_gain_dbi: float = 12.0
    noise_bandwidth: float = 2e9


@dataclass(frozen=True)
class LinkSettings:
    rolloff: float = 0.35
    span_symbols: int = 128
    samples_per_symbol: int = 16
    preamble_symbols: int = 1024
    calibrated_band: str = "LB"
    image_interferer_db: Optional[float] = None
    constellation_points: int = 256

    def __post_init__(self):
        if self.calibrated_band not in ("LB", "UB"):
            raise LinkError(f"calibrated_band must be LB or UB, got {self.calibrated_band}")
        if self.preamble_symbols < 1:
            raise LinkError("preamble_symbols must be >= 1")


@dataclass(frozen=True)
class CalibrationSettings:
    target_order: int = 64
    target_evm_db: float = -24.0
    knob_max_db: float = 6.0
    xtol: float = 1e-4


@dataclass(frozen=True)
class Scenario:
    band_plan: BandPlan = field(default_factory=BandPlan)
    weaver: WeaverSettings = field(default_factory=WeaverSettings)
    impairments: Tuple[IqImpairment, ...] = ()
    array: ArraySettings = field(default_factory=ArraySettings)
    power: PowerSettings = field(default_factory=PowerSettings)
    channel: ChannelSettings = field(default_factory=ChannelSettings)
    modulations: Tuple[ModulationSpec, ...] = (
        ModulationSpec(16, 2e9),
        ModulationSpec(64, 1.5e9),
    )
    link: LinkSettings = field(default_factory=LinkSettings)
    constraints: PlanConstraints = field(default_factory=PlanConstraints)
    calibration: CalibrationSettings = field(default_factory=CalibrationSettings)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "impairments", tuple(self.impairments))
        object.__setattr__(self, "modulations", tuple(self.modulations))
        if not self.modulations:
            raise LinkError("scenario has no modulation")
        for m in self.modulations:
            occupied = m.symbol_rate * (1.0 + self.link.rolloff)
            if occupied > self.weaver.max_if1_bandwidth:
                raise LinkError(
                    f"{m.label} at {m.symbol_rate:.4g} sym/s occupies {occupied:.4g} Hz, "
                    f"wider than IF1 ({self.weaver.max_if1_bandwidth:.4g} Hz)"
                )

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, seed=int(seed))

    def modulation(self, order: Optional[int] = None) -> ModulationSpec:
        if order is None:
            return self.modulations[0]
        for m in self.modulations:
            if m.order == order:
                return m
        raise LinkError(f"scenario has no {order}-QAM modulation")


@dataclass(frozen=True, eq=False)
class BandRun:
    """One link pass in one band."""

    band: str
    modulation: ModulationSpec
    evm_rms: float
    evm_db: float
    ber: float
    snr_db: float
    calibration_gain: complex
    constellation: np.ndarray
    tx_spectrum: Optional[Dict[str, List[float]]] = None
    rx_spectrum: Optional[Dict[str, List[float]]] = None

    def to_dict(self) -> dict:
        d = {
            "band": self.band,
            "modulation": self.modulation.label,
            "symbol_rate": self.modulation.symbol_rate,
            "data_rate": self.modulation.data_rate,
            "evm_rms": self.evm_rms,
            "evm_db": self.evm_db,
            "ber": self.ber,
            "snr_db": self.snr_db,
            "calibration_gain": [self.calibration_gain.real, self.calibration_gain.imag],
            "constellation": [[z.real, z.imag] for z in self.constellation.tolist()],
        }
        if self.tx_spectrum is not None:
            d["tx_spectrum"] = self.tx_spectrum
        if self.rx_spectrum is not None:
            d["rx_spectrum"] = self.rx_spectrum
        return d


@dataclass(frozen=True, eq=False)
class LinkReport:
    runs: Tuple[BandRun, ...]
    beam: BeamReport
    array_effect_db: float
    eirp_dbm: float
    budget: Dict[str, Any]
    plan: LoPlan
    seed: int

    @property
    def evm(self) -> Dict[str, Dict[str, float]]:
        """EVM in dB keyed by band, then modulation."""
        out: Dict[str, Dict[str, float]] = {}
        for r in self.runs:
            out.setdefault(r.band, {})[r.modulation.label] = r.evm_db
        return out

    def to_dict(self) -> dict:
        return {
            "evm_db": self.evm,
            "runs": [r.to_dict() for r in self.runs],
            "beam": self.beam.to_dict(),
            "array_effect_db": self.array_effect_db,
            "eirp_dbm": self.eirp_dbm,
            "budget": self.budget,
            "plan": self.plan.to_dict(),
            "seed": self.seed,
        }


@dataclass(frozen=True)
class BandSwitchResult:
    modulation: str
    calibrated_band: str
    evm_lb: float
    evm_ub: float

    @property
    def variation_db(self) -> float:
        return abs(self.evm_lb - self.evm_ub)

    def to_dict(self) -> dict:
        return {
            "modulation": self.modulation,
            "calibrated_band": self.calibrated_band,
            "evm_lb": self.evm_lb,
            "evm_ub": self.evm_ub,
            "variation_db": self.variation_db,
        }


@dataclass(frozen=True, eq=False)
class BeamSweepResult:
    reports: Tuple[BeamReport, ...]
    evm_db: Tuple[float, ...]
    eirp_dbm: Tuple[float, ...]

    @property
    def coverage_ok(self) -> bool:
        """Every commanded angle within ±30° is reached within 1°."""
        return all(
            abs(r.achieved_peak_angle - r.steer_angle) <= 1.0
            for r in self.reports
            if abs(r.steer_angle) <= 30.0
        )

    def to_dict(self) -> dict:
        return {
            "coverage_ok": self.coverage_ok,
            "points": [
                {**r.to_dict(), "evm_db": e, "eirp_dbm": p}
                for r, e, p in zip(self.reports, self.evm_db, self.eirp_dbm)
            ],
        }


@dataclass(frozen=True)
class CalibrationResult:
    knob_db: float
    target_modulation: str
    target_evm_db: float
    evm_db: Dict[str, float]
    scenario: Scenario

    def to_dict(self) -> dict:
        return {
            "gain_flatness_db": self.knob_db,
            "target_modulation": self.target_modulation,
            "target_evm_db": self.target_evm_db,
            "evm_db": self.evm_db,
        }


@dataclass(frozen=True)
class SweepPoint:
    value: float
    evm_db: float


# ---------------------------------------------------------------------------
# seeds


def _seed_tree(seed: int, n_modulations: int) -> Tuple[np.random.SeedSequence, list]:
    """(array seed, per-modulation [bits, noise, interferer] seeds)."""
    root = np.random.SeedSequence(seed)
    array_ss, *mod_ss = root.spawn(1 + n_modulations)
    return array_ss, [m.spawn(3) for m in mod_ss]


def _modulation_index(s: Scenario, mod: ModulationSpec) -> int:
    return s.modulations.index(mod)


# ---------------------------------------------------------------------------
# building blocks


def _band_of(sideband: Sideband) -> str:
    return "LB" if sideband is Sideband.LSB else "UB"


def _sideband_of(band: str) -> Sideband:
    return Sideband.LSB if band == "LB" else Sideband.USB


def _channel_configs(s: Scenario, plan: LoPlan) -> Dict[str, WeaverConfig]:
    """TX configs of the calibrated channel and its mirror, keyed by band."""
    cfg = weaver_config_for(
        plan,
        s.weaver.channel,
        Direction.TX,
        s.weaver.conversion_gain_db,
        s.weaver.gain_flatness_db,
        s.weaver.max_if1_bandwidth,
    )
    mirror = select_sideband(cfg)
    return {_band_of(cfg.sideband_bit): cfg, _band_of(mirror.sideband_bit): mirror}


def _child(ss: np.random.SeedSequence, k: int) -> np.random.SeedSequence:
    """k-th child of ``ss`` without advancing its spawn counter."""
    return np.random.SeedSequence(ss.entropy, spawn_key=ss.spawn_key + (k,))


def _beam(s: Scenario, angle: float, array_ss: np.random.SeedSequence, idx: int = 0) -> BeamReport:
    ps = s.array.phase_shifter(_child(array_ss, 0))
    quant = np.random.default_rng(_child(array_ss, 1 + idx))
    return steer(s.array.geometry, angle, ps, quant, angle_grid())


def _array_effect_db(s: Scenario, beam: BeamReport) -> float:
    """Coherent gain at the achieved peak relative to the ideal N."""
    n = s.array.geometry.n_elements
    return float(UnitConverter.amplitude_ratio_to_db(beam.pattern.peak_amplitude / n))


def _snr_db(s: Scenario, cfg: WeaverConfig, array_effect_db: float) -> float:
    if s.channel.snr_db is not None:
        if math.isinf(s.channel.snr_db):
            return math.inf
        return s.channel.snr_db + array_effect_db
    n = s.array.geometry.n_elements
    link = LinkBudgetInput(
        eirp=s.power.effective_eirp(n) + array_effect_db,
        carrier=cfg.rf_center,
        distance=s.channel.distance,
        rx_antenna_gain=s.channel.rx_antenna_gain_dbi,
        rx_conversion_gain=s.power.rx_conversion_gain_db,
        noise_figure=s.power.noise_figure_db,
        bandwidth=s.channel.noise_bandwidth,
    )
    return rx_snr(link)


def _spectrum_dict(sig: ComplexSignal) -> Dict[str, List[float]]:
    spec = power_spectrum(sig, fft_size=_SPECTRUM_FFT)
    return {
        "freqs": spec.freqs.tolist(),
        "psd_db": np.maximum(spec.psd_db, UnitConverter.DB_FLOOR).tolist(),
    }


def _waveform(
    s: Scenario, mod: ModulationSpec, seed: np.random.SeedSequence
) -> Tuple[np.ndarray, np.ndarray, ComplexSignal]:
    c = qam_constellation(mod.order)
    total = s.link.preamble_symbols + mod.n_symbols
    bits = random_bits(total, c, np.random.default_rng(seed))
    symbols = qam_modulate(bits, c)
    shaped = rrc_shape(
        symbols,
        s.link.rolloff,
        s.link.span_symbols,
        s.link.samples_per_symbol,
        symbol_rate=mod.symbol_rate,
    )
    return bits, symbols, shaped


def _run_band(
    s: Scenario,
    mod: ModulationSpec,
    cfg: WeaverConfig,
    snr_db: float,
    gain: Optional[complex] = None,
    with_spectra: bool = False,
) -> BandRun:
    """One pass through the link; ``gain`` freezes the calibration, else it is fitted."""
    _, mod_seeds = _seed_tree(s.seed, len(s.modulations))
    bits_ss, noise_ss, interferer_ss = mod_seeds[_modulation_index(s, mod)]
    pre = s.link.preamble_symbols
    sps = s.link.samples_per_symbol
    imp = s.impairments

    bits, symbols, shaped = _waveform(s, mod, bits_ss)
    rf = weaver_upconvert(shaped, cfg, imp)

    wave_snr = snr_db - 10.0 * math.log10(sps)
    noisy = add_awgn(rf, wave_snr, np.random.default_rng(noise_ss))

    if s.link.image_interferer_db is not None:
        _, _, other = _waveform(s, mod, interferer_ss)
        mirror_cfg = replace(select_sideband(cfg), gain_flatness_db=0.0)
        intf = weaver_upconvert(other, mirror_cfg)
        scale = math.sqrt(rf.power / intf.power * 10.0 ** (s.link.image_interferer_db / 10.0))
        noisy = noisy.with_samples(noisy.samples + scale * intf.samples)

    baseband = weaver_downconvert(noisy, cfg.with_direction(Direction.RX), imp)
    rx = matched_filter(baseband, symbols.size, s.link.rolloff, s.link.span_symbols, sps)

    if gain is None:
        gain = one_tap_calibration(rx[:pre], symbols[:pre])
    payload = rx[pre:] / gain
    ref = symbols[pre:]
    evm = measure_evm(payload, ref)

    c = qam_constellation(mod.order)
    ber = bit_error_rate(bits[pre * c.bits_per_symbol :], qam_demodulate(payload, c))
    logger.debug(
        "%s %s: EVM %.3f dB, SNR %.2f dB", _band_of(cfg.sideband_bit), mod.label, evm.evm_db, snr_db
    )
    return BandRun(
        band=_band_of(cfg.sideband_bit),
        modulation=mod,
        evm_rms=evm.evm_rms,
        evm_db=evm.evm_db,
        ber=ber,
        snr_db=snr_db,
        calibration_gain=complex(gain),
        constellation=payload[: s.link.constellation_points],
        tx_spectrum=_spectrum_dict(noisy) if with_spectra else None,
        rx_spectrum=_spectrum_dict(baseband) if with_spectra else None,
    )


def _stage_guard(fn):
    """Re-raise stage failures as LinkError naming the failing stage."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except LinkError:
            raise
        except SimulationError as e:
            raise LinkError(f"{e.stage}: {e}", stage=e.stage) from e

    return wrapper


# ---------------------------------------------------------------------------
# experiments


@_stage_guard
def run_link(s: Scenario) -> LinkReport:
    """Every modulation in both mirror bands, each band with its own calibration."""
    plan = plan_weaver(s.band_plan)
    configs = _channel_configs(s, plan)
    array_ss, _ = _seed_tree(s.seed, len(s.modulations))
    beam = _beam(s, s.array.steer_angle, array_ss)
    effect = _array_effect_db(s, beam)
    n = s.array.geometry.n_elements

    runs = []
    first = True
    for band in (s.link.calibrated_band, "UB" if s.link.calibrated_band == "LB" else "LB"):
        cfg = configs[band]
        snr = _snr_db(s, cfg, effect)
        for mod in s.modulations:
            runs.append(_run_band(s, mod, cfg, snr, with_spectra=first))
            first = False

    return LinkReport(
        runs=tuple(runs),
        beam=beam,
        array_effect_db=effect,
        eirp_dbm=s.power.effective_eirp(n) + effect,
        budget=table1_figures(s),
        plan=plan,
        seed=s.seed,
    )


@_stage_guard
def band_switch_experiment(s: Scenario, order: Optional[int] = None) -> BandSwitchResult:
    """Calibrate in one band, flip only the sideband bit and rerun with the frozen gain."""
    mod = s.modulation(order)
    plan = plan_weaver(s.band_plan)
    configs = _channel_configs(s, plan)
    array_ss, _ = _seed_tree(s.seed, len(s.modulations))
    effect = _array_effect_db(s, _beam(s, s.array.steer_angle, array_ss))

    cal_band = s.link.calibrated_band
    cal_cfg = configs[cal_band]
    calibrated = _run_band(s, mod, cal_cfg, _snr_db(s, cal_cfg, effect))
    switched_cfg = select_sideband(cal_cfg)
    switched = _run_band(
        s, mod, switched_cfg, _snr_db(s, switched_cfg, effect), gain=calibrated.calibration_gain
    )
    evm = {calibrated.band: calibrated.evm_db, switched.band: switched.evm_db}
    result = BandSwitchResult(mod.label, cal_band, evm["LB"], evm["UB"])
    logger.info("band switch %s: variation %.3f dB", mod.label, result.variation_db)
    return result


@_stage_guard
def beam_sweep_experiment(
    s: Scenario, angles: Sequence[float], order: Optional[int] = None
) -> BeamSweepResult:
    """Pattern, boresight EVM and EIRP for each commanded angle."""
    angles = [float(a) for a in angles]
    if not angles:
        raise LinkError("no angles to sweep")
    for a in angles:
        if abs(a) >= 90.0:
            raise LinkError(f"angle {a}° outside ±90°")
    mod = s.modulation(order)
    plan = plan_weaver(s.band_plan)
    cfg = _channel_configs(s, plan)[s.link.calibrated_band]
    array_ss, _ = _seed_tree(s.seed, len(s.modulations))
    n = s.array.geometry.n_elements

    reports, evms, eirps = [], [], []
    for idx, angle in enumerate(angles):
        beam = _beam(s, angle, array_ss, idx)
        effect = _array_effect_db(s, beam)
        run = _run_band(s, mod, cfg, _snr_db(s, cfg, effect))
        reports.append(beam)
        evms.append(run.evm_db)
        eirps.append(s.power.effective_eirp(n) + effect)
    return BeamSweepResult(tuple(reports), tuple(evms), tuple(eirps))


def _evm_of(s: Scenario, mod: ModulationSpec) -> float:
    plan = plan_weaver(s.band_plan)
    cfg = _channel_configs(s, plan)[s.link.calibrated_band]
    array_ss, _ = _seed_tree(s.seed, len(s.modulations))
    effect = _array_effect_db(s, _beam(s, s.array.steer_angle, array_ss))
    return _run_band(s, mod, cfg, _snr_db(s, cfg, effect)).evm_db


def with_flatness(s: Scenario, knob_db: float) -> Scenario:
    return replace(s, weaver=replace(s.weaver, gain_flatness_db=float(knob_db)))


@_stage_guard
def calibrate_residual(s: Scenario) -> CalibrationResult:
    """Fit the IF gain-flatness knob so the target modulation meets the target EVM."""
    cal = s.calibration
    target = s.modulation(cal.target_order)

    def excess(knob: float) -> float:
        return _evm_of(with_flatness(s, knob), target) - cal.target_evm_db

    low, high = excess(0.0), excess(cal.knob_max_db)
    if low >= 0.0:
        raise LinkError(
            f"{target.label} EVM is already {low + cal.target_evm_db:.2f} dB without droop; "
            "target unreachable"
        )
    if high < 0.0:
        raise LinkError(
            f"{target.label} EVM stays below target at {cal.knob_max_db} dB droop;"
            " raise knob_max_db"
        )
    knob = float(brentq(excess, 0.0, cal.knob_max_db, xtol=cal.xtol))
    fitted = with_flatness(s, knob)
    evm = {m.label: _evm_of(fitted, m) for m in fitted.modulations}
    logger.info("fitted gain flatness %.4f dB: %s", knob, evm)
    return CalibrationResult(knob, target.label, cal.target_evm_db, evm, fitted)


def _with_axis(s: Scenario, axis: str, value: float) -> Scenario:
    if axis == "gain_flatness_db":
        return with_flatness(s, value)
    impairments = s.impairments or (IqImpairment(applies_to=Stage.IF),)
    return replace(s, impairments=tuple(replace(i, **{axis: value}) for i in impairments))


@_stage_guard
def impairment_sweep(
    s: Scenario, axis: str, values: Sequence[float], order: Optional[int] = None
) -> List[SweepPoint]:
    """EVM against one impairment magnitude, everything else held fixed."""
    if axis not in SWEEP_AXES:
        raise LinkError(f"unknown sweep axis '{axis}', expected one of {SWEEP_AXES}")
    mod = s.modulation(order)
    return [SweepPoint(float(v), _evm_of(_with_axis(s, axis, v), mod)) for v in values]

