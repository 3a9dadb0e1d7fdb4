"""Bidirectional two-stage Weaver image-selection converter.

RF signals are complex envelopes referenced to LO1, so both mirror bands
(LO1 - IF1 and LO1 + IF1) live on one sampled grid. Each mixer stage carries
a static 2x2 real matrix on (I, Q), equivalent to ``y = mu*z + nu*conj(z)``:

- RF stage (real RF port <-> quadrature IF1): the matrix acts on the signal.
- IF stage (quadrature IF1 <-> quadrature baseband): the matrix acts on the
  LO2 phasor, ``mu*exp(+jw2t) + nu*exp(-jw2t)``.

Selecting the sideband conjugates the quadrature IF1 signal, i.e. one path's
sign is inverted.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from script.core.freq_plan import LoPlan
from script.core.model import (
    ChainError,
    ComplexSignal,
    Direction,
    PlanError,
    Sideband,
    Stage,
    Topology,
)
from script.core.sigproc import band_power, occupied_bandwidth, power_spectrum
from script.utils.unit_converter import UnitConverter

logger = logging.getLogger(__name__)

MAX_GAIN_IMBALANCE_DB = 6.0
MAX_PHASE_IMBALANCE_DEG = 30.0
DEFAULT_IF1_BANDWIDTH = 3.0e9
IRR_CAP_DB = UnitConverter.DB_CAP

# bandwidth of the baseband is estimated down to this level below peak
_BANDWIDTH_LEVEL_DB = -30.0
_MIN_SAMPLES_FOR_BANDWIDTH = 256


@dataclass(frozen=True)
class IqImpairment:
    """Static quadrature imbalance of one mixer stage.

    Attributes:
        gain_imbalance_db: gain of I relative to Q
        phase_imbalance_deg: quadrature phase error
        applies_to: mixer stage carrying the error
        sideband: when set, the error only exists on that sideband's path
    """

    gain_imbalance_db: float = 0.0
    phase_imbalance_deg: float = 0.0
    applies_to: Stage = Stage.IF
    sideband: Optional[Sideband] = None

    def __post_init__(self):
        object.__setattr__(self, "applies_to", Stage(self.applies_to))
        if self.sideband is not None:
            object.__setattr__(self, "sideband", Sideband(self.sideband))
        if abs(self.gain_imbalance_db) > MAX_GAIN_IMBALANCE_DB:
            raise ChainError(
                f"gain imbalance {self.gain_imbalance_db} dB outside ±{MAX_GAIN_IMBALANCE_DB} dB"
            )
        if abs(self.phase_imbalance_deg) > MAX_PHASE_IMBALANCE_DEG:
            raise ChainError(
                f"phase imbalance {self.phase_imbalance_deg}° outside ±{MAX_PHASE_IMBALANCE_DEG}°"
            )

    @property
    def matrix(self) -> np.ndarray:
        """2x2 real matrix on (I, Q): ``I' = a*I - sin(phi)*Q``, ``Q' = cos(phi)*Q``."""
        a = 10.0 ** (self.gain_imbalance_db / 20.0)
        phi = math.radians(self.phase_imbalance_deg)
        return np.array([[a, -math.sin(phi)], [0.0, math.cos(phi)]])

    def active_for(self, stage: Stage, sideband: Sideband) -> bool:
        return self.applies_to is stage and (self.sideband is None or self.sideband is sideband)


def mixer_coefficients(matrix: np.ndarray) -> Tuple[complex, complex]:
    """(mu, nu) of ``y = mu*z + nu*conj(z)`` for a 2x2 (I, Q) matrix."""
    c_i = matrix[0, 0] + 1j * matrix[1, 0]
    c_q = matrix[0, 1] + 1j * matrix[1, 1]
    return (c_i - 1j * c_q) / 2.0, (c_i + 1j * c_q) / 2.0


def stage_matrix(
    impairments: Iterable[IqImpairment], stage: Stage, sideband: Sideband
) -> np.ndarray:
    """Composite matrix of every impairment active on ``stage`` (applied in list order)."""
    m = np.eye(2)
    for imp in impairments:
        if imp.active_for(stage, sideband):
            m = imp.matrix @ m
    return m


@dataclass(frozen=True)
class WeaverConfig:
    """Two-stage conversion plan for one channel.

    Attributes:
        lo1: Hz, RF-stage LO
        lo2: Hz, IF-stage LO (centre of IF1)
        sideband_bit: which mirror band survives
        direction: TX or RX
        if1_band: (low, high) Hz; defaults to ``lo2 ± 1.5 GHz``
        conversion_gain_db: per stage
        gain_flatness_db: in-band conversion-gain droop at the IF1 band edge
        max_if1_bandwidth: guard on the IF1 band width
    """

    lo1: float
    lo2: float
    sideband_bit: Sideband = Sideband.LSB
    direction: Direction = Direction.TX
    if1_band: Optional[Tuple[float, float]] = None
    conversion_gain_db: float = 0.0
    gain_flatness_db: float = 0.0
    max_if1_bandwidth: float = DEFAULT_IF1_BANDWIDTH

    def __post_init__(self):
        object.__setattr__(self, "sideband_bit", Sideband(self.sideband_bit))
        object.__setattr__(self, "direction", Direction(self.direction))
        if self.if1_band is None:
            half = self.max_if1_bandwidth / 2.0
            object.__setattr__(self, "if1_band", (self.lo2 - half, self.lo2 + half))
        else:
            object.__setattr__(self, "if1_band", (float(self.if1_band[0]), float(self.if1_band[1])))
        if not self.lo1 > self.lo2 > 0:
            raise ChainError(f"need lo1 > lo2 > 0, got lo1={self.lo1}, lo2={self.lo2}")
        low, high = self.if1_band
        if not low < self.lo2 < high:
            raise ChainError(f"lo2 {self.lo2} must lie inside IF1 band {self.if1_band}")
        if high - low > self.max_if1_bandwidth * (1 + 1e-12):
            raise ChainError(
                f"IF1 band width {high - low:.6g} Hz exceeds {self.max_if1_bandwidth:.6g} Hz"
            )

    @property
    def if1_bandwidth(self) -> float:
        return self.if1_band[1] - self.if1_band[0]

    @property
    def rf_center(self) -> float:
        """Centre of the selected RF channel."""
        if self.sideband_bit is Sideband.LSB:
            return self.lo1 - self.lo2
        return self.lo1 + self.lo2

    @property
    def image_center(self) -> float:
        return 2.0 * self.lo1 - self.rf_center

    def with_direction(self, direction: Direction) -> "WeaverConfig":
        return replace(self, direction=Direction(direction))


def select_sideband(cfg: WeaverConfig, bit: Optional[Sideband] = None) -> WeaverConfig:
    """Invert one IF path (flip the sideband), or set it explicitly when ``bit`` is given."""
    new_bit = cfg.sideband_bit.flipped() if bit is None else Sideband(bit)
    return replace(cfg, sideband_bit=new_bit)


def analytic_irr(gain_imbalance_db: float, phase_imbalance_deg: float) -> float:
    """Single-stage image rejection ratio in dB, capped at +120 dB."""
    IqImpairment(gain_imbalance_db, phase_imbalance_deg)  # validity guard
    a = 10.0 ** (gain_imbalance_db / 20.0)
    phi = math.radians(phase_imbalance_deg)
    num = (a + math.cos(phi)) ** 2 + math.sin(phi) ** 2
    den = (a - math.cos(phi)) ** 2 + math.sin(phi) ** 2
    if den <= 0.0:
        return IRR_CAP_DB
    return min(10.0 * math.log10(num / den), IRR_CAP_DB)


def chain_irr(impairments: Sequence[IqImpairment], sideband: Sideband = Sideband.USB) -> float:
    """Analytic IRR of the cascade; image leakage of the stages adds in power."""
    leak = 0.0
    for stage in Stage:
        mu, nu = mixer_coefficients(stage_matrix(impairments, stage, sideband))
        leak += abs(nu) ** 2 / abs(mu) ** 2
    if leak == 0.0:
        return IRR_CAP_DB
    return min(-10.0 * math.log10(leak), IRR_CAP_DB)


def _phasor(freq: float, sample_rate: float, n: int) -> np.ndarray:
    return np.exp(2j * np.pi * (freq / sample_rate) * np.arange(n))


def _flatness(samples: np.ndarray, sample_rate: float, cfg: WeaverConfig) -> np.ndarray:
    if cfg.gain_flatness_db == 0.0:
        return samples
    f = np.fft.fftfreq(samples.size, d=1.0 / sample_rate)
    gain_db = -cfg.gain_flatness_db * (f / (cfg.if1_bandwidth / 2.0)) ** 2
    return np.fft.ifft(np.fft.fft(samples) * 10.0 ** (gain_db / 20.0))


def _chain_gain(cfg: WeaverConfig) -> float:
    return 10.0 ** (2.0 * cfg.conversion_gain_db / 20.0)


def _check_bandwidth(sig: ComplexSignal, cfg: WeaverConfig) -> None:
    bandwidth = cfg.if1_bandwidth
    if len(sig) >= _MIN_SAMPLES_FOR_BANDWIDTH and sig.power > 0.0:
        bandwidth = occupied_bandwidth(sig, level_db=_BANDWIDTH_LEVEL_DB)
        if bandwidth > cfg.if1_bandwidth:
            raise ChainError(
                f"signal bandwidth {bandwidth:.4g} Hz exceeds IF1 band {cfg.if1_bandwidth:.4g} Hz"
            )
    if cfg.lo2 + bandwidth / 2.0 >= sig.sample_rate / 2.0:
        raise ChainError(
            f"sample rate {sig.sample_rate:.4g} Hz cannot hold both bands at ±{cfg.lo2:.4g} Hz "
            "(aliasing hazard)"
        )


def weaver_upconvert(
    baseband: ComplexSignal, cfg: WeaverConfig, imp: Sequence[IqImpairment] = ()
) -> ComplexSignal:
    """TX: baseband -> IF1 (LO2) -> sideband selection -> RF envelope about LO1."""
    if cfg.direction is not Direction.TX:
        raise ChainError("weaver_upconvert needs a TX config")
    _check_bandwidth(baseband, cfg)
    n, fs = len(baseband), baseband.sample_rate

    x = _flatness(baseband.samples, fs, cfg)
    mu2, nu2 = mixer_coefficients(stage_matrix(imp, Stage.IF, cfg.sideband_bit))
    z = x * (mu2 * _phasor(cfg.lo2, fs, n) + nu2 * _phasor(-cfg.lo2, fs, n))
    if cfg.sideband_bit is Sideband.LSB:
        z = np.conj(z)
    mu1, nu1 = mixer_coefficients(stage_matrix(imp, Stage.RF, cfg.sideband_bit))
    y = (mu1 * z + nu1 * np.conj(z)) * _chain_gain(cfg)
    return ComplexSignal(y, sample_rate=fs, center_freq=cfg.lo1)


def weaver_downconvert(
    rf: ComplexSignal, cfg: WeaverConfig, imp: Sequence[IqImpairment] = ()
) -> ComplexSignal:
    """RX: RF envelope about LO1 -> quadrature IF1 -> sideband selection -> baseband."""
    if cfg.direction is not Direction.RX:
        raise ChainError("weaver_downconvert needs an RX config")
    if not math.isclose(rf.center_freq, cfg.lo1, rel_tol=0.0, abs_tol=1.0):
        raise ChainError(
            f"RF envelope is referenced to {rf.center_freq:.6g} Hz, config LO1 is {cfg.lo1:.6g} Hz"
        )
    if cfg.lo2 >= rf.sample_rate / 2.0:
        raise ChainError("sample rate cannot hold the IF1 offset (aliasing hazard)")
    n, fs = len(rf), rf.sample_rate

    r = rf.samples
    mu1, nu1 = mixer_coefficients(stage_matrix(imp, Stage.RF, cfg.sideband_bit))
    w = mu1 * r + nu1 * np.conj(r)
    if cfg.sideband_bit is Sideband.LSB:
        w = np.conj(w)
    mu2, nu2 = mixer_coefficients(stage_matrix(imp, Stage.IF, cfg.sideband_bit))
    y = w * (np.conj(mu2) * _phasor(-cfg.lo2, fs, n) + np.conj(nu2) * _phasor(cfg.lo2, fs, n))
    y = _flatness(y, fs, cfg) * _chain_gain(cfg)
    return ComplexSignal(y, sample_rate=fs, center_freq=0.0)


def simulate_irr(
    cfg: WeaverConfig,
    imp: Sequence[IqImpairment],
    fft_size: int = 1024,
    desired_offset_bins: int = 40,
    image_offset_bins: int = 24,
    segments: int = 8,
) -> float:
    """Two-tone time-domain IRR oracle.

    Equal-power tones are placed at the selected channel (offset ``+d1``) and
    at the mirror of a different offset (``d2``) in the image band. After
    RX downconversion the desired tone sits at ``+d1`` and image leakage at
    ``±d2``; the ratio of the two PSD readings is the IRR. LO2 and the tones
    are bin-centred so the Hann window leaks nothing between them.
    """
    d1, d2 = int(desired_offset_bins), int(image_offset_bins)
    bins = [d1, d2, -d2, -d1]
    spaced = all(abs(a - b) >= 3 for i, a in enumerate(bins) for b in bins[i + 1 :])
    if not spaced or d1 <= 0 or d2 <= 0 or max(d1, d2) >= fft_size // 8 or fft_size % 16:
        raise ChainError(
            f"tones at ±{d1}/±{d2} bins are indistinguishable with fft_size {fft_size}; "
            "increase the FFT size"
        )

    lo2_bins = fft_size * 5 // 16
    fs = cfg.lo2 * fft_size / lo2_bins
    df = fs / fft_size
    n = fft_size * segments
    sign = 1.0 if cfg.sideband_bit is Sideband.USB else -1.0
    desired = _phasor(sign * (cfg.lo2 + d1 * df), fs, n)
    image = _phasor(-sign * (cfg.lo2 + d2 * df), fs, n)
    rf = ComplexSignal(desired + image, sample_rate=fs, center_freq=cfg.lo1)

    rx_cfg = replace(cfg, direction=Direction.RX, gain_flatness_db=0.0)
    out = weaver_downconvert(rf, rx_cfg, imp)
    spec = power_spectrum(out, fft_size=fft_size)

    def tone(offset_bins: int) -> float:
        f = offset_bins * df
        return band_power(spec, f - 1.5 * df, f + 1.5 * df)

    p_desired = tone(d1)
    p_leak = tone(d2) + tone(-d2)
    if p_leak <= 0.0 or p_desired / p_leak >= 10.0 ** (IRR_CAP_DB / 10.0):
        return IRR_CAP_DB
    irr = 10.0 * math.log10(p_desired / p_leak)
    logger.debug("simulated IRR %.3f dB for %s", irr, imp)
    return irr


def _check_compatible(signals: Sequence[ComplexSignal]) -> None:
    if not signals:
        raise ChainError("no signals to combine")
    first = signals[0]
    for s in signals[1:]:
        if s.sample_rate != first.sample_rate or s.center_freq != first.center_freq:
            raise ChainError("shared-IF signals must share sample rate and centre frequency")
        if len(s) != len(first):
            raise ChainError("shared-IF signals must have equal length")


def combine_shared_if(signals: Sequence[ComplexSignal], gain_db: float = 0.0) -> ComplexSignal:
    """Active combiner: coherent sum of the element IF1 signals."""
    _check_compatible(signals)
    total = np.sum([s.samples for s in signals], axis=0) * 10.0 ** (gain_db / 20.0)
    return signals[0].with_samples(total)


def split_shared_if(signal: ComplexSignal, n: int, gain_db: float = 0.0) -> List[ComplexSignal]:
    """Active splitter: ``n`` identical copies scaled by the splitter gain."""
    if n < 1:
        raise ChainError(f"cannot split into {n} paths")
    return [signal.scaled(10.0 ** (gain_db / 20.0)) for _ in range(n)]


@dataclass(frozen=True)
class ComponentCount:
    iq_mixers: int
    iq_filters: int


def count_components(n_elements: int, topology: Topology = Topology.SHARED_IF) -> ComponentCount:
    """I/Q mixer and filter count of an N-element Weaver array."""
    if n_elements < 1:
        raise ChainError(f"need at least one element, got {n_elements}")
    if Topology(topology) is Topology.PER_ELEMENT:
        return ComponentCount(iq_mixers=2 * n_elements, iq_filters=2 * n_elements)
    return ComponentCount(iq_mixers=n_elements + 2, iq_filters=2)


@dataclass(frozen=True)
class SharedIfTopology:
    n_elements: int
    combiner_gain_db: float = 0.0

    def __post_init__(self):
        if self.n_elements < 1:
            raise ChainError(f"need at least one element, got {self.n_elements}")

    @property
    def components(self) -> ComponentCount:
        return count_components(self.n_elements, Topology.SHARED_IF)

    @property
    def rf_mixers_per_element(self) -> int:
        return 1

    @property
    def shared_if_mixers(self) -> int:
        return 2

    @property
    def shared_filters(self) -> int:
        return 2


def weaver_config_for(
    plan: LoPlan,
    rf_center: float,
    direction: Direction = Direction.TX,
    conversion_gain_db: float = 0.0,
    gain_flatness_db: float = 0.0,
    max_if1_bandwidth: float = DEFAULT_IF1_BANDWIDTH,
) -> WeaverConfig:
    """Converter settings that serve the channel centred at ``rf_center``."""
    try:
        a = plan.assignment_for(rf_center)
    except PlanError as e:
        raise ChainError(str(e)) from e
    return WeaverConfig(
        lo1=a.lo1,
        lo2=a.if1,
        sideband_bit=a.sideband,
        direction=direction,
        conversion_gain_db=conversion_gain_db,
        gain_flatness_db=gain_flatness_db,
        max_if1_bandwidth=max_if1_bandwidth,
    )
