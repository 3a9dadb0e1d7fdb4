"""LO frequency planning for direct-conversion, sliding-IF and Weaver transceivers.

Fractional bandwidth (FBW) is always ``tuning_range / centre(lo1_range)``.
Channels sit on a raster inside each band; the LO visits channel centres.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from script.core.model import Architecture, PlanError, Sideband

logger = logging.getLogger(__name__)

DEFAULT_BASE_OSC = 19.5e9
DEFAULT_MULTIPLIER = 4
# sliding IF: RF = LO1 + LO1/4
SLIDING_RATIO = 4
_TOL = 1e-3  # Hz
_RASTER_TOL = 1.0  # Hz


Band = Tuple[float, float]


def _width(band: Band) -> float:
    return band[1] - band[0]


@dataclass(frozen=True)
class BandPlan:
    """Two disjoint RF bands served by one transceiver.

    Attributes:
        lower_band: (low, high) Hz
        upper_band: (low, high) Hz
        channel_width: Hz
        channel_raster: Hz, spacing of channel centres inside a band
    """

    lower_band: Band = (71e9, 76e9)
    upper_band: Band = (81e9, 86e9)
    channel_width: float = 2e9
    channel_raster: float = 500e6

    def __post_init__(self):
        object.__setattr__(self, "lower_band", tuple(float(v) for v in self.lower_band))
        object.__setattr__(self, "upper_band", tuple(float(v) for v in self.upper_band))
        for name, band in (("lower_band", self.lower_band), ("upper_band", self.upper_band)):
            if not 0 < band[0] < band[1]:
                raise PlanError(f"{name} {band} must satisfy 0 < low < high", "band_order")
        if self.lower_band[1] > self.upper_band[0]:
            raise PlanError(
                f"lower band {self.lower_band} overlaps or lies above upper band {self.upper_band}",
                "band_order",
            )
        if self.channel_width <= 0 or self.channel_raster <= 0:
            raise PlanError("channel_width and channel_raster must be > 0", "channel_width")
        for name, band in (("lower_band", self.lower_band), ("upper_band", self.upper_band)):
            spare = _width(band) - self.channel_width
            if spare < -_TOL:
                raise PlanError(f"channel_width exceeds {name} width", "channel_width")
            steps = spare / self.channel_raster
            if abs(steps - round(steps)) > 1e-6:
                raise PlanError(
                    f"{name} width minus channel_width is not a multiple of the raster",
                    "channel_raster",
                )

    @property
    def center(self) -> float:
        return (self.lower_band[0] + self.upper_band[1]) / 2.0

    @property
    def symmetric(self) -> bool:
        return math.isclose(_width(self.lower_band), _width(self.upper_band), abs_tol=_TOL)

    def channels(self, band: str) -> np.ndarray:
        """Channel centres of ``"LB"`` or ``"UB"``, ascending."""
        low, high = self.lower_band if band == "LB" else self.upper_band
        count = int(round((high - low - self.channel_width) / self.channel_raster)) + 1
        return low + self.channel_width / 2.0 + self.channel_raster * np.arange(count)

    def all_channels(self) -> np.ndarray:
        return np.concatenate([self.channels("LB"), self.channels("UB")])


@dataclass(frozen=True)
class ChannelAssignment:
    rf_center: float
    band: str
    lo1: float
    if1: float
    sideband: Sideband

    def to_dict(self) -> dict:
        return {
            "rf_center": self.rf_center,
            "band": self.band,
            "lo1": self.lo1,
            "if1": self.if1,
            "sideband": self.sideband.value,
        }


@dataclass(frozen=True)
class LoPlan:
    architecture: Architecture
    lo1_range: Tuple[float, float]
    tuning_range: float
    fbw: float
    lo2_range: Optional[Tuple[float, float]] = None
    base_osc: Optional[float] = None
    multiplier: Optional[int] = None
    if1_center: Optional[float] = None
    assignments: Tuple[ChannelAssignment, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.multiplier is not None and self.base_osc is not None:
            lo = self.multiplier * self.base_osc
            if not self.lo1_range[0] - _TOL <= lo <= self.lo1_range[1] + _TOL:
                raise PlanError(
                    f"{self.multiplier} x {self.base_osc:.4g} Hz lies outside LO1 range "
                    f"{self.lo1_range}",
                    "multiplier",
                )

    @property
    def lo1_center(self) -> float:
        return (self.lo1_range[0] + self.lo1_range[1]) / 2.0

    def assignment_for(self, rf_center: float) -> ChannelAssignment:
        for a in self.assignments:
            if math.isclose(a.rf_center, rf_center, abs_tol=1.0):
                return a
        raise PlanError(f"no channel centred at {rf_center:.6g} Hz in the plan", "coverage")

    def to_dict(self) -> dict:
        return {
            "architecture": self.architecture.value,
            "lo1_range": list(self.lo1_range),
            "lo2_range": list(self.lo2_range) if self.lo2_range else None,
            "tuning_range": self.tuning_range,
            "fbw": self.fbw,
            "base_osc": self.base_osc,
            "multiplier": self.multiplier,
            "if1_center": self.if1_center,
            "assignments": [a.to_dict() for a in self.assignments],
        }


def image_of(f: float, lo: float) -> float:
    """Frequency that converts onto the same IF as ``f`` for an LO at ``lo``."""
    if f <= 0 or lo <= 0:
        raise PlanError(f"frequencies must be > 0, got f={f}, lo={lo}", "positive_frequency")
    return 2.0 * lo - f


def _fbw(lo_range: Tuple[float, float]) -> float:
    center = (lo_range[0] + lo_range[1]) / 2.0
    return (lo_range[1] - lo_range[0]) / center


def _mirror_if1(bp: BandPlan) -> float:
    return (bp.upper_band[0] - bp.lower_band[0]) / 2.0


def _assign(bp: BandPlan, if1: float, pull: float = 0.0) -> List[ChannelAssignment]:
    """LB channels take the LO above them (LSB), UB channels the LO below (USB).

    ``pull`` lets each LO move up to that far towards the middle of the LO
    range, absorbed by its IF1 offset.
    """
    lb, ub = bp.channels("LB"), bp.channels("UB")
    los = np.concatenate([lb + if1, ub - if1])
    if pull > 0:
        mid = (los.min() + los.max()) / 2.0
        los = los + np.clip(mid - los, -pull, pull)
    rf = np.concatenate([lb, ub])
    out = []
    for i, (c, lo) in enumerate(zip(rf, los)):
        lower = i < lb.size
        out.append(
            ChannelAssignment(
                rf_center=float(c),
                band="LB" if lower else "UB",
                lo1=float(lo),
                if1=float(abs(lo - c)),
                sideband=Sideband.LSB if lower else Sideband.USB,
            )
        )
    return out


def plan_weaver(
    bp: BandPlan,
    if1_center: Optional[float] = None,
    base_osc: Optional[float] = None,
    multiplier: Optional[int] = None,
) -> LoPlan:
    """Mirror-paired Weaver plan: each LB channel shares its LO with its UB image."""
    if not bp.symmetric:
        raise PlanError(
            f"band widths differ ({_width(bp.lower_band):.4g} vs {_width(bp.upper_band):.4g} Hz); "
            "mirror pairing impossible",
            "mirror_pairing",
        )
    mirror = _mirror_if1(bp)
    if if1_center is None:
        if1_center = mirror
    elif not math.isclose(if1_center, mirror, abs_tol=_TOL):
        raise PlanError(
            f"if1_center {if1_center:.6g} Hz does not pair the bands"
            f" (mirror offset {mirror:.6g} Hz)",
            "mirror_pairing",
        )
    if if1_center <= bp.channel_width / 2.0:
        raise PlanError("IF1 channel would extend below 0 Hz", "if1_slot")

    assignments = _assign(bp, if1_center)
    los = [a.lo1 for a in assignments]
    lo1_range = (min(los), max(los))
    plan = LoPlan(
        architecture=Architecture.WEAVER,
        lo1_range=lo1_range,
        tuning_range=lo1_range[1] - lo1_range[0],
        fbw=_fbw(lo1_range),
        lo2_range=(if1_center, if1_center),
        base_osc=base_osc,
        multiplier=multiplier,
        if1_center=if1_center,
        assignments=tuple(assignments),
    )
    logger.debug("weaver plan: LO1 %s, tuning %.4g Hz", lo1_range, plan.tuning_range)
    return plan


def lo_tuning_range(arch: Architecture, bp: BandPlan) -> LoPlan:
    """LO requirement of one architecture on a band plan."""
    arch = Architecture(arch)
    centers = bp.all_channels()
    direct = (float(centers.min()), float(centers.max()))
    if arch is Architecture.DIRECT:
        return LoPlan(arch, direct, direct[1] - direct[0], _fbw(direct))
    if arch is Architecture.SLIDING:
        # half the direct range, around the LO1 that puts RF at 5/4 LO1
        half = (direct[1] - direct[0]) / 4.0
        mid = bp.center * SLIDING_RATIO / (SLIDING_RATIO + 1)
        lo1 = (mid - half, mid + half)
        lo2 = (lo1[0] / SLIDING_RATIO, lo1[1] / SLIDING_RATIO)
        return LoPlan(arch, lo1, lo1[1] - lo1[0], _fbw(lo1), lo2_range=lo2)
    return plan_weaver(bp)


@dataclass(frozen=True)
class PlanConstraints:
    """Search constraints of :func:`optimize_plan`.

    Attributes:
        if1_max_bw: Hz, widest IF1 occupancy allowed
        lo2_fixed: when False, LO2 may slide inside the IF1 window
        multiplier_set: allowed LO multiplication factors
        base_osc: Hz, the multiplied base oscillator
        base_tuning_range: Hz, tuning of the base oscillator; None means a single frequency
        grid_step: Hz, IF1 search resolution
    """

    if1_max_bw: float = 3e9
    lo2_fixed: bool = True
    multiplier_set: Tuple[int, ...] = (DEFAULT_MULTIPLIER,)
    base_osc: Optional[float] = DEFAULT_BASE_OSC
    base_tuning_range: Optional[float] = None
    grid_step: float = 1e6


def _overlaps(lo: np.ndarray, hi: np.ndarray, band: Band) -> np.ndarray:
    return (hi > band[0]) & (lo < band[1])


def _in_bands(lo: np.ndarray, hi: np.ndarray, bp: BandPlan) -> np.ndarray:
    return _overlaps(lo, hi, bp.lower_band) | _overlaps(lo, hi, bp.upper_band)


def _multiplier_ok(
    lo_min: np.ndarray, lo_max: np.ndarray, c: PlanConstraints
) -> Tuple[np.ndarray, np.ndarray]:
    """Feasibility mask and the first usable multiplier (0 if none)."""
    chosen = np.zeros(lo_min.shape, dtype=int)
    if c.base_osc is None or not c.multiplier_set:
        return np.ones(lo_min.shape, dtype=bool), chosen
    for m in sorted(c.multiplier_set, reverse=True):
        ok = (lo_min - _TOL <= m * c.base_osc) & (m * c.base_osc <= lo_max + _TOL)
        if c.base_tuning_range is not None:
            low = m * (c.base_osc - c.base_tuning_range / 2)
            high = m * (c.base_osc + c.base_tuning_range / 2)
            ok &= (low - _TOL <= lo_min) & (lo_max <= high + _TOL)
        chosen = np.where(ok, m, chosen)
    return chosen > 0, chosen


def _slide(bp: BandPlan, c: PlanConstraints) -> float:
    return 0.0 if c.lo2_fixed else c.if1_max_bw - bp.channel_width


def _channel_los(bp: BandPlan, if1: np.ndarray, pull: float) -> np.ndarray:
    """LO of every channel for every IF1 candidate, shape ``(len(if1), n_channels)``.

    Columns follow ``bp.all_channels()``: LB takes the LO above, UB the LO below.
    """
    if1 = np.asarray(if1, dtype=float).reshape(-1, 1)
    los = np.concatenate([bp.channels("LB") + if1, bp.channels("UB") - if1], axis=1)
    if pull > 0:
        mid = (los.min(axis=1, keepdims=True) + los.max(axis=1, keepdims=True)) / 2.0
        los = los + np.clip(mid - los, -pull, pull)
    return los


def _aliases(bp: BandPlan, rf: np.ndarray, los: np.ndarray) -> np.ndarray:
    """True where a channel's image lands in a band off the channel raster.

    Such an image straddles two channels and folds onto both IF1 slots. An
    image that is itself a raster channel, or falls outside both bands, is
    left to the sideband selection.
    """
    images = 2.0 * los - rf
    half = bp.channel_width / 2.0
    in_band = _in_bands(images - half, images + half, bp)
    on_raster = (np.abs(images[..., None] - rf) <= _RASTER_TOL).any(axis=-1)
    return in_band & ~on_raster


def _evaluate(bp: BandPlan, c: PlanConstraints, if1: np.ndarray) -> Dict[str, np.ndarray]:
    slide = _slide(bp, c)
    rf = bp.all_channels()
    los = _channel_los(bp, if1, slide / 2.0)
    lo_min, lo_max = los.min(axis=1), los.max(axis=1)

    placement = ~(
        ((los > bp.lower_band[0]) & (los < bp.lower_band[1]))
        | ((los > bp.upper_band[0]) & (los < bp.upper_band[1]))
    ).any(axis=1)
    mult_ok, mult = _multiplier_ok(lo_min, lo_max, c)
    tuning = lo_max - lo_min
    return {
        "if1_slot": if1 - (bp.channel_width + slide) / 2.0 > 0,
        "lo_placement": placement,
        "alias": ~_aliases(bp, rf, los).any(axis=1),
        "multiplier": mult_ok,
        "tuning": tuning,
        "fbw": tuning / ((lo_min + lo_max) / 2.0),
        "chosen_multiplier": mult,
    }


CONSTRAINT_ORDER = ("if1_slot", "lo_placement", "alias", "multiplier")


def candidate_plan(
    bp: BandPlan, if1_center: float, constraints: Optional[PlanConstraints] = None
) -> LoPlan:
    """Weaver plan for one IF1 centre, not yet checked against the constraints.

    The IF1 centre fixes the channel pairing: LB channel k shares its LO with
    UB channel k + p exactly when ``if1_center`` equals the mirror offset plus
    ``p`` half rasters. Any other centre leaves every channel on its own LO.
    """
    c = constraints or PlanConstraints()
    slide = _slide(bp, c)
    assignments = _assign(bp, if1_center, pull=slide / 2.0)
    los = [a.lo1 for a in assignments]
    lo1_range = (min(los), max(los))
    ok, chosen = _multiplier_ok(np.array([lo1_range[0]]), np.array([lo1_range[1]]), c)
    multiplier = int(chosen[0]) if c.base_osc is not None and ok[0] else None
    return LoPlan(
        architecture=Architecture.WEAVER,
        lo1_range=lo1_range,
        tuning_range=lo1_range[1] - lo1_range[0],
        fbw=_fbw(lo1_range),
        lo2_range=(if1_center - slide / 2.0, if1_center + slide / 2.0),
        base_osc=c.base_osc if multiplier else None,
        multiplier=multiplier or None,
        if1_center=if1_center,
        assignments=tuple(assignments),
    )


def optimize_plan(bp: BandPlan, constraints: Optional[PlanConstraints] = None) -> LoPlan:
    """Grid search over the IF1 centre, and with it the channel pairing, for the least LO FBW."""
    c = constraints or PlanConstraints()
    if c.if1_max_bw < bp.channel_width:
        raise PlanError(
            f"if1_max_bw {c.if1_max_bw:.4g} Hz cannot hold a {bp.channel_width:.4g} Hz channel",
            "if1_max_bw",
        )
    if c.grid_step <= 0:
        raise PlanError("grid_step must be > 0", "grid_step")

    if1 = if1_grid(bp, c)
    ev = _evaluate(bp, c, if1)

    mask = np.ones(if1.size, dtype=bool)
    for name in CONSTRAINT_ORDER:
        mask &= ev[name]
        if not mask.any():
            raise PlanError(f"no feasible IF1 centre: constraint '{name}' excludes all", name)

    # argmin returns the lowest index, so ties go to the lowest IF1
    objective = np.where(mask, ev["fbw"], np.inf)
    best_if1 = float(if1[int(np.argmin(objective))])
    plan = candidate_plan(bp, best_if1, c)
    validate_plan(plan, bp, c)
    logger.info("optimized plan: IF1 %.6g Hz, tuning %.6g Hz", best_if1, plan.tuning_range)
    return plan


def if1_grid(bp: BandPlan, c: PlanConstraints) -> np.ndarray:
    """IF1 centres searched by :func:`optimize_plan`, ascending."""
    first = math.floor(bp.channel_width / 2.0 / c.grid_step) + 1
    last = math.floor((bp.upper_band[1] - bp.lower_band[0]) / 2.0 / c.grid_step)
    grid = np.arange(first, last + 1, dtype=np.int64) * c.grid_step
    if grid.size == 0:
        raise PlanError("empty IF1 search grid", "grid_step")
    return grid


def validate_plan(plan: LoPlan, bp: BandPlan, c: PlanConstraints) -> None:
    """Re-check a finished plan against its constraints and band coverage."""
    covered = sorted(a.rf_center for a in plan.assignments)
    if not np.allclose(covered, np.sort(bp.all_channels()), rtol=0.0, atol=1.0):
        raise PlanError("plan does not cover every channel exactly once", "coverage")
    ifs = [a.if1 for a in plan.assignments]
    if min(ifs) - bp.channel_width / 2.0 <= 0:
        raise PlanError("an IF1 channel extends below 0 Hz", "if1_slot")
    if max(ifs) - min(ifs) + bp.channel_width > c.if1_max_bw + _TOL:
        raise PlanError("IF1 occupancy exceeds if1_max_bw", "if1_max_bw")
    for a in plan.assignments:
        for band in (bp.lower_band, bp.upper_band):
            if band[0] < a.lo1 < band[1]:
                raise PlanError(f"LO {a.lo1:.6g} Hz falls inside band {band}", "lo_placement")
    rf = np.array([a.rf_center for a in plan.assignments])
    los = np.array([a.lo1 for a in plan.assignments])
    aliased = _aliases(bp, rf, los)
    if aliased.any():
        a = plan.assignments[int(np.argmax(aliased))]
        raise PlanError(
            f"image of {a.rf_center:.6g} Hz at LO {a.lo1:.6g} Hz straddles two channels", "alias"
        )
    if c.base_osc is not None and c.multiplier_set and plan.multiplier is None:
        raise PlanError(f"no multiplier in {c.multiplier_set} reaches the LO1 range", "multiplier")
