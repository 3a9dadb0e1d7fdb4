"""Planar array geometry, LO-path phase shifting and far-field patterns.

Positions are in wavelengths and centred on the array origin. Patterns are
cut at phi = 0 (the column axis); elements are isotropic.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from script.core.model import ArrayError
from script.core.sigproc import SeedLike, make_rng
from script.utils.unit_converter import UnitConverter

logger = logging.getLogger(__name__)

PATTERN_FLOOR_DB = UnitConverter.DB_FLOOR
DEFAULT_GRID_STEP_DEG = 0.05


@dataclass(frozen=True)
class ArrayGeometry:
    rows: int = 4
    cols: int = 4
    spacing: float = 0.5

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ArrayError(f"array needs at least one element, got {self.rows}x{self.cols}")
        if self.spacing <= 0:
            raise ArrayError(f"spacing must be > 0 wavelengths, got {self.spacing}")

    @property
    def n_elements(self) -> int:
        return self.rows * self.cols

    @property
    def element_positions(self) -> np.ndarray:
        """(N, 2) array of (x, y) positions, row-major."""
        x = (np.arange(self.cols) - (self.cols - 1) / 2.0) * self.spacing
        y = (np.arange(self.rows) - (self.rows - 1) / 2.0) * self.spacing
        xx, yy = np.meshgrid(x, y)
        return np.column_stack([xx.ravel(), yy.ravel()])


@dataclass(frozen=True)
class PhaseShifterModel:
    """Digitally stepped LO phase shifter with static feed-network errors.

    Attributes:
        n_states: phase states per turn, state k is 2*pi*k/n_states
        rms_phase_error_deg: random error added to every setting
        feed_errors: per-element (amplitude dB, phase deg) offsets; empty means none
    """

    n_states: int = 32
    rms_phase_error_deg: float = 0.0
    feed_errors: Tuple[Tuple[float, float], ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.n_states < 2:
            raise ArrayError(f"n_states must be >= 2, got {self.n_states}")
        if self.rms_phase_error_deg < 0:
            raise ArrayError("rms_phase_error_deg must be >= 0")
        object.__setattr__(
            self, "feed_errors", tuple((float(a), float(p)) for a, p in self.feed_errors)
        )

    @property
    def step(self) -> float:
        return 2.0 * math.pi / self.n_states

    def with_feed_mismatch(
        self, n: int, amp_db: float, phase_deg: float, seed: SeedLike
    ) -> "PhaseShifterModel":
        """Copy with static feed offsets drawn uniformly within ±amp_db and ±phase_deg."""
        rng = make_rng(seed)
        amps = rng.uniform(-amp_db, amp_db, n)
        phases = rng.uniform(-phase_deg, phase_deg, n)
        return replace(self, feed_errors=tuple(zip(amps.tolist(), phases.tolist())))

    def feed_arrays(self, n: int) -> Tuple[np.ndarray, np.ndarray]:
        """Per-element feed amplitude (linear) and phase (radians)."""
        if not self.feed_errors:
            return np.ones(n), np.zeros(n)
        if len(self.feed_errors) != n:
            raise ArrayError(f"{len(self.feed_errors)} feed errors for {n} elements")
        err = np.asarray(self.feed_errors)
        return 10.0 ** (err[:, 0] / 20.0), np.radians(err[:, 1])


@dataclass(frozen=True, eq=False)
class Pattern:
    """Far-field cut on an angle grid.

    Attributes:
        angles_deg: ascending grid
        magnitude: unnormalised |AF|
    """

    angles_deg: np.ndarray
    magnitude: np.ndarray

    @property
    def peak_amplitude(self) -> float:
        return float(self.magnitude.max())

    @property
    def values_db(self) -> np.ndarray:
        """Normalised pattern in dB, peak exactly 0, floored."""
        peak = self.peak_amplitude
        if peak == 0.0:
            return np.full(self.magnitude.shape, PATTERN_FLOOR_DB)
        with np.errstate(divide="ignore"):
            db = 20.0 * np.log10(self.magnitude / peak)
        return np.maximum(db, PATTERN_FLOOR_DB)


@dataclass(frozen=True, eq=False)
class BeamReport:
    steer_angle: float
    achieved_peak_angle: float
    hpbw: float
    peak_to_null_db: float
    sidelobe_level_db: float
    pattern: Pattern

    def to_dict(self, include_pattern: bool = True) -> dict:
        d = {
            "steer_angle": self.steer_angle,
            "achieved_peak_angle": self.achieved_peak_angle,
            "hpbw": self.hpbw,
            "peak_to_null_db": self.peak_to_null_db,
            "sidelobe_level_db": self.sidelobe_level_db,
        }
        if include_pattern:
            d["pattern"] = {
                "angles_deg": self.pattern.angles_deg.tolist(),
                "values_db": self.pattern.values_db.tolist(),
            }
        return d


def angle_grid(step_deg: float = DEFAULT_GRID_STEP_DEG) -> np.ndarray:
    count = int(round(180.0 / step_deg)) + 1
    return np.linspace(-90.0, 90.0, count)


def steering_phases(geom: ArrayGeometry, theta_deg: float, phi_deg: float = 0.0) -> np.ndarray:
    """Continuous per-element phases (radians) pointing the beam at (theta, phi)."""
    if abs(theta_deg) >= 90.0:
        raise ArrayError(f"steering angle {theta_deg}° outside (-90°, 90°)")
    theta, phi = math.radians(theta_deg), math.radians(phi_deg)
    u = np.array([math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi)])
    return -2.0 * math.pi * (geom.element_positions @ u)


def quantize_phases(
    phases: np.ndarray, ps: PhaseShifterModel, seed: SeedLike = 0
) -> np.ndarray:
    """Round to the nearest phase state, then add random and static feed errors."""
    phases = np.asarray(phases, dtype=float)
    q = np.round(phases / ps.step) * ps.step
    if ps.rms_phase_error_deg > 0:
        q = q + make_rng(seed).normal(0.0, math.radians(ps.rms_phase_error_deg), phases.shape)
    _, feed_phase = ps.feed_arrays(phases.size)
    return q + feed_phase


def element_weights(
    geom: ArrayGeometry,
    theta_deg: float,
    ps: Optional[PhaseShifterModel] = None,
    seed: SeedLike = 0,
    phi_deg: float = 0.0,
) -> np.ndarray:
    """Complex element weights steering to theta; ideal continuous phases when ``ps`` is None."""
    phases = steering_phases(geom, theta_deg, phi_deg)
    if ps is None:
        return np.exp(1j * phases)
    amp, _ = ps.feed_arrays(geom.n_elements)
    return amp * np.exp(1j * quantize_phases(phases, ps, seed))


def array_factor(
    geom: ArrayGeometry, element_weights: np.ndarray, angle_grid: Sequence[float]
) -> Pattern:
    """Far-field cut |sum w_n exp(j 2 pi x_n sin(theta))|."""
    w = np.asarray(element_weights, dtype=complex).reshape(-1)
    angles = np.asarray(angle_grid, dtype=float).reshape(-1)
    if angles.size == 0:
        raise ArrayError("angle grid is empty")
    if w.size != geom.n_elements:
        raise ArrayError(f"{w.size} weights for {geom.n_elements} elements")
    x = geom.element_positions[:, 0]
    steering = np.exp(2j * np.pi * np.outer(np.sin(np.radians(angles)), x))
    return Pattern(angles_deg=angles, magnitude=np.abs(steering @ w))


def array_gain_db(geom: ArrayGeometry, weights: np.ndarray, angle_deg: float) -> float:
    """Unnormalised coherent gain 20*log10|AF| at one angle."""
    mag = array_factor(geom, weights, [angle_deg]).peak_amplitude
    return float(UnitConverter.amplitude_ratio_to_db(mag))


def _refine_peak(angles: np.ndarray, db: np.ndarray, idx: int) -> float:
    if idx == 0 or idx == angles.size - 1:
        return float(angles[idx])
    y0, y1, y2 = db[idx - 1], db[idx], db[idx + 1]
    denom = y0 - 2.0 * y1 + y2
    if denom >= 0.0:
        return float(angles[idx])
    offset = 0.5 * (y0 - y2) / denom
    return float(angles[idx] + offset * (angles[idx + 1] - angles[idx]))


def _crossing(angles: np.ndarray, db: np.ndarray, peak: int, direction: int, level: float) -> float:
    i = peak
    while 0 <= i + direction < angles.size:
        j = i + direction
        if db[j] < level:
            frac = (db[i] - level) / (db[i] - db[j])
            return float(angles[i] + frac * (angles[j] - angles[i]))
        i = j
    raise ArrayError("pattern has no -3 dB crossing inside the grid (grid too narrow)")


def _first_minimum(db: np.ndarray, peak: int, direction: int) -> int:
    i = peak
    while 0 <= i + direction < db.size and db[i + direction] <= db[i]:
        i += direction
    return i


def beam_metrics(pattern: Pattern, steer_angle: float) -> BeamReport:
    """HPBW, peak-to-null and sidelobe level of the main beam."""
    angles = pattern.angles_deg
    if angles.min() > -90.0 + 1e-9 or angles.max() < 90.0 - 1e-9:
        raise ArrayError("pattern must cover -90°..90°")
    db = pattern.values_db
    peak = int(np.argmax(db))

    left = _crossing(angles, db, peak, -1, -3.0)
    right = _crossing(angles, db, peak, +1, -3.0)

    null_l = _first_minimum(db, peak, -1)
    null_r = _first_minimum(db, peak, +1)
    null_db = min(db[null_l], db[null_r])
    outside = np.concatenate([db[:null_l], db[null_r + 1 :]])
    sidelobe = float(outside.max()) if outside.size else PATTERN_FLOOR_DB

    return BeamReport(
        steer_angle=float(steer_angle),
        achieved_peak_angle=_refine_peak(angles, db, peak),
        hpbw=right - left,
        peak_to_null_db=float(db[peak] - null_db),
        sidelobe_level_db=sidelobe,
        pattern=pattern,
    )


def steer(
    geom: ArrayGeometry,
    theta_deg: float,
    ps: Optional[PhaseShifterModel] = None,
    seed: SeedLike = 0,
    grid: Optional[np.ndarray] = None,
) -> BeamReport:
    """Weights, pattern and metrics for one commanded angle."""
    weights = element_weights(geom, theta_deg, ps, seed)
    grid = angle_grid() if grid is None else grid
    return beam_metrics(array_factor(geom, weights, grid), theta_deg)


def pointing_error_rms(
    geom: ArrayGeometry, ps: PhaseShifterModel, angles: Sequence[float], seed: int = 0
) -> float:
    """RMS difference between achieved and commanded peak over ``angles``."""
    angles = list(angles)
    if not angles:
        raise ArrayError("no angles given")
    seeds = np.random.SeedSequence(seed).spawn(len(angles))
    grid = angle_grid()
    errs = [
        steer(geom, a, ps, np.random.default_rng(s), grid).achieved_peak_angle - a
        for a, s in zip(angles, seeds)
    ]
    rms = float(np.sqrt(np.mean(np.square(errs))))
    logger.debug("pointing error rms %.4f° over %d angles", rms, len(angles))
    return rms


def eirp(
    pout_per_element_dbm: float,
    n: int,
    antenna_gain_dbi: float,
    implementation_loss_db: float = 0.0,
) -> float:
    """EIRP in dBm with coherent combining over ``n`` elements."""
    if n < 1:
        raise ArrayError(f"n must be >= 1, got {n}")
    return pout_per_element_dbm + 20.0 * math.log10(n) + antenna_gain_dbi - implementation_loss_db


def eirp_spread(
    pout_per_element_dbm: float,
    n: int,
    gain_range_dbi: Tuple[float, float] = (11.0, 13.0),
    implementation_loss_db: float = 0.0,
) -> Tuple[float, float]:
    """EIRP over the antenna-gain spread."""
    low, high = sorted(gain_range_dbi)
    return (
        eirp(pout_per_element_dbm, n, low, implementation_loss_db),
        eirp(pout_per_element_dbm, n, high, implementation_loss_db),
    )
