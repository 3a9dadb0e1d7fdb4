from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

import numpy as np


class Sideband(str, Enum):
    LSB = "LSB"
    USB = "USB"

    def flipped(self) -> "Sideband":
        return Sideband.USB if self is Sideband.LSB else Sideband.LSB


class Direction(str, Enum):
    TX = "TX"
    RX = "RX"


class Stage(str, Enum):
    RF = "RF"
    IF = "IF"


class Architecture(str, Enum):
    DIRECT = "direct"
    SLIDING = "sliding"
    WEAVER = "weaver"


class Topology(str, Enum):
    PER_ELEMENT = "per_element"
    SHARED_IF = "shared_if"


class SimulationError(ValueError):
    """Domain failure raised by any simulation stage.

    Attributes:
        stage: short name of the stage that rejected its input
    """

    stage = "simulation"

    def __init__(self, message: str, stage: Optional[str] = None):
        super().__init__(message)
        if stage is not None:
            self.stage = stage

    def to_dict(self) -> dict:
        return {"type": type(self).__name__, "stage": self.stage, "message": str(self)}


class SignalError(SimulationError):
    stage = "sigproc"


class ChainError(SimulationError):
    stage = "weaver"


class PlanError(SimulationError):
    stage = "freq-plan"

    def __init__(self, message: str, binding_constraint: str = "", stage: Optional[str] = None):
        super().__init__(message, stage)
        self.binding_constraint = binding_constraint

    def to_dict(self) -> dict:
        d = super().to_dict()
        d["binding_constraint"] = self.binding_constraint
        return d


class ArrayError(SimulationError):
    stage = "array"


class BudgetError(SimulationError):
    stage = "budget"


class LinkError(SimulationError):
    stage = "link"


@dataclass(frozen=True, eq=False)
class ComplexSignal:
    """Uniformly sampled complex envelope.

    Attributes:
        samples: complex samples (dimensionless amplitude)
        sample_rate: Hz
        center_freq: Hz, the frequency the envelope is referenced to (0 for baseband)
    """

    samples: np.ndarray
    sample_rate: float
    center_freq: float = 0.0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.complex128).reshape(-1)
        object.__setattr__(self, "samples", samples)
        if not self.sample_rate > 0:
            raise SignalError(f"sample_rate must be > 0, got {self.sample_rate}")
        if samples.size == 0:
            raise SignalError("signal has no samples")
        if not np.all(np.isfinite(samples)):
            raise SignalError("signal contains NaN or Inf samples")

    def __len__(self) -> int:
        return self.samples.size

    @property
    def power(self) -> float:
        """Mean sample power."""
        return float(np.mean(np.abs(self.samples) ** 2))

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.samples) ** 2))

    @property
    def time(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.sample_rate

    def with_samples(
        self, samples: np.ndarray, center_freq: Optional[float] = None
    ) -> "ComplexSignal":
        if center_freq is None:
            return replace(self, samples=samples)
        return replace(self, samples=samples, center_freq=center_freq)

    def scaled(self, k: complex) -> "ComplexSignal":
        return self.with_samples(self.samples * k)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Two-sided power spectral density on an absolute frequency grid.

    Attributes:
        freqs: Hz, ascending, absolute (center_freq already added)
        psd: power per Hz, linear
        resolution: bin width in Hz
    """

    freqs: np.ndarray
    psd: np.ndarray
    resolution: float

    @property
    def psd_db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 10.0 * np.log10(self.psd)

    @property
    def total_power(self) -> float:
        return float(np.sum(self.psd) * self.resolution)


@dataclass(frozen=True, eq=False)
class EvmResult:
    evm_rms: float
    evm_db: float
    per_symbol_errors: np.ndarray = field(default_factory=lambda: np.zeros(0))
