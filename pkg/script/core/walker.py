from __future__ import annotations

import math
from itertools import product
from typing import Iterator, List, Sequence, Tuple

from script.core.model import SimulationError, Stage
from script.core.weaver import IqImpairment

DEFAULT_GAIN_GRID_DB = (0.0, 0.5, 1.0, 2.0)
DEFAULT_PHASE_GRID_DEG = (0.0, 1.0, 2.5, 5.0)


def parse_angles(spec: str) -> List[float]:
    """``"start:step:stop"`` (stop inclusive) or a comma list, in degrees."""
    spec = spec.strip()
    try:
        if ":" not in spec:
            return [float(v) for v in spec.split(",") if v.strip()]
        start, step, stop = (float(v) for v in spec.split(":"))
    except ValueError as e:
        raise SimulationError(f"bad angle range '{spec}': {e}", stage="cli") from e
    if step == 0 or (stop - start) / step < 0:
        raise SimulationError(f"angle range '{spec}' never reaches its stop", stage="cli")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + k * step, 9) for k in range(count)]


class Walker:
    """Enumerates sweep points in a fixed order."""

    def iter_impairment_grid(
        self,
        gains_db: Sequence[float] = DEFAULT_GAIN_GRID_DB,
        phases_deg: Sequence[float] = DEFAULT_PHASE_GRID_DEG,
        stage: Stage = Stage.IF,
    ) -> Iterator[Tuple[float, float, IqImpairment]]:
        for g, p in product(gains_db, phases_deg):
            yield g, p, IqImpairment(g, p, stage)

    def iter_angles(self, spec: str) -> Iterator[float]:
        yield from parse_angles(spec)
