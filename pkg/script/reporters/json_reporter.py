from __future__ import annotations

import json
import math
from typing import Any, Dict

import numpy as np

from script import __version__

REPORT_SCHEMA_VERSION = 1


def _plain(value: Any) -> Any:
    """JSON-safe copy: numpy scalars/arrays unwrapped, non-finite floats as strings."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, complex):
        return [_plain(value.real), _plain(value.imag)]
    if isinstance(value, float):
        if math.isnan(value):
            return None
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
    return value


def build_report(
    command: str, seed: int, scenario: Dict[str, Any], results: Dict[str, Any]
) -> Dict[str, Any]:
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "tool_version": __version__,
        "command": command,
        "seed": seed,
        "scenario": scenario,
        "results": results,
    }


def render_json(report: Dict[str, Any]) -> str:
    text = json.dumps(_plain(report), ensure_ascii=False, indent=2, sort_keys=True, allow_nan=False)
    return text + "\n"
