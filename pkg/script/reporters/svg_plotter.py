"""SVG views of a report. Plots read nothing but the report dictionary."""

from __future__ import annotations

import io
import logging
from pathlib import Path
from typing import Any, Dict, List

import matplotlib

matplotlib.use("Agg")

import numpy as np  # noqa: E402
from matplotlib import rc_context  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

from script.utils.file_io import write_atomic  # noqa: E402

logger = logging.getLogger(__name__)

PATTERN_FLOOR_DB = -40.0

_RC = {"svg.hashsalt": "weaver-array-sim", "svg.fonttype": "path", "path.simplify": False}


def _values(seq) -> np.ndarray:
    # report.json stores infinities as strings and NaN as null
    return np.array([float(v) if v is not None else np.nan for v in seq], dtype=float)


def _to_svg(fig: Figure) -> str:
    buf = io.StringIO()
    with rc_context(_RC):
        fig.savefig(buf, format="svg", metadata={"Date": None})
    return buf.getvalue()


def _beam_plots(results: Dict[str, Any]) -> Dict[str, str]:
    points = results["points"]

    fig = Figure(figsize=(7, 4))
    ax = fig.add_subplot(1, 1, 1)
    for p in points:
        ax.plot(
            _values(p["pattern"]["angles_deg"]),
            _values(p["pattern"]["values_db"]),
            linewidth=0.8,
            label=f"{float(p['steer_angle']):g}°",
        )
    ax.set_xlim(-90, 90)
    ax.set_ylim(PATTERN_FLOOR_DB, 1)
    ax.set_xlabel("angle (deg)")
    ax.set_ylabel("normalised array factor (dB)")
    ax.grid(True, linewidth=0.3)
    ax.legend(fontsize=6, ncol=2)

    polar = Figure(figsize=(5, 5))
    pax = polar.add_subplot(1, 1, 1, projection="polar")
    for p in points:
        pax.plot(
            np.deg2rad(_values(p["pattern"]["angles_deg"])),
            np.maximum(_values(p["pattern"]["values_db"]), PATTERN_FLOOR_DB),
            linewidth=0.6,
        )
    pax.set_theta_zero_location("N")
    pax.set_theta_direction(-1)
    pax.set_thetamin(-90)
    pax.set_thetamax(90)
    pax.set_rlim(PATTERN_FLOOR_DB, 0)
    return {"pattern.svg": _to_svg(fig), "pattern_polar.svg": _to_svg(polar)}


def _link_plots(results: Dict[str, Any]) -> Dict[str, str]:
    runs = results["link"]["runs"]
    plots = {}

    fig = Figure(figsize=(4 * len(runs), 4))
    for k, r in enumerate(runs, start=1):
        ax = fig.add_subplot(1, len(runs), k)
        pts = np.array(r["constellation"], dtype=float).reshape(-1, 2)
        ax.scatter(pts[:, 0], pts[:, 1], s=2)
        ax.set_aspect("equal")
        ax.set_title(f"{r['band']} {r['modulation']}: {float(r['evm_db']):.1f} dB", fontsize=8)
    plots["constellation.svg"] = _to_svg(fig)

    spec = Figure(figsize=(7, 4))
    ax = spec.add_subplot(1, 1, 1)
    for r in runs:
        for side in ("tx_spectrum", "rx_spectrum"):
            if side in r:
                ax.plot(
                    _values(r[side]["freqs"]) / 1e9,
                    _values(r[side]["psd_db"]),
                    linewidth=0.8,
                    label=f"{r['band']} {r['modulation']} {side.split('_')[0]}",
                )
    ax.set_xlabel("offset frequency (GHz)")
    ax.set_ylabel("PSD (dB/Hz)")
    ax.grid(True, linewidth=0.3)
    ax.legend(fontsize=6)
    plots["spectrum.svg"] = _to_svg(spec)
    return plots


def _plan_plots(results: Dict[str, Any]) -> Dict[str, str]:
    rows = results["architectures"]
    fig = Figure(figsize=(7, 3))
    ax = fig.add_subplot(1, 1, 1)
    for k, r in enumerate(rows):
        low, high = (float(v) / 1e9 for v in r["lo1_range"])
        ax.barh(k, high - low, left=low, height=0.5)
        ax.text(high, k, f" {float(r['fbw']) * 100:.2f}%", va="center", fontsize=7)
    ax.set_yticks(range(len(rows)))
    ax.set_yticklabels([r["architecture"] for r in rows])
    ax.set_xlabel("LO1 tuning range (GHz)")
    ax.grid(True, axis="x", linewidth=0.3)
    return {"plan.svg": _to_svg(fig)}


def _irr_plots(results: Dict[str, Any]) -> Dict[str, str]:
    if "grid" not in results:
        return {}
    grid = results["grid"]
    fig = Figure(figsize=(7, 4))
    ax = fig.add_subplot(1, 1, 1)
    for g in sorted({float(r["gain_imbalance_db"]) for r in grid}):
        rows = [r for r in grid if float(r["gain_imbalance_db"]) == g]
        phases = _values(r["phase_imbalance_deg"] for r in rows)
        ax.plot(phases, _values(r["analytic_db"] for r in rows), linewidth=0.8, label=f"{g:g} dB")
        ax.plot(phases, _values(r["simulated_db"] for r in rows), "o", markersize=3)
    ax.set_xlabel("phase imbalance (deg)")
    ax.set_ylabel("IRR (dB)")
    ax.grid(True, linewidth=0.3)
    ax.legend(fontsize=6, title="gain imbalance", title_fontsize=6)
    return {"irr_grid.svg": _to_svg(fig)}


_PLOTS = {
    "beam": _beam_plots,
    "link": _link_plots,
    "plan": _plan_plots,
    "irr": _irr_plots,
}


def render_plots(report: Dict[str, Any]) -> Dict[str, str]:
    """File name -> SVG text for the report's command."""
    builder = _PLOTS.get(report["command"])
    return builder(report["results"]) if builder else {}


def write_plots(report: Dict[str, Any], out_dir: Path) -> List[Path]:
    written = []
    for name, text in sorted(render_plots(report).items()):
        written.append(write_atomic(Path(out_dir) / name, text))
        logger.debug("wrote %s", name)
    return written
