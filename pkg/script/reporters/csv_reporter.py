"""CSV sidecars for the array-like parts of a report.

Every table is derived from the report dictionary alone, so a report loaded
back from report.json yields the same files.
"""

from __future__ import annotations

import csv
import io
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence

from script.utils.file_io import write_atomic

logger = logging.getLogger(__name__)

Table = Dict[str, List[List[Any]]]


def _num(v: Any) -> Any:
    # report.json stores infinities as strings
    if isinstance(v, str) and v in ("inf", "-inf"):
        return float(v)
    return v


def _csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_num(v) for v in row])
    return buf.getvalue()


def _plan_tables(results: Dict[str, Any]) -> Dict[str, str]:
    tables = {
        "plan.csv": _csv_text(
            ["architecture", "lo1_low_hz", "lo1_high_hz", "tuning_range_hz", "fbw"],
            (
                [r["architecture"], *r["lo1_range"], r["tuning_range"], r["fbw"]]
                for r in results["architectures"]
            ),
        )
    }
    for key in ("weaver_plan", "optimized_plan"):
        if key in results:
            tables[f"{key}_channels.csv"] = _csv_text(
                ["rf_center_hz", "band", "lo1_hz", "if1_hz", "sideband"],
                (
                    [a["rf_center"], a["band"], a["lo1"], a["if1"], a["sideband"]]
                    for a in results[key]["assignments"]
                ),
            )
    return tables


def _irr_tables(results: Dict[str, Any]) -> Dict[str, str]:
    if "grid" not in results:
        return {}
    columns = [
        "gain_imbalance_db",
        "phase_imbalance_deg",
        "analytic_db",
        "simulated_db",
        "delta_db",
    ]
    return {"irr_grid.csv": _csv_text(columns, ([r[c] for c in columns] for r in results["grid"]))}


def _beam_tables(results: Dict[str, Any]) -> Dict[str, str]:
    points = results["points"]
    summary_cols = [
        "steer_angle",
        "achieved_peak_angle",
        "hpbw",
        "peak_to_null_db",
        "sidelobe_level_db",
        "evm_db",
        "eirp_dbm",
    ]
    pattern_rows = (
        [p["steer_angle"], angle, value]
        for p in points
        for angle, value in zip(p["pattern"]["angles_deg"], p["pattern"]["values_db"])
    )
    return {
        "beam_summary.csv": _csv_text(summary_cols, ([p[c] for c in summary_cols] for p in points)),
        "pattern.csv": _csv_text(["steer_angle_deg", "angle_deg", "value_db"], pattern_rows),
    }


def _link_tables(results: Dict[str, Any]) -> Dict[str, str]:
    runs = results["link"]["runs"]
    constellation = (
        [r["band"], r["modulation"], i, q] for r in runs for i, q in r["constellation"]
    )
    spectrum_rows = []
    for r in runs:
        for which in ("tx_spectrum", "rx_spectrum"):
            if which in r:
                spec = r[which]
                spectrum_rows += [
                    [r["band"], r["modulation"], which.split("_")[0], f, p]
                    for f, p in zip(spec["freqs"], spec["psd_db"])
                ]
    tables = {
        "constellation.csv": _csv_text(["band", "modulation", "i", "q"], constellation),
        "spectrum.csv": _csv_text(
            ["band", "modulation", "side", "freq_hz", "psd_db"], spectrum_rows
        ),
    }
    beam = results["link"]["beam"]
    if "pattern" in beam:
        tables["pattern.csv"] = _csv_text(
            ["steer_angle_deg", "angle_deg", "value_db"],
            (
                [beam["steer_angle"], a, v]
                for a, v in zip(beam["pattern"]["angles_deg"], beam["pattern"]["values_db"])
            ),
        )
    return tables


_TABLES = {
    "plan": _plan_tables,
    "irr": _irr_tables,
    "beam": _beam_tables,
    "link": _link_tables,
}


def render_tables(report: Dict[str, Any]) -> Dict[str, str]:
    """File name -> CSV text for every sidecar the report's command produces."""
    builder = _TABLES.get(report["command"])
    return builder(report["results"]) if builder else {}


def write_csv_sidecars(report: Dict[str, Any], out_dir: Path) -> List[Path]:
    written = []
    for name, text in sorted(render_tables(report).items()):
        written.append(write_atomic(Path(out_dir) / name, text))
        logger.debug("wrote %s", name)
    return written
