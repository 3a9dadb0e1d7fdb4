from __future__ import annotations

from typing import Any, Dict, List

from script.utils.unit_converter import UnitConverter


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _hz(v: Any) -> str:
    return UnitConverter.format_hz_to_human(v) if isinstance(v, (int, float)) else _fmt(v)


def _plan(r: Dict[str, Any]) -> List[str]:
    lines = ["| architecture | LO1 range | tuning | FBW |", "|---|---|---|---|"]
    for row in r["architectures"]:
        lo = row["lo1_range"]
        lines.append(
            f"| {row['architecture']} | {_hz(lo[0])} - {_hz(lo[1])} | "
            f"{_hz(row['tuning_range'])} | {row['fbw'] * 100:.2f}% |"
        )
    if "optimized_plan" in r:
        opt = r["optimized_plan"]
        lines += ["", f"- Optimized IF1 centre: {_hz(opt['if1_center'])}"]
    return lines


def _irr(r: Dict[str, Any]) -> List[str]:
    s = r["scenario_irr"]
    analytic, simulated = _fmt(s["analytic"]), _fmt(s["simulated"])
    lines = [f"- Scenario IRR: analytic {analytic} dB, simulated {simulated} dB"]
    if "grid" in r:
        worst = _fmt(r["max_abs_delta_db"])
        lines.append(f"- Grid points: {len(r['grid'])}, max |delta| {worst} dB")
    return lines


def _beam(r: Dict[str, Any]) -> List[str]:
    lines = [
        f"- Coverage within 1°: {r['coverage_ok']}",
        "",
        "| commanded | achieved | HPBW | peak/null (dB) | EVM (dB) |",
        "|---|---|---|---|---|",
    ]
    for p in r["points"]:
        lines.append(
            f"| {_fmt(p['steer_angle'])} | {_fmt(p['achieved_peak_angle'])} | {_fmt(p['hpbw'])} | "
            f"{_fmt(p['peak_to_null_db'])} | {_fmt(p['evm_db'])} |"
        )
    return lines


def _link(r: Dict[str, Any]) -> List[str]:
    lines = []
    if "calibration" in r:
        cal = r["calibration"]
        lines.append(f"- Fitted gain flatness: {_fmt(cal['gain_flatness_db'])} dB")
    for band, evms in sorted(r["link"]["evm_db"].items()):
        for mod, evm in sorted(evms.items()):
            lines.append(f"- {band} {mod}: EVM {_fmt(evm)} dB")
    for sw in r["band_switch"]:
        lines.append(f"- Band switch {sw['modulation']}: variation {_fmt(sw['variation_db'])} dB")
    return lines


def _budget(r: Dict[str, Any]) -> List[str]:
    return [f"- {k}: {_fmt(v)}" for k, v in sorted(r.items()) if not isinstance(v, (dict, list))]


_SECTIONS = {"plan": _plan, "irr": _irr, "beam": _beam, "link": _link, "budget": _budget}


def render_markdown(report: Dict[str, Any]) -> str:
    command = report["command"]
    lines = [f"# Weaver Array Report: {command}", "", f"- Seed: {report['seed']}", ""]
    lines += _SECTIONS[command](report["results"])
    lines.append("")
    return "\n".join(lines)
