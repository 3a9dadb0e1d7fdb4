from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from script import __version__
from script.config_loader import ConfigError, ConfigLoader
from script.core.engine import COMMANDS, ScenarioRunner
from script.core.model import Architecture, SimulationError
from script.reporters.csv_reporter import write_csv_sidecars
from script.reporters.json_reporter import build_report, render_json
from script.reporters.markdown_reporter import render_markdown
from script.reporters.svg_plotter import write_plots
from script.utils.file_io import write_atomic

logger = logging.getLogger("script")

OUT_DIR_ENV = "WEAVER_SIM_OUT_DIR"
REPORT_NAME = "report.json"


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", "-S", type=str, help="Path to YAML/JSON scenario")
    common.add_argument(
        "--out", type=str, default="", help=f"Output directory (default ${OUT_DIR_ENV} or ./out)"
    )
    common.add_argument("--seed", type=int, default=None, help="Override the scenario seed")
    common.add_argument(
        "--replot", type=str, default="", help="Regenerate CSV/SVG views from a report.json"
    )
    common.add_argument(
        "--format",
        choices=["markdown", "json"],
        default="markdown",
        help="Summary printed to stdout",
    )
    common.add_argument("--verbose", "-v", action="store_true", help="Debug logging")

    p = argparse.ArgumentParser(
        prog="weaver-sim", description="Weaver E-band phased-array simulator"
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    plan = sub.add_parser("plan", parents=[common], help="LO plans per architecture")
    plan.add_argument("--arch", choices=[a.value for a in Architecture], default=None)

    irr = sub.add_parser("irr", parents=[common], help="Image-rejection ratio")
    irr.add_argument("--grid", action="store_true", help="Sweep the gain/phase imbalance grid")

    beam = sub.add_parser("beam", parents=[common], help="Beam steering sweep")
    beam.add_argument("--angles", type=str, default=None, help="start:step:stop or a,b,c (deg)")

    link = sub.add_parser("link", parents=[common], help="End-to-end EVM")
    link.add_argument(
        "--calibrate", action="store_true", help="Fit the gain-flatness knob to the EVM target"
    )

    sub.add_parser("budget", parents=[common], help="Power and link budget")
    return p


def _out_dir(args: argparse.Namespace) -> Path:
    return Path(args.out or os.environ.get(OUT_DIR_ENV) or "out")


def _options(args: argparse.Namespace) -> Dict[str, Any]:
    keys = {"plan": ("arch",), "irr": ("grid",), "beam": ("angles",), "link": ("calibrate",)}
    return {k: getattr(args, k) for k in keys.get(args.command, ())}


def _write_views(report: Dict[str, Any], out_dir: Path) -> List[Path]:
    return write_csv_sidecars(report, out_dir) + write_plots(report, out_dir)


def _replot(args: argparse.Namespace) -> int:
    path = Path(args.replot)
    try:
        report = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as e:
        raise ConfigError(f"cannot read report: {e}", location=str(path))
    if report.get("command") != args.command:
        logger.warning("report was produced by '%s', not '%s'", report.get("command"), args.command)
    print(f"seed: {report.get('seed')}")
    for written in _write_views(report, _out_dir(args)):
        print(written)
    return 0


def _run(args: argparse.Namespace) -> int:
    if args.replot:
        return _replot(args)
    if not args.scenario:
        raise ConfigError("--scenario is required unless --replot is given")

    loader = ConfigLoader(args.scenario)
    config = loader.load()
    scenario = loader.build_scenario(seed=args.seed)
    print(f"seed: {scenario.seed}")

    results = ScenarioRunner(scenario, config).run(args.command, **_options(args))
    echo = {**config, "seed": scenario.seed}
    text = render_json(build_report(args.command, scenario.seed, echo, results))

    out_dir = _out_dir(args)
    written = [write_atomic(out_dir / REPORT_NAME, text)]
    # views are drawn from the serialised report so --replot reproduces them exactly
    report = json.loads(text)
    written += _write_views(report, out_dir)

    print(text if args.format == "json" else render_markdown(report))
    for path in written:
        print(path)
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _run(args)
    except (ConfigError, SimulationError) as e:
        print(json.dumps({"error": e.to_dict()}, sort_keys=True), file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
