#!/usr/bin/env python3
"""
报告输出测试：JSON 确定性与清洗、Markdown 摘要、CSV 侧车文件
"""

import json
import math

import numpy as np

from script import __version__
from script.reporters.csv_reporter import render_tables
from script.reporters.json_reporter import build_report, render_json
from script.reporters.markdown_reporter import render_markdown
from script.utils.file_io import write_atomic


def _irr_report():
    results = {
        "scenario_irr": {"analytic": 24.2, "simulated": 24.19},
        "grid": [
            {
                "gain_imbalance_db": 0.0,
                "phase_imbalance_deg": 0.0,
                "analytic_db": 120.0,
                "simulated_db": 120.0,
                "delta_db": 0.0,
            }
        ],
        "max_abs_delta_db": 0.0,
    }
    return build_report("irr", 3, {"seed": 3, "channel": {"snr_db": math.inf}}, results)


def test_json_is_sorted_and_sanitised():
    report = build_report(
        "budget",
        1,
        {"b": 1, "a": np.float64(2.5)},
        {"snr": -math.inf, "bad": math.nan, "vec": np.arange(3), "g": 1 + 2j},
    )
    text = render_json(report)
    assert text == render_json(report)
    data = json.loads(text)
    assert data["tool_version"] == __version__
    assert data["results"] == {"snr": "-inf", "bad": None, "vec": [0, 1, 2], "g": [1.0, 2.0]}
    assert list(data["scenario"]) == ["a", "b"]
    assert text.index('"command"') < text.index('"results"')


def test_markdown_summary():
    text = render_markdown(json.loads(render_json(_irr_report())))
    assert text.startswith("# Weaver Array Report: irr")
    assert "Scenario IRR: analytic 24.2 dB" in text
    assert "Grid points: 1" in text


def test_irr_csv():
    tables = render_tables(json.loads(render_json(_irr_report())))
    assert list(tables) == ["irr_grid.csv"]
    assert tables["irr_grid.csv"].splitlines()[1] == "0.0,0.0,120.0,120.0,0.0"


def test_budget_has_no_sidecars():
    assert render_tables(build_report("budget", 0, {}, {"n_elements": 16})) == {}


def test_write_atomic(tmp_path):
    target = tmp_path / "nested" / "out.txt"
    write_atomic(target, "first")
    write_atomic(target, b"second")
    assert target.read_text() == "second"
    assert [p.name for p in target.parent.iterdir()] == ["out.txt"]


def test_markdown_plan_uses_readable_frequencies():
    results = {
        "architectures": [
            {
                "architecture": "weaver",
                "lo1_range": [77e9, 80e9],
                "tuning_range": 3e9,
                "fbw": 0.0382,
            }
        ],
        "optimized_plan": {"if1_center": 5e9},
    }
    text = render_markdown(json.loads(render_json(build_report("plan", 0, {}, results))))
    assert "| weaver | 77.000 GHz - 80.000 GHz | 3.000 GHz | 3.82% |" in text
    assert "Optimized IF1 centre: 5.000 GHz" in text
