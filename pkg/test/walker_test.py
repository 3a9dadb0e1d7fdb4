#!/usr/bin/env python3
"""
扫描点枚举测试
"""

import pytest

from script.core.model import SimulationError, Stage
from script.core.walker import Walker, parse_angles


def test_parse_range_inclusive():
    angles = parse_angles("-30:5:30")
    assert len(angles) == 13
    assert angles[0] == -30.0 and angles[-1] == 30.0


def test_parse_list_and_descending():
    assert parse_angles("0, 12.5,-7") == [0.0, 12.5, -7.0]
    assert parse_angles("10:-5:0") == [10.0, 5.0, 0.0]


@pytest.mark.parametrize("spec", ["0:0:10", "0:5:-10", "a:b:c", "1:2"])
def test_parse_rejects(spec):
    with pytest.raises(SimulationError):
        parse_angles(spec)


def test_impairment_grid_order():
    points = list(Walker().iter_impairment_grid([0.0, 1.0], [0.0, 2.5], Stage.RF))
    assert [(g, p) for g, p, _ in points] == [(0.0, 0.0), (0.0, 2.5), (1.0, 0.0), (1.0, 2.5)]
    assert all(imp.applies_to is Stage.RF for _, _, imp in points)
