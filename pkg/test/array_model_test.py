#!/usr/bin/env python3
"""
相控阵模型测试：几何、移相量化、方向图指标、EIRP
"""

import math

import numpy as np
import pytest

from script.core.array_model import (
    ArrayGeometry,
    PhaseShifterModel,
    angle_grid,
    array_factor,
    array_gain_db,
    beam_metrics,
    eirp,
    eirp_spread,
    element_weights,
    pointing_error_rms,
    quantize_phases,
    steer,
    steering_phases,
)
from script.core.model import ArrayError


def test_geometry_is_centred():
    geom = ArrayGeometry()
    pos = geom.element_positions
    assert pos.shape == (16, 2)
    assert np.allclose(pos.mean(axis=0), 0.0)
    assert np.unique(pos[:, 0]).tolist() == [-0.75, -0.25, 0.25, 0.75]


@pytest.mark.parametrize("kw", [{"rows": 0}, {"spacing": 0.0}])
def test_geometry_rejects(kw):
    with pytest.raises(ArrayError):
        ArrayGeometry(**kw)


def test_steering_rejects_endfire():
    with pytest.raises(ArrayError):
        steering_phases(ArrayGeometry(), 90.0)


def test_broadside_pattern():
    geom = ArrayGeometry()
    report = steer(geom, 0.0)
    assert report.pattern.peak_amplitude == pytest.approx(16.0)
    assert report.achieved_peak_angle == pytest.approx(0.0, abs=1e-6)
    assert 24.0 < report.hpbw < 27.0
    assert report.sidelobe_level_db == pytest.approx(-11.3, abs=0.5)
    assert report.peak_to_null_db > 40.0
    assert report.pattern.values_db.max() == 0.0


def test_ideal_steering_reaches_angle():
    report = steer(ArrayGeometry(), 30.0)
    assert report.achieved_peak_angle == pytest.approx(30.0, abs=0.05)
    assert report.hpbw > steer(ArrayGeometry(), 0.0).hpbw


def test_quantization_to_states():
    ps = PhaseShifterModel(n_states=4)
    q = quantize_phases(np.array([0.1, 1.5, -3.0]), ps)
    assert np.allclose(q, [0.0, math.pi / 2, -math.pi])


@pytest.mark.parametrize("angle", [-30.0, -12.5, 0.0, 17.0, 30.0])
def test_five_bit_steering_within_one_degree(angle):
    report = steer(ArrayGeometry(), angle, PhaseShifterModel(32))
    assert abs(report.achieved_peak_angle - angle) <= 1.0


@pytest.mark.parametrize("angle", [-30.0, -15.0, 0.0, 15.0, 30.0])
def test_peak_to_null_with_feed_mismatch(angle):
    """32 态移相器加 0.02 dB / 0.5° 馈线失配，峰零比仍不低于 15 dB"""
    ps = PhaseShifterModel(32).with_feed_mismatch(16, 0.02, 0.5, seed=1)
    report = steer(ArrayGeometry(), angle, ps)
    assert report.peak_to_null_db >= 15.0


def test_feed_mismatch_is_bounded_and_seeded():
    ps = PhaseShifterModel(32)
    a = ps.with_feed_mismatch(16, 0.02, 0.5, seed=3)
    b = ps.with_feed_mismatch(16, 0.02, 0.5, seed=3)
    assert a == b
    err = np.asarray(a.feed_errors)
    assert np.all(np.abs(err[:, 0]) <= 0.02) and np.all(np.abs(err[:, 1]) <= 0.5)
    with pytest.raises(ArrayError):
        a.feed_arrays(8)


def test_pointing_error_rms():
    """5 bit 移相器在 ±30° 内的 RMS 指向误差小于 1°"""
    geom = ArrayGeometry()
    ps = PhaseShifterModel(32, rms_phase_error_deg=1.0).with_feed_mismatch(16, 0.02, 0.5, seed=1)
    angles = np.arange(-30.0, 30.5, 5.0)
    rms = pointing_error_rms(geom, ps, angles, seed=9)
    assert rms <= 1.0
    assert rms == pointing_error_rms(geom, ps, angles, seed=9)


def test_array_gain_and_weights():
    geom = ArrayGeometry()
    w = element_weights(geom, 20.0)
    assert array_gain_db(geom, w, 20.0) == pytest.approx(20 * math.log10(16))
    with pytest.raises(ArrayError):
        array_factor(geom, w[:4], angle_grid())


def test_metrics_need_full_grid():
    geom = ArrayGeometry()
    pattern = array_factor(geom, element_weights(geom, 0.0), np.linspace(-10, 10, 201))
    with pytest.raises(ArrayError):
        beam_metrics(pattern, 0.0)


def test_eirp():
    assert eirp(-6.0, 16, 12.0) == pytest.approx(30.08, abs=0.01)
    low, high = eirp_spread(-6.0, 16)
    assert high - low == pytest.approx(2.0)
    with pytest.raises(ArrayError):
        eirp(0.0, 0, 12.0)
