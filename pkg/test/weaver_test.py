#!/usr/bin/env python3
"""
Weaver 双级镜像抑制混频链测试
"""

import numpy as np
import pytest

from script.core.freq_plan import BandPlan, plan_weaver
from script.core.model import ChainError, ComplexSignal, Direction, Sideband, Stage, Topology
from script.core.sigproc import band_power, power_spectrum
from script.core.weaver import (
    IRR_CAP_DB,
    IqImpairment,
    SharedIfTopology,
    WeaverConfig,
    analytic_irr,
    chain_irr,
    combine_shared_if,
    count_components,
    mixer_coefficients,
    select_sideband,
    simulate_irr,
    split_shared_if,
    weaver_config_for,
    weaver_downconvert,
    weaver_upconvert,
)

FS = 32e9


def _tone(freq, n=4096, fs=FS):
    return ComplexSignal(np.exp(2j * np.pi * freq / fs * np.arange(n)), sample_rate=fs)


def _cfg(**kw):
    kw.setdefault("lo1", 78.5e9)
    kw.setdefault("lo2", 5e9)
    return WeaverConfig(**kw)


def test_config_defaults_and_centres():
    cfg = _cfg()
    assert cfg.if1_band == (3.5e9, 6.5e9)
    assert cfg.rf_center == 73.5e9
    assert cfg.image_center == 83.5e9
    usb = select_sideband(cfg)
    assert usb.sideband_bit is Sideband.USB
    assert usb.rf_center == 83.5e9
    assert select_sideband(usb) == cfg


@pytest.mark.parametrize(
    "kw",
    [
        {"lo1": 4e9, "lo2": 5e9},
        {"lo2": 0.0},
        {"if1_band": (6e9, 7e9)},
        {"if1_band": (2e9, 8e9)},
    ],
)
def test_config_rejects_invalid(kw):
    with pytest.raises(ChainError):
        _cfg(**kw)


@pytest.mark.parametrize("gain,phase", [(7.0, 0.0), (0.0, -31.0)])
def test_impairment_guard(gain, phase):
    with pytest.raises(ChainError):
        IqImpairment(gain, phase)


def test_ideal_mixer_coefficients():
    mu, nu = mixer_coefficients(IqImpairment().matrix)
    assert mu == pytest.approx(1.0)
    assert nu == pytest.approx(0.0)


def test_analytic_irr_values():
    assert analytic_irr(0.0, 0.0) == IRR_CAP_DB
    assert analytic_irr(1.0, 2.5) == pytest.approx(24.2, abs=0.1)
    assert analytic_irr(0.5, 1.0) > analytic_irr(1.0, 1.0) > analytic_irr(2.0, 1.0)


def test_chain_irr_adds_leakage_in_power():
    stage_if = IqImpairment(1.0, 2.5, Stage.IF)
    stage_rf = IqImpairment(1.0, 2.5, Stage.RF)
    single = chain_irr([stage_if])
    assert single == pytest.approx(analytic_irr(1.0, 2.5), abs=1e-9)
    assert chain_irr([stage_if, stage_rf]) == pytest.approx(single - 10 * np.log10(2), abs=1e-9)


def test_sideband_restricted_impairment():
    imp = IqImpairment(1.0, 2.5, sideband=Sideband.USB)
    assert chain_irr([imp], Sideband.LSB) == IRR_CAP_DB
    assert chain_irr([imp], Sideband.USB) < 30.0


@pytest.mark.parametrize("sideband", [Sideband.LSB, Sideband.USB])
@pytest.mark.parametrize("gain,phase", [(0.5, 1.0), (1.0, 2.5), (2.0, 5.0)])
def test_simulated_irr_matches_analytic(sideband, gain, phase):
    """时域双音测量与解析 IRR 一致"""
    cfg = _cfg(sideband_bit=sideband, direction=Direction.RX)
    imp = [IqImpairment(gain, phase)]
    assert simulate_irr(cfg, imp) == pytest.approx(analytic_irr(gain, phase), abs=0.5)


def test_simulated_irr_ideal_is_capped():
    assert simulate_irr(_cfg(), []) == IRR_CAP_DB


def test_simulated_irr_rejects_close_tones():
    with pytest.raises(ChainError, match="indistinguishable"):
        simulate_irr(_cfg(), [], desired_offset_bins=25, image_offset_bins=24)


@pytest.mark.parametrize("sideband", [Sideband.LSB, Sideband.USB])
def test_upconvert_selects_sideband(sideband):
    cfg = _cfg(sideband_bit=sideband)
    rf = weaver_upconvert(_tone(250e6, n=1 << 15), cfg)
    assert rf.center_freq == cfg.lo1
    spec = power_spectrum(rf, fft_size=1024)
    wanted = cfg.rf_center + (250e6 if sideband is Sideband.USB else -250e6)
    image = 2 * cfg.lo1 - wanted
    assert band_power(spec, wanted - 100e6, wanted + 100e6) == pytest.approx(rf.power, rel=1e-3)
    assert band_power(spec, image - 100e6, image + 100e6) < 1e-9


@pytest.mark.parametrize("sideband", [Sideband.LSB, Sideband.USB])
def test_round_trip_recovers_baseband(sideband):
    tx = _cfg(sideband_bit=sideband)
    x = _tone(-310e6)
    y = weaver_downconvert(weaver_upconvert(x, tx), tx.with_direction(Direction.RX))
    assert y.center_freq == 0.0
    assert np.allclose(y.samples, x.samples, atol=1e-9)


def test_conversion_gain_applies_per_stage():
    tx = _cfg(conversion_gain_db=3.0)
    rf = weaver_upconvert(_tone(100e6), tx)
    assert 10 * np.log10(rf.power) == pytest.approx(6.0)


def test_direction_is_enforced():
    with pytest.raises(ChainError):
        weaver_upconvert(_tone(0.0), _cfg(direction=Direction.RX))
    with pytest.raises(ChainError):
        weaver_downconvert(_tone(0.0), _cfg())


def test_downconvert_rejects_wrong_reference():
    rf = ComplexSignal(np.ones(64), sample_rate=FS, center_freq=70e9)
    with pytest.raises(ChainError, match="referenced"):
        weaver_downconvert(rf, _cfg(direction=Direction.RX))


def test_bandwidth_and_aliasing_guards():
    rng = np.random.default_rng(0)
    wide = ComplexSignal(rng.standard_normal(8192) + 1j * rng.standard_normal(8192), sample_rate=FS)
    with pytest.raises(ChainError, match="exceeds"):
        weaver_upconvert(wide, _cfg())
    with pytest.raises(ChainError, match="aliasing"):
        weaver_upconvert(_tone(10e6, fs=8e9), _cfg())


def test_component_counts():
    assert count_components(16, Topology.PER_ELEMENT).iq_mixers == 32
    shared = count_components(16, Topology.SHARED_IF)
    assert (shared.iq_mixers, shared.iq_filters) == (18, 2)
    assert SharedIfTopology(16).components == shared
    with pytest.raises(ChainError):
        count_components(0)


def test_shared_if_split_and_combine():
    x = _tone(100e6, n=256)
    copies = split_shared_if(x, 4)
    assert len(copies) == 4
    combined = combine_shared_if(copies)
    assert np.allclose(combined.samples, 4 * x.samples)
    with pytest.raises(ChainError):
        combine_shared_if([x, _tone(100e6, n=128)])


def test_config_from_plan():
    plan = plan_weaver(BandPlan())
    lb = weaver_config_for(plan, 73.5e9)
    ub = weaver_config_for(plan, 83.5e9)
    assert lb.lo1 == ub.lo1 == 78.5e9
    assert lb.sideband_bit is Sideband.LSB and ub.sideband_bit is Sideband.USB
    assert lb.rf_center == 73.5e9 and ub.rf_center == 83.5e9
    with pytest.raises(ChainError):
        weaver_config_for(plan, 73.7e9)
