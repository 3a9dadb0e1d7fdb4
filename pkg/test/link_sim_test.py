#!/usr/bin/env python3
"""
端到端链路仿真测试

多数用例波形较短（2000 个符号）以控制运行时间；EVM 与 SNR 的对照用 2 万个符号
"""

import math
from dataclasses import replace
from pathlib import Path

import pytest

from script.config_loader import ConfigLoader
from script.core.link_sim import (
    ChannelSettings,
    LinkSettings,
    ModulationSpec,
    Scenario,
    WeaverSettings,
    band_switch_experiment,
    beam_sweep_experiment,
    calibrate_residual,
    impairment_sweep,
    run_link,
)
from script.core.model import LinkError, Sideband
from script.core.weaver import IqImpairment, analytic_irr

PAPER_SCENARIO = Path(__file__).parent.parent / "config" / "scenarios" / "paper.yaml"
SHORT = (ModulationSpec(16, 2e9, 2000), ModulationSpec(64, 1.5e9, 2000))
FULL = (ModulationSpec(16, 2e9, 20_000), ModulationSpec(64, 1.5e9, 20_000))


def _scenario(snr_db=math.inf, **kw):
    kw.setdefault("link", LinkSettings(preamble_symbols=256))
    return Scenario(modulations=SHORT, channel=ChannelSettings(snr_db=snr_db), **kw)


def test_ideal_link_is_clean():
    report = run_link(_scenario())
    assert len(report.runs) == 4
    for run in report.runs:
        assert run.evm_db < -40.0
        assert run.ber == 0.0
    assert set(report.evm) == {"LB", "UB"}
    assert report.array_effect_db == pytest.approx(0.0, abs=1e-9)
    assert "tx_spectrum" in report.to_dict()["runs"][0]


def test_link_is_deterministic():
    """相同种子两次运行结果完全一致"""
    s = _scenario(snr_db=25.0)
    assert run_link(s).to_dict() == run_link(s).to_dict()
    other = run_link(s.with_seed(1)).to_dict()
    assert other["runs"][0]["constellation"] != run_link(s).to_dict()["runs"][0]["constellation"]


@pytest.mark.parametrize("snr_db", [15.0, 20.0, 24.0, 30.0])
def test_noise_limited_evm(snr_db):
    """无失配时 EVM 由 AWGN 决定：EVM = -SNR"""
    report = run_link(Scenario(modulations=FULL, channel=ChannelSettings(snr_db=snr_db)))
    for run in report.runs:
        assert run.evm_db == pytest.approx(-snr_db, abs=0.3)


def test_iq_imbalance_is_calibrated_out():
    """收发对称时镜像泄漏相干返回，单抽头校准即可消除"""
    s = _scenario(impairments=(IqImpairment(1.0, 2.5),))
    for run in run_link(s).runs:
        assert run.evm_db < -40.0


def test_image_interferer_follows_irr():
    s = _scenario(
        impairments=(IqImpairment(1.0, 2.5),),
        link=LinkSettings(preamble_symbols=256, image_interferer_db=0.0),
    )
    evm = run_link(s).evm
    assert evm["LB"]["64-QAM"] == pytest.approx(-analytic_irr(1.0, 2.5), abs=1.5)

    clean = run_link(replace(s, impairments=())).evm
    assert clean["LB"]["64-QAM"] < -40.0


def test_band_switch_symmetric_chain():
    s = _scenario(snr_db=30.0, impairments=(IqImpairment(1.0, 2.5),))
    result = band_switch_experiment(s, 64)
    assert result.calibrated_band == "LB"
    assert result.variation_db <= 0.2


def test_band_switch_measured_scenario():
    """样机场景下切换频段、沿用 LB 校准，EVM 变化不超过 2 dB"""
    s = ConfigLoader(str(PAPER_SCENARIO)).build_scenario()
    for mod in s.modulations:
        assert band_switch_experiment(s, mod.order).variation_db <= 2.0


def test_band_switch_asymmetric_chain():
    """只存在于 USB 通路的失配使切换后的冻结校准失效"""
    s = _scenario(snr_db=40.0, impairments=(IqImpairment(1.0, 2.5, sideband=Sideband.USB),))
    result = band_switch_experiment(s, 16)
    assert result.evm_ub > -20.0
    assert result.variation_db > 10.0


def test_beam_sweep():
    sweep = beam_sweep_experiment(_scenario(), [-30.0, 0.0, 30.0], order=16)
    assert len(sweep.reports) == 3
    assert sweep.coverage_ok
    assert all(e < -40.0 for e in sweep.evm_db)
    assert len(sweep.to_dict()["points"]) == 3
    with pytest.raises(LinkError):
        beam_sweep_experiment(_scenario(), [95.0])


def test_calibrate_residual_hits_target():
    s = Scenario(modulations=SHORT, link=LinkSettings(preamble_symbols=256))
    fit = calibrate_residual(s)
    assert fit.evm_db["64-QAM"] == pytest.approx(-24.0, abs=0.05)
    assert 1.0 < fit.knob_db < 5.0
    assert fit.evm_db["16-QAM"] == pytest.approx(-19.0, abs=1.0)
    assert fit.scenario.weaver.gain_flatness_db == fit.knob_db


def test_calibrate_residual_unreachable():
    s = Scenario(modulations=SHORT, link=LinkSettings(preamble_symbols=256))
    s = replace(s, calibration=replace(s.calibration, target_evm_db=-90.0))
    with pytest.raises(LinkError, match="unreachable"):
        calibrate_residual(s)


def test_impairment_sweep_monotone():
    s = _scenario(link=LinkSettings(preamble_symbols=256, image_interferer_db=0.0))
    points = impairment_sweep(s, "gain_imbalance_db", [0.5, 1.0, 2.0], order=16)
    evms = [p.evm_db for p in points]
    assert evms == sorted(evms)
    with pytest.raises(LinkError):
        impairment_sweep(s, "noise_figure_db", [1.0])


@pytest.mark.parametrize("mod", [(16, 2.5e9), (32, 1e9)])
def test_scenario_rejects_modulation(mod):
    with pytest.raises(LinkError):
        Scenario(modulations=(ModulationSpec(*mod),))


def test_stage_failure_names_stage():
    s = _scenario(weaver=WeaverSettings(channel=73.7e9))
    with pytest.raises(LinkError) as err:
        run_link(s)
    assert err.value.stage == "weaver"
