#!/usr/bin/env python3
"""
信号处理原语测试

覆盖 QAM 映射、RRC 成形与匹配滤波、AWGN、EVM、频谱估计
"""

import math

import numpy as np
import pytest

from script.core.model import ComplexSignal, SignalError
from script.core.sigproc import (
    add_awgn,
    band_power,
    bit_error_rate,
    matched_filter,
    measure_evm,
    occupied_bandwidth,
    one_tap_calibration,
    power_spectrum,
    qam_constellation,
    qam_demodulate,
    qam_modulate,
    random_bits,
    rrc_shape,
    rrc_taps,
    theoretical_ser,
)


@pytest.mark.parametrize("order", [4, 16, 64])
def test_constellation_unit_power_and_gray(order):
    """星座点平均功率为 1，最近邻只差一个比特"""
    c = qam_constellation(order)
    assert c.points.size == order
    assert np.mean(np.abs(c.points) ** 2) == pytest.approx(1.0)

    d_min = min(abs(a - b) for i, a in enumerate(c.points) for b in c.points[i + 1 :])
    for i, a in enumerate(c.points):
        for j, b in enumerate(c.points):
            if i != j and abs(a - b) == pytest.approx(d_min):
                assert np.sum(c.bit_map[i] != c.bit_map[j]) == 1


def test_unsupported_order():
    with pytest.raises(SignalError):
        qam_constellation(32)


def test_modulate_demodulate_noiseless():
    c = qam_constellation(64)
    bits = random_bits(1000, c, seed=1)
    assert np.array_equal(qam_demodulate(qam_modulate(bits, c), c), bits)


def test_modulate_rejects_partial_symbol():
    with pytest.raises(SignalError):
        qam_modulate(np.array([0, 1, 1]), qam_constellation(16))


def test_bit_error_rate():
    assert bit_error_rate(np.array([0, 1, 1, 0]), np.array([0, 1, 0, 0])) == 0.25
    with pytest.raises(SignalError):
        bit_error_rate(np.array([0, 1]), np.array([0]))


def test_rrc_taps_unit_energy_symmetric():
    h = rrc_taps(0.35, 16, 8)
    assert h.size == 16 * 8 + 1
    assert np.sum(h**2) == pytest.approx(1.0)
    assert np.allclose(h, h[::-1])


@pytest.mark.parametrize("span", [4, 16, 32])
def test_rrc_cascade_has_no_isi(span):
    """级联 RRC 在符号间隔上的自相关为单位冲激"""
    h = rrc_taps(0.35, span, 8)
    cascade = np.convolve(h, h)[h.size - 1 :: 8]
    assert cascade[0] == pytest.approx(1.0, abs=1e-9)
    assert np.max(np.abs(cascade[1:])) < 1e-9


def test_rrc_taps_stay_close_to_closed_form():
    h = rrc_taps(0.35, 16, 8)
    # continuous-time peak, scaled to unit energy at 8 samples per symbol
    peak = (1.0 - 0.35 + 4 * 0.35 / np.pi) / np.sqrt(8)
    assert h[h.size // 2] == pytest.approx(peak, rel=0.02)
    assert h[0] == h[-1] == 0.0
    assert h[h.size // 2] == np.max(h)


@pytest.mark.parametrize("rolloff", [0.0, 1.5])
def test_rrc_rejects_bad_rolloff(rolloff):
    with pytest.raises(SignalError):
        rrc_taps(rolloff, 16, 8)


def test_shape_then_matched_filter_recovers_symbols():
    """默认 16 个符号长度的 RRC：成形 + 匹配滤波后逐符号误差不超过 1e-3"""
    c = qam_constellation(4)
    symbols = qam_modulate(random_bits(4000, c, seed=3), c)
    shaped = rrc_shape(symbols, 0.35, 16, 8, symbol_rate=2e9)
    assert shaped.sample_rate == 16e9
    rx = matched_filter(shaped, symbols.size, 0.35, 16, 8)
    assert np.max(np.abs(rx - symbols)) <= 1e-3


def test_occupied_bandwidth_of_rrc():
    """0.35 滚降、2 Gsym/s：-40 dB 占用带宽约 2.7 GHz"""
    c = qam_constellation(4)
    symbols = qam_modulate(random_bits(4000, c, seed=4), c)
    shaped = rrc_shape(symbols, 0.35, 16, 8, symbol_rate=2e9)
    assert occupied_bandwidth(shaped, level_db=-40.0) == pytest.approx(2.7e9, abs=0.1e9)


def test_awgn_snr_and_determinism():
    sig = ComplexSignal(np.exp(1j * np.linspace(0, 50, 200_000)), sample_rate=1.0)
    a = add_awgn(sig, 10.0, seed=7)
    b = add_awgn(sig, 10.0, seed=7)
    assert np.array_equal(a.samples, b.samples)
    noise_power = np.mean(np.abs(a.samples - sig.samples) ** 2)
    assert 10 * math.log10(sig.power / noise_power) == pytest.approx(10.0, abs=0.1)


def test_awgn_infinite_snr_is_identity():
    sig = ComplexSignal(np.ones(16), sample_rate=1.0)
    assert add_awgn(sig, math.inf, seed=0) is sig


def test_awgn_rejects_zero_power():
    with pytest.raises(SignalError):
        add_awgn(ComplexSignal(np.zeros(8), sample_rate=1.0), 10.0, seed=0)


def test_measure_evm():
    ref = qam_constellation(16).points
    assert measure_evm(ref, ref).evm_rms == 0.0
    result = measure_evm(ref * 1.1, ref)
    assert result.evm_rms == pytest.approx(0.1)
    assert result.evm_db == pytest.approx(-20.0)
    with pytest.raises(SignalError):
        measure_evm(ref[:3], ref)


def test_one_tap_calibration_recovers_gain():
    ref = qam_constellation(64).points
    g = 0.3 * np.exp(1j * 0.7)
    assert one_tap_calibration(g * ref, ref) == pytest.approx(g)


def test_welch_parseval_and_band_power():
    """Welch 积分功率等于时域平均功率"""
    rng = np.random.default_rng(11)
    noise = rng.standard_normal(1 << 16) + 1j * rng.standard_normal(1 << 16)
    sig = ComplexSignal(noise, sample_rate=1e6)
    spec = power_spectrum(sig, fft_size=1024)
    assert spec.total_power == pytest.approx(sig.power, rel=0.02)

    n = np.arange(1 << 14)
    tone = ComplexSignal(np.exp(2j * np.pi * 0.125 * n), sample_rate=1.0, center_freq=10.0)
    spec = power_spectrum(tone, fft_size=256)
    assert band_power(spec, 10.1, 10.15) == pytest.approx(1.0, rel=0.01)
    assert band_power(spec, 9.8, 10.0) < 1e-6


def test_power_spectrum_rejects_bad_fft():
    sig = ComplexSignal(np.ones(100), sample_rate=1.0)
    with pytest.raises(SignalError):
        power_spectrum(sig, fft_size=1000)
    with pytest.raises(SignalError):
        power_spectrum(sig, fft_size=128)


def test_simulated_ser_matches_theory():
    c = qam_constellation(16)
    bits = random_bits(50_000, c, seed=5)
    symbols = qam_modulate(bits, c)
    noisy = add_awgn(ComplexSignal(symbols, sample_rate=1.0), 14.0, seed=6)
    rx_bits = qam_demodulate(noisy.samples, c).reshape(-1, 4)
    ser = np.mean(np.any(rx_bits != bits.reshape(-1, 4), axis=1))
    assert ser == pytest.approx(theoretical_ser(16, 14.0), rel=0.15)
