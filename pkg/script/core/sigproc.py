"""Waveform, modulation, filtering, noise and metric primitives.

Every stochastic function takes an explicit seed (int, ``SeedSequence`` or
``Generator``) so results are a pure function of (inputs, seed).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np
from scipy import signal as sps_signal
from scipy.special import erfc

from script.core.model import ComplexSignal, EvmResult, SignalError, Spectrum
from script.utils.unit_converter import UnitConverter

logger = logging.getLogger(__name__)

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator, None]

SUPPORTED_ORDERS = (4, 16, 64)
DEFAULT_ROLLOFF = 0.35
DEFAULT_SPAN_SYMBOLS = 16
DEFAULT_SAMPLES_PER_SYMBOL = 8

_DEMOD_CHUNK = 1 << 15
_NYQUIST_TOL = 1e-12
_NYQUIST_MAX_ITER = 12


def make_rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _gray(n: np.ndarray) -> np.ndarray:
    return n ^ (n >> 1)


@dataclass(frozen=True, eq=False)
class QamConstellation:
    """Gray-coded square QAM constellation with unit average power.

    ``points[label]`` is the symbol carrying the bit label ``label``; the
    most significant half of the label selects the I level, the rest Q.
    """

    order: int
    points: np.ndarray
    bit_map: np.ndarray  # (order, bits_per_symbol), row = bits of label

    @property
    def bits_per_symbol(self) -> int:
        return int(self.bit_map.shape[1])

    @classmethod
    def build(cls, order: int) -> "QamConstellation":
        if order not in SUPPORTED_ORDERS:
            raise SignalError(f"unsupported QAM order {order}, expected one of {SUPPORTED_ORDERS}")
        k = int(math.log2(order))
        half = k // 2
        m = 1 << half
        levels = 2.0 * np.arange(m) - (m - 1)

        # gray code -> lattice index
        index_of_gray = np.empty(m, dtype=np.int64)
        index_of_gray[_gray(np.arange(m))] = np.arange(m)

        labels = np.arange(order)
        i_idx = index_of_gray[labels >> half]
        q_idx = index_of_gray[labels & (m - 1)]
        raw = levels[i_idx] + 1j * levels[q_idx]
        points = raw / np.sqrt(np.mean(np.abs(raw) ** 2))

        shifts = np.arange(k - 1, -1, -1)
        bit_map = ((labels[:, None] >> shifts) & 1).astype(np.uint8)
        return cls(order=order, points=points, bit_map=bit_map)


@lru_cache(maxsize=None)
def qam_constellation(order: int) -> QamConstellation:
    return QamConstellation.build(order)


def qam_modulate(bits: np.ndarray, c: QamConstellation) -> np.ndarray:
    """Map Gray-coded bit groups onto constellation points."""
    bits = np.asarray(bits, dtype=np.int64).reshape(-1)
    k = c.bits_per_symbol
    if bits.size % k:
        raise SignalError(f"bit count {bits.size} is not divisible by {k} bits/symbol")
    if bits.size and (bits.min() < 0 or bits.max() > 1):
        raise SignalError("bits must be 0 or 1")
    weights = 1 << np.arange(k - 1, -1, -1)
    labels = bits.reshape(-1, k) @ weights
    return c.points[labels]


def qam_demodulate(symbols: np.ndarray, c: QamConstellation) -> np.ndarray:
    """Hard decision to the nearest point; ties go to the lowest bit label."""
    symbols = np.asarray(symbols, dtype=np.complex128).reshape(-1)
    labels = np.empty(symbols.size, dtype=np.int64)
    for start in range(0, symbols.size, _DEMOD_CHUNK):
        chunk = symbols[start : start + _DEMOD_CHUNK]
        dist = np.abs(chunk[:, None] - c.points[None, :]) ** 2
        labels[start : start + chunk.size] = np.argmin(dist, axis=1)
    return c.bit_map[labels].reshape(-1)


def random_bits(n_symbols: int, c: QamConstellation, seed: SeedLike) -> np.ndarray:
    return make_rng(seed).integers(0, 2, size=n_symbols * c.bits_per_symbol, dtype=np.int64)


def bit_error_rate(tx_bits: np.ndarray, rx_bits: np.ndarray) -> float:
    tx_bits = np.asarray(tx_bits).reshape(-1)
    rx_bits = np.asarray(rx_bits).reshape(-1)
    if tx_bits.size != rx_bits.size or tx_bits.size == 0:
        raise SignalError("bit sequences must be non-empty and of equal length")
    return float(np.mean(tx_bits != rx_bits))


def theoretical_ser(order: int, snr_db: float) -> float:
    """Symbol error rate of square Gray QAM in AWGN (Es/N0 = snr)."""
    snr = 10.0 ** (snr_db / 10.0)
    p = (1.0 - 1.0 / math.sqrt(order)) * erfc(math.sqrt(1.5 * snr / (order - 1)))
    return float(1.0 - (1.0 - p) ** 2)


def _validate_shaping(rolloff: float, span_symbols: int, samples_per_symbol: int) -> None:
    if not 0.0 < rolloff <= 1.0:
        raise SignalError(f"rolloff must be in (0, 1], got {rolloff}")
    if samples_per_symbol < 2:
        raise SignalError(f"samples_per_symbol must be >= 2, got {samples_per_symbol}")
    if span_symbols < 1:
        raise SignalError(f"span_symbols must be >= 1, got {span_symbols}")


@lru_cache(maxsize=32)
def _rrc_taps_cached(rolloff: float, span_symbols: int, samples_per_symbol: int) -> np.ndarray:
    n = span_symbols * samples_per_symbol
    t = (np.arange(n + 1) - n / 2) / samples_per_symbol  # in symbol periods
    b = rolloff
    h = np.empty_like(t)

    at_zero = np.isclose(t, 0.0)
    at_sing = np.isclose(np.abs(t), 1.0 / (4.0 * b))
    rest = ~(at_zero | at_sing)

    h[at_zero] = 1.0 - b + 4.0 * b / np.pi
    h[at_sing] = (b / np.sqrt(2.0)) * (
        (1.0 + 2.0 / np.pi) * np.sin(np.pi / (4.0 * b))
        + (1.0 - 2.0 / np.pi) * np.cos(np.pi / (4.0 * b))
    )
    tr = t[rest]
    h[rest] = (
        np.sin(np.pi * tr * (1.0 - b)) + 4.0 * b * tr * np.cos(np.pi * tr * (1.0 + b))
    ) / (np.pi * tr * (1.0 - (4.0 * b * tr) ** 2))

    h = _nyquist_correct(h, samples_per_symbol)
    h.setflags(write=False)
    return h


def _symbol_lag_correlation(h: np.ndarray, shifts: np.ndarray) -> np.ndarray:
    n = h.size
    return np.array([h[: n - s] @ h[s:] for s in shifts])


def _nyquist_correct(h: np.ndarray, sps: int) -> np.ndarray:
    """Smallest change to truncated taps that makes the RRC-RRC cascade zero-ISI.

    Gauss-Newton on the symbol-spaced autocorrelation ``r``: ``r[0] = 1`` and
    ``r[k] = 0`` otherwise. The end taps are pinned to zero so the widest lag
    vanishes exactly; the minimum-norm step on the rest keeps the taps symmetric.
    """
    n = h.size
    h = h.copy()
    h[0] = h[-1] = 0.0
    h /= np.sqrt(np.sum(h**2))
    shifts = np.arange(0, n - 1, sps)
    target = np.zeros(shifts.size)
    target[0] = 1.0
    residual = _symbol_lag_correlation(h, shifts) - target
    for _ in range(_NYQUIST_MAX_ITER):
        if np.max(np.abs(residual)) < _NYQUIST_TOL:
            return h
        jac = np.zeros((shifts.size, n))
        for row, s in enumerate(shifts):
            jac[row, : n - s] += h[s:]
            jac[row, s:] += h[: n - s]
        h[1:-1] -= np.linalg.lstsq(jac[:, 1:-1], residual, rcond=None)[0]
        residual = _symbol_lag_correlation(h, shifts) - target
    logger.warning("RRC taps left with %.3g residual ISI", np.max(np.abs(residual)))
    return h


def rrc_taps(
    rolloff: float = DEFAULT_ROLLOFF,
    span_symbols: int = DEFAULT_SPAN_SYMBOLS,
    samples_per_symbol: int = DEFAULT_SAMPLES_PER_SYMBOL,
) -> np.ndarray:
    """Unit-energy root-raised-cosine taps, ``span_symbols * sps + 1`` long.

    The truncated taps are nudged so that shaping plus matched filtering is
    free of inter-symbol interference at the symbol centres.
    """
    _validate_shaping(rolloff, span_symbols, samples_per_symbol)
    return _rrc_taps_cached(float(rolloff), int(span_symbols), int(samples_per_symbol))


def rrc_shape(
    symbols: np.ndarray,
    rolloff: float = DEFAULT_ROLLOFF,
    span_symbols: int = DEFAULT_SPAN_SYMBOLS,
    samples_per_symbol: int = DEFAULT_SAMPLES_PER_SYMBOL,
    symbol_rate: float = 1.0,
) -> ComplexSignal:
    """Pulse-shape symbols with an RRC filter.

    Symbol k sits at sample ``k * sps`` of the zero-stuffed stream; the full
    convolution is returned, so the output is ``(n - 1) * sps + len(taps)`` long.
    """
    taps = rrc_taps(rolloff, span_symbols, samples_per_symbol)
    symbols = np.asarray(symbols, dtype=np.complex128).reshape(-1)
    if symbols.size == 0:
        raise SignalError("no symbols to shape")
    upsampled = np.zeros((symbols.size - 1) * samples_per_symbol + 1, dtype=np.complex128)
    upsampled[::samples_per_symbol] = symbols
    shaped = sps_signal.fftconvolve(upsampled, taps, mode="full")
    return ComplexSignal(shaped, sample_rate=symbol_rate * samples_per_symbol)


def matched_filter(
    sig: ComplexSignal,
    n_symbols: int,
    rolloff: float = DEFAULT_ROLLOFF,
    span_symbols: int = DEFAULT_SPAN_SYMBOLS,
    samples_per_symbol: int = DEFAULT_SAMPLES_PER_SYMBOL,
) -> np.ndarray:
    """Apply the RRC matched filter and sample at the symbol centres of ``rrc_shape``."""
    taps = rrc_taps(rolloff, span_symbols, samples_per_symbol)
    delay = taps.size - 1
    needed = delay + (n_symbols - 1) * samples_per_symbol + 1
    if sig.samples.size + taps.size - 1 < needed:
        raise SignalError(f"signal too short for {n_symbols} symbols")
    filtered = sps_signal.fftconvolve(sig.samples, taps, mode="full")
    return filtered[delay : delay + n_symbols * samples_per_symbol : samples_per_symbol]


def add_awgn(sig: ComplexSignal, snr_db: float, seed: SeedLike) -> ComplexSignal:
    """Add circular complex Gaussian noise at ``snr_db`` relative to the measured signal power.

    ``snr_db = inf`` disables the noise and returns the signal untouched.
    """
    if snr_db == math.inf:
        return sig
    if math.isnan(snr_db):
        raise SignalError("snr_db is NaN")
    p_sig = sig.power
    if p_sig <= 0.0:
        raise SignalError("signal has zero power; SNR is undefined")
    noise_var = p_sig / (10.0 ** (snr_db / 10.0))
    rng = make_rng(seed)
    n = sig.samples.size
    noise = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return sig.with_samples(sig.samples + noise * np.sqrt(noise_var / 2.0))


def measure_evm(rx_symbols: np.ndarray, ref_symbols: np.ndarray) -> EvmResult:
    """RMS error vector relative to the RMS of the reference."""
    rx = np.asarray(rx_symbols, dtype=np.complex128).reshape(-1)
    ref = np.asarray(ref_symbols, dtype=np.complex128).reshape(-1)
    if rx.size == 0 or rx.size != ref.size:
        raise SignalError(f"EVM needs equal, non-empty lengths (got {rx.size} and {ref.size})")
    ref_rms = np.sqrt(np.mean(np.abs(ref) ** 2))
    if ref_rms == 0.0:
        raise SignalError("reference symbols have zero RMS")
    errors = rx - ref
    evm = float(np.sqrt(np.mean(np.abs(errors) ** 2)) / ref_rms)
    floor = UnitConverter.DB_FLOOR
    evm_db = floor if evm == 0.0 else max(20.0 * math.log10(evm), floor)
    return EvmResult(evm_rms=evm, evm_db=evm_db, per_symbol_errors=errors)


def one_tap_calibration(rx: np.ndarray, ref: np.ndarray) -> complex:
    """Least-squares complex gain ``g`` with ``rx ≈ g * ref``."""
    rx = np.asarray(rx, dtype=np.complex128).reshape(-1)
    ref = np.asarray(ref, dtype=np.complex128).reshape(-1)
    denom = np.vdot(ref, ref)
    if rx.size != ref.size or denom == 0:
        raise SignalError("calibration needs equal-length, non-zero preamble")
    g = complex(np.vdot(ref, rx) / denom)
    if g == 0:
        raise SignalError("calibration gain is zero; nothing was received")
    return g


def power_spectrum(sig: ComplexSignal, fft_size: int = 1024) -> Spectrum:
    """Welch-averaged two-sided PSD (Hann, 50 % overlap, no detrending)."""
    if fft_size < 64 or fft_size & (fft_size - 1):
        raise SignalError(f"fft_size must be a power of two >= 64, got {fft_size}")
    if sig.samples.size < fft_size:
        raise SignalError(f"signal length {sig.samples.size} is shorter than fft_size {fft_size}")
    freqs, psd = sps_signal.welch(
        sig.samples,
        fs=sig.sample_rate,
        window="hann",
        nperseg=fft_size,
        noverlap=fft_size // 2,
        detrend=False,
        return_onesided=False,
        scaling="density",
    )
    freqs = np.fft.fftshift(freqs) + sig.center_freq
    psd = np.fft.fftshift(psd)
    return Spectrum(freqs=freqs, psd=psd, resolution=sig.sample_rate / fft_size)


def band_power(spec: Spectrum, f_low: float, f_high: float) -> float:
    """Integrated power of the bins whose centre lies in ``[f_low, f_high]``."""
    mask = (spec.freqs >= f_low) & (spec.freqs <= f_high)
    return float(np.sum(spec.psd[mask]) * spec.resolution)


def occupied_bandwidth(sig: ComplexSignal, level_db: float = -40.0, fft_size: int = 4096) -> float:
    """Width between the outermost bins within ``level_db`` of the PSD peak."""
    if sig.power == 0.0:
        return 0.0
    spec = power_spectrum(sig, fft_size=min(fft_size, _floor_pow2(sig.samples.size)))
    psd_db = spec.psd_db
    above = np.nonzero(psd_db >= np.max(psd_db) + level_db)[0]
    return float(spec.freqs[above[-1]] - spec.freqs[above[0]] + spec.resolution)


def _floor_pow2(n: int) -> int:
    return 1 << (int(n).bit_length() - 1)
