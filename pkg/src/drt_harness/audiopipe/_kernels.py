"""Hot numeric kernels with numba acceleration and a pure-numpy fallback.

The backend is chosen once at import time: set DRT_HARNESS_NUMBA=0 to
force the numpy path (or when numba is not importable). Both paths
implement the same arithmetic; summation order may differ in the last
few ulps. `benchmarks/bench_kernels.py` compares the two.
"""

from __future__ import annotations

import os

import numpy as np

_env = os.environ.get("DRT_HARNESS_NUMBA", "").strip().lower()
if _env in ("0", "false", "no", "off"):
    _want_numba = False
else:
    _want_numba = True

if _want_numba:
    try:
        from numba import njit

        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        HAVE_NUMBA = False
else:
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA

# Segment upper edges of the biased mu-law magnitude, segments 0..7.
_SEG_EDGES = np.array([64, 128, 256, 512, 1024, 2048, 4096], dtype=np.int64)


def filter_bank(h: np.ndarray, up: int) -> np.ndarray:
    """Polyphase decomposition of h, rows reversed for contiguous dot
    products: bank[p, i] = h[p + (K-1-i)*up]."""
    n_taps = h.shape[0]
    taps_per_phase = (n_taps + up - 1) // up
    bank = np.zeros((up, taps_per_phase), dtype=np.float64)
    for p in range(up):
        for k in range(taps_per_phase):
            idx = p + k * up
            if idx < n_taps:
                bank[p, taps_per_phase - 1 - k] = h[idx]
    return bank


def _polyphase_resample_np(x: np.ndarray, h: np.ndarray, up: int, down: int,
                           delay: int, n_out: int) -> np.ndarray:
    """Zero-stuff by `up`, FIR filter, take every `down`-th sample."""
    xup = np.zeros(x.shape[0] * up, dtype=np.float64)
    xup[::up] = x
    full = np.convolve(xup, h)
    idx = np.arange(n_out, dtype=np.int64) * down + delay
    out = np.zeros(n_out, dtype=np.float64)
    valid = idx < full.shape[0]
    out[valid] = full[idx[valid]]
    return out


def _polyphase_resample_loop(x, bank, up, down, delay, n_out):
    # y[j] = sum_i bank[p, i] * x[n_lo + i]: one contiguous dot product per
    # output sample, no up*len(x) intermediate. Interior samples take the
    # BLAS dot; only the filter-length edges walk a bounded scalar loop.
    y = np.zeros(n_out, dtype=np.float64)
    n_in = x.shape[0]
    taps_per_phase = bank.shape[1]
    for j in range(n_out):
        m0 = j * down + delay
        phase = m0 % up
        n_lo = (m0 - phase) // up - taps_per_phase + 1
        row = bank[phase]
        if n_lo >= 0 and n_lo + taps_per_phase <= n_in:
            y[j] = np.dot(row, x[n_lo:n_lo + taps_per_phase])
        else:
            i_start = -n_lo if n_lo < 0 else 0
            i_stop = n_in - n_lo
            if i_stop > taps_per_phase:
                i_stop = taps_per_phase
            acc = 0.0
            for i in range(i_start, i_stop):
                acc += row[i] * x[n_lo + i]
            y[j] = acc
    return y


def _mulaw_encode_loop(mag, negative, out):
    # Biased-log companding over the 14-bit domain; codeword bits are
    # transmitted inverted per G.711 (sign bit 1 marks positive values).
    for i in range(mag.shape[0]):
        m = mag[i]
        if m > 8159:
            m = 8159
        m += 33
        if m > 8191:
            m = 8191
        seg = 0
        t = m >> 6
        while t != 0:
            seg += 1
            t >>= 1
        q = (m >> (seg + 1)) & 0x0F
        code = ((7 - seg) << 4) | (15 - q)
        if not negative[i]:
            code |= 0x80
        out[i] = code
    return out


def _mulaw_encode_np(mag, negative, out):
    m = np.minimum(mag, 8159) + 33
    np.minimum(m, 8191, out=m)
    seg = np.searchsorted(_SEG_EDGES, m, side="right")
    q = (m >> (seg + 1)) & 0x0F
    code = ((7 - seg) << 4) | (15 - q)
    code[~negative] |= 0x80
    out[:] = code
    return out


if USE_NUMBA:
    _resample_jit = njit(cache=True, fastmath=True)(_polyphase_resample_loop)

    def polyphase_resample(x, h, up, down, delay, n_out):
        return _resample_jit(x, filter_bank(h, up), up, down, delay, n_out)

    mulaw_encode_raw = njit(cache=True)(_mulaw_encode_loop)
else:
    polyphase_resample = _polyphase_resample_np
    mulaw_encode_raw = _mulaw_encode_np
