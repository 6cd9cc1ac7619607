"""Fractional-delay and resampling primitives shared by channel and receiver.

Two distinct resamplers live here on purpose: the channel-side impairment
(`resample_arbitrary`, a long polyphase windowed-sinc interpolator) and the
receiver-side correction chain (`sfo_correction_chain`, FIR interpolate-by-2,
cubic polynomial rate conversion, FIR decimate-by-2). Keeping them different
avoids testing an implementation against itself.
"""

from __future__ import annotations

import numpy as np
from scipy import signal


class DataError(ValueError):
    """Raised for non-finite or malformed sample data."""


def require_finite(x: np.ndarray, what: str = "input") -> None:
    if not np.all(np.isfinite(x)):
        raise DataError(f"{what} contains non-finite samples")


# ---------------------------------------------------------------------------
# fractional delay (single fixed sub-sample shift)

_FRAC_DELAY_TAPS = 63
_FRAC_DELAY_BETA = 8.0


def fractional_delay(x: np.ndarray, delay_samples: float,
                     out_len: int | None = None) -> np.ndarray:
    """Delay ``x`` by an arbitrary (possibly fractional) number of samples.

    Windowed-sinc interpolation, 63 taps, Kaiser beta=8; the filter group
    delay is compensated so output index n corresponds to x(n - delay).
    The default output length extends past the input by the integer delay
    plus half a filter length to hold the shifted tail.
    """
    x = np.asarray(x, dtype=np.complex128)
    n_int = int(np.floor(delay_samples))
    frac = delay_samples - n_int
    ntaps = _FRAC_DELAY_TAPS
    center = (ntaps - 1) // 2
    if frac == 0.0:
        h = np.zeros(ntaps)
        h[center] = 1.0
    else:
        arg = np.arange(ntaps) - center - frac
        h = np.sinc(arg) * _kaiser_at(arg, ntaps, _FRAC_DELAY_BETA)
    y = signal.fftconvolve(x, h, mode="full")  # y[m] ~ x(m - center - frac)
    if out_len is None:
        out_len = x.size + max(n_int, 0) + center + 1
    out = np.zeros(out_len, dtype=np.complex128)
    # out[n] = y[n + center - n_int]
    shift = n_int - center
    n_lo = max(0, shift)
    n_hi = min(out_len, y.size + shift)
    if n_hi > n_lo:
        out[n_lo:n_hi] = y[n_lo - shift:n_hi - shift]
    return out


def _kaiser_at(t: np.ndarray, ntaps: int, beta: float) -> np.ndarray:
    """Kaiser window evaluated at (possibly fractional) tap offsets ``t``
    from the filter center, for a length-``ntaps`` design."""
    half = (ntaps - 1) / 2.0
    r = np.clip(t / half, -1.0, 1.0)
    return np.i0(beta * np.sqrt(1.0 - r * r)) / np.i0(beta)


# ---------------------------------------------------------------------------
# arbitrary-ratio polyphase resampler (channel-side SFO impairment)

_POLY_TAPS = 80
_POLY_PHASES = 16384  # dense enough for nearest-phase lookup below 1e-4 error
_POLY_BETA = 9.5  # ~95 dB Kaiser design; passband flat to ~0.46 Fs


def _polyphase_table() -> np.ndarray:
    k = np.arange(_POLY_TAPS) - (_POLY_TAPS // 2 - 1)
    mu = np.arange(_POLY_PHASES + 1)[:, None] / _POLY_PHASES
    arg = k[None, :] - mu
    return np.sinc(arg) * _kaiser_at(arg, _POLY_TAPS, _POLY_BETA)


_TABLE: np.ndarray | None = None


def resample_arbitrary(x: np.ndarray, ratio: float, t0: float = 0.0,
                       out_len: int | None = None,
                       chunk: int = 1 << 18) -> np.ndarray:
    """Evaluate band-limited interpolation of ``x`` at times n*ratio + t0.

    Polyphase windowed-sinc table (80 taps) with nearest-phase lookup; the
    phase grid is dense enough that quantization stays below the filter's
    own passband error. Samples outside the input are treated as zero.
    """
    global _TABLE
    if _TABLE is None:
        _TABLE = _polyphase_table()
    x = np.asarray(x, dtype=np.complex128)
    if out_len is None:
        out_len = int(np.floor((x.size - 1 - t0) / ratio)) + 1 if ratio > 0 else x.size
        out_len = max(out_len, 0)
    half = _POLY_TAPS // 2 - 1
    xp = np.concatenate([np.zeros(half, dtype=np.complex128), x,
                         np.zeros(_POLY_TAPS, dtype=np.complex128)])
    y = np.empty(out_len, dtype=np.complex128)
    offs = np.arange(_POLY_TAPS)
    for s in range(0, out_len, chunk):
        n = np.arange(s, min(s + chunk, out_len))
        t = n * ratio + t0
        base = np.floor(t).astype(np.int64)
        mu = t - base
        p0 = np.rint(mu * _POLY_PHASES).astype(np.int64)
        coeff = _TABLE[p0]
        idx = base[:, None] + offs[None, :]  # xp offset: base - half + half
        np.clip(idx, 0, xp.size - 1, out=idx)
        y[s:s + n.size] = np.einsum("ij,ij->i", coeff, xp[idx])
    return y


# ---------------------------------------------------------------------------
# receiver-side SFO correction chain: FIR x2 -> cubic SRC -> FIR /2

_STAGE_TAPS = 48
_STAGE_BETA = 7.0
_BYPASS_THRESHOLD = 1e-8


def _halfband_fir() -> np.ndarray:
    # cutoff at 1/4 of the doubled rate; 48 taps per the stage budget
    return signal.firwin(_STAGE_TAPS, 0.5, window=("kaiser", _STAGE_BETA))


def _cubic_lagrange(u: np.ndarray, t: np.ndarray) -> np.ndarray:
    """4-tap cubic Lagrange interpolation of u at fractional indices t."""
    base = np.floor(t).astype(np.int64)
    mu = t - base
    up = np.concatenate([np.zeros(2, dtype=u.dtype), u, np.zeros(3, dtype=u.dtype)])
    i = base + 2  # offset from the left zero pad
    np.clip(i, 1, up.size - 3, out=i)
    xm1, x0, x1, x2 = up[i - 1], up[i], up[i + 1], up[i + 2]
    c0 = x0
    c1 = -xm1 / 3.0 - 0.5 * x0 + x1 - x2 / 6.0
    c2 = 0.5 * (xm1 + x1) - x0
    c3 = (x2 - xm1) / 6.0 + 0.5 * (x0 - x1)
    return ((c3 * mu + c2) * mu + c1) * mu + c0


def sfo_correction_chain(y: np.ndarray, delta_hat: float) -> np.ndarray:
    """Resample so that output m equals y evaluated at m/(1+delta_hat).

    Three stages: interpolate by 2 (48-tap Kaiser FIR), cubic polynomial
    arbitrary-ratio conversion, decimate by 2 (48-tap Kaiser FIR). All group
    delays are folded into the conversion instants, so the output is aligned
    with the input. Ratios below the estimator's numerical floor bypass the
    chain entirely.
    """
    y = np.asarray(y, dtype=np.complex128)
    if abs(delta_hat) < _BYPASS_THRESHOLD:
        return y.copy()
    h = _halfband_fir()
    d = (_STAGE_TAPS - 1) / 2.0  # group delay of each stage at the 2x rate
    u = signal.upfirdn(2.0 * h, y, up=2)
    k = np.arange(2 * y.size + _STAGE_TAPS)
    t = (k + d) / (1.0 + delta_hat) + d
    v = _cubic_lagrange(u, t)
    z = signal.upfirdn(h, v, up=1, down=2)
    # both FIR group delays (d at the 2x rate each) are pre-advanced inside
    # the SRC instants, so decimator output m directly equals y(m/(1+delta))
    z = z[:y.size]
    if z.size < y.size:
        z = np.concatenate([z, np.zeros(y.size - z.size, dtype=np.complex128)])
    return z
