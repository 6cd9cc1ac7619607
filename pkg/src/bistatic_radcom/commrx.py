"""Payload demodulation, pilot-based corrections, equalization and decoding.

Pipeline (after synchronization): column-wise DFT demodulation, main-path
Doppler estimation/correction from the pilot grid, full CFR estimation by
bilinear interpolation of pilot measurements, residual clock-drift
compensation via per-symbol delay tracking of the main channel tap,
zero-forcing equalization, soft QPSK demapping and LDPC decoding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ldpc import default_code
from .params import FrameConfig, require_valid
from .txframe import (FramingError, IqStream, payload_masks,
                      pilot_values)


class WeakMainPathError(RuntimeError):
    """Raised when no dominant channel tap can be identified."""


@dataclass
class ReceivedGrid:
    grid: np.ndarray  # complex, N x M_pl
    cfg: FrameConfig


@dataclass
class CfrEstimate:
    cfr: np.ndarray               # complex, N x M_pl
    measured_mask: np.ndarray     # True where measured at a pilot
    main_doppler_hz: float = 0.0
    delay_slope: float = 0.0      # seconds per payload symbol
    slope_fit_warning: bool = False


@dataclass
class CommMetrics:
    pre_fec_ber: float = float("nan")
    post_fec_ber: float = float("nan")
    evm_rms_percent: float = float("nan")
    frames_decoded: int = 0
    decoder_converged: bool = True
    slope_fit_warning: bool = False

    def to_dict(self) -> dict:
        return {
            "pre_fec_ber": self.pre_fec_ber,
            "post_fec_ber": self.post_fec_ber,
            "evm_rms_percent": self.evm_rms_percent,
            "frames_decoded": self.frames_decoded,
            "decoder_converged": self.decoder_converged,
            "slope_fit_warning": self.slope_fit_warning,
        }


def demodulate_frame(payload_stream: IqStream, cfg: FrameConfig) -> ReceivedGrid:
    """S/P conversion, CP removal and unitary column-wise DFT."""
    require_valid(cfg)
    s = payload_stream.samples
    expected = cfg.symbol_len * cfg.m_payload
    if s.size != expected:
        raise FramingError(f"payload stream must hold {expected} samples, got {s.size}")
    blocks = s.reshape(cfg.m_payload, cfg.symbol_len).T
    return ReceivedGrid(grid=np.fft.fft(blocks[cfg.cp_len:, :], axis=0, norm="ortho"),
                        cfg=cfg)


def _pilot_cfr(rg: ReceivedGrid) -> np.ndarray:
    """Raw least-squares channel estimates at pilot positions,
    shape (N/dN, M_pl/dM)."""
    cfg = rg.cfg
    y_p = rg.grid[::cfg.pilot_freq_spacing, ::cfg.pilot_time_spacing]
    return y_p / pilot_values(cfg)


def _main_tap(cir_mag: np.ndarray) -> int:
    """Index of the dominant tap of a mean CIR magnitude profile."""
    peak = int(np.argmax(cir_mag))
    med = float(np.median(cir_mag))
    if cir_mag[peak] < 10 ** (6.0 / 20.0) * max(med, 1e-30):
        raise WeakMainPathError("no dominant channel tap (peak < 6 dB above median)")
    return peak


def estimate_main_doppler(rg: ReceivedGrid, cfg: FrameConfig) -> tuple[float, ReceivedGrid]:
    """Estimate the main-path Doppler from the phase progression of the
    strongest CIR tap across pilot symbols, and de-rotate the whole grid."""
    hp = _pilot_cfr(rg)
    cir = np.fft.ifft(hp, axis=0)
    tap = _main_tap(np.mean(np.abs(cir), axis=1))
    track = cir[tap, :]
    # weighted mean phase increment between consecutive pilot symbols
    inc = track[1:] * np.conj(track[:-1])
    if inc.size == 0:
        phase_step = 0.0
    else:
        phase_step = float(np.angle(np.sum(inc)))
    t_pilot = cfg.pilot_time_spacing * cfg.symbol_len / cfg.bandwidth_hz
    f_hat = phase_step / (2.0 * np.pi * t_pilot)
    m = np.arange(cfg.m_payload)
    rot = np.exp(-2j * np.pi * f_hat * m * cfg.symbol_len / cfg.bandwidth_hz)
    return float(f_hat), ReceivedGrid(grid=rg.grid * rot[None, :], cfg=cfg)


def _interp_axis(values: np.ndarray, xp: np.ndarray, x: np.ndarray,
                 axis: int) -> np.ndarray:
    """Linear interpolation of complex samples along one axis, edges held."""
    pos = np.clip(np.searchsorted(xp, x, side="right") - 1, 0, xp.size - 2)
    x0, x1 = xp[pos], xp[pos + 1]
    w = np.clip((x - x0) / (x1 - x0), 0.0, 1.0)
    if axis == 0:
        return (1.0 - w)[:, None] * values[pos, :] + w[:, None] * values[pos + 1, :]
    return (1.0 - w)[None, :] * values[:, pos] + w[None, :] * values[:, pos + 1]


def estimate_cfr(rg: ReceivedGrid, cfg: FrameConfig) -> CfrEstimate:
    """Bilinear interpolation (frequency first, then time) of the pilot
    channel estimates over the full grid; edges held."""
    hp = _pilot_cfr(rg)
    n, mpl = cfg.n_subcarriers, cfg.m_payload
    dn, dm = cfg.pilot_freq_spacing, cfg.pilot_time_spacing
    k_pil = np.arange(0, n, dn)
    m_pil = np.arange(0, mpl, dm)

    full_f = _interp_axis(hp, k_pil, np.arange(n), axis=0)
    cfr = _interp_axis(full_f, m_pil, np.arange(mpl), axis=1)

    measured = np.zeros((n, mpl), dtype=bool)
    measured[::dn, ::dm] = True
    cfr[::dn, ::dm] = hp
    return CfrEstimate(cfr=cfr, measured_mask=measured)


def _tap_delays(hp: np.ndarray, cfg: FrameConfig,
                pad: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Per-pilot-symbol delay (in samples) and magnitude of the main tap,
    from the zero-padded CIR with parabolic sub-bin refinement."""
    nb = hp.shape[0]
    # reorder rows to physical frequency before zero padding so fractional
    # delays keep a single clean peak (padding must extend the band, not
    # split it at Nyquist)
    cir = np.fft.ifft(np.fft.fftshift(hp, axes=0), n=nb * pad, axis=0)
    mag = np.abs(cir)
    tap = _main_tap(np.mean(mag, axis=1))
    peaks = np.argmax(mag, axis=0)
    # keep per-symbol peaks near the common dominant tap (cyclic distance)
    dist = np.minimum((peaks - tap) % (nb * pad), (tap - peaks) % (nb * pad))
    peaks = np.where(dist <= pad, peaks, tap)
    idx = np.arange(hp.shape[1])
    a = mag[(peaks - 1) % (nb * pad), idx]
    b = mag[peaks, idx]
    c = mag[(peaks + 1) % (nb * pad), idx]
    denom = a - 2 * b + c
    frac = np.where(np.abs(denom) > 1e-30, 0.5 * (a - c) / denom, 0.0)
    frac = np.clip(frac, -0.5, 0.5)
    pos = (peaks + frac)
    pos = np.where(pos > nb * pad / 2, pos - nb * pad, pos)  # signed (early/late)
    delay_samples = pos / pad
    return delay_samples, b


def compensate_residual_sfo(rg: ReceivedGrid, cfr_est: CfrEstimate,
                            cfg: FrameConfig) -> tuple[ReceivedGrid, CfrEstimate]:
    """Track the linear drift of the main-tap delay across pilot symbols and
    align all payload symbols via per-subcarrier phase ramps."""
    hp = _pilot_cfr(rg)
    delays, mags = _tap_delays(hp, cfg)
    m_pil = np.arange(0, cfg.m_payload, cfg.pilot_time_spacing).astype(float)
    w = mags ** 2
    wsum = w.sum()
    mc = m_pil - (w * m_pil).sum() / wsum
    dc = delays - (w * delays).sum() / wsum
    den = (w * mc * mc).sum()
    slope = (w * mc * dc).sum() / max(den, 1e-30)  # samples per payload symbol
    resid = dc - slope * mc
    rms_resid = np.sqrt((w * resid ** 2).sum() / wsum)
    warning = bool(rms_resid > 0.5)

    k_signed = np.fft.fftfreq(cfg.n_subcarriers, d=1.0 / cfg.n_subcarriers)
    m = np.arange(cfg.m_payload)
    ramp = np.exp(2j * np.pi * np.outer(k_signed, slope * m) / cfg.n_subcarriers)
    grid = rg.grid * ramp
    cfr = cfr_est.cfr * ramp
    est = CfrEstimate(cfr=cfr, measured_mask=cfr_est.measured_mask,
                      main_doppler_hz=cfr_est.main_doppler_hz,
                      delay_slope=float(slope / cfg.bandwidth_hz),
                      slope_fit_warning=warning)
    return ReceivedGrid(grid=grid, cfg=cfg), est


def cir_evolution(rg: ReceivedGrid, cfg: FrameConfig) -> tuple[np.ndarray, np.ndarray]:
    """(per-pilot-symbol main-tap delay in samples, magnitude in dB rel max)."""
    hp = _pilot_cfr(rg)
    delays, mags = _tap_delays(hp, cfg)
    mag_db = 20.0 * np.log10(np.maximum(mags, 1e-30) / max(mags.max(), 1e-30))
    return delays, mag_db


def equalize(rg: ReceivedGrid, cfr: np.ndarray,
             cfg: FrameConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Zero-forcing equalization at data positions.

    Returns (equalized data symbols in column-major frame order, per-symbol
    effective noise variances for LLR scaling, erasure flags).
    """
    pilot_mask, data_mask = payload_masks(cfg)
    h = cfr.T[data_mask.T]
    y = rg.grid.T[data_mask.T]
    mag = np.abs(h)
    erased = mag < 1e-6
    safe_h = np.where(erased, 1.0, h)
    s_hat = y / safe_h
    s_hat[erased] = 0.0

    noise_var = _noise_variance_per_subcarrier(rg, cfg)
    nv_grid = np.broadcast_to(noise_var[:, None], rg.grid.shape)
    nv = nv_grid.T[data_mask.T] / np.maximum(mag, 1e-6) ** 2
    return s_hat, nv, erased


def _noise_variance_per_subcarrier(rg: ReceivedGrid, cfg: FrameConfig) -> np.ndarray:
    """Noise variance proxy from pilot-to-pilot channel estimate differences,
    interpolated over all subcarriers."""
    hp = _pilot_cfr(rg)
    if hp.shape[1] > 1:
        d = np.diff(hp, axis=1)
        var_rows = 0.5 * np.mean(np.abs(d) ** 2, axis=1)
    else:
        var_rows = np.full(hp.shape[0], 1e-6)
    k_pil = np.arange(0, cfg.n_subcarriers, cfg.pilot_freq_spacing)
    var = np.interp(np.arange(cfg.n_subcarriers), k_pil, var_rows)
    return np.maximum(var, 1e-12)


def qpsk_llrs(symbols: np.ndarray, noise_vars: np.ndarray) -> np.ndarray:
    """Max-log LLRs for Gray QPSK (positive favors bit 0); interleaved
    (b1, b0) per symbol, matching the mapper's bit order."""
    s = np.asarray(symbols).ravel()
    nv = np.maximum(np.asarray(noise_vars).ravel(), 1e-12)
    scale = 2.0 * np.sqrt(2.0) / nv
    llrs = np.empty(2 * s.size)
    llrs[0::2] = scale * s.real
    llrs[1::2] = scale * s.imag
    return llrs


def demap_decode(symbols: np.ndarray, noise_vars: np.ndarray, cfg: FrameConfig,
                 codeword_count: int, info_len: int,
                 tx_info_bits: np.ndarray | None = None,
                 tx_coded_bits: np.ndarray | None = None,
                 max_iter: int = 50) -> tuple[np.ndarray, CommMetrics]:
    """Soft demapping and LDPC decoding; padding stripped from the output.

    When the transmitted bits are provided, pre/post-FEC BERs are measured
    against them.
    """
    code = default_code()
    llrs = qpsk_llrs(symbols, noise_vars)
    n_coded = codeword_count * code.n
    if llrs.size < n_coded:
        raise FramingError("fewer symbols than required for the declared codewords")
    llrs = llrs[:n_coded].reshape(codeword_count, code.n)
    bits, ok = code.decode(llrs, max_iter=max_iter)
    info = bits[:, :code.k].reshape(-1)[:info_len]

    metrics = CommMetrics(frames_decoded=1, decoder_converged=bool(ok.all()))
    hard = (llrs.reshape(-1) < 0).astype(np.uint8)
    if tx_coded_bits is not None:
        ref = np.asarray(tx_coded_bits, dtype=np.uint8).ravel()[:n_coded]
        metrics.pre_fec_ber = float(np.mean(hard != ref))
    if tx_info_bits is not None:
        ref = np.asarray(tx_info_bits, dtype=np.uint8).ravel()[:info_len]
        metrics.post_fec_ber = float(np.mean(info != ref))
    return info, metrics


def evm_rms_percent(symbols: np.ndarray, reference: np.ndarray | None = None) -> float:
    """RMS error vector magnitude vs known or nearest-constellation reference."""
    s = np.asarray(symbols).ravel()
    if reference is None:
        ref = (np.sign(s.real) + 1j * np.sign(s.imag)) / np.sqrt(2.0)
    else:
        ref = np.asarray(reference).ravel()
    return float(100.0 * np.sqrt(np.mean(np.abs(s - ref) ** 2) /
                                 max(np.mean(np.abs(ref) ** 2), 1e-30)))


def constellation_density(symbols: np.ndarray, bins: int = 201,
                          extent: float = 2.0) -> tuple[np.ndarray, np.ndarray]:
    """2-D histogram of the equalized constellation over [-extent, extent]^2,
    log-normalized to its peak. Returns (density, bin edges)."""
    s = np.asarray(symbols).ravel()
    edges = np.linspace(-extent, extent, bins + 1)
    hist, _, _ = np.histogram2d(s.real, s.imag, bins=[edges, edges])
    peak = max(hist.max(), 1.0)
    return hist / peak, edges
