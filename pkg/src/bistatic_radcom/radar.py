"""Range-Doppler imaging from the estimated channel and peak extraction.

Sensing input is either the pilot-position CFR submatrix or, when the
payload was decoded reliably, a data-aided full CFR obtained by rebuilding
the transmit grid from re-encoded bits. Range axis is relative bistatic
range with zero at the synchronization-locked main path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .commrx import ReceivedGrid
from .params import SPEED_OF_LIGHT, FrameConfig, SensingMode, require_valid
from .txframe import map_qpsk, payload_masks, pilot_values
from .ldpc import default_code


class ReconstructionError(RuntimeError):
    """Raised when decoded bits are unusable for data-aided sensing."""


@dataclass
class RangeDopplerMap:
    magnitude_db: np.ndarray   # range bins x Doppler bins, 0 dB at peak
    range_axis_m: np.ndarray
    doppler_axis_hz: np.ndarray
    mode: SensingMode
    window_kind: str = "hamming"


@dataclass
class Detection:
    rel_bistatic_range_m: float
    doppler_shift_hz: float
    magnitude_db: float

    def to_dict(self) -> dict:
        return {
            "rel_bistatic_range_m": self.rel_bistatic_range_m,
            "doppler_shift_hz": self.doppler_shift_hz,
            "magnitude_db": self.magnitude_db,
        }


def rebuild_tx_payload_grid(cfg: FrameConfig, coded_and_filler_bits: np.ndarray) -> np.ndarray:
    """TX payload-region grid (N x M_pl) from coded bits plus filler."""
    pilot_mask, data_mask = payload_masks(cfg)
    n_data = int(data_mask.sum())
    bits = np.asarray(coded_and_filler_bits, dtype=np.uint8).ravel()
    if bits.size != n_data * cfg.bits_per_symbol:
        raise ReconstructionError(
            f"need {n_data * cfg.bits_per_symbol} coded+filler bits, got {bits.size}")
    grid = np.zeros((cfg.n_subcarriers, cfg.m_payload), dtype=np.complex128)
    grid[::cfg.pilot_freq_spacing, ::cfg.pilot_time_spacing] = pilot_values(cfg)
    grid.T[data_mask.T] = map_qpsk(bits)
    return grid


def cfr_for_sensing(rg: ReceivedGrid, cfg: FrameConfig, mode: SensingMode,
                    decoded_info_bits: np.ndarray | None = None,
                    codeword_count: int | None = None) -> np.ndarray:
    """Sensing CFR matrix: pilot submatrix, or full-grid Y/X with the TX
    grid rebuilt from re-encoded decoded bits."""
    require_valid(cfg)
    if mode is SensingMode.PILOT_ONLY:
        y_p = rg.grid[::cfg.pilot_freq_spacing, ::cfg.pilot_time_spacing]
        return y_p / pilot_values(cfg)

    if decoded_info_bits is None or codeword_count is None:
        raise ReconstructionError("full-frame sensing requires decoded bits")
    code = default_code()
    info = np.asarray(decoded_info_bits, dtype=np.uint8).ravel()
    padded = np.zeros(codeword_count * code.k, dtype=np.uint8)
    padded[:info.size] = info
    coded = code.encode(padded.reshape(codeword_count, code.k))
    if not code.check(coded).all():
        raise ReconstructionError("re-encoded bits fail the parity check")
    pilot_mask, data_mask = payload_masks(cfg)
    n_bits = int(data_mask.sum()) * cfg.bits_per_symbol
    all_bits = np.zeros(n_bits, dtype=np.uint8)
    all_bits[:coded.size] = coded.reshape(-1)
    x = rebuild_tx_payload_grid(cfg, all_bits)
    return rg.grid / x


def range_doppler(cfr: np.ndarray, cfg: FrameConfig, mode: SensingMode,
                  window_kind: str = "hamming", zero_pad: int = 4) -> RangeDopplerMap:
    """Windowed 2-D periodogram: IDFT over frequency (delay/range), DFT over
    time (Doppler, center-shifted), magnitude normalized to its peak."""
    if not np.all(np.isfinite(cfr)):
        raise ValueError("sensing CFR contains non-finite values")
    nf, nt = cfr.shape
    if window_kind == "hamming":
        wf, wt = np.hamming(nf), np.hamming(nt)
    elif window_kind == "rect":
        wf, wt = np.ones(nf), np.ones(nt)
    else:
        raise ValueError(f"unknown window kind: {window_kind}")
    # frequency rows arrive in DFT index order (DC first, negative
    # frequencies in the upper half); reorder to physical frequency so the
    # window tapers the true band edges and zero padding extends the band
    # instead of splitting it at Nyquist
    z = np.fft.fftshift(cfr, axes=0) * wf[:, None] * wt[None, :]
    prof = np.fft.ifft(z, n=nf * zero_pad, axis=0)
    rd = np.fft.fftshift(np.fft.fft(prof, n=nt * zero_pad, axis=1), axes=1)
    mag = np.abs(rd)
    mag_db = 20.0 * np.log10(np.maximum(mag, 1e-300) / max(mag.max(), 1e-300))

    dn, dm = cfg.effective_spacings(mode)
    range_step = SPEED_OF_LIGHT / (cfg.bandwidth_hz * zero_pad)
    range_axis = np.arange(nf * zero_pad) * range_step
    t_sym = dm * cfg.symbol_len / cfg.bandwidth_hz
    doppler_step = 1.0 / (t_sym * nt * zero_pad)
    doppler_axis = (np.arange(nt * zero_pad) - nt * zero_pad // 2) * doppler_step
    return RangeDopplerMap(magnitude_db=mag_db, range_axis_m=range_axis,
                           doppler_axis_hz=doppler_axis, mode=mode,
                           window_kind=window_kind)


def _parabolic(vals: np.ndarray, i: int) -> float:
    a, b, c = vals[i - 1], vals[i], vals[(i + 1) % vals.size]
    denom = a - 2 * b + c
    if abs(denom) < 1e-30:
        return 0.0
    return float(np.clip(0.5 * (a - c) / denom, -0.5, 0.5))


def extract_peaks(rd_map: RangeDopplerMap, threshold_db: float,
                  max_peaks: int = 16) -> list[Detection]:
    """Local maxima (3x3 neighborhood) above a peak-relative threshold,
    parabolic sub-bin refinement in both axes, sorted by magnitude."""
    if threshold_db >= 0:
        raise ValueError("threshold_db must be negative (relative to the map peak)")
    m = rd_map.magnitude_db
    # both axes are DFT axes, so the local-maximum test wraps around
    is_peak = m >= threshold_db
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if (di, dj) != (0, 0):
                is_peak &= m >= np.roll(m, (di, dj), axis=(0, 1))
    ri, di = np.nonzero(is_peak)
    order = np.argsort(m[ri, di])[::-1][:max_peaks]

    dets = []
    dr = rd_map.range_axis_m[1] - rd_map.range_axis_m[0]
    dd = rd_map.doppler_axis_hz[1] - rd_map.doppler_axis_hz[0]
    lin = 10.0 ** (m / 20.0)
    span = rd_map.range_axis_m.size * dr  # unambiguous range of this mode
    for idx in order:
        i, j = int(ri[idx]), int(di[idx])
        fi = _parabolic(lin[:, j], i)
        fj = _parabolic(lin[i, :], j)
        rng = float(rd_map.range_axis_m[i] + fi * dr)
        # delays wrapping past half the unambiguous span are reported as
        # negative relative ranges (target path shorter than the main path)
        if rng > span / 2:
            rng -= span
        dets.append(Detection(
            rel_bistatic_range_m=rng,
            doppler_shift_hz=float(rd_map.doppler_axis_hz[j] + fj * dd),
            magnitude_db=float(m[i, j]),
        ))
    return dets


def bistatic_scene_report(detections: list[Detection],
                          known_main_range_m: float | None = None) -> dict:
    """Detection list with ranges converted to absolute bistatic ranges when
    the main-path length is known; otherwise flagged as relative."""
    out = {
        "range_reference": "absolute" if known_main_range_m is not None else "relative",
        "known_main_range_m": known_main_range_m,
        "detections": [],
    }
    for d in detections:
        entry = d.to_dict()
        if known_main_range_m is not None:
            entry["bistatic_range_m"] = known_main_range_m + d.rel_bistatic_range_m
        out["detections"].append(entry)
    return out
