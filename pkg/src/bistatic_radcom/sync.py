"""Receiver timing, carrier and sampling-clock synchronization chain.

Order of operations: Schmidl-Cox coarse timing + CFO (fractional via the
half-repeated first preamble symbol, integer via the differentially encoded
second symbol), local CFO pre-correction around the preamble, fine timing by
cross-correlation against the known first preamble symbol, weighted
least-squares clock-offset estimation over the pairwise-identical preamble
symbols, resampling correction of the whole stream, preamble discard and
payload CFO correction.

Index convention: frame start = first CP sample of the first preamble symbol.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from .dsp import sfo_correction_chain
from .params import FrameConfig, require_valid
from .txframe import IqStream, build_preamble, sc_differential
from .channel import SFO_BOUND

SC_LOCK_THRESHOLD = 0.3
PSL_THRESHOLD = 2.0
INT_CFO_SEARCH = 8  # +- even subcarrier shifts searched for the integer CFO


class SyncError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass
class SyncReport:
    coarse_start: int = 0
    fine_start: int = 0
    cfo_hat_hz: float = 0.0
    sfo_hat: float = 0.0
    timing_metric_peak: float = 0.0
    timing_metric: np.ndarray | None = None
    pair_phase_slopes: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = {
            "coarse_start": int(self.coarse_start),
            "fine_start": int(self.fine_start),
            "cfo_hat_hz": float(self.cfo_hat_hz),
            "sfo_hat": float(self.sfo_hat),
            "timing_metric_peak": float(self.timing_metric_peak),
            "pair_phase_slopes": [float(s) for s in self.pair_phase_slopes],
        }
        return d


def _first_preamble_time_symbol(cfg: FrameConfig) -> np.ndarray:
    """Known time-domain useful part (no CP) of the first preamble symbol."""
    return np.fft.ifft(build_preamble(cfg)[:, 0], norm="ortho")


def schmidl_cox(y: IqStream, cfg: FrameConfig) -> tuple[int, float, np.ndarray]:
    """Coarse frame start and combined integer+fractional CFO estimate.

    Returns (coarse_start, cfo_hat_hz, timing_metric). The timing metric is
    M(d) = |P(d)|^2 / R(d)^2 with half-symbol lag correlation; the coarse
    start is mapped from the midpoint of the 90%-of-peak plateau.
    """
    require_valid(cfg)
    s = y.samples
    n = cfg.n_subcarriers
    half = n // 2
    if s.size < cfg.symbol_len + half:
        raise SyncError("schmidl_cox", "stream shorter than the preamble")

    prod = np.conj(s[:-half]) * s[half:]
    pwr = np.abs(s) ** 2
    n_d = s.size - n
    cp = np.cumsum(np.concatenate([[0.0 + 0.0j], prod]))
    cw = np.cumsum(np.concatenate([[0.0], pwr]))
    p = cp[half:half + n_d] - cp[:n_d]
    r1 = cw[half:half + n_d] - cw[:n_d]          # first half-window energy
    r2 = cw[n:n + n_d] - cw[half:half + n_d]     # second half-window energy
    # normalized correlation, bounded by 1; windows with negligible energy
    # in either half (zero guards, capture padding) are gated out
    r_floor = 0.01 * np.mean(pwr) * half
    valid = (r1 > r_floor) & (r2 > r_floor)
    metric = np.where(valid, np.abs(p) ** 2 /
                      np.maximum(r1 * r2, 1e-60), 0.0)

    d_peak = int(np.argmax(metric))
    peak = metric[d_peak]
    if peak < SC_LOCK_THRESHOLD:
        raise SyncError("schmidl_cox", f"timing metric peak {peak:.3f} below lock threshold")

    # midpoint of the contiguous >= 90%-of-peak plateau around the maximum
    thr = 0.9 * peak
    lo = d_peak
    while lo > 0 and metric[lo - 1] >= thr:
        lo -= 1
    hi = d_peak
    while hi < metric.size - 1 and metric[hi + 1] >= thr:
        hi += 1
    d_mid = (lo + hi) // 2
    coarse_start = d_mid - cfg.cp_len // 2

    ts = 1.0 / y.nominal_rate
    frac_cfo = np.angle(p[d_mid]) / (np.pi * n * ts)

    int_cfo = _integer_cfo(s, cfg, coarse_start, frac_cfo, ts)
    cfo_hat = frac_cfo + int_cfo * cfg.subcarrier_spacing
    return coarse_start, cfo_hat, metric


def _integer_cfo(s: np.ndarray, cfg: FrameConfig, coarse_start: int,
                 frac_cfo: float, ts: float) -> int:
    """Resolve the integer CFO (in even multiples of the subcarrier spacing)
    from the differential encoding between the two S&C preamble symbols."""
    n, ncp, sym = cfg.n_subcarriers, cfg.cp_len, cfg.symbol_len
    u0 = coarse_start + ncp
    u1 = u0 + sym
    if u0 < 0 or u1 + n > s.size:
        raise SyncError("schmidl_cox", "preamble not fully contained in stream")
    nn = np.arange(u1 + n - u0)
    corr = np.exp(-2j * np.pi * frac_cfo * nn * ts)
    seg = s[u0:u1 + n] * corr
    y1 = np.fft.fft(seg[:n], norm="ortho")
    y2 = np.fft.fft(seg[sym:sym + n], norm="ortho")
    even, v = sc_differential(cfg)
    diff_rx = y2 * np.conj(y1)
    best_g, best_metric = 0, -1.0
    gmax = min(INT_CFO_SEARCH, n // 2 - 2)
    for g in range(-gmax, gmax + 1, 2):
        b = np.abs(np.sum(diff_rx[(even + g) % n] * np.conj(v))) ** 2
        if b > best_metric:
            best_metric, best_g = b, g
    return best_g


def local_cfo_correct(y: IqStream, cfo_hat_hz: float,
                      region: tuple[int, int]) -> IqStream:
    """De-rotate samples in [start, stop) by the CFO estimate; the phase
    reference n = 0 sits at the region start."""
    start, stop = region
    start = max(start, 0)
    stop = min(stop, y.samples.size)
    if start >= stop:
        raise SyncError("local_cfo_correct", "empty or out-of-bounds region")
    out = y.samples.copy()
    if cfo_hat_hz != 0.0:
        n = np.arange(stop - start)
        out[start:stop] *= np.exp(-2j * np.pi * cfo_hat_hz * n / y.nominal_rate)
    return IqStream(samples=out, nominal_rate=y.nominal_rate, origin_index=y.origin_index)


def fine_timing(y_corrected: IqStream, cfg: FrameConfig, coarse_start: int) -> int:
    """Fine frame start from cross-correlation against the known first
    preamble symbol (useful part). Searches coarse_start +- N_CP."""
    s = y_corrected.samples
    n, ncp = cfg.n_subcarriers, cfg.cp_len
    ref = _first_preamble_time_symbol(cfg)
    w = ncp
    d0 = coarse_start + ncp  # candidate start of the useful part
    cands = np.arange(max(d0 - w, 0), min(d0 + w + 1, s.size - n))
    if cands.size == 0:
        raise SyncError("fine_timing", "search window outside stream")
    mags = np.empty(cands.size)
    for i, d in enumerate(cands):
        mags[i] = np.abs(np.vdot(ref, s[d:d + n]))
    best = int(np.argmax(mags))
    peak = mags[best]
    side = np.delete(mags, np.arange(max(best - 2, 0), min(best + 3, mags.size)))
    if side.size and peak / max(side.max(), 1e-30) < PSL_THRESHOLD:
        raise SyncError("fine_timing", "ambiguous timing: correlation peak-to-sidelobe "
                                       f"{peak / side.max():.2f} below {PSL_THRESHOLD}")
    return int(cands[best]) - ncp


def estimate_sfo_tsai(y: IqStream, cfg: FrameConfig, fine_start: int,
                      cfo_hat_hz: float) -> tuple[float, list[float]]:
    """Weighted least-squares clock-offset estimate from the pairwise
    identical preamble symbols.

    For each pair, the per-subcarrier phase rotation between the two copies
    grows linearly with (signed) subcarrier index at a slope proportional to
    the normalized clock offset; slopes are combined across subcarriers and
    pairs with |Y|^2 weights.
    """
    s = y.samples
    n, ncp, sym = cfg.n_subcarriers, cfg.cp_len, cfg.symbol_len
    ts = 1.0 / y.nominal_rate
    n_pairs = cfg.m_sfo // 2
    if n_pairs < 1:
        raise SyncError("estimate_sfo_tsai", "no identical symbol pairs available")

    first_sfo = fine_start + cfg.m_sc * sym
    stop = first_sfo + cfg.m_sfo * sym
    if first_sfo < 0 or stop > s.size:
        raise SyncError("estimate_sfo_tsai", "clock-tracking symbols not in stream")

    nn = np.arange(stop - first_sfo)
    seg = s[first_sfo:stop] * np.exp(-2j * np.pi * cfo_hat_hz * nn * ts)

    k_signed = np.fft.fftfreq(n, d=1.0 / n)  # 0..N/2-1, -N/2..-1
    num = 0.0
    den = 0.0
    slopes = []
    for pair in range(n_pairs):
        a = seg[2 * pair * sym + ncp:2 * pair * sym + ncp + n]
        b = seg[(2 * pair + 1) * sym + ncp:(2 * pair + 1) * sym + ncp + n]
        ya = np.fft.fft(a, norm="ortho")
        yb = np.fft.fft(b, norm="ortho")
        d = yb * np.conj(ya)
        w = np.abs(ya) ** 2 + np.abs(yb) ** 2
        phase = np.angle(d)
        # weighted LS through the origin: slope of phase vs signed index
        # (the pair's common phase is removed first to avoid intercept bias)
        wsum = w.sum()
        kc = k_signed - (w * k_signed).sum() / wsum
        pc = phase - (w * phase).sum() / wsum
        s_num = (w * kc * pc).sum()
        s_den = (w * kc * kc).sum()
        slope = s_num / max(s_den, 1e-30)
        slopes.append(slope)
        num += s_num
        den += s_den
    slope_all = num / max(den, 1e-30)
    delta_hat = slope_all * n / (2.0 * np.pi * sym)
    return float(delta_hat), [float(x) for x in slopes]


def resample_correct(y: IqStream, delta_hat: float) -> IqStream:
    """Invert the clock-ratio mismatch: output m = input at m/(1+delta_hat)."""
    if abs(delta_hat) >= SFO_BOUND:
        raise SyncError("resample_correct", f"|delta_hat| must be below {SFO_BOUND}")
    z = sfo_correction_chain(y.samples, delta_hat)
    return IqStream(samples=z, nominal_rate=y.nominal_rate, origin_index=None)


def synchronize(y: IqStream, cfg: FrameConfig,
                correct_sfo: bool = True) -> tuple[IqStream, SyncReport]:
    """Full chain; returns the CFO-corrected payload sample stream of exactly
    (N+N_CP)*M_pl samples plus a report. ``correct_sfo=False`` skips the
    resampling stage (ablation toggle)."""
    require_valid(cfg)
    sym = cfg.symbol_len
    ts = 1.0 / y.nominal_rate

    coarse_start, cfo_hat, metric = schmidl_cox(y, cfg)
    region = (max(coarse_start - cfg.cp_len, 0),
              coarse_start + cfg.m_preamble * sym + 2 * cfg.cp_len)
    ref_n = max(coarse_start - cfg.cp_len, 0)
    y_loc = local_cfo_correct(y, cfo_hat, (ref_n, region[1]))
    fine_start = fine_timing(y_loc, cfg, coarse_start)
    if abs(fine_start - coarse_start) > cfg.cp_len:
        raise SyncError("fine_timing", "fine start outside the coarse lock window")

    # the local correction above referenced phase to ref_n; re-reference the
    # clock-offset estimator to raw samples with its own region correction
    delta_hat, slopes = estimate_sfo_tsai(
        IqStream(samples=y.samples[fine_start:], nominal_rate=y.nominal_rate),
        cfg, 0, cfo_hat)

    if correct_sfo:
        z = resample_correct(y, delta_hat)
        start_z = int(round(fine_start * (1.0 + delta_hat)))
    else:
        z = IqStream(samples=y.samples.copy(), nominal_rate=y.nominal_rate)
        start_z = fine_start

    pl_start = start_z + cfg.m_preamble * sym
    pl_len = cfg.m_payload * sym
    if pl_start < 0 or pl_start + pl_len > z.samples.size:
        raise SyncError("synchronize", "payload extends past end of stream")
    payload = z.samples[pl_start:pl_start + pl_len].copy()
    n = np.arange(pl_len)
    payload *= np.exp(-2j * np.pi * cfo_hat * n * ts)

    report = SyncReport(
        coarse_start=coarse_start,
        fine_start=fine_start,
        cfo_hat_hz=float(cfo_hat),
        sfo_hat=float(delta_hat),
        timing_metric_peak=float(metric.max()),
        timing_metric=metric,
        pair_phase_slopes=slopes,
    )
    return IqStream(samples=payload, nominal_rate=y.nominal_rate, origin_index=0), report
