"""Discrete-frequency OFDM frame construction and baseband modulation.

Frame layout (columns): M_sc Schmidl-Cox symbols, M_sfo pairwise-identical
clock-tracking symbols, then the payload region carrying a comb-block pilot
grid and LDPC-coded QPSK data. The DFT convention is unitary in both
directions so time- and frequency-domain powers agree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ldpc import default_code
from .params import FrameConfig, require_valid

# per-element mask classes
MASK_SC = 0
MASK_SFO = 1
MASK_PILOT = 2
MASK_DATA = 3


class FramingError(ValueError):
    """Raised on symbol/bit count mismatches during frame assembly."""


class CapacityError(ValueError):
    """Raised when the info payload exceeds the frame capacity."""


@dataclass
class PayloadBits:
    info_bits: np.ndarray
    coded_bits: np.ndarray
    codeword_count: int


@dataclass
class FrameGrid:
    grid: np.ndarray          # complex, N x M
    masks: np.ndarray         # uint8, N x M, MASK_* classes
    cfg: FrameConfig


@dataclass
class IqStream:
    samples: np.ndarray
    nominal_rate: float
    origin_index: int | None = None


def _seeded_qpsk(rng: np.random.Generator, n: int) -> np.ndarray:
    bits = rng.integers(0, 2, 2 * n)
    return map_qpsk(bits)


def map_qpsk(bits: np.ndarray) -> np.ndarray:
    """Gray-mapped QPSK, unit average power: (b1, b0) -> ((1-2b1)+j(1-2b0))/sqrt2."""
    bits = np.asarray(bits)
    if bits.size % 2 != 0:
        raise FramingError("QPSK mapping requires an even number of bits")
    b = bits.reshape(-1, 2).astype(np.float64)
    return ((1.0 - 2.0 * b[:, 0]) + 1j * (1.0 - 2.0 * b[:, 1])) / np.sqrt(2.0)


def demap_qpsk_hard(symbols: np.ndarray) -> np.ndarray:
    """Hard-decision inverse of :func:`map_qpsk`."""
    s = np.asarray(symbols).ravel()
    bits = np.empty((s.size, 2), dtype=np.uint8)
    bits[:, 0] = s.real < 0
    bits[:, 1] = s.imag < 0
    return bits.reshape(-1)


def build_preamble(cfg: FrameConfig) -> np.ndarray:
    """Frequency-domain preamble symbols, shape (N, M_pb).

    First S&C symbol occupies only even subcarriers (boosted by sqrt(2) to
    keep unit symbol power), which yields two identical time-domain halves.
    The second is a full QPSK symbol whose even subcarriers are differentially
    related to the first, enabling integer CFO resolution. The remaining
    M_sfo symbols are adjacent identical pairs.
    """
    require_valid(cfg)
    rng = np.random.default_rng(cfg.preamble_seed)
    n = cfg.n_subcarriers
    pb = np.zeros((n, cfg.m_preamble), dtype=np.complex128)

    even = np.arange(0, n, 2)
    pb[even, 0] = np.sqrt(2.0) * _seeded_qpsk(rng, even.size)
    second = _seeded_qpsk(rng, n)
    pb[:, 1] = second
    for i in range(cfg.m_sfo // 2):
        sym = _seeded_qpsk(rng, n)
        pb[:, cfg.m_sc + 2 * i] = sym
        pb[:, cfg.m_sc + 2 * i + 1] = sym
    return pb


def sc_differential(cfg: FrameConfig) -> tuple[np.ndarray, np.ndarray]:
    """(even-subcarrier indices, known differential c2[k]*conj(c1[k])) of the
    two S&C symbols, used for integer CFO resolution at the receiver."""
    pb = build_preamble(cfg)
    even = np.arange(0, cfg.n_subcarriers, 2)
    return even, pb[even, 1] * np.conj(pb[even, 0])


def pilot_values(cfg: FrameConfig) -> np.ndarray:
    """Seeded unit-power QPSK pilot grid, shape (N/dN, M_pl/dM)."""
    rng = np.random.default_rng(cfg.pilot_seed)
    return _seeded_qpsk(rng, cfg.n_pilot_rows * cfg.n_pilot_cols).reshape(
        cfg.n_pilot_rows, cfg.n_pilot_cols)


def payload_masks(cfg: FrameConfig) -> tuple[np.ndarray, np.ndarray]:
    """(pilot mask, data mask) over the payload region, each N x M_pl."""
    n, mpl = cfg.n_subcarriers, cfg.m_payload
    pilot = np.zeros((n, mpl), dtype=bool)
    pilot[::cfg.pilot_freq_spacing, ::cfg.pilot_time_spacing] = True
    return pilot, ~pilot


def frame_capacity_bits(cfg: FrameConfig) -> tuple[int, int]:
    """(max info bits, codeword count) that fit in one frame."""
    code = default_code()
    coded_capacity = cfg.n_data_elements * cfg.bits_per_symbol
    n_cw = coded_capacity // code.n
    return n_cw * code.k, n_cw


def encode_payload(info_bits: np.ndarray, cfg: FrameConfig) -> PayloadBits:
    """Systematic LDPC encoding; a short final block is zero-padded."""
    require_valid(cfg)
    code = default_code()
    info_bits = np.asarray(info_bits, dtype=np.uint8).ravel()
    max_info, max_cw = frame_capacity_bits(cfg)
    if info_bits.size > max_info:
        raise CapacityError(
            f"payload of {info_bits.size} bits exceeds frame capacity of {max_info} info bits")
    n_cw = max(1, -(-info_bits.size // code.k))
    if n_cw > max_cw:
        raise CapacityError(f"frame fits at most {max_cw} codewords")
    padded = np.zeros(n_cw * code.k, dtype=np.uint8)
    padded[:info_bits.size] = info_bits
    coded = code.encode(padded.reshape(n_cw, code.k)).reshape(-1)
    return PayloadBits(info_bits=info_bits, coded_bits=coded, codeword_count=n_cw)


def assemble_frame(cfg: FrameConfig, payload_symbols: np.ndarray) -> FrameGrid:
    """Place preamble, pilots and data symbols on the N x M grid."""
    require_valid(cfg)
    n, mpb, mpl = cfg.n_subcarriers, cfg.m_preamble, cfg.m_payload
    pilot_mask, data_mask = payload_masks(cfg)
    n_data = int(data_mask.sum())
    payload_symbols = np.asarray(payload_symbols).ravel()
    if payload_symbols.size != n_data:
        raise FramingError(
            f"expected {n_data} payload symbols for this config, got {payload_symbols.size}")

    grid = np.zeros((n, mpb + mpl), dtype=np.complex128)
    grid[:, :mpb] = build_preamble(cfg)
    payload = np.zeros((n, mpl), dtype=np.complex128)
    payload[::cfg.pilot_freq_spacing, ::cfg.pilot_time_spacing] = pilot_values(cfg)
    # data filled column-major over the remaining elements
    payload.T[data_mask.T] = payload_symbols
    grid[:, mpb:] = payload

    masks = np.empty((n, mpb + mpl), dtype=np.uint8)
    masks[:, :cfg.m_sc] = MASK_SC
    masks[:, cfg.m_sc:mpb] = MASK_SFO
    masks[:, mpb:] = np.where(pilot_mask, MASK_PILOT, MASK_DATA)
    return FrameGrid(grid=grid, masks=masks, cfg=cfg)


def symbols_from_grid(frame: FrameGrid) -> np.ndarray:
    """Data symbols in the same column-major order used by assemble_frame."""
    data_mask = frame.masks[:, frame.cfg.m_preamble:] == MASK_DATA
    return frame.grid[:, frame.cfg.m_preamble:].T[data_mask.T]


def modulate(frame: FrameGrid) -> IqStream:
    """Per-column unitary IDFT, CP prepend, P/S concatenation."""
    cfg = frame.cfg
    time_syms = np.fft.ifft(frame.grid, axis=0, norm="ortho")
    with_cp = np.concatenate([time_syms[-cfg.cp_len:, :], time_syms], axis=0)
    return IqStream(samples=with_cp.T.reshape(-1), nominal_rate=cfg.bandwidth_hz,
                    origin_index=0)


def build_tx_frame(cfg: FrameConfig, info_bits: np.ndarray) -> tuple[FrameGrid, PayloadBits, IqStream]:
    """Convenience TX chain: encode, map, assemble, modulate.

    Data-element slots beyond the coded payload are filled with zero bits.
    """
    payload = encode_payload(info_bits, cfg)
    pilot_mask, data_mask = payload_masks(cfg)
    n_data = int(data_mask.sum())
    all_bits = np.zeros(n_data * cfg.bits_per_symbol, dtype=np.uint8)
    all_bits[:payload.coded_bits.size] = payload.coded_bits
    frame = assemble_frame(cfg, map_qpsk(all_bits))
    return frame, payload, modulate(frame)
