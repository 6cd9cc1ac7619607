"""Frame construction, mapping and modulation round trips."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bistatic_radcom.params import FrameConfig
from bistatic_radcom.txframe import (
    CapacityError,
    FramingError,
    MASK_DATA,
    MASK_PILOT,
    MASK_SC,
    MASK_SFO,
    assemble_frame,
    build_preamble,
    build_tx_frame,
    demap_qpsk_hard,
    encode_payload,
    frame_capacity_bits,
    map_qpsk,
    modulate,
    payload_masks,
    pilot_values,
    sc_differential,
    symbols_from_grid,
)


def small_cfg(**kw):
    return FrameConfig(n_subcarriers=64, cp_len=16, m_payload=32, **kw)


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 512))
@settings(max_examples=100, deadline=None)
def test_qpsk_round_trip(seed, nsym):
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, 2 * nsym, dtype=np.uint8)
    s = map_qpsk(bits)
    assert np.allclose(np.abs(s), 1.0)
    assert np.array_equal(demap_qpsk_hard(s), bits)


def test_qpsk_unit_average_power():
    bits = np.array([0, 0, 0, 1, 1, 0, 1, 1], dtype=np.uint8)
    s = map_qpsk(bits)
    assert np.mean(np.abs(s) ** 2) == pytest.approx(1.0)
    assert len(set(np.round(s, 9))) == 4


def test_preamble_structure():
    cfg = small_cfg()
    pre = build_preamble(cfg)
    assert pre.shape == (64, 12)
    # first symbol occupies even subcarriers only -> half-repeated in time
    assert np.all(pre[1::2, 0] == 0)
    t = np.fft.ifft(pre[:, 0], norm="ortho")
    assert np.allclose(t[:32], t[32:], atol=1e-12)
    # clock-tracking symbols come in identical adjacent pairs
    for p in range(cfg.m_sfo // 2):
        a, b = pre[:, 2 + 2 * p], pre[:, 3 + 2 * p]
        assert np.array_equal(a, b)


def test_sc_differential_matches_preamble():
    cfg = small_cfg()
    pre = build_preamble(cfg)
    even, v = sc_differential(cfg)
    assert np.allclose(pre[even, 1] * np.conj(pre[even, 0]), v)


def test_preamble_deterministic_per_seed():
    a = build_preamble(small_cfg())
    b = build_preamble(small_cfg())
    c = build_preamble(small_cfg(preamble_seed=99))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_pilot_grid_placement():
    cfg = small_cfg()
    pilot_mask, data_mask = payload_masks(cfg)
    assert pilot_mask.sum() == cfg.n_pilot_rows * cfg.n_pilot_cols
    assert not np.any(pilot_mask & data_mask)
    assert np.all(pilot_mask | data_mask)
    assert pilot_mask[0, 0]
    assert pilot_mask[cfg.pilot_freq_spacing, cfg.pilot_time_spacing]
    assert not pilot_mask[1, 0]


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=100, deadline=None)
def test_frame_data_round_trip(seed):
    """Bits placed on the grid come back in the same order."""
    cfg = small_cfg()
    rng = np.random.default_rng(seed)
    nbits = rng.integers(1, frame_capacity_bits(cfg)[0] + 1)
    info = rng.integers(0, 2, nbits, dtype=np.uint8)
    frame, payload, stream = build_tx_frame(cfg, info)
    got = symbols_from_grid(frame)
    coded = payload.coded_bits
    assert np.array_equal(demap_qpsk_hard(got)[:coded.size], coded)


def test_masks_cover_frame_regions():
    cfg = small_cfg()
    frame, _, _ = build_tx_frame(cfg, np.array([1, 0, 1], dtype=np.uint8))
    assert np.all(frame.masks[:, :2] == MASK_SC)
    assert np.all(frame.masks[:, 2:12] == MASK_SFO)
    payload_masks_region = frame.masks[:, 12:]
    assert set(np.unique(payload_masks_region)) == {MASK_PILOT, MASK_DATA}


def test_modulate_demodulate_identity():
    """CP prepend + unitary IDFT inverts exactly per column."""
    cfg = small_cfg()
    frame, _, stream = build_tx_frame(cfg, np.array([1, 1, 0, 1], dtype=np.uint8))
    sym = cfg.symbol_len
    blocks = stream.samples.reshape(cfg.m_total, sym).T
    # CP is the tail copy
    assert np.allclose(blocks[:cfg.cp_len], blocks[-cfg.cp_len:])
    rebuilt = np.fft.fft(blocks[cfg.cp_len:], axis=0, norm="ortho")
    assert np.allclose(rebuilt, frame.grid, atol=1e-12)


def test_modulate_preserves_power():
    cfg = small_cfg()
    frame, _, stream = build_tx_frame(cfg, np.array([0, 1], dtype=np.uint8))
    grid_pwr = np.sum(np.abs(frame.grid) ** 2)
    useful = stream.samples.reshape(cfg.m_total, cfg.symbol_len)[:, cfg.cp_len:]
    assert np.sum(np.abs(useful) ** 2) == pytest.approx(grid_pwr)


def test_capacity_overflow_raises():
    cfg = small_cfg()
    max_info, _ = frame_capacity_bits(cfg)
    with pytest.raises(CapacityError):
        encode_payload(np.zeros(max_info + 1, dtype=np.uint8), cfg)


def test_wrong_symbol_count_raises():
    cfg = small_cfg()
    with pytest.raises(FramingError):
        assemble_frame(cfg, np.zeros(17, dtype=complex))


def test_pilot_values_deterministic():
    cfg = small_cfg()
    assert np.array_equal(pilot_values(cfg), pilot_values(cfg))
    assert pilot_values(cfg).shape == (cfg.n_pilot_rows, cfg.n_pilot_cols)
