"""Propagation and impairment model."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bistatic_radcom.channel import (
    ChannelScenario,
    ImpairmentSet,
    PropagationPath,
    ScenarioError,
    add_awgn,
    apply_paths_and_cfo,
    apply_sfo,
    main_path_rx_power,
    run_channel,
)
from bistatic_radcom.params import FrameConfig
from bistatic_radcom.txframe import IqStream, build_tx_frame, frame_capacity_bits


def small_cfg():
    return FrameConfig(n_subcarriers=64, cp_len=16, m_payload=32)


def tone_stream(n=4096, f=0.01, rate=1e9):
    t = np.arange(n)
    return IqStream(samples=np.exp(2j * np.pi * f * t), nominal_rate=rate,
                    origin_index=0)


def single_main(**imp):
    return ChannelScenario(
        paths=(PropagationPath(gain=1.0, delay_s=0.0, doppler_hz=0.0, is_main=True),),
        impairments=ImpairmentSet(**imp))


def test_scenario_requires_exactly_one_main():
    with pytest.raises(ScenarioError):
        ChannelScenario(paths=(PropagationPath(1.0, 0.0, 0.0, False),))
    with pytest.raises(ScenarioError):
        ChannelScenario(paths=(PropagationPath(1.0, 0.0, 0.0, True),
                               PropagationPath(0.5, 1e-9, 0.0, True)))


def test_secondary_must_be_weaker():
    with pytest.raises(ScenarioError):
        ChannelScenario(paths=(PropagationPath(0.5, 0.0, 0.0, True),
                               PropagationPath(0.9, 1e-9, 0.0, False)))


def test_sfo_bound_enforced():
    with pytest.raises(ScenarioError):
        ImpairmentSet(sfo_norm=2e-3)


def test_clean_channel_is_identity():
    x = tone_stream()
    y = run_channel(x, single_main())
    assert np.allclose(y.samples[:x.samples.size], x.samples, atol=1e-10)


def test_integer_delay_path():
    x = tone_stream()
    sc = ChannelScenario(
        paths=(PropagationPath(gain=1.0, delay_s=12e-9, doppler_hz=0.0, is_main=True),))
    y = apply_paths_and_cfo(x, sc)
    # 12 ns at 1 GS/s = 12 samples
    assert np.allclose(y.samples[12:12 + 4096], x.samples, atol=1e-9)


def test_doppler_shift_theorem():
    """A path Doppler of one subcarrier spacing cyclically shifts the
    demodulated grid by one row (small-frame oracle)."""
    cfg = small_cfg()
    rng = np.random.default_rng(0)
    info = rng.integers(0, 2, frame_capacity_bits(cfg)[0], dtype=np.uint8)
    frame, _, tx = build_tx_frame(cfg, info)
    fd = cfg.subcarrier_spacing
    sc = ChannelScenario(
        paths=(PropagationPath(gain=1.0, delay_s=0.0, doppler_hz=fd, is_main=True),))
    y = apply_paths_and_cfo(tx, sc)
    sym = cfg.symbol_len
    # first OFDM symbol: multiplying by e^{j2pi n/N} shifts bins up by one
    blk = y.samples[cfg.cp_len:cfg.cp_len + cfg.n_subcarriers]
    got = np.fft.fft(blk, norm="ortho")
    want = np.roll(frame.grid[:, 0], 1) * np.exp(
        2j * np.pi * fd * cfg.cp_len / cfg.bandwidth_hz)
    assert np.allclose(got, want, atol=1e-6)


def test_cfo_cpo_phasor():
    x = tone_stream(n=1000)
    y = apply_paths_and_cfo(x, single_main(cfo_hz=1e5, cpo_rad=0.5))
    n = np.arange(1000)
    expect = x.samples * np.exp(1j * (2 * np.pi * 1e5 * n / 1e9 + 0.5))
    assert np.allclose(y.samples[:1000], expect, atol=1e-9)


def test_apply_sfo_zero_is_identity():
    x = tone_stream()
    y = apply_sfo(x, 0.0)
    assert np.array_equal(y.samples, x.samples)
    assert y.samples is not x.samples


def test_apply_sfo_timebase():
    """Clock offset delta compresses the received timebase by (1+delta)."""
    n = 8192
    f = 0.05
    t = np.arange(n)
    x = IqStream(samples=np.exp(2j * np.pi * f * t), nominal_rate=1e9)
    delta = 1e-4
    y = apply_sfo(x, delta)
    expect = np.exp(2j * np.pi * f * t * (1 + delta))
    m = slice(64, n - 64)
    assert np.sqrt(np.mean(np.abs(y.samples[m] - expect[m]) ** 2)) < 1e-4


@given(st.integers(0, 2 ** 32 - 1), st.floats(-5.0, 25.0))
@settings(max_examples=100, deadline=None)
def test_awgn_calibration(seed, snr_db):
    """Measured noise power matches the requested SNR within 3%."""
    n = 100_000
    x = IqStream(samples=np.ones(n, dtype=complex), nominal_rate=1e9)
    y = add_awgn(x, snr_db, ref_power=1.0, seed=seed)
    noise = y.samples - x.samples
    measured = np.mean(np.abs(noise) ** 2)
    expected = 10 ** (-snr_db / 10.0)
    assert measured == pytest.approx(expected, rel=0.03)


def test_awgn_none_is_noiseless():
    x = tone_stream(n=100)
    y = add_awgn(x, None, ref_power=1.0, seed=0)
    assert np.array_equal(y.samples, x.samples)


def test_awgn_reproducible_per_seed():
    x = tone_stream(n=1000)
    a = add_awgn(x, 10.0, 1.0, seed=42)
    b = add_awgn(x, 10.0, 1.0, seed=42)
    c = add_awgn(x, 10.0, 1.0, seed=43)
    assert np.array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, c.samples)


def test_main_path_power_reference():
    x = tone_stream(n=1000)
    sc = ChannelScenario(
        paths=(PropagationPath(gain=0.5, delay_s=0.0, doppler_hz=0.0, is_main=True),
               PropagationPath(gain=0.1, delay_s=5e-9, doppler_hz=0.0)))
    assert main_path_rx_power(x, sc) == pytest.approx(0.25)


def test_two_path_resolvable_delays():
    """Main + 7.25 ns target produce two distinct contributions."""
    cfg = FrameConfig(n_subcarriers=256, cp_len=64, m_payload=64)
    rng = np.random.default_rng(1)
    info = rng.integers(0, 2, frame_capacity_bits(cfg)[0], dtype=np.uint8)
    _, _, tx = build_tx_frame(cfg, info)
    sc = ChannelScenario(
        paths=(PropagationPath(gain=1.0, delay_s=0.0, doppler_hz=0.0, is_main=True),
               PropagationPath(gain=0.3, delay_s=7.25e-9, doppler_hz=0.0)))
    y = apply_paths_and_cfo(tx, sc)
    # first payload symbol: every subcarrier is occupied
    off = cfg.m_preamble * cfg.symbol_len + cfg.cp_len
    blk = y.samples[off:off + cfg.n_subcarriers]
    tx_blk = tx.samples[off:off + cfg.n_subcarriers]
    cfr = np.fft.fft(blk) / np.fft.fft(tx_blk)
    # window in physical frequency order to keep sidelobes below the echo
    cir = np.fft.ifft(np.fft.fftshift(cfr) * np.hamming(256), n=8 * 256)
    mags = np.abs(cir)
    main_bin = int(np.argmax(mags))
    assert main_bin < 4 or main_bin > mags.size - 4
    # positive-delay half only (the main lobe wraps across bin 0)
    win = np.arange(mags.size)
    target_bin = int(np.argmax(np.where((win > 40) & (win < 1024), mags, 0)))
    assert abs(target_bin - 7.25 * 8) <= 4
