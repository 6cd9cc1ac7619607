"""Channel code: encoder/decoder invariants and noise performance."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bistatic_radcom.ldpc import default_code


@pytest.fixture(scope="module")
def code():
    return default_code()


def test_dimensions(code):
    assert code.n == 648
    assert code.k == 432
    assert code.h.shape == (216, 648)


def test_parity_matrix_is_sparse_binary(code):
    assert set(np.unique(code.h)) <= {0, 1}
    # row weight of a QC-LDPC prototype stays small
    assert code.h.sum(axis=1).max() <= 12


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=100, deadline=None)
def test_every_codeword_satisfies_parity(code, seed):
    rng = np.random.default_rng(seed)
    info = rng.integers(0, 2, (4, code.k), dtype=np.uint8)
    cw = code.encode(info)
    assert code.check(cw).all()
    # systematic prefix
    assert np.array_equal(cw[:, :code.k], info)


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=100, deadline=None)
def test_decode_recovers_lightly_corrupted_codewords(code, seed):
    rng = np.random.default_rng(seed)
    info = rng.integers(0, 2, (2, code.k), dtype=np.uint8)
    cw = code.encode(info)
    llrs = (1.0 - 2.0 * cw.astype(float)) * 8.0
    # flip a handful of bits per codeword
    for row in llrs:
        idx = rng.choice(code.n, size=6, replace=False)
        row[idx] *= -1.0
    bits, ok = code.decode(llrs)
    assert ok.all()
    assert np.array_equal(bits[:, :code.k], info)


def test_decode_awgn_waterfall(code):
    """Soft decoding at a moderate Es/N0 yields error-free blocks."""
    rng = np.random.default_rng(7)
    info = rng.integers(0, 2, (30, code.k), dtype=np.uint8)
    cw = code.encode(info)
    x = 1.0 - 2.0 * cw.astype(float)  # BPSK
    es_n0 = 10 ** (3.0 / 10.0)
    sigma = np.sqrt(1.0 / (2.0 * es_n0))
    y = x + rng.normal(0.0, sigma, x.shape)
    llrs = 2.0 * y / sigma ** 2
    bits, ok = code.decode(llrs)
    assert np.array_equal(bits[:, :code.k], info)
    assert ok.all()


def test_all_zero_llrs_do_not_crash(code):
    bits, ok = code.decode(np.zeros((1, code.n)))
    assert bits.shape == (1, code.n)


def test_decoder_flags_unconvergence_on_garbage(code):
    rng = np.random.default_rng(0)
    llrs = rng.normal(0.0, 1.0, (4, code.n))
    bits, ok = code.decode(llrs, max_iter=10)
    # random LLRs are overwhelmingly unlikely to satisfy all 216 checks
    assert not ok.all()
