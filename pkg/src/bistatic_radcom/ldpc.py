"""Rate-2/3 quasi-cyclic LDPC code (IEEE 802.11n, n = 648, Z = 27).

Systematic encoding via a precomputed GF(2) inverse of the parity part of H,
decoding with a batched normalized min-sum belief-propagation decoder.
"""

from __future__ import annotations

import numpy as np

# Prototype matrix for the 648-bit rate-2/3 WLAN code: entries are circulant
# shifts of a 27x27 identity block, -1 marks an all-zero block.
_BASE_MATRIX = [
    [25, 26, 14, -1, 20, -1,  2, -1,  4, -1, -1,  8, -1, 16, -1, 18,  1,  0, -1, -1, -1, -1, -1, -1],
    [10,  9, 15, 11, -1,  0, -1,  1, -1, -1, 18, -1,  8, -1, 10, -1, -1,  0,  0, -1, -1, -1, -1, -1],
    [16,  2, 20, 26, 21, -1,  6, -1,  1, 26, -1,  7, -1, -1, -1, -1, -1, -1,  0,  0, -1, -1, -1, -1],
    [10, 13,  5,  0, -1,  3, -1,  7, -1, -1, 26, -1, -1, 13, -1, 16, -1, -1, -1,  0,  0, -1, -1, -1],
    [23, 14, 24, -1, 12, -1, 19, -1, 17, -1, -1, -1, 20, -1, 21, -1,  0, -1, -1, -1,  0,  0, -1, -1],
    [ 6, 22,  9, 20, -1, 25, -1, 17, -1,  8, -1, 14, -1, 18, -1, -1, -1, -1, -1, -1, -1,  0,  0, -1],
    [14, 23, 21, 11, 20, -1, 24, -1, 18, -1, 19, -1, -1, -1, -1, 22, -1, -1, -1, -1, -1, -1,  0,  0],
    [17, 11, 11, 20, -1, 21, -1, 26, -1,  3, -1, -1, 18, -1, 26, -1,  1, -1, -1, -1, -1, -1, -1,  0],
]
_Z = 27


def _expand_base_matrix() -> np.ndarray:
    rows = len(_BASE_MATRIX) * _Z
    cols = len(_BASE_MATRIX[0]) * _Z
    h = np.zeros((rows, cols), dtype=np.uint8)
    eye = np.eye(_Z, dtype=np.uint8)
    for i, row in enumerate(_BASE_MATRIX):
        for j, shift in enumerate(row):
            if shift >= 0:
                h[i * _Z:(i + 1) * _Z, j * _Z:(j + 1) * _Z] = np.roll(eye, -shift, axis=1)
    return h


def _gf2_inv(a: np.ndarray) -> np.ndarray:
    """Invert a square binary matrix over GF(2)."""
    n = a.shape[0]
    aug = np.concatenate([a.astype(np.uint8) % 2, np.eye(n, dtype=np.uint8)], axis=1)
    for col in range(n):
        pivots = np.nonzero(aug[col:, col])[0]
        if pivots.size == 0:
            raise np.linalg.LinAlgError("matrix is singular over GF(2)")
        p = col + pivots[0]
        if p != col:
            aug[[col, p]] = aug[[p, col]]
        mask = aug[:, col].copy()
        mask[col] = 0
        aug[mask.astype(bool)] ^= aug[col]
    return aug[:, n:]


class LdpcCode:
    """Fixed rate-2/3 (648, 432) LDPC code with batch encode/decode."""

    def __init__(self) -> None:
        self.h = _expand_base_matrix()
        self.n = self.h.shape[1]
        self.n_parity = self.h.shape[0]
        self.k = self.n - self.n_parity
        h1 = self.h[:, :self.k]
        h2 = self.h[:, self.k:]
        # parity = (H2^-1 H1) @ info (mod 2)
        self._enc = (_gf2_inv(h2).astype(np.uint32) @ h1.astype(np.uint32)) % 2
        self._enc = self._enc.astype(np.uint8)
        self._build_edges()

    def _build_edges(self) -> None:
        chk, var = np.nonzero(self.h)
        order = np.lexsort((var, chk))
        self.edge_chk = chk[order].astype(np.int32)
        self.edge_var = var[order].astype(np.int32)
        self.n_edges = self.edge_chk.size
        # reduceat boundaries for check-major edge ordering
        self.chk_starts = np.searchsorted(self.edge_chk, np.arange(self.n_parity)).astype(np.int64)
        # permutation into variable-major order and its boundaries
        self.var_order = np.argsort(self.edge_var, kind="stable")
        self.var_sorted = self.edge_var[self.var_order]
        self.var_starts = np.searchsorted(self.var_sorted, np.arange(self.n)).astype(np.int64)

    # -- encoding -----------------------------------------------------------

    def encode(self, info: np.ndarray) -> np.ndarray:
        """Encode info bits, shape (..., k) -> codewords (..., n)."""
        info = np.asarray(info, dtype=np.uint8)
        if info.shape[-1] != self.k:
            raise ValueError(f"info block length must be {self.k}, got {info.shape[-1]}")
        parity = (info.astype(np.uint32) @ self._enc.T) % 2
        return np.concatenate([info, parity.astype(np.uint8)], axis=-1)

    def check(self, codewords: np.ndarray) -> np.ndarray:
        """True for each codeword satisfying H c = 0."""
        cw = np.asarray(codewords, dtype=np.uint32)
        syndrome = (cw @ self.h.T.astype(np.uint32)) % 2
        return ~np.any(syndrome, axis=-1)

    # -- decoding -----------------------------------------------------------

    def decode(self, llrs: np.ndarray, max_iter: int = 50,
               scale: float = 0.8) -> tuple[np.ndarray, np.ndarray]:
        """Normalized min-sum decoding of a batch of codewords.

        ``llrs`` has shape (batch, n) with positive values favoring bit 0.
        Returns (hard bits (batch, n), converged flags (batch,)).
        """
        llrs = np.atleast_2d(np.asarray(llrs, dtype=np.float32))
        llrs = np.clip(llrs, -40.0, 40.0)
        batch = llrs.shape[0]
        hard = (llrs < 0).astype(np.uint8)
        ok = self.check(hard)
        if np.all(ok):
            return hard, ok

        active = np.nonzero(~ok)[0]
        llr_a = llrs[active].T.copy()           # (n, b)
        v2c = llr_a[self.edge_var]              # (E, b)
        c2v = np.zeros_like(v2c)
        bits = hard[active].T.copy()
        done = np.zeros(active.size, dtype=bool)

        for _ in range(max_iter):
            mag = np.abs(v2c)
            neg = (v2c < 0).astype(np.int8)
            min1 = np.minimum.reduceat(mag, self.chk_starts, axis=0)
            parity = np.add.reduceat(neg, self.chk_starts, axis=0) & 1
            # second minimum: mask out (all) attainers of the first minimum
            masked = np.where(mag == min1[self.edge_chk], np.float32(np.inf), mag)
            min2 = np.minimum.reduceat(masked, self.chk_starts, axis=0)
            ext_mag = np.where(mag == min1[self.edge_chk], min2[self.edge_chk],
                               min1[self.edge_chk])
            ext_mag = np.where(np.isfinite(ext_mag), ext_mag, min1[self.edge_chk])
            sign = 1.0 - 2.0 * ((parity[self.edge_chk] ^ neg).astype(np.float32))
            c2v = np.float32(scale) * sign * ext_mag

            c2v_v = c2v[self.var_order]
            total = llr_a + np.add.reduceat(c2v_v, self.var_starts, axis=0)
            v2c = total[self.edge_var] - c2v

            bits = (total < 0).astype(np.uint8)
            now_ok = self.check(bits.T)
            done |= now_ok
            if np.all(done):
                break

        out_bits = hard.copy()
        out_bits[active] = bits.T
        out_ok = ok.copy()
        out_ok[active] = done
        return out_bits, out_ok


_CODE: LdpcCode | None = None


def default_code() -> LdpcCode:
    """Shared code instance (construction involves a GF(2) inverse)."""
    global _CODE
    if _CODE is None:
        _CODE = LdpcCode()
    return _CODE
