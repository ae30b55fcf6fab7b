"""Fixed-particle-number Fock space for spinless fermions.

Basis states are bit strings (bit ``i`` set = orbital ``i`` occupied), sorted
ascending. Ladder operators are applied in vectorized form over the whole
basis; the fermionic sign counts occupied orbitals of lower index.
"""
from __future__ import annotations

from math import comb

import numpy as np

from .errors import DimensionTooLarge, InvalidParameter

MAX_DIM = 4000


def _popcount(x: np.ndarray) -> np.ndarray:
    return np.bitwise_count(x.astype(np.uint64)).astype(np.int64)


class FockSpace:
    def __init__(self, n_orbitals: int, n_particles: int, max_dim: int = MAX_DIM):
        if n_orbitals < 1 or not 0 <= n_particles <= n_orbitals:
            raise InvalidParameter(f"{n_particles} particles in {n_orbitals} orbitals")
        dim = comb(n_orbitals, n_particles)
        if dim > max_dim:
            raise DimensionTooLarge(f"Fock dimension {dim} exceeds {max_dim}")
        self.n_orbitals = n_orbitals
        self.n_particles = n_particles
        self.states = self._enumerate(n_orbitals, n_particles)
        self.dim = self.states.shape[0]
        self._pair_cache: dict[tuple[int, int], tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

    @staticmethod
    def _enumerate(m: int, n: int) -> np.ndarray:
        allstates = np.arange(1 << m, dtype=np.int64)
        return allstates[_popcount(allstates) == n]

    def occupations(self) -> np.ndarray:
        """(dim, n_orbitals) 0/1 occupation table."""
        bits = (self.states[:, None] >> np.arange(self.n_orbitals)[None, :]) & 1
        return bits.astype(float)

    def apply(self, ops):
        """Apply a product of ladder operators, rightmost first.

        ``ops`` is a sequence of ``(orbital, dagger)``. Returns
        ``(cols, rows, signs)``: op|cols> = signs * |rows>, restricted to
        basis states where the product does not vanish.
        """
        cur = self.states.copy()
        sign = np.ones(cur.shape[0], dtype=np.int64)
        alive = np.ones(cur.shape[0], dtype=bool)
        for orb, dagger in reversed(list(ops)):
            bit = np.int64(1) << np.int64(orb)
            occ = (cur & bit) != 0
            alive &= ~occ if dagger else occ
            below = _popcount(cur & (bit - 1))
            sign = np.where(below % 2 == 1, -sign, sign)
            cur = cur ^ bit
        cols = np.nonzero(alive)[0]
        rows = np.searchsorted(self.states, cur[cols])
        return cols, rows, sign[cols]

    def _pair(self, i: int, j: int):
        key = (i, j)
        if key not in self._pair_cache:
            self._pair_cache[key] = self.apply([(i, True), (j, False)])
        return self._pair_cache[key]

    def one_body(self, h) -> np.ndarray:
        """Second-quantized sum_ij h_ij c_i^dagger c_j."""
        h = np.asarray(h, dtype=complex)
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for i, j in zip(*np.nonzero(h)):
            cols, rows, signs = self._pair(int(i), int(j))
            np.add.at(out, (rows, cols), h[i, j] * signs)
        return out

    def number(self, i: int) -> np.ndarray:
        return np.diag(((self.states >> i) & 1).astype(complex))

    def diagonal(self, values) -> np.ndarray:
        return np.diag(np.asarray(values, dtype=complex))

    def two_body(self, terms) -> np.ndarray:
        """Sum of ``coef * c_a^dag c_b^dag c_c c_d`` over ``(coef, a, b, c, d)`` terms."""
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for coef, a, b, c, d in terms:
            if a == b or c == d:
                continue
            cols, rows, signs = self.apply([(a, True), (b, True), (c, False), (d, False)])
            np.add.at(out, (rows, cols), coef * signs)
        return out
