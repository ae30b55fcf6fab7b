"""Dense linear algebra on finite Hilbert spaces.

States are 1-D complex arrays, operators are square complex arrays. The
helpers here validate those conventions and provide the eigensystem every
other module consumes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    DegenerateGroundState,
    DimensionMismatch,
    NotHermitian,
    NotNormalized,
    NumericalFailure,
)

HERMITIAN_TOL = 1e-12
RESIDUAL_TOL = 1e-10
DEGENERACY_RTOL = 1e-9
# components within this relative margin of the largest modulus count as ties
_PHASE_TIE_RTOL = 1e-8


def as_hermitian(matrix, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate ``matrix`` as self-adjoint and return it as an exactly Hermitian array."""
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"operator must be square, got shape {m.shape}")
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    dev = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
    if dev >= tol * scale:
        raise NotHermitian(f"max |M - M^dagger| = {dev:.3e}")
    return 0.5 * (m + m.conj().T)


def normalize(psi) -> np.ndarray:
    v = np.asarray(psi, dtype=complex).ravel()
    n = np.linalg.norm(v)
    if n == 0.0:
        raise NotNormalized("cannot normalize the zero vector")
    return v / n


def _check_pair(op: np.ndarray, psi: np.ndarray) -> None:
    if op.shape[0] != psi.shape[0]:
        raise DimensionMismatch(f"operator dim {op.shape[0]} vs state dim {psi.shape[0]}")


def expectation_raw(op, psi) -> complex:
    """Raw quadratic form <psi|op|psi>; the imaginary part is a Hermiticity diagnostic."""
    op = np.asarray(op, dtype=complex)
    psi = np.asarray(psi, dtype=complex)
    _check_pair(op, psi)
    return complex(np.vdot(psi, op @ psi))


def expectation(op, psi, norm_tol: float = 1e-10) -> float:
    psi = np.asarray(psi, dtype=complex)
    if abs(np.linalg.norm(psi) - 1.0) > norm_tol:
        raise NotNormalized(f"state norm {np.linalg.norm(psi):.15f}")
    return expectation_raw(op, psi).real


def commutator(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    return a @ b - b @ a


def fix_phases(vectors: np.ndarray) -> np.ndarray:
    """Make the (first) largest-modulus component of every column real and positive."""
    v = np.array(vectors, dtype=complex)
    mod = np.abs(v)
    peak = mod.max(axis=0)
    idx = np.argmax(mod >= (1.0 - _PHASE_TIE_RTOL) * peak, axis=0)
    cols = np.arange(v.shape[1])
    ref = v[idx, cols]
    v *= (np.abs(ref) / ref)[None, :]
    return v


@dataclass(frozen=True)
class EigenSystem:
    energies: np.ndarray
    vectors: np.ndarray  # columns are eigenstates
    op_norm: float

    @property
    def dim(self) -> int:
        return self.energies.shape[0]

    @property
    def gap01(self) -> float:
        if self.dim < 2:
            return float("inf")
        return float(self.energies[1] - self.energies[0])

    @property
    def degenerate(self) -> bool:
        return self.gap01 < DEGENERACY_RTOL * max(self.op_norm, 1e-300)

    def state(self, n: int) -> np.ndarray:
        return self.vectors[:, n]

    @property
    def ground(self) -> np.ndarray:
        return self.vectors[:, 0]

    def require_gap(self) -> "EigenSystem":
        if self.degenerate:
            raise DegenerateGroundState(
                f"E1 - E0 = {self.gap01:.3e} below {DEGENERACY_RTOL:g} * |H| = {self.op_norm:.3e}"
            )
        return self

    def matrix_elements(self, op) -> np.ndarray:
        """<n|op|m> in the eigenbasis."""
        return self.vectors.conj().T @ np.asarray(op, dtype=complex) @ self.vectors


def eigendecompose(h, check: bool = True) -> EigenSystem:
    """Full spectrum of a Hermitian matrix with deterministic eigenvector phases.

    Raises ``NotHermitian`` for non-self-adjoint input and ``NumericalFailure``
    when the eigen-residual or orthonormality exceeds the 1e-10 tolerances.
    """
    m = as_hermitian(h)
    if not np.any(m.imag):
        energies, vecs = scipy.linalg.eigh(m.real, driver="evr")
    else:
        energies, vecs = scipy.linalg.eigh(m, driver="evr")
    vecs = fix_phases(vecs)
    op_norm = float(np.max(np.abs(energies))) if energies.size else 0.0
    if check:
        resid = np.max(np.linalg.norm(m @ vecs - vecs * energies[None, :], axis=0))
        if resid > RESIDUAL_TOL * max(op_norm, 1.0):
            raise NumericalFailure(f"eigen residual {resid:.3e}")
        ortho = np.max(np.abs(vecs.conj().T @ vecs - np.eye(m.shape[0])))
        if ortho > RESIDUAL_TOL:
            raise NumericalFailure(f"orthonormality defect {ortho:.3e}")
    return EigenSystem(energies=energies, vectors=vecs, op_norm=op_norm)
