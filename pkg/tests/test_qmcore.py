import numpy as np
import pytest

from qgeom.errors import DegenerateGroundState, DimensionMismatch, NotHermitian, NotNormalized
from qgeom.qmcore import as_hermitian, commutator, eigendecompose, expectation, fix_phases, normalize


def _random_hermitian(n, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return a + a.conj().T


def test_eigendecompose_sorted_orthonormal_and_exact():
    h = _random_hermitian(12)
    eig = eigendecompose(h)
    assert np.all(np.diff(eig.energies) >= 0)
    assert np.allclose(eig.vectors.conj().T @ eig.vectors, np.eye(12), atol=1e-12)
    assert np.allclose(h @ eig.vectors, eig.vectors * eig.energies, atol=1e-10)


def test_real_symmetric_path_matches_complex():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(8, 8))
    h = a + a.T
    e1 = eigendecompose(h).energies
    e2 = np.linalg.eigvalsh(h)
    assert np.allclose(e1, e2, atol=1e-12)


def test_phase_convention_is_deterministic():
    h = _random_hermitian(6, 1)
    v1 = eigendecompose(h).vectors
    v2 = eigendecompose(h.copy()).vectors
    assert np.array_equal(v1, v2)
    idx = np.argmax(np.abs(v1), axis=0)
    ref = v1[idx, np.arange(6)]
    assert np.allclose(ref.imag, 0, atol=1e-14) and np.all(ref.real > 0)


def test_fix_phases_invariant_under_global_phase():
    h = _random_hermitian(5, 2)
    v = eigendecompose(h).vectors
    assert np.allclose(fix_phases(v * np.exp(0.7j)), v, atol=1e-13)


def test_not_hermitian_rejected():
    with pytest.raises(NotHermitian):
        as_hermitian(np.array([[0, 1], [0, 0]]))
    with pytest.raises(DimensionMismatch):
        as_hermitian(np.zeros((2, 3)))


def test_expectation_requires_normalized_state():
    op = np.diag([1.0, -1.0])
    assert expectation(op, np.array([1, 0])) == 1.0
    with pytest.raises(NotNormalized):
        expectation(op, np.array([1.0, 1.0]))
    with pytest.raises(DimensionMismatch):
        expectation(op, np.array([1.0, 0, 0]))
    assert np.isclose(np.linalg.norm(normalize([3, 4j])), 1.0)
    with pytest.raises(NotNormalized):
        normalize([0, 0])


def test_commutator_antihermitian():
    a, b = _random_hermitian(4, 5), _random_hermitian(4, 6)
    c = commutator(a, b)
    assert np.allclose(c, -c.conj().T)
    with pytest.raises(DimensionMismatch):
        commutator(a, np.eye(3))


def test_degenerate_ground_state_detected():
    eig = eigendecompose(np.diag([1.0, 1.0, 2.0]))
    assert eig.degenerate
    with pytest.raises(DegenerateGroundState):
        eig.require_gap()
    assert eigendecompose(np.diag([0.0, 1.0])).gap01 == 1.0


def test_matrix_elements_diagonal_in_eigenbasis():
    h = _random_hermitian(7, 9)
    eig = eigendecompose(h)
    assert np.allclose(eig.matrix_elements(h), np.diag(eig.energies), atol=1e-10)
