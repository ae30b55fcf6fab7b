"""Property-based checks of gauge, unitary and sign invariants."""
import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from qgeom import geometry as geo
from qgeom.models import build_two_level
from qgeom.qmcore import eigendecompose, expectation

SETTINGS = settings(max_examples=30, deadline=None)
angles = st.floats(0.0, 2 * math.pi, allow_nan=False)
seeds = st.integers(0, 2**32 - 1)


def _hermitian(rng, n):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (a + a.conj().T) / 2


def _unitary(rng, n):
    q, r = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def _random_states(seed, n_states=6, dim=4):
    rng = np.random.default_rng(seed)
    vs = rng.normal(size=(n_states, dim)) + 1j * rng.normal(size=(n_states, dim))
    return [v / np.linalg.norm(v) for v in vs]


@SETTINGS
@given(seeds, st.lists(angles, min_size=6, max_size=6))
def test_loop_phase_is_gauge_invariant(seed, gauges):
    states = _random_states(seed)
    p0 = geo.loop_phase_from_states(states)[0]
    p1 = geo.loop_phase_from_states([np.exp(1j * g) * s for g, s in zip(gauges, states)])[0]
    assert abs(geo.wrap_phase(p0 - p1)) < 1e-10


@SETTINGS
@given(seeds)
def test_reversed_chain_negates_phase(seed):
    states = _random_states(seed)
    fwd = geo.loop_phase_from_states(states)[0]
    rev = geo.loop_phase_from_states(states[::-1])[0]
    assert abs(geo.wrap_phase(fwd + rev)) < 1e-10


@SETTINGS
@given(st.floats(-1e3, 1e3, allow_nan=False))
def test_wrap_phase_range_and_congruence(x):
    w = geo.wrap_phase(x)
    assert -math.pi < w <= math.pi
    k = (x - w) / (2 * math.pi)
    assert abs(k - round(k)) < 1e-9


@SETTINGS
@given(seeds, st.integers(2, 7))
def test_unitary_invariance_of_spectrum_and_expectations(seed, n):
    rng = np.random.default_rng(seed)
    h, a, u = _hermitian(rng, n), _hermitian(rng, n), _unitary(rng, n)
    e1 = eigendecompose(h)
    e2 = eigendecompose(u @ h @ u.conj().T)
    assert np.allclose(e1.energies, e2.energies, atol=1e-10)
    psi = e1.state(0)
    assert abs(expectation(a, psi) - expectation(u @ a @ u.conj().T, u @ psi)) < 1e-10


@SETTINGS
@given(seeds, st.integers(2, 7))
def test_eigenbasis_completeness(seed, n):
    eig = eigendecompose(_hermitian(np.random.default_rng(seed), n))
    v = eig.vectors
    assert np.allclose(v @ v.conj().T, np.eye(n), atol=1e-12)
    assert np.allclose(v.conj().T @ v, np.eye(n), atol=1e-12)


@SETTINGS
@given(st.floats(0.2, math.pi - 0.2), angles)
def test_two_level_curvature_and_antisymmetry(theta, phi):
    m = build_two_level(1.0)
    p = {"theta": theta, "phi": phi}
    om = geo.curvature_kubo(m, p, "theta", "phi").value
    assert abs(om - 0.5 * math.sin(theta)) < 1e-10
    assert abs(om + geo.curvature_kubo(m, p, "phi", "theta").value) < 1e-12
