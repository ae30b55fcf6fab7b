import math

import numpy as np
import pytest

from qgeom.errors import (
    DegenerateGroundState,
    DimensionTooLarge,
    ForbiddenOperator,
    InvalidParameter,
    UndefinedUnderPBC,
)
from qgeom.models import (
    build_continuum_ring,
    build_interacting_ring,
    build_planar_molecule,
    build_rice_mele,
    build_two_level,
    build_two_site_molecule,
    position_matrix_elements,
)
from qgeom.models.operators import velocity_operator
from qgeom.qmcore import eigendecompose, expectation


def _models():
    return {
        "two_level": (build_two_level(1.0, 0.7, 0.3), {}),
        "rice_mele_obc": (build_rice_mele(6, 1.0, 0.2, 0.5, "obc", u_rigid=0.3), {"E_x": 0.1}),
        "rice_mele_pbc": (build_rice_mele(6, 1.0, 0.2, 0.5, "pbc", twist=0.3, u_rigid=0.2), {}),
        "interacting_ring": (build_interacting_ring(6, 3, 1.0, 0.8, twist=0.2), {}),
        "continuum_ring": (build_continuum_ring(2, 2, well_depth=2.0, g_cut=4, v_int=0.3, twist=0.2),
                           {"u": 0.1, "R0": 0.05}),
        "molecule": (build_planar_molecule(1.0, 1.6, 12), {"theta": 0.3, "B_z": 0.1, "E_x": 0.05}),
    }


@pytest.mark.parametrize("name", list(_models()))
def test_analytic_derivatives_match_finite_differences(name):
    model, at = _models()[name]
    p = model.params(at)
    h = 1e-5
    for k in model.param_names:
        fd = (model.hamiltonian({**p, k: p[k] + h}) - model.hamiltonian({**p, k: p[k] - h})) / (2 * h)
        an = model.d_hamiltonian(k, p)
        assert np.max(np.abs(fd - an)) < 1e-6 * max(1.0, np.max(np.abs(an))), k


@pytest.mark.parametrize("name", list(_models()))
def test_hamiltonians_hermitian(name):
    model, at = _models()[name]
    hm = model.hamiltonian(at)
    assert np.allclose(hm, hm.conj().T, atol=1e-13)


def test_unknown_parameter_rejected():
    with pytest.raises(InvalidParameter):
        build_two_level(1.0).hamiltonian({"nope": 1.0})
    with pytest.raises(InvalidParameter):
        build_two_level(0.0)
    with pytest.raises(InvalidParameter):
        build_rice_mele(5)


def test_rigid_shift_by_full_period_is_identity():
    m = build_rice_mele(6, 1.0, 0.2, 0.5, "pbc")
    period = 2 * 1.0  # two sites of bond length 1
    assert np.allclose(m.hamiltonian({"u_rigid": 0.37}), m.hamiltonian({"u_rigid": 0.37 + period}), atol=1e-12)


def test_twist_by_flux_quantum_preserves_spectrum():
    n = 6
    m = build_interacting_ring(n, 3, 1.0, 0.5)
    e1 = eigendecompose(m.hamiltonian({"twist": 0.21})).energies
    e2 = eigendecompose(m.hamiltonian({"twist": 0.21 + 2 * math.pi / n})).energies
    assert np.allclose(e1, e2, atol=1e-12)


def test_full_band_carries_no_current():
    m = build_interacting_ring(6, 6, 1.0, 0.5, twist=0.3)
    eig = eigendecompose(m.hamiltonian())
    assert abs(expectation(m.observable("J"), eig.ground)) < 1e-12


def test_single_fermion_ring_tight_binding_dispersion():
    n, t, tw = 7, 1.3, 0.17
    m = build_interacting_ring(n, 1, t, 0.0, twist=tw)
    e = eigendecompose(m.hamiltonian()).energies
    ref = np.sort([-2 * t * math.cos(2 * math.pi * j / n + tw) for j in range(n)])
    assert np.allclose(e, ref, atol=1e-12)


def test_uniform_chain_gap_closes_with_size():
    gaps = [eigendecompose(build_rice_mele(n, 1.0, 0.0, 0.0, "obc").hamiltonian()).gap01 for n in (4, 6, 8, 10)]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


def test_isotropic_oscillator_rotation_invariant():
    m = build_planar_molecule(1.4, 1.4, 12)
    assert np.max(np.abs(m.d_hamiltonian("theta"))) < 1e-12
    eig = eigendecompose(m.hamiltonian())
    assert abs(expectation(m.observable("r2"), eig.ground) - 1.0 / 1.4) < 1e-12


def test_obc_position_routes_agree_off_diagonal():
    for m in (build_rice_mele(6, 1.0, 0.3, 0.4, "obc", n_fermions=1), build_rice_mele(6, 1.0, 0.3, 0.4, "obc")):
        eig = eigendecompose(m.hamiltonian())
        direct = position_matrix_elements(m, eig, route="direct").matrix
        vel = position_matrix_elements(m, eig, route="velocity", states=[0]).matrix
        assert np.max(np.abs(direct[1:, 0] - vel[1:, 0])) < 1e-8
        if m.n_electrons == 1:  # nondegenerate one-body spectrum: the whole off-diagonal agrees
            off = ~np.eye(eig.dim, dtype=bool)
            assert np.max(np.abs(direct[off] - vel[off])) < 1e-8


def test_pbc_diagonal_position_element_undefined():
    m = build_rice_mele(6, 1.0, 0.3, 0.4, "pbc", twist=0.2)
    eig = eigendecompose(m.hamiltonian())
    pos = position_matrix_elements(m, eig, states=[0, 1])
    with pytest.raises(UndefinedUnderPBC):
        pos[0, 0]
    assert np.isfinite(pos[0, 1])
    with pytest.raises(ForbiddenOperator):
        m.position()
    with pytest.raises(ForbiddenOperator):
        m.d_efield()


def test_degenerate_pair_in_velocity_route_raises():
    m = build_interacting_ring(4, 1, 1.0, 0.0, twist=0.0)  # k = +-pi/2 degenerate
    eig = eigendecompose(m.hamiltonian())
    with pytest.raises(DegenerateGroundState):
        position_matrix_elements(m, eig)


def test_two_level_velocity_vanishes():
    m = build_two_level(1.0, 0.4, 0.2)
    eig = eigendecompose(m.hamiltonian())
    assert np.all(eig.matrix_elements(velocity_operator(m)) == 0)


def test_two_site_molecule_closed_form():
    t, off = 1.0, 0.6
    m = build_two_site_molecule(t, off)
    e = eigendecompose(m.hamiltonian()).energies
    assert np.allclose(e, [-math.hypot(t, off / 2), math.hypot(t, off / 2)], atol=1e-12)


def test_continuum_translation_symmetry_exact():
    ring = build_continuum_ring(2, 2, well_depth=3.0, g_cut=4, twist=0.3)
    e1 = eigendecompose(ring.hamiltonian({"u": 0.0})).energies
    e2 = eigendecompose(ring.hamiltonian({"u": 0.377})).energies
    assert np.allclose(e1, e2, atol=1e-11)


def test_fock_dimension_guard():
    with pytest.raises(DimensionTooLarge):
        build_interacting_ring(24, 12)


def test_fingerprint_stable_and_parameter_sensitive():
    m = build_rice_mele(6)
    assert m.fingerprint() == build_rice_mele(6).fingerprint()
    assert m.fingerprint({"delta_dim": 0.1}) != m.fingerprint()


def test_molecule_displaced_moves_potential():
    m = build_planar_molecule(1.0, 1.6, 10)
    d = m.displaced((0.3, 0.0))
    e1 = eigendecompose(m.hamiltonian()).energies[0]
    e2 = eigendecompose(d.hamiltonian()).energies[0]
    assert abs(e1 - e2) < 1e-8  # same spectrum, truncated basis
