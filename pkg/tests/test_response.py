import json
import math

import numpy as np
import pytest

from qgeom import response as resp
from qgeom.errors import ForbiddenOperator, InvalidParameter
from qgeom.geometry import ground_eigensystem
from qgeom.models import (
    NuclearFrame,
    Nucleus,
    build_continuum_ring,
    build_planar_molecule,
    build_rice_mele,
    build_two_site_molecule,
)


def test_two_site_polarizability_closed_form():
    t, off = 1.0, 0.6
    m = build_two_site_molecule(t, off, spacing=1.0)
    a = off / 2
    exact = 0.25 * t * t / (a * a + t * t) ** 1.5  # (e d / 2)^2 t^2 / (a^2 + t^2)^(3/2)
    for rep in (resp.polarizability_curvature(m), resp.polarizability_kubo(m), resp.polarizability_finite_field(m)):
        assert rep.components[0, 0] == pytest.approx(exact, rel=1e-6)


@pytest.mark.parametrize("model", [build_rice_mele(6, 1.0, 0.3, 0.5, "obc"), build_planar_molecule(1.0, 1.6, 14,
                                                                                                     theta=0.5)])
def test_polarizability_symmetric_positive(model):
    rep = resp.polarizability_kubo(model)
    a = rep.components
    assert np.allclose(a, a.T, atol=1e-12)
    assert np.all(np.diag(a) >= 0)
    assert rep.residual_vs_alternate_route < 1e-10


def test_oscillator_polarizability_is_e2_over_m_omega2():
    rep = resp.polarizability_kubo(build_planar_molecule(1.0, 1.6, 14))
    assert np.allclose(rep.components, np.diag([1.0, 1 / 1.6 ** 2]), atol=1e-10)


def test_pbc_polarizability_reported_as_chi():
    m = build_rice_mele(6, 1.0, 0.3, 0.5, "pbc", twist=0.2)
    rep = resp.polarizability_curvature(m)
    assert rep.tensor_name == "chi" and rep.volume == m.cell_length
    assert rep.extra["epsilon_inf"][0][0] == pytest.approx(1 + 4 * math.pi * rep.components[0, 0])
    assert rep.residual_vs_alternate_route < 1e-10
    with pytest.raises(ForbiddenOperator):
        resp.polarizability_finite_field(m)


def test_report_serialization_round_trip():
    rep = resp.polarizability_kubo(build_two_site_molecule(1.0, 0.6))
    doc = json.loads(rep.to_json())
    assert doc["tensor_name"] == "alpha" and doc["route"] == rep.route
    assert rep.to_csv().splitlines()[0].startswith("tensor,i,j,value")
    with pytest.raises(InvalidParameter):
        resp.ResponseReport("x", [[float("nan")]], "kubo", None, "fp")


def test_born_charge_of_isolated_neutral_atom_vanishes():
    atom = build_planar_molecule(1.2, 1.2, 12, frame=NuclearFrame((Nucleus(1.0, (0.0, 0.0), 1836.0),)))
    rep = resp.born_charges(atom, s=0)
    assert np.max(np.abs(rep.components)) < 1e-10
    assert rep.residual_vs_alternate_route < 1e-6


def test_born_charges_routes_agree_for_molecule():
    frame = NuclearFrame((Nucleus(0.3, (0.6, 0.2), 1836.0), Nucleus(0.7, (-0.5, 0.1), 1836.0)))
    m = build_planar_molecule(1.0, 1.6, 14, frame=frame)
    for s in range(2):
        rep = resp.born_charges(m, s=s)
        assert rep.residual_vs_alternate_route < 1e-6


def test_acoustic_sum_neutral_molecule():
    r = resp.acoustic_sum(build_planar_molecule(1.0, 1.6, 14))
    assert r.residual < 1e-8
    assert len(r.per_nucleus) == 2


def test_free_ring_effective_density_and_drude():
    ring = build_continuum_ring(2, 2, well_depth=0.0, g_cut=4, twist=0.3)
    n_rep, d_rep = resp.effective_density_and_drude(ring)
    assert n_rep.components[0, 0] == pytest.approx(1.0, abs=1e-12)
    assert d_rep.components[0, 0] == pytest.approx(math.pi * 1.0, rel=1e-8)
    assert n_rep.residual_vs_alternate_route < 1e-8


def test_effective_density_equals_born_sum_over_length():
    ring = build_continuum_ring(2, 2, well_depth=3.0, g_cut=4, v_int=0.4, twist=0.25)
    n_curv = resp.curvature_effective_density(ring)
    total = resp.acoustic_sum(ring).total[0, 0]
    assert n_curv == pytest.approx(total / ring.cell_length, abs=1e-12)


def test_lattice_chain_effective_density_kohn_only():
    m = build_rice_mele(6, 1.0, 0.0, 0.0, "pbc", twist=0.1)
    n_rep, _ = resp.effective_density_and_drude(m)
    assert n_rep.alternate is None and n_rep.residual_vs_alternate_route is None


def test_dcs_requires_pbc():
    with pytest.raises(ForbiddenOperator):
        resp.dcs_sum_rule(build_rice_mele(6))


def test_adiabatic_current_continuity():
    m = build_rice_mele(6, 1.0, 0.2, 0.5, "obc", u_rigid=0.3)
    r = resp.adiabatic_current_density(m, {"delta_dim": 0.1}, "delta_dim", 0.01)
    assert r.continuity_residual < 1e-10
    assert r.bond_currents.shape == (5,)
    ring = build_rice_mele(6, 1.0, 0.2, 0.5, "pbc", twist=0.3)
    r2 = resp.adiabatic_current_density(ring, None, "u_rigid", 0.02)
    assert r2.continuity_residual < 1e-10
    assert np.max(np.abs(r2.bond_currents)) > 0


def test_sternheimer_matches_spectral_sum():
    m = build_rice_mele(6, 1.0, 0.2, 0.5, "obc")
    eig = ground_eigensystem(m)
    d = m.d_hamiltonian("delta_dim")
    x = resp.sternheimer_derivative(eig, d)
    el = eig.matrix_elements(d)[1:, 0] / (eig.energies[0] - eig.energies[1:])
    spectral = eig.vectors[:, 1:] @ el
    assert np.allclose(x, spectral, atol=1e-9)


def test_continuity_identity_local_and_nonlocal():
    assert resp.continuity_identity_check(build_rice_mele(6, 1.0, 0.2, 0.4, "pbc", twist=0.3)) < 1e-12
    phi = np.zeros(6)
    phi[0] = phi[3] = 1 / math.sqrt(2)
    nl = build_rice_mele(6, 1.0, 0.2, 0.4, "pbc", nonlocal_projector=(0.5, phi))
    assert resp.continuity_identity_check(nl) > 1e-3


def test_richardson_helpers_exact_for_polynomials():
    f = lambda x: x ** 4 - 2 * x ** 2
    assert resp.richardson_second_derivative(f, 0.7, 0.1) == pytest.approx(12 * 0.49 - 4, abs=1e-10)
    assert resp.richardson_first_derivative(f, 0.7, 0.1) == pytest.approx(4 * 0.343 - 4 * 0.7, abs=1e-10)
    g = lambda x, y: x * x * y + 3 * x * y
    assert resp.richardson_mixed_derivative(g, 0.5, 0.2, 0.1) == pytest.approx(2 * 0.5 + 3, abs=1e-10)
