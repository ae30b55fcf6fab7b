import pytest

from qgeom import magnetics as mag
from qgeom.errors import BasisNotConverged
from qgeom.models import NuclearFrame, Nucleus, build_planar_molecule, choose_basis_cut


def test_basis_cut_rule():
    cut = choose_basis_cut(1.0, 1.6)
    assert cut % 2 == 0 and cut >= 8
    assert choose_basis_cut(1.3, 1.3) == 8  # isotropic: the basis oscillator is exact


def test_unconverged_basis_rejected():
    with pytest.raises(BasisNotConverged):
        mag.magnetizability(build_planar_molecule(1.0, 2.5, 4))


@pytest.mark.parametrize("wx,wy", [(1.0, 1.6), (1.0, 2.0), (1.3, 1.3)])
def test_total_magnetizability_closed_form(wx, wy):
    m = build_planar_molecule(wx, wy, choose_basis_cut(wx, wy))
    r = mag.magnetizability(m)
    assert r.chi_total == pytest.approx(-1.0 / (2.0 * (wx + wy)), abs=1e-9)
    assert r.chi_para >= 0 and r.chi_dia < 0
    assert r.para_route_residual < 1e-8
    assert r.finite_field_residual < 1e-6


def test_isotropic_has_no_paramagnetism():
    r = mag.magnetizability(build_planar_molecule(1.4, 1.4, 8))
    assert abs(r.chi_para) < 1e-12 and abs(r.chi_para_curvature) < 1e-12


def test_rotational_moment_decomposition():
    m = build_planar_molecule(1.0, 1.6, 14, theta=0.3)
    r = mag.rotational_moment(m)
    assert r.m_z_per_thetadot == pytest.approx(r.m_z0_per_thetadot + r.m_z1_per_thetadot, abs=1e-12)
    assert r.m_z_per_thetadot == pytest.approx(r.nuclear_term + r.electronic_term, abs=1e-12)
    assert r.mech_moment_per_thetadot == pytest.approx(2 * 1836.0)


def test_relation_62():
    r = mag.relation_62_check(build_planar_molecule(1.0, 1.6, 14))
    assert r.residual < 1e-8


def test_lz_identity_sign():
    r = mag.lz_state_identity(build_planar_molecule(1.0, 1.6, 14))
    assert r.residual_plus < 1e-10 * max(1.0, r.scale)
    assert r.residual_minus > 1e-3


def test_gauge_origin_scan_charged_frame_chi_invariant():
    frame = NuclearFrame((Nucleus(1.0, (1.0, 0.0), 1836.0), Nucleus(1.0, (-1.0, 0.0), 1836.0)))
    m = build_planar_molecule(1.0, 1.6, 14, frame=frame)  # charge +1 overall: m_z depends on origin
    scan = mag.gauge_origin_scan(m)
    assert scan.chi_total_spread < 1e-8
    assert scan.m_z_spread > 1e-3
    assert set(scan.logged_spreads) >= {"chi_dia", "chi_para", "m_z0"}
    assert len(scan.as_dict()["rotational"]) == 3
