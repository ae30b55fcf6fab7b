"""Rotational magnetic moment and magnetizability of a planar one-electron molecule.

Conventions: rotation about z is counterclockwise, V_theta(r) = V_0(R(-theta) r),
so d_theta H = -(i/hbar)[L_z, H]; the field B_z enters in the symmetric gauge
centred on the rotation axis, with dH/dB_z = (e/2mc) L_z at B = 0. With these
conventions chi_para = -(hbar e / 2mc) Omega(B_z, theta) >= 0 and the
electronic moment of a rigidly dragged electron is negative (charge -e).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BasisNotConverged, DegenerateGroundState
from .geometry import curvature_from_derivatives, ground_eigensystem
from .qmcore import EigenSystem, expectation
from .response import richardson_second_derivative

TOP_SHELL_TOL = 1e-10


def _check_basis(model, eig: EigenSystem, tol: float):
    if hasattr(model, "top_shell_weight"):
        w = model.top_shell_weight(eig.ground)
        if w > tol:
            raise BasisNotConverged(f"ground state has weight {w:.3e} in the truncation shell (tol {tol:g})")
        return w
    return 0.0


@dataclass(frozen=True)
class RotationalReport:
    m_z_per_thetadot: float
    m_z0_per_thetadot: float
    m_z1_per_thetadot: float
    mech_moment_per_thetadot: float
    g_factor: float
    nuclear_term: float
    electronic_term: float  # hbar * Omega(B_z, theta)
    curvature_BzTheta: float
    r2: float
    top_shell_weight: float = 0.0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class MagnetizabilityReport:
    chi_dia: float
    chi_para: float  # sum over states
    chi_total: float
    curvature_BzTheta: float
    chi_para_curvature: float
    chi_finite_field: float
    para_route_residual: float
    finite_field_residual: float  # relative
    top_shell_weight: float = 0.0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _curvature_b_theta(model, params, eig):
    d_b = model.d_hamiltonian("B_z", params)
    d_t = model.d_hamiltonian("theta", params)
    val, _ = curvature_from_derivatives(eig, d_b, d_t)
    return val


def rotational_moment(model, params=None, basis_tol: float = TOP_SHELL_TOL) -> RotationalReport:
    """m_z / theta-dot = (e/2c) sum_s Z_s R_s^2 + hbar Omega(B_z, theta) and its (0)/(1) split."""
    u = model.units
    p = model.params(params)
    eig = ground_eigensystem(model, p)
    w = _check_basis(model, eig, basis_tol)
    pos = model.nuclear_positions(p)
    z = model.frame.charges()
    masses = np.array([n.mass for n in model.frame.nuclei])
    rr = np.sum(pos ** 2, axis=1)
    nuclear = u.e_charge / (2.0 * u.c_light) * float(np.dot(z, rr))
    omega = _curvature_b_theta(model, p, eig)
    electronic = u.hbar * omega
    r2 = expectation(model.observable("r2"), eig.ground)
    m_z = nuclear + electronic
    m0 = u.e_charge / (2.0 * u.c_light) * (float(np.dot(z, rr)) - r2)
    m1 = u.e_charge / (2.0 * u.c_light) * r2 + electronic
    mech = float(np.dot(masses, rr))
    g = 2.0 * u.mass * u.c_light / u.e_charge * m_z / mech if mech > 0 else float("nan")
    return RotationalReport(m_z, m0, m1, mech, g, nuclear, electronic, omega, r2, w)


def magnetizability(model, params=None, fd_step: float = 2e-2,
                    basis_tol: float = TOP_SHELL_TOL) -> MagnetizabilityReport:
    """chi = chi_dia + chi_para with both chi_para routes and the finite-field oracle.

    chi_dia = -<d^2 H / dB^2>, chi_para = 2 sum_n |<n|dH/dB|0>|^2 / (En - E0);
    curvature route chi_para = -(hbar e / 2mc) Omega(B_z, theta) (exact at B = 0);
    finite field chi = -d^2 E0 / dB^2 (Richardson).
    """
    u = model.units
    p = model.params(params)
    eig = ground_eigensystem(model, p)
    w = _check_basis(model, eig, basis_tol)
    d2 = model.d2_hamiltonian_bfield()
    chi_dia = -expectation(d2, eig.ground)
    d_b = eig.matrix_elements(model.d_hamiltonian("B_z", p))[1:, 0]
    chi_para = float(2.0 * np.sum(np.abs(d_b) ** 2 / (eig.energies[1:] - eig.energies[0])))
    omega = _curvature_b_theta(model, p, eig)
    chi_para_curv = -u.hbar * u.e_charge / (2.0 * u.mass * u.c_light) * omega
    chi_total = chi_dia + chi_para

    def e0(b):
        return float(ground_eigensystem(model, {**p, "B_z": b}).energies[0])

    chi_fd = -richardson_second_derivative(e0, p["B_z"], fd_step)
    ff_res = abs(chi_fd - chi_total) / max(abs(chi_total), 1e-300)
    return MagnetizabilityReport(chi_dia, chi_para, chi_total, omega, chi_para_curv, chi_fd,
                                 abs(chi_para - chi_para_curv), ff_res, w)


@dataclass(frozen=True)
class Relation62:
    chi_total: float
    m_z1_per_thetadot: float
    residual: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def relation_62_check(model, params=None) -> Relation62:
    """|chi_total + (e/2mc) m_z1 / theta-dot|: total magnetizability from the rotational moment."""
    u = model.units
    rot = rotational_moment(model, params)
    mag = magnetizability(model, params)
    res = abs(mag.chi_total + u.e_charge / (2.0 * u.mass * u.c_light) * rot.m_z1_per_thetadot)
    return Relation62(mag.chi_total, rot.m_z1_per_thetadot, res)


@dataclass(frozen=True)
class GaugeOriginScan:
    origins: tuple
    rotational: tuple
    magnetizability: tuple
    m_z_spread: float
    chi_total_spread: float
    logged_spreads: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"origins": [list(o) for o in self.origins],
                "rotational": [r.as_dict() for r in self.rotational],
                "magnetizability": [m.as_dict() for m in self.magnetizability],
                "m_z_spread": self.m_z_spread, "chi_total_spread": self.chi_total_spread,
                "logged_spreads": dict(self.logged_spreads)}


def _spread(values):
    return float(np.max(values) - np.min(values))


def gauge_origin_scan(model, params=None, origins=((0.0, 0.0), (0.3, 0.0), (0.0, 0.7))) -> GaugeOriginScan:
    """Displace the molecule (frame and potential) relative to the fixed gauge origin and rotation axis.

    Total m_z is invariant for a neutral frame with zero static dipole and
    chi_total is invariant always; chi_dia, chi_para and m_z^(0) are logged.
    """
    origins = tuple(tuple(float(c) for c in o) for o in origins)
    rots, mags = [], []
    for o in origins:
        m = model.displaced(o)
        rots.append(rotational_moment(m, params))
        mags.append(magnetizability(m, params))
    logged = {
        "m_z0": _spread([r.m_z0_per_thetadot for r in rots]),
        "m_z1": _spread([r.m_z1_per_thetadot for r in rots]),
        "chi_dia": _spread([x.chi_dia for x in mags]),
        "chi_para": _spread([x.chi_para for x in mags]),
        "curvature_BzTheta": _spread([r.curvature_BzTheta for r in rots]),
    }
    return GaugeOriginScan(origins, tuple(rots), tuple(mags), _spread([r.m_z_per_thetadot for r in rots]),
                           _spread([x.chi_total for x in mags]), logged)


@dataclass(frozen=True)
class LzIdentity:
    residual_plus: float  # max_n | <n|L_z|0> - i hbar <n|d_theta Psi0> |
    residual_minus: float  # same with -i hbar
    scale: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def lz_state_identity(model, params=None) -> LzIdentity:
    """Compare <n|L_z|Psi0> with +-i hbar <n|d_theta Psi0>, n > 0, d_theta Psi0 from the spectral sum.

    With counterclockwise rotation the identity holds with the + sign: L_z
    generates the rotation that d_theta differentiates.
    """
    eig = ground_eigensystem(model, params)
    if eig.degenerate:
        raise DegenerateGroundState("L_z identity needs a nondegenerate ground state")
    hbar = model.units.hbar
    lz = eig.matrix_elements(model.observable("L_z"))[1:, 0]
    dth = eig.matrix_elements(model.d_hamiltonian("theta", params))[1:, 0]
    dpsi = dth / (eig.energies[0] - eig.energies[1:])
    scale = float(max(np.max(np.abs(lz)), 1e-300))
    return LzIdentity(float(np.max(np.abs(lz - 1j * hbar * dpsi))),
                      float(np.max(np.abs(lz + 1j * hbar * dpsi))), scale)


__all__ = ["RotationalReport", "MagnetizabilityReport", "rotational_moment", "magnetizability",
           "relation_62_check", "Relation62", "gauge_origin_scan", "GaugeOriginScan", "lz_state_identity",
           "LzIdentity"]
