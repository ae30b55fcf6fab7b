"""Adiabatic linear-response tensors and the continuity machinery.

Field conventions (electron charge -e):

* uniform vector potential A: ``model.d_vector_potential`` gives dH/dA;
* OBC static field E: dH/dE_gamma = e r_gamma (``model.d_efield``);
* PBC field derivatives use velocity-route position elements only, since the
  position operator is not admissible there.

Every PBC formula that carries L^3 uses the model's supercell length
(``model.cell_length``); reports record the value used.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import ForbiddenOperator, InvalidParameter
from .geometry import ground_eigensystem
from .models.base import OBC, PBC
from .models.operators import position_matrix_elements
from .qmcore import EigenSystem, commutator, expectation

ROUTE_CURVATURE = "curvature"
ROUTE_KUBO = "kubo"
ROUTE_FD = "finite_difference"


@dataclass(frozen=True)
class ResponseReport:
    tensor_name: str
    components: np.ndarray
    route: str
    residual_vs_alternate_route: float | None
    model_fingerprint: str
    alternate: np.ndarray | None = None
    alternate_route: str | None = None
    volume: float | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        comp = np.atleast_2d(np.asarray(self.components, dtype=float))
        if not np.all(np.isfinite(comp)):
            raise InvalidParameter(f"{self.tensor_name}: non-finite components")
        object.__setattr__(self, "components", comp)
        if self.alternate is not None:
            object.__setattr__(self, "alternate", np.atleast_2d(np.asarray(self.alternate, dtype=float)))

    def as_dict(self) -> dict:
        return {
            "tensor_name": self.tensor_name,
            "route": self.route,
            "components": self.components.tolist(),
            "alternate_route": self.alternate_route,
            "alternate": None if self.alternate is None else self.alternate.tolist(),
            "residual_vs_alternate_route": _json_float(self.residual_vs_alternate_route),
            "model_fingerprint": self.model_fingerprint,
            "volume": self.volume,
            "extra": {k: _jsonable(v) for k, v in sorted(self.extra.items())},
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, indent=2)

    def csv_rows(self) -> list:
        rows = []
        for (i, j), v in np.ndenumerate(self.components):
            alt = None if self.alternate is None else float(self.alternate[i, j])
            rows.append({"tensor": self.tensor_name, "i": i, "j": j, "value": repr(float(v)),
                         "route": self.route, "alternate_route": self.alternate_route or "",
                         "alternate_value": "" if alt is None else repr(alt),
                         "residual": "" if self.residual_vs_alternate_route is None
                         else repr(float(self.residual_vs_alternate_route)),
                         "fingerprint": self.model_fingerprint})
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        rows = self.csv_rows()
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        return buf.getvalue()


def _json_float(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, float):
        return _json_float(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    return v


def relative_residual(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    scale = max(float(np.max(np.abs(a))), float(np.max(np.abs(b))), 1e-300)
    return float(np.max(np.abs(a - b)) / scale)


# -- sum-over-states kernels -------------------------------------------------
def _elements_from_ground(eig: EigenSystem, op) -> np.ndarray:
    """<n|op|0> for n >= 1."""
    v = eig.vectors
    return v[:, 1:].conj().T @ (np.asarray(op) @ v[:, 0])


def curvature_from_elements(eig: EigenSystem, a_n0: np.ndarray, b_n0: np.ndarray) -> float:
    """-2 Im sum_n conj(a_n0) b_n0 / (E0 - En)^2 from excited-state columns of two operators."""
    den = (eig.energies[0] - eig.energies[1:]) ** 2
    return float(-2.0 * np.imag(np.sum(a_n0.conj() * b_n0 / den)))


def _axes(model) -> range:
    return range(getattr(model, "spatial_dims", 1))


def _dA_columns(model, eig, params):
    return [_elements_from_ground(eig, model.d_vector_potential(b, params)) for b in _axes(model)]


def _dE_columns(model, eig, params):
    """e <n|r_gamma|0>: OBC from the field derivative, PBC from velocity-route elements."""
    e = model.units.e_charge
    if model.boundary == OBC:
        return [_elements_from_ground(eig, model.d_efield(g, params)) for g in _axes(model)]
    cols = []
    for g in _axes(model):
        r = position_matrix_elements(model, eig, g, params, route="velocity", states=[0])
        cols.append(e * r.matrix[1:, 0])
    return cols


def _position_columns(model, eig, params):
    if model.boundary == OBC:
        return [_elements_from_ground(eig, model.position(g)) for g in _axes(model)]
    return [position_matrix_elements(model, eig, g, params, route="velocity", states=[0]).matrix[1:, 0]
            for g in _axes(model)]


def _volume(model):
    return model.cell_length if model.boundary == PBC else None


# -- polarizability ------------------------------------------------------------
def _alpha_curvature(model, params, eig):
    u = model.units
    a_cols = _dA_columns(model, eig, params)
    e_cols = _dE_columns(model, eig, params)
    n = len(a_cols)
    out = np.zeros((n, n))
    for b in range(n):
        for g in range(n):
            out[b, g] = u.hbar * u.c_light * curvature_from_elements(eig, a_cols[b], e_cols[g])
    return out


def _alpha_kubo(model, params, eig):
    e = model.units.e_charge
    cols = _position_columns(model, eig, params)
    den = eig.energies[1:] - eig.energies[0]
    n = len(cols)
    out = np.zeros((n, n))
    for b in range(n):
        for g in range(n):
            out[b, g] = 2.0 * e * e * float(np.real(np.sum(cols[b].conj() * cols[g] / den)))
    return out


def _intensive(model, tensor):
    """OBC: alpha itself. PBC: chi = alpha / L and epsilon_inf = 1 + 4 pi chi."""
    if model.boundary == OBC:
        return "alpha", tensor, {}
    chi = tensor / model.cell_length
    return "chi", chi, {"epsilon_inf": (np.eye(chi.shape[0]) + 4.0 * np.pi * chi).tolist()}


def polarizability_curvature(model, params=None) -> ResponseReport:
    """alpha_bg = hbar c Omega(A_b, E_g) (OBC); chi = alpha / L under PBC."""
    eig = ground_eigensystem(model, params)
    curv = _alpha_curvature(model, params, eig)
    kubo = _alpha_kubo(model, params, eig)
    name, t_c, extra = _intensive(model, curv)
    _, t_k, _ = _intensive(model, kubo)
    return ResponseReport(name, t_c, ROUTE_CURVATURE, relative_residual(t_c, t_k), model.fingerprint(params),
                          t_k, ROUTE_KUBO, _volume(model), {**extra, "min_gap": eig.gap01})


def polarizability_kubo(model, params=None) -> ResponseReport:
    """alpha_bg = 2 e^2 Re sum_n <0|r_b|n><n|r_g|0> / (En - E0)."""
    eig = ground_eigensystem(model, params)
    kubo = _alpha_kubo(model, params, eig)
    curv = _alpha_curvature(model, params, eig)
    name, t_k, extra = _intensive(model, kubo)
    _, t_c, _ = _intensive(model, curv)
    return ResponseReport(name, t_k, ROUTE_KUBO, relative_residual(t_k, t_c), model.fingerprint(params),
                          t_c, ROUTE_CURVATURE, _volume(model), {**extra, "min_gap": eig.gap01})


def _ground_energy(model, params):
    return float(ground_eigensystem(model, params).energies[0])


def richardson_second_derivative(f, x0: float, h: float) -> float:
    """f''(x0) from central second differences at h and h/2, Richardson-extrapolated (O(h^4))."""
    def d2(step):
        return (f(x0 + step) - 2.0 * f(x0) + f(x0 - step)) / step ** 2
    return (4.0 * d2(h / 2) - d2(h)) / 3.0


def richardson_mixed_derivative(f, x0: float, y0: float, h: float) -> float:
    def dxy(step):
        return (f(x0 + step, y0 + step) - f(x0 + step, y0 - step)
                - f(x0 - step, y0 + step) + f(x0 - step, y0 - step)) / (4.0 * step ** 2)
    return (4.0 * dxy(h / 2) - dxy(h)) / 3.0


def richardson_first_derivative(f, x0: float, h: float) -> float:
    def d1(step):
        return (f(x0 + step) - f(x0 - step)) / (2.0 * step)
    return (4.0 * d1(h / 2) - d1(h)) / 3.0


def polarizability_finite_field(model, params=None, h: float = 1e-2) -> ResponseReport:
    """alpha_bg = -d^2 E0 / dE_b dE_g by Richardson-extrapolated finite differences (OBC only)."""
    if model.boundary != OBC:
        raise ForbiddenOperator("finite-field polarizability needs an OBC model (E = 0 under PBC)")
    p = model.params(params)
    names = [model.efield_param(g) for g in _axes(model)]
    n = len(names)
    out = np.zeros((n, n))
    for b in range(n):
        for g in range(n):
            if b == g:
                nb = names[b]
                out[b, g] = -richardson_second_derivative(
                    lambda x: _ground_energy(model, {**p, nb: x}), p[nb], h)
            else:
                nb, ng = names[b], names[g]
                out[b, g] = -richardson_mixed_derivative(
                    lambda x, y: _ground_energy(model, {**p, nb: x, ng: y}), p[nb], p[ng], h)
    kubo = _alpha_kubo(model, params, ground_eigensystem(model, params))
    return ResponseReport("alpha", out, ROUTE_FD, relative_residual(out, kubo), model.fingerprint(params),
                          kubo, ROUTE_KUBO, None, {"step": h})


# -- Born charges ----------------------------------------------------------------
def _nuclear_charge(model, s):
    return float(model.frame.nuclei[s].charge)


def _born_curvature(model, params, eig, s, a_cols=None):
    u = model.units
    a_cols = a_cols if a_cols is not None else _dA_columns(model, eig, params)
    n = len(a_cols)
    z = np.eye(n) * _nuclear_charge(model, s)
    for b in range(n):
        r_col = _elements_from_ground(eig, model.d_hamiltonian(model.nucleus_param(s, b), params))
        for a in range(n):
            z[a, b] += (u.hbar * u.c_light / u.e_charge) * curvature_from_elements(eig, a_cols[a], r_col)
    return z


def _born_dipole_fd(model, params, s, h):
    """Z_s delta_ab - d<r_a>/dR_sb: (1/e) times the derivative of the total dipole."""
    p = model.params(params)
    n = len(list(_axes(model)))
    z = np.eye(n) * _nuclear_charge(model, s)
    for b in range(n):
        name = model.nucleus_param(s, b)
        for a in range(n):
            r_op = model.position(a)
            z[a, b] -= richardson_first_derivative(
                lambda x: expectation(r_op, ground_eigensystem(model, {**p, name: x}).ground), p[name], h)
    return z


def born_charges(model, params=None, s: int = 0, fd_step: float = 1e-3) -> ResponseReport:
    """Z*_{s,ab} = Z_s delta_ab + (hbar c / e) Omega(A_a, R_sb).

    Under OBC the dipole finite difference is reported as the alternate route.
    """
    eig = ground_eigensystem(model, params)
    z = _born_curvature(model, params, eig, s)
    alt = alt_route = resid = None
    if model.boundary == OBC:
        alt = _born_dipole_fd(model, params, s, fd_step)
        alt_route = ROUTE_FD
        resid = float(np.max(np.abs(z - alt)))
    return ResponseReport(f"Z_star_{s}", z, ROUTE_CURVATURE, resid, model.fingerprint(params), alt, alt_route,
                          _volume(model), {"nucleus": s, "Z": _nuclear_charge(model, s), "min_gap": eig.gap01})


@dataclass(frozen=True)
class AcousticSum:
    total: np.ndarray
    per_nucleus: tuple
    residual: float  # max |sum_s Z*_s|

    def as_dict(self) -> dict:
        return {"total": self.total.tolist(), "per_nucleus": [z.tolist() for z in self.per_nucleus],
                "residual": self.residual}


def acoustic_sum(model, params=None) -> AcousticSum:
    """sum_s Z*_s from the curvature route, sharing one eigensystem across nuclei."""
    eig = ground_eigensystem(model, params)
    a_cols = _dA_columns(model, eig, params)
    per = tuple(_born_curvature(model, params, eig, s, a_cols) for s in range(len(model.frame.nuclei)))
    total = np.sum(per, axis=0)
    return AcousticSum(total, per, float(np.max(np.abs(total))))


# -- effective density, Drude weight, DCS -------------------------------------------
def kohn_effective_density(model, params=None, h: float = 2e-2) -> float:
    """n* = (m / (hbar^2 L)) d^2 E0 / d kappa^2 (Richardson second difference over the twist)."""
    if model.boundary != PBC:
        raise ForbiddenOperator("the twist oracle needs a periodic model")
    u = model.units
    p = model.params(params)
    name, _ = model.vector_potential_param(0)
    d2 = richardson_second_derivative(lambda k: _ground_energy(model, {**p, name: k}), p[name], h)
    return u.mass / (u.hbar ** 2 * model.cell_length) * d2


def curvature_effective_density(model, params=None, eig=None) -> float:
    """n* = (1/L) [N + (hbar c / e) Omega(A, u)]."""
    if "u" not in model.param_names:
        raise InvalidParameter(f"{model.name} has no rigid-translation parameter 'u'")
    u = model.units
    eig = eig or ground_eigensystem(model, params)
    a_col = _dA_columns(model, eig, params)[0]
    u_col = _elements_from_ground(eig, model.d_hamiltonian("u", params))
    omega = curvature_from_elements(eig, a_col, u_col)
    return (model.n_electrons + u.hbar * u.c_light / u.e_charge * omega) / model.cell_length


def drude_weight(model, n_star: float) -> float:
    u = model.units
    return np.pi * u.e_charge ** 2 * n_star / u.mass


def effective_density_and_drude(model, params=None, h: float = 2e-2) -> tuple[ResponseReport, ResponseReport]:
    """(n*, D) reports. The curvature route needs the parameter 'u'; the Kohn route is always computed."""
    kohn = kohn_effective_density(model, params, h)
    extra = {"L": model.cell_length, "N": model.n_electrons}
    fp = model.fingerprint(params)
    if "u" in model.param_names:
        eig = ground_eigensystem(model, params)
        curv = curvature_effective_density(model, params, eig)
        extra["min_gap"] = eig.gap01
        res = relative_residual(curv, kohn)
        n_rep = ResponseReport("n_star", [[curv]], ROUTE_CURVATURE, res, fp, [[kohn]], ROUTE_FD,
                               model.cell_length, extra)
        d_rep = ResponseReport("drude_D", [[drude_weight(model, curv)]], ROUTE_CURVATURE, res, fp,
                               [[drude_weight(model, kohn)]], ROUTE_FD, model.cell_length, extra)
    else:
        n_rep = ResponseReport("n_star", [[kohn]], ROUTE_FD, None, fp, None, None, model.cell_length, extra)
        d_rep = ResponseReport("drude_D", [[drude_weight(model, kohn)]], ROUTE_FD, None, fp, None, None,
                               model.cell_length, extra)
    return n_rep, d_rep


@dataclass(frozen=True)
class DCSResult:
    lhs: float  # (1/L) sum_s Z*_s
    rhs: float  # (m / pi e^2) D, D from the twist second difference
    residual: float  # relative
    drude_kohn: float
    born_sum: float

    def as_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "residual": self.residual, "drude_kohn": self.drude_kohn,
                "born_sum": self.born_sum}


def dcs_sum_rule(model, params=None, h: float = 2e-2) -> DCSResult:
    """(1/L) sum_s Z*_s against (m / pi e^2) D, each side computed independently."""
    if model.boundary != PBC:
        raise ForbiddenOperator("the Dreyer-Coh-Stengel sum rule is a periodic-system statement")
    u = model.units
    total = acoustic_sum(model, params).total[0, 0]
    lhs = total / model.cell_length
    d = drude_weight(model, kohn_effective_density(model, params, h))
    rhs = u.mass / (np.pi * u.e_charge ** 2) * d
    return DCSResult(float(lhs), float(rhs), relative_residual(lhs, rhs), float(d), float(total))


# -- continuity ------------------------------------------------------------------
def sternheimer_derivative(eig: EigenSystem, d_lambda) -> np.ndarray:
    """Parallel-transport |d_lambda Psi0> from (E0 - H)|x> = (dH - <dH>)|Psi0>, x orthogonal to Psi0.

    Solved by least squares in the full space, independently of the spectral sum.
    """
    psi = eig.ground
    h = (eig.vectors * eig.energies) @ eig.vectors.conj().T
    rhs = np.asarray(d_lambda) @ psi
    rhs = rhs - np.vdot(psi, rhs) * psi
    proj = np.eye(eig.dim) - np.outer(psi, psi.conj())
    lhs = proj @ (eig.energies[0] * np.eye(eig.dim) - h) @ proj + np.outer(psi, psi.conj())
    x = np.linalg.lstsq(lhs, rhs, rcond=None)[0]
    return x - np.vdot(psi, x) * psi


@dataclass(frozen=True)
class AdiabaticCurrents:
    bond_currents: np.ndarray
    divergence: np.ndarray
    density_rate: np.ndarray  # d<rho_site>/dt from -2 lambda-dot Re<Psi0|rho|d Psi0>... sign: see doc
    continuity_residual: float

    def as_dict(self) -> dict:
        return {"bond_currents": self.bond_currents.tolist(), "divergence": self.divergence.tolist(),
                "density_rate": self.density_rate.tolist(), "continuity_residual": self.continuity_residual}


def adiabatic_current_density(model, params, lambda_name: str, lambda_dot: float) -> AdiabaticCurrents:
    """Bond currents j_b = 2 hbar lambda-dot Im sum_n <0|j_b|n><n|d_lambda H|0>/(E0 - En)^2.

    Also returns the site density rate 2 lambda-dot Re<Psi0|rho_site|d_lambda Psi0>
    (derivative state from the Sternheimer equation) and the residual of the
    continuity equation  d rho/dt + div j = 0  site by site.
    """
    from .adiabatic import geometric_response

    eig = ground_eigensystem(model, params)
    d_l = model.d_hamiltonian(lambda_name, params)
    hbar = model.units.hbar
    j = np.array([lambda_dot * geometric_response(eig, model.bond_current(b, params), d_l, hbar)
                  for b in range(model.n_bonds)])
    dpsi = sternheimer_derivative(eig, d_l)
    rate = np.array([2.0 * lambda_dot * float(np.real(np.vdot(eig.ground, model.density(s) @ dpsi)))
                     for s in range(model.n_sites)])
    div = np.array([model.divergence(j, s) for s in range(model.n_sites)])
    return AdiabaticCurrents(j, div, rate, float(np.max(np.abs(div + rate))) if j.size else 0.0)


def continuity_identity_check(model, params=None) -> float:
    """max over sites of || div j_site - (i/hbar)[rho_site, H] || (entrywise max)."""
    h = model.hamiltonian(params)
    hbar = model.units.hbar
    currents = [model.bond_current(b, params) for b in range(model.n_bonds)]
    worst = 0.0
    for s in range(model.n_sites):
        div = model.divergence(currents, s)
        rhs = (1j / hbar) * commutator(model.density(s), h)
        worst = max(worst, float(np.max(np.abs(div - rhs))))
    return worst


__all__ = [
    "ResponseReport", "polarizability_curvature", "polarizability_kubo", "polarizability_finite_field",
    "born_charges", "acoustic_sum", "AcousticSum", "effective_density_and_drude", "kohn_effective_density",
    "curvature_effective_density", "drude_weight", "dcs_sum_rule", "DCSResult", "adiabatic_current_density",
    "AdiabaticCurrents", "continuity_identity_check", "sternheimer_derivative", "relative_residual",
    "richardson_second_derivative", "richardson_first_derivative", "curvature_from_elements",
]
