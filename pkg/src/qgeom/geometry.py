"""Berry connection, phase and curvature with two independent routes.

Conventions. The Berry connection is A_lambda = i<Psi0|d_lambda Psi0>, the
discrete phase of a step is -Im ln<Psi0(p)|Psi0(p')>, and the curvature is
Omega(kappa, lambda) = d_kappa A_lambda - d_lambda A_kappa
= -2 Im <d_kappa Psi0|d_lambda Psi0>. A loop traversed counterclockwise in the
(kappa, lambda) plane has Berry phase equal to the enclosed curvature flux.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.integrate import simpson

from .errors import InvalidParameter, NumericalFailure, ZeroOverlap
from .qmcore import EigenSystem, eigendecompose

ZERO_OVERLAP_TOL = 1e-10
ANTISYMMETRY_TOL = 1e-12


def wrap_phase(x: float) -> float:
    """Map an angle to the principal interval (-pi, pi]."""
    y = float(np.angle(np.exp(1j * x)))
    return np.pi if y <= -np.pi else y


def ground_eigensystem(model, params: Mapping | None = None) -> EigenSystem:
    """Eigensystem of ``model`` at ``params``, rejecting degenerate ground states."""
    return eigendecompose(model.hamiltonian(params)).require_gap()


def _map(fn, items, jobs: int):
    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


# -- loops ---------------------------------------------------------------
@dataclass(frozen=True)
class ParameterLoop:
    """Closed path in parameter space: ``points[-1]`` is the same point as ``points[0]``."""

    points: tuple
    names: tuple = ()

    def __post_init__(self):
        pts = tuple(dict(p) for p in self.points)
        object.__setattr__(self, "points", pts)
        if len(pts) < 4:
            raise InvalidParameter("a loop needs at least 3 segments")
        if pts[0] != pts[-1]:
            raise InvalidParameter("loop is not closed: first and last points differ")
        for a, b in zip(pts[:-1], pts[1:]):
            if a == b:
                raise InvalidParameter("consecutive loop points must be distinct")
        if not self.names:
            object.__setattr__(self, "names", tuple(sorted(pts[0])))

    @property
    def n_segments(self) -> int:
        return len(self.points) - 1

    def reversed(self) -> "ParameterLoop":
        return ParameterLoop(tuple(reversed(self.points)), self.names)

    @classmethod
    def from_path(cls, points: Sequence[Mapping]) -> "ParameterLoop":
        """Close an open path by appending its first point."""
        pts = [dict(p) for p in points]
        return cls(tuple(pts + [dict(pts[0])]))


def circle_loop(param_name: str, n_segments: int, base: Mapping | None = None,
                start: float = 0.0, span: float = 2.0 * np.pi) -> ParameterLoop:
    """Loop sweeping one angular parameter over ``span`` in ``n_segments`` steps.

    The final angle ``start + span`` is identified with ``start`` (the model must
    be periodic in the parameter), so the path is closed exactly.
    """
    if n_segments < 3:
        raise InvalidParameter("n_segments must be >= 3")
    base = dict(base or {})
    pts = [{**base, param_name: start + span * j / n_segments} for j in range(n_segments)]
    return ParameterLoop.from_path(pts)


def azimuthal_loop(theta: float, n_segments: int, base: Mapping | None = None) -> ParameterLoop:
    """Two-level loop at fixed colatitude ``theta``, phi: 0 -> 2 pi."""
    return circle_loop("phi", n_segments, {**dict(base or {}), "theta": theta})


@dataclass(frozen=True)
class ParameterGrid:
    """Uniform rectangle in the (kappa, lambda) plane, other parameters fixed."""

    kappa_name: str
    lambda_name: str
    kappa_values: np.ndarray
    lambda_values: np.ndarray
    base: dict = field(default_factory=dict)

    @classmethod
    def uniform(cls, kappa_name, kappa_range, lambda_name, lambda_range, shape=(64, 64), base=None):
        nk, nl = shape
        if nk < 2 or nl < 2:
            raise InvalidParameter("grid needs at least 2 points per axis")
        return cls(kappa_name, lambda_name, np.linspace(*kappa_range, nk), np.linspace(*lambda_range, nl),
                   dict(base or {}))

    def point(self, i: int, j: int) -> dict:
        return {**self.base, self.kappa_name: float(self.kappa_values[i]),
                self.lambda_name: float(self.lambda_values[j])}

    def boundary_loop(self, per_side: int = 512) -> ParameterLoop:
        """Counterclockwise boundary of the rectangle (kappa right, lambda up).

        The loop is refined independently of the quadrature grid: the discrete
        loop phase converges as 1/per_side^2.
        """
        k, l = self.kappa_values, self.lambda_values
        nk = nl = per_side
        ks = np.linspace(k[0], k[-1], nk + 1)
        ls = np.linspace(l[0], l[-1], nl + 1)
        path = [(x, ls[0]) for x in ks[:-1]] + [(ks[-1], y) for y in ls[:-1]]
        path += [(x, ls[-1]) for x in ks[:0:-1]] + [(ks[0], y) for y in ls[:0:-1]]
        pts = [{**self.base, self.kappa_name: float(a), self.lambda_name: float(b)} for a, b in path]
        return ParameterLoop.from_path(pts)


# -- phases ----------------------------------------------------------------
def _step_phase(psi_a: np.ndarray, psi_b: np.ndarray) -> tuple[float, float]:
    ov = complex(np.vdot(psi_a, psi_b))
    mag = abs(ov)
    if mag < ZERO_OVERLAP_TOL:
        raise ZeroOverlap(f"|<psi|psi'>| = {mag:.3e}: step too large")
    return wrap_phase(-np.angle(ov)), mag


def connection_phase_step(model, p_from: Mapping, p_to: Mapping) -> float:
    """-Im ln<Psi0(p_from)|Psi0(p_to)> in (-pi, pi]."""
    a = ground_eigensystem(model, p_from).ground
    b = ground_eigensystem(model, p_to).ground
    return _step_phase(a, b)[0]


@dataclass(frozen=True)
class BerryPhaseResult:
    principal: float  # (-pi, pi]
    unwrapped: float  # sum of step phases, each in (-pi, pi]
    n_segments: int
    min_overlap: float
    min_gap: float

    @property
    def value(self) -> float:
        return self.principal

    def as_dict(self) -> dict:
        return {"principal": self.principal, "unwrapped": self.unwrapped, "n_segments": self.n_segments,
                "min_overlap": self.min_overlap, "min_gap": self.min_gap}


def loop_phase_from_states(states: Sequence[np.ndarray]) -> tuple[float, float, float]:
    """(principal, unwrapped, min overlap) for a closed chain psi_0 .. psi_{N-1}, psi_0."""
    n = len(states)
    prod = 1.0 + 0.0j
    total = 0.0
    min_ov = np.inf
    for j in range(n):
        a, b = states[j], states[(j + 1) % n]
        ph, mag = _step_phase(a, b)
        total += ph
        min_ov = min(min_ov, mag)
        prod *= complex(np.vdot(a, b)) / mag
    return wrap_phase(-np.angle(prod)), total, float(min_ov)


def berry_phase_loop(model, loop: ParameterLoop, jobs: int = 1) -> BerryPhaseResult:
    """Gauge-invariant discrete Berry phase gamma = -Im ln prod_j <Psi0(p_j)|Psi0(p_j+1)>."""
    eigs = _map(lambda p: ground_eigensystem(model, p), loop.points[:-1], jobs)
    principal, unwrapped, min_ov = loop_phase_from_states([e.ground for e in eigs])
    return BerryPhaseResult(principal, unwrapped, loop.n_segments, min_ov,
                            float(min(e.gap01 for e in eigs)))


# -- curvature -------------------------------------------------------------
@dataclass(frozen=True)
class CurvatureResult:
    value: float
    route: str  # "kubo" | "plaquette"
    min_gap: float
    sum_truncation: float
    kappa_name: str = ""
    lambda_name: str = ""

    def as_dict(self) -> dict:
        return {"value": self.value, "route": self.route, "min_gap": self.min_gap,
                "sum_truncation": self.sum_truncation, "kappa": self.kappa_name, "lambda": self.lambda_name}


def _kubo_terms(eig: EigenSystem, a_op, b_op) -> np.ndarray:
    v = eig.vectors
    a0 = v[:, 0].conj() @ np.asarray(a_op) @ v[:, 1:]
    b0 = v[:, 1:].conj().T @ (np.asarray(b_op) @ v[:, 0])
    den = (eig.energies[0] - eig.energies[1:]) ** 2
    return -2.0 * np.imag(a0 * b0 / den)


def kubo_sum(eig: EigenSystem, a_op, b_op) -> float:
    """-2 Im sum_{n>0} <0|A|n><n|B|0> / (E0 - En)^2 on a gapped eigensystem."""
    return float(np.sum(_kubo_terms(eig, a_op, b_op)))


def tail_fraction(terms: np.ndarray) -> float:
    """Share of sum |terms| carried by the highest tenth of the excited states.

    A truncated basis is trustworthy only when this is small: the sum over
    states must have converged before the spectrum is cut off.
    """
    tot = float(np.sum(np.abs(terms)))
    if tot == 0.0:
        return 0.0
    k = max(1, terms.size // 10)
    return float(np.sum(np.abs(terms[-k:])) / tot)


def curvature_from_derivatives(eig: EigenSystem, dk, dl) -> tuple[float, float]:
    """Kubo curvature from explicit derivative operators; returns (value, tail fraction)."""
    eig.require_gap()
    terms = _kubo_terms(eig, dk, dl)
    val = float(np.sum(terms))
    swapped = kubo_sum(eig, dl, dk)
    resid = abs(val + swapped)
    if resid > ANTISYMMETRY_TOL * max(1.0, abs(val)):
        raise NumericalFailure(f"curvature antisymmetry violated by {resid:.3e}")
    return val, tail_fraction(terms)


def curvature_kubo(model, params: Mapping | None, kappa_name: str, lambda_name: str) -> CurvatureResult:
    """Sum-over-states curvature Omega(kappa, lambda) of the ground state."""
    eig = ground_eigensystem(model, params)
    dk = model.d_hamiltonian(kappa_name, params)
    dl = model.d_hamiltonian(lambda_name, params)
    val, tail = curvature_from_derivatives(eig, dk, dl)
    return CurvatureResult(val, "kubo", eig.gap01, tail, kappa_name, lambda_name)


def curvature_plaquette(model, params: Mapping | None, kappa_name: str, lambda_name: str,
                        step_k: float = 1e-3, step_l: float = 1e-3) -> CurvatureResult:
    """Berry phase of a centred (step_k x step_l) plaquette, divided by its area."""
    if step_k <= 0 or step_l <= 0:
        raise InvalidParameter("plaquette steps must be positive")
    p = model.params(params)
    k0, l0 = p[kappa_name], p[lambda_name]
    corners = [(k0 - step_k / 2, l0 - step_l / 2), (k0 + step_k / 2, l0 - step_l / 2),
               (k0 + step_k / 2, l0 + step_l / 2), (k0 - step_k / 2, l0 + step_l / 2)]
    eigs = [ground_eigensystem(model, {**p, kappa_name: a, lambda_name: b}) for a, b in corners]
    principal, _, _ = loop_phase_from_states([e.ground for e in eigs])
    return CurvatureResult(principal / (step_k * step_l), "plaquette",
                           float(min(e.gap01 for e in eigs)), 0.0, kappa_name, lambda_name)


def convergence_order(model, params, kappa_name, lambda_name, step: float = 1e-2,
                      n_halvings: int = 3) -> tuple[float, list]:
    """Fitted order p of |plaquette - Kubo| ~ step^p over successive halvings."""
    ref = curvature_kubo(model, params, kappa_name, lambda_name).value
    steps = [step / 2 ** j for j in range(n_halvings + 1)]
    errs = [abs(curvature_plaquette(model, params, kappa_name, lambda_name, h, h).value - ref) for h in steps]
    if min(errs) == 0.0:
        raise NumericalFailure("plaquette error vanished; order undefined")
    slope = np.polyfit(np.log(steps), np.log(errs), 1)[0]
    return float(slope), list(zip(steps, errs))


# -- Stokes ----------------------------------------------------------------
@dataclass(frozen=True)
class StokesResult:
    surface_integral: float
    loop_phase: float  # principal value
    loop_phase_unwrapped: float
    mismatch: float  # principal value of surface - loop, mod 2 pi
    grid_shape: tuple
    curvature: np.ndarray | None = field(default=None, repr=False, compare=False)  # Kubo values on the grid

    def as_dict(self) -> dict:
        return {"surface_integral": self.surface_integral, "loop_phase": self.loop_phase,
                "loop_phase_unwrapped": self.loop_phase_unwrapped, "mismatch": self.mismatch,
                "grid_shape": list(self.grid_shape)}


def curvature_grid(model, grid: ParameterGrid, jobs: int = 1) -> np.ndarray:
    idx = [(i, j) for i in range(grid.kappa_values.size) for j in range(grid.lambda_values.size)]
    vals = _map(lambda ij: curvature_kubo(model, grid.point(*ij), grid.kappa_name, grid.lambda_name).value,
                idx, jobs)
    return np.array(vals).reshape(grid.kappa_values.size, grid.lambda_values.size)


def surface_integral(model, grid: ParameterGrid, jobs: int = 1) -> float:
    """Simpson-rule flux of the Kubo curvature through the grid rectangle."""
    return _flux(curvature_grid(model, grid, jobs), grid)


def _flux(omega: np.ndarray, grid: ParameterGrid) -> float:
    inner = simpson(omega, x=grid.lambda_values, axis=1)
    return float(simpson(inner, x=grid.kappa_values))


def stokes_check(model, loop: ParameterLoop | None, grid: ParameterGrid, jobs: int = 1,
                 loop_per_side: int = 512) -> StokesResult:
    """Compare the curvature flux through ``grid`` with the Berry phase of ``loop``.

    With ``loop=None`` the counterclockwise grid boundary is used, with
    ``loop_per_side`` segments per edge.
    """
    loop = loop or grid.boundary_loop(loop_per_side)
    omega = curvature_grid(model, grid, jobs)
    flux = _flux(omega, grid)
    bp = berry_phase_loop(model, loop, jobs)
    return StokesResult(flux, bp.principal, bp.unwrapped, abs(wrap_phase(flux - bp.principal)),
                        (grid.kappa_values.size, grid.lambda_values.size), omega)
