"""Exact time evolution of driven models and the adiabatic predictions it is compared with.

A drive changes one parameter lambda(t) of a model; the state is propagated
with the exactly unitary midpoint exponential
psi -> exp(-i H(t + dt/2) dt / hbar) psi. Adiabatic predictions are the
first-order (in lambda-dot) ground-state formulas: the adiabatic
Hellmann-Feynman theorem for O = dH/dkappa and its sum-over-states
generalization to any observable.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.linalg
from scipy.optimize import brentq
from scipy.special import erf

from .errors import FitFailure, InvalidParameter, NotNormalized, StepTooLarge
from .geometry import ground_eigensystem
from .qmcore import EigenSystem, expectation

STEP_LIMIT = 0.1  # dt * ||H - tr(H)/dim|| / hbar must stay below this
NORM_TOL = 1e-10


# -- schedules -------------------------------------------------------------
EDGE_MARGIN = 5.0  # edges start/end 5 widths from the ends; the rate there is ~e^-25 of its peak
DEFAULT_EDGE_WIDTH = 10.0


def _erf_antiderivative(x):
    """F with F' = erf: x erf(x) + exp(-x^2)/sqrt(pi)."""
    return x * erf(x) + np.exp(-x * x) / np.sqrt(np.pi)


@dataclass(frozen=True)
class DriveSchedule:
    """lambda(t) on [0, T] for parameter ``param_name``; other parameters come from ``base``.

    ``rate_scale`` is the peak |lambda-dot|; ``t_star`` is the comparison time
    (the peak of |lambda-dot|, where lambda-double-dot vanishes).
    """

    param_name: str
    lambda_of_t: Callable[[float], float]
    lambda_dot: Callable[[float], float]
    T: float
    rate_scale: float
    t_star: float
    base: dict = field(default_factory=dict)
    description: dict = field(default_factory=dict)

    def params_at(self, t: float) -> dict:
        return {**self.base, self.param_name: float(self.lambda_of_t(t))}


def smooth_ramp(param_name: str, lam0: float, lam1: float, rate_scale: float,
                base: Mapping | None = None, edge_width: float = DEFAULT_EDGE_WIDTH) -> DriveSchedule:
    """Plateau ramp lam0 -> lam1 with peak rate ``rate_scale``.

    lambda-dot(t) is proportional to (erf((t - t1)/w) - erf((t - t2)/w))/2: it
    switches on and off smoothly over a few widths ``w`` and is flat in
    between. Every derivative of lambda-dot vanishes at t* = T/2 (to
    exponential accuracy), so the TDSE-vs-adiabatic difference at t* is the
    lambda-dot-power remainder of the adiabatic expansion. The edge spectrum
    decays like exp(-(w * gap / hbar)^2 / 4): choose w several times
    hbar/gap so start-up transients are negligible.
    """
    if rate_scale <= 0:
        raise InvalidParameter("rate_scale must be positive (use a static run for rate 0)")
    if lam1 == lam0:
        raise InvalidParameter("ramp endpoints must differ")
    if edge_width <= 0:
        raise InvalidParameter("edge_width must be positive")
    span = lam1 - lam0
    w = float(edge_width)
    t1 = EDGE_MARGIN * w

    def shape(plateau):
        t2 = t1 + plateau
        T = t2 + t1
        tc = 0.5 * T
        g = lambda t: 0.5 * (erf((t - t1) / w) - erf((t - t2) / w))
        G = lambda t: 0.5 * w * (_erf_antiderivative((t - t1) / w) - _erf_antiderivative(-t1 / w)
                                 - _erf_antiderivative((t - t2) / w) + _erf_antiderivative(-t2 / w))
        return T, tc, g, G

    def excess(plateau):
        T, tc, g, G = shape(plateau)
        return rate_scale * G(T) / g(tc) - abs(span)

    lo = 1e-6 * w
    if excess(lo) >= 0:
        raise InvalidParameter(
            f"rate_scale {rate_scale:g} too large for span {abs(span):g} with edge_width {w:g}; "
            "reduce the edge width or the rate")
    hi = abs(span) / rate_scale + 2.0 * w
    plateau = brentq(excess, lo, hi, xtol=1e-13 * hi, rtol=1e-15)
    T, tc, g, G = shape(plateau)
    scale = np.sign(span) * rate_scale / g(tc)
    total = G(T)
    return DriveSchedule(
        param_name,
        lambda t: lam0 + span * G(min(max(t, 0.0), T)) / total,
        lambda t: scale * g(t),
        T, float(rate_scale), tc, dict(base or {}),
        {"kind": "erf_plateau", "lambda0": lam0, "lambda1": lam1, "edge_width": w, "plateau": plateau},
    )


def static_drive(param_name: str, value: float, T: float, base: Mapping | None = None) -> DriveSchedule:
    return DriveSchedule(param_name, lambda t: value, lambda t: 0.0, float(T), 0.0, 0.5 * T,
                         dict(base or {}), {"kind": "static", "value": value})


# -- propagation -------------------------------------------------------------
@dataclass(frozen=True)
class TrajectoryRecord:
    times: np.ndarray
    lambdas: np.ndarray
    observables: dict
    norm_drift: float
    states: np.ndarray | None = None  # rows are states at ``times`` when recorded

    def value_at(self, name: str, t: float) -> float:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise InvalidParameter(f"time {t} is not on the recorded grid")
        return float(self.observables[name][k])

    def csv_text(self, amplitudes: bool = False) -> str:
        """CSV with columns time, lambda, observables (sorted) and optionally re_i, im_i amplitudes."""
        names = sorted(self.observables)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        head = ["time", "lambda"] + names
        if amplitudes and self.states is not None:
            for i in range(self.states.shape[1]):
                head += [f"re_{i}", f"im_{i}"]
        w.writerow(head)
        for k, t in enumerate(self.times):
            row = [repr(float(t)), repr(float(self.lambdas[k]))]
            row += [repr(float(self.observables[n][k])) for n in names]
            if amplitudes and self.states is not None:
                for a in self.states[k]:
                    row += [repr(float(a.real)), repr(float(a.imag))]
            w.writerow(row)
        return buf.getvalue()

    def to_csv(self, path, amplitudes: bool = False) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.csv_text(amplitudes))


def _resolve(op, params):
    return op(params) if callable(op) else op


def propagate(model, drive: DriveSchedule, psi0, dt: float, observables: Mapping | None = None,
              record_every: int = 1, store_states: bool = False) -> TrajectoryRecord:
    """Integrate i hbar d psi/dt = H(lambda(t)) psi on [0, T].

    ``dt`` is adjusted down so that an even number of steps tiles [0, T]
    (t* = T/2 then lies on the grid). ``observables`` maps names to matrices
    or to callables ``params -> matrix``.
    """
    psi = np.asarray(psi0, dtype=complex).copy()
    if abs(np.linalg.norm(psi) - 1.0) > NORM_TOL:
        raise NotNormalized("initial state is not normalized")
    if dt <= 0 or drive.T <= 0:
        raise InvalidParameter("dt and T must be positive")
    n_steps = max(2, int(np.ceil(drive.T / dt)))
    n_steps += n_steps % 2
    dt = drive.T / n_steps
    hbar = model.units.hbar
    obs = dict(observables or {})

    times, lams, vals, states = [], [], {k: [] for k in obs}, []

    def record(t, psi):
        p = drive.params_at(t)
        times.append(t)
        lams.append(p[drive.param_name])
        for k, op in obs.items():
            vals[k].append(expectation(_resolve(op, p), psi, norm_tol=1e-8))
        if store_states:
            states.append(psi.copy())

    record(0.0, psi)
    max_drift = 0.0
    for k in range(n_steps):
        h = model.hamiltonian(drive.params_at((k + 0.5) * dt))
        energies, vecs = scipy.linalg.eigh(h, driver="evr")
        spread = float(np.max(np.abs(energies - energies.mean())))
        if dt * spread / hbar >= STEP_LIMIT:
            raise StepTooLarge(f"dt*||H||/hbar = {dt * spread / hbar:.3g} >= {STEP_LIMIT}")
        psi = vecs @ (np.exp(-1j * energies * dt / hbar) * (vecs.conj().T @ psi))
        max_drift = max(max_drift, abs(np.linalg.norm(psi) - 1.0))
        if (k + 1) % record_every == 0 or k + 1 == n_steps:
            record((k + 1) * dt, psi)
    return TrajectoryRecord(np.array(times), np.array(lams), {k: np.array(v) for k, v in vals.items()},
                            float(max_drift), np.array(states) if store_states else None)


def fidelity(model, params, psi) -> float:
    """|<Psi0(params)|psi>|^2."""
    g = ground_eigensystem(model, params).ground
    return float(abs(np.vdot(g, psi)) ** 2)


# -- adiabatic predictions ------------------------------------------------------
def geometric_response(eig: EigenSystem, op, d_lambda, hbar: float) -> float:
    """2 hbar Im sum_{n>0} <0|O|n><n|dH|0> / (E0 - En)^2: the response per unit lambda-dot."""
    v = eig.vectors
    o0 = v[:, 0].conj() @ np.asarray(op) @ v[:, 1:]
    d0 = v[:, 1:].conj().T @ (np.asarray(d_lambda) @ v[:, 0])
    den = (eig.energies[0] - eig.energies[1:]) ** 2
    return float(2.0 * hbar * np.imag(np.sum(o0 * d0 / den)))


def adiabatic_predict_generic(model, params, O, lambda_name: str, lambda_dot: float) -> float:
    """<Psi0|O|Psi0> + 2 hbar lambda-dot Im sum_n <0|O|n><n|d_lambda H|0>/(E0 - En)^2."""
    eig = ground_eigensystem(model, params)
    op = _resolve(O, model.params(params))
    static = expectation(op, eig.ground)
    if lambda_dot == 0.0:
        return static
    dl = model.d_hamiltonian(lambda_name, params)
    return static + lambda_dot * geometric_response(eig, op, dl, model.units.hbar)


def adiabatic_predict_hf(model, params, kappa_name: str, lambda_name: str, lambda_dot: float) -> float:
    """Adiabatic Hellmann-Feynman theorem: <d_kappa H> - hbar Omega(kappa, lambda) lambda-dot."""
    from .geometry import curvature_from_derivatives

    eig = ground_eigensystem(model, params)
    dk = model.d_hamiltonian(kappa_name, params)
    static = expectation(dk, eig.ground)
    if lambda_dot == 0.0:
        return static
    omega, _ = curvature_from_derivatives(eig, dk, model.d_hamiltonian(lambda_name, params))
    return static - model.units.hbar * omega * lambda_dot


# -- rate scaling -------------------------------------------------------------
@dataclass(frozen=True)
class RateScalingResult:
    rates: tuple
    tdse: tuple
    adiabatic: tuple
    static: tuple
    errors: tuple
    slope: float
    intercept: float
    fit_residual: float

    @property
    def relative_errors(self) -> tuple:
        """|TDSE - adiabatic| relative to the lambda-dot-linear (geometric) part."""
        return tuple(abs(e) / abs(a - s) if a != s else np.inf
                     for e, a, s in zip(self.errors, self.adiabatic, self.static))

    def as_dict(self) -> dict:
        return {"rates": list(self.rates), "tdse": list(self.tdse), "adiabatic": list(self.adiabatic),
                "static": list(self.static), "errors": list(self.errors),
                "relative_errors": list(self.relative_errors), "slope": self.slope,
                "intercept": self.intercept, "fit_residual": self.fit_residual}


def rate_scaling_study(model, make_drive: Callable[[float], DriveSchedule], O, rates: Sequence[float],
                       dt: float = 0.02, max_fit_residual: float = 0.1, psi0=None) -> RateScalingResult:
    """Fit log|O_TDSE(t*) - O_adiabatic(t*)| against log(rate).

    Each drive starts in the ground state at lambda(0). The fit needs at
    least four rates spanning a decade; a root-mean-square log residual above
    ``max_fit_residual`` raises ``FitFailure``.
    """
    rates = [float(r) for r in rates]
    if len(rates) < 4 or max(rates) / min(rates) < 10.0 * (1 - 1e-12):
        raise FitFailure("rate scaling needs >= 4 rates spanning >= 1 decade")
    tdse, pred, static, errs = [], [], [], []
    for s in rates:
        drive = make_drive(s)
        p0 = drive.params_at(0.0)
        start = ground_eigensystem(model, p0).ground if psi0 is None else psi0
        rec = propagate(model, drive, start, dt, {"O": O})
        o_t = rec.value_at("O", drive.t_star)
        p_star = drive.params_at(drive.t_star)
        ldot = drive.lambda_dot(drive.t_star)
        o_a = adiabatic_predict_generic(model, p_star, O, drive.param_name, ldot)
        o_s = adiabatic_predict_generic(model, p_star, O, drive.param_name, 0.0)
        tdse.append(o_t)
        pred.append(o_a)
        static.append(o_s)
        errs.append(abs(o_t - o_a))
    x, y = np.log(rates), np.log(np.maximum(errs, 1e-300))
    if not np.all(np.isfinite(y)) or min(errs) == 0.0:
        raise FitFailure("zero error at a nonzero rate: nothing to fit")
    coef = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((np.polyval(coef, x) - y) ** 2)))
    if resid > max_fit_residual:
        raise FitFailure(f"log-log fit residual {resid:.3g} exceeds {max_fit_residual}")
    return RateScalingResult(tuple(rates), tuple(tdse), tuple(pred), tuple(static), tuple(errs),
                             float(coef[0]), float(coef[1]), resid)
