"""Runner task catalog: thin adapters from scenario parameters to library operations.

Each task returns a ``TaskOutput`` with a JSON-ready result, tidy plot rows
``(series, index, x, y, value)`` and optional consistency checks evaluated
against the scenario tolerances.
"""
from __future__ import annotations

import numpy as np

from . import adiabatic as ad
from . import geometry as geo
from . import magnetics as mag
from . import response as resp
from .runner import REQUIRED, Check, TaskOutput, _number, task

AT = ("at", ({}, "model parameter overrides defining the evaluation point"))


def _params(**kw):
    return dict(kw, **{AT[0]: AT[1]})


def _at(args) -> dict:
    return {k: float(v) for k, v in (args.get("at") or {}).items()}


# -- nested-document validation ------------------------------------------------
_LOOP_KINDS = {
    "azimuthal": ({"kind", "theta", "n_segments"}, ("theta", "n_segments")),
    "circle": ({"kind", "param", "n_segments", "start", "span"}, ("param", "n_segments")),
    "rectangle": ({"kind", "kappa", "kappa_range", "lambda", "lambda_range", "per_side"},
                  ("kappa", "kappa_range", "lambda", "lambda_range")),
    "points": ({"kind", "points"}, ("points",)),
}
_DRIVE_KINDS = {
    "ramp": ({"kind", "param", "lambda0", "lambda1", "rate", "edge_width"}, ("param", "lambda0", "lambda1", "rate")),
    "static": ({"kind", "param", "value", "T"}, ("param", "value", "T")),
}
_FAMILY_KEYS = ({"param", "lambda0", "lambda1", "edge_width"}, ("param", "lambda0", "lambda1"))


def _kinded(doc, spec, kinds, path):
    if not isinstance(spec, dict) or spec.get("kind") not in kinds:
        raise doc.error(f"'kind' must be one of {sorted(kinds)}", f"{path}.kind", "kind")
    allowed, required = kinds[spec["kind"]]
    doc.keys(spec, allowed, required, path)


def _check_loop(doc, args, path):
    _kinded(doc, args["loop"], _LOOP_KINDS, f"{path}.loop")
    if "n_segments" in args["loop"]:
        _number(doc, args["loop"]["n_segments"], f"{path}.loop.n_segments", integer=True)


def _check_drive(doc, args, path):
    _kinded(doc, args["drive"], _DRIVE_KINDS, f"{path}.drive")


def _check_family(doc, args, path):
    doc.keys(args["drive"], *_FAMILY_KEYS, f"{path}.drive")
    rates = args["rates"]
    if not isinstance(rates, list) or not rates:
        raise doc.error("rates must be a non-empty list", f"{path}.rates", "rates")
    for r in rates:
        _number(doc, r, f"{path}.rates")


def _make_loop(spec, base) -> geo.ParameterLoop:
    kind = spec["kind"]
    if kind == "azimuthal":
        return geo.azimuthal_loop(float(spec["theta"]), int(spec["n_segments"]), base)
    if kind == "circle":
        return geo.circle_loop(spec["param"], int(spec["n_segments"]), base, float(spec.get("start", 0.0)),
                               float(spec.get("span", 2.0 * np.pi)))
    if kind == "rectangle":
        grid = geo.ParameterGrid.uniform(spec["kappa"], spec["kappa_range"], spec["lambda"], spec["lambda_range"],
                                         (2, 2), base)
        return grid.boundary_loop(int(spec.get("per_side", 512)))
    pts = [{**base, **{k: float(v) for k, v in p.items()}} for p in spec["points"]]
    return geo.ParameterLoop(tuple(pts)) if pts[0] == pts[-1] else geo.ParameterLoop.from_path(pts)


def _make_drive(spec, base, rate=None) -> ad.DriveSchedule:
    if spec.get("kind", "ramp") == "static":
        return ad.static_drive(spec["param"], float(spec["value"]), float(spec["T"]), base)
    return ad.smooth_ramp(spec["param"], float(spec["lambda0"]), float(spec["lambda1"]),
                          float(spec["rate"] if rate is None else rate), base,
                          float(spec.get("edge_width", ad.DEFAULT_EDGE_WIDTH)))


# -- geometry ------------------------------------------------------------------
@task("berry_phase_loop", "Discrete gauge-invariant Berry phase of the ground state around a closed loop.",
      _params(loop=(REQUIRED, "loop spec: {kind: azimuthal|circle|rectangle|points, ...}"),
              expected=(None, "optional reference phase; adds a check against tolerance 'berry_phase'")),
      nested=_check_loop)
def _berry_phase(model, a, ctx):
    r = geo.berry_phase_loop(model, _make_loop(a["loop"], _at(a)))
    checks = []
    if a["expected"] is not None:
        checks.append(Check("phase_error", abs(geo.wrap_phase(r.principal - float(a["expected"]))), "berry_phase"))
    return TaskOutput(r.as_dict(), [("phase", 0, r.n_segments, None, r.principal)], checks)


@task("connection_phase_step", "Berry-connection phase between two nearby parameter points.",
      {"p_from": (REQUIRED, "parameter overrides of the first point"),
       "p_to": (REQUIRED, "parameter overrides of the second point")})
def _connection_step(model, a, ctx):
    ph = geo.connection_phase_step(model, a["p_from"], a["p_to"])
    return TaskOutput({"phase": ph}, [("phase", 0, None, None, ph)])


def _curvature_result(r: geo.CurvatureResult) -> dict:
    return {"value": r.value, "route": r.route, "min_gap": r.min_gap, "sum_truncation": r.sum_truncation,
            "kappa": r.kappa_name, "lambda": r.lambda_name}


@task("curvature_kubo", "Berry curvature from the sum over states.",
      _params(kappa=(REQUIRED, "first parameter"), **{"lambda": (REQUIRED, "second parameter")}))
def _curv_kubo(model, a, ctx):
    r = geo.curvature_kubo(model, _at(a), a["kappa"], a["lambda"])
    return TaskOutput(_curvature_result(r), [("curvature", 0, None, None, r.value)])


@task("curvature_plaquette", "Berry curvature from the phase of a small centred plaquette.",
      _params(kappa=(REQUIRED, "first parameter"), step_k=(1e-3, "plaquette side along kappa"),
              step_l=(1e-3, "plaquette side along lambda"),
              convergence=(False, "also fit the error order against Kubo over step halvings"),
              **{"lambda": (REQUIRED, "second parameter")}))
def _curv_plaq(model, a, ctx):
    at = _at(a)
    r = geo.curvature_plaquette(model, at, a["kappa"], a["lambda"], float(a["step_k"]), float(a["step_l"]))
    res, rows, checks = _curvature_result(r), [("curvature", 0, None, None, r.value)], []
    if a["convergence"]:
        slope, pairs = geo.convergence_order(model, at, a["kappa"], a["lambda"])
        res["convergence_order"] = slope
        rows += [("plaquette_error", i, h, None, e) for i, (h, e) in enumerate(pairs)]
        checks.append(Check("order_minus_2", abs(slope - 2.0), "convergence_order_window"))
    return TaskOutput(res, rows, checks)


@task("curvature_route_comparison",
      "Kubo vs plaquette curvature at seeded random points, plus the plaquette convergence order.",
      _params(kappa=(REQUIRED, "first parameter"), box=(REQUIRED, "{param: [lo, hi]} sampled uniformly"),
              n_points=(20, "number of random points"), step=(1e-3, "plaquette side"),
              **{"lambda": (REQUIRED, "second parameter")}))
def _curv_compare(model, a, ctx):
    rng = ctx.rng()
    names = sorted(a["box"])
    pts, kubo, plaq = [], [], []
    for _ in range(int(a["n_points"])):
        p = {**_at(a), **{n: float(rng.uniform(*a["box"][n])) for n in names}}
        pts.append(p)
        kubo.append(geo.curvature_kubo(model, p, a["kappa"], a["lambda"]).value)
        plaq.append(geo.curvature_plaquette(model, p, a["kappa"], a["lambda"], a["step"], a["step"]).value)
    diffs = np.abs(np.array(kubo) - np.array(plaq))
    slope, pairs = geo.convergence_order(model, pts[0], a["kappa"], a["lambda"])
    rows = [("kubo", i, None, None, v) for i, v in enumerate(kubo)]
    rows += [("plaquette", i, None, None, v) for i, v in enumerate(plaq)]
    rows += [("plaquette_error", i, h, None, e) for i, (h, e) in enumerate(pairs)]
    res = {"points": pts, "kubo": kubo, "plaquette": plaq, "max_abs_difference": float(diffs.max()),
           "convergence_order": slope}
    return TaskOutput(res, rows, [Check("max_abs_difference", float(diffs.max()), "curvature_routes"),
                                  Check("order_minus_2", abs(slope - 2.0), "convergence_order_window")])


@task("stokes_check", "Surface integral of the curvature over a grid vs the boundary-loop Berry phase.",
      _params(kappa=(REQUIRED, "first parameter"), kappa_range=(REQUIRED, "[lo, hi]"),
              lambda_range=(REQUIRED, "[lo, hi]"), shape=([64, 64], "grid points per axis"),
              loop_per_side=(512, "boundary-loop segments per side"),
              expected_flux=(None, "optional reference flux (e.g. 2 pi n for a closed surface)"),
              **{"lambda": (REQUIRED, "second parameter")}))
def _stokes(model, a, ctx):
    grid = geo.ParameterGrid.uniform(a["kappa"], a["kappa_range"], a["lambda"], a["lambda_range"],
                                     tuple(a["shape"]), _at(a))
    r = geo.stokes_check(model, None, grid, loop_per_side=int(a["loop_per_side"]))
    rows = [("curvature", f"{i}:{j}", float(grid.kappa_values[i]), float(grid.lambda_values[j]),
             float(r.curvature[i, j])) for i in range(r.curvature.shape[0]) for j in range(r.curvature.shape[1])]
    checks = [Check("mismatch", r.mismatch, "stokes_mismatch")]
    if a["expected_flux"] is not None:
        checks.append(Check("flux_error", abs(r.surface_integral - float(a["expected_flux"])), "stokes_mismatch"))
    return TaskOutput(r.as_dict(), rows, checks)


# -- adiabatic -----------------------------------------------------------------
@task("propagate", "Exact midpoint-exponential TDSE from the ground state at lambda(0); writes a trajectory CSV.",
      _params(drive=(REQUIRED, "{kind: ramp, param, lambda0, lambda1, rate, edge_width} or "
                                "{kind: static, param, value, T}"),
              dt=(0.02, "time step (rounded down to tile [0, T] evenly)"),
              observables=(REQUIRED, "list of model observable names"),
              record_every=(1, "record every k-th step"), amplitudes=(False, "also dump state amplitudes")),
      nested=_check_drive)
def _propagate(model, a, ctx):
    at = _at(a)
    drive = _make_drive(a["drive"], at)
    names = list(a["observables"])
    obs = {n: (lambda p, n=n: model.observable(n, p)) for n in names}
    psi0 = geo.ground_eigensystem(model, drive.params_at(0.0)).ground
    rec = ad.propagate(model, drive, psi0, float(a["dt"]), obs, int(a["record_every"]),
                       store_states=bool(a["amplitudes"]))
    k_star = int(np.argmin(np.abs(rec.times - drive.t_star)))
    res = {"T": drive.T, "t_star": float(rec.times[k_star]), "n_records": int(rec.times.size),
           "norm_drift": rec.norm_drift,
           "at_t_star": {n: float(rec.observables[n][k_star]) for n in names},
           "final": {n: float(rec.observables[n][-1]) for n in names},
           "drive": drive.description}
    rows = [(n, k, float(t), None, float(rec.observables[n][k])) for n in names for k, t in enumerate(rec.times)]
    checks = []
    if drive.description.get("kind") == "static":
        drift = max(float(np.max(np.abs(rec.observables[n] - rec.observables[n][0]))) for n in names)
        res["max_static_drift"] = drift
        checks.append(Check("max_static_drift", drift, "static_drift"))
    return TaskOutput(res, rows, checks, {"_trajectory.csv": rec.csv_text(bool(a["amplitudes"]))})


@task("adiabatic_predict_hf", "Adiabatic Hellmann-Feynman force: <dH/dkappa> + hbar lambda-dot Omega(kappa, lambda).",
      _params(kappa=(REQUIRED, "force parameter"), lambda_dot=(REQUIRED, "drive rate"),
              **{"lambda": (REQUIRED, "driven parameter")}))
def _pred_hf(model, a, ctx):
    at = _at(a)
    v = ad.adiabatic_predict_hf(model, at, a["kappa"], a["lambda"], float(a["lambda_dot"]))
    s = ad.adiabatic_predict_hf(model, at, a["kappa"], a["lambda"], 0.0)
    return TaskOutput({"value": v, "static": s, "geometric": v - s}, [("value", 0, None, None, v)])


@task("adiabatic_predict_generic", "First-order adiabatic expectation of any observable.",
      _params(observable=(REQUIRED, "model observable name"), lambda_dot=(REQUIRED, "drive rate"),
              **{"lambda": (REQUIRED, "driven parameter")}))
def _pred_gen(model, a, ctx):
    at = _at(a)
    op = model.observable(a["observable"], model.params(at))
    v = ad.adiabatic_predict_generic(model, at, op, a["lambda"], float(a["lambda_dot"]))
    s = ad.adiabatic_predict_generic(model, at, op, a["lambda"], 0.0)
    return TaskOutput({"value": v, "static": s, "geometric": v - s}, [("value", 0, None, None, v)])


@task("rate_scaling_study",
      "TDSE vs adiabatic prediction at the plateau of a family of smooth ramps; log-log slope of the error.",
      _params(drive=(REQUIRED, "{param, lambda0, lambda1, edge_width}"), observable=(REQUIRED, "observable name"),
              rates=(REQUIRED, "peak rates (>= 4, spanning >= 1 decade)"), dt=(0.02, "time step"),
              max_fit_residual=(0.1, "maximum RMS log residual of the fit"),
              expected_slope=(None, "optional expected slope; adds slope and relative-error checks")),
      nested=_check_family)
def _rate_scaling(model, a, ctx):
    at = _at(a)
    spec = {**a["drive"], "kind": "ramp"}
    name = a["observable"]
    r = ad.rate_scaling_study(model, lambda s: _make_drive({**spec, "rate": s}, at),
                              lambda p: model.observable(name, p), a["rates"], float(a["dt"]),
                              float(a["max_fit_residual"]))
    rows = []
    for series, vals in (("error", r.errors), ("tdse", r.tdse), ("adiabatic", r.adiabatic), ("static", r.static),
                         ("relative_error", r.relative_errors)):
        rows += [(series, i, rate, None, v) for i, (rate, v) in enumerate(zip(r.rates, vals))]
    checks = []
    if a["expected_slope"] is not None:
        checks.append(Check("slope_deviation", abs(r.slope - float(a["expected_slope"])), "slope_window"))
        i_min = int(np.argmin(r.rates))
        checks.append(Check("relative_error_at_smallest_rate", r.relative_errors[i_min], "rate_relative_error"))
    return TaskOutput(r.as_dict(), rows, checks)


# -- response ------------------------------------------------------------------
def _report(rep: resp.ResponseReport, series: str):
    rows = [(series, f"{i}{j}", None, None, float(v)) for (i, j), v in np.ndenumerate(rep.components)]
    return rep.as_dict(), rows


@task("polarizability_curvature", "alpha (OBC) or chi (PBC) from the Berry curvature Omega(A, E).",
      _params())
def _pol_curv(model, a, ctx):
    rep = resp.polarizability_curvature(model, _at(a))
    res, rows = _report(rep, rep.tensor_name)
    return TaskOutput(res, rows, [Check("kubo_relative_residual", rep.residual_vs_alternate_route,
                                        "polarizability_routes")])


@task("polarizability_kubo", "alpha (OBC) or chi (PBC) from the Kubo sum over position elements.", _params())
def _pol_kubo(model, a, ctx):
    rep = resp.polarizability_kubo(model, _at(a))
    res, rows = _report(rep, rep.tensor_name)
    return TaskOutput(res, rows, [Check("curvature_relative_residual", rep.residual_vs_alternate_route,
                                        "polarizability_routes")])


@task("polarizability_finite_field", "alpha = -d2E0/dE2 by Richardson finite differences (OBC).",
      _params(h=(1e-2, "field step")))
def _pol_ff(model, a, ctx):
    rep = resp.polarizability_finite_field(model, _at(a), float(a["h"]))
    res, rows = _report(rep, "alpha")
    return TaskOutput(res, rows, [Check("kubo_relative_residual", rep.residual_vs_alternate_route,
                                        "finite_field")])


@task("born_charges", "Born effective charge tensor of one nucleus from Omega(A, R_s).",
      _params(nucleus=(0, "nucleus index"), fd_step=(1e-3, "dipole finite-difference step (OBC alternate route)")))
def _born(model, a, ctx):
    rep = resp.born_charges(model, _at(a), int(a["nucleus"]), float(a["fd_step"]))
    res, rows = _report(rep, rep.tensor_name)
    return TaskOutput(res, rows)


@task("acoustic_sum", "Sum of Born charges over all nuclei.",
      _params(expect_zero=(False, "check the sum against tolerance 'acoustic_sum' (neutral OBC systems)")))
def _acoustic(model, a, ctx):
    r = resp.acoustic_sum(model, _at(a))
    rows = [("acoustic_sum", f"{i}{j}", None, None, float(v)) for (i, j), v in np.ndenumerate(r.total)]
    checks = [Check("residual", r.residual, "acoustic_sum")] if a["expect_zero"] else []
    return TaskOutput(r.as_dict(), rows, checks)


@task("effective_density_and_drude", "n* and Drude weight D (curvature route when available, twist oracle always).",
      _params(h=(2e-2, "twist step of the second difference")))
def _n_star(model, a, ctx):
    n_rep, d_rep = resp.effective_density_and_drude(model, _at(a), float(a["h"]))
    res = {"n_star": n_rep.as_dict(), "drude": d_rep.as_dict()}
    rows = [("n_star", 0, None, None, float(n_rep.components[0, 0])),
            ("drude_D", 0, None, None, float(d_rep.components[0, 0]))]
    checks = []
    if n_rep.residual_vs_alternate_route is not None:
        checks.append(Check("route_residual", n_rep.residual_vs_alternate_route, "n_star_routes"))
    return TaskOutput(res, rows, checks)


@task("dcs_sum_rule", "(1/L) sum_s Z*_s against (m / pi e^2) D for a periodic system.",
      _params(h=(2e-2, "twist step of the second difference")))
def _dcs(model, a, ctx):
    r = resp.dcs_sum_rule(model, _at(a), float(a["h"]))
    return TaskOutput(r.as_dict(), [("lhs", 0, None, None, r.lhs), ("rhs", 0, None, None, r.rhs)],
                      [Check("residual", r.residual, "dcs_residual")])


@task("adiabatic_current_density", "Adiabatic bond currents, site density rates and the continuity residual.",
      _params(lambda_dot=(REQUIRED, "drive rate"), **{"lambda": (REQUIRED, "driven parameter")}))
def _currents(model, a, ctx):
    r = resp.adiabatic_current_density(model, _at(a), a["lambda"], float(a["lambda_dot"]))
    rows = [("bond_current", b, None, None, float(v)) for b, v in enumerate(r.bond_currents)]
    rows += [("density_rate", s, None, None, float(v)) for s, v in enumerate(r.density_rate)]
    return TaskOutput(r.as_dict(), rows, [Check("continuity_residual", r.continuity_residual,
                                                "adiabatic_continuity")])


@task("continuity_identity_check", "Operator identity div j = (i/hbar)[rho, H] on every site.", _params())
def _continuity(model, a, ctx):
    v = resp.continuity_identity_check(model, _at(a))
    return TaskOutput({"max_residual": v}, [("residual", 0, None, None, v)], [Check("max_residual", v, "continuity")])


# -- magnetics -----------------------------------------------------------------
@task("rotational_moment", "Magnetic moment per angular velocity of a rotating planar molecule.", _params())
def _rot(model, a, ctx):
    r = mag.rotational_moment(model, _at(a))
    return TaskOutput(r.as_dict(), [("m_z_per_thetadot", 0, None, None, r.m_z_per_thetadot)])


@task("magnetizability", "chi_dia + chi_para with the curvature route and the finite-field oracle.",
      _params(fd_step=(2e-2, "field step of the finite-field oracle")))
def _mag(model, a, ctx):
    r = mag.magnetizability(model, _at(a), float(a["fd_step"]))
    rows = [(k, 0, None, None, getattr(r, k)) for k in ("chi_dia", "chi_para", "chi_total", "chi_finite_field")]
    return TaskOutput(r.as_dict(), rows, [Check("para_route_residual", r.para_route_residual, "magnetic_routes"),
                                          Check("finite_field_residual", r.finite_field_residual, "finite_field")])


@task("relation_62_check", "Total magnetizability against -(e/2mc) times the induced rotational moment.", _params())
def _rel62(model, a, ctx):
    r = mag.relation_62_check(model, _at(a))
    return TaskOutput(r.as_dict(), [("residual", 0, None, None, r.residual)],
                      [Check("residual", r.residual, "relation_62")])


@task("gauge_origin_scan", "Rotational moment and magnetizability for displaced molecule positions.",
      _params(origins=([[0.0, 0.0], [0.3, 0.0], [0.0, 0.7]], "list of [x, y] displacements"),
              check_m_z=(True, "check the m_z spread (valid for a neutral frame without static dipole)")))
def _gauge(model, a, ctx):
    r = mag.gauge_origin_scan(model, _at(a), tuple(tuple(o) for o in a["origins"]))
    rows = []
    for i, (o, ro, mo) in enumerate(zip(r.origins, r.rotational, r.magnetizability)):
        rows += [("m_z_per_thetadot", i, o[0], o[1], ro.m_z_per_thetadot),
                 ("chi_total", i, o[0], o[1], mo.chi_total)]
    checks = [Check("chi_total_spread", r.chi_total_spread, "gauge_spread")]
    if a["check_m_z"]:
        checks.append(Check("m_z_spread", r.m_z_spread, "gauge_spread"))
    return TaskOutput(r.as_dict(), rows, checks)


@task("lz_state_identity", "<n|L_z|Psi0> against +i hbar <n|d_theta Psi0> (and the opposite sign, logged).",
      _params())
def _lz(model, a, ctx):
    r = mag.lz_state_identity(model, _at(a))
    return TaskOutput(r.as_dict(), [("residual_plus", 0, None, None, r.residual_plus)],
                      [Check("residual_plus", r.residual_plus / max(r.scale, 1.0), "lz_identity")])
