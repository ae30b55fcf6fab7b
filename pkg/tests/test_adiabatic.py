import csv
import io
import math

import numpy as np
import pytest

from qgeom import adiabatic as ad
from qgeom.errors import FitFailure, InvalidParameter, StepTooLarge
from qgeom.geometry import curvature_kubo, ground_eigensystem
from qgeom.models import build_rice_mele, build_two_level
from qgeom.qmcore import expectation


def test_plateau_ramp_shape():
    d = ad.smooth_ramp("x", -0.3, 0.5, 0.01, edge_width=5.0)
    assert d.lambda_of_t(0.0) == pytest.approx(-0.3, abs=1e-12)
    assert d.lambda_of_t(d.T) == pytest.approx(0.5, abs=1e-12)
    assert d.lambda_dot(d.t_star) == pytest.approx(0.01, rel=1e-12)
    # lambda-dot is the derivative of lambda(t)
    for t in (0.2 * d.T, d.t_star, 0.9 * d.T):
        h = 1e-4
        fd = (d.lambda_of_t(t + h) - d.lambda_of_t(t - h)) / (2 * h)
        assert fd == pytest.approx(d.lambda_dot(t), abs=1e-9)
    # flat plateau: the second derivative vanishes at t*
    h = 1e-2
    assert abs(d.lambda_dot(d.t_star + h) - d.lambda_dot(d.t_star - h)) < 1e-12
    assert abs(d.lambda_dot(0.0)) < 1e-10 * 0.01 * 1e2
    down = ad.smooth_ramp("x", 1.0, 0.0, 0.02, edge_width=5.0)
    assert down.lambda_dot(down.t_star) == pytest.approx(-0.02)


def test_ramp_rejects_bad_inputs():
    with pytest.raises(InvalidParameter):
        ad.smooth_ramp("x", 0, 1, 0.0)
    with pytest.raises(InvalidParameter):
        ad.smooth_ramp("x", 0, 0, 0.1)
    with pytest.raises(InvalidParameter):
        ad.smooth_ramp("x", 0, 0.1, 1.0, edge_width=10.0)  # cannot reach the rate within the span


def test_static_hamiltonian_constant_observables():
    m = build_two_level(1.0)
    drive = ad.static_drive("theta", 1.0, 20.0, {"phi": 0.3})
    psi = (np.array([1, 1j]) / np.sqrt(2)).astype(complex)  # not an eigenstate: precesses
    rec = ad.propagate(m, drive, ground_eigensystem(m, drive.params_at(0)).ground, 0.05,
                       {"sx": m.observable("sigma_x"), "sz": m.observable("sigma_z")})
    for v in rec.observables.values():
        assert np.max(np.abs(v - v[0])) < 1e-10
    assert rec.norm_drift < 1e-12
    rec2 = ad.propagate(m, drive, psi, 0.05, {"sz": m.observable("sigma_z")})
    assert rec2.norm_drift < 1e-12


def test_midpoint_propagator_second_order():
    m = build_two_level(1.0)
    drive = ad.smooth_ramp("theta", 0.3, 1.3, 0.05, {"phi": 0.2}, edge_width=4.0)
    psi0 = ground_eigensystem(m, drive.params_at(0)).ground
    obs = {"sy": m.observable("sigma_y")}

    def final(dt):
        return ad.propagate(m, drive, psi0, dt, obs).observables["sy"][-1]

    ref = final(0.0125)
    e1, e2 = abs(final(0.2) - ref), abs(final(0.1) - ref)
    assert e1 / e2 >= 4.0 * 0.9


def test_step_too_large():
    m = build_two_level(100.0)
    with pytest.raises(StepTooLarge):
        ad.propagate(m, ad.static_drive("theta", 1.0, 1.0), np.array([1, 0j]), 0.1)


def test_trajectory_csv(tmp_path):
    m = build_two_level(1.0)
    drive = ad.static_drive("theta", 1.0, 1.0)
    rec = ad.propagate(m, drive, np.array([1, 0j]), 0.1, {"sz": m.observable("sigma_z")}, store_states=True)
    text = rec.csv_text(amplitudes=True)
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["time", "lambda", "sz", "re_0", "im_0", "re_1", "im_1"]
    assert len(rows) == rec.times.size + 1
    rec.to_csv(tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text().startswith("time,lambda,sz\n")
    with pytest.raises(InvalidParameter):
        rec.value_at("sz", 0.05)


def test_hf_prediction_static_and_geometric_parts():
    m = build_rice_mele(6, 1.0, 0.1, 0.5, "pbc", twist=0.2)
    p = {"delta_dim": 0.1}
    eig = ground_eigensystem(m, p)
    static = expectation(m.d_hamiltonian("twist", p), eig.ground)
    assert ad.adiabatic_predict_hf(m, p, "twist", "delta_dim", 0.0) == pytest.approx(static, abs=1e-12)
    ldot = 0.01
    omega = curvature_kubo(m, p, "twist", "delta_dim").value
    hf = ad.adiabatic_predict_hf(m, p, "twist", "delta_dim", ldot)
    assert hf - static == pytest.approx(-m.units.hbar * ldot * omega, rel=1e-10)
    gen = ad.adiabatic_predict_generic(m, p, m.d_hamiltonian("twist", p), "delta_dim", ldot)
    assert gen == pytest.approx(hf, abs=1e-12)


def test_adiabatic_state_follows_slow_drive():
    m = build_two_level(1.0)
    drive = ad.smooth_ramp("theta", 0.3, 1.3, 0.01, {"phi": 0.2}, edge_width=4.0)
    psi0 = ground_eigensystem(m, drive.params_at(0)).ground
    rec = ad.propagate(m, drive, psi0, 0.05, {}, store_states=True)
    assert ad.fidelity(m, drive.params_at(drive.T), rec.states[-1]) > 1 - 1e-6


def test_rate_scaling_guards():
    m = build_two_level(1.0)
    make = lambda s: ad.smooth_ramp("theta", 0.3, 1.3, s, {"phi": 0.2}, edge_width=4.0)
    with pytest.raises(FitFailure):
        ad.rate_scaling_study(m, make, m.observable("sigma_x"), [0.01, 0.02, 0.04])
    with pytest.raises(FitFailure):
        ad.rate_scaling_study(m, make, m.observable("sigma_x"), [0.01, 0.02, 0.04, 0.05])


def test_two_level_real_observable_slope_two():
    m = build_two_level(1.0)
    # edge width 8 / gap 1: start-up transients ~exp(-16) are far below the lambda-dot^2 signal
    make = lambda s: ad.smooth_ramp("theta", 0.4, 1.4, s, {"phi": 0.0}, edge_width=8.0)
    r = ad.rate_scaling_study(m, make, m.observable("sigma_x"), [0.004, 0.008, 0.016, 0.04], dt=0.05)
    assert abs(r.slope - 2.0) < 0.2
    d = r.as_dict()
    assert set(d) >= {"rates", "errors", "slope", "relative_errors"}
    assert math.isfinite(d["slope"])
