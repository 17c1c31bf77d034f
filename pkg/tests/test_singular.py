import math

import numpy as np
import pytest

from gelfandlab import DimensionConstants, NonlinearityFamily
from gelfandlab.shooting import integrate_radial
from gelfandlab.singular import (
    TrajectoryEscape,
    exact_singular_solution,
    reconstruct_V,
    singular_solution,
    solve_transformed,
    verify_fprime_asymptotic,
    verify_phi_asymptotic,
)


@pytest.fixture(scope="module")
def sol_exp10():
    return singular_solution(NonlinearityFamily("exp", 10))


@pytest.fixture(scope="module")
def sol_etp():
    # k = 2, gamma = 0.5
    fam = NonlinearityFamily("exp_times_pow", 10, {"nu": 0.5})
    return reconstruct_V(solve_transformed(fam, t0=60.0, t_min=3.0))


def test_x_branch_stationary_for_exp(sol_exp10):
    traj = sol_exp10.trajectory
    assert np.max(np.abs(traj.value)) < 1e-9
    assert np.max(np.abs(traj.phi)) == 0.0


def test_exp10_lambda_star_and_profile(sol_exp10):
    # V = log(16/r^2): substitution into the radial equation gives e^V = 16/r^2
    assert sol_exp10.lambda_star == pytest.approx(16.0, abs=1e-6)
    for r in (1e-10, 1e-4, 0.3, 2.0):
        assert sol_exp10.V_of(r) == pytest.approx(math.log(16.0 / r**2),
                                                  abs=2e-8)
    assert sol_exp10.V_of(sol_exp10.sqrt_lambda_star * (1 - 1e-13)) \
        == pytest.approx(0.0, abs=1e-8)
    # U*(r) = -2 log r at N = 10
    for rho in (0.01, 0.3, 0.9):
        assert sol_exp10.U_star(rho) == pytest.approx(-2.0 * math.log(rho),
                                                      abs=2e-8)


def test_z_branch_stationary_for_critical_power():
    d11 = DimensionConstants(11)
    fam = NonlinearityFamily("power", 11, {"p": d11.p_jl})
    traj = solve_transformed(fam, t0=40.0, t_min=3.0)
    assert np.max(np.abs(traj.value)) < 1e-10
    sol = reconstruct_V(traj)
    # closed form: first zero of F^{-1}(r^2/(2N-4q)) at r^2 = (2N-4q)/(p-1)
    want = d11.autonomous_mass / (d11.p_jl - 1.0)
    assert sol.lambda_star == pytest.approx(want, abs=1e-6)
    r = 0.01
    V_closed = (r * r * (d11.p_jl - 1.0) / d11.autonomous_mass) \
        ** (-1.0 / (d11.p_jl - 1.0)) - 1.0
    assert sol.V_of(r) == pytest.approx(V_closed, rel=1e-9)


def test_k2_trajectory_limit(sol_etp):
    # t^2 x(t) -> -gamma/16 = -0.03125
    traj = sol_etp.trajectory
    i = np.argmin(np.abs(traj.t - 40.0))
    assert traj.t[i] ** 2 * traj.value[i] == pytest.approx(-0.03125, abs=0.004)


def test_envelopes_hold_with_slack():
    cases = [
        ("exp_exp", 10, {}),
        ("exp_pow", 10, {"nu": 0.5}),
        ("exp_times_pow", 10, {"nu": 0.5}),
        ("jl_gamma", 10, {"gamma": -1.0}),
        ("power_jl_times_logpow", 11, {"nu": 1.0}),
    ]
    for name, N, params in cases:
        fam = NonlinearityFamily(name, N, params)
        traj = solve_transformed(fam, t0=40.0, t_min=3.0)
        assert traj.envelope_ratio() <= 1.2, fam.label()


def test_fprime_asymptotic_exact_zero(sol_exp10):
    tab = verify_fprime_asymptotic(sol_exp10)
    assert np.max(np.abs(tab.values)) < 1e-9
    assert tab.passed


@pytest.mark.parametrize("name,N,params,k,gamma", [
    ("exp_times_pow", 10, {"nu": 0.5}, 2.0, 0.5),
    ("exp_exp", 10, {}, 1.0, -1.0),
    ("jl_gamma", 10, {"gamma": 1.0}, 2.0, 1.0),
])
def test_phi_asymptotic_families(name, N, params, k, gamma):
    fam = NonlinearityFamily(name, N, params)
    sol = reconstruct_V(solve_transformed(fam, t0=60.0, t_min=3.0))
    tab = verify_phi_asymptotic(sol)
    assert tab.target == pytest.approx(gamma, rel=1e-12)
    assert abs(tab.extrapolated - gamma) <= 0.10 * abs(gamma) + 1e-3
    assert tab.passed


def test_fprime_asymptotic_power_log_n11():
    d11 = DimensionConstants(11)
    fam = NonlinearityFamily("power_jl_times_logpow", 11, {"nu": 1.0})
    sol = singular_solution(fam, t0=60.0)
    tab = verify_fprime_asymptotic(sol)
    want = -1.0 / (d11.p_jl - 1.0)
    assert abs(tab.extrapolated - want) <= 0.10 * abs(want)
    assert tab.passed


def test_radial_residual(sol_etp):
    # -V'' - (N-1)/r V' = f(V), checked by 4th-order stencils of the dense profile
    fam = sol_etp.family
    h_rel = 1e-4
    for r in np.geomspace(sol_etp.r_handoff * 1.1,
                          sol_etp.sqrt_lambda_star * 0.99, 12):
        h = h_rel * r
        V = [sol_etp.V_of(r + j * h) for j in (-2, -1, 0, 1, 2)]
        Vpp = (-V[0] + 16 * V[1] - 30 * V[2] + 16 * V[3] - V[4]) / (12 * h * h)
        Vp = (V[0] - 8 * V[1] + 8 * V[3] - V[4]) / (12 * h)
        f_val = fam.f(V[2])
        resid = -Vpp - 9.0 / r * Vp - f_val
        assert abs(resid) <= 1e-6 * max(f_val, 1.0), r


def test_inner_residual_through_branch(sol_etp):
    # same identity on the transformed side of the handoff
    fam = sol_etp.family
    for r in np.geomspace(2e-2, sol_etp.r_handoff * 0.9, 6):
        h = 1e-4 * r
        V = [sol_etp.V_of(r + j * h) for j in (-2, -1, 0, 1, 2)]
        Vpp = (-V[0] + 16 * V[1] - 30 * V[2] + 16 * V[3] - V[4]) / (12 * h * h)
        Vp = (V[0] - 8 * V[1] + 8 * V[3] - V[4]) / (12 * h)
        f_val = fam.f(V[2])
        resid = -Vpp - 9.0 / r * Vp - f_val
        assert abs(resid) <= 1e-5 * max(f_val, 1.0), r


def test_backward_integration_contracts():
    # +-10% perturbation of the starting data leaves V essentially unchanged
    fam = NonlinearityFamily("exp_times_pow", 10, {"nu": 0.5})
    base = reconstruct_V(solve_transformed(fam, t0=40.0, t_min=3.0))
    rs = np.geomspace(math.exp(-10.0), 1.0, 40)
    for scale in (0.9, 1.1):
        pert = reconstruct_V(solve_transformed(fam, t0=40.0, t_min=3.0,
                                               initial_scale=scale))
        rel = [abs(pert.V_of(r) - base.V_of(r)) / max(abs(base.V_of(r)), 1.0)
               for r in rs]
        assert max(rel) <= 1e-4, scale


def test_lambda_convergence_from_curve(sol_exp10):
    # |lambda(alpha) - lambda*| decreases along an alpha ladder
    fam = sol_exp10.family
    lam_star = sol_exp10.lambda_star
    gaps = [abs(integrate_radial(fam, a).lam - lam_star) for a in (3.0, 6.0, 12.0)]
    assert gaps[0] > gaps[1] > gaps[2]


def test_branch_vs_shooting_profiles(sol_exp10):
    rs = np.geomspace(0.01, 1.0, 30)
    V = np.array([sol_exp10.V_of(r) for r in rs])
    errs = []
    for alpha in (8.0, 11.0, 14.0):
        p = integrate_radial(sol_exp10.family, alpha)
        v, _ = p.v_at(rs)
        errs.append(np.max(np.abs(v - V)))
    assert errs[0] > errs[1] > errs[2]


def test_escape_on_wrong_constants():
    # backward integration contracts to the true bounded trajectory, so claiming
    # a faster decay exponent k than the family's true one violates the envelope
    fam = NonlinearityFamily("exp_exp", 10)   # true (k, gamma) = (1, -1)
    with pytest.raises(TrajectoryEscape):
        solve_transformed(fam, t0=40.0, t_min=3.0, k=2.0, gamma=0.5)


def test_exact_singular_helper():
    sol = exact_singular_solution(NonlinearityFamily("exp", 9))
    assert sol.lambda_star == 14.0
    assert sol.V_of(0.1) == pytest.approx(math.log(1400.0), rel=1e-12)
    with pytest.raises(ValueError):
        exact_singular_solution(NonlinearityFamily("exp_exp", 10))


def test_tmin_rises_for_shifted_families():
    # strongly shifted families move the first zero of V inward; the handoff
    # must stay inside the singular region
    fam = NonlinearityFamily("exp", 10, shift=20.0)
    sol = singular_solution(fam)
    assert sol.r_handoff < sol.sqrt_lambda_star
    assert sol.lambda_star < 1e-6
    # lambda* for e^{u+c} equals 16 e^{-c} exactly (the constant absorbs into it)
    assert sol.lambda_star == pytest.approx(16.0 * math.exp(-20.0), rel=1e-6)
