"""Acceptance suite: every criterion at its stated tolerance, one line per
criterion.  Run with `pytest tests/test_acceptance.py -v -s`."""

import json
import math
import time

import numpy as np
import pytest

from gelfandlab import DimensionConstants, NonlinearityFamily
from gelfandlab.bifurcation import trace_curve, translation_experiment
from gelfandlab.cli import EXIT_OK, main
from gelfandlab.families import catalogue_gamma_table
from gelfandlab.singular import (
    reconstruct_V,
    singular_solution,
    solve_transformed,
    verify_fprime_asymptotic,
)
from gelfandlab.stability import (
    annulus_instability_probe,
    ball_volume,
    critical_test_value,
    deficit_random_suite,
    first_unstable_annulus,
    potential_theorem_form,
    sturm_negative_count,
)

D11 = DimensionConstants(11)


def _report(num, label, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {num:>2}: {status}  {label}  {detail}")
    assert ok, f"criterion {num} ({label}): {detail}"


def test_criterion_01_gamma_table():
    worst = 0.0
    slowest = 0.0
    for fam, k, gamma in catalogue_gamma_table():
        tic = time.monotonic()
        est = fam.estimate_gamma(k)
        dt = time.monotonic() - tic
        tol = 0.1 if k >= 2.0 else 0.05
        err = abs(est.extrapolated - gamma)
        worst = max(worst, err / tol)
        slowest = max(slowest, dt)
        assert err <= tol, (fam.label(), est.extrapolated, gamma)
        assert dt <= 10.0, (fam.label(), dt)
    _report(1, "gamma table (8 families, both branches)", True,
            f"worst |dGamma|/tol={worst:.3f}, slowest={slowest:.2f}s")


def test_criterion_02_q_reproduction():
    details = []
    for p in (3.0, 7.0, D11.p_jl):
        q, _, _ = NonlinearityFamily("power", 11, {"p": p}).estimate_q()
        ok = abs(q - p / (p - 1.0)) <= 1e-3
        details.append(f"p={p:.4g}:{q:.6f}")
        assert ok, (p, q)
    exp = NonlinearityFamily("exp", 10)
    assert all(exp.q_ratio(u) == 1.0 for u in (0.0, 1.0, 50.0, 500.0))
    q_ee, _, _ = NonlinearityFamily("exp_exp", 10).estimate_q()
    assert abs(q_ee - 1.0) <= 1e-2
    _report(2, "q reproduction", True,
            "; ".join(details) + f"; exp exact; exp_exp:{q_ee:.4f}")


def test_criterion_03_closed_form_singular_benchmarks():
    sol10 = singular_solution(NonlinearityFamily("exp", 10))
    err10 = abs(sol10.lambda_star - 16.0)
    fam11 = NonlinearityFamily("power", 11, {"p": D11.p_jl})
    sol11 = singular_solution(fam11)
    closed = D11.autonomous_mass / (D11.p_jl - 1.0)
    err11 = abs(sol11.lambda_star - closed)
    _report(3, "closed-form lambda* benchmarks", err10 <= 1e-6 and err11 <= 1e-6,
            f"exp N=10 err={err10:.2e}; critical power N=11 err={err11:.2e}")


def test_criterion_04_curve_shape_dichotomy():
    tic = time.monotonic()
    exp9 = NonlinearityFamily("exp", 9)
    c9 = trace_curve(exp9, np.geomspace(0.1, 40.0, 60),
                     lambda_star_ref=14.0, lambda_star_source="exact")
    dt9 = time.monotonic() - tic
    crossings = len(c9.crossings)
    assert crossings >= 3, c9.crossings
    assert dt9 <= 120.0

    tic = time.monotonic()
    exp10 = NonlinearityFamily("exp", 10)
    c10 = trace_curve(exp10, np.geomspace(0.1, 300.0, 48),
                      lambda_star_ref=16.0, lambda_star_source="exact")
    dt10 = time.monotonic() - tic
    a, l = c10.valid()
    sup_gap = abs(l.max() - 16.0)
    increasing = bool(np.all(np.diff(l) > -c10.hysteresis))
    assert len(c10.turning_brackets) == 0
    assert increasing
    assert sup_gap <= 1e-2
    assert dt10 <= 120.0
    _report(4, "curve-shape dichotomy", True,
            f"N=9: {crossings} crossings of 14 in {dt9:.0f}s; "
            f"N=10: 0 folds, sup gap {sup_gap:.2e} in {dt10:.0f}s")


def test_criterion_05_refined_asymptotic():
    results = []
    fam_a = NonlinearityFamily("exp_times_pow", 10, {"nu": 0.5})
    sol_a = reconstruct_V(solve_transformed(fam_a, t0=60.0, t_min=3.0))
    tab_a = verify_fprime_asymptotic(sol_a, window=(20.0, 40.0))
    results.append((fam_a.label(), tab_a))
    fam_b = NonlinearityFamily("power_jl_times_logpow", 11, {"nu": 1.0})
    sol_b = reconstruct_V(solve_transformed(fam_b, t0=60.0, t_min=3.0))
    tab_b = verify_fprime_asymptotic(sol_b, window=(20.0, 40.0))
    results.append((fam_b.label(), tab_b))
    for label, tab in results:
        assert abs(tab.extrapolated - tab.target) <= 0.10 * abs(tab.target), label
    _report(5, "refined f'(U*) asymptotic", True,
            "; ".join(f"{lbl}: {t.extrapolated:+.4f} vs {t.target:+.4f}"
                      for lbl, t in results))


def test_criterion_06_trajectory_envelopes():
    cases = [  # spanning k in {1, 2}
        ("exp_exp", {}, 1.0, -1.0),
        ("exp_pow", {"nu": 0.5}, 1.0, 1.0),
        ("exp_times_pow", {"nu": 0.5}, 2.0, 0.5),
        ("jl_gamma", {"gamma": -1.0}, 2.0, -1.0),
    ]
    details = []
    for name, params, k, gamma in cases:
        fam = NonlinearityFamily(name, 10, params)
        traj = solve_transformed(fam, t0=60.0, t_min=3.0)
        ratio = traj.envelope_ratio()
        assert ratio <= 1.2, (name, ratio)
        i = int(np.argmin(np.abs(traj.t - 40.0)))
        limit_resid = abs(traj.t[i] ** k * traj.value[i]
                          + gamma / 2.0 ** (k + 2.0))
        tol = 0.1 * abs(gamma) + 0.01
        assert limit_resid <= tol, (name, limit_resid, tol)
        details.append(f"{name}: env={ratio:.2f}, resid@40={limit_resid:.3f}")
    _report(6, "trajectory envelopes + leading-order limits", True,
            "; ".join(details))


def test_criterion_07_hardy_suite():
    suite = deficit_random_suite(N_values=(10, 12), count=1000, seed=20250809)
    assert suite["minDeficit"] >= -1e-10
    worst_gap = 0.0
    for eps in np.arange(0.1, 0.95, 0.1):
        for n in range(1, 11):
            for N in range(10, 16):
                v = critical_test_value(float(eps), n, N)
                assert v < 0.0, (eps, n, N)
                closed = 0.5 * N * ball_volume(N) * (eps - 1.0) * math.pi / 2.0
                worst_gap = max(worst_gap, abs(v - closed))
    n_dep = max(abs(critical_test_value(0.5, 1, N)
                    - critical_test_value(0.5, n, N))
                for N in (10, 12, 15) for n in (2, 5, 7, 10))
    assert n_dep <= 1e-12
    _report(7, "Hardy suite", True,
            f"min deficit {suite['minDeficit']:.2e}; "
            f"closed-form gap {worst_gap:.1e}; n-dependence {n_dep:.1e}")


def test_criterion_08_stability_dichotomy():
    pot_pos = potential_theorem_form(10, 2.0, 1.0)
    n_pos, status_pos = first_unstable_annulus(pot_pos, 2.0, 1.0,
                                               epsilon=0.5, n_max=10)
    assert status_pos == "fired" and n_pos <= 10
    pot_neg = potential_theorem_form(10, 2.0, -1.0)
    fired_neg = [annulus_instability_probe(pot_neg, 2.0, -1.0, 0.5, n)
                 for n in range(1, 11)]
    assert not any(fired_neg)
    counts = [sturm_negative_count(pot_neg, rm) for rm in (1e-3, 1e-5, 1e-8)]
    assert counts == [0, 0, 0]
    _report(8, "stability dichotomy (annulus probes + Sturm)", True,
            f"gamma=+1 fires at n={n_pos}; gamma=-1 never fires, "
            f"Sturm counts {counts}")


def test_criterion_09_translation_experiment():
    fam = NonlinearityFamily("jl_gamma", 10, {"gamma": -1.0})
    results, smallest = translation_experiment(fam, [0.0, 1.0, 5.0, 20.0],
                                               alpha_points=32)
    counts = [rep.turning_count for _, rep in results]
    assert all(b <= a for a, b in zip(counts, counts[1:])), counts
    assert counts[-1] == 0
    for _, rep in results:
        assert rep.explored_alpha_max > 0.0
        assert "earlyStopped" in rep.evidence
    _report(9, "translation experiment", True,
            f"turning counts along c ladder: {counts}; "
            f"explored alpha up to {results[0][1].explored_alpha_max:.1f}")


def test_criterion_10_determinism(tmp_path):
    configs = [
        ["gamma", "--family", "exp_exp", "--N", "10"],
        ["classify", "--family", "jl_gamma", "--N", "10", "--param",
         "gamma=-1", "--alpha-max", "20", "--points", "12"],
        ["stability", "--family", "jl_gamma", "--N", "10", "--param",
         "gamma=1", "--seed", "4242"],
    ]
    reports = {"gamma": "gamma_report.json",
               "classify": "classification.json",
               "stability": "stability_report.json"}
    identical = []
    for args in configs:
        cmd = args[0]
        outs = []
        for tag in ("a", "b"):
            out = tmp_path / f"{cmd}_{tag}"
            code = main(args + ["--out", str(out), "--no-figures"])
            assert code == EXIT_OK
            outs.append((out / reports[cmd]).read_bytes())
        assert outs[0] == outs[1], cmd
        identical.append(cmd)
    _report(10, "byte-identical reports", True,
            f"commands checked: {', '.join(identical)}")
