import math

import numpy as np
import pytest
from scipy.optimize import brentq

from gelfandlab import DimensionConstants, NonlinearityFamily
from gelfandlab.bifurcation import (
    BifurcationCurve,
    classify,
    count_reference_crossings,
    default_alpha_grid,
    detect_turning_points,
    intersection_count,
    intersection_count_detail,
    resolve_lambda_star,
    threshold_side,
    trace_curve,
    translation_experiment,
)
from gelfandlab.shooting import integrate_radial
from gelfandlab.singular import exact_singular_solution


def _synthetic_curve(alpha, lam, rtol=1e-12):
    return BifurcationCurve(family=None, alpha=np.asarray(alpha, float),
                            lam=np.asarray(lam, float), rtol=rtol)


def test_turning_detection_monotone_curve():
    a = np.geomspace(0.5, 50.0, 200)
    curve = _synthetic_curve(a, 1.0 - 1.0 / a)
    assert detect_turning_points(curve, refine=False) == []


def test_turning_detection_damped_oscillation():
    # lambda = 16 + e^{-a} sin a: slope zeros at tan a = 1, i.e. a = pi/4 + n pi
    a = np.linspace(0.5, 12.0, 1200)
    curve = _synthetic_curve(a, 16.0 + np.exp(-a) * np.sin(a))
    brackets = detect_turning_points(curve, refine=False)
    roots = []
    for n in range(4):
        lo, hi = math.pi / 4 + n * math.pi - 0.5, math.pi / 4 + n * math.pi + 0.5
        if hi < 12.0:
            roots.append(brentq(lambda x: math.cos(x) - math.sin(x), lo, hi))
    assert len(brackets) >= len(roots)
    for root in roots:
        assert any(lo <= root <= hi for lo, hi in brackets), root


def test_crossing_count_synthetic():
    a = np.linspace(1.0, 30.0, 800)
    lam = 14.0 + np.exp(-a / 3.0) * np.sin(a)
    curve = _synthetic_curve(a, lam)
    crossings = count_reference_crossings(curve, 14.0)
    # sin has 9 zeros in (1, 30); all are resolved at this amplitude
    assert len(crossings) == 9


def test_crossing_hysteresis_suppresses_noise():
    rng = np.random.default_rng(7)
    a = np.linspace(1.0, 30.0, 300)
    lam = 14.0 + 1e-14 * rng.standard_normal(len(a))
    curve = _synthetic_curve(a, lam, rtol=1e-12)
    assert count_reference_crossings(curve, 14.0) == []


@pytest.fixture(scope="module")
def curve_exp9():
    fam = NonlinearityFamily("exp", 9)
    return trace_curve(fam, np.geomspace(0.1, 40.0, 60),
                       lambda_star_ref=14.0, lambda_star_source="exact")


def test_exp9_oscillation(curve_exp9):
    assert len(curve_exp9.crossings) >= 3
    assert len(curve_exp9.turning_brackets) >= 2
    # classical first fold near alpha ~ 5.3 (dense-sweep oracle bracket)
    lo, hi = curve_exp9.turning_brackets[0]
    assert 4.5 < lo < hi < 6.5
    assert (hi - lo) / lo <= 1.1e-3


def test_exp9_first_fold_against_dense_oracle(curve_exp9):
    # independent dense scan near the first fold
    fam = curve_exp9.family
    aa = np.linspace(5.0, 5.8, 33)
    ll = [integrate_radial(fam, a).lam for a in aa]
    i = int(np.argmax(ll))
    lo, hi = curve_exp9.turning_brackets[0]
    assert aa[i - 1] <= hi and aa[i + 1] >= lo


def test_exp9_crossing_turning_interlacing(curve_exp9):
    # between consecutive lambda* crossings there is a confirmed fold
    cr = curve_exp9.crossings
    br = curve_exp9.turning_brackets
    for left, right in zip(cr, cr[1:]):
        if right - left < 1e-9:
            continue
        spanned = any(left <= 0.5 * (lo + hi) <= right for lo, hi in br)
        # the innermost gap may fall below fold hysteresis; require the
        # interlacing only where a fold was resolvable
        gap_resolvable = any(left <= 0.5 * (lo + hi) for lo, hi in br)
        assert spanned or not gap_resolvable


@pytest.fixture(scope="module")
def curve_exp10():
    fam = NonlinearityFamily("exp", 10)
    return trace_curve(fam, np.geomspace(0.1, 300.0, 48),
                       lambda_star_ref=16.0, lambda_star_source="exact")


def test_exp10_monotone(curve_exp10):
    assert curve_exp10.turning_brackets == []
    a, l = curve_exp10.valid()
    assert np.all(np.diff(l) > -curve_exp10.hysteresis)
    assert l.max() < 16.0 + curve_exp10.hysteresis
    assert abs(l.max() - 16.0) < 1e-2
    assert curve_exp10.tail_monotone()


def test_lambda_continuity(curve_exp10):
    a, l = curve_exp10.valid()
    dl = np.abs(np.diff(l))
    dloga = np.diff(np.log(a))
    C = np.max(dl / dloga)
    assert np.all(dl <= 1.0001 * C * dloga)
    assert C < 30.0


def test_power8_n11_no_turning():
    fam = NonlinearityFamily("power", 11, {"p": 8.0})
    curve = trace_curve(fam, np.geomspace(0.1, 1e6, 40), refine_brackets=False)
    assert curve.turning_brackets == []
    a, l = curve.valid()
    assert np.all(np.diff(l) > -curve.hysteresis)


def test_intersection_identical_inputs():
    fam = NonlinearityFamily("exp", 9)
    sol = exact_singular_solution(fam)
    # a profile compared against itself through the same sampler has no crossings
    p = integrate_radial(fam, 10.0)
    count, unresolved = intersection_count_detail(p, sol, r_range=(1e-4, 1e-3))
    # inner region: v essentially equals alpha there, far below V: no crossing
    assert count == 0


def test_intersection_counts_exp9_ladder():
    fam = NonlinearityFamily("exp", 9)
    sol = exact_singular_solution(fam)
    counts = [intersection_count(integrate_radial(fam, a), sol)
              for a in (12.0, 16.0, 20.0)]
    assert all(c >= 2 for c in counts)
    assert counts == sorted(counts)


def test_intersection_exp10_separation():
    fam = NonlinearityFamily("exp", 10)
    sol = exact_singular_solution(fam)
    for alpha in (5.0, 20.0, 100.0):
        p = integrate_radial(fam, alpha)
        assert intersection_count(p, sol) <= 1


def test_threshold_sides():
    d11 = DimensionConstants(11)
    side, q, _ = threshold_side(NonlinearityFamily("exp", 9))
    assert side == "A" and q == 1.0          # q > q_jl(9)
    side, _, _ = threshold_side(NonlinearityFamily("power", 11, {"p": 8.0}))
    assert side == "B"                        # p > p_jl: q < q_jl
    side, _, _ = threshold_side(NonlinearityFamily("power", 11, {"p": 5.0}))
    assert side == "A"                        # p < p_jl: q > q_jl
    side, _, _ = threshold_side(NonlinearityFamily("jl_gamma", 10, {"gamma": 1.0}))
    assert side == "A"
    side, _, _ = threshold_side(NonlinearityFamily("jl_gamma", 10, {"gamma": -1.0}))
    assert side == "B"
    side, _, _ = threshold_side(NonlinearityFamily("exp", 10))
    assert side == "boundary"
    side, _, _ = threshold_side(NonlinearityFamily("exp_exp", 10))
    assert side == "B"                        # k = 1, gamma = -1 < 0
    side, _, _ = threshold_side(NonlinearityFamily("exp_pow", 10, {"nu": 0.5}))
    assert side == "A"                        # k = 1, gamma = 1 > 0


def test_side_consistency_with_estimated_gamma():
    # declared side matches the side recomputed from the extrapolated estimate
    from gelfandlab.families import catalogue_gamma_table

    for fam, k, gamma in catalogue_gamma_table():
        est = fam.estimate_gamma(k).extrapolated
        crit = fam.dim.gamma_crit if k >= 2.0 else 0.0
        declared_side = "A" if gamma > crit else "B"
        est_side = "A" if est > crit else "B"
        assert est_side == declared_side, fam.label()


def test_classify_jl_gamma_positive():
    rep, _ = classify(NonlinearityFamily("jl_gamma", 10, {"gamma": 1.0}),
                      alpha_grid=np.geomspace(0.1, 30.0, 24))
    assert rep.declared_side == "A"
    assert rep.verdict == "TypeI-evidence"
    assert rep.evidence["annulusProbe"]["status"] == "fired"


def test_classify_jl_gamma_negative():
    rep, _ = classify(NonlinearityFamily("jl_gamma", 10, {"gamma": -1.0}),
                      alpha_grid=np.geomspace(0.1, 30.0, 24))
    assert rep.declared_side == "B"
    assert rep.verdict == "TypeIII/II-evidence"
    assert rep.tail_monotone


def test_classify_exp10_boundary():
    rep, _ = classify(NonlinearityFamily("exp", 10),
                      alpha_grid=np.geomspace(0.1, 40.0, 24))
    assert rep.declared_side == "boundary"
    assert rep.verdict == "TypeII-evidence"
    assert rep.turning_count == 0


def test_classify_deterministic():
    fam = NonlinearityFamily("jl_gamma", 10, {"gamma": -1.0})
    grid = np.geomspace(0.1, 20.0, 16)
    rep1, _ = classify(fam, alpha_grid=grid)
    rep2, _ = classify(fam, alpha_grid=grid)
    assert rep1.to_dict() == rep2.to_dict()


def test_resolve_lambda_star_sources():
    lam, src = resolve_lambda_star(NonlinearityFamily("exp", 9))
    assert (lam, src) == (14.0, "exact")
    lam, src = resolve_lambda_star(
        NonlinearityFamily("exp_times_pow", 10, {"nu": 0.5}))
    assert src == "singular-module" and 5.0 < lam < 16.0
    lam, src = resolve_lambda_star(NonlinearityFamily("power", 11, {"p": 8.0}))
    assert lam is None


def test_translation_exp_shift_invariance():
    # e^{u+c} = e^c e^u: the parameter absorbs the constant, verdicts agree
    fam = NonlinearityFamily("exp", 10)
    results, smallest = translation_experiment(fam, [0.0, 2.0],
                                               alpha_points=20, alpha_max=30.0)
    verdicts = [rep.verdict for _, rep in results]
    counts = [rep.turning_count for _, rep in results]
    assert verdicts[0] == verdicts[1]
    assert counts[0] == counts[1] == 0


def test_translation_power8():
    fam = NonlinearityFamily("power", 11, {"p": 8.0})
    results, smallest = translation_experiment(fam, [0.0, 5.0],
                                               alpha_points=18, alpha_max=1e4)
    for _, rep in results:
        assert rep.verdict == "TypeII-evidence"
        assert rep.turning_count == 0
    assert smallest == 0.0


def test_translation_jl_gamma_negative_ladder():
    fam = NonlinearityFamily("jl_gamma", 10, {"gamma": -1.0})
    results, smallest = translation_experiment(fam, [0.0, 1.0, 5.0, 20.0],
                                               alpha_points=24)
    counts = [rep.turning_count for _, rep in results]
    assert all(b <= a for a, b in zip(counts, counts[1:]))
    assert counts[-1] == 0
    assert smallest is not None


def test_default_alpha_grid_respects_cap():
    fam = NonlinearityFamily("exp_exp", 10)
    grid = default_alpha_grid(fam)
    assert grid[-1] <= fam.alpha_cap


def test_classification_report_invariants():
    # TypeI-evidence requires crossings >= 2 or a fired annulus probe;
    # TypeII-evidence requires zero turning brackets and a monotone tail
    cases = [
        NonlinearityFamily("exp", 10),
        NonlinearityFamily("jl_gamma", 10, {"gamma": 1.0}),
        NonlinearityFamily("jl_gamma", 10, {"gamma": -1.0}),
        NonlinearityFamily("power", 11, {"p": 8.0}),
    ]
    for fam in cases:
        rep, _ = classify(fam, alpha_grid=np.geomspace(0.1, 20.0, 16))
        if rep.verdict == "TypeI-evidence":
            probe = rep.evidence.get("annulusProbe", {})
            assert rep.crossing_count >= 2 or probe.get("status") == "fired"
        if rep.verdict == "TypeII-evidence":
            assert rep.turning_count == 0 and rep.tail_monotone
