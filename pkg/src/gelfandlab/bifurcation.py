"""Bifurcation-curve tracing over alpha grids, turning-point and lambda*-crossing
detection with noise hysteresis, intersection counts against the singular solution,
and assembly of Type I/II/III classification evidence."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .families import NonlinearityFamily
from .shooting import NoZeroCrossing, ShootingError, integrate_radial
from .singular import singular_solution
from .stability import first_unstable_annulus, potential_theorem_form


class UnresolvedCrossing(RuntimeError):
    """Sign-change count did not stabilize under grid refinement."""


@dataclass
class BifurcationCurve:
    family: NonlinearityFamily
    alpha: np.ndarray
    lam: np.ndarray                     # nan where shooting failed
    rtol: float
    lambda_star_ref: float | None = None
    lambda_star_source: str | None = None
    turning_brackets: list = field(default_factory=list)
    crossings: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    truncated_early: bool = False

    def noise_floor(self, alpha):
        """Shooting tolerance on the lambda scale near center value alpha.

        Besides the relative ODE tolerance, v loses absolute accuracy of order
        eps * alpha passing through the boundary layer (v starts at alpha and is
        read off near 0), which dominates for large alpha; the factor calibrates
        the observed step-accumulation.
        """
        scale = np.nanmax(self.lam) if np.isfinite(self.lam).any() else 1.0
        return self.rtol * max(scale, 1.0) + 100.0 * 2.22e-16 * alpha

    @property
    def hysteresis(self):
        """10x the shooting tolerance: the noise floor below which slope flips
        and crossings are not trusted."""
        return 10.0 * self.noise_floor(self.explored_alpha_max)

    @property
    def explored_alpha_max(self):
        ok = np.isfinite(self.lam)
        return float(self.alpha[ok][-1]) if ok.any() else 0.0

    def valid(self):
        ok = np.isfinite(self.lam)
        return self.alpha[ok], self.lam[ok]

    def tail_monotone(self, fraction=0.25):
        """No resolved decrease of lambda over the trailing log-alpha window."""
        a, l = self.valid()
        if len(a) < 3:
            return True
        log_a = np.log(a)
        cut = log_a[-1] - fraction * (log_a[-1] - log_a[0])
        tail = l[log_a >= cut]
        if len(tail) < 2:
            tail = l[-2:]
        hys = self.hysteresis
        return bool(np.all(np.diff(tail) > -hys))


def trace_curve(family, alpha_grid, rtol=1e-12, r_max=50.0,
                lambda_star_ref=None, lambda_star_source=None,
                refine_brackets=True, early_stop=False):
    """One shooting solve per alpha; failures recorded per point, never aborting.

    With early_stop=True the sweep truncates once lambda has settled onto the
    singular reference within the noise hysteresis for several consecutive points
    (folds beyond that amplitude are unresolvable); the truncation is flagged.
    """
    alpha_grid = np.sort(np.asarray(alpha_grid, dtype=float))
    alphas, lams, failures = [], [], []
    settled = 0
    truncated = False
    for a in alpha_grid:
        try:
            lam = integrate_radial(family, a, r_max=r_max, rtol=rtol).lam
        except (ShootingError, NoZeroCrossing) as exc:
            failures.append((float(a), str(exc)))
            lam = math.nan
        alphas.append(float(a))
        lams.append(lam)
        if early_stop and lambda_star_ref is not None and math.isfinite(lam):
            floor = 10.0 * (rtol * max(lambda_star_ref, 1.0)
                            + 100.0 * 2.22e-16 * a)
            if abs(lam - lambda_star_ref) < floor:
                settled += 1
                if settled >= 5:
                    truncated = True
                    break
            else:
                settled = 0
    curve = BifurcationCurve(family=family, alpha=np.array(alphas),
                             lam=np.array(lams), rtol=rtol,
                             lambda_star_ref=lambda_star_ref,
                             lambda_star_source=lambda_star_source,
                             failures=failures, truncated_early=truncated)
    curve.turning_brackets = detect_turning_points(
        curve, refine=refine_brackets, r_max=r_max)
    if lambda_star_ref is not None:
        curve.crossings = count_reference_crossings(curve, lambda_star_ref)
    return curve


def detect_turning_points(curve, refine=True, bracket_rel_width=1e-3, r_max=50.0):
    """Brackets (alpha_lo, alpha_hi) around sign changes of the discrete slope.

    A flip must survive re-evaluation at twice the local grid density and show a
    lambda variation above the hysteresis (10x shooting tolerance); confirmed
    brackets are then shrunk by bisection to the requested relative width.
    """
    a, l = curve.valid()
    if len(a) < 3:
        return []
    fam, rtol = curve.family, curve.rtol

    def lam_of(alpha):
        return integrate_radial(fam, alpha, r_max=r_max, rtol=rtol).lam

    slopes = np.diff(l) / np.diff(np.log(a))
    brackets = []
    for i in range(1, len(slopes)):
        if slopes[i - 1] == 0.0 or slopes[i] == 0.0:
            continue
        if math.copysign(1.0, slopes[i - 1]) == math.copysign(1.0, slopes[i]):
            continue
        hys = 10.0 * curve.noise_floor(a[i + 1])
        prominence = min(abs(l[i] - l[i - 1]), abs(l[i + 1] - l[i]))
        if prominence <= hys:
            continue
        lo, mid, hi = a[i - 1], a[i], a[i + 1]
        y_lo, y_mid, y_hi = l[i - 1], l[i], l[i + 1]
        if refine:
            # double the density: the flip must persist
            m1, m2 = math.sqrt(lo * mid), math.sqrt(mid * hi)
            y_m1, y_m2 = lam_of(m1), lam_of(m2)
            pts = [(lo, y_lo), (m1, y_m1), (mid, y_mid), (m2, y_m2), (hi, y_hi)]
            sub_sl = [(y2 - y1) / math.log(a2 / a1)
                      for (a1, y1), (a2, y2) in zip(pts, pts[1:])]
            flips = [j for j in range(1, len(sub_sl))
                     if math.copysign(1.0, sub_sl[j - 1])
                     != math.copysign(1.0, sub_sl[j])]
            if not flips:
                continue
            j = flips[0]
            (lo, y_lo), (mid, y_mid), (hi, y_hi) = pts[j - 1], pts[j], pts[j + 1]
            # bisect the extremum bracket down to the requested width
            while (hi - lo) / lo > bracket_rel_width:
                if mid - lo > hi - mid:
                    m = math.sqrt(lo * mid)
                    y = lam_of(m)
                    if (y - y_mid) * math.copysign(1.0, sub_sl[j - 1]) > 0:
                        hi, y_hi, mid, y_mid = mid, y_mid, m, y
                    else:
                        lo, y_lo = m, y
                else:
                    m = math.sqrt(mid * hi)
                    y = lam_of(m)
                    if (y - y_mid) * math.copysign(1.0, sub_sl[j - 1]) > 0:
                        lo, y_lo, mid, y_mid = mid, y_mid, m, y
                    else:
                        hi, y_hi = m, y
        brackets.append((float(lo), float(hi)))
    return brackets


def count_reference_crossings(curve, lam_ref):
    """Alphas where lambda - lam_ref changes sign, confirmed only when the
    excursion on both flanks exceeds the noise hysteresis."""
    a, l = curve.valid()
    if len(a) < 2:
        return []
    d = l - lam_ref
    idx = [i for i in range(len(d) - 1)
           if d[i] != 0.0 and d[i + 1] != 0.0
           and math.copysign(1.0, d[i]) != math.copysign(1.0, d[i + 1])]
    segments = []
    start = 0
    for i in idx:
        segments.append(np.max(np.abs(d[start:i + 1])))
        start = i + 1
    segments.append(np.max(np.abs(d[start:])) if start < len(d) else 0.0)
    out = []
    for j, i in enumerate(idx):
        # a flank must exceed one local tolerance width (folds use the stricter
        # 10x filter)
        flank = curve.noise_floor(a[i + 1])
        if segments[j] > flank and segments[j + 1] > flank:
            out.append(float(math.sqrt(a[i] * a[i + 1])))
    return out


def intersection_count_detail(profile, singular, r_range=None, n_grid=2000):
    """(resolved, unresolved) sign changes of v(r, alpha) - V(r) on the shared
    range.

    A candidate crossing must clear the floating-point noise floor on both flanks
    and keep an odd sign-change count under 12x subdivision; candidates failing
    refinement are reported as unresolved rather than counted.
    """
    r_lo_default = max(profile.r_start * 2.0, float(np.min(singular.r_grid)))
    r_hi_default = min(profile.first_zero or profile.r[-1],
                       singular.sqrt_lambda_star) * (1.0 - 1e-9)
    r_lo, r_hi = r_range if r_range is not None else (r_lo_default, r_hi_default)
    r_lo = max(r_lo, r_lo_default)
    r_hi = min(r_hi, r_hi_default)
    if r_hi <= r_lo:
        return 0, 0

    def diff(r):
        return profile.v_at(r)[0] - singular.V_of(r)

    grid = np.geomspace(r_lo, r_hi, n_grid)
    vals = np.array([diff(r) for r in grid])
    floor = 1e-12 * max(1.0, profile.alpha)
    signs = np.sign(vals)
    idx = [i for i in range(len(grid) - 1)
           if signs[i] != 0.0 and signs[i] != signs[i + 1]]
    # flank maxima between consecutive candidates
    seg_max, start = [], 0
    for i in idx:
        seg_max.append(np.max(np.abs(vals[start:i + 1])))
        start = i + 1
    seg_max.append(np.max(np.abs(vals[start:])) if start < len(vals) else 0.0)

    count = unresolved = 0
    for j, i in enumerate(idx):
        # flips whose flanks stay below the noise floor are noise, not crossings
        if seg_max[j] < floor or seg_max[j + 1] < floor:
            continue
        sub = np.linspace(grid[i], grid[i + 1], 12)
        sub_signs = np.sign([diff(r) for r in sub])
        changes = int(np.count_nonzero(sub_signs[:-1] * sub_signs[1:] < 0))
        if changes % 2 == 0:
            unresolved += 1
        else:
            count += changes
    return count, unresolved


def intersection_count(profile, singular, r_range=None, n_grid=2000, strict=False):
    """Resolved sign changes of v(r, alpha) - V(r); with strict=True an
    unresolved candidate raises UnresolvedCrossing."""
    count, unresolved = intersection_count_detail(profile, singular,
                                                  r_range=r_range, n_grid=n_grid)
    if strict and unresolved:
        raise UnresolvedCrossing(
            f"{unresolved} candidate crossing(s) did not survive refinement")
    return count


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------

@dataclass
class ClassificationReport:
    verdict: str            # TypeI-evidence | TypeII-evidence | TypeIII/II-evidence
    #                         | borderline-undetermined
    declared_side: str      # "A" | "B" | "boundary"
    gamma_estimate: float | None
    k: float | None
    turning_count: int
    crossing_count: int
    tail_monotone: bool
    explored_alpha_max: float
    evidence: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "verdict": self.verdict,
            "declaredSide": self.declared_side,
            "gammaEstimate": self.gamma_estimate,
            "k": self.k,
            "turningCount": self.turning_count,
            "crossingCount": self.crossing_count,
            "tailMonotone": self.tail_monotone,
            "exploredAlphaMax": self.explored_alpha_max,
            "evidence": self.evidence,
        }


def threshold_side(family, q_value=None, q_tol=1e-3):
    """Side of the classification thresholds from (q, k, gamma).

    q above/below its critical value decides outright; at criticality the
    log-corrected index gamma decides, with the k = 2 threshold at
    1/(4 sqrt(N-1)).  Families whose criticality defect vanishes identically
    (pure exponential at N = 10, pure critical power) are 'boundary'.
    """
    dim = family.dim
    q = q_value if q_value is not None else family.q_exact
    estimated = False
    if q is None:
        q, err, _ = family.estimate_q()
        q_tol = max(q_tol, 2.0 * err)
        estimated = True
    if q > dim.q_jl + q_tol:
        return "A", q, estimated
    if q < dim.q_jl - q_tol:
        return "B", q, estimated
    k, gamma = family.declared_k, family.declared_gamma
    if k is None:
        return "boundary", q, estimated
    # identically vanishing defect: k is arbitrary, gamma = 0 on every scale
    if gamma == 0.0 and family._core.Ff_closed is not None:
        return "boundary", q, estimated
    if k < 2.0:
        if gamma > 0.0:
            return "A", q, estimated
        if gamma < 0.0:
            return "B", q, estimated
        return "boundary", q, estimated
    if gamma > dim.gamma_crit:
        return "A", q, estimated
    if gamma < dim.gamma_crit:
        return "B", q, estimated
    return "boundary", q, estimated


def resolve_lambda_star(family, t0=40.0, t_min=3.0):
    """lambda* reference: exact closed form, else the transformed singular route,
    else None (caller falls back to the curve tail)."""
    if family.exact_singular is not None:
        return family.exact_singular["lambda_star"], "exact"
    if family.N >= 10 and family.declared_k is not None:
        sol = singular_solution(family, t0=t0, t_min=t_min)
        return sol.lambda_star, "singular-module"
    return None, None


def default_alpha_grid(family, alpha_max=None, points=48, alpha_min=0.1):
    cap = family.alpha_cap * 0.98
    hi = min(alpha_max if alpha_max is not None else 1e6, cap)
    return np.geomspace(alpha_min, hi, points)


def classify(family, alpha_grid=None, rtol=1e-12, probe_eps=0.5, probe_nmax=10,
             early_stop=True, curve=None):
    """Combine threshold side, curve evidence and annulus probes into a verdict."""
    side, q_val, q_estimated = threshold_side(family)
    lam_ref, lam_src = resolve_lambda_star(family)
    if curve is None:
        if alpha_grid is None:
            alpha_grid = default_alpha_grid(family)
        curve = trace_curve(family, alpha_grid, rtol=rtol,
                            lambda_star_ref=lam_ref, lambda_star_source=lam_src,
                            early_stop=early_stop and lam_ref is not None)
    if lam_ref is None:
        a, l = curve.valid()
        if len(l) >= 3:
            lam_ref = float(np.mean(l[-3:]))
            lam_src = "curve-tail"
            curve.lambda_star_ref = lam_ref
            curve.lambda_star_source = lam_src
            curve.crossings = count_reference_crossings(curve, lam_ref)

    turning = len(curve.turning_brackets)
    crossing = len(curve.crossings)
    tail_ok = curve.tail_monotone()

    probe = None
    if side in ("A", "B") and family.declared_k is not None \
            and abs(q_val - family.dim.q_jl) < 1e-3:
        pot = potential_theorem_form(family.N, family.declared_k,
                                     family.declared_gamma)
        n_fired, status = first_unstable_annulus(
            pot, family.declared_k, family.declared_gamma,
            epsilon=probe_eps, n_max=probe_nmax)
        probe = {"firstUnstableAnnulus": n_fired, "status": status,
                 "epsilon": probe_eps, "nMax": probe_nmax}

    at_criticality = abs(q_val - family.dim.q_jl) < 1e-3
    if side == "A":
        fired = probe is not None and probe["status"] == "fired"
        verdict = ("TypeI-evidence" if (fired or crossing >= 2)
                   else "borderline-undetermined")
    elif side == "B":
        if at_criticality:
            verdict = "TypeIII/II-evidence"
        else:
            verdict = ("TypeII-evidence" if (turning == 0 and tail_ok)
                       else "TypeIII/II-evidence")
    else:
        if crossing >= 2:
            verdict = "TypeI-evidence"
        elif turning == 0 and tail_ok:
            verdict = "TypeII-evidence"
        else:
            verdict = "borderline-undetermined"

    gamma_est = None
    if family.declared_k is not None and family.tail_kind != "closed":
        gamma_est = family.estimate_gamma(family.declared_k).extrapolated
    elif family.declared_gamma is not None:
        gamma_est = family.declared_gamma

    evidence = {
        "q": q_val,
        "qEstimated": q_estimated,
        "qJL": family.dim.q_jl,
        "gammaCrit": family.dim.gamma_crit,
        "declaredK": family.declared_k,
        "declaredGamma": family.declared_gamma,
        "lambdaStarRef": lam_ref,
        "lambdaStarSource": lam_src,
        "turningBrackets": [list(b) for b in curve.turning_brackets],
        "crossings": list(curve.crossings),
        "alphaCap": (family.alpha_cap if math.isfinite(family.alpha_cap)
                     else None),
        "earlyStopped": curve.truncated_early,
        "shootingFailures": curve.failures,
    }
    if probe is not None:
        evidence["annulusProbe"] = probe
    return ClassificationReport(
        verdict=verdict, declared_side=side, gamma_estimate=gamma_est,
        k=family.declared_k, turning_count=turning, crossing_count=crossing,
        tail_monotone=tail_ok, explored_alpha_max=curve.explored_alpha_max,
        evidence=evidence), curve


def translation_experiment(family, c_ladder, alpha_points=40, rtol=1e-11,
                           alpha_max=None):
    """classify f_c for each shift c; reports the smallest tested c with zero
    confirmed turning brackets (the constructive stand-in for the existential
    threshold shift)."""
    results = []
    for c in c_ladder:
        shifted = family.with_shift(c)
        grid = default_alpha_grid(shifted, alpha_max=alpha_max,
                                  points=alpha_points)
        report, curve = classify(shifted, alpha_grid=grid, rtol=rtol,
                                 early_stop=True)
        results.append((float(c), report))
    smallest = next((c for c, rep in results if rep.turning_count == 0), None)
    return results, smallest
