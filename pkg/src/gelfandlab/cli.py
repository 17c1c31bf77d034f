"""Command-line front end: config ingestion, experiment orchestration, CSV/JSON
emission and figure rendering.

Exit codes: 0 success, 2 validation error, 3 numerical failure.  Every run
directory receives a manifest (config echo, versions, wall time); reports carry
no timestamps so identical configs reproduce byte-identical JSON.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import figures, report_io
from .bifurcation import classify, resolve_lambda_star, trace_curve, \
    translation_experiment
from .families import FamilyError, family_from_spec
from .shooting import ShootingError
from .singular import HandoffMismatch, TrajectoryEscape, reconstruct_V, \
    solve_transformed, verify_fprime_asymptotic, verify_phi_asymptotic
from .stability import annulus_quadratic_form, critical_test_value, \
    deficit_random_suite, first_unstable_annulus, potential_theorem_form, \
    sturm_negative_count

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

OUTPUT_ROOT_ENV = "GELFANDLAB_OUT"

COMMANDS = ("gamma", "curve", "singular", "classify", "stability", "translate")


class ValidationError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    family_spec: dict
    options: dict = field(default_factory=dict)
    out_dir: str | None = None
    seed: int = 20250809
    figures: bool = True

    def to_dict(self):
        return {"command": self.command, "family": self.family_spec,
                "options": dict(sorted(self.options.items())),
                "seed": self.seed, "figures": self.figures}


def _build_family(config):
    if config.command not in COMMANDS:
        raise ValidationError(f"unknown command {config.command!r}")
    try:
        return family_from_spec(config.family_spec)
    except FamilyError as exc:
        raise ValidationError(str(exc)) from exc


def _positive(options, key, default):
    val = float(options.get(key, default))
    if not val > 0:
        raise ValidationError(f"{key} must be positive, got {val}")
    return val


def _run_gamma(config, family, out, artifacts):
    k = config.options.get("k", family.declared_k)
    if k is None:
        raise ValidationError(
            f"{family.label()} has no declared log exponent k; pass --k")
    k = float(k)
    if not 0.0 < k <= 2.0:
        raise ValidationError("k must lie in (0, 2]")
    est = family.estimate_gamma(k)
    q, q_err, q_conv = family.estimate_q()
    report = {
        "family": family.spec_dict(),
        "qEstimate": q, "qErrorBar": q_err, "qConverged": q_conv,
        "qJL": family.dim.q_jl,
        "declaredK": family.declared_k, "declaredGamma": family.declared_gamma,
        **est.to_dict(),
    }
    artifacts.append(report_io.write_json(out / "gamma_report.json", report))
    artifacts.append(report_io.write_csv(
        out / "gamma_samples.csv", ["u", "indicator"], est.samples))
    if config.figures:
        artifacts.append(figures.gamma_figure(est, family.label(),
                                              out / "gamma.png"))
    return report


def _curve_options(config, family):
    cap = family.alpha_cap
    alpha_min = _positive(config.options, "alpha_min", 0.1)
    default_max = min(1e6, cap * 0.98) if math.isfinite(cap) else 1e6
    alpha_max = _positive(config.options, "alpha_max", default_max)
    if alpha_max > cap:
        raise ValidationError(
            f"alpha_max={alpha_max:g} exceeds the overflow-safe cap "
            f"{cap:g} of {family.label()}")
    if alpha_max <= alpha_min:
        raise ValidationError("alpha range is empty")
    points = int(config.options.get("points", 48))
    if points < 3:
        raise ValidationError("need at least 3 alpha points")
    rtol = _positive(config.options, "rtol", 1e-12)
    return np.geomspace(alpha_min, alpha_max, points), rtol


def _run_curve(config, family, out, artifacts):
    grid, rtol = _curve_options(config, family)
    lam_ref, lam_src = resolve_lambda_star(family)
    curve = trace_curve(family, grid, rtol=rtol, lambda_star_ref=lam_ref,
                        lambda_star_source=lam_src)
    report = report_io.curve_report_dict(curve)
    artifacts.append(report_io.write_json(out / "curve_report.json", report))
    artifacts.append(report_io.curve_csv(out / "curve.csv", curve))
    from .shooting import integrate_radial
    for alpha in config.options.get("profile_alphas", ()):
        if not 0.0 < alpha <= family.alpha_cap:
            raise ValidationError(f"profile alpha {alpha:g} outside (0, cap]")
        prof = integrate_radial(family, alpha, rtol=rtol)
        artifacts.append(report_io.profile_csv(
            out / f"profile_alpha{alpha:g}.csv", prof))
    if config.figures:
        artifacts.append(figures.curve_figure(curve, out / "curve.png"))
        fig2 = figures.curve_oscillation_figure(curve, out / "curve_oscillation.png")
        if fig2:
            artifacts.append(fig2)
    return report


def _run_singular(config, family, out, artifacts):
    t0 = _positive(config.options, "t0", 40.0)
    t_min = _positive(config.options, "tmin", 3.0)
    if family.declared_k is None and "k" not in config.options:
        raise ValidationError(
            f"{family.label()} has no declared (k, gamma); pass --k/--gamma")
    k = config.options.get("k")
    gamma = config.options.get("gamma")
    traj = solve_transformed(family, t0=t0, t_min=t_min,
                             k=None if k is None else float(k),
                             gamma=None if gamma is None else float(gamma))
    sol = reconstruct_V(traj)
    tab_f = verify_fprime_asymptotic(sol)
    tab_p = verify_phi_asymptotic(sol)
    report = {
        "family": family.spec_dict(),
        "branch": traj.branch,
        "k": traj.k, "gamma": traj.gamma,
        "t0": traj.t0, "tMin": traj.t_min,
        "lambdaStar": sol.lambda_star,
        "rHandoff": sol.r_handoff,
        "envelopeCoeff": traj.envelope_coeff,
        "envelopeRatio": traj.envelope_ratio(),
        "fprimeAsymptotic": tab_f.to_dict(),
        "phiAsymptotic": tab_p.to_dict(),
    }
    artifacts.append(report_io.write_json(out / "singular_report.json", report))
    artifacts.append(report_io.trajectory_csv(out / "trajectory.csv", traj))
    artifacts.append(report_io.solution_csv(out / "solution.csv", sol))
    if config.figures:
        artifacts.append(figures.trajectory_figure(traj, out / "trajectory.png"))
        artifacts.append(figures.solution_figure(sol, out / "singular.png"))
    return report


def _run_classify(config, family, out, artifacts):
    alpha_max = config.options.get("alpha_max")
    points = int(config.options.get("points", 48))
    rtol = _positive(config.options, "rtol", 1e-12)
    grid = None
    if alpha_max is not None:
        cap = family.alpha_cap
        if float(alpha_max) > cap:
            raise ValidationError(f"alpha_max exceeds cap {cap:g}")
        grid = np.geomspace(_positive(config.options, "alpha_min", 0.1),
                            float(alpha_max), points)
    report, curve = classify(family, alpha_grid=grid, rtol=rtol)
    payload = {"family": family.spec_dict(), **report.to_dict()}
    artifacts.append(report_io.write_json(out / "classification.json", payload))
    artifacts.append(report_io.curve_csv(out / "curve.csv", curve))
    if config.figures:
        artifacts.append(figures.curve_figure(curve, out / "curve.png"))
    return payload


def _run_stability(config, family, out, artifacts):
    eps = _positive(config.options, "eps", 0.5)
    if not eps < 1.0:
        raise ValidationError("eps must lie in (0, 1)")
    n_max = int(config.options.get("nmax", 10))
    k = config.options.get("k", family.declared_k)
    gamma = config.options.get("gamma", family.declared_gamma)
    if k is None or gamma is None:
        raise ValidationError(
            f"{family.label()} has no declared (k, gamma); pass --k/--gamma")
    k, gamma = float(k), float(gamma)
    pot = potential_theorem_form(family.N, k, gamma)
    per_n = []
    for n in range(1, n_max + 1):
        sign, log_margin = annulus_quadratic_form(family.N, k, gamma, eps, n)
        per_n.append({"n": n, "unstable": bool(sign < 0),
                      "logMargin": (None if math.isinf(log_margin)
                                    else log_margin)})
    first_n, status = first_unstable_annulus(pot, k, gamma, epsilon=eps,
                                             n_max=n_max)
    ladder = config.options.get("rmin_ladder", (1e-3, 1e-5, 1e-8))
    sturm = [{"rMin": rm, "count": sturm_negative_count(pot, rm)}
             for rm in ladder]
    suite = deficit_random_suite(seed=config.seed)
    report = {
        "family": family.spec_dict(),
        "k": k, "gamma": gamma, "epsilon": eps, "nMax": n_max,
        "annulusProbe": {"perN": per_n, "firstUnstableAnnulus": first_n,
                         "status": status},
        "sturmCounts": sturm,
        "deficitSuite": suite,
        "criticalTestValue": critical_test_value(eps, 1, family.N),
    }
    artifacts.append(report_io.write_json(out / "stability_report.json", report))
    artifacts.append(report_io.write_csv(
        out / "annulus_probe.csv", ["n", "unstable", "log_margin"],
        [(row["n"], int(row["unstable"]), row["logMargin"]) for row in per_n]))
    if config.figures:
        artifacts.append(figures.stability_figure(report, out / "stability.png"))
    return report


def _run_translate(config, family, out, artifacts):
    ladder = config.options.get("c_ladder", (0.0, 1.0, 5.0, 20.0))
    ladder = [float(c) for c in ladder]
    if any(c < 0 for c in ladder):
        raise ValidationError("shifts must be >= 0")
    points = int(config.options.get("points", 40))
    rtol = _positive(config.options, "rtol", 1e-11)
    alpha_max = config.options.get("alpha_max")
    results, smallest = translation_experiment(
        family, ladder, alpha_points=points, rtol=rtol,
        alpha_max=None if alpha_max is None else float(alpha_max))
    report = {
        "family": family.spec_dict(),
        "cLadder": ladder,
        "perC": [{"c": c, **rep.to_dict()} for c, rep in results],
        "smallestTypeIIShift": smallest,
    }
    artifacts.append(report_io.write_json(out / "translate_report.json", report))
    artifacts.append(report_io.write_csv(
        out / "translate.csv", ["c", "turning_count", "crossing_count",
                                "tail_monotone", "explored_alpha_max"],
        [(c, rep.turning_count, rep.crossing_count, int(rep.tail_monotone),
          rep.explored_alpha_max) for c, rep in results]))
    if config.figures:
        artifacts.append(figures.translation_figure(results, out / "translate.png"))
    return report


_RUNNERS = {
    "gamma": _run_gamma,
    "curve": _run_curve,
    "singular": _run_singular,
    "classify": _run_classify,
    "stability": _run_stability,
    "translate": _run_translate,
}


def run(config):
    """Execute a RunConfig; artifacts land in config.out_dir. Returns exit code."""
    t_start = time.monotonic()
    try:
        family = _build_family(config)
        runner = _RUNNERS[config.command]
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    out = Path(config.out_dir or _default_out_dir(config))
    artifacts = []
    try:
        # validate options before creating the output directory: a validation
        # failure must leave no partial artifacts behind
        out.mkdir(parents=True, exist_ok=True)
        runner(config, family, out, artifacts)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        for a in artifacts:
            Path(a).unlink(missing_ok=True)
        return EXIT_VALIDATION
    except (ShootingError, TrajectoryEscape, HandoffMismatch) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        report_io.write_manifest(out, config.to_dict(),
                                 artifacts, time.monotonic() - t_start)
        return EXIT_NUMERICAL
    report_io.write_manifest(out, config.to_dict(), artifacts,
                             time.monotonic() - t_start)
    print(f"wrote {len(artifacts) + 1} artifacts to {out}")
    return EXIT_OK


def _default_out_dir(config):
    root = os.environ.get(OUTPUT_ROOT_ENV, "runs")
    fam = config.family_spec
    tag = f"{fam.get('family', 'x')}_N{fam.get('N', 0)}"
    return str(Path(root) / f"{config.command}_{tag}")


def _parse_params(pairs):
    params = {}
    for item in pairs or ():
        if "=" not in item:
            raise ValidationError(f"--param expects key=value, got {item!r}")
        key, val = item.split("=", 1)
        params[key] = float(val)
    return params


def _add_family_args(sub):
    sub.add_argument("--family", help="catalogue family name")
    sub.add_argument("--N", type=int, help="dimension (>= 3)")
    sub.add_argument("--param", action="append", metavar="KEY=VAL",
                     help="family parameter, repeatable")
    sub.add_argument("--shift", type=float, default=0.0,
                     help="translation c in f_c(u) = f(u+c)")
    sub.add_argument("--family-json",
                     help='full spec {"family":...,"N":...,"params":{...},'
                          '"shift":...} (overrides the flags above)')
    sub.add_argument("--out", help=f"output directory "
                     f"(default under ${OUTPUT_ROOT_ENV} or ./runs)")
    sub.add_argument("--seed", type=int, default=20250809)
    sub.add_argument("--no-figures", action="store_true",
                     help="skip PNG rendering")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="gelfandlab",
        description="Bifurcation-structure laboratory for -Delta u = lambda f(u) "
                    "in the unit ball")
    sp = ap.add_subparsers(dest="command", required=True)

    g = sp.add_parser("gamma", help="estimate the log-corrected growth index")
    g.add_argument("--k", type=float, help="log exponent (default: declared)")

    c = sp.add_parser("curve", help="trace the bifurcation curve lambda(alpha)")
    c.add_argument("--alpha-min", type=float, default=0.1)
    c.add_argument("--alpha-max", type=float)
    c.add_argument("--points", type=int, default=48)
    c.add_argument("--rtol", type=float, default=1e-12)
    c.add_argument("--profile-alpha", action="append", type=float,
                   metavar="ALPHA", help="also dump the radial profile at "
                   "this center value (repeatable)")

    s = sp.add_parser("singular", help="transformed-coordinate singular solution")
    s.add_argument("--t0", type=float, default=40.0)
    s.add_argument("--tmin", type=float, default=3.0)
    s.add_argument("--k", type=float)
    s.add_argument("--gamma", type=float)

    k = sp.add_parser("classify", help="Type I/II/III classification evidence")
    k.add_argument("--alpha-max", type=float)
    k.add_argument("--points", type=int, default=48)
    k.add_argument("--rtol", type=float, default=1e-12)

    st = sp.add_parser("stability", help="Hardy/annulus/Sturm stability probes")
    st.add_argument("--eps", type=float, default=0.5)
    st.add_argument("--nmax", type=int, default=10)
    st.add_argument("--k", type=float)
    st.add_argument("--gamma", type=float)

    t = sp.add_parser("translate", help="classification along a shift ladder")
    t.add_argument("--c-ladder", default="0,1,5,20",
                   help="comma-separated shifts")
    t.add_argument("--points", type=int, default=40)
    t.add_argument("--rtol", type=float, default=1e-11)
    t.add_argument("--alpha-max", type=float)

    for sub in (g, c, s, k, st, t):
        _add_family_args(sub)
    return ap


def config_from_args(args):
    if args.family_json:
        spec = json.loads(args.family_json)
    else:
        if not args.family or args.N is None:
            raise ValidationError("--family and --N are required "
                                  "(or pass --family-json)")
        spec = {"family": args.family, "N": args.N,
                "params": _parse_params(args.param), "shift": args.shift}
    options = {}
    for key in ("k", "gamma", "alpha_min", "alpha_max", "points", "rtol",
                "t0", "tmin", "eps", "nmax"):
        val = getattr(args, key, None)
        if val is not None:
            options[key] = val
    if getattr(args, "c_ladder", None) is not None:
        options["c_ladder"] = [float(x) for x in str(args.c_ladder).split(",")]
    if getattr(args, "profile_alpha", None):
        options["profile_alphas"] = [float(x) for x in args.profile_alpha]
    return RunConfig(command=args.command, family_spec=spec, options=options,
                     out_dir=args.out, seed=args.seed,
                     figures=not args.no_figures)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
    except (ValidationError, json.JSONDecodeError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
