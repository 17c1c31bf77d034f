"""Static matplotlib figures rendered next to the delimited output."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def curve_figure(curve, path):
    fig, ax = plt.subplots(figsize=(7, 4.5))
    a, l = curve.valid()
    ax.semilogx(a, l, "-", lw=1.2, color="tab:blue")
    ax.semilogx(a, l, ".", ms=3, color="tab:blue")
    if curve.lambda_star_ref is not None:
        ax.axhline(curve.lambda_star_ref, color="gray", ls="--", lw=0.8,
                   label=r"$\lambda_*$ = %.6g" % curve.lambda_star_ref)
    for lo, hi in curve.turning_brackets:
        ax.axvspan(lo, hi, color="tab:red", alpha=0.25)
    for c in curve.crossings:
        ax.axvline(c, color="tab:green", ls=":", lw=0.8)
    ax.set_xlabel(r"$\alpha = u(0)$")
    ax.set_ylabel(r"$\lambda(\alpha)$")
    ax.set_title(curve.family.label())
    if curve.lambda_star_ref is not None:
        ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def curve_oscillation_figure(curve, path):
    """|lambda - lambda*| on a log scale: makes the decaying folds visible."""
    if curve.lambda_star_ref is None:
        return None
    fig, ax = plt.subplots(figsize=(7, 4.5))
    a, l = curve.valid()
    d = np.abs(l - curve.lambda_star_ref)
    d = np.where(d > 0, d, np.nan)
    ax.loglog(a, d, ".-", lw=0.8, ms=3)
    ax.axhline(curve.hysteresis, color="gray", ls="--", lw=0.8,
               label="noise hysteresis")
    ax.set_xlabel(r"$\alpha$")
    ax.set_ylabel(r"$|\lambda(\alpha) - \lambda_*|$")
    ax.set_title(curve.family.label())
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def trajectory_figure(traj, path):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.plot(traj.t, traj.value, lw=1.0)
    env = traj.envelope_coeff / np.maximum(traj.t, 1e-9) ** traj.k
    ax1.plot(traj.t, env, "--", color="gray", lw=0.8, label="envelope")
    ax1.plot(traj.t, -env, "--", color="gray", lw=0.8)
    ax1.set_xlabel("t = -log r")
    ax1.set_ylabel(f"{traj.branch}(t)")
    ax1.legend(fontsize=8)
    ax2.plot(traj.t, traj.phi * (2.0 * traj.t) ** traj.k, lw=1.0)
    ax2.axhline(traj.gamma, color="gray", ls="--", lw=0.8,
                label=r"$\gamma$ = %.5g" % traj.gamma)
    ax2.set_xlabel("t")
    ax2.set_ylabel(r"$2^k t^k \, \phi(V)$")
    ax2.legend(fontsize=8)
    fig.suptitle(traj.family.label())
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def solution_figure(solution, path):
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.semilogx(solution.r_grid, solution.V, lw=1.2)
    ax.axvline(solution.sqrt_lambda_star, color="gray", ls="--", lw=0.8,
               label=r"$\sqrt{\lambda_*}$ = %.6g" % solution.sqrt_lambda_star)
    if solution.r_handoff:
        ax.axvline(solution.r_handoff, color="tab:orange", ls=":", lw=0.8,
                   label="handoff")
    ax.set_xlabel("r")
    ax.set_ylabel("V(r)")
    ax.set_title(solution.family.label())
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def gamma_figure(estimate, family_label, path):
    fig, ax = plt.subplots(figsize=(7, 4.5))
    u = [s[0] for s in estimate.samples]
    v = [s[1] for s in estimate.samples]
    ax.semilogx(u, v, "o-", ms=3, lw=0.9)
    ax.axhline(estimate.extrapolated, color="tab:red", ls="--", lw=0.9,
               label="extrapolated %.5g" % estimate.extrapolated)
    ax.set_xlabel("u")
    ax.set_ylabel(r"$(Ff' - q_{JL})\,(-\log F)^k$, k = %.3g" % estimate.k)
    ax.set_title(family_label)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def stability_figure(report, path):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    probes = report.get("annulusProbe", {}).get("perN", [])
    if probes:
        ns = [row["n"] for row in probes]
        margins = [row["logMargin"] for row in probes]
        fired = [row["unstable"] for row in probes]
        colors = ["tab:red" if f else "tab:blue" for f in fired]
        ax1.bar(ns, margins, color=colors)
        ax1.axhline(0.0, color="black", lw=0.8)
        ax1.set_xlabel("annulus index n")
        ax1.set_ylabel("log(gamma term) - log(margin)")
        ax1.set_title("annulus form sign (red = unstable)")
    sturm = report.get("sturmCounts", [])
    if sturm:
        ax2.semilogx([row["rMin"] for row in sturm],
                     [row["count"] for row in sturm], "o-")
        ax2.set_xlabel("r_min")
        ax2.set_ylabel("interior zeros")
        ax2.set_title("Sturm oscillation count")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def translation_figure(results, path):
    fig, ax = plt.subplots(figsize=(7, 4.5))
    cs = [c for c, _ in results]
    counts = [rep.turning_count for _, rep in results]
    ax.plot(cs, counts, "o-")
    ax.set_xlabel("shift c")
    ax.set_ylabel("confirmed turning brackets")
    ax.set_title("translation experiment")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path
