"""Radial shooting for v'' + (N-1)/r v' + f(v) = 0, v(0)=alpha, v'(0)=0.

The origin is singular; integration starts from a second-order series
v = alpha - f(alpha) r^2/(2N) + f(alpha) f'(alpha) r^4/(8N(N+2)) at a radius r0
small enough that the quartic term is below 1e-14 alpha. The first zero R(alpha)
is located by event detection on the dense output; lambda(alpha) = R^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .families import NonlinearityFamily


class ShootingError(RuntimeError):
    """Integration failure (step-size collapse or range exhaustion)."""


class NoZeroCrossing(ShootingError):
    """Profile did not cross zero before r_max; increase r_max."""


@dataclass
class RadialProfile:
    """One monotone radial solution sample of the free problem."""

    alpha: float
    family: NonlinearityFamily
    r: np.ndarray
    v: np.ndarray
    v_prime: np.ndarray
    first_zero: float | None
    r_start: float
    sol: object = field(repr=False, default=None)

    @property
    def lam(self):
        """lambda(alpha) = R(alpha)^2."""
        if self.first_zero is None:
            raise NoZeroCrossing(f"no zero crossing up to r={self.r[-1]:g} "
                                 f"for alpha={self.alpha:g}")
        return self.first_zero ** 2

    def v_at(self, r):
        """Dense-output evaluation of (v, v') at radius r (scalar or array)."""
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        out_v = np.empty_like(r)
        out_w = np.empty_like(r)
        inside = r < self.r_start
        if inside.any():
            a = self.alpha
            f_a = self.family.f(a)
            fp_a = self.family.f_prime(a)
            N = self.family.N
            rr = r[inside]
            out_v[inside] = a - f_a * rr**2 / (2 * N) \
                + f_a * fp_a * rr**4 / (8 * N * (N + 2))
            out_w[inside] = -f_a * rr / N + f_a * fp_a * rr**3 / (2 * N * (N + 2))
        if (~inside).any():
            vals = self.sol(r[~inside])
            out_v[~inside] = vals[0]
            out_w[~inside] = vals[1]
        if scalar:
            return float(out_v[0]), float(out_w[0])
        return out_v, out_w


def _series_start(family, alpha):
    """Start radius and state from the series solution near the singular origin."""
    N = family.N
    lf = family.log_f(alpha)
    bp = family.fp_over_f(alpha)
    log_scale = 0.5 * (math.log(2.0 * N * max(alpha, 1e-12)) - lf)
    if bp > 0.0:
        log_a4 = 2.0 * lf + math.log(bp) - math.log(8.0 * N * (N + 2.0))
        log_r0 = 0.25 * (math.log(1e-14 * max(alpha, 1e-12)) - log_a4)
    else:
        log_r0 = log_scale + math.log(1e-4)
    log_r0 = min(log_r0, log_scale + math.log(0.1))
    r0 = math.exp(log_r0)
    d2 = math.exp(lf + 2.0 * log_r0) / (2.0 * N)
    d4 = math.exp(2.0 * lf + (math.log(bp) if bp > 0 else -math.inf)
                  + 4.0 * log_r0) / (8.0 * N * (N + 2.0)) if bp > 0 else 0.0
    v0 = alpha - d2 + d4
    w0 = (-2.0 * d2 + 4.0 * d4) / r0
    return r0, v0, w0


def integrate_radial(family, alpha, r_max=50.0, rtol=1e-12):
    """Integrate the free radial problem out to its first zero (or r_max).

    Local error is controlled relatively at rtol (default well below the 1e-10
    contract); the zero of v is located on the dense output by the solver's
    event root-finder.
    """
    if alpha <= 0.0:
        raise ShootingError("alpha must be positive")
    cap = family.alpha_cap
    if alpha > cap:
        raise ShootingError(f"alpha={alpha:g} above the overflow cap {cap:g} "
                            f"for {family.label()}")
    N = family.N
    f = family.f
    r0, v0, w0 = _series_start(family, alpha)

    def rhs(r, y):
        return (y[1], -(N - 1.0) / r * y[1] - f(y[0]))

    def crossing(r, y):
        return y[0]
    crossing.terminal = True
    crossing.direction = -1.0

    atol = [1e-14 * max(alpha, 1.0), 1e-14 * max(abs(w0), 1.0)]
    sol = solve_ivp(rhs, (r0, r_max), [v0, w0], method="DOP853",
                    rtol=rtol, atol=atol, dense_output=True,
                    events=crossing, first_step=r0 * 0.1)
    if sol.status == -1:
        raise ShootingError(f"integration failed for alpha={alpha:g}: {sol.message}")
    first_zero = float(sol.t_events[0][0]) if sol.t_events[0].size else None
    return RadialProfile(alpha=float(alpha), family=family,
                         r=sol.t, v=sol.y[0], v_prime=sol.y[1],
                         first_zero=first_zero, r_start=r0, sol=sol.sol)


def first_zero(profile):
    """R(alpha), the first zero of the profile; raises if no crossing was found."""
    if profile.first_zero is None:
        raise NoZeroCrossing(
            f"profile alpha={profile.alpha:g} has no zero up to r={profile.r[-1]:g}")
    return profile.first_zero


@dataclass
class BallSolution:
    """(lambda, u) on the unit ball obtained by rescaling a free profile."""

    lam: float
    alpha: float
    rho: np.ndarray
    u: np.ndarray
    u_prime: np.ndarray
    profile: RadialProfile = field(repr=False, default=None)

    def u_at(self, rho):
        R = math.sqrt(self.lam)
        v, w = self.profile.v_at(np.asarray(rho, dtype=float) * R)
        return v, w * R


def scale_to_ball(profile, n_points=400):
    """Map v(r) to u(rho) = v(R rho) on [0, 1]; -Delta u = lambda f(u), lambda = R^2."""
    R = first_zero(profile)
    rho = np.linspace(0.0, 1.0, n_points)
    v, w = profile.v_at(rho * R)
    v[-1] = 0.0
    return BallSolution(lam=R * R, alpha=profile.alpha, rho=rho,
                        u=v, u_prime=w * R, profile=profile)


def lambda_of_alpha(family, alpha, r_max=50.0, rtol=1e-12):
    """Convenience wrapper: one shooting solve, returning lambda(alpha)."""
    return integrate_radial(family, alpha, r_max=r_max, rtol=rtol).lam
