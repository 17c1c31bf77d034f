"""Stability evidence: the log-corrected Hardy inequality, explicit destabilizing
test functions on annuli with doubly-exponentially small radii, and Sturm
oscillation counts for the radial linearization.

All annulus machinery lives in the doubly-logarithmic variable
t = (eps/2) log(-log r): the support radii r_n = e^{-e^{2 pi n / eps}} underflow
every floating-point format already at n = 1, so r is never materialized.  In
t-coordinates the change of variables turns
    I(phi) - 1/4 int phi^2/(r log r)^2  into  N omega_N (eps/2) int xi'(t)^2 dt,
an exactly nonnegative square integral, and the annulus quadratic form into
closed trigonometric integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad, solve_ivp


def ball_volume(N):
    """Volume omega_N of the unit ball in R^N."""
    return math.pi ** (N / 2.0) / math.gamma(N / 2.0 + 1.0)


# ---------------------------------------------------------------------------
# potentials
# ---------------------------------------------------------------------------

@dataclass
class PotentialProfile:
    """Radial potential W(r) of the quadratic form, exposed as r^2 W(r).

    r^2 W is the quantity entering the log-radius form of the linearized
    equation and stays bounded where W itself overflows.
    """

    N: int
    source: str                  # "singular" | "regular" | "synthetic"
    r2W: callable                # r -> r^2 W(r)
    r_lo: float
    r_hi: float
    label: str = ""

    def W(self, r):
        return self.r2W(r) / (r * r)


def potential_theorem_form(N, k, gamma, r_hi=math.exp(-1.0)):
    """The refined singular-linearization potential
    (N-2)^2/(4 r^2) + gamma sqrt(N-1) / (2^{k-2} r^2 (-log r)^k),
    valid as r -> 0; restricted to r <= r_hi where the log correction is meaningful.
    """
    hardy = (N - 2.0) ** 2 / 4.0
    amp = gamma * math.sqrt(N - 1.0) / 2.0 ** (k - 2.0)

    def r2W(r):
        return hardy + amp / (-math.log(r)) ** k

    return PotentialProfile(N=N, source="singular", r2W=r2W,
                            r_lo=0.0, r_hi=r_hi,
                            label=f"theorem-form k={k:g} gamma={gamma:g}")


def potential_from_singular(solution):
    """W(r) = lambda* f'(U*(r)) from a reconstructed singular solution."""
    fam = solution.family
    lam = solution.lambda_star
    sq = solution.sqrt_lambda_star

    def r2W(r):
        rho = sq * r
        u = solution.V_of(rho)
        # r^2 lambda* f'(u) = rho^2 f'(u), evaluated log-safely
        return math.exp(fam.log_f(u) + 2.0 * math.log(rho)) * fam.fp_over_f(u)

    r_lo = float(np.min(solution.r_grid)) / sq
    return PotentialProfile(N=fam.N, source="singular", r2W=r2W,
                            r_lo=r_lo, r_hi=1.0,
                            label=f"singular {fam.label()}")


def potential_from_ball_solution(ball):
    """W(r) = lambda f'(u(r)) for a regular solution on the unit ball."""
    fam = ball.profile.family
    lam = ball.lam

    def r2W(r):
        u, _ = ball.u_at(r)
        return lam * math.exp(fam.log_f(u) + 2.0 * math.log(r)) * fam.fp_over_f(u)

    return PotentialProfile(N=fam.N, source="regular", r2W=r2W,
                            r_lo=0.0, r_hi=1.0,
                            label=f"regular {fam.label()} alpha={ball.alpha:g}")


def potential_euler(N, mu):
    """Pure inverse-square potential W = mu / r^2 (calibration case)."""
    return PotentialProfile(N=N, source="synthetic", r2W=lambda r: mu,
                            r_lo=0.0, r_hi=1.0, label=f"euler mu={mu:g}")


# ---------------------------------------------------------------------------
# test functions and the Hardy deficit
# ---------------------------------------------------------------------------

@dataclass
class TestFunction:
    """Radial test function in the doubly-logarithmic variable.

    Represents phi = r^{(2-N)/2} (-log r)^{1/2} xi(t); only xi is stored.  Knots
    define a piecewise-linear xi vanishing at both ends, or `xi_smooth`/`dxi_smooth`
    provide a smooth profile (the annulus construction uses sin t).
    """

    __test__ = False  # not a pytest case despite the name

    epsilon: float
    t: np.ndarray
    xi: np.ndarray
    xi_smooth: callable | None = None
    dxi_smooth: callable | None = None
    n: int | None = None

    @classmethod
    def annulus_sine(cls, epsilon, n):
        """xi = sin(t) supported on [n pi, (n+1) pi]: the destabilizing bump."""
        t = np.linspace(n * math.pi, (n + 1) * math.pi, 181)
        return cls(epsilon=epsilon, t=t, xi=np.sin(t),
                   xi_smooth=math.sin, dxi_smooth=math.cos, n=n)

    @classmethod
    def random_piecewise_linear(cls, rng, epsilon=None):
        eps = float(epsilon if epsilon is not None else rng.uniform(0.1, 0.9))
        t_lo = rng.uniform(0.0, 30.0)
        width = rng.uniform(0.5, 10.0)
        m = int(rng.integers(3, 40))
        t = np.sort(np.concatenate([[t_lo, t_lo + width],
                                    rng.uniform(t_lo, t_lo + width, m)]))
        xi = rng.standard_normal(len(t))
        xi[0] = xi[-1] = 0.0
        return cls(epsilon=eps, t=t, xi=xi)


def hardy_deficit(potential_or_N, test_fn):
    """I(phi) - 1/4 int phi^2 / (r log r)^2 for a transformed test function.

    Computed through the change-of-variables identity, which renders it the
    square integral N omega_N (eps/2) int xi'(t)^2 dt; nonnegative by construction
    up to quadrature roundoff (>= -1e-10 always).
    """
    N = getattr(potential_or_N, "N", potential_or_N)
    eps = test_fn.epsilon
    pref = N * ball_volume(N) * eps / 2.0
    if test_fn.dxi_smooth is not None:
        val, _ = quad(lambda t: test_fn.dxi_smooth(t) ** 2,
                      test_fn.t[0], test_fn.t[-1], limit=200)
        return pref * val
    dt = np.diff(test_fn.t)
    dxi = np.diff(test_fn.xi)
    good = dt > 0
    return pref * float(np.sum(dxi[good] ** 2 / dt[good]))


def hardy_deficit_slog_route(N, test_fn, panels=40):
    """The same deficit as N omega_N int s xi_s^2 ds in s = -log r, quadrature on
    geometric panels: an independent evaluation route for cross-checking."""
    if test_fn.dxi_smooth is None:
        raise ValueError("slog route needs a smooth test function")
    eps = test_fn.epsilon
    s_lo = math.exp(2.0 * test_fn.t[0] / eps)
    s_hi = math.exp(2.0 * test_fn.t[-1] / eps)

    def integrand(s):
        t = 0.5 * eps * math.log(s)
        xi_s = test_fn.dxi_smooth(t) * (0.5 * eps / s)
        return s * xi_s ** 2

    edges = np.geomspace(s_lo, s_hi, panels + 1)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = quad(integrand, a, b, limit=100)
        total += val
    return N * ball_volume(N) * total


def critical_test_value(epsilon, n, N):
    """Value of I(phi_n) - (1+eps)/4 int phi_n^2/(r log r)^2 on the sine bump,
    evaluated by quadrature in t; equals (N omega_N / 2)(eps - 1)(pi/2) < 0."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    a, b = n * math.pi, (n + 1) * math.pi
    i_cos, _ = quad(lambda t: math.cos(t) ** 2, a, b, limit=200)
    i_sin, _ = quad(lambda t: math.sin(t) ** 2, a, b, limit=200)
    w = N * ball_volume(N)
    return 0.5 * w * (epsilon * i_cos - i_sin)


def annulus_quadratic_form(N, k, gamma, epsilon, n):
    """Q(phi_n) for the perturbed singular potential, entirely in t-coordinates.

    Q = N omega_N [ (eps/2) I_cos + 1/(2 eps) I_sin ]
        - gamma sqrt(N-1) 2^{3-k} (N omega_N / eps) J_n,
    J_n = int sin^2(t) e^{2(2-k) t/eps} dt over [n pi, (n+1) pi].  The growing
    factor is split off exactly so that the sign is decided in log space even when
    J_n overflows.  Returns (sign, log|gamma-term| - log|hardy-margin|).
    """
    a, b = n * math.pi, (n + 1) * math.pi
    i_cos, _ = quad(lambda t: math.cos(t) ** 2, a, b, limit=200)
    i_sin, _ = quad(lambda t: math.sin(t) ** 2, a, b, limit=200)
    margin = 0.5 * epsilon * i_cos + 0.5 / epsilon * i_sin   # > 0 always
    if gamma == 0.0:
        return 1, -math.inf
    growth = 2.0 * (2.0 - k) / epsilon
    j_tau, _ = quad(lambda t: math.sin(t) ** 2 * math.exp(growth * t),
                    0.0, math.pi, limit=200)
    log_term = (math.log(abs(gamma) * math.sqrt(N - 1.0) * 2.0 ** (3.0 - k)
                         / epsilon * j_tau) + growth * n * math.pi)
    log_margin = math.log(margin)
    if gamma < 0.0:
        return 1, log_term - log_margin
    return (1 if log_term < log_margin else -1), log_term - log_margin


def annulus_instability_probe(potential, k, gamma, epsilon, n):
    """True when the annulus quadratic form is negative: V unstable on the n-th
    doubly-exponentially small annulus."""
    N = getattr(potential, "N", potential)
    if isinstance(potential, PotentialProfile) and potential.source != "singular":
        raise ValueError("annulus probe applies to singular-solution potentials")
    sign, _ = annulus_quadratic_form(N, k, gamma, epsilon, n)
    return sign < 0


def first_unstable_annulus(potential, k, gamma, epsilon=0.5, n_max=10):
    """Smallest n <= n_max with a negative annulus form.

    Returns (n, status) with status "fired", "none", or "inconclusive" (side-(A)
    parameters where the growing term had not yet overtaken the margin by n_max).
    """
    for n in range(1, n_max + 1):
        if annulus_instability_probe(potential, k, gamma, epsilon, n):
            return n, "fired"
    side_a = (0.0 < k < 2.0 and gamma > 0.0)
    return None, ("inconclusive" if side_a else "none")


# ---------------------------------------------------------------------------
# Sturm oscillation counts
# ---------------------------------------------------------------------------

def sturm_negative_count(potential, r_min, r_hi=None, rtol=1e-10):
    """Interior zeros of the radial linearized equation on [r_min, r_hi].

    Integrates w'' + (N-1)/r w' + W w = 0 in tau = log r (where it reads
    w_tt + (N-2) w_t + r^2 W w = 0) from a start aligned with the recessive
    indicial branch of the frozen Euler potential at r_min; the zero count is a
    lower bound for the radial Morse index on the truncated domain.
    """
    N = potential.N
    if r_hi is None:
        r_hi = potential.r_hi
    if not potential.r_lo <= r_min < r_hi:
        raise ValueError(f"r_min={r_min:g} outside potential domain "
                         f"[{potential.r_lo:g}, {r_hi:g})")
    tau0, tau1 = math.log(r_min), math.log(r_hi)
    mu = potential.r2W(r_min)
    disc = (N - 2.0) ** 2 - 4.0 * mu
    if disc >= 0.0:
        sigma = 0.5 * (-(N - 2.0) + math.sqrt(disc))
    else:
        sigma = -0.5 * (N - 2.0)
    r2W = potential.r2W

    def rhs(tau, y):
        return (y[1], -(N - 2.0) * y[1] - r2W(math.exp(tau)) * y[0])

    def zero(tau, y):
        return y[0]
    zero.terminal = False

    sol = solve_ivp(rhs, (tau0, tau1), [1.0, sigma], method="DOP853",
                    rtol=rtol, atol=1e-300, events=zero, max_step=0.1)
    if sol.status != 0:
        raise RuntimeError(f"Sturm integration failed near r_min={r_min:g}: "
                           f"{sol.message}")
    zeros = sol.t_events[0]
    interior = (zeros > tau0 + 1e-12) & (zeros < tau1 - 1e-12)
    return int(np.count_nonzero(interior))


def regular_morse_evidence(family, alpha, r_min=1e-6, rtol=1e-10):
    """Sturm count for W = lambda(alpha) f'(u(r, alpha)) on [r_min, 1]."""
    from .shooting import integrate_radial, scale_to_ball

    ball = scale_to_ball(integrate_radial(family, alpha))
    pot = potential_from_ball_solution(ball)
    return sturm_negative_count(pot, r_min)


def deficit_random_suite(N_values=(10, 12), count=1000, seed=20250809):
    """Fixed-seed random piecewise-linear suite; returns the summary dict."""
    rng = np.random.default_rng(seed)
    min_deficit = math.inf
    for i in range(count):
        N = int(rng.choice(list(N_values)))
        tf = TestFunction.random_piecewise_linear(rng)
        d = hardy_deficit(N, tf)
        min_deficit = min(min_deficit, d)
    return {"cases": count, "minDeficit": min_deficit,
            "nonnegative": bool(min_deficit >= -1e-10), "seed": seed}
