"""Nonlinearity families: log-space evaluators, the anti-derivative F of 1/f with
analytic tails, inversion, and estimators for the structural constants q, k, gamma.

Everything is evaluated through log f, f'/f and f''/f' so that doubly-exponential
growth (f = e^{e^u} and shifted variants) stays computable far beyond the overflow
point of f itself.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import IntegrationWarning, quad

LOG_F_ALPHA_CAP = 690.0  # double-precision guard: f(alpha) must stay representable


class FamilyError(ValueError):
    """Invalid family spec or evaluation outside the admissible range."""


class TailDisagreement(RuntimeError):
    """Analytic F-tail and extended quadrature disagree beyond tolerance."""


def _exp(x):
    # math.exp raises OverflowError instead of returning inf
    if x > 709.0:
        return math.inf
    return math.exp(x)


@dataclass
class _Core:
    """Raw evaluators of one catalogue family on its natural domain."""

    name: str
    log_f: callable          # u -> log f(u)
    fp_over_f: callable      # u -> f'(u)/f(u)
    fpp_over_fp: callable    # u -> f''(u)/f'(u)
    u_floor: float           # below this, a C^1 exponential splice takes over
    tail_kind: str           # "closed" | "exp" | "power" | "divergent" | "constant"
    q_exact: float | None = None
    power_p: float | None = None        # for tail_kind == "power" (and closed powers)
    log_F_closed: callable | None = None
    inv_neg_log_F_closed: callable | None = None
    Ff_closed: callable | None = None
    declared_k: float | None = None
    declared_gamma: float | None = None
    gamma_ell_cap: float = 1.0e5        # largest -log F sampled by estimate_gamma
    q_u_cap: float = 1.0e12             # largest u sampled by estimate_q
    exact_singular: dict | None = None  # closed-form singular solution, if any


# ---------------------------------------------------------------------------
# catalogue builders
# ---------------------------------------------------------------------------

def _build_exp(N, params, dim):
    core = _Core(
        name="exp",
        log_f=lambda u: u,
        fp_over_f=lambda u: 1.0,
        fpp_over_fp=lambda u: 1.0,
        u_floor=-math.inf,
        tail_kind="closed",
        q_exact=1.0,
        log_F_closed=lambda u: -u,
        inv_neg_log_F_closed=lambda ell: ell,
        Ff_closed=lambda u: 1.0,
        # V = log(2(N-2)/r^2) solves -Delta V = e^V in any dimension
        exact_singular={"lambda_star": 2.0 * (N - 2.0),
                        "V": lambda r: math.log(2.0 * (N - 2.0)) - 2.0 * math.log(r),
                        "V_prime": lambda r: -2.0 / r},
    )
    if N == 10:
        core.declared_k, core.declared_gamma = 2.0, 0.0
    return core


def _build_power(N, params, dim):
    p = float(params["p"])
    if p <= 1.0:
        raise FamilyError("power family needs p > 1")
    lp = math.log(p - 1.0)
    core = _Core(
        name="power",
        log_f=lambda u: p * math.log1p(u),
        fp_over_f=lambda u: p / (1.0 + u),
        fpp_over_fp=lambda u: (p - 1.0) / (1.0 + u),
        u_floor=-0.9,
        tail_kind="closed",
        q_exact=p / (p - 1.0),
        power_p=p,
        log_F_closed=lambda u: (1.0 - p) * math.log1p(u) - lp,
        inv_neg_log_F_closed=lambda ell: math.expm1((ell - lp) / (p - 1.0)),
        Ff_closed=lambda u: p / (p - 1.0),
    )
    if math.isfinite(dim.p_jl) and abs(p - dim.p_jl) < 1e-9:
        core.declared_k, core.declared_gamma = 2.0, 0.0
    return core


def _build_exp_exp(N, params, dim):
    core = _Core(
        name="exp_exp",
        log_f=lambda u: _exp(u),
        fp_over_f=lambda u: _exp(u),
        fpp_over_fp=lambda u: 1.0 + _exp(u),
        u_floor=-math.inf,
        tail_kind="exp",
        q_exact=1.0,
        gamma_ell_cap=1.0e5,
        q_u_cap=30.0,
    )
    if N == 10:
        core.declared_k, core.declared_gamma = 1.0, -1.0
    return core


def _build_exp_log_pow(N, params, dim):
    nu = float(params["nu"])
    if nu <= 1.0:
        raise FamilyError("exp_log_pow needs nu > 1")

    def log_f(u):
        return math.log1p(u) ** nu

    def fp_over_f(u):
        L = math.log1p(u)
        return nu * L ** (nu - 1.0) / (1.0 + u)

    def fpp_over_fp(u):
        # f''/f' = b' + b''/b' with b = (log(1+u))^nu
        L = math.log1p(u)
        bp = nu * L ** (nu - 1.0) / (1.0 + u)
        bpp_over_bp = (nu - 1.0) / ((1.0 + u) * L) - 1.0 / (1.0 + u)
        return bp + bpp_over_bp

    core = _Core("exp_log_pow", log_f, fp_over_f, fpp_over_fp,
                 u_floor=0.5, tail_kind="exp", q_exact=1.0)
    if N == 10:
        core.declared_k, core.declared_gamma = 1.0 - 1.0 / nu, 1.0 / nu
    return core


def _build_exp_pow(N, params, dim):
    nu = float(params["nu"])
    if nu <= 0.0 or nu == 1.0:
        raise FamilyError("exp_pow needs nu in (0,1) or nu > 1")

    def log_f(u):
        return (1.0 + u) ** nu

    def fp_over_f(u):
        return nu * (1.0 + u) ** (nu - 1.0)

    def fpp_over_fp(u):
        return nu * (1.0 + u) ** (nu - 1.0) + (nu - 1.0) / (1.0 + u)

    core = _Core("exp_pow", log_f, fp_over_f, fpp_over_fp,
                 u_floor=-0.5, tail_kind="exp", q_exact=1.0)
    if N == 10:
        core.declared_k, core.declared_gamma = 1.0, (1.0 - nu) / nu
    return core


def _build_exp_u_plus_pow(N, params, dim):
    beta, nu = float(params["beta"]), float(params["nu"])
    if not 0.0 < nu < 1.0:
        raise FamilyError("exp_u_plus_pow needs 0 < nu < 1")

    def log_f(u):
        return u + beta * (1.0 + u) ** nu

    def fp_over_f(u):
        return 1.0 + beta * nu * (1.0 + u) ** (nu - 1.0)

    def fpp_over_fp(u):
        bp = 1.0 + beta * nu * (1.0 + u) ** (nu - 1.0)
        bpp = beta * nu * (nu - 1.0) * (1.0 + u) ** (nu - 2.0)
        return bp + bpp / bp

    core = _Core("exp_u_plus_pow", log_f, fp_over_f, fpp_over_fp,
                 u_floor=-0.5, tail_kind="exp", q_exact=1.0,
                 gamma_ell_cap=3.0e4)
    if N == 10:
        core.declared_k = 2.0 - nu
        core.declared_gamma = beta * nu * (1.0 - nu)
    return core


def _build_exp_times_pow(N, params, dim):
    nu = float(params["nu"])

    def log_f(u):
        return u + nu * math.log1p(u)

    def fp_over_f(u):
        return 1.0 + nu / (1.0 + u)

    def fpp_over_fp(u):
        bp = 1.0 + nu / (1.0 + u)
        bpp = -nu / (1.0 + u) ** 2
        return bp + bpp / bp

    core = _Core("exp_times_pow", log_f, fp_over_f, fpp_over_fp,
                 u_floor=-0.9, tail_kind="exp", q_exact=1.0,
                 gamma_ell_cap=3.0e4)
    if N == 10:
        core.declared_k, core.declared_gamma = 2.0, nu
    return core


def _require_pjl(N, dim, name):
    if not math.isfinite(dim.p_jl):
        raise FamilyError(f"{name} needs N >= 11 (p_jl is infinite for N <= 10)")
    return dim.p_jl


def _build_power_jl_log_shift(N, params, dim):
    beta, nu = float(params["beta"]), float(params["nu"])
    p = _require_pjl(N, dim, "power_jl_log_shift")
    if not 0.0 < nu <= 1.0:
        raise FamilyError("power_jl_log_shift needs 0 < nu <= 1")
    if beta <= -math.log(2.0) ** nu:
        raise FamilyError("power_jl_log_shift needs beta > -(log 2)^nu")

    def zeta(u):
        return 1.0 + beta * math.log(2.0 + u) ** (-nu)

    def dlog_zeta(u):
        L = math.log(2.0 + u)
        return -beta * nu * L ** (-nu - 1.0) / ((2.0 + u) * zeta(u))

    def log_f(u):
        return p * math.log1p(u) + math.log(zeta(u))

    def fp_over_f(u):
        return p / (1.0 + u) + dlog_zeta(u)

    def fpp_over_fp(u):
        h = 1e-6 * (1.0 + abs(u))
        bp = fp_over_f(u)
        bpp = (fp_over_f(u + h) - fp_over_f(u - h)) / (2.0 * h)
        return bp + bpp / bp

    core = _Core("power_jl_log_shift", log_f, fp_over_f, fpp_over_fp,
                 u_floor=-0.5, tail_kind="power", q_exact=p / (p - 1.0),
                 power_p=p)
    core.declared_k = 1.0 + nu
    core.declared_gamma = nu * beta * (p - 1.0) ** (nu - 1.0)
    return core


def _build_power_jl_exp_logpow(N, params, dim):
    beta, nu = float(params["beta"]), float(params["nu"])
    p = _require_pjl(N, dim, "power_jl_exp_logpow")
    if not 0.0 < nu < 1.0:
        raise FamilyError("power_jl_exp_logpow needs 0 < nu < 1")

    def log_f(u):
        return p * math.log1p(u) + beta * math.log1p(u) ** nu

    def fp_over_f(u):
        L = math.log1p(u)
        return (p + beta * nu * L ** (nu - 1.0)) / (1.0 + u)

    def fpp_over_fp(u):
        L = math.log1p(u)
        bp = fp_over_f(u)
        bpp = (beta * nu * (nu - 1.0) * L ** (nu - 2.0)
               - p - beta * nu * L ** (nu - 1.0)) / (1.0 + u) ** 2
        return bp + bpp / bp

    core = _Core("power_jl_exp_logpow", log_f, fp_over_f, fpp_over_fp,
                 u_floor=0.5, tail_kind="power", q_exact=p / (p - 1.0),
                 power_p=p)
    core.declared_k = 1.0 - nu
    core.declared_gamma = -nu * beta * (p - 1.0) ** (-nu - 1.0)
    return core


def _build_power_jl_times_logpow(N, params, dim):
    nu = float(params["nu"])
    p = _require_pjl(N, dim, "power_jl_times_logpow")

    def log_f(u):
        return p * math.log1p(u) + nu * math.log(math.log(2.0 + u))

    def fp_over_f(u):
        L = math.log(2.0 + u)
        return p / (1.0 + u) + nu / ((2.0 + u) * L)

    def fpp_over_fp(u):
        L = math.log(2.0 + u)
        bp = fp_over_f(u)
        bpp = (-p / (1.0 + u) ** 2
               - nu * (1.0 + 1.0 / L) / (((2.0 + u) ** 2) * L))
        return bp + bpp / bp

    core = _Core("power_jl_times_logpow", log_f, fp_over_f, fpp_over_fp,
                 u_floor=-0.5, tail_kind="power", q_exact=p / (p - 1.0),
                 power_p=p)
    core.declared_k = 1.0
    core.declared_gamma = -nu / (p - 1.0)
    return core


def _build_jl_gamma(N, params, dim):
    # critically-growing family with tunable index gamma: e^u (1+u)^gamma at N = 10,
    # (1+u)^{p_jl} (1 + gamma/log(2+u)) for N >= 11
    gamma = float(params["gamma"])
    if N == 10:
        core = _build_exp_times_pow(N, {"nu": gamma}, dim)
    else:
        core = _build_power_jl_log_shift(N, {"beta": gamma, "nu": 1.0}, dim)
    core.name = "jl_gamma"
    core.declared_k, core.declared_gamma = 2.0, gamma
    return core


def _build_constant(N, params, dim):
    return _Core("constant",
                 log_f=lambda u: 0.0,
                 fp_over_f=lambda u: 0.0,
                 fpp_over_fp=lambda u: 0.0,
                 u_floor=-math.inf, tail_kind="constant")


def _build_linear(N, params, dim):
    return _Core("linear",
                 log_f=lambda u: math.log1p(u),
                 fp_over_f=lambda u: 1.0 / (1.0 + u),
                 fpp_over_fp=lambda u: 0.0,
                 u_floor=-0.9, tail_kind="divergent")


FAMILY_BUILDERS = {
    "exp": _build_exp,
    "power": _build_power,
    "exp_exp": _build_exp_exp,
    "exp_log_pow": _build_exp_log_pow,
    "exp_pow": _build_exp_pow,
    "exp_u_plus_pow": _build_exp_u_plus_pow,
    "exp_times_pow": _build_exp_times_pow,
    "power_jl_log_shift": _build_power_jl_log_shift,
    "power_jl_exp_logpow": _build_power_jl_exp_logpow,
    "power_jl_times_logpow": _build_power_jl_times_logpow,
    "jl_gamma": _build_jl_gamma,
    "constant": _build_constant,
    "linear": _build_linear,
}


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass
class GammaEstimate:
    k: float
    samples: list            # (u, (F f' - q_jl)(-log F)^k) pairs
    extrapolated: float
    error_bar: float
    converged: bool
    warning: str | None = None

    def to_dict(self):
        return {
            "k": self.k,
            "samples": [[u, v] for u, v in self.samples],
            "extrapolatedGamma": self.extrapolated,
            "errorBar": self.error_bar,
            "converged": self.converged,
            "warning": self.warning,
        }


@dataclass
class GrowthReport:
    q_estimate: float
    q_error: float
    p0: float | None
    u0: float | None
    C0: float | None
    C1: float | None
    checks: dict
    failure: str | None = None
    gamma_estimate: GammaEstimate | None = None

    @property
    def passed(self):
        return all(self.checks.values())

    def to_dict(self):
        d = {
            "qEstimate": self.q_estimate,
            "qErrorBar": self.q_error,
            "p0": self.p0,
            "u0": self.u0,
            "C0": self.C0,
            "C1": self.C1,
            "checks": dict(self.checks),
            "failure": self.failure,
        }
        if self.gamma_estimate is not None:
            d["gammaEstimateAtK"] = self.gamma_estimate.to_dict()["samples"]
            d["extrapolatedGamma"] = self.gamma_estimate.extrapolated
        return d


def _extrapolate(h, vals):
    """Extrapolate vals(h) to h -> 0; error bar is the spread of the last three fits."""
    h = np.asarray(h, dtype=float)
    vals = np.asarray(vals, dtype=float)
    keep = np.isfinite(vals)
    h, vals = h[keep], vals[keep]
    n = len(vals)
    if n == 0:
        return math.nan, math.inf, False
    if n < 4:
        return float(vals[-1]), float(abs(vals[-1] - vals[0]) + 1e-30), False
    # h decreases along the grid; fit low-degree polynomials on trailing windows
    extrapolants = []
    for j in (n - 2, n - 1, n):
        window = slice(max(0, j - 10), j)
        deg = 2 if j - max(0, j - 10) >= 6 else 1
        coeff = np.polyfit(h[window], vals[window], deg)
        extrapolants.append(float(np.polyval(coeff, 0.0)))
    value = extrapolants[-1]
    err = max(extrapolants) - min(extrapolants)
    raw_step = abs(vals[-1] - vals[-2])
    # superpolynomially-converged sequences (collapsing slopes) defeat polynomial
    # extrapolation; detect them and keep the raw tail value instead
    tail = slice(max(0, n - 7), n)
    dh = np.diff(h[tail])
    dv = np.diff(vals[tail])
    good = np.abs(dh) > 0
    slopes = np.abs(dv[good] / dh[good])
    if len(slopes) >= 3 and slopes.max() > 0 and slopes[-1] / slopes.max() < 0.2:
        value = float(vals[-1])
        err = 4.0 * raw_step + 1e-15
    err = max(err, 0.1 * raw_step)
    converged = bool(err < 0.02 + 0.05 * abs(value))
    return float(value), float(err), converged


# ---------------------------------------------------------------------------
# the family object
# ---------------------------------------------------------------------------

class NonlinearityFamily:
    """A nonlinearity f with log-space evaluators, F machinery and constants.

    Parameters mirror the external JSON spec: name, dimension N, family parameters,
    and a translation shift c >= 0 realizing f_c(u) = f(u + c).
    """

    def __init__(self, name, N, params=None, shift=0.0):
        from .dimension import DimensionConstants

        if name not in FAMILY_BUILDERS:
            raise FamilyError(f"unknown family {name!r}; known: {sorted(FAMILY_BUILDERS)}")
        if shift < 0:
            raise FamilyError("shift must be >= 0")
        self.name = name
        self.N = int(N)
        self.params = dict(params or {})
        self.shift = float(shift)
        self.dim = DimensionConstants(self.N)
        try:
            self._core = FAMILY_BUILDERS[name](self.N, self.params, self.dim)
        except KeyError as exc:
            raise FamilyError(f"family {name!r} is missing parameter {exc}") from exc
        self._splice_at = self._core.u_floor
        if math.isfinite(self._splice_at):
            self._splice_logf = self._core.log_f(self._splice_at)
            self._splice_rate = self._core.fp_over_f(self._splice_at)
        self._log_F_cache = {}
        self._alpha_cap = None
        self._validate()

    # -- basic evaluators ---------------------------------------------------

    def _split(self, u):
        """Shifted coordinate plus whether the C^1 extension splice applies."""
        s = u + self.shift
        return s, math.isfinite(self._splice_at) and s < self._splice_at

    def log_f(self, u):
        s, spliced = self._split(u)
        if spliced:
            return self._splice_logf + self._splice_rate * (s - self._splice_at)
        return self._core.log_f(s)

    def fp_over_f(self, u):
        s, spliced = self._split(u)
        if spliced:
            return self._splice_rate
        return self._core.fp_over_f(s)

    def fpp_over_fp(self, u):
        s, spliced = self._split(u)
        if spliced:
            return self._splice_rate
        return self._core.fpp_over_fp(s)

    def f(self, u):
        return _exp(self.log_f(u))

    def f_prime(self, u):
        return self.f(u) * self.fp_over_f(u)

    def f_second(self, u):
        return self.f_prime(u) * self.fpp_over_fp(u)

    def eval_log_f(self, u):
        """log f(u) on the admissible range u >= -shift (domain error below)."""
        if u < -self.shift - 1e-12:
            raise FamilyError(f"u={u} below admissible range (u >= {-self.shift})")
        return self.log_f(u)

    @property
    def admissible_min(self):
        return -self.shift

    @property
    def q_exact(self):
        return self._core.q_exact

    @property
    def declared_k(self):
        return self._core.declared_k

    @property
    def declared_gamma(self):
        return self._core.declared_gamma

    @property
    def tail_kind(self):
        return self._core.tail_kind

    @property
    def exact_singular(self):
        return self._core.exact_singular

    def _validate(self):
        for u in (0.0, 0.5, 1.0, 10.0, 100.0):
            lf = self.log_f(u)
            if not math.isfinite(lf) and lf < 700:
                raise FamilyError(f"log f not finite at u={u} for {self.name}")
            if not (math.isfinite(self.fp_over_f(u)) or self.log_f(u) > 700):
                raise FamilyError(f"f'/f not finite at u={u} for {self.name}")

    def with_shift(self, c):
        return NonlinearityFamily(self.name, self.N, self.params, shift=self.shift + c)

    def spec_dict(self):
        return {"family": self.name, "N": self.N, "params": dict(self.params),
                "shift": self.shift}

    def label(self):
        ps = ",".join(f"{k}={v:g}" for k, v in sorted(self.params.items()))
        tag = f"{self.name}({ps})" if ps else self.name
        if self.shift:
            tag += f"+c{self.shift:g}"
        return f"{tag}_N{self.N}"

    @property
    def alpha_cap(self):
        """Largest admissible center value: log f(alpha) <= 690."""
        if self._alpha_cap is None:
            if self.log_f(1e300) <= LOG_F_ALPHA_CAP:
                self._alpha_cap = math.inf
            else:
                lo, hi = 0.0, 1.0
                while self.log_f(hi) <= LOG_F_ALPHA_CAP:
                    lo, hi = hi, hi * 2.0
                for _ in range(200):
                    mid = 0.5 * (lo + hi)
                    if self.log_f(mid) <= LOG_F_ALPHA_CAP:
                        lo = mid
                    else:
                        hi = mid
                self._alpha_cap = lo
        return self._alpha_cap

    # -- F machinery ----------------------------------------------------------

    def _tail_scaled(self, w, lf_ref):
        """Symbolic tail of int_w^inf ds/f(s), scaled by e^{lf_ref}; with the size of
        the first neglected correction (relative to the tail) as second output."""
        core, s = self._core, w + self.shift
        if core.tail_kind == "exp":
            bp = core.fp_over_f(s)
            c = (core.fpp_over_fp(s) - bp) / bp
            tail = math.exp(-(core.log_f(s) - lf_ref)) / bp * (1.0 - c)
            return tail, abs(c)
        if core.tail_kind == "power":
            p = core.power_p
            dlog_zeta = core.fp_over_f(s) - p / (1.0 + s)
            corr = (1.0 + s) * dlog_zeta / (p - 2.0)
            tail = (math.exp(-(core.log_f(s) - lf_ref))
                    * (1.0 + s) / (p - 1.0) * (1.0 - corr))
            return tail, abs(corr)
        raise FamilyError(f"family {self.name} has no integrable tail")

    def _quad_log_F(self, u, stretch=0.0):
        """log F(u) = log int_u^inf ds/f(s) via stretched-coordinate quadrature
        on [u, w] plus the symbolic tail at w; stretch>0 pushes w further out."""
        lfu = self.log_f(u)
        rate = max(self.fp_over_f(u), 1.0 / (abs(u) + 10.0))
        sigma = 1.0 / rate

        def integrand(tau):
            s = u + sigma * math.expm1(tau)
            return math.exp(-(self.log_f(s) - lfu) + tau) * sigma

        tau_max = 2.0
        for _ in range(40):
            w = u + sigma * math.expm1(tau_max)
            tail, corr = self._tail_scaled(w, lfu)
            if tail * (corr + 1e-4) <= 1e-13 * sigma:
                break
            tau_max += 1.0
        if stretch:
            tau_max += stretch
            w = u + sigma * math.expm1(tau_max)
            tail, _ = self._tail_scaled(w, lfu)
        with warnings.catch_warnings():
            # epsrel sits at QUADPACK's roundoff floor on purpose
            warnings.simplefilter("ignore", IntegrationWarning)
            head, _ = quad(integrand, 0.0, tau_max, epsabs=0.0, epsrel=1e-13,
                           limit=400)
        return -lfu + math.log(head + tail)

    def log_F(self, u):
        """log of F(u) = int_u^inf ds/f(s)."""
        if self._core.log_F_closed is not None:
            return self._core.log_F_closed(u + self.shift)
        if self._core.tail_kind in ("divergent", "constant"):
            raise FamilyError(f"F diverges for family {self.name}")
        key = float(u)
        got = self._log_F_cache.get(key)
        if got is None:
            got = self._quad_log_F(u)
            if len(self._log_F_cache) < 200000:
                self._log_F_cache[key] = got
        return got

    def eval_F(self, u, cross_check=False):
        """F(u); 0.0 when the true value underflows double precision.

        With cross_check=True the tail is pushed an extra two e-foldings out and the
        two evaluations are compared (TailDisagreement beyond 5e-10 relative).
        """
        lF = self.log_F(u)
        if cross_check and self._core.log_F_closed is None:
            lF2 = self._quad_log_F(u, stretch=2.0)
            if abs(lF2 - lF) > 5e-10 * max(1.0, abs(lF)):
                raise TailDisagreement(
                    f"log F mismatch at u={u}: {lF} vs extended {lF2}")
        return _exp(lF) if lF < 709 else math.inf

    def neg_log_F(self, u):
        return -self.log_F(u)

    def Ff(self, u):
        """F(u) f'(u), the growth indicator whose limit is q."""
        if self._core.Ff_closed is not None:
            return self._core.Ff_closed(u + self.shift)
        # log F + log f + log(f'/f); the first two cancel to O(log b'(u))
        return _exp(self.log_F(u) + self.log_f(u)) * self.fp_over_f(u)

    def phi(self, u):
        """F f' - q_jl(N), the criticality defect driving the classification."""
        return self.Ff(u) - self.dim.q_jl

    def inv_neg_log_F(self, ell, guess=None):
        """u with -log F(u) = ell (F strictly decreasing; Newton + bisection guard)."""
        if self._core.inv_neg_log_F_closed is not None:
            return self._core.inv_neg_log_F_closed(ell) - self.shift
        ell0 = self.neg_log_F(0.0)
        if ell < ell0 - 1e-12:
            raise FamilyError(f"-log F={ell} below attainable minimum {ell0}")
        lo, lo_val = 0.0, ell0
        hi = max(1.0, guess or 1.0)
        hi_val = self.neg_log_F(hi)
        while hi_val < ell:
            lo, lo_val = hi, hi_val
            hi *= 4.0
            hi_val = self.neg_log_F(hi)
            if hi > 1e300:
                raise FamilyError("inv_neg_log_F bracket expansion failed")
        u = guess if (guess is not None and lo <= guess <= hi) else 0.5 * (lo + hi)
        for _ in range(80):
            g = self.neg_log_F(u)
            if abs(g - ell) <= 1e-12 * max(1.0, abs(ell)):
                return u
            if g < ell:
                lo, lo_val = u, g
            else:
                hi, hi_val = u, g
            # d(-log F)/du = 1/(f F)
            deriv = _exp(-(self.log_f(u) + self.log_F(u)))
            step = (ell - g) / deriv if deriv > 0 else math.nan
            u_new = u + step
            if not (lo < u_new < hi) or not math.isfinite(u_new):
                u_new = 0.5 * (lo + hi)
            u = u_new
        return u

    def invert_F(self, y):
        """u with F(u) = y, for 0 < y <= F(0)."""
        if not y > 0.0:
            raise FamilyError("invert_F needs y > 0")
        F0 = _exp(self.log_F(0.0))
        if y > F0 * (1.0 + 1e-12):
            raise FamilyError(f"y={y} exceeds F(0)={F0}")
        return self.inv_neg_log_F(-math.log(y))

    def inv_log_f(self, target, guess=None):
        """u with log f(u) = target (log f eventually increasing)."""
        lo, hi = 0.0, max(1.0, guess or 1.0)
        f_lo = self.log_f(lo)
        if target <= f_lo:
            lo = self.admissible_min + 1e-9
        while self.log_f(hi) < target:
            hi *= 4.0
            if hi > 1e300:
                raise FamilyError("inv_log_f bracket expansion failed")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.log_f(mid) < target:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-12 * max(1.0, abs(hi)):
                break
        return 0.5 * (lo + hi)

    # -- structural-constant estimators --------------------------------------

    def q_ratio(self, u):
        """f'^2/(f f'') at u."""
        denom = self.fpp_over_fp(u)
        if denom == 0.0:
            return math.inf
        return self.fp_over_f(u) / denom

    def estimate_q(self, u_grid=None):
        """Extrapolated growth ratio q = lim f'^2/(f f'') with error bar."""
        if u_grid is None:
            u_grid = np.geomspace(3.0, self._core.q_u_cap, 24)
        vals = [self.q_ratio(u) for u in u_grid]
        h = [1.0 / math.log(u) for u in u_grid]
        value, err, converged = _extrapolate(h, vals)
        return value, err, converged

    def gamma_indicator(self, u, k):
        """(F f' - q_jl) (-log F)^k at u."""
        return self.phi(u) * self.neg_log_F(u) ** k

    def _gamma_grid(self, k):
        core = self._core
        ell_cap = min(core.gamma_ell_cap, (1e9) ** (1.0 / max(k, 0.25)))
        if core.tail_kind == "closed" and core.power_p is None:
            return list(np.geomspace(6.0, min(ell_cap, 500.0), 22))
        if core.power_p is not None:
            p = core.power_p
            m_cap = min(118.0, ell_cap / (p - 1.0))
            return [math.expm1(m) for m in np.geomspace(2.0, m_cap, 22)]
        # exp kind: pick u so that log f lands on a geometric ladder
        b_targets = np.geomspace(8.0, ell_cap, 22)
        grid, guess = [], None
        for b in b_targets:
            guess = self.inv_log_f(b, guess=guess)
            grid.append(guess)
        return grid

    def estimate_gamma(self, k, u_grid=None):
        """Sequence (u, (Ff'-q_jl)(-log F)^k) plus the extrapolated limit."""
        if not 0.0 < k <= 2.0:
            raise FamilyError("estimate_gamma needs 0 < k <= 2")
        if u_grid is None:
            u_grid = self._gamma_grid(k)
        samples, hs = [], []
        for u in u_grid:
            ell = self.neg_log_F(u)
            val = self.phi(u) * ell ** k
            samples.append((float(u), float(val)))
            hs.append(ell ** (-min(k, 1.0)))
        value, err, converged = _extrapolate(hs, [v for _, v in samples])
        warning = None
        ells = [self.neg_log_F(u) for u in (u_grid[0], u_grid[-1])]
        if k >= 1.5 and ells[1] / max(ells[0], 1e-30) < 30.0:
            warning = ("-log F spans under 1.5 decades; k=2 extrapolation "
                       "resolution is limited at double precision")
        return GammaEstimate(k=k, samples=samples, extrapolated=value,
                             error_bar=err, converged=converged, warning=warning)

    def check_growth_conditions(self, u_max=None):
        """Search a witness (p0, u0, C0, C1) for the convexity growth conditions."""
        checks = {"F_finite": self._core.tail_kind not in ("divergent", "constant")}
        q_est, q_err, q_conv = (math.nan, math.inf, False)
        if self._core.tail_kind not in ("constant",):
            q_est, q_err, q_conv = self.estimate_q()
        if not checks["F_finite"]:
            checks.update(condition_i=False, condition_ii=False, condition_iii=False)
            return GrowthReport(q_est, q_err, None, None, None, None, checks,
                                failure="F(u) = int du/f diverges")
        if u_max is None:
            u_max = min(self.alpha_cap, 300.0)
        N = self.N
        sob = self.dim.sobolev_exponent
        p0_hi = 1.98 if N >= 10 else min(1.98, 2.0 * q_est - 1.02)
        p0_candidates = [sob + t * (p0_hi - sob) for t in (0.25, 0.5, 0.1, 0.75, 0.9)]
        cum = _CumulativeIntegral(self.f)

        for p0 in p0_candidates:
            for u0 in np.geomspace(2.0, max(4.0, u_max / 8.0), 8):
                grid = np.geomspace(u0, u_max, 40)
                ratio_i = [(p0 + 1.0) * cum(u) / (u * self.f(u)) for u in grid]
                ok_i = all(r < 1.0 for r in ratio_i) and ratio_i[-1] <= ratio_i[0] + 1e-9
                if not ok_i:
                    continue
                r_ii = [u ** (p0 - 1.0) / self.f_prime(u) for u in grid]
                ok_ii = all(math.isfinite(r) for r in r_ii) and r_ii[-1] <= 1.05 * max(r_ii[0], r_ii[len(r_ii) // 2])
                r_iii = [u ** (2.0 - p0) * self.f_second(u) for u in grid]
                ok_iii = all(r > 0 for r in r_iii) and r_iii[-1] >= 0.95 * min(r_iii[0], r_iii[len(r_iii) // 2])
                if ok_ii and ok_iii:
                    checks.update(condition_i=True, condition_ii=True,
                                  condition_iii=True)
                    ge = None
                    if self.declared_k is not None:
                        ge = self.estimate_gamma(self.declared_k)
                    return GrowthReport(q_est, q_err, float(p0), float(u0),
                                        float(max(r_ii)), float(1.0 / min(r_iii)),
                                        checks, gamma_estimate=ge)
        checks.update(condition_i=False, condition_ii=False, condition_iii=False)
        return GrowthReport(q_est, q_err, None, None, None, None, checks,
                            failure="no (p0, u0) witness found on the test grid")


class _CumulativeIntegral:
    """int_0^u f with caching; quad on increments keeps the cost linear in calls."""

    def __init__(self, f):
        self.f = f
        self._knots = [0.0]
        self._vals = [0.0]

    def __call__(self, u):
        last_u, last_v = self._knots[-1], self._vals[-1]
        if u > last_u:
            inc, _ = quad(self.f, last_u, u, epsabs=0.0, epsrel=1e-11, limit=200)
            self._knots.append(u)
            self._vals.append(last_v + inc)
            return self._vals[-1]
        i = int(np.searchsorted(self._knots, u))
        lo = max(i - 1, 0)
        inc, _ = quad(self.f, self._knots[lo], u, epsabs=0.0, epsrel=1e-11, limit=200)
        return self._vals[lo] + inc


def family_from_spec(spec):
    """Build a family from the external JSON object
    {"family": str, "N": int, "params": {...}, "shift": real}."""
    if not isinstance(spec, dict):
        raise FamilyError("family spec must be a JSON object")
    try:
        name = spec["family"]
        N = spec["N"]
    except KeyError as exc:
        raise FamilyError(f"family spec is missing key {exc}") from exc
    return NonlinearityFamily(name, N, spec.get("params"), spec.get("shift", 0.0))


def catalogue_gamma_table():
    """The known (k, gamma) classification constants, one representative per item."""
    rows = [
        ("exp_log_pow", 10, {"nu": 2.0}),
        ("exp_pow", 10, {"nu": 0.5}),
        ("exp_u_plus_pow", 10, {"beta": 1.0, "nu": 0.5}),
        ("exp_exp", 10, {}),
        ("exp_times_pow", 10, {"nu": 0.5}),
        ("power_jl_log_shift", 11, {"beta": 1.0, "nu": 1.0}),
        ("power_jl_exp_logpow", 11, {"beta": 2.0, "nu": 0.5}),
        ("power_jl_times_logpow", 11, {"nu": 1.0}),
    ]
    out = []
    for name, N, params in rows:
        fam = NonlinearityFamily(name, N, params)
        out.append((fam, fam.declared_k, fam.declared_gamma))
    return out
