"""Generalized Gaussian density g_{alpha,q} on R^n and its radial integrals.

The density is radial,

    g(x) = (1/Z) [1 - (q/alpha)|x|^alpha]_+^(1/q - n/alpha - 1)    (q != 0)
    g(x) = (1/Z) exp(-|x|^alpha / alpha)                          (q == 0)

and ``Z`` is *defined* here as the integral of the bracket over R^n, so that
``g`` is a probability density.  The commonly quoted closed forms for Z
are the reciprocals of this integral; see :func:`displayed_partition_constant`.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .special import beta, log_beta, log_gamma, regularized_incomplete_beta, regularized_lower_gamma


@dataclass(frozen=True)
class Params:
    """Problem parameters (n, alpha, q, p).

    ``p`` is the L_p exponent; it does not enter the density and defaults to 1.
    """

    n: int
    alpha: float
    q: float
    p: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise DomainError(f"n must be an integer >= 2, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        for name in ("alpha", "q", "p"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise DomainError(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if self.alpha <= 0:
            raise DomainError(f"alpha must be > 0, got {self.alpha}")
        if not self.q < self.alpha / self.n:
            raise DomainError(f"q must be < alpha/n = {self.alpha / self.n}, got {self.q}")
        if self.q != 0 and not math.isfinite(1.0 / self.q):
            raise DomainError("|q| is too small for 1/q to be finite; use q = 0")

    @property
    def exponent(self):
        """Exponent 1/q - n/alpha - 1 of the bracket (nan for q == 0)."""
        if self.q == 0:
            return math.nan
        return 1.0 / self.q - self.n / self.alpha - 1.0

    @property
    def q_subcritical(self):
        return self.q < self.alpha / (self.n + self.alpha)

    @property
    def p_negative_admissible(self):
        a, q, p = self.alpha, self.q, self.p
        if q < 0:
            return a / q - a < p < 0
        return q < a / (self.n + a) and p < 0

    @property
    def growth(self):
        """Coefficient 1 - q n/alpha - q appearing in derivatives of log g."""
        return 1.0 - self.q * self.n / self.alpha - self.q

    def with_p(self, p):
        return Params(self.n, self.alpha, self.q, p)

    def as_dict(self):
        return {"n": self.n, "alpha": self.alpha, "q": self.q, "p": self.p}


class LogProfile(enum.Enum):
    LOG_CONCAVE = "LogConcave"
    LOG_CONVEX = "LogConvex"
    POINCARE_RANGE = "PoincareRange"
    UNCLASSIFIED = "Unclassified"


def sphere_area(n):
    """Surface area of the unit sphere S^{n-1} in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def log_normalizer(params):
    n, a, q = params.n, params.alpha, params.q
    log_sigma = math.log(sphere_area(n))
    x = n / a
    if q == 0:
        return log_sigma + (x - 1.0) * math.log(a) + log_gamma(x)
    if q > 0:
        return log_sigma - math.log(a) + x * math.log(a / q) + log_beta(x, 1.0 / q - x)
    return log_sigma - math.log(a) + x * math.log(a / -q) + log_beta(x, 1.0 - 1.0 / q)


def normalizer(params):
    """Partition constant Z with  ∫ (1/Z) bracket(|x|) dx = 1."""
    return math.exp(log_normalizer(params))


def displayed_partition_constant(params):
    """The commonly quoted closed form for Z(alpha, q).

    Under the ``g = (1/Z)[...]`` convention this expression equals
    ``1 / normalizer(params)``; it is kept only so tests can pin that
    relation down.
    """
    n, a, q = params.n, params.alpha, params.q
    num_common = math.gamma(n / 2.0 + 1.0)
    if q == 0:
        return num_common / (math.pi ** (n / 2.0) * a ** (n / a) * math.gamma(n / a + 1.0))
    if q > 0:
        return (a / n) * (q / a) ** (n / a) * num_common / (math.pi ** (n / 2.0) * beta(n / a, 1.0 / q - n / a))
    # q < 0: (q/alpha)^(n/alpha) is read with |q|, the only real-valued reading
    return (a / n) * (-q / a) ** (n / a) * num_common / (math.pi ** (n / 2.0) * beta(n / a, 1.0 - 1.0 / q))


def bracket(params, r):
    """Unnormalized radial profile [1 - (q/alpha) r^alpha]_+^e, or exp(-r^alpha/alpha)."""
    r = np.asarray(r, dtype=float)
    a, q = params.alpha, params.q
    if q == 0:
        return np.exp(-(r**a) / a)
    base = 1.0 - (q / a) * r**a
    out = np.zeros_like(base)
    pos = base > 0
    out[pos] = np.exp(params.exponent * np.log(base[pos]))
    return out


def density_at(params, r):
    """g_{alpha,q} at any point of norm ``r``."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(np.isnan(r)):
        raise DomainError("radius must be >= 0")
    out = bracket(params, r) / normalizer(params)
    return float(out) if out.ndim == 0 else out


def support_cutoff(params):
    """Radius (alpha/q)^(1/alpha) beyond which g vanishes, or None when q <= 0."""
    if params.q > 0:
        return (params.alpha / params.q) ** (1.0 / params.alpha)
    return None


def radial_integral(params, rho, power=None, shift=0.0):
    """Closed form of  ∫_0^rho bracket(r)^(1 + shift/e) r^power dr.

    More precisely the integrand is ``[1-(q/alpha)r^alpha]_+^(e + shift) r^power``
    for q != 0 and ``exp(-r^alpha/alpha) r^power`` for q == 0 (``shift`` is then
    irrelevant: every shifted bracket has the same q -> 0 limit).  ``power``
    defaults to n - 1, which gives the radial mass integrand.  The result is
    not divided by Z.  ``rho`` may contain ``inf``.
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0) or np.any(np.isnan(rho)):
        raise DomainError("rho must be >= 0")
    a, q = params.alpha, params.q
    if power is None:
        power = params.n - 1
    x = (power + 1.0) / a
    if x <= 0:
        raise DomainError("power must exceed -1")
    if q == 0:
        scale = math.exp((x - 1.0) * math.log(a) + log_gamma(x))
        with np.errstate(over="ignore"):
            arg = np.where(np.isinf(rho), np.inf, rho**a / a)
        out = scale * regularized_lower_gamma(x, arg)
    elif q > 0:
        y = params.exponent + shift + 1.0
        if y <= 0:
            return _radial_quad(params, rho, power, shift)
        scale = math.exp(-math.log(a) + x * math.log(a / q) + log_beta(x, y))
        with np.errstate(over="ignore"):
            s = np.minimum(1.0, (q / a) * rho**a)
        out = scale * regularized_incomplete_beta(s, x, y)
    else:
        y = -(params.exponent + shift) - x
        if y <= 0:
            return _radial_quad(params, rho, power, shift)
        scale = math.exp(-math.log(a) + x * math.log(a / -q) + log_beta(x, y))
        with np.errstate(over="ignore", invalid="ignore"):
            big = (-q / a) * rho**a
            u = np.where(np.isinf(big), 1.0, big / (1.0 + big))
        out = scale * regularized_incomplete_beta(u, x, y)
    return float(out) if np.ndim(out) == 0 else out


def _radial_quad(params, rho, power, shift):
    from scipy.integrate import quad

    a, q = params.alpha, params.q
    e = params.exponent + shift
    cut = support_cutoff(params)

    def f(r):
        base = 1.0 - (q / a) * r**a
        return base**e * r**power if base > 0 else 0.0

    flat = np.atleast_1d(rho).astype(float)
    out = np.empty_like(flat)
    for i, rr in enumerate(flat):
        upper = rr if cut is None else min(rr, cut)
        out[i] = quad(f, 0.0, upper, limit=200, epsabs=1e-13, epsrel=1e-12)[0]
    return float(out[0]) if np.ndim(rho) == 0 else out.reshape(np.shape(rho))


def ball_mass(params, rho):
    """G_{alpha,q} of the centered ball of radius ``rho`` (``inf`` allowed)."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0) or np.any(np.isnan(rho)):
        raise DomainError("rho must be >= 0")
    n, a, q = params.n, params.alpha, params.q
    x = n / a
    with np.errstate(over="ignore", invalid="ignore"):
        if q == 0:
            out = regularized_lower_gamma(x, np.where(np.isinf(rho), np.inf, rho**a / a))
        elif q > 0:
            out = regularized_incomplete_beta(np.minimum(1.0, (q / a) * rho**a), x, 1.0 / q - x)
        else:
            big = (-q / a) * rho**a
            u = np.where(np.isinf(big), 1.0, big / (1.0 + big))
            out = regularized_incomplete_beta(u, x, 1.0 - 1.0 / q)
    return float(out) if np.ndim(out) == 0 else out


def ball_radius_for_mass(params, c, tol=1e-15):
    """Radius of the centered ball with G = c, by bisection on ``ball_mass``."""
    if not 0.0 < c < 1.0:
        raise DomainError(f"mass must lie in (0, 1), got {c}")
    lo, hi = 0.0, 1.0
    while ball_mass(params, hi) < c:
        lo, hi = hi, 2.0 * hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if ball_mass(params, mid) < c:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * hi:
            break
    return 0.5 * (lo + hi)


def classify_log_profile(params):
    n, a, q = params.n, params.alpha, params.q
    crit = a / (n + a)
    if 0 <= q < crit and a >= 1:
        return LogProfile.LOG_CONCAVE
    if (q <= 0 and a <= 1) or (crit <= q < a / n and a >= 1):
        return LogProfile.LOG_CONVEX
    if 0 < q < crit:
        return LogProfile.POINCARE_RANGE
    return LogProfile.UNCLASSIFIED


def omega(params, t):
    """-log(Z g) at radius t: the potential with g = exp(-omega)/Z."""
    t = np.asarray(t, dtype=float)
    a, q = params.alpha, params.q
    if q == 0:
        return t**a / a
    base = 1.0 - (q / a) * t**a
    with np.errstate(divide="ignore"):
        return np.where(base > 0, -params.exponent * np.log(np.maximum(base, 0.0)), np.inf)
