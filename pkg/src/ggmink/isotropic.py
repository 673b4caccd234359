"""Constant solutions of the isotropic curvature equation.

A constant support function h = r solves

    c h^(p-1) kappa / g(|Dh|) = 1

exactly when  Phi(r) := r^(n-p) [1 - (q/alpha) r^alpha]_+^e  equals  c Z
(kappa = r^(1-n), |Dh| = r).  For p < n the function Phi rises from 0 and,
when an interior maximum exists, falls back to 0, which yields the
two-root / one-root / no-root trichotomy.  For p >= n it is monotone
decreasing and at most one root exists.

Every decision here rests on a numerical maximization of Phi; closed forms
are evaluated only for comparison.
"""

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .density import bracket, normalizer, support_cutoff
from .errors import DomainError

_REL_ROOT_TOL = 1e-12
_FOLD_TOL = 1e-10


def _domain_end(params):
    cut = support_cutoff(params)
    return math.inf if cut is None else cut


def phi(params, r):
    """Phi(r) = r^(n-p) * bracket(r), the isotropic balance function."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0) or np.any(r >= _domain_end(params)):
        raise DomainError("r must lie in the open support of the density")
    out = r ** (params.n - params.p) * bracket(params, r)
    return float(out) if out.ndim == 0 else out


def log_phi(params, r):
    n, a, q, p = params.n, params.alpha, params.q, params.p
    r = np.asarray(r, dtype=float)
    if q == 0:
        return (n - p) * np.log(r) - r**a / a
    return (n - p) * np.log(r) + params.exponent * np.log1p(-(q / a) * r**a)


def dlog_phi(params, r):
    """d/dr log Phi = (n-p)/r - growth r^(alpha-1) / (1 - (q/alpha) r^alpha)."""
    n, a, q, p = params.n, params.alpha, params.q, params.p
    B = 1.0 - (q / a) * r**a
    return (n - p) / r - params.growth * r ** (a - 1.0) / B


def _d2log_phi(params, r):
    n, a, q, p = params.n, params.alpha, params.q, params.p
    B = 1.0 - (q / a) * r**a
    return -(n - p) / r**2 - params.growth * ((a - 1.0) * r ** (a - 2.0) / B + q * r ** (2 * a - 2.0) / B**2)


def derived_argmax(params):
    """Closed-form maximizer r^alpha = alpha(n-p) / (alpha - q alpha - q p), or None."""
    n, a, q, p = params.n, params.alpha, params.q, params.p
    den = a - q * a - q * p
    if p >= n or den <= 0:
        return None
    x = a * (n - p) / den
    if q > 0 and x >= a / q:
        return None
    return x ** (1.0 / a)


def displayed_argmax(params):
    """The closed-form maximizer r^alpha = (n-p)/(q e + n - p), kept for comparison.

    ``q e`` is read as 1 - q n/alpha - q so the q = 0 limit is finite.
    """
    n, p = params.n, params.p
    den = params.growth + n - p
    if den <= 0 or n - p <= 0:
        return None
    return ((n - p) / den) ** (1.0 / params.alpha)


@dataclass(frozen=True)
class CriticalConstant:
    exists: bool
    c_star: float
    r_star: float
    phi_max: float
    r_star_derived: float = None
    r_star_displayed: float = None
    c_star_displayed: float = None
    displayed_relative_gap: float = None

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _golden_max(fun, lo, hi, iters=200):
    inv = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv * (b - a)
    d = a + inv * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = fun(d)
        if b - a <= 1e-15 * (abs(a) + abs(b)):
            break
    return 0.5 * (a + b)


def critical_constant(params):
    """Numerically maximize Phi; c* = max Phi / Z and r* its argmax.

    The maximum is bracketed on a logarithmic scan, refined by golden-section
    search on log Phi, then polished by Newton's method on (log Phi)' = 0.
    """
    if params.p >= params.n:
        raise DomainError("the critical constant needs p < n")
    Z = normalizer(params)
    end = _domain_end(params)
    hi = end * (1.0 - 1e-12) if math.isfinite(end) else 1e6
    lo = 1e-8 * min(1.0, hi)
    grid = np.exp(np.linspace(math.log(lo), math.log(hi), 2001))
    vals = log_phi(params, grid)
    k = int(np.argmax(vals))
    if k >= len(grid) - 2 or not np.isfinite(vals[k]):
        return CriticalConstant(False, math.inf, math.nan, math.inf)
    t = _golden_max(lambda s: float(log_phi(params, math.exp(s))), math.log(grid[max(k - 1, 0)]),
                    math.log(grid[k + 1]))
    r = math.exp(t)
    for _ in range(20):
        step = dlog_phi(params, r) / _d2log_phi(params, r)
        r_new = r - step
        if not grid[max(k - 1, 0)] <= r_new <= grid[k + 1]:
            break
        r = r_new
        if abs(step) <= 4e-16 * r:
            break
    pmax = phi(params, r)
    rd = derived_argmax(params)
    rdisp = displayed_argmax(params)
    cdisp = gap = None
    if rdisp is not None and rdisp < end:
        cdisp = phi(params, rdisp) / Z
        gap = abs(cdisp - pmax / Z) / (pmax / Z)
    return CriticalConstant(True, pmax / Z, r, pmax, rd, rdisp, cdisp, gap)


@dataclass(frozen=True)
class Trichotomy:
    """Constant-root structure: kind in {"TwoRoots", "OneRoot", "NoRoot"}."""

    kind: str
    roots: tuple
    c: float
    critical_c: float
    phi_max_arg: float
    root_residuals: tuple = field(default=())

    def as_dict(self):
        return {"kind": self.kind, "roots": list(self.roots), "c": self.c, "critical_c": self.critical_c,
                "phi_max_arg": self.phi_max_arg, "root_residuals": list(self.root_residuals)}


def _solve_phi(params, target, lo, hi, increasing):
    """Root of log Phi = log target on [lo, hi] by bisection plus Newton polish."""
    lt = math.log(target)
    f = lambda r: float(log_phi(params, r)) - lt
    for _ in range(200):
        mid = math.sqrt(lo * hi) if lo > 0 else 0.5 * hi
        v = f(mid)
        if (v < 0) == increasing:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    r = 0.5 * (lo + hi)
    for _ in range(5):
        d = dlog_phi(params, r)
        if d == 0:
            break
        r_new = r - f(r) / d
        if not lo * (1 - 1e-9) <= r_new <= hi * (1 + 1e-9):
            break
        r = r_new
    return r


def constant_roots(params, c):
    """Trichotomy of constant solutions h = r with Phi(r) = c Z, for p < n."""
    if c <= 0:
        raise DomainError("c must be positive")
    crit = critical_constant(params)
    target = c * normalizer(params)
    if not crit.exists:
        return Trichotomy("NoCritical", (), c, math.inf, math.nan)
    rel = (target - crit.phi_max) / crit.phi_max
    if abs(rel) <= _FOLD_TOL:
        return Trichotomy("OneRoot", (crit.r_star,), c, crit.c_star, crit.r_star, (abs(rel),))
    if rel > 0:
        return Trichotomy("NoRoot", (), c, crit.c_star, crit.r_star)
    r1 = _solve_phi(params, target, 0.0, crit.r_star, increasing=True)
    end = _domain_end(params)
    if math.isfinite(end):
        hi = end
    else:
        hi = 2.0 * crit.r_star
        while phi(params, hi) > target:
            hi *= 2.0
    r2 = _solve_phi(params, target, crit.r_star, hi, increasing=False)
    res = tuple(abs(phi(params, r) - target) / target for r in (r1, r2))
    return Trichotomy("TwoRoots", (r1, r2), c, crit.c_star, crit.r_star, res)


def monotone_root(params, c):
    """The constant solution for p >= n (Phi decreasing), or None when absent."""
    if params.p < params.n:
        raise DomainError("monotone_root needs p >= n")
    target = c * normalizer(params)
    end = _domain_end(params)
    lo = 1.0
    while float(log_phi(params, lo)) < math.log(target):
        lo *= 0.5
        if lo < 1e-300:
            return None
    if math.isfinite(end):
        hi = end * (1.0 - 1e-15)
        lo = min(lo, 0.5 * end)
        if phi(params, hi) > target:
            return None
    else:
        hi = max(2.0 * lo, 1.0)
        while phi(params, hi) > target:
            hi *= 2.0
            if hi > 1e300:
                return None
    return _solve_phi(params, target, lo, hi, increasing=False)


def analytic_linearized_coefficient(params, r):
    """(n-p) - (alpha - alpha q - n q) r^alpha / (alpha - q r^alpha)."""
    n, a, q, p = params.n, params.alpha, params.q, params.p
    return (n - p) - (a - a * q - n * q) * r**a / (a - q * r**a)


def displayed_linearized_coefficient(params, r):
    """Closed-form zeroth-order coefficient with power alpha + 1 - p, kept for comparison."""
    n, a, q, p = params.n, params.alpha, params.q, params.p
    return (n - p) + (a * q + n * q - a) * r ** (a + 1.0 - p) / (a - q * r**a)


def linearized_coefficient(params, r, m=64, eps=1e-6):
    """Zeroth-order coefficient of the linearized operator at h = r.

    For n = 2 it is read off the discrete planar residual by central
    differences along cos(k theta): the k-th mode has eigenvalue
    coefficient - k^2, so each mode gives an independent estimate.  For
    other n the scalar map  t -> t^(n-1) - c Z t^(p-1)/bracket(t)  is
    differentiated instead (divided by r^(n-2)).
    """
    c = phi(params, r) / normalizer(params)
    n = params.n
    modes = {}
    if n == 2:
        from .ma2d import PeriodicField, residual

        theta = 2.0 * np.pi * np.arange(m) / m
        f = PeriodicField(np.full(m, c))
        h = 2.0 * np.pi / m
        for k in range(4):
            v = np.cos(k * theta)
            rp = residual(params, PeriodicField(r + eps * r * v), f).values
            rm = residual(params, PeriodicField(r - eps * r * v), f).values
            jv = (rp - rm) / (2.0 * eps * r)
            lam = float(jv @ v / (v @ v))
            # discrete fourth-order symbol of d^2/dtheta^2 at frequency k
            symbol = (-2.0 * np.cos(2 * k * h) + 32.0 * np.cos(k * h) - 30.0) / (12.0 * h * h)
            modes[k] = lam - symbol
        numeric = modes[0]
    else:
        Z = normalizer(params)

        def F(t):
            return t ** (n - 1) - c * Z * t ** (params.p - 1) / float(bracket(params, t))

        numeric = (F(r + eps * r) - F(r - eps * r)) / (2.0 * eps * r) / r ** (n - 2)
    analytic = analytic_linearized_coefficient(params, r)
    displayed = displayed_linearized_coefficient(params, r)
    spectrum = [k * (k + n - 2) for k in range(64)]
    margin = min(abs(numeric - s) for s in spectrum)
    return {
        "coefficient": numeric,
        "analytic": analytic,
        "displayed": displayed,
        "numeric_vs_analytic": abs(numeric - analytic),
        "displayed_gap": abs(displayed - numeric),
        "mode_estimates": {str(k): v for k, v in modes.items()},
        "spectral_margin": margin,
        "invertible": bool(margin > 1e-6),
    }


def phi_curve_csv(params, c=None, num=400):
    """CSV rows (r, Phi, cZ) across the support, for plotting."""
    end = _domain_end(params)
    crit = critical_constant(params) if params.p < params.n else None
    top = end * (1 - 1e-9) if math.isfinite(end) else max(4.0, 3.0 * (crit.r_star if crit and crit.exists else 1.0))
    rs = np.linspace(top / num, top, num)
    vals = phi(params, rs)
    cz = "" if c is None else repr(c * normalizer(params))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["r", "phi", "cZ"])
    for r, v in zip(rs, vals):
        w.writerow([repr(float(r)), repr(float(v)), cz])
    return buf.getvalue()
