"""Planar (n = 2) solver for the prescribed weighted curvature equation

    h'' + h = Z f h^(p-1) W(rho),   rho^2 = h^2 + h'^2,

on the circle, where W = 1/bracket is the reciprocal of the unnormalized
density profile.  Derivatives use periodic fourth-order central differences
and the discrete residual is driven to zero by damped Newton iterations with
an exact (pentadiagonal, periodic) Jacobian.
"""

import csv
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .density import normalizer, support_cutoff
from .errors import (ContinuationError, ConvexityError, DomainError, NonConvergenceError,
                     OutOfSupportError, PreconditionError)
from .geometry import SupportVector, circle_grid, wulff_shape
from .isotropic import constant_roots, linearized_coefficient, monotone_root
from .measures import gauss_volume

H_FLOOR = 1e-8
CONVEXITY_SLACK = -1e-10


class PreconditionWarning(UserWarning):
    """Input data violate a hypothesis; the solver still tries."""


@dataclass(frozen=True)
class PeriodicField:
    """Samples at theta_j = 2 pi j / m."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size < 8:
            raise DomainError("periodic field needs at least 8 samples")
        if not np.all(np.isfinite(v)):
            raise DomainError("periodic field has non-finite values")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def m(self):
        return self.values.size

    @property
    def theta(self):
        return 2.0 * np.pi * np.arange(self.m) / self.m

    @classmethod
    def from_function(cls, func, m=512):
        return cls(func(2.0 * np.pi * np.arange(m) / m))

    @classmethod
    def cosine(cls, c, amp=0.0, mode=0, m=512, phase=0.0):
        """f(theta) = c (1 + amp cos(mode (theta - phase)))."""
        return cls.from_function(lambda t: c * (1.0 + amp * np.cos(mode * (t - phase))), m)

    def shifted(self, k):
        """Rotation by k grid steps: new[j] = old[j - k]."""
        return PeriodicField(np.roll(self.values, k))

    def geometric_mean(self):
        return float(np.exp(np.mean(np.log(self.values))))

    def l1_norm(self):
        return float(np.sum(self.values) * 2.0 * np.pi / self.m)


def field_from_config(cfg, m=512):
    """Build f from {"type": "cosine", "c":.., "amp":.., "mode":..} or {"type": "constant", "c":..}."""
    kind = cfg.get("type", "cosine")
    try:
        if kind == "constant":
            return PeriodicField(np.full(m, float(cfg["c"])))
        if kind == "cosine":
            return PeriodicField.cosine(float(cfg["c"]), float(cfg.get("amp", 0.0)), int(cfg.get("mode", 0)),
                                        int(cfg.get("m", m)), float(cfg.get("phase", 0.0)))
    except KeyError as exc:
        raise DomainError(f"field config is missing {exc}") from None
    raise DomainError(f"unknown field type {kind!r}")


def field_from_csv(text):
    """Read (theta, value) rows on a uniform grid starting at 0."""
    rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].strip().startswith("#")]
    try:
        float(rows[0][0])
    except (ValueError, IndexError):
        rows = rows[1:]
    try:
        data = np.array([[float(a), float(b)] for a, b, *_ in rows])
    except ValueError as exc:
        raise DomainError(f"malformed CSV field: {exc}") from None
    m = len(data)
    expected = 2.0 * np.pi * np.arange(m) / m
    if m < 8 or np.max(np.abs(data[:, 0] - expected)) > 1e-9:
        raise DomainError("CSV theta column must be the uniform grid 2*pi*j/m")
    return PeriodicField(data[:, 1])


# --------------------------------------------------------------------------
# discretization


def _d1(v, dt):
    return (-np.roll(v, -2) + 8.0 * np.roll(v, -1) - 8.0 * np.roll(v, 1) + np.roll(v, 2)) / (12.0 * dt)


def _d2(v, dt):
    return (-np.roll(v, -2) + 16.0 * np.roll(v, -1) - 30.0 * v + 16.0 * np.roll(v, 1) - np.roll(v, 2)) / (12.0 * dt * dt)


def _circulant(m, stencil):
    """Sparse periodic matrix with stencil {offset: coefficient}."""
    rows, cols, vals = [], [], []
    idx = np.arange(m)
    for off, c in stencil.items():
        rows.append(idx)
        cols.append((idx + off) % m)
        vals.append(np.full(m, c))
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(m, m))


_OPS = {}


def _operators(m):
    if m not in _OPS:
        dt = 2.0 * np.pi / m
        D1 = _circulant(m, {-2: 1 / 12, -1: -8 / 12, 1: 8 / 12, 2: -1 / 12}) / dt
        D2 = _circulant(m, {-2: -1 / 12, -1: 16 / 12, 0: -30 / 12, 1: 16 / 12, 2: -1 / 12}) / dt**2
        _OPS[m] = (D1.tocsr(), D2.tocsr())
    return _OPS[m]


def _weight(params, rho):
    """W(rho) = 1/bracket(rho) and the log-derivative factor kappa = W'/(W rho)."""
    a, q = params.alpha, params.q
    if q == 0:
        return np.exp(rho**a / a), rho ** (a - 2.0)
    B = 1.0 - (q / a) * rho**a
    e = params.exponent
    if np.any(B <= 0):
        if e > 0:
            raise OutOfSupportError("support function reached the density cutoff")
        W = np.where(B > 0, np.exp(-e * np.log(np.maximum(B, 1e-300))), 0.0 if e < 0 else 1.0)
    else:
        W = np.exp(-e * np.log(B))
    with np.errstate(divide="ignore", invalid="ignore"):
        kappa = np.where(B > 0, params.growth * rho ** (a - 2.0) / B, 0.0)
    return W, kappa


def _check_params(params):
    if params.n != 2:
        raise DomainError("the planar solver needs n = 2")


def residual(params, h, f):
    """r_j = (h'' + h)_j - Z f_j h_j^(p-1) W(rho_j)."""
    _check_params(params)
    hv, fv = h.values, f.values
    if hv.shape != fv.shape:
        raise DomainError("h and f live on different grids")
    if np.any(hv <= 0) or np.any(fv <= 0):
        raise DomainError("h and f must be positive")
    dt = 2.0 * np.pi / hv.size
    hp = _d1(hv, dt)
    rho = np.sqrt(hv * hv + hp * hp)
    W, _ = _weight(params, rho)
    Z = normalizer(params)
    return PeriodicField(_d2(hv, dt) + hv - Z * fv * hv ** (params.p - 1.0) * W)


def _residual_and_jacobian(params, hv, fv, Z):
    m = hv.size
    D1, D2 = _operators(m)
    hp = D1 @ hv
    rho = np.sqrt(hv * hv + hp * hp)
    W, kappa = _weight(params, rho)
    p = params.p
    src = Z * fv * hv ** (p - 1.0) * W
    res = D2 @ hv + hv - src
    diag = (p - 1.0) * src / hv + src * kappa * hv
    coef1 = src * kappa * hp
    J = D2 + sp.identity(m, format="csr") - sp.diags(diag) - sp.diags(coef1) @ D1
    return res, J.tocsc()


def discrete_convexity(hv):
    """h_{j+1} - 2 h_j + h_{j-1} + dtheta^2 h_j (positive for convex bodies)."""
    dt = 2.0 * np.pi / hv.size
    return np.roll(hv, -1) - 2.0 * hv + np.roll(hv, 1) + dt * dt * hv


@dataclass
class MASolution:
    h: PeriodicField
    residual_sup: float
    iterations: int
    volume: float
    branch: str
    bounds_ok: bool
    log: list = field(default_factory=list)

    def to_csv(self, params, f):
        hv = self.h.values
        dt = 2.0 * np.pi / hv.size
        r = residual(params, self.h, f).values
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["theta", "h", "dh", "residual"])
        for t, a, b, c in zip(self.h.theta, hv, _d1(hv, dt), r):
            w.writerow([repr(float(t)), repr(float(a)), repr(float(b)), repr(float(c))])
        return buf.getvalue()

    def summary(self):
        hv = self.h.values
        return {"residual_sup": self.residual_sup, "iterations": self.iterations, "volume": self.volume,
                "branch": self.branch, "bounds_ok": self.bounds_ok, "m": int(hv.size),
                "h_min": float(hv.min()), "h_max": float(hv.max())}


def body_volume(params, h):
    """G of the Wulff shape of the sampled support function."""
    grid = circle_grid(h.m)
    return gauss_volume(params, wulff_shape(SupportVector(grid, h.values)))


def _bounds_ok(params, hv):
    cut = support_cutoff(params)
    return True if cut is None else bool(np.max(hv) < cut - 1e-9)


def newton_solve(params, f, h0, tol=1e-10, max_iter=100, branch="Unique"):
    """Damped Newton on the discrete residual.

    A step is accepted only if it keeps h above the floor, keeps discrete
    convexity, stays inside the density support and decreases the residual
    norm (Armijo with step halving).
    """
    _check_params(params)
    fv = f.values
    hv = np.array(h0.values, dtype=float)
    if hv.shape != fv.shape:
        raise DomainError("h0 and f live on different grids")
    if np.any(hv <= 0) or np.any(fv <= 0):
        raise DomainError("h0 and f must be positive")
    Z = normalizer(params)
    res, J = _residual_and_jacobian(params, hv, fv, Z)
    norm = float(np.linalg.norm(res))
    log = []
    for it in range(max_iter + 1):
        sup = float(np.max(np.abs(res)))
        log.append({"iter": it, "residual_sup": sup})
        if sup <= tol:
            return MASolution(PeriodicField(hv), sup, it, body_volume(params, PeriodicField(hv)), branch,
                              _bounds_ok(params, hv), log)
        if it == max_iter:
            break
        try:
            step = splu(J).solve(-res)
        except RuntimeError as exc:
            raise NonConvergenceError(f"singular Jacobian: {exc}", {"iteration": it, "residual_sup": sup}) from None
        lam = 1.0
        reasons = set()
        while lam >= 1e-10:
            trial = hv + lam * step
            if np.any(trial <= H_FLOOR):
                reasons.add("floor")
            elif np.any(discrete_convexity(trial) <= CONVEXITY_SLACK):
                reasons.add("convexity")
            else:
                try:
                    with np.errstate(over="ignore", invalid="ignore"):
                        r_new, J_new = _residual_and_jacobian(params, trial, fv, Z)
                except OutOfSupportError:
                    reasons.add("support")
                else:
                    n_new = float(np.linalg.norm(r_new))
                    if not np.isfinite(n_new):
                        reasons.add("overflow")
                    elif n_new <= (1.0 - 1e-4 * lam) * norm or n_new <= tol:
                        hv, res, J, norm = trial, r_new, J_new, n_new
                        break
                    else:
                        reasons.add("armijo")
            lam *= 0.5
        else:
            diag = {"iteration": it, "residual_sup": sup, "rejections": sorted(reasons)}
            if reasons == {"convexity"}:
                raise ConvexityError("every damped step lost discrete convexity", diag)
            raise NonConvergenceError("line search collapsed", diag)
        log[-1]["step"] = lam
    raise NonConvergenceError(f"no convergence in {max_iter} iterations",
                              {"residual_sup": float(np.max(np.abs(res))), "log": log[-5:]})


def _f_path(c0, f, t):
    return PeriodicField((1.0 - t) * c0 + t * f.values)


def _continue(params, f, c0, h_start, steps, tol, branch, min_step=1e-4):
    t, dt = 0.0, 1.0 / steps
    hv = PeriodicField(h_start)
    sol = newton_solve(params, _f_path(c0, f, 0.0), hv, tol, branch=branch)
    total_iters = sol.iterations
    path = [{"t": 0.0, "iterations": sol.iterations}]
    if np.allclose(f.values, c0, rtol=0, atol=0):
        return sol
    while t < 1.0:
        t_new = min(1.0, t + dt)
        try:
            trial = newton_solve(params, _f_path(c0, f, t_new), sol.h, tol, branch=branch)
        except (NonConvergenceError, OutOfSupportError) as exc:
            dt *= 0.5
            if dt < min_step:
                raise ContinuationError(f"continuation stalled: {exc}", t,
                                        {"last_t": t, "path": path[-5:]}) from None
            continue
        sol, t = trial, t_new
        total_iters += sol.iterations
        path.append({"t": t, "iterations": sol.iterations})
        dt = min(2.0 * dt, 1.0 / steps)
    sol.iterations = total_iters
    sol.log = path
    return sol


def continuity_solve(params, f, steps=8, tol=1e-10):
    """Homotopy f_t = (1-t) c0 + t f from the constant solution at t = 0 (p >= 2)."""
    _check_params(params)
    if params.p < params.n:
        raise DomainError("continuity_solve needs p >= n = 2; use two_branch_solve for 1 <= p < 2")
    Z = normalizer(params)
    if params.p == params.n and np.any(f.values >= 1.0 / Z):
        warnings.warn("p = n requires f < 1/Z pointwise; the constant seed may not exist",
                      PreconditionWarning, stacklevel=2)
    c0 = f.geometric_mean()
    r0 = monotone_root(params, c0)
    if r0 is None:
        raise PreconditionError(f"no constant solution for c0 = {c0}")
    return _continue(params, f, c0, np.full(f.m, r0), steps, tol, "Unique")


@dataclass
class ProbeReport:
    spread: float
    converged: int
    failed: int
    solutions: list

    def as_dict(self):
        return {"spread": self.spread, "converged": self.converged, "failed": self.failed}


def uniqueness_probe(params, f, k=8, seed=0, tol=1e-10):
    """Newton from k diverse starts; max pairwise sup-distance of the results.

    Starts are constants spanning the constant roots for min f and max f
    (which bracket any solution by the comparison principle) plus random
    convex perturbations of their midpoint.
    """
    _check_params(params)
    if params.p < params.n:
        raise DomainError("uniqueness_probe needs p >= n = 2")
    rng = np.random.default_rng(seed)
    r_hi = monotone_root(params, float(f.values.min()))
    r_lo = monotone_root(params, float(f.values.max()))
    if r_hi is None or r_lo is None:
        raise PreconditionError("no constant comparison solutions for the range of f")
    cut = support_cutoff(params)
    upper = 1.5 * r_hi if cut is None else min(1.5 * r_hi, 0.5 * (r_hi + cut))
    n_const = (k + 1) // 2
    # starts far below r_lo drift to the degenerate solution h = 0 (the right-hand side vanishes like h^(p-1))
    starts = [np.full(f.m, r) for r in np.geomspace(0.9 * r_lo, upper, n_const)]
    theta = f.theta
    mid = math.sqrt(r_lo * r_hi)
    while len(starts) < k:
        pert = np.zeros(f.m)
        for mode in range(2, 5):
            pert += rng.uniform(-1, 1) * np.cos(mode * theta + rng.uniform(0, 2 * np.pi)) / mode**2
        pert *= 0.5 / max(1.0, np.max(np.abs(pert)) * 16.0)
        starts.append(mid * (1.0 + pert))
    sols, failed = [], 0
    for h0 in starts:
        try:
            sols.append(newton_solve(params, f, PeriodicField(h0), tol))
        except (NonConvergenceError, OutOfSupportError):
            failed += 1
    spread = 0.0
    for i in range(len(sols)):
        for j in range(i + 1, len(sols)):
            spread = max(spread, float(np.max(np.abs(sols[i].h.values - sols[j].h.values))))
    return ProbeReport(spread, len(sols), failed, sols)


@dataclass
class TwoBranchResult:
    low: MASolution
    high: MASolution
    distance: float
    c0: float
    seeds: tuple
    mass: float
    threshold: float
    mass_below_threshold: bool
    seed_linearization: list
    collapsed: bool

    def __iter__(self):
        return iter((self.low, self.high))

    def summary(self):
        return {"low": self.low.summary(), "high": self.high.summary(), "distance": self.distance,
                "c0": self.c0, "seeds": list(self.seeds), "mass": self.mass, "threshold": self.threshold,
                "mass_below_threshold": self.mass_below_threshold,
                "seed_linearization": self.seed_linearization, "collapsed": self.collapsed}


def two_branch_solve(params, f, threshold=None, steps=8, tol=1e-10):
    """Continuation from both constant roots of the isotropic problem (1 <= p < 2)."""
    _check_params(params)
    if not 1.0 <= params.p < params.n:
        raise DomainError("two_branch_solve needs 1 <= p < n = 2")
    c0 = f.geometric_mean()
    tri = constant_roots(params, c0)
    if tri.kind != "TwoRoots":
        raise PreconditionError(f"isotropic problem at c = {c0} has {tri.kind}; no two constant seeds")
    r1, r2 = tri.roots
    lin = []
    for r in (r1, r2):
        rep = linearized_coefficient(params, r)
        lin.append({"r": r, "coefficient": rep["coefficient"], "spectral_margin": rep["spectral_margin"],
                    "near_singular": not rep["invertible"]})
    low = _continue(params, f, c0, np.full(f.m, r1), steps, tol, "Low")
    high = _continue(params, f, c0, np.full(f.m, r2), steps, tol, "High")
    dist = float(np.max(np.abs(low.h.values - high.h.values)))
    mass = f.l1_norm()
    thr = math.nan if threshold is None else float(threshold)
    return TwoBranchResult(low, high, dist, c0, (r1, r2), mass, thr,
                           bool(threshold is not None and mass < threshold), lin, dist < 1e-6)


def manufactured_forcing(params, h_func, dh_func, d2h_func, m):
    """f that makes the given smooth support function an exact solution."""
    theta = 2.0 * np.pi * np.arange(m) / m
    h, dh, d2h = h_func(theta), dh_func(theta), d2h_func(theta)
    W, _ = _weight(params, np.sqrt(h * h + dh * dh))
    return PeriodicField((d2h + h) / (normalizer(params) * h ** (params.p - 1.0) * W))


def monotonicity_map(params, t, cval):
    """t^(p-n) [1 - (q/alpha)(1 + c^2)^(alpha/2) t^alpha]^(1 + n/alpha - 1/q) (q != 0)."""
    n, a, q, p = params.n, params.alpha, params.q, params.p
    t = np.asarray(t, dtype=float)
    if q == 0:
        return t ** (p - n) * np.exp((1.0 + cval * cval) ** (a / 2.0) * t**a / a)
    B = 1.0 - (q / a) * (1.0 + cval * cval) ** (a / 2.0) * t**a
    return t ** (p - n) * np.where(B > 0, np.abs(B) ** (-params.exponent), np.nan)
