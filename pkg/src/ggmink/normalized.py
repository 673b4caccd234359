"""Normalized L_p Minkowski problem for discrete measures.

Given atoms (v_i, mu_i) and a target volume c, maximize

    phi(z) = -(1/p) sum_i mu_i z_i^p   subject to   G([z]) = c,

over support numbers z on the atom directions, where [z] is the Wulff shape.
At a maximizer the L_p surface measure of [z] is a multiple of mu.

The search runs in x = log z.  Each x is mapped onto the constraint surface
by rescaling the body (G of t[z] is increasing in t), so every iterate is
exactly feasible and the reduced objective has the gradient

    dJ/dx_j = mu_j z_j^p - (sum mu z^p) (S_j z_j) / (sum S z),

with J = -phi and S_j the facet masses.  J is decreased by L-BFGS with an
Armijo line search, so phi ascends monotonically along accepted iterates.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .density import Params, ball_radius_for_mass
from .errors import (DomainError, InadmissibleParamsError, NonConvergenceError, PreconditionError,
                     UnboundedBodyError)
from .geometry import Polytope, SupportVector, _hull_facets, antipode_index, wulff_shape
from .measures import scale_to_mass, volume_and_facet_masses

class InconsistentMultiplierError(NonConvergenceError):
    """Atomwise ratios S_p / mu disagree with the aggregate multiplier."""


@dataclass(frozen=True)
class DiscreteMeasure:
    directions: np.ndarray
    weights: np.ndarray
    even: bool = False

    def __post_init__(self):
        d = np.atleast_2d(np.asarray(self.directions, dtype=float))
        w = np.asarray(self.weights, dtype=float).ravel()
        if d.shape[0] != w.size or d.shape[1] not in (2, 3):
            raise DomainError("directions must be (k, 2) or (k, 3) with one weight each")
        if np.any(np.abs(np.linalg.norm(d, axis=1) - 1.0) > 1e-12):
            raise DomainError("atom directions must be unit vectors")
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise DomainError("atom weights must be finite and > 0")
        if self.even:
            anti = antipode_index(d)
            if anti is None or np.any(np.abs(w[anti] - w) > 1e-12 * w):
                raise DomainError("even measure must be antipodally symmetric with equal weights")
        for name, v in (("directions", d), ("weights", w)):
            v = v.copy()
            v.flags.writeable = False
            object.__setattr__(self, name, v)

    @property
    def n(self):
        return self.directions.shape[1]

    @property
    def total(self):
        return float(self.weights.sum())

    def scaled(self, s):
        return DiscreteMeasure(self.directions, s * self.weights, self.even)

    def rotated(self, rot):
        d = self.directions @ np.asarray(rot, dtype=float).T
        return DiscreteMeasure(d / np.linalg.norm(d, axis=1)[:, None], self.weights, self.even)

    def to_dict(self):
        return {"atoms": [{"dir": v.tolist(), "w": float(w)} for v, w in zip(self.directions, self.weights)],
                "even": bool(self.even)}

    @classmethod
    def from_dict(cls, data):
        try:
            atoms = data["atoms"]
            d = np.array([a["dir"] for a in atoms], dtype=float)
            w = np.array([a["w"] for a in atoms], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise DomainError(f"malformed measure: {exc}") from None
        d = d / np.linalg.norm(d, axis=1)[:, None]
        return cls(d, w, bool(data.get("even", False)))


def check_not_concentrated(mu, mode="Hemisphere"):
    """(ok, witness).  ``witness`` u has u . v_i <= 0 for all atoms (Hemisphere)
    or u . v_i = 0 for all atoms (GreatSubsphere)."""
    V = mu.directions
    n = mu.n
    _, s, vt = np.linalg.svd(V, full_matrices=True)
    sing = np.zeros(n)
    sing[: len(s)] = s
    if mode == "GreatSubsphere":
        if sing[-1] <= 1e-10 * max(1.0, sing[0]) or len(V) < n:
            return False, _tidy(vt[-1])
        return True, None
    if mode != "Hemisphere":
        raise DomainError(f"unknown mode {mode!r}")
    if len(V) < n + 1 or sing[-1] <= 1e-10:
        u = vt[-1]
        return False, _tidy(u if np.all(V @ u <= 1e-10) else -u)
    # the atoms avoid every closed hemisphere iff 0 is interior to their hull
    try:
        normals, offsets, _ = _hull_facets(V)
    except UnboundedBodyError:
        return False, _tidy(vt[-1])
    k = int(np.argmin(offsets))
    if offsets[k] <= 1e-12:
        return False, _tidy(normals[k])
    return True, None


def _tidy(u):
    u = np.asarray(u, dtype=float)
    u = np.where(np.abs(u) < 1e-14, 0.0, u)
    return u / np.linalg.norm(u)


@dataclass
class NormalizedSolution:
    body: Polytope
    support_numbers: np.ndarray
    multiplier: float
    target_volume: float
    volume: float
    first_order_residual: float
    measure_residual: float
    projected_gradient_ratio: float
    iterations: int
    objective: float
    inactive_atoms: list
    log: list = field(default_factory=list)

    def summary(self):
        return {"multiplier": self.multiplier, "target_volume": self.target_volume, "volume": self.volume,
                "first_order_residual": self.first_order_residual, "measure_residual": self.measure_residual,
                "projected_gradient_ratio": self.projected_gradient_ratio, "iterations": self.iterations,
                "objective": self.objective, "inactive_atoms": list(self.inactive_atoms),
                "support_numbers": [float(v) for v in self.support_numbers]}

    def to_dict(self, params):
        out = self.summary()
        out["params"] = params.as_dict()
        out["body"] = self.body.to_dict()
        out["log"] = self.log
        return out


class _Problem:
    """Feasible evaluation of the reduced objective for a fixed measure."""

    def __init__(self, params, mu, c, tie=None):
        self.params = params
        self.mu = mu
        self.c = c
        self.p = params.p
        self.w = mu.weights
        self.tie = tie  # representative index per atom (even mode)

    def expand(self, y):
        return y if self.tie is None else y[self.tie]

    def retract(self, x):
        """Support numbers, body, G and atom facet masses with G = c."""
        z0 = np.exp(x)
        K0 = wulff_shape(SupportVector(self.mu.directions, z0))
        K, t, G, S = scale_to_mass(self.params, K0, self.c)
        facet_mass = np.zeros(len(z0))
        facet_mass[K.source] = S
        return t * z0, K, G, facet_mass

    def evaluate(self, y):
        x = self.expand(y)
        z, K, G, S = self.retract(x)
        zp = z**self.p
        J = float(np.dot(self.w, zp)) / self.p
        wz = float(np.dot(self.w, zp))
        sz = float(np.dot(S, z))
        grad = self.w * zp - wz * S * z / sz
        if self.tie is not None:
            g = np.zeros_like(y)
            np.add.at(g, self.tie, grad)
            grad = g
        return J, grad, (z, K, G, S)


def _diagnostics(params, mu, z, K, G, S):
    p = params.p
    sp_atoms = z ** (1.0 - p) * S
    sp_norm = sp_atoms / sp_atoms.sum()
    mu_norm = mu.weights / mu.total
    meas_res = float(np.max(np.abs(sp_norm - mu_norm)))
    grad_phi = -mu.weights * z ** (p - 1.0)
    proj = grad_phi - (np.dot(grad_phi, S) / np.dot(S, S)) * S
    ratio = float(np.linalg.norm(proj) / np.linalg.norm(grad_phi))
    return meas_res, ratio, sp_atoms


_STALL_ACCEPT = 5
_STALL_ABORT = 20


def _lbfgs(prob, y0, tol_meas, tol_proj, max_iter, memory=10):
    y = y0.copy()
    J, g, data = prob.evaluate(y)
    S_hist, Y_hist = [], []
    log = []
    stalled = 0  # consecutive steps that left the objective unchanged to round-off
    for it in range(max_iter):
        z, K, G, S = data
        meas, ratio, _ = _diagnostics(prob.params, prob.mu, z, K, G, S)
        log.append({"iter": it, "objective": -J, "measure_residual": meas, "projected_gradient_ratio": ratio})
        if meas <= tol_meas and (ratio <= tol_proj or stalled >= _STALL_ACCEPT):
            log[-1]["stalled"] = ratio > tol_proj
            return y, J, data, it, log
        if stalled >= _STALL_ABORT:
            log[-1]["stalled"] = True
            return y, J, data, it, log
        q = g.copy()
        alphas = []
        for s, yv in reversed(list(zip(S_hist, Y_hist))):
            a = np.dot(s, q) / np.dot(yv, s)
            alphas.append(a)
            q -= a * yv
        if S_hist:
            q *= np.dot(S_hist[-1], Y_hist[-1]) / np.dot(Y_hist[-1], Y_hist[-1])
        else:
            q *= 0.1 / max(float(np.max(np.abs(g))), 1e-300)
        for (s, yv), a in zip(zip(S_hist, Y_hist), reversed(alphas)):
            b = np.dot(yv, q) / np.dot(yv, s)
            q += (a - b) * s
        d = -q
        slope = float(np.dot(g, d))
        if slope >= 0:
            d = -g * (0.1 / max(np.max(np.abs(g)), 1e-300))
            slope = float(np.dot(g, d))
            S_hist.clear()
            Y_hist.clear()
        dmax = float(np.max(np.abs(d)))
        if dmax > 1.0:
            d *= 1.0 / dmax
            slope /= dmax
        lam = 1.0
        while True:
            y_new = y + lam * d
            try:
                J_new, g_new, data_new = prob.evaluate(y_new)
                ok = J_new <= J + 1e-4 * lam * slope
            except (UnboundedBodyError, NonConvergenceError, DomainError):
                ok = False
            if ok:
                break
            lam *= 0.5
            if lam < 1e-12:
                log[-1]["line_search_collapsed"] = True
                return y, J, data, it, log
        s = y_new - y
        yv = g_new - g
        if np.dot(s, yv) > 1e-14 * np.linalg.norm(s) * np.linalg.norm(yv):
            S_hist.append(s)
            Y_hist.append(yv)
            if len(S_hist) > memory:
                S_hist.pop(0)
                Y_hist.pop(0)
        stalled = stalled + 1 if abs(J_new - J) <= 1e-15 * max(1.0, abs(J)) else 0
        # recentre along the flat direction (1, ..., 1); J and g are unchanged
        shift = math.log(float(np.mean(data_new[0] / np.exp(prob.expand(y_new)))))
        y, J, g, data = y_new + shift, J_new, g_new, data_new
    raise NonConvergenceError(f"no convergence in {max_iter} iterations", {"log": log[-5:]})


def _measure_misfit(prob, y):
    z, K, G, S = prob.retract(prob.expand(y))
    sp = z ** (1.0 - prob.p) * S
    return sp / sp.sum() - prob.w / prob.w.sum(), (z, K, G, S)


def _polish(prob, y, tol_meas, max_iter=40, step=1e-7):
    """Damped Gauss-Newton on the normalized-measure misfit.

    Used when the objective is flat to round-off before the measure
    tolerance is met (strongly negative p, near-duplicate atoms).  The
    Jacobian in log support numbers comes from central differences; the
    common-scale direction is in its null space and lstsq ignores it.
    """
    r, data = _measure_misfit(prob, y)
    norm = float(np.linalg.norm(r))
    for _ in range(max_iter):
        if float(np.max(np.abs(r))) <= 0.1 * tol_meas:
            break
        jac = np.empty((r.size, y.size))
        for j in range(y.size):
            e = np.zeros(y.size)
            e[j] = step
            jac[:, j] = (_measure_misfit(prob, y + e)[0] - _measure_misfit(prob, y - e)[0]) / (2.0 * step)
        dy = np.linalg.lstsq(jac, -r, rcond=1e-12)[0]
        lam = 1.0
        while lam >= 1e-6:
            try:
                with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                    r_new, data_new = _measure_misfit(prob, y + lam * dy)
                if not np.all(np.isfinite(r_new)):
                    raise NonConvergenceError("non-finite misfit", {})
            except (UnboundedBodyError, NonConvergenceError, DomainError):
                lam *= 0.5
                continue
            n_new = float(np.linalg.norm(r_new))
            if n_new < norm:
                y, r, data, norm = y + lam * dy, r_new, data_new, n_new
                break
            lam *= 0.5
        else:
            break
    return y, data


def _continue_in_p(params, mu, c, tie, tol, max_iter, min_step=1e-3):
    """Track the solution from a milder exponent p/4 down to p.

    For strongly negative p the reduced objective can decrease along an
    escape in which some support numbers grow without their facets gaining
    mass, so the direct solve may stop far from the solution.  The solution
    branch itself moves continuously in p and Gauss-Newton follows it.
    """
    start = _solve(params.with_p(params.p / 4), mu, c, tie, tol, max_iter, continued=True)
    y = np.log(start.support_numbers[np.unique(tie, return_index=True)[1]])
    p, dp = params.p / 4, params.p / 8
    data = None
    while p > params.p:
        p_new = max(p + dp, params.p)
        prob = _Problem(params.with_p(p_new), mu, c, tie)
        y_new, data_new = _polish(prob, y, tol)
        if float(np.max(np.abs(_measure_misfit(prob, y_new)[0]))) <= tol:
            p, y, data = p_new, y_new, data_new
            dp *= 1.5
        else:
            dp /= 2
            if abs(dp) < min_step:
                raise NonConvergenceError("continuation in p stalled", {"p": p, "target": params.p})
    return y, data


def _solve(params, mu, c, tie, tol, max_iter, continued=False):
    prob = _Problem(params, mu, c, tie)
    r0 = ball_radius_for_mass(params, c)
    size = mu.weights.size if tie is None else int(tie.max()) + 1
    y0 = np.full(size, math.log(r0))
    y, J, data, iters, log = _lbfgs(prob, y0, tol, 1e-6, max_iter)
    z, K, G, S = data
    meas, ratio, sp_atoms = _diagnostics(params, mu, z, K, G, S)
    if meas > tol:
        y, data = _polish(prob, y, tol)
        z, K, G, S = data
        meas, ratio, sp_atoms = _diagnostics(params, mu, z, K, G, S)
        J = float(np.dot(mu.weights, z**params.p)) / params.p
        log.append({"iter": iters, "objective": -J, "measure_residual": meas,
                    "projected_gradient_ratio": ratio, "polished": True})
        if meas > tol and tie is not None and params.p < 0 and not continued:
            y, data = _continue_in_p(params, mu, c, tie, tol, max_iter)
            z, K, G, S = data
            meas, ratio, sp_atoms = _diagnostics(params, mu, z, K, G, S)
            J = float(np.dot(mu.weights, z**params.p)) / params.p
            log.append({"iter": iters, "objective": -J, "measure_residual": meas,
                        "projected_gradient_ratio": ratio, "continued": True})
        if meas > tol:
            raise NonConvergenceError("measure residual above tolerance after polishing",
                                      {"measure_residual": meas, "projected_gradient_ratio": ratio,
                                       "log": log[-5:]})
    inactive = [int(i) for i in np.nonzero(S <= 0)[0]]
    lam = float(sp_atoms.sum() / mu.total)
    first_order = float(np.max(np.abs(sp_atoms - lam * mu.weights)) / max(lam * mu.weights.max(), 1e-300))
    if abs(G - c) > 1e-7:
        raise NonConvergenceError("volume constraint violated", {"G": G, "c": c})
    return NormalizedSolution(K, z, lam, c, G, first_order, meas, ratio, iters, -J, inactive, log)


def solve_normalized(params, mu, c, tol=1e-5, max_iter=5000):
    """Body with G = c whose L_p surface measure is proportional to mu (p > 0)."""
    if params.p <= 0:
        raise DomainError("solve_normalized needs p > 0; use solve_normalized_even for p < 0")
    if mu.n != params.n:
        raise DomainError("measure dimension does not match n")
    if not 0.0 < c < 1.0:
        raise DomainError(f"c must lie in (0, 1), got {c}")
    if not mu.even and c < 0.5:
        raise PreconditionError("c < 1/2 is only supported for even measures")
    ok, witness = check_not_concentrated(mu, "Hemisphere")
    if not ok:
        raise PreconditionError(f"measure is concentrated on the closed hemisphere {{v : v . u <= 0}}, "
                                f"u = {witness.tolist()}")
    tie = _tie_index(mu) if mu.even else None
    return _solve(params, mu, c, tie, tol, max_iter)


def _tie_index(mu):
    anti = antipode_index(mu.directions)
    rep = np.minimum(np.arange(len(anti)), anti)
    _, tie = np.unique(rep, return_inverse=True)
    return tie


def solve_normalized_even(params, mu, c, tol=1e-5, max_iter=5000):
    """o-symmetric solution for even mu and admissible negative p."""
    if not params.p_negative_admissible:
        raise InadmissibleParamsError(
            "inadmissible (p, q): need q < 0 with alpha/q - alpha < p < 0, "
            "or 0 <= q < alpha/(n + alpha) with p < 0")
    if not mu.even:
        raise PreconditionError("solve_normalized_even needs an even measure")
    if mu.n != params.n:
        raise DomainError("measure dimension does not match n")
    if not 0.0 < c < 1.0:
        raise DomainError(f"c must lie in (0, 1), got {c}")
    ok, witness = check_not_concentrated(mu, "GreatSubsphere")
    if not ok:
        raise PreconditionError(f"measure is concentrated on the great subsphere orthogonal to {witness.tolist()}")
    return _solve(params, mu, c, _tie_index(mu), tol, max_iter)


def recover_multiplier(sol, mu, params, tol=1e-4):
    """lambda = |S_p| / |mu|, checked atom by atom against S_p = lambda mu."""
    K = sol.body
    _, S = volume_and_facet_masses(params, K)
    atoms = np.zeros(len(mu.weights))
    atoms[K.source] = K.supports ** (1.0 - params.p) * S
    lam = float(atoms.sum() / mu.total)
    dev = float(np.max(np.abs(atoms / mu.weights - lam)) / lam)
    if dev > tol:
        raise InconsistentMultiplierError(f"atom ratios deviate from lambda by {dev:.3g}", {"deviation": dev})
    return lam


def problem_from_json(text):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DomainError(f"problem is not valid JSON: {exc}") from None
    try:
        pr = data["params"]
        if isinstance(pr, (list, tuple)):
            pr = dict(zip(("n", "alpha", "q", "p"), pr))
        params = Params(int(pr["n"]), float(pr["alpha"]), float(pr["q"]), float(pr.get("p", 1.0)))
        mu = DiscreteMeasure.from_dict(data["measure"])
        c = float(data["c"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DomainError(f"malformed problem JSON: {exc}") from None
    return params, mu, c


def solve_problem(params, mu, c, tol=1e-5):
    """Dispatch on the sign of p."""
    if params.p > 0:
        return solve_normalized(params, mu, c, tol)
    if params.p < 0:
        return solve_normalized_even(params, mu, c, tol)
    raise DomainError("p = 0 is not supported")


__all__ = ["DiscreteMeasure", "NormalizedSolution", "InconsistentMultiplierError", "check_not_concentrated",
           "solve_normalized", "solve_normalized_even", "recover_multiplier", "problem_from_json",
           "solve_problem"]
