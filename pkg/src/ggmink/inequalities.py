"""Randomized checks of the weighted Brunn-Minkowski and L_p isoperimetric
inequalities, the comparison G >= G~, and the mass threshold bookkeeping."""

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .density import Params, density_at, sphere_area
from .errors import DomainError, PreconditionError
from .geometry import (Polytope, SupportVector, antipode_index, canonicalize, lp_combine,
                       minkowski_combination, sphere_grid, wulff_shape)
from .measures import divergence_defect, gtilde, body_power_integral, scale_to_mass, volume_and_facet_masses

EPS_QUAD = 1e-6
DEFAULT_LAMBDAS = tuple(np.linspace(0.0, 1.0, 9))


@dataclass
class DefectReport:
    """Outcome of a batch of inequality evaluations.

    ``violations`` holds one dict per evaluation whose defect fell below
    ``-tolerance``; ``records`` keeps every evaluation for CSV export.
    """

    name: str
    tolerance: float
    trials: int = 0
    min_defect: float = float("inf")
    violations: list = field(default_factory=list)
    records: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def ok(self):
        return not self.violations

    def add(self, defect, **inputs):
        defect = float(defect)
        self.trials += 1
        self.min_defect = min(self.min_defect, defect)
        row = dict(inputs, defect=defect)
        self.records.append(row)
        if defect < -self.tolerance:
            self.violations.append(row)

    def merge(self, other):
        self.trials += other.trials
        self.min_defect = min(self.min_defect, other.min_defect)
        self.violations.extend(other.violations)
        self.records.extend(other.records)
        for k, v in other.extra.items():
            if isinstance(v, (int, float)) and k.startswith("max_"):
                self.extra[k] = max(self.extra.get(k, v), v)
            else:
                self.extra[k] = v
        return self

    def to_dict(self, include_records=False):
        out = {"name": self.name, "trials": self.trials, "min_defect": self.min_defect,
               "tolerance": self.tolerance, "ok": self.ok, "violations": self.violations,
               "extra": self.extra}
        if include_records:
            out["records"] = self.records
        return out

    def to_json(self, **kw):
        kw.setdefault("sort_keys", True)
        return json.dumps(self.to_dict(), **kw)

    def to_csv(self):
        keys = sorted({k for r in self.records for k in r})
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        for r in self.records:
            w.writerow({k: (json.dumps(v) if isinstance(v, (list, dict)) else v) for k, v in r.items()})
        return buf.getvalue()


def _require_subcritical(params):
    if not params.q_subcritical:
        raise PreconditionError(f"need q < alpha/(n + alpha) = {params.alpha / (params.n + params.alpha):.6g}")


def random_symmetric_body(seed, n, scale_range=(0.5, 2.0), m=None):
    """Seeded o-symmetric body as canonical support numbers on an antipodal grid.

    The body is a random zonotope-like hull  conv{+-x_j}  plus a ball summand,
    rescaled so its mean support number is uniform in ``scale_range``.
    """
    rng = np.random.default_rng(seed)
    grid = sphere_grid(n, m)
    k = int(rng.integers(2, 7))
    pts = rng.normal(size=(k, n)) * rng.uniform(0.2, 1.0, size=n)
    h = np.max(np.abs(grid @ pts.T), axis=1)
    h = h / h.mean() + rng.uniform(0.02, 0.5)
    h *= rng.uniform(*scale_range) / h.mean()
    return canonicalize(SupportVector(grid, h))


def _is_even(z, tol=1e-12):
    anti = antipode_index(z.grid)
    if anti is None:
        return False
    return bool(np.all(np.abs(z.values[anti] - z.values) <= tol * np.max(z.values)))


def check_brunn_minkowski(params, K, L, lambdas=DEFAULT_LAMBDAS, tol=EPS_QUAD, tag=None):
    """Defects G((1-l)K + lL)^(1/n) - (1-l)G(K)^(1/n) - l G(L)^(1/n).

    In the plane the Minkowski combination of two Wulff shapes on one grid is
    the Wulff shape of the combined support numbers; in space it is formed
    from pairwise vertex sums.
    """
    _require_subcritical(params)
    if not (_is_even(K) and _is_even(L)):
        raise PreconditionError("Brunn-Minkowski check needs o-symmetric support vectors")
    n = params.n
    PK, PL = wulff_shape(K), wulff_shape(L)
    gk = volume_and_facet_masses(params, PK)[0] ** (1.0 / n)
    gl = volume_and_facet_masses(params, PL)[0] ** (1.0 / n)
    rep = DefectReport("brunn-minkowski", tol)
    for lam in lambdas:
        lam = float(lam)
        if lam == 0.0 or lam == 1.0:
            defect = 0.0
        else:
            if n == 2:
                M = wulff_shape(lp_combine(K, L, lam, 1.0))
            else:
                M = minkowski_combination(PK, PL, lam)
            gm = volume_and_facet_masses(params, M)[0] ** (1.0 / n)
            defect = gm - (1.0 - lam) * gk - lam * gl
        rep.add(defect, **{"lambda": lam, "tag": tag, "params": params.as_dict()})
    return rep


def _isoperimetric_terms(params, K, masses=None):
    G, S = volume_and_facet_masses(params, K) if masses is None else masses
    h = K.supports
    p = params.p
    return G, float(S.sum()), float(np.dot(h ** (1.0 - p), S)), float(np.dot(h, S)) / params.n


def check_lp_isoperimetric(params, K, tol=EPS_QUAD, tag=None, masses=None):
    """|S_p(K)| - (n G(K))^(1-p) |S(K)|^p  for p >= 1.

    ``masses`` may carry a precomputed ``volume_and_facet_masses`` result,
    which does not depend on p.
    """
    if params.p < 1:
        raise PreconditionError("the L_p isoperimetric inequality needs p >= 1")
    _require_subcritical(params)
    G, S_total, Sp_total, Gt = _isoperimetric_terms(params, K, masses)
    n, p = params.n, params.p
    rep = DefectReport("lp-isoperimetric", tol)
    rep.add(Sp_total - (n * G) ** (1.0 - p) * S_total**p,
            tag=tag, params=params.as_dict(),
            holder_defect=Sp_total - (n * Gt) ** (1.0 - p) * S_total**p)
    return rep


def check_gtilde(params, K, tol=EPS_QUAD, tag=None):
    """G(K) - G~(K), with a second route through the divergence identity.

    G - G~ = growth * B(K) / n up to the divergence residual; the gap between
    the two routes is reported as ``route_gap``.
    """
    _require_subcritical(params)
    G = volume_and_facet_masses(params, K)[0]
    direct = G - gtilde(params, K)
    via_divergence = params.growth * body_power_integral(params, K) / params.n
    rep = DefectReport("gtilde", tol)
    rep.add(direct, tag=tag, params=params.as_dict(), route_gap=abs(direct - via_divergence))
    rep.extra["max_route_gap"] = abs(direct - via_divergence)
    return rep


def check_divergence(params, K, tol=1e-5, tag=None):
    """Report -|divergence identity residual| so that violations mean |residual| > tol."""
    rep = DefectReport("divergence", tol)
    rep.add(-abs(divergence_defect(params, K)), tag=tag, params=params.as_dict())
    return rep


def threshold_report(params, I_half):
    """Mass threshold (n/2)^(1-p) I_half^p below which small-mass results apply."""
    if params.p < 1:
        raise PreconditionError("the threshold is defined for p >= 1")
    if not I_half > 0 or not np.isfinite(I_half):
        raise DomainError("I_half must be a positive finite number")
    return (params.n / 2.0) ** (1.0 - params.p) * float(I_half) ** params.p


def weighted_perimeter_at_half(params, K):
    """|S(tK)| with t chosen so G(tK) = 1/2."""
    _, _, _, S = scale_to_mass(params, K, 0.5)
    return float(S.sum())


def estimate_half_profile(params, trials=100, seed=0, m=None):
    """Sampled minimum of the weighted perimeter over o-symmetric bodies of mass 1/2.

    The family is ball + random symmetric hull with a random relative size,
    so near-round bodies are sampled densely.  The result bounds the infimum
    over that class from above; it is an estimate, not the isoperimetric
    profile itself.
    """
    n = params.n
    grid = sphere_grid(n, m)
    rng = np.random.default_rng(seed)
    best, best_trial = np.inf, -1
    for t in range(trials):
        k = int(rng.integers(1, 5))
        pts = rng.normal(size=(k, n))
        h = 1.0 + rng.uniform(0.0, 0.6) * np.max(np.abs(grid @ pts.T), axis=1) / np.sqrt(n)
        K = wulff_shape(SupportVector(grid, h))
        val = weighted_perimeter_at_half(params, K)
        if val < best:
            best, best_trial = val, t
    return {"estimate": best, "trials": trials, "seed": seed, "best_trial": best_trial,
            "label": "sampled minimum over o-symmetric bodies with G = 1/2 (upper estimate)"}


def ball_perimeter_at_half(params, m=None):
    return weighted_perimeter_at_half(params, Polytope.ball(params.n, 1.0, m))


def weak_convergence_check(params, test_fn=None, sizes=None, radius=1.0):
    """Pairings of a smooth test function with S(K_i) for polytopes K_i -> ball.

    K_i are circumscribed polytopes on refining grids; the limit pairing is
    g(R) R^(n-1) times the sphere integral of the test function.  The
    default test function 1 + u_1^2 integrates to |S^(n-1)| (1 + 1/n).
    """
    n = params.n
    if test_fn is None:
        def test_fn(u):
            return 1.0 + u[:, 0] ** 2

        sphere_integral = sphere_area(n) * (1.0 + 1.0 / n)
    else:
        sphere_integral = _sphere_integral(test_fn, n)
    if sizes is None:
        sizes = (8, 16, 32, 64, 128, 256, 512) if n == 2 else (32, 64, 128, 256, 512, 1024)
    limit = float(density_at(params, radius)) * radius ** (n - 1) * sphere_integral
    rows = []
    for m in sizes:
        K = Polytope.ball(n, radius, m)
        _, S = volume_and_facet_masses(params, K)
        pairing = float(np.dot(test_fn(K.normals), S))
        hd = float(np.max(np.linalg.norm(K.vertices, axis=1)) - radius)
        rows.append({"m": int(m), "hausdorff": hd, "pairing": pairing, "gap": abs(pairing - limit)})
    rows.sort(key=lambda r: -r["hausdorff"])
    gaps = [r["gap"] for r in rows]
    monotone = all(b <= a for a, b in zip(gaps, gaps[1:]))
    return {"limit": limit, "rows": rows, "monotone": monotone, "final_gap": gaps[-1]}


def _sphere_integral(fn, n):
    from scipy import integrate

    if n == 2:
        return integrate.quad(lambda t: float(fn(np.array([[np.cos(t), np.sin(t)]]))[0]), 0, 2 * np.pi,
                              limit=200, epsabs=1e-13)[0]

    def inner(phi, theta):
        u = np.array([[np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)]])
        return float(fn(u)[0]) * np.sin(theta)

    return integrate.dblquad(inner, 0, np.pi, 0, 2 * np.pi, epsabs=1e-12)[0]


# ---------------------------------------------------------------- suites

def default_param_grid(n, p=1.0):
    """(alpha, q) pairs with q < alpha/(n + alpha): negative, zero and positive q."""
    out = []
    for alpha in (0.5, 1.0, 2.0, 3.0):
        crit = alpha / (n + alpha)
        for q in (-0.5, 0.0, 0.5 * crit):
            out.append(Params(n, alpha, q, p))
    return out


SUITES = ("brunn-minkowski", "lp-isoperimetric", "gtilde", "divergence")


def run_suite(name, n, trials, seed=0, params_list=None, grid=None, lambdas=DEFAULT_LAMBDAS,
              p_values=(1.0, 1.5, 2.0, 3.0), tol=None):
    """Run ``trials`` seeded evaluations of one suite, cycling over the parameter grid."""
    if name not in SUITES:
        raise DomainError(f"unknown suite {name!r}; choose from {SUITES}")
    params_list = list(params_list or default_param_grid(n))
    if grid is None:
        grid = 256 if n == 2 else (64 if name == "brunn-minkowski" else 256)
    report = DefectReport(name, tol if tol is not None else (1e-5 if name == "divergence" else EPS_QUAD))
    for t in range(trials):
        params = params_list[t % len(params_list)]
        s = seed * 1_000_003 + t
        K = random_symmetric_body(s, n, m=grid)
        if name == "brunn-minkowski":
            L = random_symmetric_body(s + 500_000, n, m=grid)
            rep = check_brunn_minkowski(params, K, L, lambdas, report.tolerance, tag=s)
        else:
            P = wulff_shape(K)
            if name == "lp-isoperimetric":
                rep = DefectReport(name, report.tolerance)
                masses = volume_and_facet_masses(params, P)
                for p in p_values:
                    rep.merge(check_lp_isoperimetric(params.with_p(p), P, report.tolerance, tag=s, masses=masses))
            elif name == "gtilde":
                rep = check_gtilde(params, P, report.tolerance, tag=s)
            else:
                rep = check_divergence(params, P, report.tolerance, tag=s)
        report.merge(rep)
    report.extra.update({"n": n, "seed": seed, "grid": grid, "param_sets": len(params_list)})
    return report


def suite_from_config(cfg):
    """Run a suite described by a config dict (keys as in :func:`run_suite`)."""
    try:
        name = cfg["suite"]
        n = int(cfg.get("n", 2))
        params_list = None
        if "params" in cfg:
            params_list = [Params(int(r[0]), float(r[1]), float(r[2]), float(r[3]) if len(r) > 3 else 1.0)
                           for r in cfg["params"]]
        return run_suite(name, n, int(cfg.get("trials", 20)), int(cfg.get("seed", 0)), params_list,
                         cfg.get("grid"), tuple(cfg.get("lambdas", DEFAULT_LAMBDAS)),
                         tuple(cfg.get("p_values", (1.0, 1.5, 2.0, 3.0))), cfg.get("tol"))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, DomainError):
            raise
        raise DomainError(f"malformed suite config: {exc}") from None
