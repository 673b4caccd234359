"""Generalized Gaussian volume and weighted surface measures of polytopes.

Everything reduces to integrals over facets.  Splitting K into cones from the
origin over its facets F_i (support h_i),

    G(K) = sum_i h_i * int_{F_i} m(|y|) |y|^(-n) dA(y),

where m(rho) = int_0^rho g(r) r^(n-1) dr is the radial mass in closed form.
In the plane each facet is a segment and the integral is one-dimensional.
In space the facet integral is taken in polar coordinates around the foot
point h_i * nu_i; the inner radial integral then has the closed
antiderivative  -m(rho)/rho + int_0^rho g(r) r dr  (for n = 3), so only a
one-dimensional integral along every polygon edge remains.  Those 1-d
integrals are computed by vectorized adaptive Gauss-Legendre with breaks at
the foot of the perpendicular and at the support cutoff of the density.
"""

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .density import Params, normalizer, radial_integral, support_cutoff
from .errors import DomainError, NonConvergenceError
from .geometry import Polytope, SupportVector, wulff_shape

_GL_ORDER = 10
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_GL_ORDER)
_ABS_TOL = 1e-13
_MAX_DEPTH = 30


# --------------------------------------------------------------------------
# radial profiles


class _Profile:
    """Radial weight  bracket(r)^(exponent + shift) * r^power / Z.

    ``mass(rho)`` is its integral against r^(n-1) dr, ``first(rho)`` its
    integral against r dr, and ``value(r)`` the pointwise weight.
    """

    def __init__(self, params, shift=0.0, power=0.0):
        self.params = params
        self.shift = shift
        self.power = power
        self.inv_z = 1.0 / normalizer(params)
        self.cutoff = support_cutoff(params)

    def value(self, r):
        P = self.params
        a, q = P.alpha, P.q
        if q == 0:
            return np.exp(-(r**a) / a) * r**self.power * self.inv_z
        base = 1.0 - (q / a) * r**a
        out = np.zeros_like(r)
        pos = base > 0
        out[pos] = np.exp((P.exponent + self.shift) * np.log(base[pos])) * r[pos] ** self.power * self.inv_z
        return out

    def mass(self, rho):
        return radial_integral(self.params, rho, self.params.n - 1 + self.power, self.shift) * self.inv_z

    def first(self, rho):
        return radial_integral(self.params, rho, 1.0 + self.power, self.shift) * self.inv_z

    def cone_antiderivative(self, rho):
        # d/drho of this is mass(rho) / rho^2 (n = 3 only)
        return -self.mass(rho) / rho + self.first(rho)


# --------------------------------------------------------------------------
# vectorized adaptive Gauss-Legendre over many intervals


def _gl(func, owner, lo, hi):
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    s = mid[:, None] + half[:, None] * _GL_X[None, :]
    vals = func(np.repeat(owner, _GL_ORDER), s.ravel()).reshape(s.shape)
    return half * (vals @ _GL_W)


def _integrate(func, owner, lo, hi, n_out, tol=_ABS_TOL):
    """Sum over intervals of  int_lo^hi func(owner, s) ds, accumulated per owner.

    ``func`` is called with flat arrays of owner indices and abscissae.
    Intervals are bisected until the one-panel and two-panel Gauss-Legendre
    values agree to ``tol`` times a size-relative allowance.
    """
    out = np.zeros(n_out)
    owner = np.asarray(owner, dtype=int)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    nz = hi != lo
    owner, lo, hi = owner[nz], lo[nz], hi[nz]
    whole = _gl(func, owner, lo, hi)
    for _ in range(_MAX_DEPTH):
        if owner.size == 0:
            return out
        mid = 0.5 * (lo + hi)
        left = _gl(func, owner, lo, mid)
        right = _gl(func, owner, mid, hi)
        halves = left + right
        err = np.abs(halves - whole)
        done = err <= tol + 1e-12 * np.abs(halves)
        np.add.at(out, owner[done], halves[done])
        keep = ~done
        owner, lo, mid, hi = owner[keep], lo[keep], mid[keep], hi[keep]
        owner = np.concatenate([owner, owner])
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
        whole = np.concatenate([left[keep], right[keep]])
    np.add.at(out, owner, whole)
    return out


def _split(owner, lo, hi, breaks):
    """Cut intervals at per-owner break points (array of shape (k, b), nan = none)."""
    pts = np.column_stack([lo, np.sort(breaks, axis=1), hi])
    pts = np.where(np.isnan(pts), hi[:, None], pts)
    pts = np.minimum(np.maximum(pts, lo[:, None]), hi[:, None])
    pts.sort(axis=1)
    o = np.repeat(owner, pts.shape[1] - 1)
    return o, pts[:, :-1].ravel(), pts[:, 1:].ravel()


# --------------------------------------------------------------------------
# facet geometry


def _edges_2d(K):
    """Per facet: tangent coordinates s_a < s_b of the endpoints relative to the foot."""
    h = K.supports
    a = K.vertices[[r[0] for r in K.rings]]
    b = K.vertices[[r[1] for r in K.rings]]
    t = np.column_stack([-K.normals[:, 1], K.normals[:, 0]])
    sa = np.einsum("ij,ij->i", a, t)
    sb = np.einsum("ij,ij->i", b, t)
    return h, np.minimum(sa, sb), np.maximum(sa, sb)


def _edges_3d(K):
    """Flat arrays over all polygon edges: facet index, in-plane foot distance d
    (signed so the facet's angle sweep is positive), and edge coordinates."""
    fac, dd, sa, sb = [], [], [], []
    for i, ring in enumerate(K.rings):
        nu = K.normals[i]
        c = K.supports[i] * nu
        P = K.vertices[ring] - c
        Q = np.roll(P, -1, axis=0)
        e = Q - P
        L = np.linalg.norm(e, axis=1)
        t = e / L[:, None]
        s0 = np.einsum("ij,ij->i", P, t)
        foot = P - s0[:, None] * t
        # (foot x t) . nu as foot . (t x nu), without per-facet np.cross overhead
        tx, ty, tz = t.T
        t_cross_nu = np.column_stack([ty * nu[2] - tz * nu[1], tz * nu[0] - tx * nu[2], tx * nu[1] - ty * nu[0]])
        d = np.einsum("ij,ij->i", foot, t_cross_nu)
        fac.append(np.full(len(ring), i))
        dd.append(d)
        sa.append(s0)
        sb.append(s0 + L)
    return np.concatenate(fac), np.concatenate(dd), np.concatenate(sa), np.concatenate(sb)


def _cutoff_breaks(dist2, cutoff, s_lo, s_hi):
    """Abscissae where |y| crosses the cutoff on a line with |y|^2 = dist2 + s^2."""
    k = len(dist2)
    br = np.full((k, 3), np.nan)
    br[:, 0] = 0.0
    if cutoff is not None:
        rem = cutoff**2 - dist2
        ok = rem > 0
        root = np.sqrt(np.where(ok, rem, 0.0))
        br[ok, 1] = -root[ok]
        br[ok, 2] = root[ok]
    return br


def _facet_integrals(profile, K, tol=_ABS_TOL):
    """Per-facet (cone integral, surface integral) for a radial profile.

    cone_i = h_i * int_{F_i} mass(|y|) |y|^(-n) dA  and
    surf_i = int_{F_i} value(|y|) dA.
    """
    n = K.n
    nf = K.num_facets
    h = K.supports
    cut = profile.cutoff
    if n == 2:
        h, lo, hi = _edges_2d(K)
        owner = np.arange(nf)
        br = _cutoff_breaks(h**2, cut, lo, hi)
        o, a, b = _split(owner, lo, hi, br)
        h2 = h**2

        def cone(idx, s):
            r2 = h2[idx] + s * s
            return profile.mass(np.sqrt(r2)) / r2

        def surf(idx, s):
            return profile.value(np.sqrt(h2[idx] + s * s))

        return h * _integrate(cone, o, a, b, nf, tol), _integrate(surf, o, a, b, nf, tol)
    if n != 3:
        raise DomainError("only n = 2 and n = 3 are supported")
    fac, d, lo, hi = _edges_3d(K)
    hf = h[fac]
    br = _cutoff_breaks(hf**2 + d**2, cut, lo, hi)
    o, a, b = _split(np.arange(len(fac)), lo, hi, br)
    A0 = profile.cone_antiderivative(h)
    F0 = profile.first(h)
    h2 = h**2

    def ring_integrand(anti, base):
        def f(edge, s):
            i = fac[edge]
            R2 = d[edge] ** 2 + s * s
            rho = np.sqrt(h2[i] + R2)
            psi = anti(rho) - base[i]
            # small-R limit is finite; the d factor kills it anyway
            with np.errstate(invalid="ignore", divide="ignore"):
                val = np.where(R2 > 1e-300, psi / R2, 0.0)
            return d[edge] * val

        return f

    econe = _integrate(ring_integrand(profile.cone_antiderivative, A0), o, a, b, len(fac), tol)
    esurf = _integrate(ring_integrand(profile.first, F0), o, a, b, len(fac), tol)
    cone = np.zeros(nf)
    surf = np.zeros(nf)
    np.add.at(cone, fac, econe)
    np.add.at(surf, fac, esurf)
    return h * np.abs(cone), np.abs(surf)


# --------------------------------------------------------------------------
# public operations


@dataclass(frozen=True)
class SurfaceMeasureAtoms:
    """Discrete L_p surface measure: one atom per facet normal."""

    normals: np.ndarray
    weights: np.ndarray
    p: float
    params: Params
    source: np.ndarray = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise DomainError("atom weights must be finite and >= 0")
        object.__setattr__(self, "weights", w)
        nrm = np.asarray(self.normals, dtype=float)
        object.__setattr__(self, "normals", nrm.reshape(len(w), nrm.shape[-1] if nrm.ndim == 2 else -1))

    def __len__(self):
        return len(self.weights)

    def to_dict(self):
        return {
            "params": self.params.as_dict(),
            "p": self.p,
            "atoms": [{"normal": v.tolist(), "weight": float(w)} for v, w in zip(self.normals, self.weights)],
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), sort_keys=True, **kw)

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        dim = self.normals.shape[1] if len(self) else self.params.n
        writer.writerow([f"nu{k}" for k in range(dim)] + ["weight"])
        for v, w in zip(self.normals, self.weights):
            writer.writerow([repr(float(x)) for x in v] + [repr(float(w))])
        return buf.getvalue()


def _check_body(params, K):
    if not isinstance(K, Polytope):
        raise DomainError("expected a Polytope")
    if K.n != params.n:
        raise DomainError(f"body dimension {K.n} does not match n = {params.n}")


def volume_and_facet_masses(params, K, tol=_ABS_TOL):
    """G(K) together with the per-facet surface integrals  int_{F_i} g dA."""
    _check_body(params, K)
    cone, surf = _facet_integrals(_Profile(params), K, tol)
    return float(np.sum(cone)), surf


def scale_to_mass(params, K, c, tol=1e-13, max_iter=100):
    """Dilate K about the origin so that G(tK) = c.

    Newton on log t with bisection safeguards; dG/dlog t = sum_i h_i S_i.
    Returns (tK, t, G, facet masses).
    """
    if not 0.0 < c < 1.0:
        raise DomainError(f"target mass must lie in (0, 1), got {c}")
    s = 0.0
    lo, hi = -math.inf, math.inf
    for _ in range(max_iter):
        tK = K.scaled(math.exp(s))
        G, S = volume_and_facet_masses(params, tK)
        diff = G - c
        if abs(diff) <= tol:
            return tK, math.exp(s), G, S
        if diff > 0:
            hi = s
        else:
            lo = s
        slope = float(np.dot(tK.supports, S))
        step = -diff / slope if slope > 0 else math.copysign(1.0, -diff)
        s_new = s + max(-2.0, min(2.0, step))
        if not lo < s_new < hi:
            if math.isfinite(lo) and math.isfinite(hi):
                s_new = 0.5 * (lo + hi)
            else:
                s_new = s + math.copysign(1.0, -diff)
        if s_new == s:
            return tK, math.exp(s), G, S
        s = s_new
    raise NonConvergenceError("mass rescaling did not converge", {"G": G, "c": c})


def gauss_volume(params, K):
    """G_{alpha,q}(K), the probability the density assigns to K."""
    return volume_and_facet_masses(params, K)[0]


def facet_masses(params, K):
    """int_{F_i} g dA for every facet (the p = 1 surface atoms)."""
    return volume_and_facet_masses(params, K)[1]


def weighted_surface_measure(params, K, p=None):
    """Atoms h_i^(1-p) int_{F_i} g dA of the L_p weighted surface measure."""
    _check_body(params, K)
    p = params.p if p is None else float(p)
    if np.any(K.supports <= 0):
        raise DomainError("facet with nonpositive support")
    w = K.supports ** (1.0 - p) * facet_masses(params, K)
    return SurfaceMeasureAtoms(K.normals.copy(), w, p, params, K.source.copy())


def total_measure(atoms):
    return float(np.sum(atoms.weights)) if len(atoms) else 0.0


def gtilde(params, K):
    """(1/n) sum_i h_i int_{F_i} g dA, i.e. (1/n) int_{dK} (x . nu) g dH."""
    return float(np.dot(K.supports, facet_masses(params, K)) / params.n)


def _check_power_integrable(params, K):
    if params.q > 0 and not params.q_subcritical:
        reach = float(np.max(np.linalg.norm(K.vertices, axis=1)))
        if reach >= support_cutoff(params):
            raise DomainError("power integral diverges: q >= alpha/(n + alpha) and the body meets the support boundary")


def divergence_defect(params, K):
    """Residual of the divergence identity for the vector field x * bracket(|x|).

    Returns  n*G~(K) - [ n*G(K) - growth * B(K) ]  where
    B(K) = (1/Z) int_K bracket^(exponent - 1) |x|^alpha dx  (e^(-|x|^alpha/alpha)
    |x|^alpha for q = 0) and growth = 1 - q n/alpha - q.
    """
    _check_body(params, K)
    _check_power_integrable(params, K)
    n = params.n
    G, surf = volume_and_facet_masses(params, K)
    body, _ = _facet_integrals(_Profile(params, shift=-1.0, power=params.alpha), K)
    lhs = float(np.dot(K.supports, surf))
    return lhs - (n * G - params.growth * float(np.sum(body)))


def body_power_integral(params, K):
    """B(K) from :func:`divergence_defect`."""
    _check_power_integrable(params, K)
    body, _ = _facet_integrals(_Profile(params, shift=-1.0, power=params.alpha), K)
    return float(np.sum(body))


def variational_fd_check(params, K, f, p=None, t_list=(1e-2, 1e-3, 1e-4, 1e-5)):
    """Finite-difference check of the L_p variational formula.

    ``K`` is a Wulff shape built on ``f.grid``; ``f`` supplies positive values
    on that grid.  For each t the quotient  [G([(h^p + t f^p)^(1/p)]) - G(K)] / t
    is compared with  (1/p) sum_i f(nu_i)^p S_p-atom_i.
    """
    p = params.p if p is None else float(p)
    if p == 0:
        raise DomainError("p must be nonzero")
    if not isinstance(f, SupportVector):
        raise DomainError("f must be a SupportVector on the grid of K")
    if np.any(K.source < 0):
        raise DomainError("K must be a Wulff shape on the grid of f")
    G0, surf = volume_and_facet_masses(params, K)
    atoms = K.supports ** (1.0 - p) * surf
    predicted = float(np.dot(f.values[K.source] ** p, atoms) / p)
    h_grid = np.max(f.grid @ K.vertices.T, axis=1)
    rows = []
    for t in t_list:
        vals = h_grid**p + t * f.values**p
        if np.any(vals <= 0):
            raise DomainError(f"step too large: h^p + t f^p <= 0 at t = {t}")
        Gt = gauss_volume(params, wulff_shape(f.with_values(vals ** (1.0 / p))))
        quotient = (Gt - G0) / t
        rows.append({"t": float(t), "quotient": quotient,
                     "rel_error": abs(quotient - predicted) / max(abs(predicted), 1e-300)})
    order = None
    if len(rows) >= 2:
        # slope between the two smallest steps, where the error is asymptotic
        a, b = sorted(rows, key=lambda r: r["t"])[:2]
        if a["rel_error"] > 0 and b["rel_error"] > 0:
            order = math.log(b["rel_error"] / a["rel_error"]) / math.log(b["t"] / a["t"])
    return {"predicted": predicted, "volume": G0, "rows": rows, "observed_order": order}
