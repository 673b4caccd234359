"""Convex polytopes in R^2 and R^3 with support-function and halfspace views.

A body is either a :class:`SupportVector` (candidate support numbers on a
fixed direction grid) or a :class:`Polytope` (facets with vertex rings).
:func:`wulff_shape` turns the former into the latter through polar duality:
the polar of  {x : x.v_i <= z_i}  is the convex hull of the points v_i/z_i,
so every hull facet  a.x = b  of those points gives a Wulff vertex a/b and
every extreme point v_i/z_i gives a Wulff facet with normal v_i.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ShapeError, UnboundedBodyError

_UNIT_TOL = 1e-12
_PLANE_TOL = 1e-10
_AREA_TOL = 1e-12


def _freeze(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


# --------------------------------------------------------------------------
# direction grids


def circle_grid(m=256, offset=0.0):
    """``m`` uniform unit vectors on the circle at angles offset + 2*pi*j/m."""
    theta = offset + 2.0 * np.pi * np.arange(m) / m
    return np.column_stack([np.cos(theta), np.sin(theta)])


def fibonacci_grid(m=512):
    """Antipodally closed quasi-uniform grid on S^2 with ``m`` (even) points.

    The first half is a Fibonacci spiral on the upper hemisphere and the
    second half holds the antipodes, so row ``i + m/2`` is ``-row i``.
    """
    if m % 2 or m < 8:
        raise DomainError("fibonacci grid size must be even and >= 8")
    half = m // 2
    k = np.arange(half)
    z = (k + 0.5) / half
    golden = np.pi * (3.0 - np.sqrt(5.0))
    phi = golden * k
    s = np.sqrt(1.0 - z * z)
    upper = np.column_stack([s * np.cos(phi), s * np.sin(phi), z])
    return np.vstack([upper, -upper])


def sphere_grid(n, m=None):
    if n == 2:
        return circle_grid(256 if m is None else m)
    if n == 3:
        return fibonacci_grid(512 if m is None else m)
    raise DomainError(f"only n = 2 and n = 3 are supported, got {n}")


def antipode_index(grid, tol=1e-10):
    """Index of -v_i in the grid for every i, or None if the grid is not closed."""
    from scipy.spatial import cKDTree

    dist, idx = cKDTree(grid).query(-np.asarray(grid))
    if np.any(dist > tol):
        return None
    return idx.astype(int)


def _check_grid(grid):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 2 or grid.shape[1] not in (2, 3):
        raise ShapeError("direction grid must have shape (m, 2) or (m, 3)")
    norms = np.linalg.norm(grid, axis=1)
    if np.any(np.abs(norms - 1.0) > _UNIT_TOL):
        raise DomainError("grid directions must be unit vectors")
    return grid


# --------------------------------------------------------------------------
# support vectors


@dataclass(frozen=True)
class SupportVector:
    """Positive candidate support numbers ``values[i]`` in directions ``grid[i]``."""

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = _check_grid(self.grid)
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 0:
            values = np.full(len(grid), float(values))
        if values.shape != (len(grid),):
            raise ShapeError(f"expected {len(grid)} support values, got shape {values.shape}")
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise DomainError("support values must be finite and > 0")
        object.__setattr__(self, "grid", _freeze(grid))
        object.__setattr__(self, "values", _freeze(values))

    @property
    def n(self):
        return self.grid.shape[1]

    def __len__(self):
        return len(self.values)

    def with_values(self, values):
        return SupportVector(self.grid, values)


# --------------------------------------------------------------------------
# hulls


def _hull2d(points):
    """Counter-clockwise extreme points (indices) by the monotone chain."""
    order = np.lexsort((points[:, 1], points[:, 0]))
    pts = points

    def turns_left(o, a, b):
        # strict left turn, with collinearity judged by the sine of the angle
        ax, ay = pts[a] - pts[o]
        bx, by = pts[b] - pts[o]
        return ax * by - ay * bx > _PLANE_TOL * math.hypot(ax, ay) * math.hypot(bx, by)

    lower, upper = [], []
    for i in order:
        while len(lower) >= 2 and not turns_left(lower[-2], lower[-1], i):
            lower.pop()
        lower.append(i)
    for i in order[::-1]:
        while len(upper) >= 2 and not turns_left(upper[-2], upper[-1], i):
            upper.pop()
        upper.append(i)
    ring = lower[:-1] + upper[:-1]
    if len(ring) < 3:
        raise UnboundedBodyError("points are collinear; hull has empty interior")
    return np.array(ring, dtype=int)


def _hull_facets(points):
    """Facets of conv(points) as (unit normals, offsets, vertex rings).

    Every facet satisfies  normal . x <= offset  on the hull.  Rings are
    index arrays into ``points``: 2-element segments in the plane and
    counter-clockwise (seen from outside) polygons in space.  Coplanar
    triangles of the 3-d hull are merged into single polygonal facets.
    """
    points = np.asarray(points, dtype=float)
    n = points.shape[1]
    if n == 2:
        ring = _hull2d(points)
        a = points[ring]
        b = points[np.roll(ring, -1)]
        edge = b - a
        normals = np.column_stack([edge[:, 1], -edge[:, 0]])
        normals /= np.linalg.norm(normals, axis=1)[:, None]
        offsets = np.einsum("ij,ij->i", normals, a)
        rings = [np.array([i, j]) for i, j in zip(ring, np.roll(ring, -1))]
        return normals, offsets, rings
    from scipy.spatial import ConvexHull, QhullError

    try:
        hull = ConvexHull(points)
    except QhullError as exc:
        raise UnboundedBodyError(f"degenerate point set: {exc}") from None
    eq = hull.equations
    normals = eq[:, :3]
    offsets = -eq[:, 3]
    scale = max(float(np.max(np.abs(points))), 1e-300)
    nsimp = len(eq)
    parent = np.arange(nsimp)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    src = np.repeat(np.arange(nsimp), hull.neighbors.shape[1])
    dst = hull.neighbors.ravel()
    keep = dst > src
    src, dst = src[keep], dst[keep]
    same = (np.max(np.abs(normals[src] - normals[dst]), axis=1) < 1e-9) & (
        np.abs(offsets[src] - offsets[dst]) < 1e-9 * scale)
    for s, t in zip(src[same], dst[same]):
        rs, rt = find(s), find(t)
        if rs != rt:
            parent[max(rs, rt)] = min(rs, rt)
    roots = np.array([find(s) for s in range(nsimp)])
    out_n, out_b, out_r = [], [], []
    for r in np.unique(roots):
        members = np.nonzero(roots == r)[0]
        nrm = normals[members].mean(axis=0)
        nrm /= np.linalg.norm(nrm)
        verts = np.unique(hull.simplices[members].ravel())
        out_n.append(nrm)
        out_b.append(float(np.mean(offsets[members])))
        out_r.append(_order_ring(points[verts], nrm, verts))
    return np.array(out_n), np.array(out_b), out_r


def _cross3(a, b):
    # np.cross carries heavy per-call overhead for single 3-vectors
    return np.array([a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]])


def _plane_basis(normal):
    k = int(np.argmin(np.abs(normal)))
    e = np.zeros(3)
    e[k] = 1.0
    u = _cross3(normal, e)
    u /= math.sqrt(u @ u)
    return u, _cross3(normal, u)


def _order_ring(coords, normal, labels):
    """Sort planar polygon vertices counter-clockwise around ``normal``."""
    u, w = _plane_basis(normal)
    centre = coords.mean(axis=0)
    d = coords - centre
    ang = np.arctan2(d @ w, d @ u)
    return np.asarray(labels)[np.argsort(ang, kind="stable")]


def _polygon_area(coords, normal):
    nxt = np.roll(coords, -1, axis=0)
    x, y, z = coords.T
    xn, yn, zn = nxt.T
    total = np.array([np.sum(y * zn - z * yn), np.sum(z * xn - x * zn), np.sum(x * yn - y * xn)])
    return 0.5 * abs(float(total @ normal))


# --------------------------------------------------------------------------
# polytopes


@dataclass(frozen=True)
class Polytope:
    """A convex polytope containing the origin in its interior.

    Attributes
    ----------
    normals : (k, n) array
        Outward unit facet normals.
    supports : (k,) array
        Support numbers ``h_i > 0``; facet ``i`` lies in  x . normals[i] = supports[i].
    vertices : (V, n) array
    rings : tuple of int arrays
        Vertex indices of each facet (segment endpoints for n = 2, a
        counter-clockwise polygon for n = 3).
    areas : (k,) array
        (n-1)-dimensional facet areas.
    source : (k,) int array
        Index of the grid direction that produced each facet, or -1.
    """

    normals: np.ndarray
    supports: np.ndarray
    vertices: np.ndarray
    rings: tuple
    areas: np.ndarray
    source: np.ndarray = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "normals", _freeze(self.normals))
        object.__setattr__(self, "supports", _freeze(self.supports))
        object.__setattr__(self, "vertices", _freeze(self.vertices))
        object.__setattr__(self, "areas", _freeze(self.areas))
        src = np.full(len(self.supports), -1) if self.source is None else np.asarray(self.source, dtype=int)
        src = src.copy()
        src.flags.writeable = False
        object.__setattr__(self, "source", src)
        object.__setattr__(self, "rings", tuple(np.asarray(r, dtype=int) for r in self.rings))
        if np.any(self.supports <= 0):
            raise DomainError("origin must lie in the interior (all supports > 0)")

    @property
    def n(self):
        return self.vertices.shape[1]

    @property
    def num_facets(self):
        return len(self.supports)

    @property
    def scale(self):
        return float(np.max(np.linalg.norm(self.vertices, axis=1)))

    @property
    def volume(self):
        """Lebesgue volume from the cone decomposition  sum h_i A_i / n."""
        return float(np.dot(self.supports, self.areas) / self.n)

    def facet_coords(self, i):
        return self.vertices[self.rings[i]]

    def support(self, u):
        return support_function(self, u)

    def radial(self, u):
        return radial_function(self, u)

    def scaled(self, s):
        return Polytope(self.normals, s * self.supports, s * self.vertices, self.rings,
                        s ** (self.n - 1) * self.areas, self.source)

    def rotated(self, rot):
        rot = np.asarray(rot, dtype=float)
        return Polytope(self.normals @ rot.T, self.supports, self.vertices @ rot.T, self.rings,
                        self.areas, self.source)

    def max_vertex_violation(self):
        """Largest distance of a ring vertex from its facet's supporting hyperplane."""
        worst = 0.0
        for i, ring in enumerate(self.rings):
            dev = np.abs(self.vertices[ring] @ self.normals[i] - self.supports[i])
            worst = max(worst, float(dev.max()))
        return worst

    @classmethod
    def from_vertices(cls, points):
        """Convex hull of a point cloud whose interior contains the origin."""
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or points.shape[1] not in (2, 3):
            raise ShapeError("points must have shape (N, 2) or (N, 3)")
        normals, offsets, rings = _hull_facets(points)
        scale = float(np.max(np.linalg.norm(points, axis=1)))
        if np.any(offsets <= _PLANE_TOL * scale):
            raise DomainError("origin is not in the interior of the hull")
        used = np.unique(np.concatenate(rings))
        remap = -np.ones(len(points), dtype=int)
        remap[used] = np.arange(len(used))
        verts = points[used]
        rings = [remap[r] for r in rings]
        return _assemble(normals, offsets, verts, rings, None)

    @classmethod
    def from_halfspaces(cls, normals, supports):
        return wulff_shape(SupportVector(normals, supports))

    @classmethod
    def ball(cls, n, radius=1.0, m=None):
        """Circumscribed polytope approximating the ball of the given radius."""
        grid = sphere_grid(n, m)
        return wulff_shape(SupportVector(grid, np.full(len(grid), float(radius))))

    @classmethod
    def box(cls, half_widths):
        hw = np.asarray(half_widths, dtype=float)
        n = len(hw)
        eye = np.eye(n)
        return wulff_shape(SupportVector(np.vstack([eye, -eye]), np.concatenate([hw, hw])))

    def to_dict(self):
        return {
            "facets": [
                {"normal": self.normals[i].tolist(), "support": float(self.supports[i]),
                 "vertices": self.rings[i].tolist(), "area": float(self.areas[i])}
                for i in range(self.num_facets)
            ],
            "vertices": self.vertices.tolist(),
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), sort_keys=True, **kw)

    @classmethod
    def from_dict(cls, data):
        """Rebuild from the JSON layout; halfspaces win when facets are given."""
        facets = data.get("facets")
        if facets:
            try:
                normals = np.array([f["normal"] for f in facets], dtype=float)
                supports = np.array([f["support"] for f in facets], dtype=float)
            except (KeyError, TypeError, ValueError) as exc:
                raise DomainError(f"malformed facet entry: {exc}") from None
            normals = normals / np.linalg.norm(normals, axis=1)[:, None]
            return wulff_shape(SupportVector(normals, supports))
        if "vertices" in data:
            return cls.from_vertices(np.array(data["vertices"], dtype=float))
        raise DomainError("polytope JSON needs 'facets' or 'vertices'")

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _assemble(normals, supports, verts, rings, source):
    n = verts.shape[1]
    areas = np.empty(len(rings))
    for i, ring in enumerate(rings):
        c = verts[ring]
        if n == 2:
            areas[i] = float(np.linalg.norm(c[1] - c[0]))
        else:
            areas[i] = _polygon_area(c, normals[i])
    scale = float(np.max(np.linalg.norm(verts, axis=1)))
    keep = areas > _AREA_TOL * scale ** (n - 1)
    src = None if source is None else np.asarray(source)[keep]
    return Polytope(np.asarray(normals)[keep], np.asarray(supports)[keep], verts,
                    [r for r, k in zip(rings, keep) if k], areas[keep], src)


# --------------------------------------------------------------------------
# constructions


def wulff_shape(z):
    """Polytope  {x : x . v_i <= z_i for all i}  via the polar hull of v_i / z_i."""
    grid, vals = z.grid, z.values
    n = z.n
    pts = grid / vals[:, None]
    try:
        hn, hb, hrings = _hull_facets(pts)
    except UnboundedBodyError:
        raise UnboundedBodyError("grid lies in a closed hemisphere; Wulff shape is unbounded") from None
    scale = float(np.max(np.linalg.norm(pts, axis=1)))
    if np.any(hb <= _PLANE_TOL * scale):
        raise UnboundedBodyError("grid lies in a closed hemisphere; Wulff shape is unbounded")
    wverts = hn / hb[:, None]
    # hull vertex i -> Wulff facet with normal v_i; its corners are the hull facets through i
    incident = {}
    for f, ring in enumerate(hrings):
        for i in ring:
            incident.setdefault(int(i), []).append(f)
    active = np.array(sorted(incident), dtype=int)
    rings = []
    for i in active:
        fs = np.array(incident[i], dtype=int)
        if n == 2:
            # CCW hull order: the facet preceding vertex i comes first
            rings.append(fs[::-1] if len(fs) == 2 and fs[0] == 0 and fs[1] == len(hrings) - 1 else fs)
        else:
            rings.append(_order_ring(wverts[fs], grid[i], fs))
    return _assemble(grid[active], vals[active], wverts, rings, active)


def support_function(K, u):
    """h_K(u) = max over vertices of u . vertex (vectorized over rows of ``u``)."""
    u = np.asarray(u, dtype=float)
    out = np.max(np.atleast_2d(u) @ K.vertices.T, axis=1)
    return float(out[0]) if u.ndim == 1 else out


def radial_function(K, u):
    """rho_K(u) = min over facets with u . n_i > 0 of h_i / (u . n_i)."""
    u = np.asarray(u, dtype=float)
    dots = np.atleast_2d(u) @ K.normals.T
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(dots > 0, K.supports[None, :] / dots, np.inf)
    out = ratio.min(axis=1)
    return float(out[0]) if u.ndim == 1 else out


def radial_facet(K, u):
    """Index of the facet hit by the ray through ``u`` and its two smallest ratios."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    dots = u @ K.normals.T
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(dots > 0, K.supports[None, :] / dots, np.inf)
    order = np.argsort(ratio, axis=1)[:, :2]
    rows = np.arange(len(u))
    return order[:, 0], ratio[rows, order[:, 0]], ratio[rows, order[:, 1]]


def canonicalize(z):
    """Support numbers of the Wulff shape sampled on the same grid."""
    K = wulff_shape(z)
    return z.with_values(np.minimum(support_function(K, z.grid), z.values))


def polar_body(K):
    """K* = conv{ normals_i / supports_i }."""
    if np.any(K.supports <= 0):
        raise DomainError("origin must be interior to take the polar body")
    return Polytope.from_vertices(K.normals / K.supports[:, None])


def lp_combine(K, L, lam, p):
    """Canonicalized L_p combination of two support vectors on a shared grid."""
    if K.grid.shape != L.grid.shape or not np.allclose(K.grid, L.grid, atol=1e-14, rtol=0):
        raise ShapeError("support vectors live on different grids")
    if not 0.0 <= lam <= 1.0:
        raise DomainError("lambda must lie in [0, 1]")
    if p == 0:
        raise DomainError("p must be nonzero")
    if lam == 0.0:
        return canonicalize(K)
    if lam == 1.0:
        return canonicalize(L)
    vals = ((1.0 - lam) * K.values**p + lam * L.values**p) ** (1.0 / p)
    return canonicalize(K.with_values(vals))


def minkowski_combination(K, L, lam):
    """Exact (1 - lam) K + lam L of two polytopes via pairwise vertex sums."""
    pts = ((1.0 - lam) * K.vertices[:, None, :] + lam * L.vertices[None, :, :]).reshape(-1, K.n)
    return Polytope.from_vertices(pts)


def hausdorff_distance(K, L, grid=None):
    """Sup-norm distance of support functions.

    The sup is taken over ``grid`` (default: a dense grid) together with both
    bodies' facet normals and, in the plane, every difference direction of a
    vertex pair, which makes the planar value exact.
    """
    if K.n != L.n:
        raise ShapeError("bodies live in different dimensions")
    n = K.n
    dirs = [sphere_grid(n, 4096 if n == 2 else 4000) if grid is None else np.asarray(grid)]
    dirs += [K.normals, L.normals]
    if n == 2:
        diff = (K.vertices[:, None, :] - L.vertices[None, :, :]).reshape(-1, 2)
        nrm = np.linalg.norm(diff, axis=1)
        diff = diff[nrm > 0] / nrm[nrm > 0, None]
        dirs += [diff, -diff]
    else:
        for V in (K.vertices, L.vertices):
            dirs.append(V / np.linalg.norm(V, axis=1)[:, None])
    U = np.vstack(dirs)
    return float(np.max(np.abs(support_function(K, U) - support_function(L, U))))


def radial_perturbation_check(K, f, p, t_list, samples=2000, seed=0, boundary_tol=1e-3):
    """Compare difference quotients of the radial function under L_p perturbation.

    ``K`` must be the Wulff shape of a support vector on ``f.grid`` (its facet
    sources index into that grid).  For each t the body [(h^p + t f^p)^(1/p)]
    is built and  (rho_t(u) - rho_K(u)) / t  is compared with
    f(a)^p / (p h(a)^p) * rho_K(u), where ``a`` is the normal of the facet the
    ray through ``u`` hits.  Rays within ``boundary_tol`` (relative) of a
    facet boundary are skipped.
    """
    if p == 0:
        raise DomainError("p must be nonzero")
    if np.any(K.source < 0):
        raise DomainError("K must come from wulff_shape on the grid of f")
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((samples, K.n))
    U /= np.linalg.norm(U, axis=1)[:, None]
    fac, r1, r2 = radial_facet(K, U)
    keep = r2 - r1 > boundary_tol * r1
    U, fac, rho = U[keep], fac[keep], r1[keep]
    h_grid = support_function(K, f.grid)
    src = K.source[fac]
    predicted = f.values[src] ** p / (p * h_grid[src] ** p) * rho
    rows = []
    for t in t_list:
        vals = h_grid**p + t * f.values**p
        if np.any(vals <= 0):
            raise DomainError(f"h^p + t f^p is not positive at t = {t}")
        Kt = wulff_shape(f.with_values(vals ** (1.0 / p)))
        quotient = (radial_function(Kt, U) - rho) / t
        rows.append({"t": float(t), "max_deviation": float(np.max(np.abs(quotient - predicted))),
                     "max_increment": float(np.max(np.abs(quotient * t)))})
    lip = max(r["max_increment"] / abs(r["t"]) for r in rows) if rows else 0.0
    return {"rows": rows, "lipschitz_M": lip, "samples_used": int(keep.sum())}
