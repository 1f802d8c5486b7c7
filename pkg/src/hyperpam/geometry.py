"""Primitives for the hyperboloid model of d-dimensional hyperbolic space.

Points live on the upper sheet ``{z : <z,z> = -1, z_{d+1} > 0}`` of the unit
hyperboloid in R^{d+1}, where

    <a, b> = a_1 b_1 + ... + a_d b_d - a_{d+1} b_{d+1}

is the Minkowski inner product (time-like axis last).  Geodesic distance
satisfies ``cosh rho(y, z) = -<y, z>``.  Tangent vectors at a point X form the
Minkowski-orthogonal complement of X, on which <.,.> restricts to a positive
definite (Riemannian) inner product.

All numerics are float64 numpy.  The public operations accept either the
validated :class:`HPoint` / :class:`TangentVec` wrappers or raw coordinate
arrays (hyperboloid axis last) and broadcast over leading axes, so the same
code serves both the object API and bulk property checks.

Curvature is fixed to -1 throughout.
"""

import math
from dataclasses import dataclass

import numpy as np

# -<a,b> may dip below 1 by roundoff for nearly equal points; inside this
# window we clamp, beyond it the input is considered off the hyperboloid.
DIST_CLAMP = 1e-9
# construction-time tolerance on |<z,z> + 1|
CONSTRAINT_TOL = 1e-8
# cosh overflows double precision near 710; stay a little below
MAX_RADIUS = 700.0

_DEGENERATE = 1e-8  # two points closer than this cannot define a direction


def minkowski_product(a, b):
    """Minkowski inner product with signature (+,...,+,-), batched on the last axis."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(
            f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]} coordinates"
        )
    return np.sum(a[..., :-1] * b[..., :-1], axis=-1) - a[..., -1] * b[..., -1]


def project_to_hyperboloid(z):
    """Rescale the time-like component so that <z,z> = -1 exactly.

    Overflow-safe for spatial norms up to ~1e300: hypot avoids squaring the
    norm, and the norm itself is computed with a max-rescaling.
    """
    z = np.array(z, dtype=float)
    spatial = z[..., :-1]
    scale = np.maximum(np.max(np.abs(spatial), axis=-1, keepdims=True), 1.0)
    norm = np.sqrt(np.sum((spatial / scale) ** 2, axis=-1)) * scale[..., 0]
    z[..., -1] = np.hypot(1.0, norm)
    return z


def _coords(x):
    """Unwrap HPoint / TangentVec to a raw coordinate array."""
    if isinstance(x, HPoint):
        return x.coords
    if isinstance(x, TangentVec):
        return x.vec
    return np.asarray(x, dtype=float)


@dataclass
class HPoint:
    """A point on the upper sheet of the unit hyperboloid in R^{d+1}."""

    coords: np.ndarray
    dim: int

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=float)
        if self.dim < 2:
            raise ValueError(f"dim must be >= 2, got {self.dim}")
        if self.coords.shape != (self.dim + 1,):
            raise ValueError(
                f"expected {self.dim + 1} coordinates, got shape {self.coords.shape}"
            )
        if self.coords[-1] <= 0:
            raise ValueError("time-like component must be positive (upper sheet)")
        q = minkowski_product(self.coords, self.coords)
        # <z,z>+1 carries representation noise ~eps * cosh^2(rho), so the
        # tolerance is relative to the time-like component squared
        if abs(q + 1.0) > CONSTRAINT_TOL * max(1.0, self.coords[-1] ** 2):
            raise ValueError(f"point is off the hyperboloid: <z,z> = {q:.3e}")
        # absorb roundoff so downstream products stay consistent
        self.coords = project_to_hyperboloid(self.coords)


@dataclass
class TangentVec:
    """A tangent vector at ``base``: Minkowski-orthogonal to the base point."""

    base: HPoint
    vec: np.ndarray

    def __post_init__(self):
        self.vec = np.asarray(self.vec, dtype=float)
        if self.vec.shape != self.base.coords.shape:
            raise ValueError("tangent vector has wrong number of coordinates")
        ip = minkowski_product(self.base.coords, self.vec)
        scale = max(1.0, float(np.max(np.abs(self.vec))))
        if abs(ip) > 1e-10 * scale:
            raise ValueError(f"vector is not tangent at base: <base,v> = {ip:.3e}")

    def norm(self):
        return float(np.sqrt(minkowski_product(self.vec, self.vec)))


def origin(d):
    """The base point o = (0, ..., 0, 1)."""
    z = np.zeros(d + 1)
    z[-1] = 1.0
    return HPoint(z, d)


def distance(a, b):
    """Geodesic distance arccosh(-<a,b>), clamped against roundoff near 0."""
    ca, cb = _coords(a), _coords(b)
    m = -minkowski_product(ca, cb)
    if np.any(m < 1.0 - DIST_CLAMP):
        bad = float(np.min(m))
        raise ValueError(f"points off the hyperboloid: -<a,b> = {bad!r} < 1")
    return np.arccosh(np.maximum(m, 1.0))


def exp_map(base, sigma, rho):
    """Follow the geodesic from ``base`` in unit direction ``sigma`` for length ``rho``.

    Closed form: cosh(rho) * base + sinh(rho) * sigma.
    """
    rho_arr = np.asarray(rho, dtype=float)
    if np.any(rho_arr < 0):
        raise ValueError("rho must be nonnegative")
    if np.any(rho_arr > MAX_RADIUS):
        raise ValueError(f"rho exceeds the overflow ceiling {MAX_RADIUS}")
    cb = _coords(base)
    cs = _coords(sigma)
    n = minkowski_product(cs, cs)
    if np.any(np.abs(n - 1.0) > 1e-8):
        raise ValueError("sigma must have unit Minkowski norm")
    out = np.cosh(rho_arr)[..., None] * cb + np.sinh(rho_arr)[..., None] * cs
    out = project_to_hyperboloid(out)
    if isinstance(base, HPoint) and out.ndim == 1:
        return HPoint(out, base.dim)
    return out


def log_map(base, target):
    """Inverse of :func:`exp_map`: unit initial direction and distance to ``target``.

    Returns ``(direction, rho)``.  Requires the points to be at least
    1e-8 apart, since coincident points define no direction.
    """
    cb, ct = _coords(base), _coords(target)
    rho = distance(cb, ct)
    if np.any(rho < _DEGENERATE):
        raise ValueError("points are too close to define a direction")
    u = (ct - np.cosh(rho)[..., None] * cb) / np.sinh(rho)[..., None]
    if isinstance(base, HPoint) and u.ndim == 1:
        return TangentVec(base, u), float(rho)
    return u, rho


def _logsinh(x):
    """log sinh(x) for x >= 0, accurate down to tiny x (-inf at 0)."""
    x = np.asarray(x, dtype=float)
    small = x < 1e-8
    with np.errstate(divide="ignore"):
        out = np.where(
            small,
            np.log(np.maximum(x, 0.0)),  # sinh x = x (1 + x^2/6 + ...)
            x - math.log(2.0) + np.log1p(-np.exp(-2.0 * np.maximum(x, 1e-300))),
        )
    return out


def angle_at(vertex, p, q):
    """Angle in [0, pi] at ``vertex`` between the geodesics toward ``p`` and ``q``.

    Evaluated through the hyperbolic half-angle identity

        tan^2(A/2) = sinh(s-b) sinh(s-c) / (sinh(s) sinh(s-a)),

    with a = dist(p, q) opposite the vertex and s the semiperimeter.  All
    factors are nonnegative, so the formula stays accurate for nearly
    collinear triangles where inner-product-based angles lose the small
    angle to cancellation; it agrees with the log-map/Riemannian-inner-product
    definition wherever both are well conditioned.
    """
    cv, cp, cq = _coords(vertex), _coords(p), _coords(q)
    side_a = distance(cp, cq)
    side_b = distance(cv, cq)
    side_c = distance(cv, cp)
    if np.any(side_b < _DEGENERATE) or np.any(side_c < _DEGENERATE):
        raise ValueError("degenerate vertex: endpoint coincides with the vertex")
    s = 0.5 * (side_a + side_b + side_c)
    # clamp tiny negatives from roundoff in the semiperimeter differences
    log_tan_sq = (_logsinh(np.maximum(s - side_b, 0.0))
                  + _logsinh(np.maximum(s - side_c, 0.0))
                  - _logsinh(s)
                  - _logsinh(np.maximum(s - side_a, 0.0)))
    with np.errstate(over="ignore"):
        ang = 2.0 * np.arctan(np.exp(0.5 * log_tan_sq))
    return ang if ang.ndim else float(ang)


def _log_dir(cv, ct):
    rho = distance(cv, ct)
    if np.any(rho < _DEGENERATE):
        raise ValueError("degenerate vertex: points coincide")
    u = (ct - np.cosh(rho)[..., None] * cv) / np.sinh(rho)[..., None]
    return u, rho


def triangle_deficit(a_vertex, b_vertex, c_vertex):
    """Reverse-triangle data at ``a_vertex``.

    With side a opposite ``a_vertex`` (= dist(B, C)) and b, c the sides
    adjacent to it, returns ``deficit = b + c - a`` together with the
    negative-curvature bound ``log(2 / (1 - cos A))``, A being the angle at
    ``a_vertex``.  The hyperbolic reverse triangle inequality guarantees
    0 <= deficit <= bound.  A nearly zero angle makes the bound overflow; it
    is then reported as +inf rather than raising.
    """
    ca, cb, cc = _coords(a_vertex), _coords(b_vertex), _coords(c_vertex)
    side_a = distance(cb, cc)
    side_b = distance(ca, cc)
    side_c = distance(ca, cb)
    if np.any(np.minimum(np.minimum(side_a, side_b), side_c) < _DEGENERATE):
        raise ValueError("triangle vertices must be pairwise distinct")
    ang = angle_at(ca, cb, cc)
    with np.errstate(divide="ignore"):
        # log(2/(1-cos A)) = log 2 - log1p(-cos A); -> +inf as A -> 0
        bound = math.log(2.0) - np.log1p(-np.cos(ang))
    return {"deficit": side_b + side_c - side_a, "bound": bound, "angle": ang}


@dataclass(frozen=True)
class SphericalCap:
    """A cap {u in S^{d-1} : angle(u, axis) <= half_angle} on the unit tangent
    sphere at the origin (directions are spatial d-vectors)."""

    axis: np.ndarray
    half_angle: float

    def contains(self, direction):
        u = np.asarray(direction, dtype=float)
        u = u / np.linalg.norm(u, axis=-1, keepdims=True)
        c = np.clip(u @ self.axis, -1.0, 1.0)
        return np.arccos(c) <= self.half_angle + 1e-12

    def sample(self, rng, size=None):
        """Uniform directions restricted to the cap (rejection from the sphere)."""
        n = 1 if size is None else int(size)
        d = self.axis.shape[0]
        out = np.empty((n, d))
        filled = 0
        while filled < n:
            block = max(64, int((n - filled) / max(self._fraction(), 1e-3)))
            g = rng.standard_normal((block, d))
            g /= np.linalg.norm(g, axis=1, keepdims=True)
            keep = g[self.contains(g)]
            take = min(len(keep), n - filled)
            out[filled:filled + take] = keep[:take]
            filled += take
        return out[0] if size is None else out

    def _fraction(self):
        # crude lower bound on the cap's spherical fraction, for block sizing
        return (1.0 - math.cos(self.half_angle)) / 2.0


def cone_sets(d):
    """Two opposite caps of half-angle pi/8 about +/- e1 on the tangent sphere at o.

    Any direction in A and any direction in B subtend an angle of at least
    3*pi/4 > pi/2, which forces dist(y, z) >= max(dist(y, o), dist(z, o)) for
    points y, z with polar directions in A and B respectively.
    """
    if d < 2:
        raise ValueError("d must be >= 2")
    e1 = np.zeros(d)
    e1[0] = 1.0
    half = math.pi / 8.0
    return {
        "A": SphericalCap(e1, half),
        "B": SphericalCap(-e1, half),
        "min_pair_angle": math.pi - 2 * half,
    }


def transport_from_origin(base_coords, spatial):
    """Parallel-transport tangent vectors from o to ``base`` along the connecting
    geodesic.

    ``spatial`` holds the first d components of vectors in T_o (time component
    zero).  The transport is a linear isometry, so isotropic Gaussians and
    uniform directions at o stay isotropic/uniform at the base point.
    Broadcasts over leading axes.
    """
    base_coords = np.asarray(base_coords, dtype=float)
    spatial = np.asarray(spatial, dtype=float)
    d = base_coords.shape[-1] - 1
    s = np.sum(spatial * base_coords[..., :d], axis=-1)
    coef = s / (1.0 + base_coords[..., d])
    out = np.empty(np.broadcast_shapes(spatial.shape[:-1], base_coords.shape[:-1]) + (d + 1,))
    out[..., :d] = spatial + coef[..., None] * base_coords[..., :d]
    out[..., d] = coef * (base_coords[..., d] + 1.0)
    return out


def uniform_sphere_direction(base, rng):
    """A uniformly distributed unit tangent vector at ``base``.

    Draws a standard Gaussian on T_o, normalizes, then parallel-transports to
    the base point; rotation invariance about the base is exact.
    """
    cb = _coords(base)
    d = cb.shape[-1] - 1
    g = rng.standard_normal(d)
    n = np.linalg.norm(g)
    while n < 1e-12:  # never in practice, but the direction must be defined
        g = rng.standard_normal(d)
        n = np.linalg.norm(g)
    v = transport_from_origin(cb, g / n)
    if isinstance(base, HPoint):
        return TangentVec(base, v)
    return v


def points_from_polar(rho, directions):
    """Points exp_o(rho * sigma) from polar data at the origin (batched).

    ``rho``: radii (n,), ``directions``: unit spatial vectors (n, d).
    """
    rho = np.asarray(rho, dtype=float)
    directions = np.asarray(directions, dtype=float)
    d = directions.shape[-1]
    out = np.empty(rho.shape + (d + 1,))
    out[..., :d] = np.sinh(rho)[..., None] * directions
    out[..., d] = np.cosh(rho)
    return out


def random_directions(n, d, rng):
    """Uniform directions on S^{d-1} (spatial d-vectors)."""
    g = rng.standard_normal((n, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def random_points(n, d, rng, max_radius=30.0):
    """Points with uniform radius in (0, max_radius] and uniform direction; (n, d+1)."""
    rho = rng.uniform(0.0, max_radius, n)
    return points_from_polar(rho, random_directions(n, d, rng))
