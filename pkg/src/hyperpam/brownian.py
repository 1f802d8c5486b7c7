"""Hyperbolic Brownian motion on the hyperboloid, and its path diagnostics.

Generator convention
--------------------
The diffusion simulated here has generator Delta (the full Laplace-Beltrami
operator, not Delta/2).  Consequently the radial process from any fixed point
drifts like (d-1)*t with fluctuations of variance 2*t, and the quadratic
variation of each tangential coordinate is 2*dt.  Every numeric target in the
test-suite depends on this single convention.

Two step schemes are provided:

* ``embedded-sde``   Euler step X <- X + sqrt(2 dt) V + d * X * dt, where V is
  a standard Gaussian on the tangent space at X (an isotropic d-dimensional
  Gaussian at the origin, parallel-transported to X), followed by projection
  back onto the hyperboloid.  The drift term cancels the mean constraint
  violation, leaving the projection O(dt^2).
* ``geodesic-walk``  X <- exp_X(R * U) with U a uniform unit tangent direction
  and R = sqrt(2 d dt) * |N(0,1)|, matching the second moment of the tangent
  Gaussian increment.  Exactly on-manifold by construction.

Reproducibility
---------------
Every path owns a counter-based Philox stream keyed by (master seed, path
index, role tag), so ensembles are reproducible and independent of batch
sizes, worker counts, and execution order.  Identical configs produce
bit-identical output.
"""

from dataclasses import dataclass

import numpy as np

from . import geometry
from .geometry import HPoint, _coords

_SCHEMES = ("embedded-sde", "geodesic-walk")
MAX_STEPS = 10**8

# role tags for the per-path substreams
TAG_PRIMARY = 0
TAG_SECONDARY = 1
TAG_TUPLES = 2
TAG_CHAIN = 5


@dataclass
class SamplerConfig:
    """Simulation parameters shared by all path-generating operations."""

    dim: int = 3
    step: float = 1e-3
    scheme: str = "embedded-sde"
    seed: int = 0

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        if not 0 < self.step <= 0.1:
            raise ValueError("step must lie in (0, 0.1]")
        if self.scheme not in _SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")


@dataclass
class BrownianPath:
    """One trajectory sampled on a uniform grid (coarse storage grid).

    ``points`` rows satisfy the hyperboloid constraint; ``times`` starts at 0
    and ends at the requested horizon.
    """

    times: np.ndarray
    points: np.ndarray
    seed: int

    @property
    def dim(self):
        return self.points.shape[1] - 1

    def endpoint(self):
        return HPoint(self.points[-1], self.dim)


def path_stream(seed, path_index, tag=TAG_PRIMARY):
    """Independent stream for one path, keyed by (master seed, path index, role tag).

    The key goes through SeedSequence, so streams are reproducible and
    order-independent: an ensemble draws the same numbers regardless of batch
    sizes, worker counts, or execution order.
    """
    ss = np.random.SeedSequence((int(seed) & (2**64 - 1), int(path_index), int(tag)))
    return np.random.Generator(np.random.PCG64(ss))


def _schedule(t, step):
    """Number of steps, effective dt, stored step indices and stored times.

    The horizon is hit exactly (dt is rounded so n * dt = t).  Points are
    stored every m-th step with the stored spacing capped at
    min(t/128, 0.05): the relative cap bounds memory, the absolute cap keeps
    the trapezoid bias of sharply decaying path integrands t-independent
    (a t-proportional spacing would turn quadrature bias into a fake trend
    across a sweep).
    """
    if t <= 0:
        raise ValueError("t must be positive")
    n_steps = max(1, int(round(t / step)))
    if n_steps > MAX_STEPS:
        raise ValueError(f"t/step = {n_steps} exceeds the {MAX_STEPS} step budget")
    dt = t / n_steps
    m = max(1, min(n_steps // 128, int(0.05 / dt)))
    stored = np.arange(0, n_steps + 1, m)
    if stored[-1] != n_steps:
        stored = np.append(stored, n_steps)
    return n_steps, dt, stored, stored * dt


def _chunk_size(n_paths, dim, n_steps):
    """Steps per noise chunk, sized to keep chunk buffers around ~100 MB."""
    per_step = max(1, n_paths * (dim + 1))
    return int(np.clip(12_000_000 // per_step, 16, n_steps))


def _step_embedded(x, g, dt, d, root2dt, tmp):
    """One Euler step for the whole batch; g is (P, d) spatial Gaussians at o.

    Only the spatial block evolves explicitly (tangent noise, transported from
    the origin, plus the constraint drift d*X*dt); the time-like coordinate is
    then re-derived from the hyperboloid constraint, which is exactly the
    renormalize-every-step policy.
    """
    xs = x[:, :d]
    s = np.einsum("pi,pi->p", g, xs)
    s /= 1.0 + x[:, d]
    np.multiply(s[:, None], xs, out=tmp)
    tmp += g
    tmp *= root2dt
    xs *= 1.0 + d * dt
    xs += tmp
    _reproject(x, d)


def _step_geodesic(x, g, mag, d, scale, tmp):
    """One geodesic step: uniform direction from g, radial length scale*|mag|."""
    xs = x[:, :d]
    norm = np.sqrt(np.einsum("pi,pi->p", g, g))
    np.maximum(norm, 1e-300, out=norm)
    u = g / norm[:, None]
    s = np.einsum("pi,pi->p", u, xs)
    s /= 1.0 + x[:, d]
    r = scale * np.abs(mag)
    ch, sh = np.cosh(r), np.sinh(r)
    np.multiply(s[:, None], xs, out=tmp)
    tmp += u
    tmp *= sh[:, None]
    xs *= ch[:, None]
    xs += tmp
    _reproject(x, d)


def _reproject(x, d):
    """Set the time-like coordinate from the constraint <z,z> = -1.

    The direct square-sum overflows only beyond rho ~ 354 (spatial entries
    ~1e154); the rescaled fallback covers that regime.
    """
    xs = x[:, :d]
    sq = np.einsum("pi,pi->p", xs, xs)
    if np.all(np.isfinite(sq)):
        np.sqrt(sq, out=sq)
        np.hypot(1.0, sq, out=x[:, d])
    else:
        scale = np.maximum(np.max(np.abs(xs), axis=1), 1.0)
        norm = np.sqrt(np.sum((xs / scale[:, None]) ** 2, axis=1)) * scale
        x[:, d] = np.hypot(1.0, norm)


class _Walker:
    """Batched stepping of one role (a set of paths sharing a tag)."""

    def __init__(self, x0_coords, cfg, indices, tag):
        self.d = cfg.dim
        self.scheme = cfg.scheme
        self.x = np.tile(np.asarray(x0_coords, dtype=float), (len(indices), 1))
        self.gens = [path_stream(cfg.seed, i, tag) for i in indices]
        self.ncols = self.d if cfg.scheme == "embedded-sde" else self.d + 1
        self._buf = None
        self._tmp = np.empty((len(self.gens), self.d))

    def noise(self, k):
        """Per-path noise for the next k steps; (P, k, ncols), streams advance."""
        if self._buf is None or self._buf.shape[1] < k:
            self._buf = np.empty((len(self.gens), k, self.ncols))
        view = self._buf[:, :k, :]
        for i, g in enumerate(self.gens):
            g.standard_normal(out=view[i])
        return view

    def step(self, gk, dt, root2dt, geo_scale):
        if self.scheme == "embedded-sde":
            _step_embedded(self.x, gk, dt, self.d, root2dt, self._tmp)
        else:
            _step_geodesic(self.x, gk[:, :self.d], gk[:, self.d], self.d,
                           geo_scale, self._tmp)


def _walk(x0_list, t, cfg, indices, tags, on_stored, monitor=None):
    """Drive one batch of paths (one walker per tag) to horizon t.

    ``on_stored(slot, walkers)`` is called at every stored index (slot 0 is
    the initial condition).  ``monitor(step_index, walkers)``, if given, is
    called after every step.
    """
    n_steps, dt, stored, times = _schedule(t, cfg.step)
    walkers = [_Walker(x0, cfg, indices, tag) for x0, tag in zip(x0_list, tags)]
    root2dt = np.sqrt(2.0 * dt)
    geo_scale = np.sqrt(2.0 * cfg.dim * dt)
    stored_set = np.zeros(n_steps + 1, dtype=bool)
    stored_set[stored] = True
    slot_of = np.cumsum(stored_set) - 1

    on_stored(0, walkers)
    chunk = _chunk_size(len(indices), cfg.dim, n_steps)
    pos = 0
    while pos < n_steps:
        k = min(chunk, n_steps - pos)
        blocks = [w.noise(k) for w in walkers]
        for j in range(k):
            for w, blk in zip(walkers, blocks):
                w.step(blk[:, j], dt, root2dt, geo_scale)
            pos += 1
            if monitor is not None:
                monitor(pos, walkers)
            if stored_set[pos]:
                on_stored(slot_of[pos], walkers)
    return times


def sample_path(x0, t, cfg, path_index=0):
    """One hyperbolic Brownian path from x0 over [0, t], stored coarsely."""
    coords = _coords(x0)
    n_slots = len(_schedule(t, cfg.step)[2])
    points = np.empty((n_slots, coords.shape[0]))

    def record(slot, walkers):
        points[slot] = walkers[0].x[0]

    times = _walk([coords], t, cfg, [path_index], [TAG_PRIMARY], record)
    return BrownianPath(times, points, cfg.seed)


def sample_pair(x0, t, cfg, path_index=0):
    """Two independent paths from the same start (independent substreams)."""
    coords = _coords(x0)
    n_slots = len(_schedule(t, cfg.step)[2])
    pts = [np.empty((n_slots, coords.shape[0])) for _ in range(2)]

    def record(slot, walkers):
        pts[0][slot] = walkers[0].x[0]
        pts[1][slot] = walkers[1].x[0]

    times = _walk([coords, coords], t, cfg, [path_index],
                  [TAG_PRIMARY, TAG_SECONDARY], record)
    return (BrownianPath(times, pts[0], cfg.seed),
            BrownianPath(times, pts[1], cfg.seed))


def endpoints(x0, t, cfg, n_paths, tag=TAG_PRIMARY, first_index=0, starts=None):
    """Terminal points of n_paths independent paths; (n_paths, d+1).

    ``starts`` optionally gives a per-path initial condition array (used for
    chained/restarted ensembles); otherwise every path starts at x0.
    """
    coords = _coords(x0)
    out = np.empty((n_paths, coords.shape[0]))
    batch = 2048
    for lo in range(0, n_paths, batch):
        hi = min(lo + batch, n_paths)
        idx = list(range(first_index + lo, first_index + hi))
        x_init = np.tile(coords, (hi - lo, 1)) if starts is None else starts[lo:hi]
        w = _WalkerFromArray(x_init, cfg, idx, tag)
        _drive([w], t, cfg)
        out[lo:hi] = w.x
    return out


class _WalkerFromArray(_Walker):
    """A walker with one explicit start point per path."""

    def __init__(self, x_array, cfg, indices, tag):
        self.d = cfg.dim
        self.scheme = cfg.scheme
        self.x = np.array(x_array, dtype=float)
        self.gens = [path_stream(cfg.seed, i, tag) for i in indices]
        self.ncols = self.d if cfg.scheme == "embedded-sde" else self.d + 1
        self._buf = None
        self._tmp = np.empty((len(self.gens), self.d))


def _drive(walkers, t, cfg, monitor=None):
    """Step pre-built walkers to horizon t (no storage callbacks)."""
    n_steps, dt, _, times = _schedule(t, cfg.step)
    root2dt = np.sqrt(2.0 * dt)
    geo_scale = np.sqrt(2.0 * cfg.dim * dt)
    chunk = _chunk_size(walkers[0].x.shape[0], cfg.dim, n_steps)
    pos = 0
    while pos < n_steps:
        k = min(chunk, n_steps - pos)
        blocks = [w.noise(k) for w in walkers]
        for j in range(k):
            for w, blk in zip(walkers, blocks):
                w.step(blk[:, j], dt, root2dt, geo_scale)
            pos += 1
            if monitor is not None:
                monitor(pos * dt, walkers)
    return times


def endpoint_radii(x0, t, cfg, n_paths, tag=TAG_PRIMARY, first_index=0):
    """Distances rho(x0, B_t) across an ensemble; (n_paths,)."""
    pts = endpoints(x0, t, cfg, n_paths, tag=tag, first_index=first_index)
    return geometry.distance(np.asarray(_coords(x0)), pts)


def pair_profile_matrix(x0, y0, t, cfg, n_paths, profile, first_index=0):
    """f(B_s, B_s~) on the stored grid for n_paths independent pairs.

    Returns (times (m,), F (n_paths, m)) where F[i, j] = profile(rho) for the
    i-th pair at stored time j.  B starts at x0, B~ at y0.
    """
    cx, cy = _coords(x0), _coords(y0)
    n_stored = len(_schedule(t, cfg.step)[2])
    F = np.empty((n_paths, n_stored))
    batch = 2048
    times = None
    for lo in range(0, n_paths, batch):
        hi = min(lo + batch, n_paths)
        idx = list(range(first_index + lo, first_index + hi))

        def record(slot, walkers, lo=lo, hi=hi):
            x, y = walkers[0].x, walkers[1].x
            minus_ip = (x[:, -1] * y[:, -1]
                        - np.einsum("pi,pi->p", x[:, :-1], y[:, :-1]))
            rho = np.arccosh(np.maximum(minus_ip, 1.0))
            F[lo:hi, slot] = profile(rho)

        times = _walk([cx, cy], t, cfg, idx, [TAG_PRIMARY, TAG_SECONDARY], record)
    return times, F


def exit_times(x0, r, t_max, cfg, n_paths, tag=TAG_PRIMARY, first_index=0):
    """First times the distance from x0 exceeds r, censored at t_max (inf if none).

    Exits are detected on the simulation grid (every step).
    """
    coords = _coords(x0)
    cosh_r = np.cosh(r)
    out = np.full(n_paths, np.inf)
    batch = 2048
    for lo in range(0, n_paths, batch):
        hi = min(lo + batch, n_paths)
        idx = list(range(first_index + lo, first_index + hi))
        w = _WalkerFromArray(np.tile(coords, (hi - lo, 1)), cfg, idx, tag)
        block_exit = np.full(hi - lo, np.inf)

        def monitor(time_now, walkers):
            x = walkers[0].x
            minus_ip = x[:, -1] * coords[-1] - x[:, :-1] @ coords[:-1]
            fresh = (minus_ip > cosh_r) & ~np.isfinite(block_exit)
            block_exit[fresh] = time_now

        _drive([w], t_max, cfg, monitor=monitor)
        out[lo:hi] = block_exit
    return out


def radial_statistics(path, x0):
    """Normalized radial fluctuation xi_t = (rho(x0, B_t) - (d-1) t) / sqrt(t)."""
    t = float(path.times[-1])
    if t < 1.0:
        raise ValueError("endpoint time must be at least 1")
    rho = float(geometry.distance(_coords(x0), path.points[-1]))
    d = path.dim
    return {"xi_t": (rho - (d - 1) * t) / np.sqrt(t)}


def event_indicators(pair, x0, delta, s, y0=None):
    """Localization event indicators at time s for a pair of paths.

    The single-angle event requires both normalized radial fluctuations to
    stay above -delta*sqrt(s) and the angle separation penalty
    log(2 / (1 - cos angle(B_s, x0, B~_s))) to stay below delta*s.

    With distinct starts (y0 given) the two-angle variant is evaluated as
    well, using the angles (B_s, x0, y0) and (B_s, y0, B~_s); with a common
    start the two events coincide (the first angle degenerates).  Angle
    degeneracies make the event fail (conservative).
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    pb, pbt = pair
    if not 0 < s <= pb.times[-1] + 1e-12:
        raise ValueError("s must lie in (0, horizon]")
    j = int(np.argmin(np.abs(pb.times - s)))
    s_used = float(pb.times[j])
    cx = _coords(x0)
    cy = cx if y0 is None else _coords(y0)
    d = pb.dim
    b_s, bt_s = pb.points[j], pbt.points[j]

    xi = (float(geometry.distance(cx, b_s)) - (d - 1) * s_used) / np.sqrt(s_used)
    eta = (float(geometry.distance(cy, bt_s)) - (d - 1) * s_used) / np.sqrt(s_used)
    radial_ok = min(xi, eta) > -delta * np.sqrt(s_used)

    def penalty(vertex, p, q):
        try:
            ang = float(geometry.angle_at(vertex, p, q))
        except ValueError:
            return np.inf
        if 1.0 - np.cos(ang) <= 0.0:
            return np.inf
        return float(np.log(2.0) - np.log1p(-np.cos(ang)))

    pen_single = penalty(cx, b_s, bt_s)
    a_event = radial_ok and pen_single <= delta * s_used

    if y0 is None:
        m_event = a_event
    else:
        pen_phi = penalty(cx, b_s, cy)
        pen_psi = penalty(cy, b_s, bt_s)
        m_event = radial_ok and max(pen_phi, pen_psi) <= delta * s_used

    return {"M_s": bool(m_event), "A_s": bool(a_event),
            "xi_s": xi, "eta_s": eta, "angle_penalty": pen_single}


def dump_paths_csv(paths, file):
    """Write paths as CSV rows (path_id, t, z1..z_{d+1})."""
    own = isinstance(file, str)
    fh = open(file, "w") if own else file
    try:
        d = paths[0].dim
        cols = ",".join(f"z{k + 1}" for k in range(d + 1))
        fh.write(f"path_id,t,{cols}\n")
        for pid, path in enumerate(paths):
            for tt, row in zip(path.times, path.points):
                vals = ",".join(repr(float(v)) for v in row)
                fh.write(f"{pid},{float(tt)!r},{vals}\n")
    finally:
        if own:
            fh.close()
