"""Hyperboloid geometry: oracles, closed forms, and property checks."""

import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from hyperpam import geometry
from hyperpam.geometry import (
    HPoint, TangentVec, angle_at, cone_sets, distance, exp_map, log_map,
    minkowski_product, origin, triangle_deficit, uniform_sphere_direction,
)

SEED = 20260809


def test_minkowski_defining_identity():
    o = origin(3)
    assert minkowski_product(o.coords, o.coords) == pytest.approx(-1.0, abs=1e-15)


def test_minkowski_symmetry():
    rng = np.random.default_rng(SEED)
    for _ in range(50):
        a = rng.standard_normal(4)
        b = rng.standard_normal(4)
        assert minkowski_product(a, b) == pytest.approx(minkowski_product(b, a),
                                                        rel=1e-14, abs=1e-14)


def test_minkowski_hand_value():
    a = [1.0, 0.0, 0.0, math.sqrt(2.0)]
    b = [0.0, 1.0, 0.0, math.sqrt(2.0)]
    assert minkowski_product(a, b) == pytest.approx(-2.0, abs=1e-14)


def test_minkowski_dimension_mismatch():
    with pytest.raises(ValueError):
        minkowski_product([1.0, 0.0, 1.0], [0.0, 1.0, 0.0, 1.0])


def test_hpoint_validation():
    with pytest.raises(ValueError):
        HPoint(np.array([0.0, 0.0, 0.0, -1.0]), 3)  # lower sheet
    with pytest.raises(ValueError):
        HPoint(np.array([1.0, 0.0, 0.0, 1.0]), 3)  # off the surface
    with pytest.raises(ValueError):
        HPoint(np.array([0.0, 0.0, 1.0]), 3)  # wrong length
    with pytest.raises(ValueError):
        HPoint(np.array([0.0, 1.0]), 1)  # dim too small


def test_distance_trivia():
    o = origin(3)
    assert distance(o, o) == 0.0
    y = HPoint([math.sinh(1.0), 0.0, 0.0, math.cosh(1.0)], 3)
    assert distance(y, o) == pytest.approx(1.0, abs=1e-12)


def test_distance_off_hyperboloid_rejected():
    o = origin(3)
    bad = np.array([0.0, 0.0, 0.0, 0.5])  # -<o,bad> = 0.5 < 1
    with pytest.raises(ValueError):
        distance(o.coords, bad)


def test_distance_vs_geodesic_shooting_oracle():
    """Integrate the geodesic ODE gamma'' = gamma for the claimed arclength and
    check it lands on the target point."""
    rng = np.random.default_rng(SEED)
    o = origin(3)
    for _ in range(20):
        a_pt = exp_map(o, uniform_sphere_direction(o, rng), rng.uniform(0, 3))
        b_pt = exp_map(o, uniform_sphere_direction(o, rng), rng.uniform(0, 3))
        rho = float(distance(a_pt, b_pt))
        if rho < 1e-6:
            continue
        u, _ = log_map(a_pt, b_pt)

        def rhs(s, y):
            return np.concatenate([y[4:], y[:4]])

        sol = solve_ivp(rhs, (0.0, rho), np.concatenate([a_pt.coords, u.vec]),
                        rtol=1e-12, atol=1e-12)
        end = sol.y[:4, -1]
        assert np.max(np.abs(end - b_pt.coords)) < 1e-8 * max(1.0, b_pt.coords[-1])


def test_exp_map_identity_and_closed_form():
    o = origin(3)
    rng = np.random.default_rng(SEED)
    sig = uniform_sphere_direction(o, rng)
    assert np.allclose(exp_map(o, sig, 0.0).coords, o.coords)
    e1 = TangentVec(o, np.array([1.0, 0.0, 0.0, 0.0]))
    p = exp_map(o, e1, 1.0)
    assert np.allclose(p.coords, [math.sinh(1.0), 0.0, 0.0, math.cosh(1.0)],
                       atol=1e-14)


def test_exp_map_roundtrip_property():
    rng = np.random.default_rng(SEED)
    o = origin(3)
    base = exp_map(o, uniform_sphere_direction(o, rng), 1.7)
    for _ in range(1000):
        rho = rng.uniform(0.0, 30.0)
        sig = uniform_sphere_direction(base, rng)
        assert distance(base, exp_map(base, sig, rho)) == pytest.approx(
            rho, abs=1e-9 * max(1.0, rho))


def test_exp_map_rejects_bad_inputs():
    o = origin(3)
    with pytest.raises(ValueError):
        exp_map(o, TangentVec(o, np.array([1.0, 0.0, 0.0, 0.0])), -1.0)
    with pytest.raises(ValueError):
        exp_map(o.coords, np.array([2.0, 0.0, 0.0, 0.0]), 1.0)  # non-unit


def test_log_map_inverts_exp_map():
    rng = np.random.default_rng(SEED)
    o = origin(3)
    for _ in range(200):
        rho = rng.uniform(1e-3, 30.0)
        sig = uniform_sphere_direction(o, rng)
        u, r = log_map(o, exp_map(o, sig, rho))
        assert r == pytest.approx(rho, abs=1e-8 * max(1.0, rho))
        assert np.max(np.abs(u.vec - sig.vec)) < 1e-8


def test_angle_trivia():
    rng = np.random.default_rng(SEED)
    o = origin(3)
    sig = uniform_sphere_direction(o, rng)
    p = exp_map(o, sig, 2.0)
    # the angle between coincident targets is zero up to the distance noise
    # floor sqrt(eps) * cosh(rho)
    assert angle_at(o, p, p) == pytest.approx(0.0, abs=1e-6)
    anti = TangentVec(o, -sig.vec)
    q = exp_map(o, anti, 1.3)
    assert angle_at(o, p, q) == pytest.approx(math.pi, abs=1e-6)
    with pytest.raises(ValueError):
        angle_at(o, o, p)


def test_angle_law_of_cosines_oracle():
    rng = np.random.default_rng(SEED)
    n = 4000
    va = geometry.random_points(n, 3, rng, max_radius=1.5)
    vb = geometry.random_points(n, 3, rng, max_radius=1.5)
    vc = geometry.random_points(n, 3, rng, max_radius=1.5)
    a = distance(vb, vc)
    b = distance(va, vc)
    c = distance(va, vb)
    ang = angle_at(va, vb, vc)
    resid = np.cosh(a) - (np.cosh(b) * np.cosh(c)
                          - np.sinh(b) * np.sinh(c) * np.cos(ang))
    assert np.max(np.abs(resid) / np.cosh(a)) < 1e-8


def test_angle_matches_logmap_inner_product():
    """The half-angle evaluation agrees with the tangent-space definition."""
    rng = np.random.default_rng(SEED)
    o = origin(3)
    for _ in range(200):
        p = exp_map(o, uniform_sphere_direction(o, rng), rng.uniform(0.1, 4.0))
        q = exp_map(o, uniform_sphere_direction(o, rng), rng.uniform(0.1, 4.0))
        up, _ = log_map(o, p)
        uq, _ = log_map(o, q)
        ref = math.acos(float(np.clip(minkowski_product(up.vec, uq.vec), -1, 1)))
        assert angle_at(o, p, q) == pytest.approx(ref, abs=1e-7)


def test_triangle_deficit_collinear():
    # C beyond B on the ray from A; the vertex between them sees angle pi
    o = origin(3)
    e1 = TangentVec(o, np.array([1.0, 0.0, 0.0, 0.0]))
    b = exp_map(o, e1, 1.0)
    c = exp_map(o, e1, 2.0)
    out = triangle_deficit(b, o, c)
    assert out["deficit"] == pytest.approx(0.0, abs=1e-10)
    assert out["bound"] == pytest.approx(0.0, abs=1e-6)


def test_triangle_deficit_right_angle_bound():
    o = origin(3)
    b = exp_map(o, TangentVec(o, np.array([1.0, 0.0, 0.0, 0.0])), 1.2)
    c = exp_map(o, TangentVec(o, np.array([0.0, 1.0, 0.0, 0.0])), 0.8)
    out = triangle_deficit(o, b, c)
    assert out["angle"] == pytest.approx(math.pi / 2, abs=1e-12)
    assert out["bound"] == pytest.approx(math.log(2.0), abs=1e-12)
    assert 0.0 <= out["deficit"] <= out["bound"]


def test_triangle_deficit_small_angle_sentinel():
    # nearly collinear forward: angle ~ 0, bound reported as +inf
    o = origin(3)
    e1 = TangentVec(o, np.array([1.0, 0.0, 0.0, 0.0]))
    b = exp_map(o, e1, 1.0)
    c = exp_map(o, e1, 2.0)
    out = triangle_deficit(o, b, c)
    assert math.isinf(out["bound"])
    with pytest.raises(ValueError):
        triangle_deficit(o, o, b)


def test_reverse_triangle_property():
    rng = np.random.default_rng(SEED)
    n = 30000
    va = geometry.random_points(n, 3, rng, max_radius=8.0)
    vb = geometry.random_points(n, 3, rng, max_radius=8.0)
    vc = geometry.random_points(n, 3, rng, max_radius=8.0)
    deficit = distance(va, vc) + distance(va, vb) - distance(vb, vc)
    ang = angle_at(va, vb, vc)
    keep = ang >= 1e-3
    bound = math.log(2.0) - np.log1p(-np.cos(ang[keep]))
    assert np.min(deficit[keep]) >= 0.0
    assert np.max(deficit[keep] - bound) <= 1e-6


def test_triangle_inequality_property():
    rng = np.random.default_rng(SEED)
    n = 100000
    a = geometry.random_points(n, 3, rng, max_radius=10.0)
    b = geometry.random_points(n, 3, rng, max_radius=10.0)
    c = geometry.random_points(n, 3, rng, max_radius=10.0)
    excess = distance(a, c) - distance(a, b) - distance(b, c)
    assert np.max(excess) <= 1e-8


def test_cone_sets_basics():
    caps = cone_sets(3)
    a, b = caps["A"], caps["B"]
    assert float(np.arccos(np.dot(a.axis, b.axis))) == pytest.approx(math.pi)
    assert caps["min_pair_angle"] == pytest.approx(3 * math.pi / 4)
    # membership: 0.3 rad < pi/8 ~ 0.3927 off-axis is inside
    v = np.array([math.cos(0.3), math.sin(0.3), 0.0])
    assert a.contains(v)
    assert not a.contains(np.array([math.cos(0.5), math.sin(0.5), 0.0]))
    with pytest.raises(ValueError):
        cone_sets(1)


def test_cone_localization_property():
    rng = np.random.default_rng(SEED)
    caps = cone_sets(3)
    n = 10000
    y = geometry.points_from_polar(rng.uniform(0, 30, n), caps["A"].sample(rng, n))
    z = geometry.points_from_polar(rng.uniform(0, 30, n), caps["B"].sample(rng, n))
    o = origin(3).coords
    lhs = distance(y, z)
    rhs = np.maximum(distance(y, o), distance(z, o))
    assert np.min(lhs - rhs) >= -1e-9


def test_uniform_direction_is_unit_tangent():
    rng = np.random.default_rng(SEED)
    o = origin(3)
    base = exp_map(o, uniform_sphere_direction(o, rng), 2.2)
    for _ in range(100):
        v = uniform_sphere_direction(base, rng)
        assert v.norm() == pytest.approx(1.0, abs=1e-12)
        assert abs(minkowski_product(base.coords, v.vec)) < 1e-10


@pytest.mark.parametrize("d", [2, 3])
def test_uniform_direction_angular_density(d):
    """Angle to a fixed axis has density ~ sin^{d-2}; chi^2 at the 1% level."""
    rng = np.random.default_rng(SEED + d)
    o = origin(d)
    n = 100000
    vecs = np.stack([uniform_sphere_direction(o, rng).vec[:d] for _ in range(2000)])
    # bulk draws through the same transport map used by the samplers
    more = geometry.random_directions(n - 2000, d, rng)
    vecs = np.vstack([vecs, more])
    ang = np.arccos(np.clip(vecs[:, 0], -1.0, 1.0))
    k = 20
    if d == 3:
        edges = np.arccos(1.0 - 2.0 * np.arange(k + 1) / k)
    else:
        edges = np.linspace(0.0, math.pi, k + 1)
    counts, _ = np.histogram(ang, bins=edges)
    expected = n / k
    chi2 = float(np.sum((counts - expected) ** 2 / expected))
    # chi2_{19} 1% critical value
    assert chi2 < 36.19


def test_sampled_points_stay_on_sheet():
    rng = np.random.default_rng(SEED)
    pts = geometry.random_points(50000, 3, rng, max_radius=30.0)
    q = minkowski_product(pts, pts)
    # representation noise of <z,z>+1 scales with cosh^2(rho)
    assert np.max(np.abs(q + 1.0) / np.maximum(1.0, pts[:, -1] ** 2)) <= 1e-8
    assert np.min(pts[:, -1]) >= 1.0
    near = geometry.random_points(5000, 3, rng, max_radius=8.0)
    assert np.max(np.abs(minkowski_product(near, near) + 1.0)) <= 1e-8
