"""Property-check registry behind the ``validate`` CLI subcommand.

Each check is a callable returning a record with an observed value and an
effective limit; a check passes when ``observed <= limit * tolerance_scale``.
``tolerance_scale`` exists so the harness can verify that an injected
impossible tolerance really turns the exit status red.

Sizes here are trimmed for a fast default run; the pytest suite carries the
full-size versions of the same properties.
"""

import math
import time

import numpy as np
import scipy.stats as st

from . import brownian, covariance, geometry, heatkernel


def _record(name, observed, limit, scale, detail=""):
    eff = limit * scale
    return {
        "name": name,
        "observed": float(observed),
        "limit": float(limit),
        "effective_limit": float(eff),
        "passed": bool(observed <= eff),
        "detail": detail,
    }


# ---------------------------------------------------------------- geometry

def _check_hyperboloid_constraint(scale, seed):
    rng = np.random.default_rng(seed)
    pts = geometry.random_points(20000, 3, rng, max_radius=30.0)
    q = geometry.minkowski_product(pts, pts)
    # <z,z>+1 carries representation noise ~eps cosh^2(rho), so normalize
    worst = float(np.max(np.abs(q + 1.0) / np.maximum(1.0, pts[:, -1] ** 2)))
    return _record("hyperboloid-constraint", worst, 1e-8, scale)


def _check_triangle_inequality(scale, seed):
    rng = np.random.default_rng(seed)
    a = geometry.random_points(20000, 3, rng, max_radius=10.0)
    b = geometry.random_points(20000, 3, rng, max_radius=10.0)
    c = geometry.random_points(20000, 3, rng, max_radius=10.0)
    excess = geometry.distance(a, c) - geometry.distance(a, b) - geometry.distance(b, c)
    return _record("triangle-inequality", float(np.max(excess)), 1e-8, scale)


def _check_reverse_triangle(scale, seed):
    rng = np.random.default_rng(seed)
    n = 20000
    va = geometry.random_points(n, 3, rng, max_radius=8.0)
    vb = geometry.random_points(n, 3, rng, max_radius=8.0)
    vc = geometry.random_points(n, 3, rng, max_radius=8.0)
    side_a = geometry.distance(vb, vc)
    side_b = geometry.distance(va, vc)
    side_c = geometry.distance(va, vb)
    ang = geometry.angle_at(va, vb, vc)
    keep = ang >= 1e-3
    deficit = (side_b + side_c - side_a)[keep]
    bound = (math.log(2.0) - np.log1p(-np.cos(ang[keep])))
    worst = max(float(np.max(deficit - bound)), float(np.max(-deficit)))
    return _record("reverse-triangle-bound", worst, 1e-6, scale,
                   detail=f"{int(np.sum(keep))} triangles")


def _check_cone_localization(scale, seed):
    rng = np.random.default_rng(seed)
    caps = geometry.cone_sets(3)
    n = 5000
    y = geometry.points_from_polar(rng.uniform(0, 30, n), caps["A"].sample(rng, n))
    z = geometry.points_from_polar(rng.uniform(0, 30, n), caps["B"].sample(rng, n))
    o = geometry.origin(3).coords
    gap = np.maximum(geometry.distance(y, o), geometry.distance(z, o)) \
        - geometry.distance(y, z)
    return _record("cone-localization", float(np.max(gap)), 1e-9, scale)


def _check_exp_log_roundtrip(scale, seed):
    rng = np.random.default_rng(seed)
    o = geometry.origin(3)
    worst = 0.0
    for _ in range(300):
        rho = rng.uniform(1e-4, 30.0)
        sig = geometry.uniform_sphere_direction(o, rng)
        p = geometry.exp_map(o, sig, rho)
        u, r = geometry.log_map(o, p)
        worst = max(worst, abs(r - rho),
                    float(np.max(np.abs(u.vec - sig.vec))))
    return _record("exp-log-roundtrip", worst, 1e-8, scale)


def _check_law_of_cosines(scale, seed):
    rng = np.random.default_rng(seed)
    n = 5000
    # moderate radii keep the e^{b+c-a} conditioning of the identity benign
    vb = geometry.random_points(n, 3, rng, max_radius=1.5)
    vc = geometry.random_points(n, 3, rng, max_radius=1.5)
    va = geometry.random_points(n, 3, rng, max_radius=1.5)
    a = geometry.distance(vb, vc)
    b = geometry.distance(va, vc)
    c = geometry.distance(va, vb)
    ang = geometry.angle_at(va, vb, vc)
    resid = np.cosh(a) - (np.cosh(b) * np.cosh(c) - np.sinh(b) * np.sinh(c) * np.cos(ang))
    rel = np.abs(resid) / np.cosh(a)
    return _record("law-of-cosines", float(np.max(rel)), 1e-8, scale)


def _check_sphere_direction_chi2(scale, seed):
    rng = np.random.default_rng(seed)
    o = geometry.origin(3)
    n = 40000
    dirs = geometry.random_directions(n, 3, rng)
    ang = np.arccos(np.clip(dirs[:, 0], -1, 1))
    k = 20
    # equal-probability bins for the sin(theta)/2 angular density
    edges = np.arccos(1.0 - 2.0 * np.arange(k + 1) / k)
    counts, _ = np.histogram(ang, bins=edges)
    expected = n / k
    chi2 = float(np.sum((counts - expected) ** 2 / expected))
    return _record("sphere-direction-chi2", chi2, st.chi2.ppf(0.99, k - 1), scale)


# -------------------------------------------------------------- heatkernel

def _check_radial_normalization(scale, seed):
    worst = 0.0
    for t in (0.1, 1.0, 10.0):
        law = heatkernel.RadialLaw(t)
        grid = np.linspace(1e-9, law.support_hi(), 40001)
        mass = np.trapezoid(np.exp(law.log_pdf_unnorm(grid)), grid)
        worst = max(worst, abs(mass - 1.0))
    return _record("radial-density-normalization", worst, 1e-6, scale)


def _check_envelope_sandwich(scale, seed):
    ts = np.linspace(0.5, 20, 40)
    rhos = np.linspace(0.0, 60, 121)
    ratios = []
    for t in ts:
        log_ratio = (heatkernel.log_hk_exact_d3(t, rhos)
                     - heatkernel.log_hk_envelope(t, rhos, 3))
        ratios.append(np.exp(log_ratio))
    r = np.concatenate(ratios)
    lo, hi = float(np.min(r)), float(np.max(r))
    # theory pins the ratio inside [(4 pi)^{-3/2}, 2 (4 pi)^{-3/2}]
    base = (4.0 * math.pi) ** -1.5
    bad = max(base / lo, hi / (2.0 * base))
    return _record("envelope-sandwich", bad, 1.0 + 1e-9, scale,
                   detail=f"ratio in [{lo:.5f}, {hi:.5f}]")


def _check_radial_sampler_moments(scale, seed):
    rng = np.random.default_rng(seed)
    t = 25.0
    x = heatkernel.sample_radial_exact_d3(t, rng, size=20000)
    mean_err = abs(x.mean() / t - 2.0)  # exact first moment is 2 + 1/t
    var_bad = max(x.var() / t - 3.0, 1.0 - x.var() / t)
    return _record("radial-sampler-moments", max(mean_err - 0.05, var_bad, 0.0),
                   1e-12, scale, detail=f"mean/t={x.mean()/t:.4f} var/t={x.var()/t:.4f}")


def _check_dirichlet_euclidean(scale, seed):
    worst = 0.0
    for r in (0.5, 1.0, 2.0):
        lam = heatkernel.dirichlet_eigenvalue(r, 3, "euclidean")
        worst = max(worst, abs(lam * r**2 - math.pi**2) / math.pi**2)
    return _record("dirichlet-euclidean-scaling", worst, 1e-6, scale)


def _check_dirichlet_hyperbolic(scale, seed):
    lam8 = heatkernel.dirichlet_eigenvalue(8.0, 3, "hyperbolic")
    exact = 1.0 + (math.pi / 8.0) ** 2
    err = abs(lam8 - exact) / exact
    lam30 = heatkernel.dirichlet_eigenvalue(30.0, 3, "hyperbolic")
    lam01 = heatkernel.dirichlet_eigenvalue(0.1, 3, "hyperbolic")
    limit_ok = max(abs(lam30 - 1.0) - 0.02, 0.0) + max(100.0 - lam01, 0.0)
    return _record("dirichlet-hyperbolic-limits", err + limit_ok, 1e-7, scale,
                   detail=f"lam8={lam8:.6f} lam30={lam30:.4f} lam0.1={lam01:.1f}")


def _check_exit_tail(scale, seed):
    cfg = brownian.SamplerConfig(dim=3, step=2e-3, seed=seed)
    out = heatkernel.exit_tail_estimate(2.0, [0.3, 0.6, 0.9], 3000, cfg)
    lam = 1.0 + (math.pi / 2.0) ** 2
    rel = abs(-out["slope"] - lam) / lam
    return _record("exit-tail-slope", rel, 0.15, scale,
                   detail=f"slope={out['slope']:.3f} target={-lam:.3f}")


# -------------------------------------------------------------- brownian

def _check_radial_speed(scale, seed):
    cfg = brownian.SamplerConfig(dim=3, step=2e-3, seed=seed)
    o = geometry.origin(3)
    radii = brownian.endpoint_radii(o, 25.0, cfg, 3000)
    return _record("radial-speed", abs(radii.mean() / 25.0 - 2.0), 0.05, scale,
                   detail=f"mean rho/t = {radii.mean()/25.0:.4f}")


def _check_radial_law(scale, seed):
    cfg = brownian.SamplerConfig(dim=3, step=1e-3, seed=seed)
    o = geometry.origin(3)
    radii = brownian.endpoint_radii(o, 1.0, cfg, 6000)
    law = heatkernel.RadialLaw(1.0)
    ks = st.kstest(radii, law.cdf).statistic
    return _record("radial-law-vs-exact", ks, 0.02, scale)


def _check_scheme_agreement(scale, seed):
    o = geometry.origin(3)
    r1 = brownian.endpoint_radii(
        o, 5.0, brownian.SamplerConfig(3, 1e-3, "embedded-sde", seed), 5000)
    r2 = brownian.endpoint_radii(
        o, 5.0, brownian.SamplerConfig(3, 1e-3, "geodesic-walk", seed), 5000)
    return _record("scheme-agreement", st.ks_2samp(r1, r2).statistic, 0.03, scale)


def _check_determinism(scale, seed):
    cfg = brownian.SamplerConfig(dim=3, step=1e-2, seed=seed)
    o = geometry.origin(3)
    a1, a2 = brownian.sample_pair(o, 1.0, cfg, path_index=3)
    b1, b2 = brownian.sample_pair(o, 1.0, cfg, path_index=3)
    same = (a1.points.tobytes() == b1.points.tobytes()
            and a2.points.tobytes() == b2.points.tobytes())
    return _record("determinism", 0.0 if same else 1.0, 0.5, scale)


def _check_pair_independence(scale, seed):
    cfg = brownian.SamplerConfig(dim=3, step=5e-3, seed=seed)
    o = geometry.origin(3)
    r1 = brownian.endpoint_radii(o, 5.0, cfg, 4000, tag=brownian.TAG_PRIMARY)
    r2 = brownian.endpoint_radii(o, 5.0, cfg, 4000, tag=brownian.TAG_SECONDARY)
    corr = float(np.corrcoef(r1, r2)[0, 1])
    return _record("pair-independence", abs(corr), 0.05, scale)


# -------------------------------------------------------------- covariance

def _check_decay_limit(scale, seed):
    worst = 0.0
    for alpha in (0.5, 1.0):
        target = alpha * math.gamma(alpha)
        got = 50.0**alpha * covariance.phi_alpha(50.0, alpha)
        worst = max(worst, abs(got - target) / target)
    return _record("decay-limit", worst, 0.02, scale)


def _check_quadrature_consistency(scale, seed):
    from scipy.integrate import quad
    worst = 0.0
    for alpha in (0.25, 0.5, 1.0, 2.0, 3.0):
        for rho in (0.0, 0.5, 2.0, 10.0, 60.0):
            p = covariance.psi(rho)
            direct = quad(lambda u: math.exp(-u ** (1.0 / alpha) * p), 0, 1,
                          epsabs=1e-12, epsrel=1e-12)[0]
            worst = max(worst, abs(direct - covariance.phi_alpha(rho, alpha)))
    return _record("quadrature-consistency", worst, 1e-8, scale)


def _check_positive_type(scale, seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(30):
        alpha = rng.choice([0.5, 1.0, 2.0])
        n = rng.integers(2, 80)
        pts = geometry.random_points(int(n), 3, rng, max_radius=30.0)
        out = covariance.psd_check(covariance.CovarianceModel("phi-alpha", alpha=alpha),
                                   pts)
        worst = max(worst, -out["min_eigenvalue"] / out["gram_trace"])
    return _record("positive-type", worst, 1e-8, scale)


def _check_monotone_profile(scale, seed):
    grid = np.linspace(0.0, 80.0, 2001)
    worst = 0.0
    for alpha in (0.25, 0.5, 1.0, 2.0):
        vals = covariance.phi_alpha(grid, alpha)
        worst = max(worst, float(np.max(np.diff(vals))))
    return _record("profile-monotone", worst, 1e-12, scale)


SUITES = {
    "geometry": [
        _check_hyperboloid_constraint,
        _check_triangle_inequality,
        _check_reverse_triangle,
        _check_cone_localization,
        _check_exp_log_roundtrip,
        _check_law_of_cosines,
        _check_sphere_direction_chi2,
    ],
    "heatkernel": [
        _check_radial_normalization,
        _check_envelope_sandwich,
        _check_radial_sampler_moments,
        _check_dirichlet_euclidean,
        _check_dirichlet_hyperbolic,
        _check_exit_tail,
    ],
    "brownian": [
        _check_radial_speed,
        _check_radial_law,
        _check_scheme_agreement,
        _check_determinism,
        _check_pair_independence,
    ],
    "covariance": [
        _check_decay_limit,
        _check_quadrature_consistency,
        _check_positive_type,
        _check_monotone_profile,
    ],
}


def run_suite(suite, tolerance_scale=1.0, seed=20260809):
    """Run one named suite (or 'all'); returns the JSON-ready report dict."""
    names = list(SUITES) if suite == "all" else [suite]
    for name in names:
        if name not in SUITES:
            raise ValueError(f"unknown suite {name!r}")
    checks = []
    t0 = time.time()
    for name in names:
        for fn in SUITES[name]:
            started = time.time()
            rec = fn(tolerance_scale, seed)
            rec["suite"] = name
            rec["elapsed_s"] = round(time.time() - started, 3)
            checks.append(rec)
    return {
        "suite": suite,
        "tolerance_scale": tolerance_scale,
        "seed": seed,
        "checks": checks,
        "all_passed": all(c["passed"] for c in checks),
        "elapsed_s": round(time.time() - t0, 3),
    }
