"""Covariance profiles: special-function oracles, decay, positivity."""

import math

import numpy as np
import pytest
import scipy.special as sp
from scipy.integrate import quad

from hyperpam import geometry
from hyperpam.covariance import (
    CovarianceModel, lower_incomplete_gamma, phi_alpha, psd_check, psi,
)

SEED = 20260809


def test_psi_values():
    assert psi(0.0) == 0.0
    assert psi(1.0) == pytest.approx(math.log(math.cosh(1.0)), abs=1e-12)
    assert psi(100.0) == pytest.approx(100.0 - math.log(2.0), abs=1e-12)
    grid = np.linspace(0.0, 25.0, 200)
    assert np.allclose(psi(grid), np.log(np.cosh(grid)), atol=1e-12)
    with pytest.raises(ValueError):
        psi(-1.0)


def test_gamma_closed_forms():
    xs = np.linspace(0.0, 30.0, 50)
    assert np.allclose(lower_incomplete_gamma(1.0, xs), 1.0 - np.exp(-xs),
                       atol=1e-12)
    assert lower_incomplete_gamma(0.5, 50.0) == pytest.approx(
        math.sqrt(math.pi), rel=1e-10)
    assert lower_incomplete_gamma(2.0, 1.0) == pytest.approx(
        1.0 - 2.0 * math.exp(-1.0), rel=1e-12)


def test_gamma_vs_scipy_oracle():
    xs = np.array([1e-6, 0.01, 0.3, 1.0, 2.5, 7.0, 20.0, 80.0, 300.0])
    for a in (0.1, 0.25, 0.5, 1.0, 1.5, 2.0, 3.7, 6.0):
        mine = lower_incomplete_gamma(a, xs)
        ref = sp.gammainc(a, xs) * sp.gamma(a)
        assert np.max(np.abs(mine - ref) / ref) < 1e-10


def test_gamma_rejects_bad_arguments():
    with pytest.raises(ValueError):
        lower_incomplete_gamma(0.0, 1.0)
    with pytest.raises(ValueError):
        lower_incomplete_gamma(1.0, -0.5)


def test_phi_alpha_at_zero_and_alpha_one():
    assert phi_alpha(0.0, 0.7) == 1.0
    p = psi(1.0)
    expect = (1.0 - 1.0 / math.cosh(1.0)) / p
    assert phi_alpha(1.0, 1.0) == pytest.approx(expect, rel=1e-10)
    assert phi_alpha(1.0, 1.0) == pytest.approx(0.8113, abs=5e-5)


def test_phi_alpha_matches_direct_quadrature():
    """The u-integral definition and the incomplete-gamma closed form agree."""
    for alpha in (0.25, 0.5, 1.0, 1.5, 2.0, 3.0):
        for rho in (0.0, 0.25, 1.0, 2.0, 5.0, 15.0, 60.0):
            p = float(psi(rho))
            direct = quad(lambda u: math.exp(-(u ** (1.0 / alpha)) * p),
                          0.0, 1.0, epsabs=1e-13, epsrel=1e-13)[0]
            assert phi_alpha(rho, alpha) == pytest.approx(direct, abs=1e-8)


def test_phi_alpha_decay_limit():
    """rho^alpha Phi_alpha -> alpha Gamma(alpha); at rho = 50 the residual is
    alpha*log(2)/50 to first order (1.4% at alpha = 1, 2.1% at alpha = 1.5)."""
    for alpha in (0.5, 1.0):
        target = alpha * math.gamma(alpha)
        got = 50.0**alpha * phi_alpha(50.0, alpha)
        assert abs(got - target) / target <= 0.02
    # alpha = 1.5 sits just above 2%: the exact deviation is
    # (50/psi(50))^1.5 - 1 = 2.116e-2; pin it so regressions are visible
    got = 50.0**1.5 * phi_alpha(50.0, 1.5)
    target = 1.5 * math.gamma(1.5)
    assert abs(got - target) / target == pytest.approx(2.116e-2, abs=2e-4)


def test_phi_alpha_monotone_and_bounded():
    grid = np.linspace(0.0, 100.0, 4001)
    for alpha in (0.25, 0.5, 1.0, 2.0):
        vals = phi_alpha(grid, alpha)
        assert vals[0] == 1.0
        assert np.all(np.diff(vals) <= 1e-12)
        assert np.all(vals > 0.0)


def test_phi_alpha_power_envelopes():
    """Fitted-constant upper/lower power bounds hold on rho in [5, 100]."""
    grid = np.linspace(5.0, 100.0, 400)
    for alpha in (0.5, 1.0, 2.0):
        ratio = grid**alpha * phi_alpha(grid, alpha) / (alpha * math.gamma(alpha))
        assert np.all(ratio >= 1.0 - 1e-12)
        assert np.all(ratio <= 1.3)


def test_model_validation():
    with pytest.raises(ValueError):
        CovarianceModel("phi-alpha")  # missing alpha
    with pytest.raises(ValueError):
        CovarianceModel("truncated-power", alpha=-1.0)
    with pytest.raises(ValueError):
        CovarianceModel("nonsense")
    with pytest.raises(ValueError):
        CovarianceModel("constant", c=-0.5)


def test_evaluate_kinds():
    o = geometry.origin(3)
    rng = np.random.default_rng(SEED)
    p = geometry.exp_map(o, geometry.uniform_sphere_direction(o, rng), 1.0)
    const = CovarianceModel("constant", c=0.7)
    assert const.evaluate(o, p) == 0.7
    tp = CovarianceModel("truncated-power", alpha=1.0, C=1.0)
    assert tp.evaluate(o, p) == pytest.approx(0.5, abs=1e-12)
    pa = CovarianceModel("phi-alpha", alpha=1.0)
    assert pa.evaluate(o, p) == pytest.approx(phi_alpha(1.0, 1.0), rel=1e-12)
    assert pa.evaluate(o, o) == 1.0  # unit variance on the diagonal
    assert pa.evaluate(o, p) == pytest.approx(pa.evaluate(p, o), rel=1e-14)
    with pytest.raises(ValueError):
        pa.evaluate(o, geometry.origin(4))


def test_psd_check_singleton_and_pair():
    o = geometry.origin(3)
    model = CovarianceModel("phi-alpha", alpha=1.0)
    out = psd_check(model, [o])
    assert out["min_eigenvalue"] == pytest.approx(1.0)
    rng = np.random.default_rng(SEED)
    p = geometry.exp_map(o, geometry.uniform_sphere_direction(o, rng), 1.0)
    out2 = psd_check(model, [o, p])
    val = phi_alpha(1.0, 1.0)
    assert out2["min_eigenvalue"] == pytest.approx(1.0 - val, rel=1e-9)
    assert out2["gram_trace"] == pytest.approx(2.0)


def test_psd_property_random_sets():
    rng = np.random.default_rng(SEED)
    for _ in range(25):
        alpha = float(rng.choice([0.5, 1.0, 2.0]))
        n = int(rng.integers(2, 100))
        pts = geometry.random_points(n, 3, rng, max_radius=30.0)
        out = psd_check(CovarianceModel("phi-alpha", alpha=alpha), pts)
        assert out["min_eigenvalue"] >= -1e-8 * out["gram_trace"]


def test_psd_check_size_limits():
    o = geometry.origin(3)
    with pytest.raises(ValueError):
        psd_check(CovarianceModel("phi-alpha", alpha=1.0), np.empty((0, 4)))


def test_sup_and_label():
    assert CovarianceModel("phi-alpha", alpha=0.5).sup_value() == 1.0
    assert CovarianceModel("truncated-power", alpha=2.0, C=3.0).sup_value() == 3.0
    assert CovarianceModel("constant", c=2.0).sup_value() == 2.0
    assert "phi-alpha" in CovarianceModel("phi-alpha", alpha=0.5).label()
