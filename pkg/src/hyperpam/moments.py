"""Second-moment machinery for the parabolic Anderson model.

All estimators start from the pair representation of the second moment,

    E[u(t, x)^2] = E exp(beta^2 * integral_0^t f(B_s, B_s~) ds),

with B, B~ independent hyperbolic Brownian motions from x.  The exponential
functional is heavy tailed, so every reduction happens in log domain:
estimates are reported as log E[u^2] with a delta-method standard error,
plus a max-exponent diagnostic that flags ensemble undersampling.

Estimators
----------
* ``fk_second_moment``       log-mean-exp over the pair ensemble (the direct
                             Monte Carlo estimator).
* ``jensen_lower``           exp(beta^2 * integral of the ensemble-averaged
                             integrand); a low-variance guaranteed lower bound
                             (per-sample, it is log-mean-exp's Jensen minorant).
* ``dyson_partial``          the first terms of the expansion in beta^2, with
                             the iterated time integrals estimated by uniform
                             time tuples on the same ensemble.
* ``lambda_constant``        the uniform bound on integral_0^inf E f(B_t, B_t~) dt
                             and the derived smallness threshold 1/sqrt(Lambda).
* ``euclidean_second_moment``  the same direct estimator driven by flat
                             Brownian motion (variance 2t per coordinate).

Time integrals use the trapezoid rule on the coarse storage grid (spacing
<= t/128); the quadrature error is far below the Monte Carlo noise, and is
exactly zero for the constant analytic oracle.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from . import brownian, heatkernel
from .brownian import path_stream
from .geometry import _coords


class EstimatorError(RuntimeError):
    """Too many excluded paths or an invalid estimator configuration."""


@dataclass
class MomentEstimate:
    """A log-domain Monte Carlo estimate of E[u(t, x)^2]."""

    t: float
    log_m2: float
    stderr_log: float
    n_paths: int
    beta: float
    model: object
    seed: int
    estimator_kind: str
    max_z: float = 0.0
    n_excluded: int = 0


@dataclass
class PhaseRow:
    """One record feeding the growth-exponent fitter and the CSV/JSON output."""

    alpha: float
    beta: float
    t: float
    log_m2: float
    stderr_log: float
    n_paths: int
    estimator_kind: str
    seed: int

    def __post_init__(self):
        if self.t <= 0:
            raise ValueError("t must be positive")


def _log_mean_exp_with_se(z):
    """log(mean(exp(z))) and its delta-method standard error."""
    z = np.asarray(z, dtype=float)
    zmax = float(np.max(z))
    w = np.exp(z - zmax)
    m = float(np.mean(w))
    log_m = zmax + math.log(m)
    se = float(np.std(w, ddof=1) / (m * math.sqrt(len(z)))) if len(z) > 1 else 0.0
    return log_m, se


def _pair_integrals(x, t, model, n_paths, cfg):
    """Stored times, per-pair profile matrix F, and pathwise integrals q."""
    times, F = brownian.pair_profile_matrix(x, x, t, cfg, n_paths, model.profile)
    q = np.trapezoid(F, times, axis=1)
    return times, F, q


def fk_second_moment(x, t, beta, model, n_paths, cfg):
    """Direct Monte Carlo estimate of log E[u(t, x)^2] over pair ensembles."""
    _check_common(t, beta, n_paths)
    if beta == 0.0:
        return MomentEstimate(t, 0.0, 0.0, n_paths, 0.0, model, cfg.seed, "fk")
    _, _, q = _pair_integrals(x, t, model, n_paths, cfg)
    z = beta**2 * q
    finite = np.isfinite(z)
    n_excl = int(np.sum(~finite))
    if n_excl > max(1e-3 * n_paths, 0):
        raise EstimatorError(f"{n_excl}/{n_paths} non-finite exponents")
    log_m2, se = _log_mean_exp_with_se(z[finite])
    return MomentEstimate(t, log_m2, se, n_paths, beta, model, cfg.seed, "fk",
                          max_z=float(np.max(z[finite])), n_excluded=n_excl)


def jensen_lower(x, t, beta, model, n_paths, cfg):
    """Jensen lower-bound estimator: average the integrand first, then exponentiate.

    Requires a nonnegative profile.  On a shared ensemble this is a pathwise
    lower bound for :func:`fk_second_moment` (arithmetic-geometric mean).
    """
    _check_common(t, beta, n_paths)
    if model.sup_value() < 0:
        raise EstimatorError("jensen_lower requires a nonnegative covariance")
    if beta == 0.0:
        return MomentEstimate(t, 0.0, 0.0, n_paths, 0.0, model, cfg.seed, "jensen")
    times, F, q = _pair_integrals(x, t, model, n_paths, cfg)
    slice_means = F.mean(axis=0)
    integral = float(np.trapezoid(slice_means, times))
    se_int = float(np.std(q, ddof=1) / math.sqrt(n_paths)) if n_paths > 1 else 0.0
    return MomentEstimate(t, beta**2 * integral, beta**2 * se_int, n_paths, beta,
                          model, cfg.seed, "jensen",
                          max_z=float(beta**2 * np.max(q)))


def dyson_partial(x, t, beta, model, n_terms, n_paths, cfg, tuples_per_order=64):
    """Partial sum of the beta^2-expansion up to order ``n_terms``.

    Each iterated time integral is estimated on the same path ensemble by
    Monte Carlo over uniform time tuples in [0, t]^n (linear interpolation of
    the stored integrand).  The result carries a truncation flag when the last
    term exceeds 1% of the partial sum.
    """
    _check_common(t, beta, n_paths)
    if not 0 <= n_terms <= 8:
        raise ValueError("n_terms must lie in [0, 8]")
    times, F, _ = _pair_integrals(x, t, model, n_paths, cfg)
    est = np.ones((n_paths, n_terms + 1))
    for p in range(n_paths):
        gen = path_stream(cfg.seed, p, brownian.TAG_TUPLES)
        row = F[p]
        for n in range(1, n_terms + 1):
            u = gen.uniform(0.0, t, size=(tuples_per_order, n))
            vals = np.interp(u.ravel(), times, row).reshape(tuples_per_order, n)
            est[p, n] = t**n * float(np.mean(np.prod(vals, axis=1)))
    coef = np.array([beta ** (2 * n) / math.factorial(n)
                     for n in range(n_terms + 1)])
    per_path = est @ coef
    total = float(np.mean(per_path))
    se = float(np.std(per_path, ddof=1) / (total * math.sqrt(n_paths))) \
        if n_paths > 1 else 0.0
    term_means = coef * est.mean(axis=0)
    truncated = bool(n_terms >= 1 and term_means[-1] > 0.01 * np.sum(term_means))
    out = MomentEstimate(t, math.log(total), se, n_paths, beta, model, cfg.seed,
                         "dyson", max_z=float(np.max(per_path)))
    out.terms = term_means
    out.truncation_flag = truncated
    return out


def lambda_constant(model, start_pairs, T_max, n_paths, cfg):
    """Estimate the uniform bound on integral_0^inf E f(B_t, B_t~) dt.

    For each start pair the time-truncated integral over [0, T_max] is
    computed from ensemble slice means, extended by a power-law tail
    correction fitted to the integrand's late-time decay.  Returns the max
    over pairs as ``lambda_hat`` and ``beta0_hat = 1/sqrt(lambda_hat)``.

    Refuses profiles with alpha <= 1 (the tail integral does not converge).
    """
    alpha = getattr(model, "alpha", None)
    if model.kind == "constant" or alpha is None or alpha <= 1.0:
        raise EstimatorError(
            "lambda_constant requires a profile decaying faster than 1/rho "
            "(alpha > 1); the tail integral diverges otherwise")
    if T_max < 50:
        raise ValueError("T_max must be at least 50")
    pairs_out = []
    for k, (x, y) in enumerate(start_pairs):
        times, F = brownian.pair_profile_matrix(
            x, y, T_max, cfg, n_paths, model.profile, first_index=k * n_paths)
        means = F.mean(axis=0)
        integral = float(np.trapezoid(means, times))
        late = times >= T_max / 4.0
        late &= means > 0
        slope = float("nan")
        tail = math.inf
        if np.sum(late) >= 3:
            slope = float(np.polyfit(np.log(times[late]), np.log(means[late]), 1)[0])
            if slope < -1.0:
                tail = float(means[-1] * T_max / (-slope - 1.0))
        pairs_out.append({
            "separation": float(np.arccosh(max(-_mink(_coords(x), _coords(y)), 1.0))),
            "integral": integral,
            "tail_correction": tail,
            "decay_slope": slope,
            "total": integral + tail,
        })
    lam = max(p["total"] for p in pairs_out)
    return {"lambda_hat": lam, "beta0_hat": lam ** -0.5, "pairs": pairs_out,
            "T_max": T_max, "n_paths": n_paths, "seed": cfg.seed}


def _mink(a, b):
    return float(np.sum(a[:-1] * b[:-1]) - a[-1] * b[-1])


def _euclidean_pair_profile_matrix(t, cfg, n_paths, profile, first_index=0):
    """f(|B_s - B_s~|) on the stored grid for flat pairs (variance 2t per coord)."""
    n_steps, dt, stored, times = brownian._schedule(t, cfg.step)
    d = cfg.dim
    F = np.empty((n_paths, len(stored)))
    root2dt = math.sqrt(2.0 * dt)
    stored_set = np.zeros(n_steps + 1, dtype=bool)
    stored_set[stored] = True
    slot_of = np.cumsum(stored_set) - 1
    batch = 2048
    for lo in range(0, n_paths, batch):
        hi = min(lo + batch, n_paths)
        P = hi - lo
        gens_b = [path_stream(cfg.seed, i, brownian.TAG_PRIMARY)
                  for i in range(first_index + lo, first_index + hi)]
        gens_bt = [path_stream(cfg.seed, i, brownian.TAG_SECONDARY)
                   for i in range(first_index + lo, first_index + hi)]
        sep = np.zeros((P, d))
        F[lo:hi, 0] = profile(np.zeros(P))
        chunk = brownian._chunk_size(P, d, n_steps)
        pos = 0
        while pos < n_steps:
            k = min(chunk, n_steps - pos)
            gb = np.stack([g.standard_normal((k, d)) for g in gens_b])
            gt = np.stack([g.standard_normal((k, d)) for g in gens_bt])
            walk = sep[:, None, :] + root2dt * np.cumsum(gb - gt, axis=1)
            local = np.nonzero(stored_set[pos + 1:pos + k + 1])[0]
            if len(local):
                dists = np.linalg.norm(walk[:, local, :], axis=2)
                F[lo:hi, slot_of[pos + 1 + local]] = profile(dists)
            sep = walk[:, -1, :].copy()
            pos += k
    return times, F


def euclidean_second_moment(x, t, beta, model, n_paths, cfg):
    """The direct estimator driven by flat Brownian motion (comparison mode).

    Requires d >= 3 (transience) and a truncated-power or constant profile;
    translation invariance makes the starting point immaterial.
    """
    _check_common(t, beta, n_paths)
    if cfg.dim < 3:
        raise EstimatorError("euclidean mode requires d >= 3")
    if model.kind not in ("truncated-power", "constant"):
        raise EstimatorError("euclidean mode expects a truncated-power or "
                             "constant profile")
    if beta == 0.0:
        return MomentEstimate(t, 0.0, 0.0, n_paths, 0.0, model, cfg.seed,
                              "fk-euclidean")
    times, F = _euclidean_pair_profile_matrix(t, cfg, n_paths, model.profile)
    q = np.trapezoid(F, times, axis=1)
    z = beta**2 * q
    log_m2, se = _log_mean_exp_with_se(z)
    return MomentEstimate(t, log_m2, se, n_paths, beta, model, cfg.seed,
                          "fk-euclidean", max_z=float(np.max(z)))


def _check_common(t, beta, n_paths):
    if t <= 0:
        raise ValueError("t must be positive")
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")


def m_f(model, r, n_grid=2001):
    """min f over pairs of points in the ball of radius r/2 around a common center.

    For a radial profile this is the minimum of F over distances [0, r]
    (computed on a dense grid rather than assuming monotonicity).
    """
    grid = np.linspace(0.0, r, n_grid)
    return float(np.min(model.profile(grid)))


def critical_beta_exponential(model, r, d):
    """The sufficient inverse temperature for exponential growth at radius r.

    beta1 = sqrt(2 * lambda_{r/2} / m_f(r)); for beta above this, the
    localization lower bound exp((beta^2 m_f - 2 lambda_{r/2}) t) grows.
    """
    lam = heatkernel.dirichlet_eigenvalue(r / 2.0, d, "hyperbolic")
    return math.sqrt(2.0 * lam / m_f(model, r)), lam


@dataclass
class GrowthFit:
    rate_or_exponent: float
    r_squared: float
    classification: str
    slope_linear: float
    r2_linear: float
    r2_power: float
    exponent_loglog: float


def _wls(x, y, w):
    W = np.sum(w)
    xm = np.sum(w * x) / W
    ym = np.sum(w * y) / W
    var = np.sum(w * (x - xm) ** 2)
    if var == 0:
        return 0.0, ym, 0.0
    b = np.sum(w * (x - xm) * (y - ym)) / var
    a = ym - b * xm
    ss_res = np.sum(w * (y - a - b * x) ** 2)
    ss_tot = np.sum(w * (y - ym) ** 2)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res < 1e-30 else 0.0)
    return float(b), float(a), float(r2)


def growth_fit(rows, hypothesis):
    """Weighted least squares of log_m2 against a growth hypothesis.

    ``hypothesis`` is one of "linear-in-t", "power-t^{1-alpha}", "bounded".
    Classification rule: "bounded" when the fitted linear slope times t_max
    is within twice the largest standard error; otherwise the better-R^2
    hypothesis among linear and power wins.
    """
    if hypothesis not in ("linear-in-t", "power-t^{1-alpha}", "bounded"):
        raise ValueError(f"unknown hypothesis {hypothesis!r}")
    rows = list(rows)
    t = np.array([r.t for r in rows], dtype=float)
    if len(np.unique(t)) < 4:
        raise ValueError("need at least 4 distinct t values")
    y = np.array([r.log_m2 for r in rows], dtype=float)
    se = np.array([r.stderr_log for r in rows], dtype=float)
    w = 1.0 / np.maximum(se, 1e-12) ** 2

    b_lin, _, r2_lin = _wls(t, y, w)

    alphas = {r.alpha for r in rows if r.alpha is not None and np.isfinite(r.alpha)}
    r2_pow = float("nan")
    if len(alphas) == 1:
        alpha = alphas.pop()
        if 0 < alpha < 1:
            _, _, r2_pow = _wls(t ** (1.0 - alpha), y, w)

    exponent = float("nan")
    pos = y > 0
    if np.sum(pos) >= 2:
        exponent = float(np.polyfit(np.log(t[pos]), np.log(y[pos]), 1)[0])

    if b_lin * np.max(t) <= 2.0 * np.max(se):
        classification = "bounded"
    elif not np.isnan(r2_pow) and r2_pow > r2_lin:
        classification = "power"
    else:
        classification = "linear"

    if hypothesis == "linear-in-t":
        rate, r2 = b_lin, r2_lin
    elif hypothesis == "power-t^{1-alpha}":
        rate, r2 = exponent, r2_pow
    else:
        rate, r2 = b_lin, float("nan")
    return GrowthFit(rate, r2, classification, b_lin, r2_lin, r2_pow, exponent)


CSV_COLUMNS = ("alpha", "beta", "t", "log_m2", "stderr_log", "n_paths",
               "estimator_kind", "seed")


def to_phase_row(est):
    """PhaseRow view of a MomentEstimate (alpha is NaN for the constant kind)."""
    alpha = getattr(est.model, "alpha", None)
    return PhaseRow(float("nan") if alpha is None else float(alpha),
                    est.beta, est.t, est.log_m2, est.stderr_log,
                    est.n_paths, est.estimator_kind, est.seed)


def write_rows_csv(rows, file, meta=None):
    """Write PhaseRows with the exact column set; meta goes into a '#' header."""
    own = isinstance(file, str)
    fh = open(file, "w") if own else file
    try:
        if meta:
            fh.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for r in rows:
            fh.write(",".join([
                repr(float(r.alpha)), repr(float(r.beta)), repr(float(r.t)),
                repr(float(r.log_m2)), repr(float(r.stderr_log)),
                str(int(r.n_paths)), r.estimator_kind, str(int(r.seed)),
            ]) + "\n")
    finally:
        if own:
            fh.close()


def write_rows_json(rows, file, meta=None):
    payload = {
        "meta": meta or {},
        "rows": [{
            "alpha": float(r.alpha), "beta": float(r.beta), "t": float(r.t),
            "log_m2": float(r.log_m2), "stderr_log": float(r.stderr_log),
            "n_paths": int(r.n_paths), "estimator_kind": r.estimator_kind,
            "seed": int(r.seed),
        } for r in rows],
    }
    own = isinstance(file, str)
    fh = open(file, "w") if own else file
    try:
        json.dump(payload, fh, indent=1, allow_nan=True)
        fh.write("\n")
    finally:
        if own:
            fh.close()
