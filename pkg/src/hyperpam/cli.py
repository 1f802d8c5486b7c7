"""Batch experiment runner: sweeps, property-suite validation, and diagnostics.

Subcommands
-----------
phase-sweep   run the second-moment estimators over a (beta, t) grid and fit
              growth hypotheses per beta
validate      run the property-check suites, write a JSON report
lambda        estimate the uniform integral bound and the derived small-beta
              threshold
sample-path   dump Brownian trajectories as CSV
eigenvalue    principal Dirichlet eigenvalue of a geodesic ball

Exit codes: 0 success, 1 validation failure, 2 configuration error.

Config files are flat INI-style key/value sections (diffable and hashable);
every output file embeds the config hash and master seed in a header comment,
and re-running a command with the same config yields byte-identical files.
"""

import argparse
import configparser
import hashlib
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import brownian, checks, geometry, heatkernel, moments
from .covariance import CovarianceModel


class ConfigError(Exception):
    """Invalid configuration; carries a human-readable, line-located message."""


def _line_of(text, section, key=None):
    """Best-effort line number of a section or key inside the raw config text."""
    target = f"[{section}]" if key is None else key
    in_section = key is None
    for i, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            in_section = stripped == f"[{section}]"
            if key is None and in_section:
                return i
        elif key is not None and in_section and stripped.split("=")[0].strip() == key:
            return i
    return 0


class _Config:
    """Parsed experiment configuration."""

    def __init__(self, path):
        self.path = str(path)
        try:
            self.text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read config: {exc}") from exc
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            parser.read_string(self.text)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        self.parser = parser
        self.hash = hashlib.sha256(self.text.encode()).hexdigest()[:16]

    def _fail(self, section, key, message):
        line = _line_of(self.text, section, key)
        where = f"{self.path}:{line}" if line else self.path
        raise ConfigError(f"{where}: [{section}] {key}: {message}")

    def get(self, section, key, cast, default=None, required=False):
        if not self.parser.has_option(section, key):
            if required:
                self._fail(section, key, "missing required key")
            return default
        raw = self.parser.get(section, key)
        try:
            return cast(raw)
        except ValueError as exc:
            self._fail(section, key, f"cannot parse {raw!r}: {exc}")

    def floats(self, section, key, required=False):
        raw = self.get(section, key, str, required=required)
        if raw is None:
            return None
        try:
            return [float(tok) for tok in raw.replace(",", " ").split()]
        except ValueError as exc:
            self._fail(section, key, f"cannot parse float list {raw!r}: {exc}")

    def model(self):
        kind = self.get("model", "kind", str, required=True)
        alpha = self.get("model", "alpha", float)
        big_c = self.get("model", "C", float, default=1.0)
        small_c = self.get("model", "c", float, default=1.0)
        try:
            return CovarianceModel(kind, alpha=alpha, C=big_c, c=small_c)
        except ValueError as exc:
            self._fail("model", "kind", str(exc))

    def sampler(self, seed_override=None):
        seed = seed_override if seed_override is not None \
            else self.get("run", "seed", int, required=True)
        try:
            return brownian.SamplerConfig(
                dim=self.get("run", "dim", int, default=3),
                step=self.get("run", "step", float, default=1e-3),
                scheme=self.get("run", "scheme", str, default="embedded-sde"),
                seed=seed,
            )
        except ValueError as exc:
            self._fail("run", "step", str(exc))


def _meta(cfg, sampler, extra=None):
    meta = {"config_hash": cfg.hash, "seed": sampler.seed}
    meta.update(extra or {})
    return meta


_ESTIMATORS = {
    "fk": moments.fk_second_moment,
    "jensen": moments.jensen_lower,
    "fk-euclidean": moments.euclidean_second_moment,
}


def _run_cell(args):
    """One (estimator, beta, t) cell; module-level so worker pools can pickle it."""
    kind, beta, t, model, n_paths, sampler = args
    x0 = geometry.origin(sampler.dim)
    try:
        if kind == "fk-euclidean":
            est = moments.euclidean_second_moment(
                np.zeros(sampler.dim), t, beta, model, n_paths, sampler)
        else:
            est = _ESTIMATORS[kind](x0, t, beta, model, n_paths, sampler)
        return kind, beta, t, moments.to_phase_row(est), None
    except Exception as exc:  # keep the sweep alive; the cell is reported
        return kind, beta, t, None, f"{type(exc).__name__}: {exc}"


def cmd_phase_sweep(args):
    cfg = _Config(args.config)
    model = cfg.model()
    sampler = cfg.sampler(args.seed)
    betas = cfg.floats("sweep", "beta", required=True)
    ts = cfg.floats("sweep", "t", required=True)
    n_paths = cfg.get("run", "n_paths", int, default=1024)
    estimators = [e.strip() for e in
                  cfg.get("run", "estimators", str, default="fk").split(",")]
    workers = args.workers or cfg.get("run", "workers", int, default=1)
    if any(b < 0 for b in betas):
        raise ConfigError(f"{args.config}: [sweep] beta: all values must be >= 0")
    if any(t <= 0 for t in ts):
        raise ConfigError(f"{args.config}: [sweep] t: all values must be > 0")
    for kind in estimators:
        if kind not in _ESTIMATORS:
            raise ConfigError(f"{args.config}: [run] estimators: unknown kind "
                              f"{kind!r} (choose from {sorted(_ESTIMATORS)})")
    if model.kind == "constant":
        print("note: the constant profile has no spatial decay; it serves as "
              "an analytic oracle (log second moment = beta^2 c t)", file=sys.stderr)

    cells = [(kind, beta, t, model, n_paths, sampler)
             for kind in estimators for beta in betas for t in ts]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, cells))
    else:
        results = [_run_cell(c) for c in cells]
    results.sort(key=lambda r: (r[0], r[1], r[2]))

    rows = [r[3] for r in results if r[3] is not None]
    errors = [{"estimator": r[0], "beta": r[1], "t": r[2], "error": r[4]}
              for r in results if r[4] is not None]
    for err in errors:
        print(f"warning: cell {err['estimator']} beta={err['beta']} "
              f"t={err['t']} failed: {err['error']}", file=sys.stderr)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    # workers deliberately not recorded: results are worker-count independent
    meta = _meta(cfg, sampler, {"model": model.label()})
    moments.write_rows_csv(rows, str(out / "rows.csv"), meta)
    moments.write_rows_json(rows, str(out / "rows.json"), meta)

    summaries = {}
    for kind in estimators:
        for beta in betas:
            sel = [r for r in rows
                   if r.estimator_kind.startswith(kind) and r.beta == beta]
            key = f"{kind}:beta={beta:g}"
            if len({r.t for r in sel}) < 4:
                summaries[key] = {"note": "need >= 4 distinct t values"}
                continue
            alpha = model.alpha
            hyp = "power-t^{1-alpha}" if (alpha is not None and 0 < alpha < 1) \
                else "linear-in-t"
            fit = moments.growth_fit(sel, hyp)
            summaries[key] = {
                "hypothesis": hyp,
                "classification": fit.classification,
                "rate_or_exponent": fit.rate_or_exponent,
                "r_squared": fit.r_squared,
                "slope_linear": fit.slope_linear,
                "r2_linear": fit.r2_linear,
                "r2_power": fit.r2_power,
                "exponent_loglog": fit.exponent_loglog,
            }
    with open(out / "summary.json", "w") as fh:
        json.dump({"meta": meta, "summaries": summaries, "errors": errors},
                  fh, indent=1, default=float)
        fh.write("\n")
    print(f"wrote {out / 'rows.csv'}, rows={len(rows)}, errors={len(errors)}")
    return 0


def cmd_validate(args):
    report = checks.run_suite(args.suite, tolerance_scale=args.tolerance_scale,
                              seed=args.seed or 20260809)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w") as fh:
            json.dump(report, fh, indent=1)
            fh.write("\n")
    for c in report["checks"]:
        status = "pass" if c["passed"] else "FAIL"
        print(f"[{status}] {c['suite']}/{c['name']}: observed={c['observed']:.3e} "
              f"limit={c['effective_limit']:.3e} ({c['elapsed_s']}s)")
    print(f"suite={report['suite']} all_passed={report['all_passed']} "
          f"elapsed={report['elapsed_s']}s")
    return 0 if report["all_passed"] else 1


def cmd_lambda(args):
    cfg = _Config(args.config)
    model = cfg.model()
    sampler = cfg.sampler(args.seed)
    alpha = model.alpha
    if model.kind == "constant" or alpha is None or alpha <= 1.0:
        print("error: the integral bound requires a profile decaying faster "
              "than 1/rho (alpha > 1); got "
              f"{model.label()} (alpha <= 1 makes the tail diverge)",
              file=sys.stderr)
        return 2
    t_max = cfg.get("lambda", "t_max", float, default=50.0)
    seps = cfg.floats("lambda", "separations") or [0.0, 5.0, 10.0]
    n_paths = cfg.get("lambda", "n_paths", int,
                      default=cfg.get("run", "n_paths", int, default=512))
    o = geometry.origin(sampler.dim)
    pairs = []
    for s in seps:
        if s == 0:
            pairs.append((o, o))
        else:
            e1 = np.zeros(sampler.dim)
            e1[0] = 1.0
            y = geometry.points_from_polar(np.array([s]), e1[None, :])[0]
            pairs.append((o, geometry.HPoint(y, sampler.dim)))
    result = moments.lambda_constant(model, pairs, t_max, n_paths, sampler)
    result["model"] = model.label()
    result["config_hash"] = cfg.hash
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "lambda.json", "w") as fh:
        json.dump(result, fh, indent=1, default=float)
        fh.write("\n")
    print(f"lambda_hat={result['lambda_hat']:.6f} "
          f"beta0_hat={result['beta0_hat']:.6f} -> {out / 'lambda.json'}")
    return 0


def cmd_sample_path(args):
    sampler = brownian.SamplerConfig(dim=args.dim, step=args.step,
                                     scheme=args.scheme, seed=args.seed or 0)
    x0 = geometry.origin(args.dim)
    paths = [brownian.sample_path(x0, args.t, sampler, path_index=i)
             for i in range(args.n_paths)]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as fh:
        fh.write(f"# config_hash=- seed={sampler.seed} scheme={sampler.scheme} "
                 f"step={sampler.step!r}\n")
        brownian.dump_paths_csv(paths, fh)
    print(f"wrote {out} ({args.n_paths} paths, horizon t={args.t})")
    return 0


def cmd_eigenvalue(args):
    lam = heatkernel.dirichlet_eigenvalue(args.r, args.dim, args.mode)
    print(f"lambda({args.mode}, r={args.r:g}, d={args.dim}) = {lam!r}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="hyperpam", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    sweep = sub.add_parser("phase-sweep", help="run estimator sweeps over (beta, t)")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--seed", type=int, default=None, help="override [run] seed")
    sweep.add_argument("--workers", type=int, default=None)
    sweep.add_argument("--out", default="out")
    sweep.set_defaults(func=cmd_phase_sweep)

    val = sub.add_parser("validate", help="run the property-check suites")
    val.add_argument("--suite", default="all",
                     choices=["geometry", "heatkernel", "brownian", "covariance", "all"])
    val.add_argument("--tolerance-scale", type=float, default=1.0,
                     help="multiply every limit (harness self-test knob)")
    val.add_argument("--seed", type=int, default=None)
    val.add_argument("--out", default=None, help="write the JSON report here")
    val.set_defaults(func=cmd_validate)

    lam = sub.add_parser("lambda", help="integral bound and small-beta threshold")
    lam.add_argument("--config", required=True)
    lam.add_argument("--seed", type=int, default=None)
    lam.add_argument("--out", default="out")
    lam.set_defaults(func=cmd_lambda)

    sp = sub.add_parser("sample-path", help="dump Brownian trajectories as CSV")
    sp.add_argument("--t", type=float, default=1.0)
    sp.add_argument("--n-paths", type=int, default=1)
    sp.add_argument("--dim", type=int, default=3)
    sp.add_argument("--step", type=float, default=1e-3)
    sp.add_argument("--scheme", default="embedded-sde",
                    choices=["embedded-sde", "geodesic-walk"])
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default="paths.csv")
    sp.set_defaults(func=cmd_sample_path)

    eig = sub.add_parser("eigenvalue", help="principal Dirichlet eigenvalue")
    eig.add_argument("--r", type=float, required=True)
    eig.add_argument("--dim", type=int, default=3)
    eig.add_argument("--mode", default="hyperbolic",
                     choices=["hyperbolic", "euclidean"])
    eig.set_defaults(func=cmd_eigenvalue)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
