"""Command-line front end.

Exit codes: 0 success, 2 configuration or flag error, 3 I/O or data error.
Diagnostics go to stderr; with ``--out -`` the primary output goes to stdout
and no sidecar files are written.
"""
import argparse
import csv
import io
import logging
import os
import sys

import numpy as np

from . import __version__
from . import config as cfgmod
from .estimators import (
    estimate_adaptive,
    estimate_fixed,
    estimate_laplace,
    estimate_sieve,
)
from .expfam import Dataset, ModelConfig
from .harness import (
    TargetDensity,
    adaptive_study,
    condition_diagnostics,
    contraction_study,
    dumps,
    figure1_replication,
    rate_study,
    stream,
)
from .posterior import MCMCParams, posterior_mean_density, rw_metropolis
from .priors import dimension_N

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3


class ConfigError(Exception):
    pass


class DataError(Exception):
    pass


def _sidecar_path(out):
    root, _ = os.path.splitext(out)
    return root + ".json"


def _write(out, text):
    if out == "-":
        sys.stdout.write(text)
        return
    try:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise DataError(f"cannot write {out}: {exc}") from None


def _write_pair(out, primary, meta):
    """Write the primary file and, unless streaming to stdout, a JSON sidecar."""
    _write(out, primary)
    if out != "-":
        _write(_sidecar_path(out), dumps(meta))


def _model(args):
    try:
        return ModelConfig(p=args.p, Q=args.q, quad_points=args.quad_points, sigma2=args.sigma2)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _target(text):
    try:
        return TargetDensity.parse(text)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def read_dataset(path):
    """Parse a one-column CSV with header ``x``; any problem is a ``DataError``."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    if not rows or [c.strip() for c in rows[0]] != ["x"]:
        raise DataError(f"{path}: expected a single-column CSV with header 'x'")
    try:
        vals = [float(r[0]) for r in rows[1:] if r]
    except (ValueError, IndexError) as exc:
        raise DataError(f"{path}: non-numeric value ({exc})") from None
    if not vals:
        raise DataError(f"{path}: no samples")
    try:
        return Dataset(np.array(vals))
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None


def _dataset_csv(data):
    buf = io.StringIO()
    buf.write("x\n")
    for v in data.samples.tolist():
        buf.write(repr(v) + "\n")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(args):
    if args.n < 1:
        raise ConfigError(f"--n must be >= 1, got {args.n}")
    target = _target(args.target)
    cfg = _model(args)
    data = target.sample(args.n, cfg, stream(args.seed, 0, 0))
    meta = {
        "command": "simulate",
        "target": target.to_dict(),
        "n": args.n,
        "seed": args.seed,
        "stream_key": [0, 0],
        "model": cfg.to_dict(),
        "version": __version__,
    }
    _write_pair(args.out, _dataset_csv(data), meta)


def cmd_fit(args):
    cfg = _model(args)
    if args.gamma <= 0:
        raise ConfigError("--gamma must be positive")
    if args.n_terms is not None and args.n_terms < 1:
        raise ConfigError("--n-terms must be >= 1")
    grid = _parse_grid(args.grid) if args.grid else (args.p,)
    data = read_dataset(args.data)
    resolved = {
        "command": "fit",
        "data": os.path.basename(args.data),
        "n": data.n,
        "estimator": args.estimator,
        "model": cfg.to_dict(),
        "gamma": args.gamma,
        "n_terms": args.n_terms,
        "seed": args.seed,
        "version": __version__,
    }
    if args.estimator == "fixed":
        res = estimate_fixed(data, cfg, args.n_terms)
    elif args.estimator == "sieve":
        res = estimate_sieve(data, cfg, args.gamma, args.n_terms)
    elif args.estimator == "laplace":
        res = estimate_laplace(data, cfg, args.n_terms)
    elif args.estimator == "adaptive":
        resolved["smoothness_grid"] = list(grid)
        res = estimate_adaptive(data, grid, None, cfg)
    else:
        try:
            params = MCMCParams(burn_in=args.burn_in, thin=args.thin, n_draws=args.draws)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        N = args.n_terms or dimension_N("truncated", cfg.p, cfg.Q, data.n, cfg.B1_sq)
        chain = rw_metropolis(data, cfg, N, params, seed=args.seed)
        dens = posterior_mean_density(chain, cfg)
        resolved["mcmc"] = chain.metadata()
        meta = {"variant": "mcmc", "N_used": int(N), "normalizer": None, "log_normalizer": None,
                "model_weights": None, "smoothness_grid": None, "config": resolved}
        _write_pair(args.out, dens.to_csv(), meta)
        return
    meta = dict(res.sidecar(), config=resolved)
    _write_pair(args.out, res.density.to_csv(), meta)


def _parse_grid(text):
    try:
        grid = tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise ConfigError(f"--grid must be comma-separated integers, got {text!r}") from None
    if not grid or min(grid) < 1 or list(grid) != sorted(set(grid)):
        raise ConfigError("--grid must be a strictly increasing list of integers >= 1")
    return grid


def _load_config(args, schema, defaults):
    try:
        raw = cfgmod.load(args.config, schema, defaults) if args.config else \
            cfgmod.resolve({"schema": cfgmod.SCHEMA_VERSION}, schema, defaults)
    except cfgmod.ConfigError as exc:
        raise ConfigError(str(exc)) from None
    except OSError as exc:
        raise DataError(f"cannot read {args.config}: {exc}") from None
    if args.threads is not None:
        raw["threads"] = args.threads
    try:
        return raw, cfgmod.model_config(raw), cfgmod.target(raw)
    except (cfgmod.ConfigError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _resolved(raw):
    """Resolved config for embedding; thread count is excluded since outputs do not depend on it."""
    return {k: v for k, v in raw.items() if k != "threads"}


def cmd_rate_study(args):
    raw, cfg, target = _load_config(args, cfgmod.RATE_STUDY_SCHEMA, cfgmod.RATE_STUDY_DEFAULTS)
    try:
        rep = rate_study(target, cfg, raw["estimator"], raw["n_grid"], raw["replications"],
                         raw["seed"], raw["gamma"], raw["threads"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    body = dict(rep.to_dict(), resolved_config=_resolved(raw))
    _write(args.out, dumps(body))
    if args.out != "-":
        _write(os.path.splitext(args.out)[0] + ".csv", rep.to_csv())


def cmd_adaptive_study(args):
    raw, cfg, target = _load_config(args, cfgmod.ADAPTIVE_STUDY_SCHEMA, cfgmod.ADAPTIVE_STUDY_DEFAULTS)
    grid = raw["smoothness_grid"]
    if list(grid) != sorted(set(grid)):
        raise ConfigError("smoothness_grid must be strictly increasing")
    if raw["weights"] is not None and len(raw["weights"]) != len(grid):
        raise ConfigError("weights must have one entry per smoothness value")
    rep = adaptive_study(target, grid, raw["n_grid"], raw["replications"], cfg, raw["seed"],
                         raw["weights"], raw["p0"], raw["threads"])
    _write(args.out, dumps(dict(rep, resolved_config=_resolved(raw))))


def cmd_contraction(args):
    raw, cfg, target = _load_config(args, cfgmod.CONTRACTION_SCHEMA, cfgmod.CONTRACTION_DEFAULTS)
    try:
        params = MCMCParams(**raw["mcmc"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    rep = contraction_study(target, cfg, raw["n_grid"], raw["M"], raw["replications"], params,
                            raw["seed"], raw["radius"], raw["threads"])
    _write(args.out, dumps(dict(rep, resolved_config=_resolved(raw))))


def cmd_figure1(args):
    cfg = _model(args)
    if args.n < 1:
        raise ConfigError("--n must be >= 1")
    res = figure1_replication(args.seed, cfg, args.n, args.gamma, args.n_terms)
    meta = {
        "command": "figure1",
        "seed": args.seed,
        "n": args.n,
        "gamma": args.gamma,
        "model": cfg.to_dict(),
        "N_used": res.est9.N_used,
        "distances": res.distances,
        "est9": res.est9.sidecar(),
        "est10": res.est10.sidecar(),
        "version": __version__,
    }
    _write_pair(args.out, res.to_csv(), meta)


def cmd_conditions(args):
    target = _target(args.target)
    cfg = _model(args)
    d = condition_diagnostics(target, args.p0, cfg, args.j_max)
    body = {k: v for k, v in d.items() if not isinstance(v, np.ndarray)}
    body.update(target=target.to_dict(), p0=args.p0, j_max=args.j_max, model=cfg.to_dict())
    _write(args.out, dumps(body))


# ---------------------------------------------------------------------------
# parser


def _add_model(p, p_default=2):
    p.add_argument("--p", type=int, default=p_default, help="Sobolev smoothness (integer >= 1)")
    p.add_argument("--q", type=float, default=1.0, help="ellipsoid radius Q")
    p.add_argument("--quad-points", type=int, default=4096, help="midpoint grid size (power of two)")
    p.add_argument("--sigma2", type=float, default=1.0, help="prior variance scale")


def build_parser():
    ap = argparse.ArgumentParser(prog="trigexp", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="draw a dataset from a target density")
    s.add_argument("--target", default="logsine", help="logsine, uniform or theta:t0,t1,...")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    _add_model(s)
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="fit a density estimate to a dataset CSV")
    f.add_argument("--data", required=True)
    f.add_argument("--estimator", choices=["fixed", "sieve", "laplace", "adaptive", "mcmc"],
                   default="fixed")
    f.add_argument("--gamma", type=float, default=0.1, help="sieve decay rate")
    f.add_argument("--grid", help="smoothness grid for the adaptive estimator, e.g. 1,2,3")
    f.add_argument("--n-terms", type=int, help="override the truncation dimension N")
    f.add_argument("--seed", type=int, default=0, help="MCMC seed")
    f.add_argument("--draws", type=int, default=1000, help="MCMC retained draws")
    f.add_argument("--burn-in", type=int, default=10_000)
    f.add_argument("--thin", type=int, default=10)
    f.add_argument("--out", required=True)
    _add_model(f)
    f.set_defaults(func=cmd_fit)

    for name, func, help_ in [
        ("rate-study", cmd_rate_study, "Hellinger risk against n and its log-log slope"),
        ("adaptive-study", cmd_adaptive_study, "posterior smoothness weights and adaptive risk"),
        ("contraction", cmd_contraction, "MCMC posterior mass outside shrinking Hellinger balls"),
    ]:
        c = sub.add_parser(name, help=help_)
        c.add_argument("--config", help="JSON config (schema 1); defaults are used when omitted")
        c.add_argument("--out", required=True)
        c.add_argument("--threads", type=int, help="worker threads (default: $TRIGEXP_THREADS or 1)")
        c.set_defaults(func=func)

    g = sub.add_parser("figure1", help="fixed and sieve estimates from LogSine data")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--n", type=int, default=500)
    g.add_argument("--gamma", type=float, default=0.1)
    g.add_argument("--n-terms", type=int)
    g.add_argument("--out", required=True)
    _add_model(g)
    g.set_defaults(func=cmd_figure1)

    d = sub.add_parser("conditions", help="summability diagnostics for a target density")
    d.add_argument("--target", default="logsine")
    d.add_argument("--p0", type=int, default=2)
    d.add_argument("--j-max", type=int, default=1024)
    d.add_argument("--out", required=True)
    _add_model(d)
    d.set_defaults(func=cmd_conditions)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if getattr(args, "threads", None) is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
