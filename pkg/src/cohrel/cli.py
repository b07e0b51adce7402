"""Command-line front end.

Every command that writes an output directory also writes ``manifest.json``;
``cohrel rerun MANIFEST --out DIR`` repeats the run and, for the same build
and seed, reproduces every output byte for byte.

Exit codes: 0 ok, 2 input or parse error, 3 unsupported system, 4 inference
precondition failed, 5 numeric singularity.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from cohrel import __version__, data, kernels, masked, npbayes, simulate, structure, weibull
from cohrel.mcmc import McmcConfig, diagnostics, hpd_interval
from cohrel.numerics import NumericError, RandomStream

EXIT_OK, EXIT_INPUT, EXIT_UNSUPPORTED, EXIT_PRECONDITION, EXIT_SINGULAR = 0, 2, 3, 4, 5

WEIBULL_PRESETS = {"default": weibull.DEFAULT_CONFIG, "bridge": weibull.BRIDGE_CONFIG}
MASKED_PRESETS = {"default": masked.DEFAULT_MASKED_CONFIG, "harddrive": masked.HARDDRIVE_CONFIG}
SUMMARY_COLUMNS = ("min", "q1", "median", "mean", "q3", "max", "sd")


class UsageError(ValueError):
    pass


# --------------------------------------------------------------------------- output helpers


def dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n", encoding="utf-8")


def _floats(a) -> list:
    return [float(x) for x in np.asarray(a, dtype=float)]


def _write_matrix(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    lines += [",".join(repr(float(x)) for x in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("COHREL_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"COHREL_SEED must be an integer, got {env!r}") from None


def _out_dir(args) -> Path:
    if not args.out:
        raise UsageError("--out is required")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, argv: list, subcommand: str, seed, extra: dict, inputs=(), outputs=()) -> None:
    manifest = {
        "subcommand": subcommand,
        "argv": argv,
        "seed": seed,
        "version": __version__,
        "inputs": {str(Path(p).resolve()): _sha256(p) for p in inputs},
        "outputs": sorted(outputs),
        **extra,
    }
    dump_json(manifest, out / "manifest.json")


def _replay_argv(args, seed) -> list:
    """Argument list that reproduces this run without the output directory or environment."""
    argv = [args.command]
    for key, value in sorted(vars(args).items()):
        if key in ("command", "out", "seed", "func", "jobs", "inputs") or value is None or value is False:
            continue
        flag = "--" + key.replace("_", "-")
        if value is True:
            argv.append(flag)
        elif isinstance(value, list):
            for v in value:
                argv += [flag, _abs_if_path(key, v)]
        else:
            argv += [flag, _abs_if_path(key, value)]
    for p in getattr(args, "inputs", None) or []:
        argv.append(str(Path(p).resolve()))
    if seed is not None:
        argv += ["--seed", str(seed)]
    return argv


def _abs_if_path(key, value) -> str:
    if key in ("systems", "components", "masked", "chain"):
        return str(Path(value).resolve())
    return str(value)


def _mcmc_config(args, presets: dict, seed: int) -> McmcConfig:
    base = presets[args.preset]
    return McmcConfig(
        iterations=args.iterations if args.iterations is not None else base.iterations,
        burn_in=args.burnin if args.burnin is not None else base.burn_in,
        thin=args.thin if args.thin is not None else base.thin,
        seed=seed,
    )


def _config_dict(cfg: McmcConfig) -> dict:
    return {"iterations": cfg.iterations, "burn_in": cfg.burn_in, "thin": cfg.thin, "seed": cfg.seed,
            "initial_scale": cfg.initial_scale, "adaptation_start": cfg.adaptation_start}


def _component_list(arg, m: int) -> list:
    if not arg:
        return list(range(1, m + 1))
    try:
        comps = sorted({int(x) for x in arg.split(",")})
    except ValueError:
        raise UsageError(f"bad component list {arg!r}") from None
    if comps[0] < 1 or comps[-1] > m:
        raise UsageError(f"components must lie in 1..{m}")
    return comps


def _map(fn, tasks, jobs: int) -> list:
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


# --------------------------------------------------------------------------- simulate


def cmd_simulate(args) -> int:
    seed = _resolve_seed(args)
    expr = structure.parse(args.structure)
    m = structure.n_components(expr)
    structure.validate(expr)
    dists = [simulate.parse_dist(d) for d in (args.dist or ["exp:1"])]
    if len(dists) == 1:
        dists = dists * m
    if len(dists) != m:
        raise UsageError(f"need one --dist or {m} of them, got {len(dists)}")
    if args.n < 0:
        raise UsageError("--n must be nonnegative")
    out = _out_dir(args)
    times = simulate.draw_component_times(dists, args.n, RandomStream(seed, 0))
    records, comps = simulate.observe(expr, times)
    data.write_system_csv(records, out / "systems.csv")
    data.write_component_csv(comps, out / "components.csv")
    outputs = ["systems.csv", "components.csv"]
    if args.mask_p is not None:
        rows = simulate.apply_masking(expr, records, comps, simulate.MaskingSpec(args.mask_p), RandomStream(seed, 1))
        data.write_masked_csv(rows, out / "masked.csv")
        outputs.append("masked.csv")
    extra = {"structure": structure.to_text(expr),
             "distributions": [{"family": d.family, "params": list(d.params)} for d in dists]}
    _write_manifest(out, _replay_argv(args, seed), "simulate", seed, extra, outputs=outputs)
    return EXIT_OK


# --------------------------------------------------------------------------- nonparametric


def _np_task(task):
    expr_text, records, j, prior_texts, grid = task
    guesses = [simulate.parse_dist(p).frozen() for p in prior_texts]
    return j, npbayes.estimate_component(structure.parse(expr_text), records, j, guesses, grid=grid)


def cmd_estimate_np(args) -> int:
    expr = structure.parse(args.structure)
    m = structure.validate(expr)
    priors = args.prior or ["exp:1"] * 3
    if len(priors) == 1:
        priors = priors * 3
    if len(priors) != 3:
        raise UsageError("give one --prior or three (one per canonical slot)")
    for p in priors:
        simulate.parse_dist(p).frozen()
    if not args.systems:
        raise UsageError("--systems is required")
    records = data.load_system_csv(args.systems)
    for r in records:
        if r.delta > m:
            raise data.DataFormatError(f"system {r.id}: cause {r.delta} exceeds the {m} components")
    if structure.has_repeated_component(structure.to_sps(expr)) and \
            structure.has_repeated_component(structure.to_pss(expr)):
        raise npbayes.UnsupportedSystemError("both the series-parallel and "
                                             "parallel-series forms repeat a component")
    out = _out_dir(args)
    comps = _component_list(args.component, m)
    if args.grid_points < 2:
        raise UsageError("--grid-points must be at least 2")
    times = np.array(sorted(r.t for r in records))
    if times.size:
        if args.t_max is not None and args.t_max > times[-1]:
            raise UsageError(f"--t-max {args.t_max:g} exceeds the largest system time {times[-1]:g}")
        upper = times[-1] if args.t_max is None else args.t_max
    elif args.t_max is None or not args.t_max > 0:
        raise UsageError("the systems file has no rows; give a positive --t-max to get the prior curves")
    else:
        upper = args.t_max
    grid = np.union1d(np.linspace(0.0, upper, args.grid_points), times[times <= upper])
    tasks = [(structure.to_text(expr), records, j, priors, grid) for j in comps]
    results = _map(_np_task, tasks, args.jobs)
    rho, outputs = {}, []
    for j, est in results:
        name = f"curve_{j}.json"
        dump_json({"t": _floats(est.t), "df_mean": _floats(est.values), "component": j,
                   "view": {k: est.meta[k] for k in ("kind", "slot", "x1", "x2", "x3")}}, out / name)
        outputs.append(name)
        rho[str(j)] = est.rho
    dump_json(rho, out / "rho.json")
    outputs.append("rho.json")
    extra = {"structure": structure.to_text(expr), "prior": priors}
    _write_manifest(out, _replay_argv(args, None), "estimate-np", None, extra, [args.systems], outputs)
    return EXIT_OK


# --------------------------------------------------------------------------- Weibull


def _curve_grid(upper: float, points: int) -> np.ndarray:
    return np.linspace(0.0, upper, points)


def _weibull_task(task):
    intervals, cfg, seed, j, points = task
    sample = weibull.fit(intervals, cfg, RandomStream(seed, 100 + j))
    data_ = weibull.IntervalData.from_intervals(intervals)
    ends = np.concatenate([data_.l, data_.u])
    upper = float(ends[np.isfinite(ends)].max())
    curve = weibull.reliability_curve(sample, _curve_grid(upper, points))
    return j, sample, curve


def _write_posterior(out: Path, j: int, draws: np.ndarray, names, summary: dict, curve, extra_summary=None):
    _write_matrix(out / f"chain_{j}.csv", names, draws)
    body = {"component": j, "parameters": summary}
    if extra_summary:
        body.update(extra_summary)
    dump_json(body, out / f"summary_{j}.json")
    dump_json({"t": _floats(curve.t), "mean": _floats(curve.mean), "lower": _floats(curve.lower),
               "upper": _floats(curve.upper), "level": curve.level, "component": j}, out / f"curve_{j}.json")
    return [f"chain_{j}.csv", f"summary_{j}.json", f"curve_{j}.json"]


def cmd_estimate_weibull(args) -> int:
    seed = _resolve_seed(args)
    cfg = _mcmc_config(args, WEIBULL_PRESETS, seed)
    if not args.components:
        raise UsageError("--components is required")
    ds = data.load_component_csv(args.components)
    comps = _component_list(args.component, ds.m)
    for j in comps:
        weibull.check_posterior_preconditions(weibull.IntervalData.from_intervals(ds.column(j)))
    out = _out_dir(args)
    tasks = [(ds.column(j), cfg, seed, j, args.grid_points) for j in comps]
    outputs = []
    for j, sample, curve in _map(_weibull_task, tasks, args.jobs):
        outputs += _write_posterior(out, j, sample.draws, ["beta", "eta", "mu"], sample.summary(), curve,
                                    {"acceptance_rate": sample.acceptance_rate, "t_min": sample.t_min})
    extra = {"mcmc": _config_dict(cfg), "backend": kernels.BACKEND, "prior": "1/(eta*beta)"}
    _write_manifest(out, _replay_argv(args, seed), "estimate-weibull", seed, extra, [args.components], outputs)
    return EXIT_OK


# --------------------------------------------------------------------------- masked


def _constraint(args) -> masked.Constraint:
    c = masked.Constraint.FREE
    if args.fix_lambda2_zero:
        c |= masked.Constraint.FIX_ZERO_2
    if args.fix_lambda3_zero:
        c |= masked.Constraint.FIX_ZERO_3
    if args.symmetric_13:
        c |= masked.Constraint.SYMMETRIC_13
    if c & masked.Constraint.SYMMETRIC_13 and c & masked.Constraint.FIX_ZERO_3:
        raise UsageError("--symmetric-13 conflicts with --fix-lambda3-zero")
    return c


def _gamma_prior(text) -> masked.GammaPriorSpec:
    if text is None:
        return masked.GammaPriorSpec()
    try:
        shape, rate = (float(x) for x in text.removeprefix("gamma:").split(","))
    except ValueError:
        raise UsageError(f"--prior for masked data is 'shape,rate', got {text!r}") from None
    if not (shape > 0 and rate > 0):
        raise UsageError("gamma prior shape and rate must be positive")
    return masked.GammaPriorSpec(shape, rate)


def _masked_task(task):
    records, j, prior, cfg, constraint, seed, points = task
    rows = masked.MaskedRows.from_records(records, j)
    post = masked.gibbs_fit(rows, prior, cfg, constraint, RandomStream(seed, 200 + j))
    curve = weibull.reliability_curve(post.sample, _curve_grid(float(rows.t.max()), points))
    return j, post, curve


def cmd_estimate_masked(args) -> int:
    seed = _resolve_seed(args)
    constraint = _constraint(args)
    cfg = _mcmc_config(args, MASKED_PRESETS, seed)
    prior = _gamma_prior(args.prior)
    if not args.masked:
        raise UsageError("--masked is required")
    if not Path(args.masked).exists():
        raise FileNotFoundError(f"masked data file not found: {args.masked}")
    records = data.load_masked_csv(args.masked)
    if len(records) < 2:
        raise weibull.InferenceError(f"posterior needs at least two systems, got {len(records)}")
    comps = _component_list(args.component, records[0].m)
    out = _out_dir(args)
    tasks = [(records, j, prior, cfg, constraint, seed, args.grid_points) for j in comps]
    outputs = []
    names = ["beta", "eta", "mu", "lambda1", "lambda2", "lambda3"]
    for j, post, curve in _map(_masked_task, tasks, args.jobs):
        draws = np.column_stack([post.sample.draws, post.rates])
        summary = diagnostics(draws, names)
        outputs += _write_posterior(out, j, draws, names, summary, curve,
                                    {"acceptance_rate": post.sample.acceptance_rate, "t_min": post.sample.t_min,
                                     "constraint": constraint.label()})
    extra = {"mcmc": _config_dict(cfg), "constraint": constraint.label(), "backend": kernels.BACKEND,
             "prior": {"shape": prior.shape, "rate": prior.rate}}
    _write_manifest(out, _replay_argv(args, seed), "estimate-masked", seed, extra, [args.masked], outputs)
    return EXIT_OK


# --------------------------------------------------------------------------- summarize


def _parse_times(text) -> np.ndarray:
    try:
        t = np.array([float(x) for x in text.split(",")])
    except ValueError:
        raise UsageError(f"bad time list {text!r}") from None
    if np.any(~np.isfinite(t)) or np.any(t < 0):
        raise UsageError("times must be finite and nonnegative")
    return t


def _summary_rows_from_chain(path, t) -> list:
    header = Path(path).read_text(encoding="utf-8").splitlines()[0].split(",")
    if header[:3] != ["beta", "eta", "mu"]:
        raise data.DataFormatError(f"{path}: not a chain file (header {header[:3]})")
    draws = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)[:, :3]
    rel = kernels.reliability_matrix(draws[:, 0], draws[:, 1], draws[:, 2], t)
    lines = ["t," + ",".join(SUMMARY_COLUMNS) + ",hpd_lower,hpd_upper"]
    for k, tk in enumerate(t):
        col = rel[:, k]
        q1, med, q3 = np.quantile(col, [0.25, 0.5, 0.75])
        sd = float(np.std(col, ddof=1)) if col.size > 1 else 0.0
        lo, hi = hpd_interval(col)
        vals = (col.min(), q1, med, col.mean(), q3, col.max(), sd, lo, hi)
        lines.append(f"{tk:g}," + ",".join(f"{v:.3f}" for v in vals))
    return lines


def _load_curve(path) -> dict:
    try:
        curve = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise data.DataFormatError(f"{path}: not JSON ({exc})") from None
    if "t" not in curve or not ("df_mean" in curve or "mean" in curve):
        raise data.DataFormatError(f"{path}: not a curve file")
    return curve


def _reliability_at(curve: dict, t: np.ndarray) -> np.ndarray:
    grid = np.asarray(curve["t"], dtype=float)
    if np.any(t > grid[-1]) or np.any(t < grid[0]):
        raise UsageError(f"requested times fall outside the curve grid [{grid[0]:g}, {grid[-1]:g}]")
    if "df_mean" in curve:
        k = np.searchsorted(grid, t, side="right") - 1
        return 1.0 - np.asarray(curve["df_mean"], dtype=float)[k]
    return np.interp(t, grid, np.asarray(curve["mean"], dtype=float))


def cmd_summarize(args) -> int:
    files = args.inputs
    chains = [f for f in files if f.endswith(".csv")]
    curves = [f for f in files if not f.endswith(".csv")]
    lines = []
    if chains:
        if not args.at:
            raise UsageError("chain files need --at")
        t = _parse_times(args.at)
        for f in chains:
            lines.append(f"# {Path(f).name}")
            lines += _summary_rows_from_chain(f, t)
    if curves:
        loaded = [_load_curve(f) for f in curves]
        grid0 = np.asarray(loaded[0]["t"], dtype=float)
        for f, c in zip(curves[1:], loaded[1:]):
            g = np.asarray(c["t"], dtype=float)
            if g.shape != grid0.shape or not np.array_equal(g, grid0):
                raise UsageError(f"curve grids differ: {curves[0]} vs {f}")
        t = _parse_times(args.at) if args.at else grid0
        names = [Path(f).stem for f in curves]
        lines.append("t," + ",".join(f"R[{n}]" for n in names))
        cols = [_reliability_at(c, t) for c in loaded]
        for k, tk in enumerate(t):
            lines.append(f"{tk:g}," + ",".join(f"{col[k]:.4f}" for col in cols))
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.out:
        out = _out_dir(args)
        (out / "summary.txt").write_text(text, encoding="utf-8")
        _write_manifest(out, _replay_argv(args, None), "summarize", None, {}, files, ["summary.txt"])
    return EXIT_OK


# --------------------------------------------------------------------------- rerun


def cmd_rerun(args) -> int:
    path = Path(args.manifest)
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
        argv = list(manifest["argv"])
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise data.DataFormatError(f"{path}: unusable manifest ({exc})") from None
    for p, digest in manifest.get("inputs", {}).items():
        if not Path(p).exists():
            raise FileNotFoundError(f"input recorded in the manifest is missing: {p}")
        if _sha256(p) != digest:
            raise data.DataFormatError(f"input {p} changed since the recorded run")
    return main(argv + ["--out", args.out])


# --------------------------------------------------------------------------- parser


def _add_mcmc(p, presets):
    p.add_argument("--iterations", type=int)
    p.add_argument("--burnin", type=int)
    p.add_argument("--thin", type=int)
    p.add_argument("--preset", choices=sorted(presets), default="default",
                   help="iteration/burn-in/thin defaults; explicit flags override")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cohrel", description="Component reliability from coherent-system data.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True, out=True):
        if seed:
            p.add_argument("--seed", type=int, help="random seed (falls back to $COHREL_SEED, then 0)")
        if out:
            p.add_argument("--out", help="output directory")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for per-component work")

    p = sub.add_parser("simulate", help="simulate a coherent-system dataset")
    p.add_argument("--structure", required=True, help='e.g. "koutofm(2,3)" or "min(max(1,2),3)"')
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--dist", action="append", help="component distribution, e.g. gamma:mean=4,sd=2.83 (repeat per "
                                                   "component, or once for all)")
    p.add_argument("--mask-p", type=float, help="masking proportion; writes masked.csv")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate-np", help="nonparametric Bayesian component distribution estimates")
    p.add_argument("--structure", required=True)
    p.add_argument("--systems", help="CSV with id,t,delta")
    p.add_argument("--prior", action="append", help="prior lifetime guess per canonical slot, e.g. exp:1.0")
    p.add_argument("--component", help="comma-separated component ids (default all)")
    p.add_argument("--grid-points", type=int, default=npbayes.GRID_POINTS)
    p.add_argument("--t-max", type=float, help="right end of the grid (default: largest system time)")
    common(p, seed=False)
    p.set_defaults(func=cmd_estimate_np)

    p = sub.add_parser("estimate-weibull", help="three-parameter Weibull posterior per component")
    p.add_argument("--components", help="CSV with id,l_1,u_1,...")
    p.add_argument("--component", help="comma-separated component ids (default all)")
    p.add_argument("--grid-points", type=int, default=101)
    _add_mcmc(p, WEIBULL_PRESETS)
    common(p)
    p.set_defaults(func=cmd_estimate_weibull)

    p = sub.add_parser("estimate-masked", help="Weibull posterior under masked causes")
    p.add_argument("--masked", help="CSV with id,t,delta_1,upsilon_1,...")
    p.add_argument("--component", help="comma-separated component ids (default all)")
    p.add_argument("--prior", help="gamma prior 'shape,rate' shared by beta, eta and mu (default 0.001,0.001)")
    p.add_argument("--fix-lambda2-zero", action="store_true")
    p.add_argument("--fix-lambda3-zero", action="store_true")
    p.add_argument("--symmetric-13", action="store_true")
    p.add_argument("--grid-points", type=int, default=101)
    _add_mcmc(p, MASKED_PRESETS)
    common(p)
    p.set_defaults(func=cmd_estimate_masked)

    p = sub.add_parser("summarize", help="tabulate curves or chain reliabilities")
    p.add_argument("inputs", nargs="+", help="curve JSON files and/or chain CSV files")
    p.add_argument("--at", help="comma-separated times")
    p.add_argument("--out", help="also write summary.txt and a manifest here")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("rerun", help="repeat a run recorded in manifest.json")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rerun)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "jobs", 1) is not None and getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be at least 1")
    try:
        return args.func(args)
    except structure.StructureSyntaxError as exc:
        print(f"error: {exc.diagnostic()}", file=sys.stderr)
        return EXIT_INPUT
    except npbayes.UnsupportedSystemError as exc:
        print(f"error: unsupported system: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except structure.NotRepresentableError as exc:
        print(f"error: unsupported system: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except weibull.InferenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except NumericError as exc:
        print(f"error: numeric singularity: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except (UsageError, data.DataFormatError, simulate.SpecError, structure.StructureError, OSError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
