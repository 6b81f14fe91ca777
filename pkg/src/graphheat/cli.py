"""Command-line interface for sampling, estimation, sweeps and figure reproduction.

Exit codes: 0 on success, 1 on usage errors (bad flags, bad or missing config,
unknown config keys), 2 on runtime errors (for example a graph disconnected at
the chosen truncation). Every run prints its fully resolved configuration as a
JSON line to standard output before computing, so any artifact can be replayed
exactly. Randomness flows only through the --seed flag; environment variables
are never consulted for configuration.

Numeric flags are parsed as full-precision decimals. Heavy submodules are
imported inside the handlers so a --threads cap can bound the numeric
backend's thread pools before they initialize; all estimator kernels are
deterministic regardless of the cap.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import math
import os
import sys


class UsageError(Exception):
    """Invalid flags, config files or config keys; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _positive(value: float, flag: str) -> float:
    if not value > 0.0:
        raise UsageError(f"{flag} must be positive, got {value:g}")
    return value


def _at_least(value: int, minimum: int, flag: str) -> int:
    if value < minimum:
        raise UsageError(f"{flag} must be >= {minimum}, got {value}")
    return value


def _print_config(command: str, resolved: dict) -> None:
    print(f"config {json.dumps({'command': command, **resolved}, sort_keys=True)}")
    sys.stdout.flush()


@contextlib.contextmanager
def _thread_cap(threads):
    if threads is None:
        yield
        return
    from threadpoolctl import threadpool_limits

    with threadpool_limits(limits=threads):
        yield


def _density_args(args, manifold_kind: str):
    from . import manifolds

    if manifold_kind == "circle":
        if args.density == "uniform":
            return manifolds.DensitySpec("uniform")
        if args.density == "sinusoid":
            if not abs(args.amplitude) < 1.0:
                raise UsageError(
                    f"--amplitude must satisfy |a| < 1, got {args.amplitude:g}"
                )
            return manifolds.DensitySpec("sinusoid", amplitude=args.amplitude)
        raise UsageError(f"--density {args.density} is not a circle density")
    if args.density == "sinusoid":
        raise UsageError("--density sinusoid is a circle density, not a sphere density")
    if args.density == "uniform" or args.concentration == 0.0:
        return manifolds.DensitySpec("uniform")
    return manifolds.DensitySpec("exp_z", concentration=args.concentration)


def _kernel_config(args, dim: int):
    from . import graph

    _positive(args.sigma, "--sigma")
    if args.cutoff_multiplier < 6.0:
        raise UsageError(
            f"--cutoff-multiplier must be >= 6, got {args.cutoff_multiplier:g}"
        )
    return graph.KernelConfig(
        args.sigma, dim, truncation=args.truncation,
        cutoff_multiplier=args.cutoff_multiplier,
    )


def _resolve_steps(args):
    from . import experiments

    if args.steps is not None:
        n = _at_least(args.steps, 1, "--steps")
        return n, n * args.sigma**2
    _positive(args.t, "--t")
    try:
        return experiments.steps_for(args.t, args.sigma)
    except ValueError as err:
        raise UsageError(str(err)) from err


def cmd_sample(args) -> int:
    from . import manifolds

    _at_least(args.n_samples, 2, "--n-samples")
    _positive(args.arc_length, "--arc-length")
    manifold = (
        manifolds.ManifoldSpec("circle", args.arc_length)
        if args.manifold == "circle"
        else manifolds.ManifoldSpec("sphere")
    )
    density = _density_args(args, args.manifold)
    _print_config(
        "sample",
        {
            "manifold": args.manifold,
            "arc_length": args.arc_length,
            "density": density.kind,
            "amplitude": density.amplitude,
            "concentration": density.concentration,
            "n_samples": args.n_samples,
            "seed": args.seed,
            "out": str(args.out),
        },
    )
    cloud = manifolds.sample_cloud(manifold, density, args.n_samples, args.seed)
    manifolds.write_cloud_csv(cloud, args.out)
    print(f"wrote {args.out} ({cloud.n_points} points)")
    return 0


def _circle_setup(args):
    """Shared sampling/graph construction for estimate and extend."""
    from . import graph, manifolds, semigroup

    _at_least(args.n_samples, 2, "--n-samples")
    _positive(args.arc_length, "--arc-length")
    config = _kernel_config(args, 1)
    n_steps, t_exec = _resolve_steps(args)
    manifold = manifolds.ManifoldSpec("circle", args.arc_length)
    density = _density_args(args, "circle")
    cloud = manifolds.sample_cloud(manifold, density, args.n_samples, args.seed)
    ops = graph.build_affinity(cloud, config)
    plan = semigroup.DiffusionPlan(n_steps, args.sigma, args.mode)
    model = manifolds.standard_initial_model(args.arc_length)
    return cloud, ops, plan, model, t_exec


def cmd_estimate(args) -> int:
    from . import experiments, manifolds, semigroup

    cloud, ops, plan, model, t_exec = _circle_setup(args)
    _print_config(
        "estimate",
        {
            "n_samples": args.n_samples,
            "sigma": args.sigma,
            "n_steps": plan.n_steps,
            "t": t_exec,
            "mode": args.mode,
            "density": cloud.density.kind,
            "amplitude": cloud.density.amplitude,
            "arc_length": args.arc_length,
            "truncation": ops.config.truncation,
            "seed": args.seed,
            "out": str(args.out),
        },
    )
    est = semigroup.estimate_semigroup(ops, semigroup.initial_field(cloud), plan)
    truth = manifolds.circle_heat_solution(model, t_exec, cloud.intrinsic)
    semigroup.write_field_csv(est.values, args.out, truth)
    err_inf, err_rms = experiments.error_metrics(est.values, truth)
    print(json.dumps({"err_inf": err_inf, "err_rms": err_rms}, sort_keys=True))
    print(f"wrote {args.out}")
    return 0


def cmd_extend(args) -> int:
    import numpy as np

    from . import experiments, manifolds, semigroup

    _at_least(args.queries, 1, "--queries")
    cloud, ops, plan, model, t_exec = _circle_setup(args)
    if plan.n_steps < 1:
        raise UsageError("--steps must be >= 1 for extension")
    _print_config(
        "extend",
        {
            "n_samples": args.n_samples,
            "sigma": args.sigma,
            "n_steps": plan.n_steps,
            "t": t_exec,
            "mode": args.mode,
            "density": cloud.density.kind,
            "amplitude": cloud.density.amplitude,
            "arc_length": args.arc_length,
            "queries": args.queries,
            "seed": args.seed,
            "out": str(args.out),
        },
    )
    # fresh query points: the half-offset uniform grid never collides with samples
    s_query = (np.arange(args.queries) + 0.5) / args.queries * args.arc_length
    queries = manifolds.embed_circle(s_query, args.arc_length)
    values = semigroup.extend(ops, cloud, semigroup.initial_field(cloud), plan, queries)
    truth = manifolds.circle_heat_solution(model, t_exec, s_query)
    semigroup.write_field_csv(values, args.out, truth)
    err_inf, err_rms = experiments.error_metrics(values, truth)
    print(json.dumps({"err_inf": err_inf, "err_rms": err_rms}, sort_keys=True))
    print(f"wrote {args.out}")
    return 0


def cmd_heatkernel(args) -> int:
    import numpy as np

    from . import experiments, graph, manifolds, semigroup

    _at_least(args.n_samples, 2, "--n-samples")
    _positive(args.arc_length, "--arc-length")
    dim = 2 if args.manifold == "sphere" else 1
    config = _kernel_config(args, dim)
    n_steps, t_exec = _resolve_steps(args)
    if n_steps < 1:
        raise UsageError("--steps must be >= 1")
    manifold = (
        manifolds.ManifoldSpec("sphere")
        if args.manifold == "sphere"
        else manifolds.ManifoldSpec("circle", args.arc_length)
    )
    density = _density_args(args, args.manifold)
    cloud = manifolds.sample_cloud(manifold, density, args.n_samples, args.seed)
    anchor = args.anchor
    if anchor is None:
        anchor = manifolds.densest_sample_index(cloud)
    if not 0 <= anchor < cloud.n_points:
        raise UsageError(f"--anchor must lie in [0, {cloud.n_points}), got {anchor}")
    _print_config(
        "heatkernel",
        {
            "manifold": args.manifold,
            "n_samples": args.n_samples,
            "sigma": args.sigma,
            "n_steps": n_steps,
            "t": t_exec,
            "estimator": args.estimator,
            "anchor": anchor,
            "density": density.kind,
            "amplitude": density.amplitude,
            "concentration": density.concentration,
            "seed": args.seed,
            "out": str(args.out),
        },
    )
    ops = graph.build_affinity(cloud, config)
    column = semigroup.heat_kernel_column(ops, anchor, args.estimator, n_steps)
    if args.manifold == "sphere":
        cos_gamma = np.clip(cloud.points @ cloud.points[anchor], -1.0, 1.0)
        truth = manifolds.SphereZonalModel.for_time(t_exec).evaluate(cos_gamma)
    else:
        delta = manifolds.geodesic_distance(
            manifold, cloud.intrinsic, cloud.intrinsic[anchor]
        )
        truth = manifolds.circle_heat_kernel(t_exec, delta, args.arc_length)
    semigroup.write_kernel_column_csv(column, truth, args.out)
    err_inf, err_rms = experiments.error_metrics(column, truth)
    print(json.dumps({"err_inf": err_inf, "err_rms": err_rms}, sort_keys=True))
    print(f"wrote {args.out}")
    return 0


def _apply_override(data: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise UsageError(f"--set expects KEY=VALUE, got {assignment!r}")
    key, raw = assignment.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    target = data
    parts = key.split(".")
    for part in parts[:-1]:
        if not isinstance(target.get(part), dict):
            raise UsageError(f"--set path {key!r} does not name a config section")
        target = target[part]
    target[parts[-1]] = value


def cmd_sweep(args) -> int:
    import numpy as np

    from . import experiments

    try:
        with open(args.config, "r") as handle:
            data = json.load(handle)
    except FileNotFoundError as err:
        raise UsageError(f"config file not found: {args.config}") from err
    except json.JSONDecodeError as err:
        raise UsageError(f"config file {args.config} is not valid JSON: {err}") from err
    if not isinstance(data, dict):
        raise UsageError(f"config file {args.config} must hold a JSON object")
    for assignment in args.set or []:
        _apply_override(data, assignment)
    if args.seed is not None:
        data["base_seed"] = args.seed
    try:
        config = experiments.sweep_config_from_json(data)
    except (ValueError, TypeError, KeyError) as err:
        raise UsageError(f"invalid sweep config: {err}") from err
    _print_config(
        "sweep",
        {**config.to_json(), "out": str(args.out), "timing": bool(args.timing)},
    )
    records = experiments.run_sweep(config)
    experiments.write_sweep_csv(records, args.out, include_timing=args.timing)
    print(f"wrote {args.out} ({len(records)} records)")
    if args.plot_dir:
        from pathlib import Path

        plot_dir = Path(args.plot_dir)
        plot_dir.mkdir(parents=True, exist_ok=True)
        for metric in config.metrics:
            sizes, medians = experiments.median_errors(records, metric)
            series = [(f"median {metric}", sizes, medians)]
            loglog = sizes.size > 1 and bool(np.all(medians > 0))
            svg = plot_dir / f"sweep_{metric}.svg"
            png = plot_dir / f"sweep_{metric}.png"
            experiments.emit_svg_lineplot(
                series, "N (samples)", metric, svg, logx=loglog, logy=loglog
            )
            experiments.render_png_lineplot(
                series, "N (samples)", metric, png, logx=loglog, logy=loglog
            )
            print(f"wrote {svg}")
            print(f"wrote {png}")
    return 0


def cmd_rate(args) -> int:
    from . import experiments

    try:
        records = experiments.read_sweep_csv(args.input)
    except OSError as err:
        raise UsageError(f"cannot read sweep CSV {args.input}: {err}") from err
    except ValueError as err:
        raise UsageError(str(err)) from err
    _print_config("rate", {"input": str(args.input), "metric": args.metric})
    try:
        slope, intercept, r_squared = experiments.fit_rate(records, args.metric)
    except ValueError as err:
        raise UsageError(str(err)) from err
    print(
        json.dumps(
            {
                "metric": args.metric,
                "slope": slope,
                "intercept": intercept,
                "r_squared": r_squared,
            },
            sort_keys=True,
        )
    )
    return 0


def cmd_fig1(args) -> int:
    from . import experiments

    _print_config("fig1", {"out_dir": str(args.out_dir), "seed": args.seed})
    result = experiments.reproduce_fig1(args.out_dir, args.seed)
    print(json.dumps({"err_inf": result["err_inf"]}, sort_keys=True))
    for path in result["files"]:
        print(f"wrote {path}")
    return 0


def cmd_fig2(args) -> int:
    from . import experiments

    _print_config("fig2", {"out_dir": str(args.out_dir), "seed": args.seed})
    result = experiments.reproduce_fig2(args.out_dir, args.seed)
    print(
        json.dumps(
            {"err_inf": result["err_inf"], "err_rms": result["err_rms"]},
            sort_keys=True,
        )
    )
    for path in result["files"]:
        print(f"wrote {path}")
    return 0


def _add_common(sub) -> None:
    sub.add_argument("--seed", type=int, default=1000, help="base RNG seed (integer)")
    sub.add_argument(
        "--threads", type=int, default=None,
        help="cap on numeric backend worker threads (results are identical at any cap)",
    )


def _add_kernel_flags(sub) -> None:
    sub.add_argument(
        "--sigma", type=float, required=True,
        help="kernel bandwidth sigma (ambient length units)",
    )
    sub.add_argument(
        "--t", type=float, default=None,
        help="target diffusion time t (length^2 units); rounded to n*sigma^2",
    )
    sub.add_argument(
        "--steps", type=int, default=None,
        help="transition step count n (overrides --t; t becomes n*sigma^2)",
    )
    sub.add_argument(
        "--truncation", choices=("auto", "dense", "truncated"), default="auto",
        help="affinity storage: dense, truncated beyond the cutoff, or auto by size",
    )
    sub.add_argument(
        "--cutoff-multiplier", type=float, default=8.0,
        help="truncation cutoff in units of sigma (dimensionless, >= 6)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="graphheat",
        description=(
            "Estimate the manifold heat semigroup and heat kernel from point "
            "clouds by iterated graph diffusion, with analytic ground truth "
            "on the circle and the sphere."
        ),
    )
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("sample", help="draw a point cloud and write it as CSV")
    p.add_argument("--manifold", choices=("circle", "sphere"), default="circle",
                   help="which manifold to sample")
    p.add_argument("--n-samples", type=int, required=True, help="number of points (>= 2)")
    p.add_argument("--density", choices=("uniform", "sinusoid", "exp_z"),
                   default="uniform", help="sampling density family")
    p.add_argument("--amplitude", type=float, default=0.8,
                   help="sinusoid density amplitude a, |a| < 1 (dimensionless)")
    p.add_argument("--concentration", type=float, default=1.5,
                   help="exp_z density concentration c (dimensionless; 0 = uniform)")
    p.add_argument("--arc-length", type=float, default=math.tau,
                   help="circle circumference L (length units; default 2*pi, unit radius)")
    p.add_argument("--out", default="sample.csv", help="output CSV path")
    _add_common(p)
    p.set_defaults(handler=cmd_sample)

    p = sub.add_parser(
        "estimate",
        help="on-sample heat semigroup estimate on the circle with analytic truth",
    )
    p.add_argument("--n-samples", type=int, default=2000, help="number of points (>= 2)")
    _add_kernel_flags(p)
    p.add_argument("--mode", choices=("plain", "density_corrected"),
                   default="density_corrected", help="transition normalization")
    p.add_argument("--density", choices=("uniform", "sinusoid"), default="sinusoid",
                   help="sampling density family")
    p.add_argument("--amplitude", type=float, default=0.8,
                   help="sinusoid density amplitude a, |a| < 1 (dimensionless)")
    p.add_argument("--arc-length", type=float, default=math.tau,
                   help="circle circumference L (length units; default 2*pi, unit radius)")
    p.add_argument("--out", default="estimate.csv", help="output CSV path")
    _add_common(p)
    p.set_defaults(handler=cmd_estimate, t=0.5)

    p = sub.add_parser(
        "extend",
        help="out-of-sample extension of the semigroup estimate at fresh circle queries",
    )
    p.add_argument("--n-samples", type=int, default=2000, help="number of points (>= 2)")
    _add_kernel_flags(p)
    p.add_argument("--mode", choices=("density_corrected",), default="density_corrected",
                   help="transition normalization (extension is density-corrected)")
    p.add_argument("--density", choices=("uniform", "sinusoid"), default="sinusoid",
                   help="sampling density family")
    p.add_argument("--amplitude", type=float, default=0.8,
                   help="sinusoid density amplitude a, |a| < 1 (dimensionless)")
    p.add_argument("--arc-length", type=float, default=math.tau,
                   help="circle circumference L (length units; default 2*pi, unit radius)")
    p.add_argument("--queries", type=int, default=200,
                   help="number of fresh query points on the uniform grid")
    p.add_argument("--out", default="extend.csv", help="output CSV path")
    _add_common(p)
    p.set_defaults(handler=cmd_extend, t=0.5)

    p = sub.add_parser(
        "heatkernel", help="heat kernel column estimate at an anchor sample"
    )
    p.add_argument("--manifold", choices=("sphere", "circle"), default="sphere",
                   help="which manifold to sample")
    p.add_argument("--n-samples", type=int, default=1000, help="number of points (>= 2)")
    _add_kernel_flags(p)
    p.add_argument("--estimator", choices=("symmetric", "asymmetric"),
                   default="symmetric", help="heat kernel estimator variant")
    p.add_argument("--anchor", type=int, default=None,
                   help="anchor sample index (default: the densest sample)")
    p.add_argument("--density", choices=("uniform", "sinusoid", "exp_z"),
                   default="exp_z", help="sampling density family")
    p.add_argument("--amplitude", type=float, default=0.8,
                   help="sinusoid density amplitude a, |a| < 1 (dimensionless)")
    p.add_argument("--concentration", type=float, default=1.5,
                   help="exp_z density concentration c (dimensionless; 0 = uniform)")
    p.add_argument("--arc-length", type=float, default=math.tau,
                   help="circle circumference L (length units; default 2*pi, unit radius)")
    p.add_argument("--out", default="heatkernel.csv", help="output CSV path")
    _add_common(p)
    p.set_defaults(handler=cmd_heatkernel, t=0.15)

    p = sub.add_parser("sweep", help="run a seeded convergence sweep from a JSON config")
    p.add_argument("--config", required=True, help="JSON sweep config path")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config key (dotted paths; flags win over file)")
    p.add_argument("--out", default="sweep.csv", help="output CSV path")
    p.add_argument("--timing", action="store_true",
                   help="write measured wall times (breaks byte-reproducibility)")
    p.add_argument("--plot-dir", default=None,
                   help="directory for median-error SVG/PNG figures")
    p.add_argument("--seed", type=int, default=None,
                   help="override the config base seed (integer)")
    p.add_argument("--threads", type=int, default=None,
                   help="cap on numeric backend worker threads (results are identical at any cap)")
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("rate", help="fit a log-log convergence rate to a sweep CSV")
    p.add_argument("--input", required=True, help="sweep CSV path")
    p.add_argument("--metric", choices=("err_inf", "err_rms"), default="err_inf",
                   help="which error column to fit")
    p.add_argument("--threads", type=int, default=None,
                   help="cap on numeric backend worker threads (results are identical at any cap)")
    p.set_defaults(handler=cmd_rate, seed=None)

    p = sub.add_parser("fig1", help="reproduce the circle benchmark figure and tables")
    p.add_argument("--out-dir", default="fig1", help="output directory")
    _add_common(p)
    p.set_defaults(handler=cmd_fig1)

    p = sub.add_parser("fig2", help="reproduce the sphere heat-kernel figure and table")
    p.add_argument("--out-dir", default="fig2", help="output directory")
    _add_common(p)
    p.set_defaults(handler=cmd_fig2)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "command", None) is None:
            parser.print_help(sys.stderr)
            return 1
        threads = getattr(args, "threads", None)
        if threads is not None:
            if threads < 1:
                raise UsageError(f"--threads must be >= 1, got {threads}")
            # cap the pools before numpy initializes them in the handlers
            for var in (
                "OMP_NUM_THREADS",
                "OPENBLAS_NUM_THREADS",
                "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS",
            ):
                os.environ[var] = str(threads)
        with _thread_cap(threads):
            return args.handler(args)
    except UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (ValueError, ArithmeticError, OSError, RuntimeError) as err:
        print(f"runtime error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
