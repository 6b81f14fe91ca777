"""Convergence-sweep harness, rate fitting, and benchmark figure reproduction.

A sweep runs seeded trials over a grid of sample sizes with a bandwidth rule
(fixed, or the power law sigma = c0 * N^-gamma), measures each trial against
analytic ground truth, and emits deterministic CSV tables plus SVG figures.
Circle trials measure the on-sample semigroup estimate of the benchmark
initial condition against its Fourier solution; sphere trials measure the
symmetric heat-kernel estimator's anchor column against the zonal series.
Matplotlib PNG renderings are written alongside the CSV/SVG artifacts for the
report path; byte-level reproducibility is claimed for CSV and SVG only.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .graph import KernelConfig, build_affinity
from .manifolds import (
    CIRCLE,
    SINUSOID,
    SPHERE,
    CircleFourierModel,
    DensitySpec,
    ManifoldSpec,
    SphereZonalModel,
    _fmt,
    circle_heat_solution,
    densest_sample_index,
    sample_cloud,
    standard_initial_model,
)
from .semigroup import (
    DENSITY_CORRECTED,
    PLAIN,
    SYMMETRIC,
    DiffusionPlan,
    estimate_semigroup,
    heat_kernel_column,
    initial_field,
)
from .svgplot import emit_svg_lineplot

__all__ = [
    "FixedSigma",
    "PowerLawSigma",
    "SweepConfig",
    "SweepRecord",
    "steps_for",
    "error_metrics",
    "run_sweep",
    "fit_rate",
    "write_sweep_csv",
    "read_sweep_csv",
    "sweep_config_from_json",
    "benchmark_sweep_config",
    "reproduce_fig1",
    "reproduce_fig2",
    "render_png_lineplot",
    "emit_svg_lineplot",
]

SWEEP_HEADER = "manifold,N,sigma,n,t,seed,err_inf,err_rms,wall_time_s"

# Connectivity safety margin: sigma^d * N / log N must exceed this for every
# sweep point, keeping the kernel graph well inside its validity regime.
CONNECTIVITY_MARGIN = 10.0

# Benchmark circle: unit radius, so arc length 2*pi and Laplacian eigenvalues
# k^2. Diffusion at t in {0.5, 2, 4} then acts on visibly curved solutions
# instead of the numerically flat ones a much shorter circumference produces.
UNIT_CIRCLE_ARC = math.tau


@dataclass(frozen=True)
class FixedSigma:
    """One bandwidth for every sample size."""

    sigma: float

    def __post_init__(self):
        if not self.sigma > 0.0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")

    def sigma_for(self, n_points: int) -> float:
        return self.sigma

    def to_json(self) -> dict:
        return {"kind": "fixed", "sigma": self.sigma}


@dataclass(frozen=True)
class PowerLawSigma:
    """Bandwidth shrinking with sample size: sigma = c0 * N^-gamma."""

    c0: float
    gamma: float

    def __post_init__(self):
        if not self.c0 > 0.0:
            raise ValueError(f"c0 must be > 0, got {self.c0}")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")

    def sigma_for(self, n_points: int) -> float:
        return self.c0 * float(n_points) ** (-self.gamma)

    def to_json(self) -> dict:
        return {"kind": "power_law", "c0": self.c0, "gamma": self.gamma}


def steps_for(t_target: float, sigma: float) -> tuple[int, float]:
    """Round the target time to a whole step count and recompute the exact time.

    Returns (n, n * sigma^2) with n = round(t/sigma^2); rejects n = 0 so every
    run takes at least one step.
    """
    if not t_target > 0.0:
        raise ValueError(f"t must be > 0, got {t_target}")
    n = int(round(t_target / sigma**2))
    if n < 1:
        raise ValueError(
            f"t = {t_target} is below half a step at sigma = {sigma} (n rounded to 0)"
        )
    return n, n * sigma**2


@dataclass(frozen=True)
class SweepConfig:
    """Grid of convergence trials: manifold, density, sizes, bandwidth rule.

    ``trials`` seeds run per sample size, sequential from ``base_seed``. Every
    (N, sigma) pair must satisfy the connectivity margin
    sigma^d * N / log N > 10 and round to at least one step.
    """

    manifold: ManifoldSpec
    density: DensitySpec
    n_values: tuple
    sigma_rule: object
    t: float
    mode: str = DENSITY_CORRECTED
    trials: int = 20
    base_seed: int = 1000
    metrics: tuple = ("err_inf", "err_rms")

    def __post_init__(self):
        object.__setattr__(self, "n_values", tuple(int(n) for n in self.n_values))
        object.__setattr__(self, "metrics", tuple(self.metrics))
        if not self.n_values:
            raise ValueError("n_values must be nonempty")
        if any(n < 2 for n in self.n_values):
            raise ValueError("every N must be >= 2")
        if self.mode not in (PLAIN, DENSITY_CORRECTED):
            raise ValueError(f"unknown transition mode {self.mode!r}")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        unknown = set(self.metrics) - {"err_inf", "err_rms"}
        if unknown:
            raise ValueError(f"unknown metrics {sorted(unknown)}")
        if self.manifold.kind == SPHERE and self.density.kind == SINUSOID:
            raise ValueError("sinusoid density is a circle density")
        d = self.manifold.dim
        for n in self.n_values:
            sigma = self.sigma_rule.sigma_for(n)
            margin = sigma**d * n / math.log(n)
            if not margin > CONNECTIVITY_MARGIN:
                raise ValueError(
                    f"connectivity margin sigma^d*N/log N = {margin:.3g} <= "
                    f"{CONNECTIVITY_MARGIN:g} at N = {n}, sigma = {sigma:.6g}"
                )
            steps_for(self.t, sigma)

    def to_json(self) -> dict:
        manifold = {"kind": self.manifold.kind}
        if self.manifold.kind == CIRCLE:
            manifold["arc_length"] = self.manifold.arc_length
        density = {"kind": self.density.kind}
        if self.density.kind == SINUSOID:
            density["amplitude"] = self.density.amplitude
        if self.density.kind == "exp_z":
            density["concentration"] = self.density.concentration
        return {
            "manifold": manifold,
            "density": density,
            "n_values": list(self.n_values),
            "sigma_rule": self.sigma_rule.to_json(),
            "t": self.t,
            "mode": self.mode,
            "trials": self.trials,
            "base_seed": self.base_seed,
            "metrics": list(self.metrics),
        }


def _reject_unknown(mapping: dict, allowed: set, context: str) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise ValueError(f"unknown {context} keys: {sorted(unknown)}")


def sweep_config_from_json(data: dict) -> SweepConfig:
    """Build a SweepConfig from a JSON mapping; unknown keys are hard errors.

    The keys mirror the SweepConfig fields; ``sigma_rule.kind`` selects
    "fixed" {sigma} or "power_law" {c0, gamma}, with gamma defaulting to the
    theoretical 1/(d+6) when omitted.
    """
    _reject_unknown(
        data,
        {"manifold", "density", "n_values", "sigma_rule", "t", "mode", "trials",
         "base_seed", "metrics"},
        "config",
    )
    for required in ("manifold", "density", "n_values", "sigma_rule", "t"):
        if required not in data:
            raise ValueError(f"config is missing required key {required!r}")

    m = dict(data["manifold"])
    _reject_unknown(m, {"kind", "arc_length"}, "manifold")
    manifold = ManifoldSpec(m.get("kind", CIRCLE), float(m.get("arc_length", 1.0)))

    dens = dict(data["density"])
    _reject_unknown(dens, {"kind", "amplitude", "concentration"}, "density")
    density = DensitySpec(
        dens.get("kind", "uniform"),
        amplitude=float(dens.get("amplitude", 0.0)),
        concentration=float(dens.get("concentration", 0.0)),
    )

    rule_data = dict(data["sigma_rule"])
    kind = rule_data.pop("kind", None)
    if kind == "fixed":
        _reject_unknown(rule_data, {"sigma"}, "sigma_rule")
        rule = FixedSigma(float(rule_data["sigma"]))
    elif kind == "power_law":
        _reject_unknown(rule_data, {"c0", "gamma"}, "sigma_rule")
        gamma = rule_data.get("gamma")
        if gamma is None:
            gamma = 1.0 / (manifold.dim + 6)
        rule = PowerLawSigma(float(rule_data["c0"]), float(gamma))
    else:
        raise ValueError(f"sigma_rule.kind must be 'fixed' or 'power_law', got {kind!r}")

    return SweepConfig(
        manifold=manifold,
        density=density,
        n_values=tuple(data["n_values"]),
        sigma_rule=rule,
        t=float(data["t"]),
        mode=data.get("mode", DENSITY_CORRECTED),
        trials=int(data.get("trials", 20)),
        base_seed=int(data.get("base_seed", 1000)),
        metrics=tuple(data.get("metrics", ("err_inf", "err_rms"))),
    )


SWEEP_N_VALUES = (250, 500, 1000, 2000, 4000)
SWEEP_C0 = 0.5
SWEEP_GAMMA = 1.0 / 7.0
SWEEP_AMPLITUDE = 0.9


def benchmark_sweep_config(trials: int = 20, base_seed: int = 1000) -> SweepConfig:
    """Convergence benchmark: non-uniform unit circle, shrinking bandwidth.

    Five sample sizes from 250 to 4000, sigma = 0.5 * N^(-1/7) (the exponent
    1/(d+6) that balances the bias and variance terms of the estimator), the
    density-corrected operator at t = 0.5. The smallest size sits just inside
    the connectivity margin.
    """
    return SweepConfig(
        manifold=ManifoldSpec(CIRCLE, UNIT_CIRCLE_ARC),
        density=DensitySpec(SINUSOID, amplitude=SWEEP_AMPLITUDE),
        n_values=SWEEP_N_VALUES,
        sigma_rule=PowerLawSigma(SWEEP_C0, SWEEP_GAMMA),
        t=0.5,
        trials=trials,
        base_seed=base_seed,
    )


@dataclass(frozen=True)
class SweepRecord:
    """One trial row: configuration, seed, and its error metrics."""

    manifold_kind: str
    n_points: int
    sigma: float
    n_steps: int
    t: float
    seed: int
    err_inf: float
    err_rms: float
    wall_time_s: float

    def __post_init__(self):
        if not 0.0 <= self.err_rms <= self.err_inf:
            raise ValueError(
                f"error ordering violated: err_inf = {self.err_inf}, "
                f"err_rms = {self.err_rms}"
            )


def error_metrics(estimate, truth) -> tuple[float, float]:
    """Sup-norm and RMS error between two equal-length vectors.

    err_inf = max |e_i - t_i|; err_rms = ||e - t||_2 / sqrt(N).
    """
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimate.shape != truth.shape:
        raise ValueError(
            f"length mismatch: estimate {estimate.shape} vs truth {truth.shape}"
        )
    if not (np.all(np.isfinite(estimate)) and np.all(np.isfinite(truth))):
        raise ValueError("error metrics need finite inputs")
    diff = np.abs(estimate - truth)
    err_inf = float(np.max(diff))
    err_rms = float(np.sqrt(np.mean(diff**2)))
    return err_inf, err_rms


@lru_cache(maxsize=8)
def _circle_truth_model(arc_length: float) -> CircleFourierModel:
    return standard_initial_model(arc_length)


def _run_trial(
    manifold: ManifoldSpec,
    density: DensitySpec,
    n_points: int,
    sigma: float,
    n_steps: int,
    t_exec: float,
    mode: str,
    seed: int,
) -> tuple[float, float]:
    """One seeded trial; returns (err_inf, err_rms) against analytic truth."""
    cloud = sample_cloud(manifold, density, n_points, seed)
    ops = build_affinity(cloud, KernelConfig(sigma, manifold.dim))
    if manifold.kind == CIRCLE:
        plan = DiffusionPlan(n_steps, sigma, mode)
        est = estimate_semigroup(ops, initial_field(cloud), plan)
        truth = circle_heat_solution(_circle_truth_model(manifold.arc_length), t_exec, cloud.intrinsic)
        return error_metrics(est.values, truth)
    anchor = densest_sample_index(cloud)
    column = heat_kernel_column(ops, anchor, SYMMETRIC, n_steps)
    model = SphereZonalModel.for_time(t_exec)
    cos_gamma = np.clip(cloud.points @ cloud.points[anchor], -1.0, 1.0)
    return error_metrics(column, model.evaluate(cos_gamma))


def run_sweep(config: SweepConfig) -> list[SweepRecord]:
    """Run every (N, seed) trial of the sweep in deterministic order.

    Seeds are base_seed..base_seed+trials-1 for each N. Graph connectivity
    failures are re-raised with the offending (N, sigma) attached.
    """
    records = []
    for n_points in config.n_values:
        sigma = config.sigma_rule.sigma_for(n_points)
        n_steps, t_exec = steps_for(config.t, sigma)
        for k in range(config.trials):
            seed = config.base_seed + k
            start = time.perf_counter()
            try:
                err_inf, err_rms = _run_trial(
                    config.manifold, config.density, n_points, sigma,
                    n_steps, t_exec, config.mode, seed,
                )
            except Exception as exc:
                raise type(exc)(f"N = {n_points}, sigma = {sigma:.6g}: {exc}") from exc
            records.append(
                SweepRecord(
                    manifold_kind=config.manifold.kind,
                    n_points=n_points,
                    sigma=sigma,
                    n_steps=n_steps,
                    t=t_exec,
                    seed=seed,
                    err_inf=err_inf,
                    err_rms=err_rms,
                    wall_time_s=time.perf_counter() - start,
                )
            )
    return records


def median_errors(records, metric: str = "err_inf") -> tuple[np.ndarray, np.ndarray]:
    """Per-N medians of a metric, sorted by N."""
    if metric not in ("err_inf", "err_rms"):
        raise ValueError(f"unknown metric {metric!r}")
    sizes = sorted({r.n_points for r in records})
    medians = np.array(
        [
            np.median([getattr(r, metric) for r in records if r.n_points == n])
            for n in sizes
        ]
    )
    return np.array(sizes, dtype=float), medians


def fit_rate(records, metric: str = "err_inf") -> tuple[float, float, float]:
    """OLS fit of log(per-N median error) against log N.

    Returns (slope, intercept, r_squared); needs at least 3 distinct N values.
    """
    sizes, medians = median_errors(records, metric)
    if sizes.size < 3:
        raise ValueError(f"rate fitting needs >= 3 distinct N values, got {sizes.size}")
    if np.any(medians <= 0.0):
        raise ValueError("cannot fit a rate through zero or negative errors")
    x = np.log(sizes)
    y = np.log(medians)
    x_mean = x.mean()
    y_mean = y.mean()
    slope = float(np.sum((x - x_mean) * (y - y_mean)) / np.sum((x - x_mean) ** 2))
    intercept = float(y_mean - slope * x_mean)
    residual = y - (intercept + slope * x)
    total = np.sum((y - y_mean) ** 2)
    r_squared = 1.0 if total == 0.0 else float(1.0 - np.sum(residual**2) / total)
    return slope, intercept, r_squared


def write_sweep_csv(records, path, include_timing: bool = False) -> None:
    """Write sweep records as CSV.

    The wall_time_s column is written as 0 unless include_timing is set,
    keeping default output byte-identical across runs; real timings are
    inherently nondeterministic and opt-in.
    """
    lines = [SWEEP_HEADER]
    for r in records:
        wall = r.wall_time_s if include_timing else 0.0
        lines.append(
            f"{r.manifold_kind},{r.n_points},{_fmt(r.sigma)},{r.n_steps},"
            f"{_fmt(r.t)},{r.seed},{_fmt(r.err_inf)},{_fmt(r.err_rms)},{_fmt(wall)}"
        )
    with open(path, "w", newline="") as handle:
        handle.write("\n".join(lines) + "\n")


def read_sweep_csv(path) -> list[SweepRecord]:
    """Read back a sweep CSV written by write_sweep_csv."""
    with open(path, "r", newline="") as handle:
        lines = [line.strip() for line in handle if line.strip()]
    if not lines or lines[0] != SWEEP_HEADER:
        raise ValueError(f"{path} is not a sweep CSV (header mismatch)")
    records = []
    for line in lines[1:]:
        kind, n, sigma, steps, t, seed, err_inf, err_rms, wall = line.split(",")
        records.append(
            SweepRecord(
                manifold_kind=kind,
                n_points=int(n),
                sigma=float(sigma),
                n_steps=int(steps),
                t=float(t),
                seed=int(seed),
                err_inf=float(err_inf),
                err_rms=float(err_rms),
                wall_time_s=float(wall),
            )
        )
    return records


def render_png_lineplot(
    series, xlabel: str, ylabel: str, path, logx: bool = False, logy: bool = False,
    title: str = "",
) -> None:
    """Matplotlib rendering of the same series the SVG emitter draws.

    Report figure only: PNG bytes are not covered by the reproducibility
    contract.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7.2, 4.8), dpi=110)
    for name, xs, ys in series:
        ax.plot(xs, ys, label=str(name), linewidth=1.4)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.legend(fontsize=9)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _write_curve_csv(path, s_values, estimate, truth) -> None:
    lines = ["s,estimate,truth"]
    for s, e, tv in zip(s_values, estimate, truth):
        lines.append(f"{_fmt(s)},{_fmt(e)},{_fmt(tv)}")
    with open(path, "w", newline="") as handle:
        handle.write("\n".join(lines) + "\n")


FIG1_N = 500
FIG1_TIMES = (0.5, 2.0)
FIG1_SIGMAS = (0.25, 0.125, 0.0625)
FIG1_AMPLITUDE = 0.8


def reproduce_fig1(out_dir, seed: int = 1000) -> dict:
    """Circle benchmark: one non-uniform cloud, three bandwidths, two times.

    For each (t, sigma) writes a per-point CSV ``s,estimate,truth`` sorted by
    arc length; per time, writes an SVG overlay (analytic solution plus the
    three bandwidth estimates) and a matplotlib PNG alongside. Returns the
    file list and the single-realization sup errors. Deterministic output for
    a fixed seed.
    """
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifold = ManifoldSpec(CIRCLE, UNIT_CIRCLE_ARC)
    density = DensitySpec(SINUSOID, amplitude=FIG1_AMPLITUDE)
    cloud = sample_cloud(manifold, density, FIG1_N, seed)
    order = np.argsort(cloud.intrinsic)
    f = initial_field(cloud)
    model = _circle_truth_model(manifold.arc_length)
    operators = {
        sigma: build_affinity(cloud, KernelConfig(sigma, 1)) for sigma in FIG1_SIGMAS
    }
    grid = np.linspace(0.0, manifold.arc_length, 513)[:-1]
    files = []
    errors = {}
    for t_target in FIG1_TIMES:
        truth_samples = circle_heat_solution(model, t_target, cloud.intrinsic)
        series = [("analytic", grid, circle_heat_solution(model, t_target, grid))]
        for sigma in FIG1_SIGMAS:
            n_steps, t_exec = steps_for(t_target, sigma)
            est = estimate_semigroup(
                operators[sigma], f, DiffusionPlan(n_steps, sigma, DENSITY_CORRECTED)
            )
            csv_path = out / f"fig1_t{t_target:g}_sigma{sigma:g}.csv"
            _write_curve_csv(
                csv_path, cloud.intrinsic[order], est.values[order], truth_samples[order]
            )
            files.append(str(csv_path))
            errors[f"t={t_target:g},sigma={sigma:g}"] = error_metrics(
                est.values, truth_samples
            )[0]
            series.append((f"sigma={sigma:g}", cloud.intrinsic[order], est.values[order]))
        svg_path = out / f"fig1_t{t_target:g}.svg"
        emit_svg_lineplot(
            series,
            "arc length s",
            "field value",
            svg_path,
            title=f"diffused step-ramp at t = {t_target:g} (N = {FIG1_N})",
        )
        files.append(str(svg_path))
        png_path = out / f"fig1_t{t_target:g}.png"
        render_png_lineplot(
            series, "arc length s", "field value", png_path,
            title=f"diffused step-ramp at t = {t_target:g} (N = {FIG1_N})",
        )
        files.append(str(png_path))
    summary = {"seed": seed, "err_inf": errors}
    summary_path = out / "fig1_summary.json"
    with open(summary_path, "w") as handle:
        json.dump(summary, handle, indent=2, sort_keys=True)
        handle.write("\n")
    files.append(str(summary_path))
    return {"files": files, "err_inf": errors}


FIG2_N = 1000
FIG2_CONCENTRATION = 1.5
FIG2_SIGMA = 0.1
FIG2_STEPS = 15


def reproduce_fig2(out_dir, seed: int = 1000) -> dict:
    """Sphere heat-kernel benchmark: symmetric estimator column at one anchor.

    Samples N = 1000 points with density concentration 1.5, estimates the
    kernel column at the densest sample with sigma = 0.1 and 15 steps
    (t = 0.15), and writes the column CSV ``index,estimate,truth``, an SVG of
    estimate and truth against geodesic angle from the anchor, and a PNG
    alongside. Returns the anchor-column errors.
    """
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cloud = sample_cloud(
        ManifoldSpec(SPHERE), DensitySpec("exp_z", concentration=FIG2_CONCENTRATION),
        FIG2_N, seed,
    )
    ops = build_affinity(cloud, KernelConfig(FIG2_SIGMA, 2))
    t_exec = FIG2_STEPS * FIG2_SIGMA**2
    anchor = densest_sample_index(cloud)
    column = heat_kernel_column(ops, anchor, SYMMETRIC, FIG2_STEPS)
    cos_gamma = np.clip(cloud.points @ cloud.points[anchor], -1.0, 1.0)
    truth = SphereZonalModel.for_time(t_exec).evaluate(cos_gamma)
    err_inf, err_rms = error_metrics(column, truth)

    from .semigroup import write_kernel_column_csv

    csv_path = out / "fig2_column.csv"
    write_kernel_column_csv(column, truth, csv_path)
    angles = np.arccos(cos_gamma)
    order = np.argsort(angles, kind="stable")
    series = [
        ("estimate", angles[order], column[order]),
        ("analytic", angles[order], truth[order]),
    ]
    svg_path = out / "fig2.svg"
    emit_svg_lineplot(
        series,
        "geodesic angle from anchor (rad)",
        "kernel value",
        svg_path,
        title=f"heat kernel column at t = {t_exec:g} (N = {FIG2_N})",
    )
    png_path = out / "fig2.png"
    render_png_lineplot(
        series, "geodesic angle from anchor (rad)", "kernel value", png_path,
        title=f"heat kernel column at t = {t_exec:g} (N = {FIG2_N})",
    )
    summary = {
        "seed": seed, "anchor": anchor, "err_inf": err_inf, "err_rms": err_rms,
        "t": t_exec,
    }
    summary_path = out / "fig2_summary.json"
    with open(summary_path, "w") as handle:
        json.dump(summary, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return {
        "files": [str(csv_path), str(svg_path), str(png_path), str(summary_path)],
        "err_inf": err_inf,
        "err_rms": err_rms,
    }
