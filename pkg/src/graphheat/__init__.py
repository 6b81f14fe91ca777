"""Heat semigroup and heat kernel estimation on point clouds via graph diffusion.

The package builds Gaussian affinity graphs on samples of embedded manifolds,
iterates the normalized transition operators to approximate the manifold heat
semigroup Q_t at t = n * sigma^2, extends the estimate off-sample, estimates
the heat kernel itself, and benchmarks everything against analytic spectral
ground truth on the circle and the sphere.

Submodules are imported lazily so the command-line entry point can configure
the numeric backend's thread pools before numpy is loaded.
"""

from importlib import import_module

_SUBMODULES = ("manifolds", "graph", "semigroup", "experiments", "svgplot", "cli")

_EXPORTS = {
    # manifolds
    "ManifoldSpec": "manifolds",
    "DensitySpec": "manifolds",
    "PointCloud": "manifolds",
    "CircleFourierModel": "manifolds",
    "SphereZonalModel": "manifolds",
    "sample_circle": "manifolds",
    "sample_sphere": "manifolds",
    "sample_cloud": "manifolds",
    "embed_circle": "manifolds",
    "initial_f_circle": "manifolds",
    "circle_fourier_coeffs": "manifolds",
    "standard_initial_model": "manifolds",
    "circle_heat_solution": "manifolds",
    "circle_heat_kernel": "manifolds",
    "sphere_heat_kernel": "manifolds",
    "default_l_max": "manifolds",
    "geodesic_distance": "manifolds",
    "density_values": "manifolds",
    "densest_sample_index": "manifolds",
    "write_cloud_csv": "manifolds",
    # graph
    "KernelConfig": "graph",
    "GraphOperators": "graph",
    "GraphConnectivityError": "graph",
    "build_affinity": "graph",
    "apply_P": "graph",
    "apply_Ptilde": "graph",
    "transition_dense": "graph",
    "dump_affinity": "graph",
    # semigroup
    "DiffusionPlan": "semigroup",
    "FieldSample": "semigroup",
    "HeatKernelEstimate": "semigroup",
    "ExtensionDomainError": "semigroup",
    "sample_field": "semigroup",
    "initial_field": "semigroup",
    "estimate_semigroup": "semigroup",
    "extend": "semigroup",
    "heat_kernel_column": "semigroup",
    "kernel_vs_geodesic_diagnostic": "semigroup",
    "write_field_csv": "semigroup",
    "write_kernel_column_csv": "semigroup",
    # experiments
    "SweepConfig": "experiments",
    "SweepRecord": "experiments",
    "FixedSigma": "experiments",
    "PowerLawSigma": "experiments",
    "steps_for": "experiments",
    "error_metrics": "experiments",
    "run_sweep": "experiments",
    "fit_rate": "experiments",
    "write_sweep_csv": "experiments",
    "read_sweep_csv": "experiments",
    "sweep_config_from_json": "experiments",
    "benchmark_sweep_config": "experiments",
    "reproduce_fig1": "experiments",
    "reproduce_fig2": "experiments",
    "emit_svg_lineplot": "svgplot",
}

__all__ = sorted(_EXPORTS) + list(_SUBMODULES)

__version__ = "0.1.0"


def __getattr__(name):
    if name in _SUBMODULES:
        return import_module(f"{__name__}.{name}")
    if name in _EXPORTS:
        module = import_module(f"{__name__}.{_EXPORTS[name]}")
        return getattr(module, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
