import math

import numpy as np
import pytest

from graphheat import graph, manifolds, semigroup

TAU = math.tau


def circle_cloud(n, seed, arc_length=TAU, amplitude=0.0):
    spec = manifolds.ManifoldSpec(manifolds.CIRCLE, arc_length)
    if amplitude == 0.0:
        dens = manifolds.DensitySpec(manifolds.UNIFORM)
    else:
        dens = manifolds.DensitySpec(manifolds.SINUSOID, amplitude=amplitude)
    return manifolds.sample_cloud(spec, dens, n, seed=seed)


def sphere_cloud(n, seed, concentration=0.0):
    spec = manifolds.ManifoldSpec(manifolds.SPHERE)
    if concentration == 0.0:
        dens = manifolds.DensitySpec(manifolds.UNIFORM)
    else:
        dens = manifolds.DensitySpec(manifolds.EXP_Z, concentration=concentration)
    return manifolds.sample_cloud(spec, dens, n, seed=seed)


def build(cloud, sigma, truncation=graph.AUTO):
    cfg = graph.KernelConfig(sigma, cloud.manifold.dim, truncation=truncation)
    return graph.build_affinity(cloud, cfg)


def test_diffusion_plan_validation():
    plan = semigroup.DiffusionPlan(8, 0.25)
    assert plan.t == 0.5
    assert plan.mode == semigroup.DENSITY_CORRECTED
    with pytest.raises(ValueError, match="n_steps"):
        semigroup.DiffusionPlan(-1, 0.25)
    with pytest.raises(ValueError, match="sigma"):
        semigroup.DiffusionPlan(4, 0.0)
    with pytest.raises(ValueError, match="transition mode"):
        semigroup.DiffusionPlan(4, 0.25, mode="symmetric")


def test_field_sample_validation():
    cloud = circle_cloud(20, seed=0)
    field = semigroup.initial_field(cloud)
    assert field.values.shape == (20,)
    assert field.cloud_id == cloud.label
    with pytest.raises(ValueError, match="finite"):
        semigroup.FieldSample(np.array([1.0, np.inf]), "bad", "c")
    with pytest.raises(ValueError, match="1-D"):
        semigroup.FieldSample(np.ones((3, 2)), "bad", "c")
    with pytest.raises(ValueError, match="circle"):
        semigroup.initial_field(sphere_cloud(20, seed=0))


def test_sample_field_evaluates_on_intrinsic():
    cloud = circle_cloud(50, seed=1)
    field = semigroup.sample_field(cloud, np.sin, "sin")
    assert np.array_equal(field.values, np.sin(cloud.intrinsic))
    assert field.provenance == "sin"


def test_estimate_identity_at_zero_steps():
    cloud = circle_cloud(60, seed=2)
    ops = build(cloud, 0.2)
    f = semigroup.initial_field(cloud)
    out = semigroup.estimate_semigroup(ops, f, semigroup.DiffusionPlan(0, 0.2))
    assert np.array_equal(out.values, f.values)
    assert out.cloud_id == f.cloud_id


def test_estimate_preserves_constants():
    cloud = sphere_cloud(200, seed=3, concentration=1.0)
    ops = build(cloud, 0.2)
    f = semigroup.sample_field(cloud, lambda p: np.full(len(p), 2.5), "const")
    for mode in (semigroup.PLAIN, semigroup.DENSITY_CORRECTED):
        plan = semigroup.DiffusionPlan(40, 0.2, mode=mode)
        out = semigroup.estimate_semigroup(ops, f, plan)
        assert np.max(np.abs(out.values - 2.5)) < 1e-11


def test_estimate_provenance_and_sigma_check():
    cloud = circle_cloud(30, seed=4)
    ops = build(cloud, 0.25)
    f = semigroup.initial_field(cloud)
    out = semigroup.estimate_semigroup(ops, f, semigroup.DiffusionPlan(8, 0.25))
    assert "n=8" in out.provenance and "t=0.5" in out.provenance
    assert "density_corrected" in out.provenance
    with pytest.raises(ValueError, match="bandwidth"):
        semigroup.estimate_semigroup(ops, f, semigroup.DiffusionPlan(8, 0.2))
    with pytest.raises(ValueError, match="values but the graph"):
        short = semigroup.FieldSample(np.ones(29), "f", "c")
        semigroup.estimate_semigroup(ops, short, semigroup.DiffusionPlan(1, 0.25))


def test_estimate_warns_outside_designed_regime():
    cloud = circle_cloud(3, seed=5)
    ops = build(cloud, 0.5)
    f = semigroup.sample_field(cloud, np.cos, "cos")
    with pytest.warns(UserWarning, match="exceeds N"):
        semigroup.estimate_semigroup(ops, f, semigroup.DiffusionPlan(10, 0.5))


def test_estimate_composition_is_bit_identical():
    cloud = circle_cloud(150, seed=6, amplitude=0.7)
    ops = build(cloud, 0.15)
    f = semigroup.initial_field(cloud)
    whole = semigroup.estimate_semigroup(ops, f, semigroup.DiffusionPlan(25, 0.15))
    part = semigroup.estimate_semigroup(ops, f, semigroup.DiffusionPlan(10, 0.15))
    rest = semigroup.estimate_semigroup(ops, part, semigroup.DiffusionPlan(15, 0.15))
    assert np.array_equal(whole.values, rest.values)


def test_estimate_contracts_sup_norm_monotonically():
    cloud = sphere_cloud(150, seed=7)
    ops = build(cloud, 0.3)
    rng = np.random.default_rng(11)
    f = semigroup.FieldSample(rng.standard_normal(150), "noise", cloud.label)
    for mode in (semigroup.PLAIN, semigroup.DENSITY_CORRECTED):
        norms = [
            float(np.max(np.abs(
                semigroup.estimate_semigroup(
                    ops, f, semigroup.DiffusionPlan(n, 0.3, mode=mode)
                ).values
            )))
            for n in range(0, 30, 3)
        ]
        assert all(a >= b - 1e-12 for a, b in zip(norms, norms[1:]))


def test_estimate_matches_dense_matrix_power():
    cloud = circle_cloud(500, seed=8, amplitude=0.6)
    ops = build(cloud, 0.2)
    rng = np.random.default_rng(5)
    f = semigroup.FieldSample(rng.standard_normal(500), "noise", cloud.label)
    for mode in (semigroup.PLAIN, semigroup.DENSITY_CORRECTED):
        M = np.linalg.matrix_power(graph.transition_dense(ops, mode), 50)
        plan = semigroup.DiffusionPlan(50, 0.2, mode=mode)
        out = semigroup.estimate_semigroup(ops, f, plan)
        assert np.max(np.abs(out.values - M @ f.values)) < 1e-9


def test_estimate_tracks_circle_heat_solution():
    # uniform unit circle, t = 0.5: the estimate follows the closed form
    cloud = circle_cloud(2000, seed=1000)
    ops = build(cloud, 0.0625)
    f = semigroup.initial_field(cloud)
    out = semigroup.estimate_semigroup(ops, f, semigroup.DiffusionPlan(128, 0.0625))
    model = manifolds.standard_initial_model(TAU)
    truth = manifolds.circle_heat_solution(model, 0.5, cloud.intrinsic)
    assert float(np.max(np.abs(out.values - truth))) < 0.25


def test_long_time_limit_is_flat():
    cloud = circle_cloud(400, seed=9, amplitude=0.8)
    ops = build(cloud, 0.25)
    f = semigroup.initial_field(cloud)
    out = semigroup.estimate_semigroup(ops, f, semigroup.DiffusionPlan(3200, 0.25))
    values = out.values
    assert float(np.max(values) - np.min(values)) < 1e-8
    # the flat value sits near the mean of the initial condition
    assert abs(float(np.mean(values)) - 0.125) < 0.05


def test_extend_reproduces_on_sample_estimate():
    cloud = circle_cloud(500, seed=10, amplitude=0.8)
    ops = build(cloud, 0.125)
    f = semigroup.initial_field(cloud)
    plan = semigroup.DiffusionPlan(32, 0.125)
    on_sample = semigroup.estimate_semigroup(ops, f, plan)
    extended = semigroup.extend(ops, cloud, f, plan, cloud.points)
    assert np.max(np.abs(extended - on_sample.values)) < 1e-12


def test_extend_preserves_constants():
    cloud = sphere_cloud(300, seed=11, concentration=1.5)
    ops = build(cloud, 0.2)
    f = semigroup.sample_field(cloud, lambda p: np.ones(len(p)), "one")
    rng = np.random.default_rng(1)
    z = rng.standard_normal((50, 3))
    queries = z / np.linalg.norm(z, axis=1, keepdims=True)
    out = semigroup.extend(ops, cloud, f, semigroup.DiffusionPlan(5, 0.2), queries)
    assert np.max(np.abs(out - 1.0)) < 1e-12


def test_extend_accuracy_at_fresh_queries():
    cloud = circle_cloud(1000, seed=12, amplitude=0.8)
    ops = build(cloud, 0.125)
    f = semigroup.initial_field(cloud)
    plan = semigroup.DiffusionPlan(32, 0.125)
    s = np.linspace(0.0, TAU, 100, endpoint=False) + 0.013
    out = semigroup.extend(ops, cloud, f, plan, manifolds.embed_circle(s, TAU))
    model = manifolds.standard_initial_model(TAU)
    truth = manifolds.circle_heat_solution(model, 0.5, s)
    assert float(np.max(np.abs(out - truth))) < 0.25


def test_extend_validation():
    cloud = circle_cloud(50, seed=13)
    ops = build(cloud, 0.2)
    f = semigroup.initial_field(cloud)
    with pytest.raises(ValueError, match="density-corrected"):
        semigroup.extend(
            ops, cloud, f, semigroup.DiffusionPlan(4, 0.2, mode=semigroup.PLAIN), cloud.points
        )
    with pytest.raises(ValueError, match="n_steps >= 1"):
        semigroup.extend(ops, cloud, f, semigroup.DiffusionPlan(0, 0.2), cloud.points)
    with pytest.raises(ValueError, match=r"\(M, 3\)"):
        semigroup.extend(ops, cloud, f, semigroup.DiffusionPlan(4, 0.2), np.ones((5, 2)))


def test_extend_rejects_queries_outside_support():
    cloud = circle_cloud(50, seed=14)
    ops = build(cloud, 0.1)
    f = semigroup.initial_field(cloud)
    queries = np.vstack([cloud.points[0], [1e3, 1e3, 1e3]])
    with pytest.raises(semigroup.ExtensionDomainError, match="query 1"):
        semigroup.extend(ops, cloud, f, semigroup.DiffusionPlan(4, 0.1), queries)


def test_kernel_column_single_step_is_affinity_column():
    cloud = circle_cloud(80, seed=15, amplitude=0.3)
    for truncation in (graph.DENSE, graph.TRUNCATED):
        ops = build(cloud, 0.15, truncation=truncation)
        W = ops.W if truncation == graph.DENSE else np.asarray(ops.W.todense())
        for mode in (semigroup.ASYMMETRIC, semigroup.SYMMETRIC):
            col = semigroup.heat_kernel_column(ops, 7, mode, 1)
            assert np.array_equal(col, W[:, 7])


def test_kernel_column_asymmetric_matches_dense_power():
    cloud = circle_cloud(200, seed=16, amplitude=0.5)
    ops = build(cloud, 0.2)
    Pt = graph.transition_dense(ops, "density_corrected")
    expected = np.linalg.matrix_power(Pt, 5) @ np.asarray(ops.W)[:, 3]
    col = semigroup.heat_kernel_column(ops, 3, semigroup.ASYMMETRIC, 6)
    assert np.max(np.abs(col - expected)) < 1e-10


def test_kernel_column_validation():
    cloud = circle_cloud(30, seed=17)
    ops = build(cloud, 0.3)
    with pytest.raises(ValueError, match="n_steps"):
        semigroup.heat_kernel_column(ops, 0, semigroup.SYMMETRIC, 0)
    with pytest.raises(ValueError, match="out of range"):
        semigroup.heat_kernel_column(ops, 30, semigroup.SYMMETRIC, 2)
    with pytest.raises(ValueError, match="estimator mode"):
        semigroup.heat_kernel_column(ops, 0, "plain", 2)


def test_symmetric_estimator_is_symmetric_and_nonnegative():
    cloud = sphere_cloud(300, seed=18, concentration=1.0)
    ops = build(cloud, 0.2)
    est = semigroup.HeatKernelEstimate(ops, semigroup.SYMMETRIC, 5)
    for i, j in ((0, 299), (17, 200), (42, 43)):
        ci = est.column(i)
        cj = est.column(j)
        assert abs(ci[j] - cj[i]) < 1e-10
        assert ci[i] > 0.0
        assert float(np.min(ci)) >= 0.0


def test_heat_kernel_estimate_wrapper():
    cloud = circle_cloud(60, seed=19)
    ops = build(cloud, 0.25)
    est = semigroup.HeatKernelEstimate(ops, semigroup.SYMMETRIC, 4)
    assert est.t == 0.25
    assert est.sigma == 0.25
    assert np.array_equal(
        est.column(5), semigroup.heat_kernel_column(ops, 5, semigroup.SYMMETRIC, 4)
    )
    dense = est.dense(materialize=True)
    assert dense.shape == (60, 60)
    assert np.max(np.abs(dense - dense.T)) < 1e-12
    with pytest.raises(ValueError, match="materialize"):
        est.dense()
    with pytest.raises(ValueError, match="n_steps"):
        semigroup.HeatKernelEstimate(ops, semigroup.SYMMETRIC, 0)
    with pytest.raises(ValueError, match="estimator mode"):
        semigroup.HeatKernelEstimate(ops, "plain", 2)


def test_heat_kernel_estimate_dense_guard():
    cloud = sphere_cloud(2001, seed=20)
    ops = build(cloud, 0.05, truncation=graph.TRUNCATED)
    est = semigroup.HeatKernelEstimate(ops, semigroup.SYMMETRIC, 2)
    with pytest.raises(ValueError, match="2000"):
        est.dense(materialize=True)


def test_sphere_kernel_column_error_band():
    # benchmark heat kernel run: estimated column vs the zonal closed form
    cloud = sphere_cloud(2000, seed=1000, concentration=1.5)
    sigma = math.sqrt(0.15 / 15)
    ops = build(cloud, sigma)
    anchor = manifolds.densest_sample_index(cloud)
    column = semigroup.heat_kernel_column(ops, anchor, semigroup.SYMMETRIC, 15)
    cos_gamma = np.clip(cloud.points @ cloud.points[anchor], -1.0, 1.0)
    truth = manifolds.sphere_heat_kernel(0.15, cos_gamma, manifolds.default_l_max(0.15))
    err = float(np.max(np.abs(column - truth)))
    assert 0.03 < err < 0.3


def test_diagnostic_frozen_two_point_value():
    intrinsic = np.array([0.0, 0.2])
    cloud = manifolds.PointCloud(
        manifolds.embed_circle(intrinsic, 1.0),
        intrinsic,
        manifolds.ManifoldSpec(manifolds.CIRCLE, 1.0),
        manifolds.DensitySpec(manifolds.UNIFORM),
        seed=0,
    )
    report = semigroup.kernel_vs_geodesic_diagnostic(cloud, 0.1)
    assert report["pair_count"] == 1
    assert abs(report["max_rel_gap"] - 0.13298959669532215) < 1e-12
    assert report["max_rel_gap"] == report["mean_rel_gap"]


def test_diagnostic_gap_shrinks_with_bandwidth():
    cloud = circle_cloud(300, seed=21, arc_length=1.0)
    wide = semigroup.kernel_vs_geodesic_diagnostic(cloud, 0.1)
    narrow = semigroup.kernel_vs_geodesic_diagnostic(cloud, 0.01)
    assert narrow["pair_count"] >= 1
    assert narrow["max_rel_gap"] < wide["max_rel_gap"]


def test_diagnostic_window_and_empty_cases():
    north = np.array([0.0, 0.0, 1.0])
    south = np.array([0.0, 0.0, -1.0])
    near = np.array([math.sin(0.1), 0.0, math.cos(0.1)])
    spec = manifolds.ManifoldSpec(manifolds.SPHERE)
    dens = manifolds.DensitySpec(manifolds.UNIFORM)
    trio = manifolds.PointCloud(
        np.vstack([north, near, south]), np.vstack([north, near, south]), spec, dens, 0
    )
    report = semigroup.kernel_vs_geodesic_diagnostic(trio, 0.1)
    assert report["pair_count"] == 1  # the two antipodal pairs fall outside 3 sigma
    pair = manifolds.PointCloud(
        np.vstack([north, south]), np.vstack([north, south]), spec, dens, 0
    )
    empty = semigroup.kernel_vs_geodesic_diagnostic(pair, 0.1)
    assert empty == {"max_rel_gap": 0.0, "mean_rel_gap": 0.0, "pair_count": 0}
    with pytest.raises(ValueError, match="sigma"):
        semigroup.kernel_vs_geodesic_diagnostic(pair, 0.0)


def test_write_field_csv(tmp_path):
    cloud = circle_cloud(25, seed=22)
    field = semigroup.initial_field(cloud)
    plain = tmp_path / "field.csv"
    semigroup.write_field_csv(field.values, plain)
    lines = plain.read_text().splitlines()
    assert lines[0] == "index,estimate"
    assert len(lines) == 26
    truth = np.cos(cloud.intrinsic)
    both = tmp_path / "both.csv"
    semigroup.write_field_csv(field.values, both, truth=truth)
    header, first = both.read_text().splitlines()[:2]
    assert header == "index,estimate,truth,abs_error"
    cells = first.split(",")
    assert cells[0] == "0"
    assert float(cells[3]) == abs(field.values[0] - truth[0])
    with pytest.raises(ValueError):
        semigroup.write_field_csv(field.values, both, truth=truth[:-1])


def test_write_kernel_column_csv(tmp_path):
    cloud = circle_cloud(25, seed=23)
    ops = build(cloud, 0.3)
    col = semigroup.heat_kernel_column(ops, 3, semigroup.SYMMETRIC, 2)
    truth = manifolds.circle_heat_kernel(
        2 * 0.09, manifolds.geodesic_distance(cloud.manifold, cloud.intrinsic, cloud.intrinsic[3]), TAU
    )
    path = tmp_path / "col.csv"
    semigroup.write_kernel_column_csv(col, truth, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "index,estimate,truth"
    assert len(lines) == 26
    parsed = np.array([line.split(",") for line in lines[1:]], dtype=float)
    assert np.array_equal(parsed[:, 1], col)
    assert np.array_equal(parsed[:, 2], truth)
