import numpy as np
import pytest

import robustsp.bench as bench_mod
from robustsp import (
    BenchmarkReport,
    ExperimentConfig,
    Graph,
    ScenarioMatrix,
    aggregate,
    default_grids,
    read_results,
    run_benchmark,
    sample_pairs,
    split_scenarios,
    write_metrics,
    write_results,
)
from robustsp.errors import (
    ConfigError,
    EmptyReport,
    NoConnectedPairs,
    NodeBudgetExceeded,
)

from instances import diamond


def toy_matrix():
    values = np.array([
        [1.0, 4.0, 5.0, 1.0],
        [2.0, 5.0, 4.0, 2.0],
        [1.5, 3.0, 6.0, 1.5],
        [3.0, 6.0, 3.0, 3.0],
    ])
    return ScenarioMatrix(values, [0, 1, 2, 3])


def test_split_takes_even_ordinals():
    m = toy_matrix()
    train, evaluation = split_scenarios(m)
    assert train.scenario_count == 2
    assert np.array_equal(train.values, m.values[[0, 2]])
    assert train.scenario_labels == [0, 2]
    assert evaluation is m  # all rows evaluate


def test_split_two_scenarios():
    m = ScenarioMatrix(np.array([[1.0], [2.0]]), [0, 1])
    train, _ = split_scenarios(m)
    assert np.array_equal(train.values, [[1.0]])


def test_split_paper_shape():
    m = ScenarioMatrix(np.ones((96, 3)), list(range(96)))
    train, evaluation = split_scenarios(m)
    assert train.scenario_count == 48
    assert evaluation.scenario_count == 96


def test_sample_pairs_only_reachable():
    # nodes {0,1} cycle, {2,3} cycle; cross pairs unreachable
    g = Graph(4, [(0, 1), (1, 0), (2, 3), (3, 2)])
    pairs = sample_pairs(g, 50, seed=9)
    reachable = {(0, 1), (1, 0), (2, 3), (3, 2)}
    assert set(pairs) <= reachable
    assert len(pairs) == 50


def test_sample_pairs_deterministic():
    g = diamond()
    assert sample_pairs(g, 10, seed=4) == sample_pairs(g, 10, seed=4)
    assert sample_pairs(g, 10, seed=4) != sample_pairs(g, 10, seed=5)


def test_sample_pairs_two_node_graph():
    g = Graph(2, [(0, 1)])
    assert set(sample_pairs(g, 8, seed=1)) == {(0, 1)}


def test_sample_pairs_no_connected_pairs():
    with pytest.raises(NoConnectedPairs):
        sample_pairs(Graph(3, []), 1, seed=0)


def config_for(grids, pair_count=1, seed=0):
    return ExperimentConfig(seed=seed, pair_count=pair_count, grids=grids)


def test_run_benchmark_record_count_single_cell():
    report = run_benchmark(config_for({"interval": [1.0]}), diamond(), toy_matrix())
    assert report.record_count() == 4  # 1 method x 1 pair x 4 scenarios
    assert report.values.shape == (1, len(report.pairs), 4)


def test_run_benchmark_diamond_hand_check():
    # train rows 0 and 2; interval scale 1 upper bounds are their max:
    # arcs (1.5, 4, 6, 1.5); route 0-1-3 worst 1+6? no: upper[arc0]+upper[arc2]
    # = 1.5+6 = 7.5 vs 4+1.5 = 5.5 -> picks arcs (1, 3)
    cfg = ExperimentConfig(seed=3, pair_count=2, grids={"interval": [1.0]})
    report = run_benchmark(cfg, diamond(), toy_matrix())
    for pair_idx, (s, t) in enumerate(report.pairs):
        assert (s, t) in {(0, 1), (0, 2), (0, 3), (1, 3), (2, 3)}
        if (s, t) == (0, 3):
            # per-scenario costs of the chosen path (arcs 1 and 3)
            expected = toy_matrix().values[:, [1, 3]].sum(axis=1)
            assert np.allclose(report.values[0, pair_idx], expected)


def test_aggregate_single_pair_metrics():
    values = np.array([[[1.0, 2.0, 3.0, 4.0]]])  # 1 method, 1 pair, 4 scenarios
    report = BenchmarkReport([("interval", 1.0)], [(0, 3)], 4, values, [],
                             cvar_fraction=0.25)
    row = aggregate(report)[0]
    assert row.avg == 2.5
    assert row.avg_worst == 4.0
    assert row.avg_cvar == 4.0  # ceil(0.25 * 4) = 1 worst value
    assert row.avg_rank == 1.0


def test_aggregate_rank_ordering_and_ties():
    values = np.zeros((2, 1, 3))
    values[0, 0] = [5.0, 5.0, 10.0]
    values[1, 0] = [7.0, 7.0, 10.0]
    report = BenchmarkReport([("a", 1.0), ("b", 1.0)], [(0, 1)], 3, values, [])
    rows = aggregate(report)
    # method a wins scenarios 0 and 1; scenario 2 ties at rank 1.5
    assert rows[0].avg_rank == pytest.approx((1 + 1 + 1.5) / 3)
    assert rows[1].avg_rank == pytest.approx((2 + 2 + 1.5) / 3)


def test_aggregate_cvar_between_avg_and_worst():
    rng = np.random.default_rng(12)
    values = rng.uniform(10, 50, size=(5, 7, 40))
    methods = [(f"m{i}", 1.0) for i in range(5)]
    report = BenchmarkReport(methods, [(0, i + 1) for i in range(7)], 40, values, [],
                             cvar_fraction=0.05)
    for row in aggregate(report):
        assert row.avg <= row.avg_cvar + 1e-12
        assert row.avg_cvar <= row.avg_worst + 1e-12


def test_aggregate_rank_conservation():
    rng = np.random.default_rng(15)
    n_methods = 6
    values = rng.uniform(0, 9, size=(n_methods, 4, 11))
    values[2, 1] = values[4, 1]  # force ties across methods
    methods = [(f"m{i}", 1.0) for i in range(n_methods)]
    report = BenchmarkReport(methods, [(0, i + 1) for i in range(4)], 11, values, [])
    rows = aggregate(report)
    assert np.mean([r.avg_rank for r in rows]) == pytest.approx((n_methods + 1) / 2)


def test_aggregate_empty_report():
    report = BenchmarkReport([("interval", 1.0)], [(0, 1)], 2,
                             np.full((1, 1, 2), np.nan), [(0, 0, "boom")])
    with pytest.raises(EmptyReport):
        aggregate(report)


def test_failed_cells_excluded_and_counted(monkeypatch):
    calls = {"n": 0}
    real_solve = bench_mod.solve

    def flaky_solve(graph, model, s, t, **kw):
        calls["n"] += 1
        if calls["n"] == 2:
            raise NodeBudgetExceeded("forced failure")
        return real_solve(graph, model, s, t, **kw)

    monkeypatch.setattr(bench_mod, "solve", flaky_solve)
    cfg = ExperimentConfig(seed=3, pair_count=3, grids={"ellipsoid": [1.0]})
    report = run_benchmark(cfg, diamond(), toy_matrix())
    assert len(report.failed) == 1
    method_idx, pair_idx, reason = report.failed[0]
    assert (method_idx, pair_idx) == (0, 1)
    assert "NodeBudgetExceeded" in reason
    assert np.isnan(report.values[0, 1]).all()
    row = aggregate(report)[0]
    assert row.failed_cells == 1
    assert np.isfinite(row.avg)


def test_rerun_bit_identical_and_thread_invariant():
    cfg = ExperimentConfig(seed=11, pair_count=4,
                           grids={"interval": [0.5, 1.0], "ph": [1.0, 2.0]})
    first = run_benchmark(cfg, diamond(), toy_matrix(), threads=1)
    second = run_benchmark(cfg, diamond(), toy_matrix(), threads=1)
    parallel = run_benchmark(cfg, diamond(), toy_matrix(), threads=2)
    assert np.array_equal(first.values, second.values)
    assert np.array_equal(first.values, parallel.values)
    assert first.pairs == parallel.pairs
    assert first.methods == parallel.methods


def test_results_csv_round_trip_bit_for_bit(tmp_path):
    cfg = ExperimentConfig(seed=2, pair_count=3,
                           grids={"interval": [1.0], "budgeted": [1.0], "sph": [2.0]})
    report = run_benchmark(cfg, diamond(), toy_matrix())
    out = tmp_path / "results.csv"
    write_results(report, out)
    loaded = read_results(out)
    loaded.cvar_fraction = report.cvar_fraction
    assert loaded.methods == report.methods
    assert loaded.pairs == report.pairs
    assert np.array_equal(loaded.values, report.values)
    original = [(r.method, r.param, r.avg, r.avg_worst, r.avg_cvar, r.avg_rank)
                for r in aggregate(report)]
    recovered = [(r.method, r.param, r.avg, r.avg_worst, r.avg_cvar, r.avg_rank)
                 for r in aggregate(loaded)]
    assert original == recovered


def test_metrics_csv_sorted(tmp_path):
    cfg = ExperimentConfig(seed=2, pair_count=2,
                           grids={"ph": [2.0, 1.0], "interval": [1.0]})
    report = run_benchmark(cfg, diamond(), toy_matrix())
    out = tmp_path / "metrics.csv"
    write_metrics(aggregate(report), out)
    lines = out.read_text().splitlines()
    assert lines[0] == "method,param,avg,avg_worst,avg_cvar,avg_rank,failed_cells"
    keys = [(line.split(",")[0], float(line.split(",")[1])) for line in lines[1:]]
    assert keys == sorted(keys)


def test_default_grids_match_protocol():
    grids = default_grids()
    assert grids["ch"] == [pytest.approx(0.1 * i) for i in range(1, 21)]
    assert grids["ch"][0] == 0.1 and grids["ch"][-1] == 2.0
    assert grids["ellipsoid"][0] == 0.2 and grids["ellipsoid"][-1] == 4.0
    assert grids["budgeted"] == [5.0 * i for i in range(1, 21)]
    assert grids["ph"] == [float(2 * i - 1) for i in range(1, 21)]
    assert grids["ph"][-1] == 39.0
    assert grids["sph"] == [float(i) for i in range(1, 21)]
    assert all(len(g) == 20 for g in grids.values())


def test_config_validation_errors():
    with pytest.raises(ConfigError):
        ExperimentConfig(pair_count=0).validate()
    with pytest.raises(ConfigError):
        ExperimentConfig(cvar_fraction=0.0).validate()
    with pytest.raises(ConfigError):
        ExperimentConfig(train_split="odd").validate()
    with pytest.raises(ConfigError):
        ExperimentConfig(grids={}).validate()
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json('{"grids": {"interval": [1.0]}, "bogus": 1}')
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json("not json")


def test_grid_validation_against_train_count():
    cfg = config_for({"ph": [4.0]})  # train count will be 2
    with pytest.raises(ConfigError):
        run_benchmark(cfg, diamond(), toy_matrix())
    cfg = config_for({"sph": [3.0]})  # max column for 2 train scenarios is 2
    with pytest.raises(ConfigError):
        run_benchmark(cfg, diamond(), toy_matrix())
    cfg = config_for({"mystery": [1.0]})
    with pytest.raises(ConfigError):
        run_benchmark(cfg, diamond(), toy_matrix())
    cfg = config_for({"interval": [-1.0]})
    with pytest.raises(ConfigError):
        run_benchmark(cfg, diamond(), toy_matrix())


def test_config_json_round_trip():
    cfg = ExperimentConfig(seed=7, pair_count=42, grids={"interval": [1.0, 2.0]},
                           cvar_fraction=0.1)
    clone = ExperimentConfig.from_json(cfg.to_json())
    assert clone == cfg
