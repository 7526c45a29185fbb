import csv
import io

import numpy as np

from cubt.benchmark import (
    BenchmarkConfig,
    Grid,
    aggregate,
    best_worst,
    param_legend,
    params_hash,
    rows_to_csv,
    run_benchmark,
)


def small_config(**kw):
    base = dict(
        cases=[("M1", 0.13)],
        replicates=2,
        grid=Grid(minsize=(5,), mindev=(0.01,), mindist=(0.3,), delta=(0.2, 0.4)),
    )
    base.update(kw)
    return BenchmarkConfig(**base)


def test_params_hash_order_independent():
    assert params_hash({"a": 1, "b": 2}) == params_hash({"b": 2, "a": 1})
    assert len(params_hash({"a": 1})) == 10


def test_config_round_trip():
    cfg = small_config(unknown_grid=Grid(minsize=(10,)))
    back = BenchmarkConfig.from_dict(cfg.to_dict())
    assert back.to_dict() == cfg.to_dict()


def test_rows_and_legend():
    cfg = small_config()
    rows = run_benchmark(cfg)
    # per replicate: 2 known-k, 2 unknown-k, 2 baselines
    assert len(rows) == 2 * 6
    legend = param_legend(cfg)
    assert {r["params_hash"] for r in rows} <= set(legend)
    assert {r["seed"] for r in rows} == {0, 1}


def test_partial_failure_is_recorded():
    # k=4 cannot be reached when minsize exceeds n, the run records the error
    cfg = small_config(grid=Grid(minsize=(1000,), mindev=(0.5,), mindist=(0.3,), delta=(0.2,)),
                       unknown_k=False, baselines=False)
    rows = run_benchmark(cfg)
    assert all(r["status"].startswith("error: KTooLarge") for r in rows)
    assert aggregate(rows) == []


def test_aggregate_recomputable_from_csv():
    rows = run_benchmark(small_config())
    parsed = list(csv.DictReader(io.StringIO(rows_to_csv(rows))))
    summary = aggregate(parsed)
    for entry in summary:
        mine = [r for r in parsed if r["method"] == entry["method"] and r["params_hash"] == entry["params_hash"]]
        assert entry["runs"] == len(mine)
        assert float(entry["mean_mce"]) == np.mean([float(r["mce"]) for r in mine])
    assert aggregate(parsed) == aggregate(rows)


def test_best_worst_ordering():
    summary = [
        dict(model="M1", sigma="0.1", method="cubt_known_k", params_hash="a", runs=2, mean_mce="0.2", correct_k=2),
        dict(model="M1", sigma="0.1", method="cubt_known_k", params_hash="b", runs=2, mean_mce="0.1", correct_k=2),
        dict(model="M1", sigma="0.1", method="kmeans", params_hash="c", runs=2, mean_mce="0.3", correct_k=2),
    ]
    out = best_worst(summary)
    assert [(r["method"], r["params_hash"]) for r in out] == [
        ("cubt_known_k(B)", "b"),
        ("cubt_known_k(W)", "a"),
        ("kmeans", "c"),
    ]


def test_parallel_matches_serial():
    serial = rows_to_csv(run_benchmark(small_config(workers=1)))
    parallel = rows_to_csv(run_benchmark(small_config(workers=4)))
    assert serial == parallel
