import numpy as np
import pandas as pd
import pytest

from drlr.experiments import (BENCH_COLUMNS, SOLVER_NAMES, AccuracyExperiment,
                              BenchReport, SolverBenchmark, parse_sizes,
                              solve_fixed_lambda, solver_config, synthetic_instance)
from drlr.lpadmm import Trace
from drlr.model import DrlrConfig, Solution, SubproblemInstance
from drlr.sample_datasets import load_sample_synthetic


def test_parse_sizes():
    assert parse_sizes("100,3;500,10") == [(100, 3), (500, 10)]
    assert parse_sizes("10,2;") == [(10, 2)]
    with pytest.raises(ValueError):
        parse_sizes("10x2")
    with pytest.raises(ValueError):
        parse_sizes(";")


def test_solver_config():
    cfg = DrlrConfig()
    assert solver_config("lpadmm", cfg).gamma == 1.0
    assert solver_config("lpadmm-adaptive", cfg.replace(gamma=1.0)).gamma == 1.05
    assert solver_config("lpadmm-adaptive", cfg.replace(gamma=1.2)).gamma == 1.2


@pytest.mark.parametrize("solver", SOLVER_NAMES)
def test_every_solver_returns_solution_and_trace(solver):
    data, _ = load_sample_synthetic("tiny")
    inst = SubproblemInstance.from_dataset(data, 0.3, 1.0)
    result = solve_fixed_lambda(solver, inst, DrlrConfig(max_iter=20))
    assert isinstance(result, tuple) and len(result) == 2
    sol, trace = result
    assert isinstance(sol, Solution)
    assert isinstance(trace, Trace)
    assert sol.trace is trace
    assert trace.header["solver"] == solver
    assert len(trace) == sol.iterations + 1
    assert {"objective", "primal_residual", "kkt_residual"} <= set(trace.to_frame().columns)


def test_unknown_solver():
    data, _ = load_sample_synthetic("tiny")
    inst = SubproblemInstance.from_dataset(data, 0.3, 1.0)
    with pytest.raises(ValueError, match="unknown solver"):
        solve_fixed_lambda("newton", inst, DrlrConfig())


def test_bench_report_statistics():
    report = BenchReport("x", "lpadmm", times_ms=[1.0, 3.0], objectives=[0.5, 0.7],
                         kkt_residuals=[1e-6, 3e-6])
    assert report.mean_ms == 2.0
    assert report.std_ms == pytest.approx(np.sqrt(2.0))
    row = report.to_row()
    assert list(row) == BENCH_COLUMNS
    assert row["mean_objective"] == pytest.approx(0.6)
    assert np.isnan(BenchReport("x", "pdhg", times_ms=[1.0]).std_ms)


def test_benchmark_trials_use_consecutive_seeds(tmp_path):
    cfg = DrlrConfig(seed=5, max_iter=500)
    bench = SolverBenchmark([synthetic_instance(15, 2)], ["lpadmm-adaptive", "pdhg"],
                            cfg, trials=2, lam=0.2)
    df = bench.run()
    assert list(df.columns) == BENCH_COLUMNS
    assert list(bench.df_trials["seed"]) == [5, 6, 5, 6]
    assert np.isfinite(bench.df_trials["objective"]).all()

    bench.save_results_to_csv(tmp_path / "bench.csv")
    bench.save_results_to_excel(tmp_path / "bench.xlsx")
    trials = pd.read_excel(tmp_path / "bench.xlsx", sheet_name="trials", engine="openpyxl")
    assert len(trials) == 4


def test_benchmark_validation():
    cfg = DrlrConfig()
    with pytest.raises(ValueError):
        SolverBenchmark([synthetic_instance(10, 2)], ["sadmm"], cfg)
    with pytest.raises(ValueError):
        SolverBenchmark([synthetic_instance(10, 2)], ["lpadmm"], cfg, trials=0)
    with pytest.raises(AssertionError):
        SolverBenchmark([synthetic_instance(10, 2)], ["lpadmm"], cfg).results


def test_accuracy_experiment(tmp_path):
    data, _ = load_sample_synthetic("small")
    exp = AccuracyExperiment(data, ["lr", "rlr"], DrlrConfig(epsilon=0.05), trials=3)
    df = exp.run()
    assert list(df.index) == ["lr", "rlr"]
    assert (df["trials"] == 3).all()
    assert df["std_accuracy"].notna().all()
    assert exp.per_trial().shape == (3, 2)

    again = AccuracyExperiment(data, ["lr", "rlr"], DrlrConfig(epsilon=0.05),
                               trials=3).run()
    pd.testing.assert_frame_equal(df, again)

    exp.save_results_to_excel(tmp_path / "acc.xlsx")
    summary = pd.read_excel(tmp_path / "acc.xlsx", sheet_name="summary",
                            index_col=0, engine="openpyxl")
    assert list(summary.index) == ["lr", "rlr"]


def test_accuracy_experiment_in_parallel():
    data, _ = load_sample_synthetic("small")
    serial = AccuracyExperiment(data, ["lr"], DrlrConfig(), trials=2).run()
    parallel = AccuracyExperiment(data, ["lr"], DrlrConfig(), trials=2, parallel=2).run()
    pd.testing.assert_frame_equal(serial, parallel)
