import json
import math
import logging

import pandas as pd
import pytest

from drlr.cli import build_parser, config_from_args, main
from drlr.data import Rng, generate_synthetic, write_libsvm


def run_json(capsys, argv):
    code = main(argv)
    return code, json.loads(capsys.readouterr().out)


def test_solve_synthetic(capsys):
    code, out = run_json(capsys, ["solve", "--synthetic", "20,3", "--seed", "1"])
    assert code == 0
    assert list(out) == ["beta", "lambda", "objective", "kkt_residual", "status", "config"]
    assert out["status"] == "converged"
    assert 0.0 <= out["lambda"] <= 2.785 + 1e-3
    assert len(out["beta"]) == 3
    assert out["config"]["seed"] == 1


def test_solve_finds_interior_lambda(capsys):
    code, out = run_json(capsys, ["solve", "--synthetic", "100,3", "--seed", "7"])
    assert code == 0
    assert out["status"] == "converged"
    assert 0.0 < out["lambda"] < 2.785
    assert out["objective"] < math.log(2.0)
    assert any(b != 0.0 for b in out["beta"])


def test_solve_is_deterministic(capsys):
    argv = ["solve", "--synthetic", "30,2", "--seed", "42", "--epsilon", "0.3"]
    _, first = run_json(capsys, argv)
    _, second = run_json(capsys, argv)
    assert first == second


def test_solve_from_file(tmp_path, capsys):
    data, _ = generate_synthetic(25, 3, Rng(4))
    fname = tmp_path / "train.svm"
    write_libsvm(data, fname)
    out_file = tmp_path / "sol.json"
    trace_file = tmp_path / "evaluations.csv"
    iter_file = tmp_path / "iterations.csv"
    code = main(["solve", "--data", str(fname), "--out", str(out_file),
                 "--trace", str(trace_file), "--iter-trace", str(iter_file)])
    assert code == 0
    sol = json.loads(out_file.read_text())
    assert sol["status"] == "converged"
    evals = pd.read_csv(trace_file)
    assert list(evals.columns) == ["lambda", "q", "iterations", "status", "kkt_residual"]
    assert evals["q"].min() == pytest.approx(sol["objective"])
    iterations = pd.read_csv(iter_file)
    best = evals.loc[evals["q"].idxmin()]
    assert len(iterations) == best["iterations"] + 1
    assert iterations["primal_residual"].iloc[-1] <= 1e-6


def test_missing_file_is_an_input_error(tmp_path):
    assert main(["solve", "--data", str(tmp_path / "nope.svm")]) == 1


def test_bad_config_is_an_input_error():
    assert main(["solve", "--synthetic", "20,3", "--gamma", "0.5"]) == 1


def test_usage_errors_exit_with_1():
    with pytest.raises(SystemExit) as err:
        main(["subproblem", "--synthetic", "20,3", "--lambda", "0.1", "--solver", "newton"])
    assert err.value.code == 1
    with pytest.raises(SystemExit) as err:
        main(["solve"])
    assert err.value.code == 1


def test_config_from_args():
    args = build_parser().parse_args(["solve", "--synthetic", "20,3", "--kappa", "3",
                                      "--tol", "1e-5", "--max-iter", "50"])
    cfg = config_from_args(args)
    assert cfg.kappa == 3.0
    assert cfg.primal_tol == 1e-5
    assert cfg.max_iter == 50
    assert cfg.epsilon == 0.1


def test_subproblem_trace(tmp_path, capsys, caplog):
    trace_file = tmp_path / "trace.csv"
    with caplog.at_level(logging.WARNING):
        code = main(["subproblem", "--synthetic", "20,3", "--lambda", "0.4",
                     "--solver", "lpadmm", "--rho0", "1e-6", "--max-iter", "50",
                     "--trace", str(trace_file), "--ref-objective", "0.5"])
    assert code == 2
    assert json.loads(capsys.readouterr().out)["status"] == "max_iter"
    assert any("raised" in r.getMessage() for r in caplog.records)
    df = pd.read_csv(trace_file)
    assert list(df.columns) == ["iter", "objective", "primal_residual", "kkt_residual",
                                "rho", "elapsed_ms", "suboptimality"]
    assert len(df) == 51


@pytest.mark.parametrize("solver", ["lpadmm-adaptive", "ladmm", "sadmm", "pdhg",
                                    "subgradient"])
def test_subproblem_solvers(capsys, solver):
    code = main(["subproblem", "--synthetic", "20,3", "--lambda", "0.4",
                 "--solver", solver, "--max-iter", "30"])
    assert code in (0, 2)
    out = json.loads(capsys.readouterr().out)
    assert out["lambda"] == 0.4
    assert max(abs(b) for b in out["beta"]) <= 0.4


def test_eta_needs_ladmm():
    assert main(["subproblem", "--synthetic", "20,3", "--lambda", "0.4",
                 "--eta", "1.0"]) == 1


def test_bench_fixed_lambda(tmp_path):
    out_file = tmp_path / "bench.csv"
    code = main(["bench", "--sizes", "10,3", "--trials", "3", "--lambda", "0.3",
                 "--solvers", "lpadmm-adaptive,sadmm", "--max-iter", "2000",
                 "--out", str(out_file)])
    assert code == 0
    df = pd.read_csv(out_file)
    assert len(df) == 2
    assert list(df["solver"]) == ["lpadmm-adaptive", "sadmm"]
    assert (df["trials"] == 3).all()
    assert df["std_ms"].notna().all()


def test_bench_excel(tmp_path):
    out_file = tmp_path / "bench.xlsx"
    code = main(["bench", "--sizes", "10,3", "--trials", "1", "--lambda", "0.3",
                 "--solvers", "pdhg", "--max-iter", "100", "--out", str(out_file)])
    assert code == 0
    df = pd.read_excel(out_file, sheet_name="results", engine="openpyxl")
    assert df.loc[0, "solver"] == "pdhg"
    assert pd.isna(df.loc[0, "std_ms"])


def test_bench_pipeline_rejects_baselines():
    assert main(["bench", "--sizes", "10,3", "--trials", "1",
                 "--solvers", "pdhg"]) == 1


def test_eval_synthetic(tmp_path):
    out_file = tmp_path / "acc.csv"
    per_trial = tmp_path / "trials.csv"
    code = main(["eval", "--synthetic", "60,3", "--trials", "2", "--models", "lr,rlr",
                 "--label-noise", "0.1", "--out", str(out_file),
                 "--per-trial", str(per_trial)])
    assert code == 0
    df = pd.read_csv(out_file, index_col=0)
    assert list(df.index) == ["lr", "rlr"]
    assert ((df["mean_accuracy"] >= 0) & (df["mean_accuracy"] <= 1)).all()
    assert (df["trials"] == 2).all()
    assert len(pd.read_csv(per_trial)) == 2
