"""Benchmark and evaluation harness behind `drlr bench` and `drlr eval`.

Results are kept as pandas frames and written to CSV or Excel."""
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import pandas as pd

from .baselines import BaselineKind, solve_baseline, solve_ladmm, solve_sadmm
from .boxqp import BoxQpSolverKind
from .data import Rng, add_label_noise, generate_synthetic, read_libsvm, split
from .lpadmm import solve_subproblem
from .model import SubproblemInstance
from .outer import golden_section_solve
from .param_container import default_param
from .refmodels import ModelKind, accuracy, train_model


logger = logging.getLogger(__name__)

SOLVER_NAMES = ("lpadmm", "lpadmm-adaptive", "ladmm", "sadmm", "pdhg", "subgradient")
PIPELINE_SOLVERS = ("lpadmm", "lpadmm-adaptive")
BENCH_COLUMNS = ["instance", "solver", "trials", "mean_ms", "std_ms",
                 "mean_objective", "mean_kkt_residual"]


def solver_config(solver, cfg):
    """Penalty schedule of a named LP-ADMM variant"""
    if solver == "lpadmm":
        return cfg.replace(gamma=1.0)
    if solver == "lpadmm-adaptive" and not cfg.adaptive:
        return cfg.replace(gamma=default_param("gamma"))
    return cfg


def solve_fixed_lambda(solver, inst, cfg, inner=BoxQpSolverKind.ACTIVE_SET_CG, **kwargs):
    """Run one of the six subproblem solvers, returns (Solution, Trace)"""
    if solver not in SOLVER_NAMES:
        raise ValueError(f"unknown solver '{solver}', choose from {', '.join(SOLVER_NAMES)}")
    if solver in PIPELINE_SOLVERS:
        return solve_subproblem(inst, solver_config(solver, cfg), inner, **kwargs)
    if solver == "ladmm":
        return solve_ladmm(inst, cfg, inner=inner, **kwargs)
    if solver == "sadmm":
        return solve_sadmm(inst, cfg, inner=inner, **kwargs)
    return solve_baseline(BaselineKind(solver), inst, cfg, **kwargs)


def write_table(df, fname, **kwargs):
    """CSV, or an Excel sheet when the name ends in .xlsx"""
    if str(fname).endswith(".xlsx"):
        with pd.ExcelWriter(fname, engine="openpyxl") as writer:
            df.to_excel(writer, sheet_name="results", **kwargs)
    else:
        df.to_csv(fname, **kwargs)


# =====
# Instances
# =====
@dataclass
class BenchInstance:
    name: str
    loader: Callable

    def load(self, seed):
        return self.loader(seed)


class _SyntheticLoader:
    def __init__(self, N, n):
        self.N, self.n = N, n

    def __call__(self, seed):
        return generate_synthetic(self.N, self.n, Rng(seed))[0]


class _FileLoader:
    def __init__(self, fname, n_features=None):
        self.fname, self.n_features = fname, n_features
        self._data = None

    def __call__(self, seed):
        if self._data is None:
            self._data = read_libsvm(self.fname, self.n_features)
        return self._data


def synthetic_instance(N, n):
    return BenchInstance(f"{N}x{n}", _SyntheticLoader(N, n))


def file_instance(fname, n_features=None):
    return BenchInstance(str(fname), _FileLoader(fname, n_features))


def parse_sizes(text):
    """'N1,d1;N2,d2' -> [(N1, d1), (N2, d2)]"""
    sizes = []
    for part in text.split(";"):
        if not part.strip():
            continue
        try:
            N, n = (int(s) for s in part.split(","))
        except ValueError:
            raise ValueError(f"bad size '{part}', expected N,n") from None
        sizes.append((N, n))
    if not sizes:
        raise ValueError("no instance sizes given")
    return sizes


# =====
# Benchmarks
# =====
@dataclass
class BenchReport:
    instance: str
    solver: str
    times_ms: list = field(default_factory=list)
    objectives: list = field(default_factory=list)
    kkt_residuals: list = field(default_factory=list)
    statuses: list = field(default_factory=list)

    @property
    def trials(self):
        return len(self.times_ms)

    @property
    def mean_ms(self):
        return float(np.mean(self.times_ms))

    @property
    def std_ms(self):
        """Sample standard deviation, NaN for a single trial"""
        if self.trials < 2:
            return float("nan")
        return float(np.std(self.times_ms, ddof=1))

    def to_row(self):
        return {"instance": self.instance, "solver": self.solver,
                "trials": self.trials, "mean_ms": self.mean_ms,
                "std_ms": self.std_ms,
                "mean_objective": float(np.mean(self.objectives)),
                "mean_kkt_residual": float(np.mean(self.kkt_residuals))}


class SolverBenchmark:
    """Time solvers over seeded trials, trial t uses seed cfg.seed + t.

    Without `lam` every trial runs the full golden-section pipeline, which
    only the LP-ADMM variants support; with `lam` the fixed-lambda
    subproblem is timed for any of the six solvers."""

    def __init__(self, instances, solvers, cfg, trials=30, lam=None,
                 inner=BoxQpSolverKind.ACTIVE_SET_CG, verbose=False):
        if trials < 1:
            raise ValueError("trials must be >= 1")
        allowed = SOLVER_NAMES if lam is not None else PIPELINE_SOLVERS
        for s in solvers:
            if s not in allowed:
                raise ValueError(f"solver '{s}' not available here, choose from "
                                 f"{', '.join(allowed)}")
        self.instances = list(instances)
        self.solvers = list(solvers)
        self.cfg = cfg
        self.trials = trials
        self.lam = lam
        self.inner = BoxQpSolverKind(inner)
        self.verbose = verbose

        self.reports = []
        self.df_trials = None
        self.df_results = None

    def _run_one(self, solver, data):
        if self.lam is None:
            t0 = time.perf_counter()
            sol = golden_section_solve(data, solver_config(solver, self.cfg), self.inner)
        else:
            inst = SubproblemInstance.from_dataset(data, self.lam, self.cfg.kappa)
            t0 = time.perf_counter()
            sol, _ = solve_fixed_lambda(solver, inst, self.cfg, self.inner)
        return 1e3 * (time.perf_counter() - t0), sol

    def run(self):
        rows = []
        self.reports = []
        for instance in self.instances:
            for solver in self.solvers:
                report = BenchReport(instance.name, solver)
                for t in range(self.trials):
                    seed = self.cfg.seed + t
                    data = instance.load(seed)
                    ms, sol = self._run_one(solver, data)
                    report.times_ms.append(ms)
                    report.objectives.append(sol.objective)
                    report.kkt_residuals.append(sol.kkt_residual)
                    report.statuses.append(sol.status.value)
                    rows.append({"instance": instance.name, "solver": solver,
                                 "trial": t, "seed": seed, "time_ms": ms,
                                 "objective": sol.objective,
                                 "kkt_residual": sol.kkt_residual,
                                 "iterations": sol.iterations,
                                 "status": sol.status.value})
                if self.verbose:
                    logger.info("%s / %s: %.1f ms mean over %d trials",
                                instance.name, solver, report.mean_ms, report.trials)
                self.reports.append(report)

        self.df_trials = pd.DataFrame(rows)
        self.df_results = pd.DataFrame([r.to_row() for r in self.reports],
                                       columns=BENCH_COLUMNS)
        return self.df_results

    @property
    def results(self):
        assert self.df_results is not None, "Run the benchmark first."
        return self.df_results

    def save_results_to_csv(self, fname="bench.csv"):
        self.results.to_csv(fname, index=False)
        logger.info("Benchmark table saved to %s", fname)

    def save_results_to_excel(self, fname="bench.xlsx"):
        with pd.ExcelWriter(fname, engine="openpyxl") as writer:
            self.results.to_excel(writer, sheet_name="summary", index=False)
            self.df_trials.to_excel(writer, sheet_name="trials", index=False)
        logger.info("Benchmark table saved to %s", fname)


# =====
# Accuracy
# =====
def _accuracy_trial(args):
    data, models, cfg, inner, train_fraction, label_noise, trial = args
    rng = Rng(cfg.seed).spawn(trial)
    train, test = split(data, train_fraction, rng)
    if label_noise > 0:
        train = add_label_noise(train, label_noise, rng)
    rows = []
    for kind in models:
        model = train_model(kind, train, cfg, inner)
        rows.append({"trial": trial, "seed": rng.seed, "model": kind.value,
                     "accuracy": accuracy(model, test),
                     "converged": model.converged})
    return rows


class AccuracyExperiment:
    """Train the chosen models on repeated random splits and collect
    test accuracies. Trial t splits with seed cfg.seed + t; `label_noise`
    flips that fraction of training labels."""

    def __init__(self, data, models, cfg, train_fraction=0.6, trials=30,
                 label_noise=0.0, inner=BoxQpSolverKind.ACTIVE_SET_CG,
                 parallel=1, verbose=False):
        if trials < 1:
            raise ValueError("trials must be >= 1")
        self.data = data
        self.models = [ModelKind(m) for m in models]
        self.cfg = cfg
        self.train_fraction = train_fraction
        self.trials = trials
        self.label_noise = label_noise
        self.inner = BoxQpSolverKind(inner)
        self.parallel = parallel
        self.verbose = verbose

        self.df_trials = None
        self.df_results = None

    def run(self):
        jobs = [(self.data, self.models, self.cfg, self.inner, self.train_fraction,
                 self.label_noise, t) for t in range(self.trials)]
        if self.parallel > 1:
            with ProcessPoolExecutor(max_workers=self.parallel) as pool:
                chunks = list(pool.map(_accuracy_trial, jobs))
        else:
            chunks = []
            for job in jobs:
                chunks.append(_accuracy_trial(job))
                if self.verbose:
                    logger.info("trial %d: %s", job[-1],
                                ", ".join(f"{r['model']} {r['accuracy']:.4f}"
                                          for r in chunks[-1]))

        self.df_trials = pd.DataFrame([r for chunk in chunks for r in chunk])
        grouped = self.df_trials.groupby("model", sort=False)["accuracy"]
        self.df_results = pd.DataFrame({
            "mean_accuracy": grouped.mean(),
            "std_accuracy": grouped.std(ddof=1),
            "trials": grouped.count(),
        })
        return self.df_results

    @property
    def results(self):
        assert self.df_results is not None, "Run the experiment first."
        return self.df_results

    def per_trial(self):
        """Accuracy table with one row per trial and one column per model"""
        return self.df_trials.pivot(index="trial", columns="model", values="accuracy")

    def save_results_to_csv(self, fname="accuracy.csv"):
        self.results.to_csv(fname)
        logger.info("Accuracy table saved to %s", fname)

    def save_results_to_excel(self, fname="accuracy.xlsx"):
        with pd.ExcelWriter(fname, engine="openpyxl") as writer:
            self.results.to_excel(writer, sheet_name="summary")
            self.per_trial().to_excel(writer, sheet_name="trials")
        logger.info("Accuracy table saved to %s", fname)
