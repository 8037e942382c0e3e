"""Command-line front end.

    drlr solve      --synthetic 100,3 --seed 7 --out sol.json
    drlr subproblem --data a1a --lambda 0.1 --solver sadmm --trace trace.csv
    drlr bench      --sizes "100,3;500,10" --trials 30 --out bench.csv
    drlr eval       --data a1a --epsilon 0.3 --kappa 7 --trials 30

Exit codes: 0 success, 1 usage or input error, 2 no convergence.
DRLR_LOG=error|warn|info|debug sets the diagnostics level (stderr)."""
import argparse
import json
import logging
import os
import sys

from . import __version__
from .boxqp import BoxQpSolverKind
from .data import Rng, generate_synthetic, read_libsvm
from .experiments import (PIPELINE_SOLVERS, SOLVER_NAMES, AccuracyExperiment,
                          SolverBenchmark, file_instance, parse_sizes,
                          solve_fixed_lambda, synthetic_instance, write_table)
from .model import DrlrConfig, SubproblemInstance
from .outer import golden_section_solve


logger = logging.getLogger(__name__)

LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING,
              "warning": logging.WARNING, "info": logging.INFO,
              "debug": logging.DEBUG}

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2


def configure_logging():
    name = os.environ.get("DRLR_LOG", "warn").strip().lower()
    level = LOG_LEVELS.get(name, logging.WARNING)
    logging.basicConfig(stream=sys.stderr, level=level,
                        format="%(levelname)s %(name)s: %(message)s")
    if name not in LOG_LEVELS:
        logger.warning("unknown DRLR_LOG value '%s', using warn", name)


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with 1, 2 is reserved for non-convergence"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _size(text):
    N, n = parse_sizes(text)[0]
    return N, n


def _add_data_args(p, required=True):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--data", help="LIBSVM file")
    g.add_argument("--synthetic", type=_size, metavar="N,n",
                   help="seeded synthetic dataset of N samples and n features")
    p.add_argument("--n-features", type=int, help="feature dimension of --data")


def _add_config_args(p):
    p.add_argument("--epsilon", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--rho0", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--tol", type=float, dest="primal_tol")
    p.add_argument("--max-iter", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--inner", choices=[k.value for k in BoxQpSolverKind],
                   default=BoxQpSolverKind.ACTIVE_SET_CG.value)


def build_parser():
    parser = _Parser(prog="drlr", description="Wasserstein distributionally "
                     "robust logistic regression")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve DRLR by golden-section search on lambda")
    _add_data_args(p)
    _add_config_args(p)
    p.add_argument("--out", help="solution JSON, stdout when omitted")
    p.add_argument("--trace", help="CSV of the golden-section evaluations, one row per "
                   "lambda with q, iterations, status and KKT residual")
    p.add_argument("--iter-trace", help="per-iteration CSV of the subproblem solve "
                   "at the returned lambda")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("subproblem", help="solve the beta-subproblem at fixed lambda")
    _add_data_args(p)
    _add_config_args(p)
    p.add_argument("--lambda", type=float, required=True, dest="lam")
    p.add_argument("--solver", choices=SOLVER_NAMES, default="lpadmm")
    p.add_argument("--eta", type=float, help="proximal weight of ladmm")
    p.add_argument("--ref-objective", type=float,
                   help="optimal value, adds a suboptimality column to the trace")
    p.add_argument("--out", help="solution JSON, stdout when omitted")
    p.add_argument("--trace", help="per-iteration CSV")
    p.set_defaults(func=cmd_subproblem)

    p = sub.add_parser("bench", help="time solvers over seeded trials")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--sizes", type=parse_sizes, metavar="N1,d1;N2,d2")
    g.add_argument("--data", action="append", help="LIBSVM file, repeatable")
    p.add_argument("--n-features", type=int)
    _add_config_args(p)
    p.add_argument("--trials", type=int, default=30)
    p.add_argument("--solvers", default=",".join(PIPELINE_SOLVERS),
                   help="comma separated solver names")
    p.add_argument("--lambda", type=float, dest="lam",
                   help="benchmark the fixed-lambda subproblem instead of the full solve")
    p.add_argument("--out", help="CSV or .xlsx table, stdout when omitted")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("eval", help="test accuracy of LR, RLR and DRLR")
    _add_data_args(p)
    _add_config_args(p)
    p.add_argument("--models", default="lr,rlr,drlr")
    p.add_argument("--split", type=float, default=0.6, help="training fraction")
    p.add_argument("--trials", type=int, default=30)
    p.add_argument("--label-noise", type=float, default=0.0,
                   help="fraction of training labels to flip")
    p.add_argument("--parallel", type=int, default=1, help="worker processes")
    p.add_argument("--out", help="CSV or .xlsx table, stdout when omitted")
    p.add_argument("--per-trial", help="CSV of accuracies per trial")
    p.set_defaults(func=cmd_eval)
    return parser


def config_from_args(args):
    fields = ["epsilon", "kappa", "rho0", "gamma", "primal_tol", "max_iter", "seed"]
    overrides = {f: getattr(args, f) for f in fields if getattr(args, f, None) is not None}
    return DrlrConfig(**overrides)


def load_data(args, cfg):
    if args.data is not None:
        return read_libsvm(args.data, args.n_features)
    N, n = args.synthetic
    return generate_synthetic(N, n, Rng(cfg.seed))[0]


def _emit_json(payload, fname):
    text = json.dumps(payload, indent=2)
    if fname is None:
        print(text)
    else:
        with open(fname, "w") as f:
            f.write(text + "\n")


def _emit_table(df, fname, **kwargs):
    if fname is None:
        print(df.to_string())
    else:
        write_table(df, fname, **kwargs)


def _exit_code(sol):
    return EXIT_OK if sol.converged else EXIT_NOT_CONVERGED


def cmd_solve(args):
    cfg = config_from_args(args)
    data = load_data(args, cfg)
    sol = golden_section_solve(data, cfg, BoxQpSolverKind(args.inner))
    _emit_json(sol.to_dict(cfg), args.out)
    if args.trace:
        sol.info["history"].to_csv(args.trace, index=False)
    if args.iter_trace:
        sol.info["trace"].to_csv(args.iter_trace)
    return _exit_code(sol)


def cmd_subproblem(args):
    cfg = config_from_args(args)
    data = load_data(args, cfg)
    inst = SubproblemInstance.from_dataset(data, args.lam, cfg.kappa)
    kwargs = {}
    if args.eta is not None:
        if args.solver != "ladmm":
            raise ValueError("--eta applies to --solver ladmm only")
        kwargs["eta"] = args.eta
    sol, trace = solve_fixed_lambda(args.solver, inst, cfg,
                                    BoxQpSolverKind(args.inner), **kwargs)
    _emit_json(sol.to_dict(cfg), args.out)
    if args.trace:
        trace.to_csv(args.trace, ref_objective=args.ref_objective)
    return _exit_code(sol)


def cmd_bench(args):
    cfg = config_from_args(args)
    if args.sizes is not None:
        instances = [synthetic_instance(N, n) for N, n in args.sizes]
    else:
        instances = [file_instance(f, args.n_features) for f in args.data]
    solvers = [s.strip() for s in args.solvers.split(",") if s.strip()]
    bench = SolverBenchmark(instances, solvers, cfg, trials=args.trials, lam=args.lam,
                            inner=args.inner, verbose=True)
    df = bench.run()
    _emit_table(df, args.out, index=False)
    return EXIT_OK


def cmd_eval(args):
    cfg = config_from_args(args)
    data = load_data(args, cfg)
    models = [m.strip() for m in args.models.split(",") if m.strip()]
    exp = AccuracyExperiment(data, models, cfg, train_fraction=args.split,
                             trials=args.trials, label_noise=args.label_noise,
                             inner=args.inner, parallel=args.parallel, verbose=True)
    df = exp.run()
    _emit_table(df, args.out)
    if args.per_trial:
        exp.per_trial().to_csv(args.per_trial)
    return EXIT_OK


def main(argv=None):
    configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError, RuntimeError) as err:
        logger.error("%s", err)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
