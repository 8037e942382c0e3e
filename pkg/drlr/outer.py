"""Outer search over the dual radius lambda.

q(lambda) = min_beta Omega(lambda, beta) is unimodal on [0, 0.2785/eps] and is
minimised by golden-section search, each evaluation being one beta-subproblem."""
import logging
import math
from collections import namedtuple
from dataclasses import dataclass
from typing import Optional

import pandas as pd

from .boxqp import BoxQpSolverKind
from .loss import PHI_MAX
from .lpadmm import solve_subproblem
from .model import (Solution, Status, SubproblemInstance, drlr_objective,
                    full_kkt_residual)


logger = logging.getLogger(__name__)

GOLDEN_RATIO = (math.sqrt(5.0) - 1.0) / 2.0
# lambdas closer than this (relative to max(1, lambda)) share one evaluation
LAMBDA_MATCH_TOL = 1e-12

SearchResult = namedtuple("SearchResult", ["lam", "value", "history", "converged"])


class SubproblemDivergedError(RuntimeError):
    def __init__(self, lam, message=None):
        self.lam = lam
        super().__init__(message or f"beta-subproblem diverged at lambda={lam:g}")


class _BudgetExhausted(Exception):
    pass


@dataclass(frozen=True)
class GoldenSearchConfig:
    lambda_hi: float
    interval_tol: float
    lambda_lo: float = 0.0
    ratio: float = GOLDEN_RATIO
    max_evals: int = 100

    def __post_init__(self):
        if not 0 < self.ratio < 1:
            raise ValueError(f"ratio must lie in (0, 1), got {self.ratio}")
        if not self.lambda_hi > self.lambda_lo:
            raise ValueError(f"empty bracket [{self.lambda_lo}, {self.lambda_hi}]")
        if not self.interval_tol > 0:
            raise ValueError(f"interval_tol must be positive, got {self.interval_tol}")
        if self.max_evals < 1:
            raise ValueError("max_evals must be a positive integer")


def lambda_upper_bound(epsilon):
    """Upper bound on the optimal lambda, sup_t t/(e^t + 1) / epsilon"""
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    return PHI_MAX / epsilon


def golden_section_search(q, config):
    """Minimise a unimodal scalar function on [lambda_lo, lambda_hi].

    Both endpoints and every interior point are evaluated at most once.
    The bracket shrinks to [l1, l3] when q(l2) < q(l3) and to [l2, l4]
    otherwise. Returns the best evaluated point and the list of
    (lambda, value) pairs in evaluation order."""
    r = config.ratio
    history = []

    def evaluate(lam):
        for l, v in history:
            if abs(l - lam) <= LAMBDA_MATCH_TOL * max(1.0, abs(lam)):
                return v
        if len(history) >= config.max_evals:
            raise _BudgetExhausted()
        v = q(lam)
        history.append((lam, v))
        return v

    l1, l4 = config.lambda_lo, config.lambda_hi
    converged = False
    try:
        evaluate(l1)
        evaluate(l4)
        while l4 - l1 > config.interval_tol:
            l2 = r * l1 + (1.0 - r) * l4
            l3 = (1.0 - r) * l1 + r * l4
            if evaluate(l2) < evaluate(l3):
                l4 = l3
            else:
                l1 = l2
        converged = True
    except _BudgetExhausted:
        logger.warning("golden-section search stopped after %d evaluations, "
                       "bracket [%g, %g]", len(history), l1, l4)

    lam, value = min(history, key=lambda p: p[1])
    return SearchResult(lam, value, history, converged)


def _nearest(solved, lam):
    if not solved:
        return None
    key = min(solved, key=lambda l: abs(l - lam))
    return solved[key]


def golden_section_solve(data, cfg, inner=BoxQpSolverKind.ACTIVE_SET_CG,
                         search: Optional[GoldenSearchConfig] = None, verbose=False):
    """Solve Wasserstein DRLR: golden-section search on lambda, every evaluation
    solved by LP-ADMM and warm-started from the nearest solved lambda.

    Returns the best (beta, lambda) found with objective Omega(lambda, beta).
    Solution.info["history"] lists every evaluated lambda and info["trace"] holds the
    iteration trace of the best one. The status is MAX_ITER when the search
    ran out of evaluations or any subproblem did not converge."""
    lam_hi = lambda_upper_bound(cfg.epsilon)
    if search is None:
        search = GoldenSearchConfig(lambda_hi=lam_hi,
                                    interval_tol=cfg.interval_tol(lam_hi),
                                    max_evals=cfg.max_evals)
    Z = data.signed_matrix()
    solved = {}
    rows = []
    unconverged = []

    def q(lam):
        inst = SubproblemInstance(Z, lam, cfg.kappa)
        sol, _ = solve_subproblem(inst, cfg, inner, init=_nearest(solved, lam))
        if sol.status is Status.DIVERGED:
            raise SubproblemDivergedError(lam)
        value = drlr_objective(sol.beta, lam, data, cfg)
        solved[lam] = sol
        if not sol.converged:
            unconverged.append(lam)
            logger.warning("subproblem at lambda=%.8g stopped with status %s, "
                           "KKT residual %.2e", lam, sol.status.value, sol.kkt_residual)
        rows.append({"lambda": lam, "q": value, "iterations": sol.iterations,
                     "status": sol.status.value, "kkt_residual": sol.kkt_residual})
        if verbose:
            logger.info("lambda=%.8g  q=%.10g  (%d iterations, %s)",
                        lam, value, sol.iterations, sol.status.value)
        return value

    res = golden_section_search(q, search)
    best = solved[res.lam]
    inst = SubproblemInstance(Z, res.lam, cfg.kappa)

    # an unconverged subproblem may have misordered the bracket
    status = Status.CONVERGED
    if not res.converged or unconverged:
        status = Status.MAX_ITER
    history = pd.DataFrame(rows, columns=["lambda", "q", "iterations", "status",
                                          "kkt_residual"])
    info = {
        "history": history,
        "evaluations": len(res.history),
        "lambda_upper_bound": lam_hi,
        "unconverged_lambdas": unconverged,
        "trace": best.trace,
        "full_kkt_residual": full_kkt_residual(best.beta, best.mu, best.w,
                                               inst, cfg.epsilon),
    }
    logger.info("lambda*=%.8g, objective %.10g after %d subproblems",
                res.lam, res.value, len(res.history))
    return Solution(beta=best.beta, lam=res.lam, objective=res.value,
                    kkt_residual=best.kkt_residual, status=status, mu=best.mu,
                    w=best.w, iterations=int(history["iterations"].sum()), info=info)
