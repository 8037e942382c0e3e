"""Linearized proximal ADMM for the beta-subproblem

    min f(mu) + P(mu) + g(beta)  s.t.  Z beta - mu = 0

with augmented Lagrangian f + P + g - w^T(Z beta - mu) + (rho/2)||Z beta - mu||^2.
The mu-update replaces f by its first-order model at the current mu."""
import logging
import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd

from .boxqp import BoxQpProblem, BoxQpSolverKind, solve_box_qp
from .loss import grad_f, project_linf_ball, prox_P
from .model import (Solution, Status, bregman_divergence, kkt_residual,
                    subproblem_objective)


logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["iter", "objective", "primal_residual", "kkt_residual",
                 "rho", "elapsed_ms"]

# smallest constant penalty is this factor times (sqrt(3) + 1) L_f
RHO_MARGIN = 1.01
INNER_TOL_FLOOR = 1e-14


def penalty_threshold(inst):
    """(sqrt(3) + 1) L_f, below which a constant penalty is not covered by
    the convergence theory"""
    return (math.sqrt(3.0) + 1.0) * inst.lipschitz_f


@dataclass
class LpAdmmState:
    beta: np.ndarray
    mu: np.ndarray
    w: np.ndarray
    rho: float
    k: int = 0
    prev_mu: Optional[np.ndarray] = None
    inner_converged: bool = True


class Trace:
    """Per-iteration diagnostics of an iterative subproblem solver.
    Row 0 is the starting point."""

    def __init__(self, solver, **header):
        self.header = {"solver": solver, **header}
        self.records = []
        self.initial = {}
        self.inner_failures = []

    def record(self, **row):
        self.records.append(row)

    def __len__(self):
        return len(self.records)

    @property
    def iterations(self):
        return max(len(self.records) - 1, 0)

    @property
    def constant_penalty(self):
        return self.header.get("gamma", 1.0) == 1.0

    def column(self, name):
        return np.array([r.get(name, np.nan) for r in self.records], dtype=float)

    def to_frame(self):
        df = pd.DataFrame(self.records)
        cols = [c for c in TRACE_COLUMNS if c in df.columns]
        return df[cols + [c for c in df.columns if c not in cols]]

    def to_csv(self, fname, ref_objective=None):
        """Write the standard columns, plus the best-so-far suboptimality
        gap when a reference objective is given"""
        df = self.to_frame()
        for c in TRACE_COLUMNS:
            if c not in df.columns:
                df[c] = np.nan
        df = df[TRACE_COLUMNS].copy()
        if ref_objective is not None:
            df["suboptimality"] = df["objective"].cummin() - ref_objective
        df.to_csv(fname, index=False)
        return df


def initial_state(inst, rho, init=None):
    """Zero start, or a warm start taken from a previous solution;
    beta is clamped to the current radius"""
    N, n = inst.n_samples, inst.n_features
    if init is None:
        return LpAdmmState(np.zeros(n), np.zeros(N), np.zeros(N), rho)

    def part(name, size):
        val = init.get(name) if isinstance(init, dict) else getattr(init, name, None)
        if val is None:
            return np.zeros(size)
        return np.array(val, dtype=float)

    beta = project_linf_ball(part("beta", n), inst.lam)
    return LpAdmmState(beta, part("mu", N), part("w", N), rho)


def lp_admm_step(state, inst, inner=BoxQpSolverKind.ACTIVE_SET_CG, gamma=1.0,
                 eta=0.0, qp=None, inner_tol=1e-8, inner_max_iter=10000,
                 rho_cap=np.inf):
    """One LP-ADMM iteration: box-QP beta-update, linearized prox mu-update,
    multiplier update and penalty growth rho <- gamma * rho.

    eta > 0 adds (eta/2)||mu - mu^k||^2 to the mu-model (linearized ADMM);
    eta = 0 is LP-ADMM."""
    rho = state.rho
    if qp is None:
        qp = BoxQpProblem(inst.Z, np.zeros(inst.n_samples), inst.lam)
    elif qp.radius != inst.lam:
        qp = qp.with_radius(inst.lam)

    res = solve_box_qp(qp.with_rhs(state.mu + state.w / rho), state.beta,
                       kind=inner, tol=inner_tol, max_iter=inner_max_iter)
    beta = res.x
    z = inst.margins(beta)

    gf = grad_f(state.mu, inst)
    v = (rho * z + eta * state.mu - gf - state.w) / (rho + eta)
    mu = prox_P(v, inst, rho + eta)

    w = state.w - rho * (z - mu)
    return LpAdmmState(beta, mu, w, min(gamma * rho, rho_cap), state.k + 1,
                       prev_mu=state.mu, inner_converged=res.converged)


def _finite(*arrays):
    return all(np.all(np.isfinite(a)) for a in arrays)


def run_admm(inst, cfg, inner=BoxQpSolverKind.ACTIVE_SET_CG, init=None,
             reference=None, eta=0.0, solver="lpadmm"):
    """Iterate `lp_admm_step` until ||Z beta - mu||_2 <= primal_tol.

    While a growing penalty is below its cap the KKT residual must also
    reach adaptive_kkt_tol; once rho is capped the primal test alone stops."""
    inner = BoxQpSolverKind(inner)
    adaptive = cfg.gamma > 1.0
    rho0 = cfg.rho0
    if not adaptive and eta == 0.0:
        floor = RHO_MARGIN * penalty_threshold(inst)
        if rho0 < floor:
            logger.warning("constant penalty %.3g is below (sqrt(3)+1) L_f, raised to %.3g",
                           rho0, floor)
            rho0 = floor
    rho_cap = cfg.rho_cap_factor * rho0 if adaptive else np.inf

    trace = Trace(solver, rho0=rho0, gamma=cfg.gamma, eta=eta, lam=inst.lam,
                  kappa=inst.kappa, inner=inner.value,
                  lipschitz_f=inst.lipschitz_f)
    state = initial_state(inst, rho0, init)
    qp = BoxQpProblem(inst.Z, np.zeros(inst.n_samples), inst.lam)
    trace.initial = {"w0": state.w.copy(), "mu0": state.mu.copy()}

    def lyapunov(st):
        if reference is None:
            return np.nan
        mu_star, w_star = reference
        return (np.sum((st.w - w_star) ** 2) / (2.0 * st.rho)
                + 0.5 * st.rho * np.sum((st.mu - mu_star) ** 2)
                - bregman_divergence(mu_star, st.mu, inst))

    t0 = time.perf_counter()
    r_primal, r_mu, r_beta = kkt_residual(state.beta, state.mu, state.w, inst, parts=True)
    obj = subproblem_objective(state.beta, state.mu, inst)
    trace.record(iter=0, objective=obj, primal_residual=r_primal,
                 kkt_residual=max(r_primal, r_mu, r_beta), rho=state.rho,
                 elapsed_ms=0.0, avg_objective=np.nan, lyapunov=lyapunov(state),
                 mu_step=np.nan, split_gap=np.nan, inner_converged=True)

    avg_beta = np.zeros(inst.n_features)
    avg_mu = np.zeros(inst.n_samples)
    status = Status.MAX_ITER
    kkt = max(r_primal, r_mu, r_beta)
    for k in range(1, cfg.max_iter + 1):
        inner_tol = min(cfg.inner_tol, 0.1 * r_primal)
        if adaptive:
            inner_tol = min(inner_tol, 0.1 * cfg.adaptive_kkt_tol / state.rho)
        inner_tol = max(inner_tol, INNER_TOL_FLOOR)

        rho_k = state.rho
        new = lp_admm_step(state, inst, inner, gamma=cfg.gamma, eta=eta, qp=qp,
                           inner_tol=inner_tol, inner_max_iter=cfg.inner_max_iter,
                           rho_cap=rho_cap)
        if not new.inner_converged:
            trace.inner_failures.append(k)
            logger.debug("inner box-QP solver did not converge at iteration %d", k)

        if not _finite(new.beta, new.mu, new.w):
            logger.warning("non-finite iterate at iteration %d, lambda=%g", k, inst.lam)
            status = Status.DIVERGED
            state = new
            break

        if k == 1:
            trace.initial["mu1"] = new.mu.copy()
        avg_beta += (new.beta - avg_beta) / k
        avg_mu += (new.mu - avg_mu) / k

        r_primal, r_mu, r_beta = kkt_residual(new.beta, new.mu, new.w, inst, parts=True)
        kkt = max(r_primal, r_mu, r_beta)
        obj = subproblem_objective(new.beta, new.mu, inst)
        trace.record(iter=k, objective=obj, primal_residual=r_primal,
                     kkt_residual=kkt, rho=rho_k,
                     elapsed_ms=1e3 * (time.perf_counter() - t0),
                     avg_objective=subproblem_objective(avg_beta, avg_mu, inst),
                     lyapunov=lyapunov(new),
                     mu_step=float(np.linalg.norm(new.mu - state.mu)),
                     split_gap=float(np.linalg.norm(inst.margins(new.beta) - state.mu)),
                     inner_converged=new.inner_converged)
        state = new

        if not math.isfinite(obj):
            status = Status.DIVERGED
            break
        if r_primal <= cfg.primal_tol:
            if not adaptive or kkt <= cfg.adaptive_kkt_tol:
                status = Status.CONVERGED
                break
            if state.rho >= rho_cap:
                # the capped penalty no longer tightens the KKT residual
                logger.info("%s: primal residual met at the penalty cap %.3g, "
                            "KKT residual %.2e", solver, rho_cap, kkt)
                status = Status.CONVERGED
                break

    if status is Status.MAX_ITER:
        logger.warning("%s reached max_iter=%d at lambda=%g, primal residual %.2e",
                       solver, cfg.max_iter, inst.lam, r_primal)
    logger.debug("%s: %s after %d iterations, objective %.10g",
                 solver, status.value, trace.iterations, obj)

    sol = Solution(beta=state.beta, lam=inst.lam,
                   objective=subproblem_objective(state.beta, state.mu, inst)
                   if _finite(state.mu) else np.inf,
                   kkt_residual=kkt, status=status, trace=trace,
                   mu=state.mu, w=state.w, iterations=trace.iterations)
    return sol, trace


def solve_subproblem(inst, cfg, inner=BoxQpSolverKind.ACTIVE_SET_CG, init=None,
                     reference=None):
    """Solve the beta-subproblem at fixed lambda with LP-ADMM.

    With gamma = 1 the penalty is kept constant and raised to at least
    1.01 (sqrt(3) + 1) L_f. `reference` = (mu*, w*) enables the Lyapunov
    column of the trace."""
    solver = "lpadmm-adaptive" if cfg.gamma > 1.0 else "lpadmm"
    return run_admm(inst, cfg, inner, init=init, reference=reference, solver=solver)


def check_lyapunov_monotone(trace, slack=1e-9):
    """m_k non-increasing from the first iterate on"""
    m = trace.column("lyapunov")[1:]
    if np.isnan(m).all():
        raise ValueError("trace has no Lyapunov values, solve with a reference point")
    return bool(np.all(np.diff(m) <= slack))


def check_step_inequality(trace, lipschitz_f, rho, slack=1e-12):
    """||Z b^{k+1} - mu^k||^2 >= 0.5 ||mu^{k+1} - mu^k||^2
    - (L_f/rho)^2 ||mu^k - mu^{k-1}||^2 for every k >= 1"""
    gap = trace.column("split_gap")[2:]
    step = trace.column("mu_step")
    lhs = gap ** 2
    rhs = 0.5 * step[2:] ** 2 - (lipschitz_f / rho) ** 2 * step[1:-1] ** 2
    return bool(np.all(lhs >= rhs - slack))


def rate_bound_violations(trace, ref_objective, rho, initial, mu_star, slack=1e-9):
    """Every K where F(avg beta_K, avg mu_K) - F* exceeds
    [||w0||^2/(2 rho) + (rho/2)||mu* - mu0||^2 + c ||mu0 - mu1||^2] / K,
    c = (rho - 2 L_f)/4"""
    if not trace.constant_penalty:
        raise ValueError("the O(1/K) bound only covers a constant penalty")
    if isinstance(initial, dict):
        w0, mu0, mu1 = initial["w0"], initial["mu0"], initial["mu1"]
    else:
        w0, mu0, mu1 = initial
    lipschitz_f = trace.header["lipschitz_f"]
    c = (rho - 2.0 * lipschitz_f) / 4.0
    const = (np.sum(np.asarray(w0) ** 2) / (2.0 * rho)
             + 0.5 * rho * np.sum((np.asarray(mu_star) - mu0) ** 2)
             + c * np.sum((np.asarray(mu0) - mu1) ** 2))

    gap = trace.column("avg_objective")[1:] - ref_objective
    K = np.arange(1, gap.size + 1)
    return [int(k) for k in K[gap > const / K + slack]]


def check_rate_bound(trace, ref_objective, rho, initial, mu_star, slack=1e-9):
    viol = rate_bound_violations(trace, ref_objective, rho, initial, mu_star, slack)
    if viol:
        logger.warning("O(1/K) bound violated at %d iterations, first K=%d",
                       len(viol), viol[0])
    return not viol
