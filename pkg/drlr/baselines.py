"""Comparison solvers for the fixed-lambda beta-subproblem.

Every solver returns (Solution, Trace) with beta feasible at every iterate
and (mu, w) in the sign convention of `model.kkt_residual`, so one
certificate applies to all of them."""
import enum
import logging
import time

import numpy as np
from scipy.special import expit

from .boxqp import (BoxQpProblem, BoxQpSolverKind, box_kkt_violation,
                    estimate_spectral_bound, solve_box_qp)
from .loss import (grad_f, logloss, logloss_grad, project_linf_ball,
                   shifted_soft_threshold)
from .lpadmm import Trace, run_admm
from .model import Solution, Status, kkt_residual, subproblem_objective


logger = logging.getLogger(__name__)

NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 100
ARMIJO_SLOPE = 1e-4
ARMIJO_FACTOR = 0.5
BISECTION_ITER = 200


class BaselineKind(enum.Enum):
    SUBGRADIENT = "subgradient"
    PDHG = "pdhg"
    LADMM = "ladmm"
    SADMM = "sadmm"


class NewtonFailure(RuntimeError):
    pass


def _solution(beta, mu, w, inst, status, trace, **info):
    sol = Solution(beta=beta, lam=inst.lam,
                   objective=subproblem_objective(beta, inst.margins(beta), inst),
                   kkt_residual=kkt_residual(beta, mu, w, inst),
                   status=status, trace=trace, mu=mu, w=w,
                   iterations=trace.iterations, info=info)
    return sol, trace


# =====
# Projected subgradient
# =====
def _kink_weights(m, center):
    """Subgradient of max(m - center, 0): 1 above, 0 below, 1/2 at the kink"""
    return np.where(m > center, 1.0, np.where(m < center, 0.0, 0.5))


def solve_subgradient(inst, x0=None, max_iter=100000, step_c=1.0, tol=0.0):
    """beta <- clip(beta - step_c/sqrt(k+1) g, -lambda, lambda), g a subgradient
    of (1/N) sum[h(m_i) + max(m_i - lambda*kappa, 0)] in beta.
    Returns the best iterate seen."""
    N, n = inst.n_samples, inst.n_features
    trace = Trace("subgradient", step_c=step_c, lam=inst.lam, kappa=inst.kappa,
                  lipschitz_f=inst.lipschitz_f)
    beta = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    if beta.size and np.max(np.abs(beta)) > inst.lam:
        raise ValueError("starting point lies outside the box ||beta||_inf <= lambda")
    if inst.lam == 0:
        beta = np.zeros(n)
        trace.record(iter=0, objective=subproblem_objective(beta, np.zeros(N), inst),
                     primal_residual=0.0, kkt_residual=0.0, rho=np.nan,
                     elapsed_ms=0.0, best_objective=np.nan)
        m = inst.margins(beta)
        w = -(logloss_grad(m) + _kink_weights(m, inst.center)) / N
        return _solution(beta, m, w, inst, Status.CONVERGED, trace)

    t0 = time.perf_counter()
    best_beta, best_obj = beta.copy(), np.inf
    status = Status.MAX_ITER
    for k in range(max_iter + 1):
        m = inst.margins(beta)
        obj = float(np.mean(logloss(m) + np.maximum(m - inst.center, 0.0)))
        s = logloss_grad(m) + _kink_weights(m, inst.center)
        g = np.asarray(inst.Z.T @ s).ravel() / N
        kkt = box_kkt_violation(beta, g, inst.lam)
        if obj < best_obj:
            best_beta, best_obj = beta.copy(), obj
        trace.record(iter=k, objective=obj, primal_residual=0.0, kkt_residual=kkt,
                     rho=np.nan, elapsed_ms=1e3 * (time.perf_counter() - t0),
                     best_objective=best_obj)
        if kkt <= tol:
            status = Status.CONVERGED
            break
        if k == max_iter:
            break
        beta = project_linf_ball(beta - step_c / np.sqrt(k + 1.0) * g, inst.lam)

    m = inst.margins(best_beta)
    w = -(logloss_grad(m) + _kink_weights(m, inst.center)) / N
    return _solution(best_beta, m, w, inst, status, trace)


# =====
# Primal-dual hybrid gradient
# =====
def pdhg_steps(inst, spectral_bound=None, tau=None, sigma=None):
    """(tau, sigma) for K = Z/(2N): sigma = 1/||K||,
    tau = 0.99 / (L_G/2 + sigma ||K||^2) with L_G = lambda_max(Z^T Z)/(4N).

    Given steps are checked against tau (L_G/2 + sigma ||K||^2) < 1."""
    N = inst.n_samples
    if spectral_bound is None:
        spectral_bound = estimate_spectral_bound(inst.Z)
    K_norm = np.sqrt(spectral_bound) / (2.0 * N)
    L_G = spectral_bound / (4.0 * N)
    if sigma is None:
        sigma = 1.0 / K_norm
    if tau is None:
        tau = 0.99 / (0.5 * L_G + sigma * K_norm ** 2)
    if not (tau > 0 and sigma > 0):
        raise ValueError(f"PDHG steps must be positive, got tau={tau}, sigma={sigma}")
    if tau * (0.5 * L_G + sigma * K_norm ** 2) >= 1.0:
        raise ValueError(f"PDHG steps tau={tau:.4g}, sigma={sigma:.4g} violate "
                         "tau (L_G/2 + sigma ||K||^2) < 1")
    return tau, sigma


def solve_pdhg(inst, max_iter=50000, tol=1e-6, x0=None):
    """Primal-dual iterations on the saddle problem

        min_{||x||_inf <= lambda} max_{||y||_inf <= 1}
            f(Z x) + (1/(2N)) y^T (Z x - lambda*kappa)

    with an explicit gradient step on f and over-relaxation theta = 1."""
    N, n = inst.n_samples, inst.n_features
    Z = inst.Z
    b = inst.center
    tau, sigma = pdhg_steps(inst)
    trace = Trace("pdhg", tau=tau, sigma=sigma, lam=inst.lam, kappa=inst.kappa,
                  lipschitz_f=inst.lipschitz_f)

    x = np.zeros(n) if x0 is None else project_linf_ball(x0, inst.lam)
    x_bar = x.copy()
    y = np.zeros(N)
    mu = inst.margins(x)
    w = -(grad_f(mu, inst) + y / (2.0 * N))
    kkt = kkt_residual(x, mu, w, inst)
    trace.record(iter=0, objective=subproblem_objective(x, mu, inst),
                 primal_residual=0.0, kkt_residual=kkt, rho=np.nan, elapsed_ms=0.0)
    best = (subproblem_objective(x, mu, inst), x, mu, w)

    t0 = time.perf_counter()
    status = Status.MAX_ITER
    for k in range(1, max_iter + 1):
        z_bar = inst.margins(x_bar)
        y_new = np.clip(y + sigma * (z_bar - b) / (2.0 * N), -1.0, 1.0)
        # mu_hat satisfies y_new/(2N) in dP(mu_hat) exactly
        mu = z_bar - 2.0 * N * (y_new - y) / sigma
        y = y_new

        z = inst.margins(x)
        grad = np.asarray(Z.T @ (grad_f(z, inst) + y / (2.0 * N))).ravel()
        x_new = project_linf_ball(x - tau * grad, inst.lam)
        x_bar = 2.0 * x_new - x
        x = x_new

        w = -(grad_f(mu, inst) + y / (2.0 * N))
        r_primal, r_mu, r_beta = kkt_residual(x, mu, w, inst, parts=True)
        kkt = max(r_primal, r_mu, r_beta)
        obj = subproblem_objective(x, inst.margins(x), inst)
        trace.record(iter=k, objective=obj, primal_residual=r_primal,
                     kkt_residual=kkt, rho=np.nan,
                     elapsed_ms=1e3 * (time.perf_counter() - t0))
        if not np.isfinite(obj):
            status = Status.DIVERGED
            break
        if obj < best[0]:
            best = (obj, x.copy(), mu.copy(), w.copy())
        if kkt <= tol:
            status = Status.CONVERGED
            break

    if status is Status.MAX_ITER:
        logger.warning("PDHG reached max_iter=%d, KKT residual %.2e", max_iter, kkt)
        _, x, mu, w = best
    return _solution(x, mu, w, inst, status, trace, tau=tau, sigma=sigma)


# =====
# Linearized ADMM
# =====
def solve_ladmm(inst, cfg, eta=None, inner=BoxQpSolverKind.ACTIVE_SET_CG, init=None):
    """LP-ADMM with the extra proximal term (eta/2)||mu - mu^k||^2 in the
    mu-update; eta defaults to 2 L_f"""
    if eta is None:
        eta = 2.0 * inst.lipschitz_f
    if not eta > inst.lipschitz_f:
        raise ValueError(f"eta must exceed L_f = {inst.lipschitz_f:.4g}, got {eta}")
    return run_admm(inst, cfg, inner, init=init, eta=eta, solver="ladmm")


# =====
# Two-block ADMM with semi-smooth Newton
# =====
def _sadmm_threshold(inst, rho):
    return 0.5 / (inst.n_samples * rho)


def _yblock_value(y, d1, d2, rho, inst, smooth):
    c = _sadmm_threshold(inst, rho)
    s = np.abs(y - d2)
    # rho times the Moreau envelope of (1/(2N))|.| at y - d2
    env = np.where(s <= c, 0.5 * rho * s ** 2, rho * c * s - 0.5 * rho * c ** 2)
    val = 0.5 * rho * np.sum((y - d1) ** 2) + np.sum(env)
    if smooth:
        val += np.sum(logloss(y) + 0.5 * (y - inst.center)) / inst.n_samples
    return float(val)


def _yblock_grad(y, d1, d2, rho, inst, smooth):
    c = _sadmm_threshold(inst, rho)
    g = rho * (y - d1) + rho * np.clip(y - d2, -c, c)
    if smooth:
        g += grad_f(y, inst)
    return g


def _yblock_hess(y, d2, rho, inst, smooth):
    c = _sadmm_threshold(inst, rho)
    h = rho + rho * (np.abs(y - d2) < c)
    if smooth:
        p = expit(y)
        h = h + p * (1.0 - p) / inst.n_samples
    return h


def yblock_bisection(d1, d2, rho, inst, smooth=True):
    """Coordinate-wise bisection on the monotone y-block gradient; the root
    lies within d1 +- 1/(N rho)"""
    width = 1.0 / (inst.n_samples * rho)
    lo, hi = d1 - width, d1 + width
    for _ in range(BISECTION_ITER):
        mid = 0.5 * (lo + hi)
        g = _yblock_grad(mid, d1, d2, rho, inst, smooth)
        lo = np.where(g < 0, mid, lo)
        hi = np.where(g < 0, hi, mid)
        if np.max(hi - lo) <= 1e-15 * max(1.0, float(np.max(np.abs(mid)))):
            break
    return 0.5 * (lo + hi)


def semi_smooth_newton(d1, d2, rho, inst, y0=None, smooth=True, full_output=False):
    """Minimise f(y) + (rho/2)||y - d1||^2 + rho * env(y - d2) with the
    diagonal generalized Hessian and Armijo backtracking.

    Raises NewtonFailure when the line search stalls or after 100 steps.
    `smooth=False` drops f."""
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    d1 = np.asarray(d1, dtype=float)
    d2 = np.asarray(d2, dtype=float)
    y = d1.copy() if y0 is None else np.array(y0, dtype=float)
    norms = []

    def done(it):
        if full_output:
            return y, {"iterations": it, "grad_norms": norms}
        return y

    for it in range(NEWTON_MAX_ITER + 1):
        g = _yblock_grad(y, d1, d2, rho, inst, smooth)
        norms.append(float(np.linalg.norm(g)))
        if norms[-1] <= NEWTON_TOL:
            return done(it)
        if it == NEWTON_MAX_ITER:
            break
        d = -g / _yblock_hess(y, d2, rho, inst, smooth)
        f0 = _yblock_value(y, d1, d2, rho, inst, smooth)
        slope = float(g @ d)
        # allow for rounding in the value once the decrease is below resolution
        slack = 10.0 * np.finfo(float).eps * max(1.0, abs(f0))
        t = 1.0
        while (_yblock_value(y + t * d, d1, d2, rho, inst, smooth)
               > f0 + ARMIJO_SLOPE * t * slope + slack):
            t *= ARMIJO_FACTOR
            if t < 1e-20:
                raise NewtonFailure(f"line search stalled at step {it}, "
                                    f"gradient norm {norms[-1]:.2e}")
        y = y + t * d
    raise NewtonFailure(f"no convergence in {NEWTON_MAX_ITER} Newton steps, "
                        f"gradient norm {norms[-1]:.2e}")


def solve_sadmm(inst, cfg, sigma=1.0, rho=10.0, inner=BoxQpSolverKind.ACTIVE_SET_CG,
                max_iter=None):
    """Two-block ADMM on Z beta = y, z = y - lambda*kappa.

    beta by a box-constrained least-squares solve, (y, z) jointly with z
    eliminated through its prox and y by semi-smooth Newton, then the
    relaxed dual steps u += sigma rho (Z beta - y), v += sigma rho (z - y + b).
    The reported mu is z + b and w is -u."""
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    if max_iter is None:
        max_iter = cfg.max_iter
    N, n = inst.n_samples, inst.n_features
    b = inst.center
    c = _sadmm_threshold(inst, rho)
    trace = Trace("sadmm", rho=rho, sigma=sigma, lam=inst.lam, kappa=inst.kappa,
                  inner=BoxQpSolverKind(inner).value, lipschitz_f=inst.lipschitz_f)

    x = np.zeros(n)
    y, z = np.zeros(N), np.zeros(N)
    u, v = np.zeros(N), np.zeros(N)
    mu = z + b
    trace.record(iter=0, objective=subproblem_objective(x, inst.margins(x), inst),
                 primal_residual=0.0, kkt_residual=kkt_residual(x, mu, -u, inst),
                 rho=rho, elapsed_ms=0.0)
    qp = BoxQpProblem(inst.Z, np.zeros(N), inst.lam)
    fallbacks = []

    t0 = time.perf_counter()
    status = Status.MAX_ITER
    for k in range(1, max_iter + 1):
        res = solve_box_qp(qp.with_rhs(y - u / rho), x, kind=inner,
                           tol=cfg.inner_tol, max_iter=cfg.inner_max_iter)
        x = res.x
        Ax = inst.margins(x)

        d1 = Ax + u / rho
        d2 = b + v / rho
        try:
            y = semi_smooth_newton(d1, d2, rho, inst, y0=y)
        except NewtonFailure as err:
            logger.debug("iteration %d: %s, using bisection", k, err)
            fallbacks.append(k)
            y = yblock_bisection(d1, d2, rho, inst)
        z = shifted_soft_threshold(y - d2, 0.0, c)

        u = u + sigma * rho * (Ax - y)
        v = v + sigma * rho * (z - y + b)

        r1 = float(np.linalg.norm(Ax - y))
        r2 = float(np.linalg.norm(z - y + b))
        mu = z + b
        kkt = kkt_residual(x, mu, -u, inst)
        obj = subproblem_objective(x, Ax, inst)
        trace.record(iter=k, objective=obj, primal_residual=max(r1, r2),
                     kkt_residual=kkt, rho=rho,
                     elapsed_ms=1e3 * (time.perf_counter() - t0),
                     inner_converged=res.converged)
        if not np.isfinite(obj):
            status = Status.DIVERGED
            break
        if max(r1, r2) <= cfg.primal_tol and kkt <= cfg.adaptive_kkt_tol:
            status = Status.CONVERGED
            break

    if fallbacks:
        logger.warning("semi-smooth Newton fell back to bisection in %d of %d iterations",
                       len(fallbacks), trace.iterations)
    trace.header["newton_fallbacks"] = fallbacks
    return _solution(x, mu, -u, inst, status, trace)


def solve_baseline(kind, inst, cfg, **kwargs):
    kind = BaselineKind(kind)
    if kind is BaselineKind.SUBGRADIENT:
        kwargs.setdefault("max_iter", cfg.max_iter)
        return solve_subgradient(inst, **kwargs)
    if kind is BaselineKind.PDHG:
        kwargs.setdefault("max_iter", cfg.max_iter)
        kwargs.setdefault("tol", cfg.primal_tol)
        return solve_pdhg(inst, **kwargs)
    if kind is BaselineKind.LADMM:
        return solve_ladmm(inst, cfg, **kwargs)
    return solve_sadmm(inst, cfg, **kwargs)
