"""Solvers for min ||A x - b||_2^2 s.t. ||x||_inf <= radius, the beta-update
of LP-ADMM. The gradient used throughout is A^T (A x - b)."""
import enum
import logging
from collections import namedtuple

import numpy as np
import scipy.sparse as sp

from .loss import project_linf_ball


logger = logging.getLogger(__name__)

POWER_ITER = 200
POWER_RTOL = 1e-10
SPECTRAL_INFLATION = 1.01
SPECTRAL_FLOOR = 1e-30
DEFAULT_TOL = 1e-8

BoxQpResult = namedtuple("BoxQpResult", ["x", "converged", "iterations"])


class BoxQpSolverKind(enum.Enum):
    APG = "apg"
    COORDINATE = "coord"
    ACTIVE_SET_CG = "ascg"


def _matvec(A, x):
    return np.asarray(A @ x).ravel()


def _rmatvec(A, r):
    return np.asarray(A.T @ r).ravel()


def estimate_spectral_bound(A, seed=0):
    """Upper estimate of lambda_max(A^T A) by power iteration, inflated by 1%
    so that 1/bound is a safe gradient step"""
    n = A.shape[1]
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(POWER_ITER):
        u = _rmatvec(A, _matvec(A, v))
        new = float(v @ u)
        norm_u = np.linalg.norm(u)
        if norm_u == 0:
            return SPECTRAL_FLOOR
        v = u / norm_u
        if abs(new - est) <= POWER_RTOL * abs(new):
            est = new
            break
        est = new
    # Rayleigh quotient of the last iterate is at least the previous estimate
    est = max(est, float(np.linalg.norm(_matvec(A, v)) ** 2))
    if est <= 0:
        return SPECTRAL_FLOOR
    return SPECTRAL_INFLATION * est


class BoxQpProblem:
    """min ||A x - b||^2 s.t. ||x||_inf <= radius.

    Spectral bound and column norms depend on A only and are carried
    over by `with_rhs`, so an LP-ADMM run estimates them once."""

    def __init__(self, A, b, radius, spectral_bound=None, column_sq_norms=None):
        if radius < 0:
            raise ValueError(f"radius must be non-negative, got {radius}")
        self.A = A
        self.b = np.asarray(b, dtype=float)
        if self.b.shape != (A.shape[0],):
            raise ValueError(f"b has shape {self.b.shape}, expected ({A.shape[0]},)")
        self.radius = float(radius)
        self._spectral_bound = spectral_bound
        self._column_sq_norms = column_sq_norms
        self._csc = None

    @property
    def n(self):
        return self.A.shape[1]

    @property
    def spectral_bound(self):
        if self._spectral_bound is None:
            self._spectral_bound = estimate_spectral_bound(self.A)
        return self._spectral_bound

    @property
    def column_sq_norms(self):
        if self._column_sq_norms is None:
            if sp.issparse(self.A):
                self._column_sq_norms = np.asarray(
                    self.A.multiply(self.A).sum(axis=0)).ravel()
            else:
                self._column_sq_norms = np.einsum("ij,ij->j", self.A, self.A)
        return self._column_sq_norms

    def column(self, j):
        if sp.issparse(self.A):
            if self._csc is None:
                self._csc = sp.csc_matrix(self.A)
            lo, hi = self._csc.indptr[j], self._csc.indptr[j + 1]
            return self._csc.indices[lo:hi], self._csc.data[lo:hi]
        return slice(None), self.A[:, j]

    def with_rhs(self, b):
        """Same A and radius, new right-hand side"""
        p = BoxQpProblem(self.A, b, self.radius,
                         self._spectral_bound, self._column_sq_norms)
        p._csc = self._csc
        return p

    def with_radius(self, radius):
        p = BoxQpProblem(self.A, self.b, radius,
                         self._spectral_bound, self._column_sq_norms)
        p._csc = self._csc
        return p

    def residual(self, x):
        return _matvec(self.A, x) - self.b

    def objective(self, x):
        return float(np.sum(self.residual(x) ** 2))

    def gradient(self, x):
        return _rmatvec(self.A, self.residual(x))

    def kkt_residual(self, x, g=None):
        """Largest coordinate violation of the box optimality conditions:
        |g_i| for interior x_i, max(g_i * sign(x_i), 0) at a bound"""
        if g is None:
            g = self.gradient(x)
        return box_kkt_violation(x, g, self.radius)


def box_kkt_violation(x, g, radius):
    if x.size == 0 or radius == 0:
        return 0.0
    at_bound = np.abs(x) >= radius
    viol = np.where(at_bound, np.maximum(g * np.sign(x), 0.0), np.abs(g))
    return float(np.max(viol))


def _start(p, x0):
    if x0 is None:
        return np.zeros(p.n)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (p.n,):
        raise ValueError(f"x0 has shape {x0.shape}, expected ({p.n},)")
    return project_linf_ball(x0, p.radius)


def solve_apg(p, x0=None, tol=DEFAULT_TOL, max_iter=10000):
    """Accelerated projected gradient with momentum k/(k+3), step 1/lambda_max(A^T A)
    and adaptive restart when the gradient opposes the last move"""
    x = _start(p, x0)
    if p.radius == 0:
        return BoxQpResult(np.zeros(p.n), True, 0)

    step = 1.0 / p.spectral_bound
    g = p.gradient(x)
    x_old, g_old = x, g
    best_x, best_obj = x, p.objective(x)
    k = 1
    for it in range(1, max_iter + 1):
        if box_kkt_violation(x, g, p.radius) <= tol:
            return BoxQpResult(x, True, it - 1)

        mom = k / (k + 3.0)
        y = x + mom * (x - x_old)
        # the gradient is affine in x
        g_y = g + mom * (g - g_old)
        x_new = project_linf_ball(y - step * g_y, p.radius)
        g_new = p.gradient(x_new)

        # restart the momentum when the step goes uphill
        if float(g_new @ (x_new - x)) > 0:
            k = 1
            x_old, g_old = x_new, g_new
        else:
            k += 1
            x_old, g_old = x, g
        x, g = x_new, g_new

        obj = p.objective(x)
        if obj < best_obj:
            best_x, best_obj = x, obj

    if box_kkt_violation(x, g, p.radius) <= tol:
        return BoxQpResult(x, True, max_iter)
    logger.debug("APG stopped after %d iterations, KKT %.2e",
                 max_iter, box_kkt_violation(x, g, p.radius))
    return BoxQpResult(best_x, False, max_iter)


def solve_coordinate(p, x0=None, tol=DEFAULT_TOL, max_iter=10000):
    """Cyclic exact coordinate minimisation with clamping.
    Zero columns are skipped and keep their starting value."""
    x = _start(p, x0)
    if p.radius == 0:
        return BoxQpResult(np.zeros(p.n), True, 0)

    d = p.column_sq_norms
    active = np.nonzero(d > 0)[0]
    r = p.residual(x)
    for sweep in range(1, max_iter + 1):
        max_move = 0.0
        for j in active:
            rows, col = p.column(j)
            g_j = float(col @ r[rows])
            new = min(max(x[j] - g_j / d[j], -p.radius), p.radius)
            delta = new - x[j]
            if delta != 0.0:
                x[j] = new
                r[rows] += delta * col
                max_move = max(max_move, abs(delta))
        if max_move <= tol:
            # refresh the residual to shed accumulated rounding
            r = p.residual(x)
            if max_move == 0.0 or p.kkt_residual(x) <= tol:
                return BoxQpResult(x, True, sweep)

    converged = p.kkt_residual(x) <= tol
    if not converged:
        logger.debug("coordinate minimisation stopped after %d sweeps", max_iter)
    return BoxQpResult(x, converged, max_iter)


def solve_active_set_cg(p, x0=None, tol=DEFAULT_TOL, max_iter=10000):
    """Conjugate gradient on the free set with projection onto the box.

    Bound set: |x_i| = radius and -g_i x_i >= 0; CG restarts whenever the free
    set changes or the projection alters a trial point."""
    x = _start(p, x0)
    if p.radius == 0:
        return BoxQpResult(np.zeros(p.n), True, 0)

    g = p.gradient(x)
    obj = p.objective(x)
    free_old = None
    r_old_sq = None
    dirn = None
    restart = True
    for it in range(1, max_iter + 1):
        bound = (np.abs(x) >= p.radius) & (-g * x >= 0)
        free = ~bound
        r = np.where(free, -g, 0.0)
        r_sq = float(r @ r)

        if r_sq == 0.0 or box_kkt_violation(x, g, p.radius) <= tol:
            # incremental gradient updates drift, confirm on a fresh one
            g = p.gradient(x)
            if box_kkt_violation(x, g, p.radius) <= tol:
                return BoxQpResult(x, True, it - 1)
            restart = True
            continue

        if restart or free_old is None or (free != free_old).any():
            dirn = r
        else:
            dirn = r + (r_sq / r_old_sq) * dirn
        free_old, r_old_sq = free, r_sq

        Ap = _matvec(p.A, dirn)
        curv = float(Ap @ Ap)
        slope = float(r @ dirn)
        if curv <= 0.0 or slope <= 0.0:
            restart = True
            dirn = r
            Ap = _matvec(p.A, dirn)
            curv, slope = float(Ap @ Ap), r_sq
            if curv <= 0.0:
                break
        alpha = slope / curv

        x_trial = x + alpha * dirn
        x_new = project_linf_ball(x_trial, p.radius)
        if np.array_equal(x_new, x_trial):
            g = g + alpha * _rmatvec(p.A, Ap)
            x = x_new
            obj = p.objective(x)
            restart = False
            continue

        # projected backtracking, then a plain projected gradient step
        new_obj = p.objective(x_new)
        tries = 0
        while new_obj > obj and tries < 30:
            alpha *= 0.5
            x_new = project_linf_ball(x + alpha * dirn, p.radius)
            new_obj = p.objective(x_new)
            tries += 1
        if new_obj > obj:
            x_new = project_linf_ball(x - g / p.spectral_bound, p.radius)
            new_obj = p.objective(x_new)
        x, obj = x_new, new_obj
        g = p.gradient(x)
        restart = True

    g = p.gradient(x)
    converged = box_kkt_violation(x, g, p.radius) <= tol
    if not converged:
        logger.debug("active-set CG stopped after %d iterations", max_iter)
    return BoxQpResult(x, converged, max_iter)


SOLVERS = {
    BoxQpSolverKind.APG: solve_apg,
    BoxQpSolverKind.COORDINATE: solve_coordinate,
    BoxQpSolverKind.ACTIVE_SET_CG: solve_active_set_cg,
}


def solve_box_qp(p, x0=None, kind=BoxQpSolverKind.ACTIVE_SET_CG,
                 tol=DEFAULT_TOL, max_iter=10000):
    kind = BoxQpSolverKind(kind)
    return SOLVERS[kind](p, x0, tol=tol, max_iter=max_iter)
