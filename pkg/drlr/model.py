"""Problem definitions shared by every solver: data, the fixed-lambda
beta-subproblem, solutions, objective values and KKT residuals."""
import enum
import logging
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
import scipy.sparse as sp

from .loss import f_value, grad_f, logloss, logloss_grad
from .param_container import DrlrConfig


logger = logging.getLogger(__name__)

# value of the indicator of ||beta||_inf <= lambda outside the ball
INFEASIBLE = np.inf

__all__ = ["Dataset", "DrlrConfig", "SubproblemInstance", "Solution", "Status",
           "DimensionMismatchError", "INFEASIBLE", "drlr_objective",
           "subproblem_objective", "kkt_residual", "lambda_stationarity_residual",
           "full_kkt_residual", "bregman_divergence"]


class DimensionMismatchError(ValueError):
    pass


class Status(enum.Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iter"
    DIVERGED = "diverged"


def _readonly(arr):
    # scipy may canonicalise sparse index arrays in place, so only dense arrays are locked
    if not sp.issparse(arr):
        arr.setflags(write=False)
    return arr


class Dataset:
    """Feature matrix (dense or CSR) with labels in {-1, +1}"""

    def __init__(self, features, labels):
        if sp.issparse(features):
            features = sp.csr_matrix(features, dtype=float)
        else:
            features = np.array(features, dtype=float, order="C")
            if features.ndim != 2:
                raise ValueError(f"features must be a matrix, got {features.ndim} dims")
        labels = np.array(labels, dtype=float).ravel()

        N, n = features.shape
        if N < 1 or n < 1:
            raise ValueError(f"dataset must have N >= 1 and n >= 1, got {N}x{n}")
        if labels.shape != (N,):
            raise DimensionMismatchError(
                f"{labels.size} labels for {N} feature rows")
        if not np.isin(labels, [-1.0, 1.0]).all():
            bad = labels[~np.isin(labels, [-1.0, 1.0])][0]
            raise ValueError(f"labels must be -1 or +1, found {bad}")

        self.features = _readonly(features)
        self.labels = _readonly(labels)
        self._Z = None

    @property
    def n_samples(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    @property
    def is_sparse(self):
        return sp.issparse(self.features)

    def signed_matrix(self):
        """Z with row i equal to labels[i] * features[i]"""
        if self._Z is None:
            if self.is_sparse:
                Z = sp.csr_matrix(sp.diags(self.labels) @ self.features)
            else:
                Z = self.labels[:, None] * self.features
            self._Z = _readonly(Z)
        return self._Z

    def margins(self, beta):
        """Signed margins y_i beta^T x_i"""
        beta = np.asarray(beta, dtype=float)
        if beta.shape != (self.n_features,):
            raise DimensionMismatchError(
                f"beta has shape {beta.shape}, data has {self.n_features} features")
        return np.asarray(self.signed_matrix() @ beta).ravel()

    def subset(self, rows):
        rows = np.asarray(rows)
        return Dataset(self.features[rows], self.labels[rows])

    def __len__(self):
        return self.n_samples

    def __repr__(self):
        kind = "sparse" if self.is_sparse else "dense"
        return f"Dataset({self.n_samples}x{self.n_features}, {kind})"


class SubproblemInstance:
    """The beta-subproblem at a fixed lambda:
    min (1/N) sum[h(mu_i) + max(mu_i - lambda*kappa, 0)] + g(beta)
    s.t. Z beta = mu, g the indicator of ||beta||_inf <= lambda"""

    def __init__(self, Z, lam, kappa):
        if lam < 0:
            raise ValueError(f"lambda must be non-negative, got {lam}")
        if not kappa > 0:
            raise ValueError(f"kappa must be positive, got {kappa}")
        self.Z = Z
        self.lam = float(lam)
        self.kappa = float(kappa)

    @classmethod
    def from_dataset(cls, data, lam, kappa):
        return cls(data.signed_matrix(), lam, kappa)

    @property
    def n_samples(self):
        return self.Z.shape[0]

    @property
    def n_features(self):
        return self.Z.shape[1]

    @property
    def center(self):
        """Kink location lambda*kappa of the max term"""
        return self.lam * self.kappa

    @property
    def lipschitz_f(self):
        return 1.0 / (4.0 * self.n_samples)

    def with_lambda(self, lam):
        return SubproblemInstance(self.Z, lam, self.kappa)

    def margins(self, beta):
        return np.asarray(self.Z @ beta).ravel()

    def __repr__(self):
        return (f"SubproblemInstance({self.n_samples}x{self.n_features}, "
                f"lambda={self.lam:g}, kappa={self.kappa:g})")


@dataclass
class Solution:
    beta: np.ndarray
    lam: float
    objective: float
    kkt_residual: float
    status: Status
    trace: Any = None
    mu: Optional[np.ndarray] = None
    w: Optional[np.ndarray] = None
    iterations: int = 0
    info: dict = field(default_factory=dict)

    @property
    def converged(self):
        return self.status is Status.CONVERGED

    def to_dict(self, config=None):
        """JSON-ready summary; timings are left out"""
        d = {
            "beta": [float(b) for b in self.beta],
            "lambda": float(self.lam),
            "objective": float(self.objective),
            "kkt_residual": float(self.kkt_residual),
            "status": self.status.value,
        }
        if config is not None:
            d["config"] = config.to_dict()
        return d


def _check_dims(beta, mu, inst):
    if beta is not None and np.shape(beta) != (inst.n_features,):
        raise DimensionMismatchError(
            f"beta has shape {np.shape(beta)}, expected ({inst.n_features},)")
    if mu is not None and np.shape(mu) != (inst.n_samples,):
        raise DimensionMismatchError(
            f"mu has shape {np.shape(mu)}, expected ({inst.n_samples},)")


def _infeasible(beta, lam):
    return beta.size > 0 and np.max(np.abs(beta)) > lam


def drlr_objective(beta, lam, data, cfg):
    """Omega(lambda, beta) = lambda*eps + (1/N) sum[h(m_i) + max(m_i - lambda*kappa, 0)],
    m the signed margins; INFEASIBLE when ||beta||_inf > lambda"""
    if lam < 0:
        raise ValueError(f"lambda must be non-negative, got {lam}")
    beta = np.asarray(beta, dtype=float)
    m = data.margins(beta)
    if _infeasible(beta, lam):
        return INFEASIBLE
    loss = logloss(m) + np.maximum(m - lam * cfg.kappa, 0.0)
    return float(lam * cfg.epsilon + np.mean(loss))


def subproblem_objective(beta, mu, inst):
    """F(beta, mu) = (1/N) sum[h(mu_i) + max(mu_i - lambda*kappa, 0)] + g(beta)"""
    beta = np.asarray(beta, dtype=float)
    mu = np.asarray(mu, dtype=float)
    _check_dims(beta, mu, inst)
    if _infeasible(beta, inst.lam):
        return INFEASIBLE
    return float(np.mean(logloss(mu) + np.maximum(mu - inst.center, 0.0)))


def _at_kink(mu, center):
    return np.abs(mu - center) <= 1e-12 * max(1.0, abs(center))


def _at_bound(beta, lam):
    return np.abs(beta) >= lam - 1e-12 * max(1.0, lam)


def kkt_residual(beta, mu, w, inst, parts=False):
    """Largest violation of the three optimality conditions
    (i) ||Z beta - mu||_2,
    (ii) distance of -w to grad f(mu) + dP(mu) (2-norm over coordinates),
    (iii) distance of Z^T w to the normal cone of the box at beta (inf-norm)."""
    beta = np.asarray(beta, dtype=float)
    mu = np.asarray(mu, dtype=float)
    w = np.asarray(w, dtype=float)
    _check_dims(beta, mu, inst)
    if w.shape != mu.shape:
        raise DimensionMismatchError(f"w has shape {w.shape}, expected {mu.shape}")

    r_primal = float(np.linalg.norm(inst.margins(beta) - mu))

    # dP(mu_i) = c * sign(mu_i - a), the interval [-c, c] at the kink
    c = 0.5 / inst.n_samples
    g = grad_f(mu, inst)
    kink = _at_kink(mu, inst.center)
    point = g + c * np.sign(mu - inst.center)
    dist = np.where(kink,
                    np.maximum(np.abs(-w - g) - c, 0.0),
                    np.abs(-w - point))
    r_mu = float(np.linalg.norm(dist))

    s = np.asarray(inst.Z.T @ w).ravel()
    if inst.lam == 0:
        r_beta = 0.0
    else:
        bound = _at_bound(beta, inst.lam)
        viol = np.where(bound, np.maximum(-np.sign(beta) * s, 0.0), np.abs(s))
        r_beta = float(np.max(viol)) if viol.size else 0.0

    if parts:
        return r_primal, r_mu, r_beta
    return max(r_primal, r_mu, r_beta)


def max_branch_weights(mu, w, inst):
    """Weights t_i in [0, 1] of the max term recovered from -w in dF(mu)"""
    t = -inst.n_samples * np.asarray(w) - logloss_grad(mu)
    return np.clip(t, 0.0, 1.0)


def lambda_stationarity_residual(beta, mu, w, inst, epsilon):
    """Violation of eps - (kappa/N) sum t_i - ||Z^T w||_1 = 0
    (only >= 0 required at lambda = 0)"""
    t = max_branch_weights(mu, w, inst)
    nu = np.abs(np.asarray(inst.Z.T @ w).ravel())
    slope = epsilon - inst.kappa * np.mean(t) - nu.sum()
    if inst.lam == 0:
        return max(-slope, 0.0)
    return abs(slope)


def full_kkt_residual(beta, mu, w, inst, epsilon):
    return max(kkt_residual(beta, mu, w, inst),
               lambda_stationarity_residual(beta, mu, w, inst, epsilon))


def bregman_divergence(x, y, inst):
    """B_f(x, y) = f(x) - f(y) - <grad f(y), x - y>"""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return f_value(x, inst) - f_value(y, inst) - float(grad_f(y, inst) @ (x - y))
