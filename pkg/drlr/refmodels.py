"""Reference classifiers: logistic regression (LR), l_inf-regularized
logistic regression (RLR) and the DRLR model, with test accuracy."""
import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .boxqp import BoxQpSolverKind, estimate_spectral_bound
from .loss import logloss, logloss_grad, project_l1_ball
from .model import DimensionMismatchError
from .outer import golden_section_solve


logger = logging.getLogger(__name__)


class ModelKind(enum.Enum):
    LR = "lr"
    RLR = "rlr"
    DRLR = "drlr"


@dataclass
class LinearClassifier:
    beta: np.ndarray
    kind: ModelKind
    hyperparams: dict = field(default_factory=dict)
    converged: bool = True

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        if not np.all(np.isfinite(self.beta)):
            raise ValueError(f"{self.kind.value} coefficients are not finite")

    def decision_function(self, features):
        if features.shape[1] != self.beta.size:
            raise DimensionMismatchError(
                f"model has {self.beta.size} features, data has {features.shape[1]}")
        return np.asarray(features @ self.beta).ravel()

    def predict(self, features):
        """Labels in {-1, +1}, a zero score counts as +1"""
        return np.where(self.decision_function(features) >= 0, 1.0, -1.0)

    def score(self, data):
        return accuracy(self, data)


def accuracy(model, data):
    """Fraction of samples with sign(beta^T x_i) = y_i"""
    return float(np.mean(model.predict(data.features) == data.labels))


def logistic_objective(beta, data):
    return float(np.mean(logloss(data.margins(beta))))


def rlr_objective(beta, data, epsilon):
    return logistic_objective(beta, data) + epsilon * float(np.max(np.abs(beta)))


def _logistic_grad(beta, data):
    Z = data.signed_matrix()
    return np.asarray(Z.T @ logloss_grad(data.margins(beta))).ravel() / data.n_samples


def _lipschitz(data):
    return estimate_spectral_bound(data.signed_matrix()) / (4.0 * data.n_samples)


def prox_linf(v, t):
    """prox of t ||.||_inf by Moreau decomposition, v - P_{||.||_1 <= t}(v)"""
    return v - project_l1_ball(v, t)


def _fista(data, prox, step, tol, max_iter, name):
    """Accelerated proximal gradient with gradient-based restart.
    Stops when the fixed-point residual ||x - prox(x - step g)||/step <= tol."""
    n = data.n_features
    x = np.zeros(n)
    y = x.copy()
    t = 1.0
    for it in range(1, max_iter + 1):
        g_x = _logistic_grad(x, data)
        res = np.linalg.norm(x - prox(x - step * g_x, step)) / step
        if res <= tol:
            return x, True, it - 1

        x_new = prox(y - step * _logistic_grad(y, data), step)
        if float((y - x_new) @ (x_new - x)) > 0:
            # restart
            t = 1.0
            y = x_new.copy()
        else:
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            y = x_new + ((t - 1.0) / t_new) * (x_new - x)
            t = t_new
        x = x_new

    logger.warning("%s training hit max_iter=%d with residual %.2e, "
                   "the data may be separable", name, max_iter, res)
    return x, False, max_iter


def train_lr(data, tol=1e-8, max_iter=10000):
    """min (1/N) sum h(y_i beta^T x_i) with step 1/L, L = lambda_max(Z^T Z)/(4N)"""
    step = 1.0 / _lipschitz(data)
    beta, converged, iters = _fista(data, lambda v, s: v, step, tol, max_iter, "LR")
    return LinearClassifier(beta, ModelKind.LR, {"iterations": iters}, converged)


def train_rlr(data, epsilon, tol=1e-8, max_iter=10000):
    """min (1/N) sum h(y_i beta^T x_i) + epsilon ||beta||_inf"""
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    step = 1.0 / _lipschitz(data)
    beta, converged, iters = _fista(data, lambda v, s: prox_linf(v, s * epsilon),
                                    step, tol, max_iter, "RLR")
    return LinearClassifier(beta, ModelKind.RLR,
                            {"epsilon": epsilon, "iterations": iters}, converged)


def train_drlr(data, cfg, inner=BoxQpSolverKind.ACTIVE_SET_CG):
    sol = golden_section_solve(data, cfg, inner)
    return LinearClassifier(sol.beta, ModelKind.DRLR,
                            {"epsilon": cfg.epsilon, "kappa": cfg.kappa,
                             "lambda": sol.lam, "objective": sol.objective},
                            sol.converged)


def train_model(kind, data, cfg, inner=BoxQpSolverKind.ACTIVE_SET_CG):
    kind = ModelKind(kind)
    if kind is ModelKind.LR:
        return train_lr(data)
    if kind is ModelKind.RLR:
        return train_rlr(data, cfg.epsilon)
    return train_drlr(data, cfg, inner)
