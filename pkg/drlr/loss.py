"""Scalar kernels: stable log-loss, the f/P/g split of the beta-subproblem,
closed-form proximal maps and projections."""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import expit


logger = logging.getLogger(__name__)

# sup of t / (e^t + 1) over the real line, rounded up
PHI_MAX = 0.2785


def _check_finite_input(u):
    u = np.asarray(u, dtype=float)
    if np.isnan(u).any():
        raise ValueError("log-loss evaluated at NaN")
    return u


def logloss(u):
    """h(u) = log(1 + exp(-u)), overflow-free for any double"""
    u = _check_finite_input(u)
    out = np.maximum(-u, 0.0) + np.log1p(np.exp(-np.abs(u)))
    return out if out.ndim else float(out)


def sigmoid(u):
    return expit(u)


def logloss_grad(u):
    """h'(u) = sigmoid(u) - 1"""
    u = _check_finite_input(u)
    return -expit(-u)


def phi(t):
    """t / (e^t + 1); its maximum bounds the optimal lambda"""
    t = np.asarray(t, dtype=float)
    return t * expit(-t)


def f_value(mu, inst):
    """Smooth part f(mu) = (1/N) sum[h(mu_i) + (mu_i - lambda*kappa)/2]"""
    mu = np.asarray(mu, dtype=float)
    return float(np.sum(logloss(mu) + 0.5 * (mu - inst.center)) / inst.n_samples)


def grad_f(mu, inst):
    """Gradient of f, coordinate i is (sigmoid(mu_i) - 1/2) / N"""
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (inst.n_samples,):
        raise ValueError(f"mu has shape {mu.shape}, expected ({inst.n_samples},)")
    return (expit(mu) - 0.5) / inst.n_samples


def P_value(mu, inst):
    """P(mu) = (1/(2N)) sum |mu_i - lambda*kappa|"""
    mu = np.asarray(mu, dtype=float)
    return float(np.sum(np.abs(mu - inst.center)) / (2.0 * inst.n_samples))


def shifted_soft_threshold(v, center, threshold):
    """argmin_t (1/2)(t - v)^2 + threshold * |t - center|, coordinate-wise"""
    d = np.asarray(v, dtype=float) - center
    return center + np.sign(d) * np.maximum(np.abs(d) - threshold, 0.0)


@dataclass(frozen=True)
class ProxShiftedAbs:
    """Proximal map of t -> weight * |t - center| scaled by 1/rho"""
    center: float
    weight: float
    rho: float

    def __post_init__(self):
        if not self.weight > 0:
            raise ValueError(f"weight must be positive, got {self.weight}")
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")

    @property
    def threshold(self):
        return self.weight / self.rho

    def __call__(self, v):
        return shifted_soft_threshold(v, self.center, self.threshold)


def prox_P(v, inst, rho):
    """prox of (1/rho) P: shifted soft-threshold at lambda*kappa
    with threshold 1/(2 N rho)"""
    prox = ProxShiftedAbs(center=inst.center, weight=0.5 / inst.n_samples, rho=rho)
    return prox(v)


def project_linf_ball(v, radius):
    """Clamp every coordinate to [-radius, radius]"""
    if radius < 0:
        raise ValueError(f"radius must be non-negative, got {radius}")
    return np.clip(np.asarray(v, dtype=float), -radius, radius)


def project_l1_ball(v, radius):
    """Euclidean projection onto {x : ||x||_1 <= radius} by sort and threshold"""
    v = np.asarray(v, dtype=float)
    if radius < 0:
        raise ValueError(f"radius must be non-negative, got {radius}")
    if np.abs(v).sum() <= radius:
        return v.copy()
    if radius == 0:
        return np.zeros_like(v)

    a = np.abs(v)
    a_decr = np.sort(a)[::-1]
    cumsum = np.cumsum(a_decr)
    theta = (cumsum - radius) / np.arange(1, a.size + 1)
    idx = np.max(np.nonzero(a_decr - theta > 0)[0])
    return np.sign(v) * np.maximum(a - theta[idx], 0.0)
