import dataclasses
import functools
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Optional

import pandas as pd


logger = logging.getLogger(__name__)

PARAM_DIR = os.path.join(os.path.dirname(__file__), "parameters")
DEFAULTS_FILE = os.path.join(PARAM_DIR, "defaults.csv")

INT_PARAMS = ["max_iter", "max_evals", "inner_max_iter", "seed"]


@functools.lru_cache(maxsize=None)
def read_default_params(fname=DEFAULTS_FILE):
    """Load the table of default solver parameters,
    indexed by parameter name"""
    logger.debug("Reading default parameters from %s", fname)
    df = pd.read_csv(fname, index_col="name")
    if "value" not in df.columns:
        raise ValueError(f"parameter file {fname} has no 'value' column")
    return df


def default_param(name):
    """Default value of one parameter, None if left empty in the table"""
    df = read_default_params()
    if name not in df.index:
        raise KeyError(f"no default for parameter '{name}'")
    val = df.loc[name, "value"]
    if pd.isna(val):
        return None
    if name in INT_PARAMS:
        return int(val)
    return float(val)


def _default(name):
    return field(default_factory=functools.partial(default_param, name))


@dataclass(frozen=True)
class DrlrConfig:
    """Model and solver parameters of Wasserstein DRLR.

    Defaults are read from `parameters/defaults.csv`.

    Inputs
    ------
    - epsilon : float, Wasserstein radius
    - kappa : float, label reliability, large values mean clean labels
    - rho0 : float, initial penalty of the augmented Lagrangian
    - gamma : float, penalty growth per iteration, 1 keeps it constant
    - primal_tol : float, stop when norm(Z beta - mu) <= primal_tol
    - max_iter : int, LP-ADMM iteration cap per subproblem
    - outer_tol : float or None, golden-section interval width;
      None means outer_rel_tol * lambda upper bound
    - seed : int, seed for data generation and splits
    """
    epsilon: float = _default("epsilon")
    kappa: float = _default("kappa")
    rho0: float = _default("rho0")
    gamma: float = _default("gamma")
    primal_tol: float = _default("primal_tol")
    max_iter: int = _default("max_iter")
    outer_tol: Optional[float] = _default("outer_tol")
    outer_rel_tol: float = _default("outer_rel_tol")
    max_evals: int = _default("max_evals")
    inner_tol: float = _default("inner_tol")
    inner_max_iter: int = _default("inner_max_iter")
    adaptive_kkt_tol: float = _default("adaptive_kkt_tol")
    rho_cap_factor: float = _default("rho_cap_factor")
    seed: int = _default("seed")

    def __post_init__(self):
        for name in ["epsilon", "kappa", "rho0", "primal_tol", "outer_rel_tol",
                     "inner_tol", "adaptive_kkt_tol", "rho_cap_factor"]:
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be positive, got {val}")
        if not self.gamma >= 1:
            raise ValueError(f"gamma must be >= 1, got {self.gamma}")
        if self.outer_tol is not None and not self.outer_tol > 0:
            raise ValueError(f"outer_tol must be positive, got {self.outer_tol}")
        for name in ["max_iter", "max_evals", "inner_max_iter"]:
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a non-negative 64-bit integer, got {self.seed}")

    @property
    def adaptive(self):
        return self.gamma > 1.0

    def interval_tol(self, lambda_hi):
        """Golden-section stopping width for a bracket ending at lambda_hi"""
        if self.outer_tol is not None:
            return self.outer_tol
        return self.outer_rel_tol * lambda_hi

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return dataclasses.asdict(self)

    def to_frame(self):
        """Parameters with their units and descriptions"""
        df = read_default_params()[["unit", "description"]].copy()
        df.insert(0, "value", pd.Series(self.to_dict(), dtype=object))
        return df
