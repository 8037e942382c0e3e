"""Named seeded synthetic instances used by tests, benchmarks and examples"""
import functools
import logging
import os

import pandas as pd

from .data import Rng, add_label_noise, generate_synthetic
from .param_container import PARAM_DIR


logger = logging.getLogger(__name__)

SAMPLES_FILE = os.path.join(PARAM_DIR, "sample_datasets.csv")


@functools.lru_cache(maxsize=None)
def sample_table():
    return pd.read_csv(SAMPLES_FILE, index_col="name")


def load_sample_synthetic(name, seed=None):
    """(Dataset, beta_star) of a named instance, optionally reseeded"""
    df = sample_table()
    if name not in df.index:
        raise KeyError(f"unknown sample dataset '{name}', choose from {list(df.index)}")
    row = df.loc[name]
    seed = int(row["seed"]) if seed is None else seed
    logger.debug("Generating sample '%s' (%dx%d, seed %d)",
                 name, row["n_samples"], row["n_features"], seed)
    return generate_synthetic(int(row["n_samples"]), int(row["n_features"]), Rng(seed))


def create_noisy_synthetic(N, n, noise, seed):
    """Synthetic dataset with a fraction `noise` of labels flipped"""
    rng = Rng(seed)
    data, beta_star = generate_synthetic(N, n, rng)
    return add_label_noise(data, noise, rng), beta_star
