"""Deterministic random stream derivation.

Every stochastic component draws from its own generator, derived from the
master seed and a structured integer key.  Streams are therefore independent
of evaluation order and of how work is split across processes: the same
(master_seed, key) always yields the same draws.
"""

import numpy as np

# key domains, first element of every spawn key
DOMAIN_POPULATION = 0   # (pop_index, component)
DOMAIN_SAMPLING = 1     # (pop_index, design_index, replicate)
DOMAIN_BOOTSTRAP = 2    # (pop_index, design_index, estimator_index, statistic)
DOMAIN_STEMMAP = 3      # (component,)
DOMAIN_PLOT_SAMPLING = 4  # () — one sequential stream per plot-sampling study

# population component tags
COMPONENT_X1 = 0
COMPONENT_X2 = 1
COMPONENT_NOISE = 2


def stream(master_seed: int, *key: int) -> np.random.Generator:
    """Generator for the sub-stream addressed by an integer key path."""
    seq = np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(seq)
