"""Seeded quasi-random streams (scrambled Sobol) used by sampling code."""

from __future__ import annotations

import warnings

import numpy as np
from scipy.stats import norm, qmc

# keeps norm.ppf finite
_EPS = 1e-10


def sobol_uniforms(n: int, d: int, seed: int | None) -> np.ndarray:
    """First ``n`` points of a scrambled Sobol sequence in ``[0, 1)^d``."""
    if n < 1 or d < 1:
        raise ValueError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
    engine = qmc.Sobol(d=d, scramble=True, seed=seed)
    with warnings.catch_warnings():
        # balance warning for non power-of-two n is irrelevant here
        warnings.simplefilter("ignore", UserWarning)
        return engine.random(n)


def sobol_normals(n: int, d: int, seed: int | None) -> np.ndarray:
    """Standard normal draws obtained by inverse-CDF mapping of Sobol points."""
    u = sobol_uniforms(n, d, seed)
    return norm.ppf(np.clip(u, _EPS, 1.0 - _EPS))
