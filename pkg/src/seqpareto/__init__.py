"""Sequential Bayesian multi-objective search over finite candidate pools."""

from .core import (Direction, ObjectiveSpec, ParetoFront, dominates, extract_pareto_front,
                   nondomination_rank, normalize_inputs)
from .data import CandidatePool, generate_synthetic_pool, ingest_csv, subsample, write_pool_csv
from .errors import SeqParetoError
from .metrics import gd, hypervolume, igd, phv

__version__ = "0.1.0"

__all__ = [
    "CandidatePool", "Direction", "ObjectiveSpec", "ParetoFront", "SeqParetoError",
    "dominates", "extract_pareto_front", "gd", "generate_synthetic_pool", "hypervolume",
    "igd", "ingest_csv", "nondomination_rank", "normalize_inputs", "phv", "subsample",
    "write_pool_csv",
]
