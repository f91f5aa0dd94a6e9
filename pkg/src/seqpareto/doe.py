"""Space-filling baseline designs and their projection onto a finite pool."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, DimensionError
from .qmc import sobol_uniforms

# largest value strictly below 1.0, keeps every coordinate in [0, 1)
_BELOW_ONE = np.nextafter(1.0, 0.0)


class DoeMethod(str, enum.Enum):
    LHS = "lhs"
    UDS = "uds"
    SPHERE_PACKING = "spm"

    @classmethod
    def parse(cls, value) -> DoeMethod:
        if isinstance(value, DoeMethod):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {"lhs": cls.LHS, "uds": cls.UDS, "spm": cls.SPHERE_PACKING,
                   "sphere-packing": cls.SPHERE_PACKING, "spherepacking": cls.SPHERE_PACKING}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown DoE method {value!r}") from None


@dataclass(frozen=True)
class DoeRequest:
    method: DoeMethod
    n: int
    d: int
    seed: int = 0
    uds_random: bool = False

    def __post_init__(self):
        object.__setattr__(self, "method", DoeMethod.parse(self.method))
        if self.n < 1 or self.d < 1:
            raise ValueError(f"need n >= 1 and d >= 1, got n={self.n}, d={self.d}")


def lhs(n: int, d: int, seed: int | None = 0) -> np.ndarray:
    """Latin hypercube: one point per stratum ``[i/n, (i+1)/n)`` in every dimension."""
    rng = np.random.default_rng(seed)
    strata = np.stack([rng.permutation(n) for _ in range(d)], axis=1)
    pts = (strata + rng.uniform(size=(n, d))) / n
    return np.minimum(pts, _BELOW_ONE)


def uds(n: int, d: int, seed: int | None = 0, random: bool = False) -> np.ndarray:
    """Uniform design: leading points of a scrambled Sobol sequence.

    With ``random=True`` plain i.i.d. uniform sampling is used instead.
    """
    if random:
        return np.random.default_rng(seed).uniform(size=(n, d))
    return np.minimum(sobol_uniforms(n, d, seed), _BELOW_ONE)


def min_pairwise_distance(points: np.ndarray) -> float:
    P = np.atleast_2d(points)
    if P.shape[0] < 2:
        return float("inf")
    diff = P[:, None, :] - P[None, :, :]
    D = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    D[np.diag_indices_from(D)] = np.inf
    return float(D.min())


@dataclass(frozen=True, eq=False)
class PackingResult:
    points: np.ndarray
    radius: float
    history: np.ndarray  # min pairwise distance after each sweep


def sphere_packing_design(n: int, d: int, seed: int | None = 0, sweeps: int = 200,
                          proposals: int = 100, patience: int = 10) -> PackingResult:
    """Maximin-distance design by closest-pair coordinate exchange.

    Each sweep takes the closest pair, and moves one of its points to the
    best of ``proposals`` uniform locations if that raises the minimum
    pairwise distance. Stops after ``sweeps`` or after ``patience``
    consecutive sweeps without improvement.
    """
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(n, d))
    if n < 2:
        return PackingResult(np.minimum(X, _BELOW_ONE), float("inf"), np.zeros(0))
    diff = X[:, None, :] - X[None, :, :]
    D = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    D[np.diag_indices(n)] = np.inf
    best = float(D.min())
    history = []
    stall = 0
    for _ in range(sweeps):
        i, j = np.unravel_index(np.argmin(D), D.shape)
        improved = False
        for k in (i, j):
            cand = rng.uniform(size=(proposals, d))
            cd = np.sqrt(((cand[:, None, :] - X[None, :, :]) ** 2).sum(axis=2))
            cd[:, k] = np.inf
            # min distance of the whole design if point k moved to each proposal
            Dk = D.copy()
            Dk[k, :] = np.inf
            Dk[:, k] = np.inf
            rest = float(Dk.min())
            score = np.minimum(cd.min(axis=1), rest)
            p = int(np.argmax(score))
            if score[p] > best:
                X[k] = cand[p]
                D[k, :] = cd[p]
                D[:, k] = cd[p]
                D[k, k] = np.inf
                best = float(score[p])
                improved = True
                break
        history.append(best)
        stall = 0 if improved else stall + 1
        if stall >= patience:
            break
    return PackingResult(np.minimum(X, _BELOW_ONE), best / 2.0, np.array(history))


def sphere_packing(n: int, d: int, seed: int | None = 0, **kwargs) -> np.ndarray:
    return sphere_packing_design(n, d, seed, **kwargs).points


def generate(request: DoeRequest) -> np.ndarray:
    if request.method is DoeMethod.LHS:
        return lhs(request.n, request.d, request.seed)
    if request.method is DoeMethod.UDS:
        return uds(request.n, request.d, request.seed, random=request.uds_random)
    return sphere_packing(request.n, request.d, request.seed)


def nearest_unconsumed(x: np.ndarray, inputs: np.ndarray, consumed: np.ndarray) -> int:
    """Index of the closest unconsumed pool row (lowest index on ties)."""
    d2 = ((inputs - x) ** 2).sum(axis=1)
    d2 = np.where(consumed, np.inf, d2)
    k = int(np.argmin(d2))
    if not np.isfinite(d2[k]):
        raise CapacityError("candidate pool exhausted: every point is already consumed")
    return k


def project_to_pool(design, pool, consumed: np.ndarray | None = None) -> list[int]:
    """Map each design point, in order, to the nearest unconsumed pool point.

    ``pool`` is a :class:`~seqpareto.data.CandidatePool` or a raw ``(n, d)``
    array of normalized inputs. ``consumed`` (defaults to the pool's own
    flags) is updated in place.
    """
    inputs = getattr(pool, "inputs", pool)
    inputs = np.asarray(inputs, dtype=float)
    if consumed is None:
        consumed = getattr(pool, "consumed", None)
        if consumed is None:
            consumed = np.zeros(inputs.shape[0], dtype=bool)
    design = np.atleast_2d(np.asarray(design, dtype=float))
    if design.shape[1] != inputs.shape[1]:
        raise DimensionError(f"design has d={design.shape[1]}, pool has d={inputs.shape[1]}")
    if design.shape[0] > int((~consumed).sum()):
        raise CapacityError(
            f"design of {design.shape[0]} points exceeds {int((~consumed).sum())} available pool points")
    chosen = []
    for x in design:
        k = nearest_unconsumed(x, inputs, consumed)
        consumed[k] = True
        chosen.append(k)
    return chosen
