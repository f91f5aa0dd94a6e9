"""Domain types, dominance, Pareto-front extraction and input normalization.

Every comparison is done in a *canonical* objective space where each
minimized objective is negated, so downstream code only ever maximizes.
Original units are kept on the objects for reporting.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, DimensionError, EmptySetError, ReferencePointError


class Direction(str, enum.Enum):
    MAXIMIZE = "max"
    MINIMIZE = "min"

    @property
    def sign(self) -> float:
        return 1.0 if self is Direction.MAXIMIZE else -1.0

    @classmethod
    def parse(cls, value: str | Direction) -> Direction:
        if isinstance(value, Direction):
            return value
        key = str(value).strip().lower()
        aliases = {"max": cls.MAXIMIZE, "maximize": cls.MAXIMIZE,
                   "min": cls.MINIMIZE, "minimize": cls.MINIMIZE}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown direction {value!r}") from None


SCENARIOS = {
    "max-max": (Direction.MAXIMIZE, Direction.MAXIMIZE),
    "max-min": (Direction.MAXIMIZE, Direction.MINIMIZE),
}


def parse_directions(text: str | Sequence[str | Direction]) -> tuple[Direction, ...]:
    """Accept a scenario name (``max-max``), a comma list or a sequence."""
    if isinstance(text, str):
        key = text.strip().lower()
        if key in SCENARIOS:
            return SCENARIOS[key]
        parts = [p for p in key.replace(";", ",").split(",") if p.strip()]
        return tuple(Direction.parse(p) for p in parts)
    return tuple(Direction.parse(p) for p in text)


@dataclass(frozen=True, eq=False)
class ObjectiveSpec:
    """Objective count, optimization directions and HV reference point.

    ``reference_point`` is in original units and may be ``None`` until a pool
    supplies its worst corner (see :meth:`with_worst_corner`).
    """

    directions: tuple[Direction, ...]
    reference_point: np.ndarray | None = None

    def __post_init__(self):
        dirs = tuple(Direction.parse(d) for d in self.directions)
        object.__setattr__(self, "directions", dirs)
        if not dirs:
            raise DimensionError("an ObjectiveSpec needs at least one objective")
        if self.reference_point is not None:
            ref = np.asarray(self.reference_point, dtype=float).reshape(-1)
            if ref.shape[0] != len(dirs):
                raise DimensionError(
                    f"reference point has length {ref.shape[0]}, expected {len(dirs)}")
            if not np.all(np.isfinite(ref)):
                raise DataError("reference point must be finite")
            ref.setflags(write=False)
            object.__setattr__(self, "reference_point", ref)

    @classmethod
    def from_scenario(cls, scenario: str, reference_point=None) -> ObjectiveSpec:
        return cls(parse_directions(scenario), reference_point)

    @property
    def m(self) -> int:
        return len(self.directions)

    @property
    def signs(self) -> np.ndarray:
        return np.array([d.sign for d in self.directions])

    @property
    def scenario(self) -> str:
        return "-".join(d.value for d in self.directions)

    def canonical(self, values) -> np.ndarray:
        """Sign-adjust objective values (minimized columns negated)."""
        arr = np.asarray(values, dtype=float)
        if arr.shape[-1] != self.m:
            raise DimensionError(f"expected {self.m} objectives, got {arr.shape[-1]}")
        return arr * self.signs

    def canonical_reference(self) -> np.ndarray:
        if self.reference_point is None:
            raise ReferencePointError("objective spec has no reference point")
        return self.reference_point * self.signs

    def worst_corner(self, objectives) -> np.ndarray:
        """Per-objective worst value of ``objectives`` in original units."""
        canon = self.canonical(np.atleast_2d(objectives))
        return canon.min(axis=0) * self.signs

    def with_reference(self, reference_point) -> ObjectiveSpec:
        return ObjectiveSpec(self.directions, reference_point)

    def with_worst_corner(self, objectives) -> ObjectiveSpec:
        return self.with_reference(self.worst_corner(objectives))

    def check_reference(self, objectives) -> None:
        """Raise unless every row weakly dominates the reference point."""
        canon = self.canonical(np.atleast_2d(objectives))
        bad = np.any(canon < self.canonical_reference(), axis=1)
        if np.any(bad):
            raise ReferencePointError(
                f"{int(bad.sum())} objective vector(s) fall below the reference point "
                f"{self.reference_point.tolist()} under directions {self.scenario}")

    def to_dict(self) -> dict:
        return {
            "directions": [d.value for d in self.directions],
            "reference_point": None if self.reference_point is None
            else [float(v) for v in self.reference_point],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> ObjectiveSpec:
        return cls(tuple(doc["directions"]), doc.get("reference_point"))


def _as_objectives(values, m: int | None = None) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(values, dtype=float))
    if arr.ndim != 2:
        raise DimensionError("objective set must be 2-D (points x objectives)")
    if m is not None and arr.shape[1] != m:
        raise DimensionError(f"expected {m} objectives, got {arr.shape[1]}")
    return arr


def dominates(a, b, spec: ObjectiveSpec) -> bool:
    """True iff ``a`` Pareto-dominates ``b`` under ``spec.directions``."""
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.shape[0] != spec.m or b.shape[0] != spec.m:
        raise DimensionError(
            f"dominates() needs two vectors of length {spec.m}, got {a.shape[0]} and {b.shape[0]}")
    sa, sb = a * spec.signs, b * spec.signs
    return bool(np.all(sa >= sb) and np.any(sa > sb))


def dominance_matrix(canon: np.ndarray) -> np.ndarray:
    """``out[i, j]`` is True when row ``i`` dominates row ``j`` (canonical values)."""
    ge = np.all(canon[:, None, :] >= canon[None, :, :], axis=2)
    gt = np.any(canon[:, None, :] > canon[None, :, :], axis=2)
    return ge & gt


def nondominated_mask(canon: np.ndarray, chunk: int = 512) -> np.ndarray:
    """Mask of rows not dominated by any other row (duplicates all kept)."""
    n = canon.shape[0]
    keep = np.ones(n, dtype=bool)
    for start in range(0, n, chunk):
        block = canon[start:start + chunk]
        ge = np.all(canon[:, None, :] >= block[None, :, :], axis=2)
        gt = np.any(canon[:, None, :] > block[None, :, :], axis=2)
        keep[start:start + chunk] = ~np.any(ge & gt, axis=0)
    return keep


@dataclass(frozen=True, eq=False)
class ParetoFront:
    """Non-dominated members of a source set, in ascending source-index order."""

    indices: np.ndarray
    objectives: np.ndarray
    spec: ObjectiveSpec
    inputs: np.ndarray | None = field(default=None)

    def __len__(self) -> int:
        return int(self.indices.shape[0])

    def canonical(self) -> np.ndarray:
        return self.spec.canonical(self.objectives)

    def as_set(self) -> set[tuple[float, ...]]:
        return {tuple(row) for row in self.objectives.tolist()}

    @classmethod
    def empty(cls, spec: ObjectiveSpec, d: int | None = None) -> ParetoFront:
        return cls(np.zeros(0, dtype=int), np.zeros((0, spec.m)), spec,
                   None if d is None else np.zeros((0, d)))


def pareto_indices(objectives, spec: ObjectiveSpec) -> np.ndarray:
    """Indices of the Pareto front, duplicates collapsed to the lowest index."""
    Y = _as_objectives(objectives, spec.m)
    if Y.shape[0] == 0:
        raise EmptySetError("cannot extract a Pareto front from an empty set")
    canon = spec.canonical(Y)
    idx = np.flatnonzero(nondominated_mask(canon))
    _, first = np.unique(canon[idx], axis=0, return_index=True)
    return np.sort(idx[first])


def extract_pareto_front(points, spec: ObjectiveSpec) -> ParetoFront:
    """Pareto front of ``points``.

    ``points`` is either an ``(n, m)`` objective array or a sequence of
    ``(design_point, objective_vector)`` pairs.
    """
    inputs = None
    if isinstance(points, np.ndarray):
        Y = _as_objectives(points, spec.m)
    else:
        pts = list(points)
        if not pts:
            raise EmptySetError("cannot extract a Pareto front from an empty set")
        first = pts[0]
        if isinstance(first, tuple) and len(first) == 2 and np.ndim(first[1]) == 1:
            inputs = np.array([np.asarray(x, dtype=float) for x, _ in pts])
            Y = _as_objectives([y for _, y in pts], spec.m)
        else:
            Y = _as_objectives(pts, spec.m)
    idx = pareto_indices(Y, spec)
    return ParetoFront(idx, Y[idx].copy(), spec, None if inputs is None else inputs[idx])


def nondomination_rank(points, spec: ObjectiveSpec) -> np.ndarray:
    """Front index of every point by iterative peeling (rank 0 is the front).

    Exact duplicates share a rank.
    """
    Y = _as_objectives(points, spec.m)
    if Y.shape[0] == 0:
        raise EmptySetError("cannot rank an empty set")
    canon = spec.canonical(Y)
    ranks = np.full(Y.shape[0], -1, dtype=int)
    remaining = np.arange(Y.shape[0])
    r = 0
    while remaining.size:
        mask = nondominated_mask(canon[remaining])
        ranks[remaining[mask]] = r
        remaining = remaining[~mask]
        r += 1
    return ranks


@dataclass(frozen=True, eq=False)
class InputStats:
    """Per-dimension min/max record used to map raw inputs onto ``[0, 1]``."""

    mins: np.ndarray
    maxs: np.ndarray

    @property
    def constant(self) -> np.ndarray:
        return self.maxs == self.mins

    def transform(self, raw) -> np.ndarray:
        raw = np.asarray(raw, dtype=float)
        span = np.where(self.constant, 1.0, self.maxs - self.mins)
        out = (raw - self.mins) / span
        return np.where(self.constant, 0.5, out)

    def inverse(self, normalized) -> np.ndarray:
        z = np.asarray(normalized, dtype=float)
        span = np.where(self.constant, 0.0, self.maxs - self.mins)
        return self.mins + z * span

    def to_dict(self) -> dict:
        return {"min": self.mins.tolist(), "max": self.maxs.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> InputStats:
        return cls(np.asarray(doc["min"], dtype=float), np.asarray(doc["max"], dtype=float))


def normalize_inputs(raw: Iterable) -> tuple[np.ndarray, InputStats]:
    """Min-max scale each input column to ``[0, 1]``; constant columns map to 0.5."""
    X = np.atleast_2d(np.asarray(raw, dtype=float))
    if X.size == 0:
        raise EmptySetError("no input rows to normalize")
    if not np.all(np.isfinite(X)):
        raise DataError("inputs contain non-finite values")
    stats = InputStats(X.min(axis=0), X.max(axis=0))
    return stats.transform(X), stats
