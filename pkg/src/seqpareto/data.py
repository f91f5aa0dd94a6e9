"""Candidate pools: CSV ingestion, synthetic benchmark generation, subsampling.

A pool is a finite table of pre-measured designs. Inputs are min-max
normalized over the full ingested pool; objectives stay in original units.
"""

from __future__ import annotations

import copy
import csv
import enum
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .core import (InputStats, ObjectiveSpec, ParetoFront, extract_pareto_front,
                   normalize_inputs, parse_directions)
from .errors import DataError, SchemaError
from .metrics import ObjectiveScaler
from .qmc import sobol_uniforms

log = logging.getLogger(__name__)

MANIFEST_VERSION = 1


@dataclass
class PoolManifest:
    source: str
    input_columns: list[str]
    objective_columns: list[str]
    directions: list[str]
    row_count: int
    digest: str
    dropped_rows: int = 0
    input_stats: dict | None = None
    notes: list[str] = field(default_factory=list)
    schema_version: int = MANIFEST_VERSION

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "source": self.source,
            "input_columns": list(self.input_columns),
            "objective_columns": list(self.objective_columns),
            "directions": list(self.directions),
            "row_count": self.row_count,
            "digest": self.digest,
            "dropped_rows": self.dropped_rows,
            "input_stats": self.input_stats,
            "notes": list(self.notes),
        }

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")
        return path


def content_digest(raw_inputs: np.ndarray, objectives: np.ndarray,
                   feature_names: Sequence[str], objective_names: Sequence[str]) -> str:
    """SHA-256 over column names and the float64 values (little-endian)."""
    h = hashlib.sha256()
    h.update(json.dumps([list(feature_names), list(objective_names)]).encode())
    h.update(np.ascontiguousarray(raw_inputs, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(objectives, dtype="<f8").tobytes())
    return h.hexdigest()


@dataclass(eq=False)
class CandidatePool:
    """Finite set of (normalized input, objective) records.

    ``consumed`` flags belong to whichever campaign currently owns the pool;
    use :meth:`fresh` to hand a clean copy to a new campaign.
    """

    raw_inputs: np.ndarray
    inputs: np.ndarray
    objectives: np.ndarray
    spec: ObjectiveSpec
    input_stats: InputStats
    feature_names: list[str]
    objective_names: list[str]
    manifest: PoolManifest
    consumed: np.ndarray = None
    true_front: ParetoFront = field(init=False)

    def __post_init__(self):
        n = self.objectives.shape[0]
        if n < 2:
            raise DataError(f"a pool needs at least 2 rows, got {n}")
        if self.inputs.shape[0] != n or self.raw_inputs.shape[0] != n:
            raise DataError("inputs and objectives have different row counts")
        if not (np.all(np.isfinite(self.inputs)) and np.all(np.isfinite(self.objectives))):
            raise DataError("pool contains non-finite values")
        if self.spec.m != self.objectives.shape[1]:
            raise DataError(f"spec has {self.spec.m} objectives, pool has {self.objectives.shape[1]}")
        if self.spec.reference_point is None:
            self.spec = self.spec.with_worst_corner(self.objectives)
        self.spec.check_reference(self.objectives)
        if self.consumed is None:
            self.consumed = np.zeros(n, dtype=bool)
        self.true_front = extract_pareto_front(self.objectives, self.spec)
        self.true_front = ParetoFront(self.true_front.indices, self.true_front.objectives,
                                      self.spec, self.inputs[self.true_front.indices])

    @property
    def n(self) -> int:
        return self.objectives.shape[0]

    @property
    def d(self) -> int:
        return self.inputs.shape[1]

    @property
    def m(self) -> int:
        return self.objectives.shape[1]

    @property
    def digest(self) -> str:
        return self.manifest.digest

    @property
    def scaler(self) -> ObjectiveScaler:
        return ObjectiveScaler.from_objectives(self.objectives, self.spec)

    def fresh(self) -> CandidatePool:
        """Copy with every consumed flag cleared."""
        out = copy.copy(self)
        out.consumed = np.zeros(self.n, dtype=bool)
        return out

    def with_spec(self, directions, reference_point=None) -> CandidatePool:
        """Same data under other directions; reference defaults to the worst corner."""
        spec = ObjectiveSpec(parse_directions(directions), reference_point)
        manifest = copy.deepcopy(self.manifest)
        manifest.directions = [d.value for d in spec.directions]
        return CandidatePool(self.raw_inputs, self.inputs, self.objectives, spec,
                             self.input_stats, list(self.feature_names),
                             list(self.objective_names), manifest)


def _build_pool(raw_inputs: np.ndarray, objectives: np.ndarray, feature_names, objective_names,
                directions, reference_point, source: str, dropped: int = 0,
                notes: Sequence[str] = ()) -> CandidatePool:
    inputs, stats = normalize_inputs(raw_inputs)
    spec = ObjectiveSpec(parse_directions(directions), reference_point)
    manifest = PoolManifest(
        source=source,
        input_columns=list(feature_names),
        objective_columns=list(objective_names),
        directions=[d.value for d in spec.directions],
        row_count=int(objectives.shape[0]),
        digest=content_digest(raw_inputs, objectives, feature_names, objective_names),
        dropped_rows=dropped,
        input_stats=stats.to_dict(),
        notes=list(notes),
    )
    return CandidatePool(raw_inputs, inputs, objectives, spec, stats,
                         list(feature_names), list(objective_names), manifest)


def _parse_cell(text: str) -> float | None:
    try:
        v = float(text)
    except (TypeError, ValueError):
        return None
    return v if math.isfinite(v) else None


def read_columns(path, columns: Sequence[str]) -> tuple[np.ndarray, int]:
    """Numeric values of ``columns`` from a CSV with a header row.

    Returns the ``(rows, len(columns))`` array and the number of rows dropped
    for an empty, non-numeric or non-finite cell in a selected column.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        missing = [c for c in columns if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {missing}; header is {header}")
        cols = [header.index(c) for c in columns]
        rows, dropped = [], 0
        for rec in reader:
            if not rec or all(not c.strip() for c in rec):
                continue
            vals = [_parse_cell(rec[i]) if i < len(rec) else None for i in cols]
            if any(v is None for v in vals):
                dropped += 1
                continue
            rows.append(vals)
    if dropped:
        log.warning("%s: dropped %d row(s) with missing or non-numeric values", path, dropped)
    return np.array(rows, dtype=float).reshape(len(rows), len(columns)), dropped


def csv_header(path) -> list[str]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        try:
            return [h.strip() for h in next(csv.reader(fh))]
        except StopIteration:
            raise DataError(f"{path} is empty") from None


def ingest_csv(path, input_columns: Sequence[str], objective_columns: Sequence[str],
               directions="max-max", reference_point=None) -> CandidatePool:
    """Read a UTF-8, comma-delimited CSV with a header row into a pool.

    Rows with an empty or non-numeric cell in any selected column are
    dropped; the count is logged and recorded in the manifest.
    """
    if not input_columns or not objective_columns:
        raise SchemaError("select at least one input and one objective column")
    arr, dropped = read_columns(path, list(input_columns) + list(objective_columns))
    if arr.shape[0] < 2:
        raise DataError(f"{path}: only {arr.shape[0]} valid row(s); need at least 2")
    d = len(input_columns)
    return _build_pool(arr[:, :d], arr[:, d:], input_columns, objective_columns, directions,
                       reference_point, source=str(path), dropped=dropped)


def write_pool_csv(pool: CandidatePool, path) -> Path:
    """Write raw inputs and objectives in the ingestion schema (lossless floats)."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(pool.feature_names) + list(pool.objective_names))
        for x, y in zip(pool.raw_inputs, pool.objectives):
            w.writerow([repr(float(v)) for v in x] + [repr(float(v)) for v in y])
    return path


class Family(str, enum.Enum):
    CONCAVE = "concave"
    CONVEX = "convex"
    DISCONNECTED = "disconnected"

    @classmethod
    def parse(cls, value) -> Family:
        if isinstance(value, Family):
            return value
        key = str(value).strip().lower().replace("front", "").strip("-_ ")
        return cls(key)


# objective scaling to GPa-like magnitudes: value = offset + scale * relative
OBJECTIVE_OFFSET = np.array([150.0, 100.0])
OBJECTIVE_SCALE = np.array([150.0, 80.0])

# share of the unit cube where the secondary inputs are on their optimum
ON_FRONT_FRACTION = 0.06
OFF_FRONT_DROP = 0.5
BOWL_CURVATURE = 10.0


def trade_off_curve(family: Family, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Curve ``(A(t), B(t))`` for ``t`` in ``[0, 1]``: A falls from 1, B rises from 0.

    Shape names follow the minimization convention: a concave front bulges
    toward the worst corner, a convex one toward the ideal point.
    """
    theta = 0.5 * np.pi * t
    if family is Family.CONCAVE:
        # quarter circle centred on the ideal point (1, 1)
        return 1.0 - np.sin(theta), 1.0 - np.cos(theta)
    if family is Family.CONVEX:
        return np.cos(theta), np.sin(theta)
    # ZDT3-style profile; the non-monotone parts are dominated and split the front
    g = 1.0 - np.sqrt(t) - t * np.sin(10.0 * np.pi * t)
    return 1.0 - t, (1.0 - g) / 2.0


def on_front_radius(k: int) -> float:
    """Radius of the centred k-ball whose volume is ``ON_FRONT_FRACTION``."""
    log_unit_ball = 0.5 * k * np.log(np.pi) - gammaln(0.5 * k + 1.0)
    return float(np.exp((np.log(ON_FRONT_FRACTION) - log_unit_ball) / k))


def synthetic_objectives(family, X: np.ndarray) -> np.ndarray:
    """Noise-free relative objectives ``(n, 2)``, both to be maximized.

    The first input places a design along the trade-off curve. The remaining
    inputs shrink it toward the origin, like the distance function of the
    DTLZ problems: they are optimal inside a centred ball holding
    ``ON_FRONT_FRACTION`` of the cube, and leaving the ball costs a fixed
    drop followed by a Gaussian-shaped decay in the distance.
    """
    family = Family.parse(family)
    X = np.atleast_2d(X)
    A, B = trade_off_curve(family, X[:, 0])
    rest = X[:, 1:]
    if rest.shape[1]:
        excess = np.clip(np.linalg.norm(rest - 0.5, axis=1) - on_front_radius(rest.shape[1]), 0.0, None)
        s = excess ** 2
    else:
        s = np.zeros(X.shape[0])
    rho = (1.0 - OFF_FRONT_DROP * (s > 0)) * np.exp(-BOWL_CURVATURE * s)
    return np.stack([rho * A, rho * B], axis=1)


def to_physical(rel: np.ndarray, directions) -> np.ndarray:
    """Map relative (maximized) objectives to reported units.

    A minimized objective is reflected so that its best values are the
    smallest ones; the geometry of the trade-off is unchanged.
    """
    signs = np.array([d.sign for d in parse_directions(directions)])
    base = np.where(signs > 0, OBJECTIVE_OFFSET, OBJECTIVE_OFFSET + OBJECTIVE_SCALE)
    return base + signs * OBJECTIVE_SCALE * rel


def generate_synthetic_pool(family="concave", n: int = 402, d: int = 7, noise: float = 0.01,
                            seed: int = 0, directions="max-max",
                            reference_point=None) -> CandidatePool:
    """Benchmark pool with a known trade-off geometry.

    Inputs are scrambled-Sobol points; objectives follow
    :func:`synthetic_objectives` plus Gaussian noise of relative scale
    ``noise``, then :func:`to_physical` for the requested directions. The
    true front is extracted from the generated rows, never assumed.
    """
    if n < 20:
        raise DataError(f"synthetic pools need n >= 20, got {n}")
    if d < 1:
        raise DataError("d must be >= 1")
    family = Family.parse(family)
    X = sobol_uniforms(n, d, seed)
    rel = synthetic_objectives(family, X)
    if noise > 0:
        rel = rel + noise * np.random.default_rng([seed, 1]).standard_normal(rel.shape)
    Y = to_physical(rel, directions)
    names = [f"x{i + 1}" for i in range(d)]
    gen = f"synthetic:{family.value}?n={n}&d={d}&noise={noise!r}&seed={seed}"
    return _build_pool(X, Y, names, ["f1", "f2"], directions, reference_point, source=gen)


def subsample(pool: CandidatePool, cap: int, seed: int = 0) -> CandidatePool:
    """Uniform subsample without replacement (row order preserved).

    Normalization statistics and the reference point are inherited from the
    parent pool; the true front is recomputed.
    """
    if cap < 2:
        raise DataError(f"cap must be >= 2, got {cap}")
    if cap > pool.n:
        raise DataError(f"cap {cap} exceeds pool size {pool.n}")
    rng = np.random.default_rng([seed, 2])
    keep = np.sort(rng.choice(pool.n, size=cap, replace=False))
    raw, Y = pool.raw_inputs[keep], pool.objectives[keep]
    manifest = copy.deepcopy(pool.manifest)
    manifest.row_count = cap
    manifest.digest = content_digest(raw, Y, pool.feature_names, pool.objective_names)
    if cap != pool.n:
        manifest.notes.append(f"subsample of {pool.digest[:16]} cap={cap} seed={seed}")
    return CandidatePool(raw, pool.inputs[keep], Y, pool.spec, pool.input_stats,
                         list(pool.feature_names), list(pool.objective_names), manifest)
