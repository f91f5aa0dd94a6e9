"""Front-quality indicators: GD, IGD, hypervolume, proportional HV, data usage."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .core import ObjectiveSpec, extract_pareto_front
from .errors import DimensionError, MetricError, ReferencePointError

CONVENTIONS = ("paper", "classic")


def _as_set(points, name: str) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.size == 0:
        raise MetricError(f"{name} set is empty")
    return np.atleast_2d(arr)


def _nearest_distances(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    if src.shape[1] != dst.shape[1]:
        raise DimensionError(f"objective count mismatch: {src.shape[1]} vs {dst.shape[1]}")
    diff = src[:, None, :] - dst[None, :, :]
    return np.sqrt(np.min(np.einsum("ijk,ijk->ij", diff, diff), axis=1))


def _aggregate(d: np.ndarray, convention: str) -> float:
    if convention == "paper":
        # divisor outside the square root, as printed in the original GD/IGD formulas
        return float(math.sqrt(float(np.sum(d ** 2))) / d.shape[0])
    if convention == "classic":
        return float(math.sqrt(float(np.mean(d ** 2))))
    raise ValueError(f"unknown convention {convention!r}; pick one of {CONVENTIONS}")


def gd(achieved, truth, convention: str = "paper") -> float:
    """Generational distance from the achieved set to the true front."""
    A = _as_set(achieved, "achieved")
    P = _as_set(truth, "truth")
    return _aggregate(_nearest_distances(A, P), convention)


def igd(achieved, truth, convention: str = "paper") -> float:
    """Inverted generational distance: true-front points to the achieved set."""
    A = _as_set(achieved, "achieved")
    P = _as_set(truth, "truth")
    return _aggregate(_nearest_distances(P, A), convention)


def hv2d(canon: np.ndarray, ref: np.ndarray) -> float:
    """Sorted sweep for two maximized objectives; points must weakly dominate ``ref``."""
    if canon.shape[0] == 0:
        return 0.0
    order = np.lexsort((-canon[:, 1], -canon[:, 0]))
    pts = canon[order]
    area = 0.0
    best_y = ref[1]
    for i in range(pts.shape[0]):
        best_y = max(best_y, pts[i, 1])
        nxt = pts[i + 1, 0] if i + 1 < pts.shape[0] else ref[0]
        area += (pts[i, 0] - nxt) * (best_y - ref[1])
    return float(area)


def hv3d(canon: np.ndarray, ref: np.ndarray) -> float:
    """Exact 3-D hypervolume by slicing along the third objective."""
    if canon.shape[0] == 0:
        return 0.0
    order = np.argsort(-canon[:, 2], kind="stable")
    pts = canon[order]
    vol = 0.0
    for i in range(pts.shape[0]):
        lower = pts[i + 1, 2] if i + 1 < pts.shape[0] else ref[2]
        depth = pts[i, 2] - lower
        if depth > 0:
            vol += depth * hv2d(pts[:i + 1, :2], ref[:2])
    return float(vol)


def hypervolume_canonical(canon, ref) -> float:
    """Hypervolume of maximized points w.r.t. ``ref`` (m in 1..3)."""
    canon = np.atleast_2d(np.asarray(canon, dtype=float))
    ref = np.asarray(ref, dtype=float).reshape(-1)
    if canon.size == 0:
        return 0.0
    if canon.shape[1] != ref.shape[0]:
        raise DimensionError(f"points have {canon.shape[1]} objectives, reference {ref.shape[0]}")
    if np.any(canon < ref):
        raise ReferencePointError("a front point does not dominate the reference point")
    m = canon.shape[1]
    if m == 1:
        return float(canon[:, 0].max() - ref[0])
    if m == 2:
        return hv2d(canon, ref)
    if m == 3:
        return hv3d(canon, ref)
    raise DimensionError(f"hypervolume supports at most 3 objectives, got {m}")


def hypervolume(front, ref, spec: ObjectiveSpec) -> float:
    """Hypervolume of ``front`` (original units) bounded by ``ref`` (original units)."""
    Y = np.asarray(front, dtype=float)
    if Y.size == 0:
        return 0.0
    return hypervolume_canonical(spec.canonical(np.atleast_2d(Y)),
                                 np.asarray(ref, dtype=float) * spec.signs)


def phv(achieved_front, true_front, ref, spec: ObjectiveSpec) -> float:
    """Ratio of achieved to true hypervolume; an empty achieved front scores 0."""
    truth = np.asarray(true_front, dtype=float)
    if truth.size == 0:
        raise MetricError("true front is empty")
    total = hypervolume(truth, ref, spec)
    if total <= 0:
        raise MetricError("true front has zero hypervolume; choose another reference point")
    achieved = np.asarray(achieved_front, dtype=float)
    if achieved.size == 0:
        return 0.0
    return hypervolume(achieved, ref, spec) / total


def data_usage(points_used: int, pool_size: int) -> float:
    if pool_size <= 0:
        raise MetricError("pool size must be positive")
    if not 0 < points_used <= pool_size:
        raise MetricError(f"points_used must be in (0, {pool_size}], got {points_used}")
    return points_used / pool_size


@dataclass(frozen=True, eq=False)
class ObjectiveScaler:
    """Min-max scaling of canonical objectives over a pool, used for reported HV."""

    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def from_objectives(cls, objectives, spec: ObjectiveSpec) -> ObjectiveScaler:
        canon = spec.canonical(np.atleast_2d(objectives))
        return cls(canon.min(axis=0), canon.max(axis=0))

    def scale_canonical(self, canon) -> np.ndarray:
        span = np.where(self.hi > self.lo, self.hi - self.lo, 1.0)
        return (np.asarray(canon, dtype=float) - self.lo) / span

    def normalized_hv(self, front, spec: ObjectiveSpec) -> float:
        Y = np.asarray(front, dtype=float)
        if Y.size == 0:
            return 0.0
        canon = self.scale_canonical(spec.canonical(np.atleast_2d(Y)))
        return hypervolume_canonical(canon, self.scale_canonical(spec.canonical_reference()))


@dataclass(frozen=True)
class MetricsReport:
    gd: float
    igd: float
    hv: float
    phv: float
    data_usage: float
    points_used: int

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(achieved, true_front, spec: ObjectiveSpec, scaler: ObjectiveScaler,
             points_used: int, pool_size: int, convention: str = "paper") -> MetricsReport:
    """Full report for the objective vectors ``achieved`` (any set; its front is taken).

    GD/IGD are in original objective units, HV is on pool-normalized objectives.
    """
    truth = np.atleast_2d(np.asarray(true_front, dtype=float))
    A = np.asarray(achieved, dtype=float)
    if A.size == 0:
        return MetricsReport(math.nan, math.nan, 0.0, 0.0,
                             0.0 if points_used == 0 else data_usage(points_used, pool_size),
                             points_used)
    front = extract_pareto_front(np.atleast_2d(A), spec).objectives
    return MetricsReport(
        gd=gd(front, truth, convention),
        igd=igd(front, truth, convention),
        hv=scaler.normalized_hv(front, spec),
        phv=phv(front, truth, spec.reference_point, spec),
        data_usage=data_usage(points_used, pool_size),
        points_used=int(points_used),
    )
