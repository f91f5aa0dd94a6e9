"""Hypervolume-improvement acquisition: box decomposition, HVI, qHVI and MC qEHVI.

All internals work on canonical (maximized) objectives. The non-dominated
region above the reference point is partitioned into axis-aligned boxes; the
improvement of a point ``z`` is then the summed overlap of ``[lower, z]``
with every box, which vectorizes over samples and candidates. The joint
improvement of a batch uses inclusion-exclusion over the ``2^q - 1``
non-empty subsets, where the intersection of the subset's dominated regions
is the region dominated by the componentwise minimum.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import ObjectiveSpec, ParetoFront, nondominated_mask
from .errors import CombinatorialLimitError, DimensionError
from .qmc import sobol_uniforms
from .surrogate import GpModel, batched_cholesky, posterior_cov, predict, standard_normals

MAX_BATCH = 12


@dataclass(frozen=True)
class AcquisitionConfig:
    q: int = 1
    mc_samples: int = 32
    num_restarts: int = 10
    raw_samples: int = 402
    bounds: tuple[float, float] = (0.0, 1.0)
    step_start: float = 0.1
    step_min: float = 1e-3

    def __post_init__(self):
        if self.q < 1:
            raise ValueError("q must be >= 1")
        if self.mc_samples < 16:
            raise ValueError("mc_samples must be >= 16")
        if self.num_restarts < 1 or self.raw_samples < self.num_restarts:
            raise ValueError("need 1 <= num_restarts <= raw_samples")
        if tuple(self.bounds) != (0.0, 1.0):
            raise ValueError("the design space is the normalized unit cube; bounds must be (0, 1)")


@dataclass(frozen=True, eq=False)
class BoxDecomposition:
    """Disjoint boxes covering the non-dominated region above the reference.

    Upper corners may be ``+inf``.
    """

    lower: np.ndarray
    upper: np.ndarray
    front: np.ndarray
    ref: np.ndarray

    def __len__(self) -> int:
        return self.lower.shape[0]

    def improvement(self, z) -> np.ndarray:
        """Hypervolume improvement of canonical point(s) ``z`` of shape ``(..., m)``."""
        z = np.asarray(z, dtype=float)
        top = np.minimum(z[..., None, :], self.upper)
        ext = np.clip(top - self.lower, 0.0, None)
        return np.prod(ext, axis=-1).sum(axis=-1)


def _front_array(front) -> np.ndarray | None:
    if isinstance(front, ParetoFront):
        return front.objectives
    if front is None:
        return None
    return np.asarray(front, dtype=float)


def box_decomposition(front_canon, ref_canon) -> BoxDecomposition:
    """Partition ``{y >= ref : y not dominated by front}`` into boxes (m = 2 or 3)."""
    ref = np.asarray(ref_canon, dtype=float).reshape(-1)
    m = ref.shape[0]
    P = np.asarray(front_canon, dtype=float).reshape(-1, m)
    # points outside the ref orthant dominate nothing above it
    P = P[np.all(P > ref, axis=1)] if P.size else P
    if P.shape[0]:
        P = P[nondominated_mask(P)]
        P = np.unique(P, axis=0)
    if m == 2:
        lower, upper = _boxes_2d(P, ref)
    elif m == 3:
        lower, upper = _boxes_grid(P, ref)
    else:
        raise DimensionError(f"box decomposition supports m in {{2, 3}}, got {m}")
    return BoxDecomposition(lower, upper, P, ref)


def _boxes_2d(P: np.ndarray, ref: np.ndarray):
    inf = np.inf
    if P.shape[0] == 0:
        return ref[None, :].copy(), np.array([[inf, inf]])
    P = P[np.argsort(-P[:, 0], kind="stable")]
    lows, ups = [[P[0, 0], ref[1]]], [[inf, inf]]
    for i in range(P.shape[0] - 1):
        lows.append([P[i + 1, 0], P[i, 1]])
        ups.append([P[i, 0], inf])
    lows.append([ref[0], P[-1, 1]])
    ups.append([P[-1, 0], inf])
    return np.array(lows), np.array(ups)


def _boxes_grid(P: np.ndarray, ref: np.ndarray):
    m = ref.shape[0]
    edges = [np.unique(np.concatenate([[ref[k]], P[:, k]])) for k in range(m)]
    bounds = [(e, np.append(e[1:], np.inf)) for e in edges]
    grids_lo = np.meshgrid(*[b[0] for b in bounds], indexing="ij")
    grids_hi = np.meshgrid(*[b[1] for b in bounds], indexing="ij")
    lower = np.stack([g.reshape(-1) for g in grids_lo], axis=1)
    upper = np.stack([g.reshape(-1) for g in grids_hi], axis=1)
    if P.shape[0]:
        covered = np.zeros(lower.shape[0], dtype=bool)
        for p in P:
            covered |= np.all(upper <= p, axis=1)
        lower, upper = lower[~covered], upper[~covered]
    return lower, upper


def _subset_masks(q: int) -> tuple[np.ndarray, np.ndarray]:
    if q > MAX_BATCH:
        raise CombinatorialLimitError(f"q={q} exceeds the inclusion-exclusion limit {MAX_BATCH}")
    masks, signs = [], []
    for r in range(1, q + 1):
        for combo in itertools.combinations(range(q), r):
            mask = np.zeros(q, dtype=bool)
            mask[list(combo)] = True
            masks.append(mask)
            signs.append(1.0 if r % 2 else -1.0)
    return np.array(masks), np.array(signs)


def qhvi_canonical(Y, boxes: BoxDecomposition) -> np.ndarray:
    """Joint improvement of batches ``Y`` with shape ``(..., q, m)`` (canonical)."""
    Y = np.asarray(Y, dtype=float)
    q = Y.shape[-2]
    if q == 1:
        return boxes.improvement(Y[..., 0, :])
    masks, signs = _subset_masks(q)
    total = np.zeros(Y.shape[:-2])
    for mask, sign in zip(masks, signs):
        total += sign * boxes.improvement(Y[..., mask, :].min(axis=-2))
    return np.maximum(total, 0.0)


def _canonical_inputs(front, ref, spec: ObjectiveSpec | None):
    P = _front_array(front)
    ref = np.asarray(ref, dtype=float).reshape(-1)
    signs = np.ones(ref.shape[0]) if spec is None else spec.signs
    Pc = np.zeros((0, ref.shape[0])) if P is None or P.size == 0 else P.reshape(-1, ref.shape[0]) * signs
    return Pc, ref * signs, signs


def hvi(front, ref, y_new, spec: ObjectiveSpec) -> float:
    """Hypervolume gained by adding ``y_new`` to ``front`` (original units)."""
    Pc, rc, signs = _canonical_inputs(front, ref, spec)
    y = np.asarray(y_new, dtype=float).reshape(-1)
    if y.shape[0] != rc.shape[0]:
        raise DimensionError(f"y_new has {y.shape[0]} objectives, expected {rc.shape[0]}")
    return float(box_decomposition(Pc, rc).improvement(y * signs))


def qhvi_joint(front, ref, Y, spec: ObjectiveSpec) -> float:
    """Measure of the union of regions newly dominated by the rows of ``Y``."""
    Pc, rc, signs = _canonical_inputs(front, ref, spec)
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if Y.shape[1] != rc.shape[0]:
        raise DimensionError(f"Y has {Y.shape[1]} objectives, expected {rc.shape[0]}")
    return float(qhvi_canonical(Y * signs, box_decomposition(Pc, rc)))


class _QehviEvaluator:
    """Scores candidate batches with a fixed set of quasi-random base samples."""

    def __init__(self, models: Sequence[GpModel], boxes: BoxDecomposition, signs: np.ndarray,
                 base: np.ndarray):
        self.models = list(models)
        self.boxes = boxes
        self.signs = signs
        self.base = base

    def __call__(self, Xb: np.ndarray) -> np.ndarray:
        """``Xb`` has shape ``(B, q, d)``; returns ``(B,)`` MC estimates."""
        Xb = np.asarray(Xb, dtype=float)
        B, q, _ = Xb.shape
        z = self.base[:, :q, :]
        mc = z.shape[0]
        if q == 1:
            flat = Xb[:, 0, :]
            samples = np.empty((B, mc, len(self.models)))
            for k, model in enumerate(self.models):
                mean, var = predict(model, flat)
                samples[:, :, k] = (self.signs[k] * mean)[:, None] + np.sqrt(var)[:, None] * z[None, :, 0, k]
            return self.boxes.improvement(samples).mean(axis=1)
        # canonical row order makes the estimate exactly permutation invariant
        order = np.lexsort(np.moveaxis(Xb[..., ::-1], -1, 0), axis=-1)
        Xb = np.take_along_axis(Xb, order[..., None], axis=1)
        samples = np.empty((B, mc, q, len(self.models)))
        for k, model in enumerate(self.models):
            mean, cov = posterior_cov(model, Xb)
            L = batched_cholesky(cov)
            samples[..., k] = (self.signs[k] * mean)[:, None, :] + np.einsum("sq,bpq->bsp", z[:, :, k], L)
        return qhvi_canonical(samples, self.boxes).mean(axis=1)


def _evaluator(models, front, ref, cfg: AcquisitionConfig, seed, spec, q: int) -> _QehviEvaluator:
    Pc, rc, signs = _canonical_inputs(front, ref, spec)
    if len(models) != rc.shape[0]:
        raise DimensionError(f"{len(models)} models for {rc.shape[0]} objectives")
    base = standard_normals(cfg.mc_samples, max(cfg.q, q), rc.shape[0], True, seed)
    return _QehviEvaluator(models, box_decomposition(Pc, rc), signs, base)


def qehvi(models: Sequence[GpModel], front, ref, X, cfg: AcquisitionConfig,
          seed: int | None = 0, spec: ObjectiveSpec | None = None) -> float:
    """Monte-Carlo qEHVI of the batch ``X`` (``q x d``).

    ``models`` predict objectives in original units; ``front`` and ``ref`` are
    in original units too and ``spec`` supplies the directions (all
    maximized when omitted). Fixed ``seed`` gives a deterministic estimate.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    ev = _evaluator(models, front, ref, cfg, seed, spec, X.shape[0])
    return float(ev(X[None, :, :])[0])


def raw_candidates(cfg: AcquisitionConfig, d: int, seed: int | None) -> np.ndarray:
    """The quasi-random points scored before local refinement."""
    return sobol_uniforms(cfg.raw_samples, d, None if seed is None else seed + 7919)


def _pattern_search(score, x0: np.ndarray, v0: np.ndarray, step0: float, step_min: float,
                    max_rounds: int = 400) -> tuple[np.ndarray, np.ndarray]:
    x, v = x0.copy(), v0.copy()
    R, d = x.shape
    h = np.full(R, step0)
    offsets = np.concatenate([np.eye(d), -np.eye(d)])
    for _ in range(max_rounds):
        active = np.flatnonzero(h >= step_min)
        if active.size == 0:
            break
        cand = np.clip(x[active, None, :] + offsets[None] * h[active, None, None], 0.0, 1.0)
        vals = score(cand.reshape(-1, d)).reshape(active.size, 2 * d)
        best = np.argmax(vals, axis=1)
        best_v = vals[np.arange(active.size), best]
        better = best_v > v[active]
        moved = active[better]
        x[moved] = cand[better, best[better]]
        v[moved] = best_v[better]
        h[active[~better]] *= 0.5
    return x, v


def maximize_qehvi(models: Sequence[GpModel], front, ref, cfg: AcquisitionConfig,
                   seed: int | None = 0, spec: ObjectiveSpec | None = None,
                   d: int | None = None) -> tuple[np.ndarray, float]:
    """Approximate argmax of qEHVI over ``[0, 1]^d``.

    Raw quasi-random points are scored as singleton additions, the best
    ``num_restarts`` seed coordinate pattern searches, and for ``q > 1`` the
    batch is grown greedily with earlier picks held fixed.

    Returns the ``(q, d)`` batch and its qEHVI value.
    """
    d = d if d is not None else models[0].d
    ev = _evaluator(models, front, ref, cfg, seed, spec, cfg.q)
    raw = raw_candidates(cfg, d, seed)
    fixed = np.zeros((0, d))
    value = 0.0
    for _ in range(cfg.q):
        def score(points, fixed=fixed):
            batch = np.concatenate(
                [np.broadcast_to(fixed, (points.shape[0],) + fixed.shape), points[:, None, :]], axis=1)
            return ev(batch)

        raw_vals = score(raw)
        top = np.argsort(-raw_vals, kind="stable")[:cfg.num_restarts]
        xs, vs = _pattern_search(score, raw[top], raw_vals[top], cfg.step_start, cfg.step_min)
        k = int(np.argmax(vs))
        fixed = np.concatenate([fixed, xs[k:k + 1]], axis=0)
        value = float(vs[k])
    return fixed, value
