"""NSGA-II comparison baseline evaluated against a finite pool.

Individuals live in ``[0, 1]^d``; each fitness evaluation snaps an
individual to its nearest pool point (revisits allowed) and reads the
measured objectives.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ObjectiveSpec, ParetoFront, extract_pareto_front
from .data import CandidatePool
from .metrics import MetricsReport, evaluate

# crossover / mutation rates used for each scenario
SCENARIO_RATES = {"max-max": (0.2, 0.2), "max-min": (0.85, 0.1)}


@dataclass(frozen=True)
class NsgaConfig:
    """Population settings; the defaults spend 1000 evaluations (100 x (9 + 1))."""

    pop_size: int = 100
    generations: int = 9
    crossover_rate: float = 0.2
    mutation_rate: float = 0.2
    seed: int = 0
    eta_c: float = 15.0  # SBX distribution index

    def __post_init__(self):
        if self.pop_size < 2 or self.pop_size % 2:
            raise ValueError(f"pop_size must be even and >= 2, got {self.pop_size}")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        for name in ("crossover_rate", "mutation_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.eta_c < 0:
            raise ValueError("eta_c must be >= 0")

    @classmethod
    def for_scenario(cls, scenario: str, **kwargs) -> NsgaConfig:
        cr, mr = SCENARIO_RATES[scenario]
        kwargs.setdefault("crossover_rate", cr)
        kwargs.setdefault("mutation_rate", mr)
        return cls(**kwargs)

    @property
    def function_evaluations(self) -> int:
        return self.pop_size * (self.generations + 1)


def fast_nondominated_sort(objectives, spec: ObjectiveSpec) -> list[np.ndarray]:
    """Partition row indices into successive non-dominated fronts.

    Bookkeeping follows the usual NSGA-II scheme: each point keeps the set
    it dominates and a count of points dominating it.
    """
    F = spec.canonical(np.atleast_2d(np.asarray(objectives, dtype=float)))
    n = F.shape[0]
    geq = np.all(F[:, None, :] >= F[None, :, :], axis=2)
    gt = np.any(F[:, None, :] > F[None, :, :], axis=2)
    dom = geq & gt  # dom[p, q]: p dominates q
    dominated_by = dom.sum(axis=0)
    fronts = []
    current = np.flatnonzero(dominated_by == 0)
    while current.size:
        fronts.append(current)
        nxt = []
        for p in current:
            for q in np.flatnonzero(dom[p]):
                dominated_by[q] -= 1
                if dominated_by[q] == 0:
                    nxt.append(q)
        current = np.array(sorted(nxt), dtype=int)
    assert sum(f.size for f in fronts) == n
    return fronts


def crowding_distance(objectives, spec: ObjectiveSpec) -> np.ndarray:
    """Sum over objectives of range-normalized neighbour gaps; extremes get +inf."""
    F = spec.canonical(np.atleast_2d(np.asarray(objectives, dtype=float)))
    n, m = F.shape
    dist = np.zeros(n)
    if n <= 2:
        return np.full(n, np.inf)
    for k in range(m):
        order = np.argsort(F[:, k], kind="stable")
        vals = F[order, k]
        dist[order[0]] = dist[order[-1]] = np.inf
        span = vals[-1] - vals[0]
        if span <= 0:
            continue
        dist[order[1:-1]] += (vals[2:] - vals[:-2]) / span
    return dist


@dataclass(eq=False)
class NsgaResult:
    front: ParetoFront
    report: MetricsReport
    function_evaluations: int
    unique_evaluations: int
    hv_history: list[float]  # normalized HV of the population's best front, per generation


def _nearest_rows(X: np.ndarray, inputs: np.ndarray) -> np.ndarray:
    d2 = (X ** 2).sum(1)[:, None] - 2.0 * X @ inputs.T + (inputs ** 2).sum(1)[None, :]
    return np.argmin(d2, axis=1)


def _rank_and_crowding(F: np.ndarray, spec: ObjectiveSpec) -> tuple[np.ndarray, np.ndarray]:
    rank = np.empty(F.shape[0], dtype=int)
    crowd = np.empty(F.shape[0])
    for r, front in enumerate(fast_nondominated_sort(F, spec)):
        rank[front] = r
        crowd[front] = crowding_distance(F[front], spec)
    return rank, crowd


def _survivors(F: np.ndarray, spec: ObjectiveSpec, size: int) -> np.ndarray:
    keep = []
    for front in fast_nondominated_sort(F, spec):
        if len(keep) + front.size <= size:
            keep.extend(front.tolist())
            continue
        cd = crowding_distance(F[front], spec)
        order = np.argsort(-cd, kind="stable")
        keep.extend(front[order[:size - len(keep)]].tolist())
        break
    return np.array(keep, dtype=int)


def _tournament(rng, rank, crowd, k: int) -> np.ndarray:
    a = rng.integers(0, rank.shape[0], size=k)
    b = rng.integers(0, rank.shape[0], size=k)
    a_wins = (rank[a] < rank[b]) | ((rank[a] == rank[b]) & (crowd[a] >= crowd[b]))
    return np.where(a_wins, a, b)


def sbx(rng, p1: np.ndarray, p2: np.ndarray, eta: float) -> tuple[np.ndarray, np.ndarray]:
    """Simulated binary crossover (unbounded form; callers clip to the box)."""
    u = rng.uniform(size=p1.shape)
    beta = np.where(u <= 0.5, (2.0 * u) ** (1.0 / (eta + 1.0)),
                    (0.5 / (1.0 - u)) ** (1.0 / (eta + 1.0)))
    mid, half = 0.5 * (p1 + p2), 0.5 * np.abs(p2 - p1)
    return mid - beta * half, mid + beta * half


def _offspring(rng, P: np.ndarray, rank, crowd, cfg: NsgaConfig) -> np.ndarray:
    n, d = P.shape
    parents = P[_tournament(rng, rank, crowd, n)]
    p1, p2 = parents[0::2], parents[1::2]
    c1, c2 = sbx(rng, p1, p2, cfg.eta_c)
    cross = rng.uniform(size=(n // 2, 1)) < cfg.crossover_rate
    kids = np.concatenate([np.where(cross, c1, p1), np.where(cross, c2, p2)], axis=0)
    mutate = rng.uniform(size=kids.shape) < cfg.mutation_rate
    kids = np.where(mutate, rng.uniform(size=kids.shape), kids)
    return np.clip(kids, 0.0, 1.0)


def nsga2_run(pool: CandidatePool, cfg: NsgaConfig, spec: ObjectiveSpec | None = None,
              convention: str = "paper") -> NsgaResult:
    """Run NSGA-II with pool-snapped evaluations.

    The achieved front is extracted from every pool point evaluated during
    the run; the report's ``points_used`` is the number of distinct points.
    """
    if spec is not None and spec.scenario != pool.spec.scenario:
        pool = pool.with_spec(spec.directions, spec.reference_point)
    spec = pool.spec
    scaler = pool.scaler
    rng = np.random.default_rng(cfg.seed)
    P = rng.uniform(size=(cfg.pop_size, pool.d))
    idx = _nearest_rows(P, pool.inputs)
    evaluated = [idx]
    history = []
    for gen in range(cfg.generations + 1):
        F = pool.objectives[idx]
        rank, crowd = _rank_and_crowding(F, spec)
        history.append(scaler.normalized_hv(F[rank == 0], spec))
        if gen == cfg.generations:
            break
        Q = _offspring(rng, P, rank, crowd, cfg)
        q_idx = _nearest_rows(Q, pool.inputs)
        evaluated.append(q_idx)
        R, r_idx = np.concatenate([P, Q]), np.concatenate([idx, q_idx])
        keep = _survivors(pool.objectives[r_idx], spec, cfg.pop_size)
        P, idx = R[keep], r_idx[keep]
    used = np.unique(np.concatenate(evaluated))
    f = extract_pareto_front(pool.objectives[used], spec)
    front = ParetoFront(used[f.indices], f.objectives, spec, pool.inputs[used[f.indices]])
    report = evaluate(pool.objectives[used], pool.true_front.objectives, spec, scaler,
                      used.size, pool.n, convention)
    return NsgaResult(front, report, cfg.function_evaluations, int(used.size), history)
