"""Sequential campaign engine: initialize, propose, project, observe, stop.

A :class:`CampaignState` is plain data. Models are rebuilt from the consumed
observations and the stored kernel hyperparameters whenever they are needed,
so a checkpointed state resumes bit-identically.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .acquisition import AcquisitionConfig, maximize_qehvi
from .core import ParetoFront, extract_pareto_front, nondomination_rank
from .data import CandidatePool, subsample
from .doe import nearest_unconsumed
from .errors import CapacityError, MigrationError, StateError
from .metrics import MetricsReport, evaluate
from .surrogate import GpModel, KernelParams, build_model, fit

CHECKPOINT_VERSION = 1
CHECKPOINT_FORMAT = "seqpareto.checkpoint"

# HV stopping thresholds on pool-normalized objectives
DEFAULT_THRESHOLDS = {"max-max": 0.95, "max-min": 0.94}


def derive_seed(root: int, *keys: int) -> int:
    """Deterministic 32-bit child seed for ``(root, *keys)``."""
    return int(np.random.SeedSequence([root, *keys]).generate_state(1)[0])


@dataclass(frozen=True)
class RunConfig:
    """Campaign settings.

    ``hv_threshold="auto"`` picks the scenario default (0.95 max-max,
    0.94 max-min); ``None`` disables threshold stopping.
    """

    n_start: int = 30
    n_iter: int = 90
    q: int = 1
    hv_threshold: float | None | str = "auto"
    stop_on: str = "hv"
    mc_samples: int = 32
    num_restarts: int = 10
    raw_samples: int = 402
    seed: int = 0
    scenario: str = "max-max"
    resource_cap: int | None = None
    refit_every: int = 1
    gp_restarts: int = 8

    def __post_init__(self):
        if self.scenario not in DEFAULT_THRESHOLDS:
            raise ValueError(f"scenario must be one of {sorted(DEFAULT_THRESHOLDS)}, got {self.scenario!r}")
        if self.hv_threshold == "auto":
            object.__setattr__(self, "hv_threshold", DEFAULT_THRESHOLDS[self.scenario])
        if self.hv_threshold is not None and not 0.0 <= float(self.hv_threshold) <= 1.0:
            raise ValueError(f"hv_threshold must lie in [0, 1], got {self.hv_threshold}")
        if self.stop_on not in ("hv", "phv"):
            raise ValueError(f"stop_on must be 'hv' or 'phv', got {self.stop_on!r}")
        if self.n_start < 2:
            raise ValueError("n_start must be >= 2 (a GP fit needs two observations)")
        if self.n_iter < 0 or self.q < 1 or self.refit_every < 1 or self.gp_restarts < 1:
            raise ValueError("need n_iter >= 0, q >= 1, refit_every >= 1, gp_restarts >= 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.resource_cap is not None and self.resource_cap < 2:
            raise ValueError("resource_cap must be >= 2")
        self.acquisition  # validates the acquisition fields

    @property
    def acquisition(self) -> AcquisitionConfig:
        return AcquisitionConfig(q=self.q, mc_samples=self.mc_samples,
                                 num_restarts=self.num_restarts, raw_samples=self.raw_samples)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> RunConfig:
        return cls(**doc)


@dataclass(frozen=True)
class TracePoint:
    iteration: int
    points_used: int
    hv: float
    phv: float


@dataclass(eq=False)
class CampaignState:
    """Everything needed to continue a campaign against its (effective) pool."""

    config: RunConfig
    pool_digest: str
    consumed: list[int]
    objectives: np.ndarray
    params: list[KernelParams]
    hv_trace: list[TracePoint] = field(default_factory=list)
    iteration: int = 0
    seed_lineage: list[int] = field(default_factory=list)
    stop_reason: str | None = None

    @property
    def points_used(self) -> int:
        return len(self.consumed)

    def front(self, pool: CandidatePool) -> ParetoFront:
        """Front of the consumed observations, indexed into the pool."""
        f = extract_pareto_front(self.objectives, pool.spec)
        idx = np.asarray(self.consumed)[f.indices]
        return ParetoFront(idx, f.objectives, pool.spec, pool.inputs[idx])

    def consumed_mask(self, n: int) -> np.ndarray:
        mask = np.zeros(n, dtype=bool)
        mask[self.consumed] = True
        return mask


def prepare_pool(pool: CandidatePool, cfg: RunConfig) -> CandidatePool:
    """The pool a campaign actually runs on: scenario applied, then capped."""
    if pool.spec.scenario != cfg.scenario:
        pool = pool.with_spec(cfg.scenario)
    if cfg.resource_cap is not None and cfg.resource_cap < pool.n:
        pool = subsample(pool, cfg.resource_cap, seed=cfg.seed)
    return pool.fresh()


def _record(state: CampaignState, pool: CandidatePool) -> None:
    front = extract_pareto_front(state.objectives, pool.spec).objectives
    hv = pool.scaler.normalized_hv(front, pool.spec)
    total = pool.scaler.normalized_hv(pool.true_front.objectives, pool.spec)
    state.hv_trace.append(TracePoint(state.iteration, state.points_used, hv, hv / total))


def _fit_all(X, Y, cfg: RunConfig, seed: int, warm: list[KernelParams] | None) -> list[KernelParams]:
    out = []
    for k in range(Y.shape[1]):
        model = fit(X, Y[:, k], n_restarts=cfg.gp_restarts, seed=derive_seed(seed, k),
                    warm_start=None if warm is None else warm[k])
        out.append(model.params)
    return out


def models_for(state: CampaignState, pool: CandidatePool) -> list[GpModel]:
    X = pool.inputs[state.consumed]
    return [build_model(X, state.objectives[:, k], p) for k, p in enumerate(state.params)]


def init_campaign(pool: CandidatePool, cfg: RunConfig) -> tuple[CampaignState, CandidatePool]:
    """Draw the starting set away from the best fronts and fit the first GPs.

    Returns the state and the effective pool it runs on.
    """
    eff = prepare_pool(pool, cfg)
    if cfg.n_start + cfg.n_iter * cfg.q > eff.n:
        raise CapacityError(
            f"n_start + n_iter*q = {cfg.n_start + cfg.n_iter * cfg.q} exceeds pool size {eff.n}")
    ranks = nondomination_rank(eff.objectives, eff.spec)
    rng = np.random.default_rng(derive_seed(cfg.seed, 0, 1))
    for min_rank in (2, 1):
        eligible = np.flatnonzero(ranks >= min_rank)
        if eligible.size >= cfg.n_start:
            break
    else:
        raise CapacityError(
            f"only {eligible.size} pool points lie off the true front; need n_start={cfg.n_start}")
    start = sorted(int(i) for i in rng.choice(eligible, size=cfg.n_start, replace=False))
    Y = eff.objectives[start]
    seed0 = derive_seed(cfg.seed, 0)
    params = _fit_all(eff.inputs[start], Y, cfg, seed0, None)
    state = CampaignState(cfg, eff.digest, start, Y.copy(), params, seed_lineage=[seed0])
    _record(state, eff)
    return state, eff


def stop_reason(state: CampaignState) -> str | None:
    """Why the campaign should stop now, or ``None`` to continue."""
    cfg = state.config
    if cfg.hv_threshold is not None and state.hv_trace:
        last = state.hv_trace[-1]
        value = last.hv if cfg.stop_on == "hv" else last.phv
        if value >= cfg.hv_threshold:
            return f"{cfg.stop_on} {value:.6g} >= threshold {cfg.hv_threshold}"
    if state.iteration >= cfg.n_iter:
        return f"reached n_iter={cfg.n_iter}"
    return None


def step(state: CampaignState, pool: CandidatePool) -> CampaignState:
    """One propose-project-observe iteration; returns a new state."""
    if pool.digest != state.pool_digest:
        raise StateError("pool does not match the campaign's effective pool")
    reason = stop_reason(state)
    if reason is not None:
        raise StateError(f"campaign already finished: {reason}")
    cfg = state.config
    it = state.iteration + 1
    seed = derive_seed(cfg.seed, it)
    models = models_for(state, pool)
    front = extract_pareto_front(state.objectives, pool.spec).objectives
    batch, _ = maximize_qehvi(models, front, pool.spec.reference_point, cfg.acquisition,
                              seed=seed, spec=pool.spec, d=pool.d)
    mask = state.consumed_mask(pool.n)
    new = []
    for x in batch:
        k = nearest_unconsumed(x, pool.inputs, mask)
        mask[k] = True
        new.append(k)
    consumed = state.consumed + new
    Y = np.concatenate([state.objectives, pool.objectives[new]], axis=0)
    params = state.params
    if it % cfg.refit_every == 0:
        params = _fit_all(pool.inputs[consumed], Y, cfg, seed, params)
    out = replace(state, consumed=consumed, objectives=Y, params=list(params),
                  hv_trace=list(state.hv_trace), iteration=it,
                  seed_lineage=state.seed_lineage + [seed])
    _record(out, pool)
    return out


def finish(state: CampaignState, pool: CandidatePool, convention: str = "paper") -> MetricsReport:
    return evaluate(state.objectives, pool.true_front.objectives, pool.spec, pool.scaler,
                    state.points_used, pool.n, convention)


def run(pool: CandidatePool, cfg: RunConfig, state: CampaignState | None = None,
        callback=None) -> tuple[CampaignState, MetricsReport]:
    """Iterate until the threshold or ``n_iter`` is reached.

    Pass ``state`` (e.g. from :func:`restore`) to resume; ``callback(state)``
    is invoked after every step.
    """
    if state is None:
        state, eff = init_campaign(pool, cfg)
    else:
        eff = prepare_pool(pool, state.config)
    while (reason := stop_reason(state)) is None:
        state = step(state, eff)
        if callback is not None:
            callback(state)
    state.stop_reason = reason
    return state, finish(state, eff)


def _schema() -> dict:
    text = resources.files("seqpareto").joinpath("schemas/checkpoint.schema.json").read_text("utf-8")
    return json.loads(text)


def checkpoint(state: CampaignState) -> dict:
    """JSON-ready document; floats round-trip exactly through ``json``."""
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": state.config.to_dict(),
        "pool_digest": state.pool_digest,
        "iteration": state.iteration,
        "consumed": [int(i) for i in state.consumed],
        "objectives": state.objectives.tolist(),
        "kernel_params": [p.to_dict() for p in state.params],
        "hv_trace": [asdict(t) for t in state.hv_trace],
        "seed_lineage": [int(s) for s in state.seed_lineage],
        "stop_reason": state.stop_reason,
    }


def save_checkpoint(state: CampaignState, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(checkpoint(state), indent=1) + "\n", encoding="utf-8")
    return path


def restore(document, pool: CandidatePool) -> tuple[CampaignState, CandidatePool]:
    """Rebuild a state from :func:`checkpoint` output (dict, JSON text or path).

    ``pool`` is the campaign's source pool; the effective pool is re-derived
    and must match the recorded digest.
    """
    try:
        if isinstance(document, (str, Path)) and not str(document).lstrip().startswith("{"):
            document = Path(document).read_text(encoding="utf-8")
        doc = json.loads(document) if isinstance(document, str) else document
        if not isinstance(doc, dict):
            raise MigrationError("checkpoint is not a JSON object")
        if doc.get("version") != CHECKPOINT_VERSION:
            raise MigrationError(
                f"checkpoint version {doc.get('version')!r} is not supported (expected {CHECKPOINT_VERSION})")
        jsonschema.validate(doc, _schema())
        cfg = RunConfig.from_dict(doc["config"])
        state = CampaignState(
            config=cfg,
            pool_digest=doc["pool_digest"],
            consumed=[int(i) for i in doc["consumed"]],
            objectives=np.asarray(doc["objectives"], dtype=float).reshape(len(doc["consumed"]), -1),
            params=[KernelParams.from_dict(p) for p in doc["kernel_params"]],
            hv_trace=[TracePoint(**t) for t in doc["hv_trace"]],
            iteration=int(doc["iteration"]),
            seed_lineage=[int(s) for s in doc["seed_lineage"]],
            stop_reason=doc["stop_reason"],
        )
    except MigrationError:
        raise
    except (OSError, ValueError, TypeError, KeyError, jsonschema.ValidationError) as exc:
        raise MigrationError(f"unreadable checkpoint: {exc}") from exc
    eff = prepare_pool(pool, cfg)
    if eff.digest != state.pool_digest:
        raise MigrationError("checkpoint was written for a different pool")
    if len(set(state.consumed)) != len(state.consumed) or any(
            not 0 <= i < eff.n for i in state.consumed):
        raise MigrationError("checkpoint has invalid consumed indices")
    if not np.array_equal(eff.objectives[state.consumed], state.objectives):
        raise MigrationError("checkpoint observations disagree with the pool")
    return state, eff


def trace_rows(state: CampaignState) -> list[dict]:
    return [asdict(t) for t in state.hv_trace]

