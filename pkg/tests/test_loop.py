import json

import numpy as np
import pytest

from seqpareto.acquisition import hvi
from seqpareto.core import nondomination_rank
from seqpareto.data import generate_synthetic_pool, ingest_csv
from seqpareto.errors import CapacityError, MigrationError, StateError
from seqpareto.loop import (RunConfig, checkpoint, derive_seed, init_campaign, restore, run,
                            save_checkpoint, step)

FAST = dict(mc_samples=16, num_restarts=3, raw_samples=64, gp_restarts=2)


def test_config_defaults_and_validation():
    cfg = RunConfig()
    assert (cfg.n_start, cfg.n_iter, cfg.q, cfg.num_restarts, cfg.mc_samples, cfg.raw_samples) == \
        (30, 90, 1, 10, 32, 402)
    assert cfg.hv_threshold == 0.95
    assert RunConfig(scenario="max-min").hv_threshold == 0.94
    assert RunConfig(hv_threshold=None).hv_threshold is None
    for bad in (dict(n_start=1), dict(hv_threshold=1.5), dict(stop_on="gd"), dict(q=0),
                dict(scenario="min-min"), dict(mc_samples=4)):
        with pytest.raises(ValueError):
            RunConfig(**bad)
    assert RunConfig.from_dict(cfg.to_dict()) == cfg


def test_derive_seed_is_stable():
    assert derive_seed(3, 1) == derive_seed(3, 1)
    assert derive_seed(3, 1) != derive_seed(3, 2) != derive_seed(4, 1)


def test_init_avoids_best_fronts(small_pool):
    cfg = RunConfig(n_start=10, n_iter=5, **FAST)
    state, eff = init_campaign(small_pool, cfg)
    ranks = nondomination_rank(eff.objectives, eff.spec)
    assert np.all(ranks[state.consumed] >= 2)
    assert not set(state.consumed) & set(eff.true_front.indices.tolist())
    again, _ = init_campaign(small_pool, cfg)
    assert again.consumed == state.consumed
    other, _ = init_campaign(small_pool, RunConfig(n_start=10, n_iter=5, seed=1, **FAST))
    assert other.consumed != state.consumed


def test_resource_cap():
    pool = generate_synthetic_pool(seed=0)
    state, eff = init_campaign(pool, RunConfig(n_start=10, n_iter=2, resource_cap=100, **FAST))
    assert eff.n == 100 and max(state.consumed) < 100


def test_capacity_error(small_pool):
    with pytest.raises(CapacityError):
        init_campaign(small_pool, RunConfig(n_start=30, n_iter=80, **FAST))


def test_step_bookkeeping(small_pool):
    cfg = RunConfig(n_start=8, n_iter=4, q=2, hv_threshold=None, **FAST)
    state, eff = init_campaign(small_pool, cfg)
    nxt = step(state, eff)
    assert nxt.points_used == state.points_used + 2
    assert nxt.consumed[:8] == state.consumed and len(set(nxt.consumed)) == len(nxt.consumed)
    assert np.array_equal(nxt.objectives, eff.objectives[nxt.consumed])
    assert state.iteration == 0 and nxt.iteration == 1 and len(nxt.hv_trace) == 2
    with pytest.raises(StateError):
        step(state, generate_synthetic_pool(n=100, d=4, seed=99))


def test_planted_optimum_is_consumed(tmp_path):
    x = np.linspace(0.0, 1.0, 20).tolist()
    # every point lies on one chain; the top point dominates the rest
    rows = ["x,f1,f2"] + [f"{v!r},{2 * v!r},{3 * v!r}" for v in x]
    path = tmp_path / "chain.csv"
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    pool = ingest_csv(path, ["x"], ["f1", "f2"])
    cfg = RunConfig(n_start=5, n_iter=1, hv_threshold=None, **FAST)
    state, eff = init_campaign(pool, cfg)
    assert 19 not in state.consumed
    front = eff.objectives[state.consumed]
    gains = [hvi(front, eff.spec.reference_point, eff.objectives[i], eff.spec)
             for i in range(20) if i not in state.consumed]
    assert max(gains) == hvi(front, eff.spec.reference_point, eff.objectives[19], eff.spec)
    assert step(state, eff).consumed[-1] == 19


def test_vacuous_threshold_and_zero_iterations(small_pool):
    state, report = run(small_pool, RunConfig(n_start=10, n_iter=5, hv_threshold=0.0, **FAST))
    assert state.iteration == 0 and state.points_used == 10 and "threshold" in state.stop_reason
    state, report = run(small_pool, RunConfig(n_start=10, n_iter=0, hv_threshold=None, **FAST))
    assert state.iteration == 0 and report.points_used == 10
    with pytest.raises(StateError):
        step(state, small_pool)


def test_run_invariants(small_pool):
    seen = []
    cfg = RunConfig(n_start=10, n_iter=8, hv_threshold=None, scenario="max-min", **FAST)
    state, report = run(small_pool, cfg, callback=lambda s: seen.append(s.iteration))
    assert seen == list(range(1, 9))
    hv = [t.hv for t in state.hv_trace]
    assert np.all(np.diff(hv) >= 0)
    assert len(set(state.consumed)) == state.points_used == 18
    assert all(t.phv <= 1.0 + 1e-9 for t in state.hv_trace)
    assert report.phv == pytest.approx(state.hv_trace[-1].phv, abs=1e-12)
    assert state.seed_lineage[1:] == [derive_seed(cfg.seed, i) for i in range(1, 9)]


def test_checkpoint_round_trip(small_pool, tmp_path):
    cfg = RunConfig(n_start=10, n_iter=6, hv_threshold=None, refit_every=2, **FAST)
    full, _ = run(small_pool, cfg)
    state, eff = init_campaign(small_pool, cfg)
    for _ in range(3):
        state = step(state, eff)
    path = save_checkpoint(state, tmp_path / "ck.json")
    doc = json.loads(path.read_text())
    assert doc["version"] == 1 and doc["iteration"] == 3
    resumed, eff2 = restore(path, small_pool)
    assert resumed.consumed == state.consumed and resumed.params == state.params
    assert checkpoint(resumed) == doc
    final, _ = run(small_pool, cfg, state=resumed)
    assert final.consumed == full.consumed
    assert [t.hv for t in final.hv_trace] == [t.hv for t in full.hv_trace]
    assert final.seed_lineage == full.seed_lineage


def test_restore_rejects_bad_documents(small_pool):
    cfg = RunConfig(n_start=10, n_iter=1, hv_threshold=None, **FAST)
    state, _ = init_campaign(small_pool, cfg)
    doc = checkpoint(state)
    for mutate in (lambda d: d.update(version=2), lambda d: d.pop("consumed"),
                   lambda d: d.update(pool_digest="0" * 64),
                   lambda d: d["objectives"][0].__setitem__(0, 1e9),
                   lambda d: d.update(consumed=d["consumed"][:-1] + [d["consumed"][0]])):
        bad = json.loads(json.dumps(doc))
        mutate(bad)
        with pytest.raises(MigrationError):
            restore(bad, small_pool)
    with pytest.raises(MigrationError):
        restore("{not json", small_pool)
    with pytest.raises(MigrationError):
        restore(doc, generate_synthetic_pool(n=100, d=4, seed=4))
