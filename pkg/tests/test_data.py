import logging

import numpy as np
import pytest

from oracles import brute_front_indices
from seqpareto.core import InputStats
from seqpareto.data import (OBJECTIVE_OFFSET, OBJECTIVE_SCALE, Family, generate_synthetic_pool,
                            ingest_csv, on_front_radius, subsample, synthetic_objectives,
                            write_pool_csv)
from seqpareto.errors import DataError, ReferencePointError, SchemaError
from seqpareto.metrics import phv


def relative(pool):
    """Undo the physical scaling: both relative objectives maximized in [0, 1]."""
    Y = pool.objectives
    signs = pool.spec.signs
    base = np.where(signs > 0, OBJECTIVE_OFFSET, OBJECTIVE_OFFSET + OBJECTIVE_SCALE)
    return (Y - base) * signs / OBJECTIVE_SCALE


def front_gaps(pool):
    canon = pool.scaler.scale_canonical(pool.true_front.canonical())
    canon = canon[np.argsort(canon[:, 0])]
    return np.linalg.norm(np.diff(canon, axis=0), axis=1)


def test_ingest_drops_malformed_rows(tmp_path, caplog):
    path = tmp_path / "pool.csv"
    path.write_text("a,b,y1,y2\n1,2,3,4\n5,oops,7,8\n2,1,4,3\n", encoding="utf-8")
    with caplog.at_level(logging.WARNING):
        pool = ingest_csv(path, ["a", "b"], ["y1", "y2"])
    assert pool.n == 2 and pool.manifest.dropped_rows == 1
    assert "dropped 1 row" in caplog.text
    assert pool.inputs.tolist() == [[0.0, 1.0], [1.0, 0.0]]


def test_ingest_feature_subset_and_digest(tmp_path):
    rng = np.random.default_rng(0)
    cols = [f"c{i}" for i in range(16)]
    data = rng.uniform(size=(30, 16))
    path = tmp_path / "wide.csv"
    lines = [",".join(cols)] + [",".join(repr(float(v)) for v in row) for row in data]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    inputs, objectives = cols[:7], ["c10", "c12"]
    pool = ingest_csv(path, inputs, objectives, "max-min")
    assert (pool.d, pool.m, pool.n) == (7, 2, 30)
    assert pool.feature_names == inputs
    again = ingest_csv(path, inputs, objectives, "max-min")
    assert again.digest == pool.digest
    assert np.array_equal(pool.objectives, data[:, [10, 12]])


def test_ingest_errors(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("a,y1,y2\n1,2,3\nx,2,3\n", encoding="utf-8")
    with pytest.raises(SchemaError):
        ingest_csv(path, ["a"], ["y1", "missing"])
    with pytest.raises(DataError):
        ingest_csv(path, ["a"], ["y1", "y2"])
    empty = tmp_path / "empty.csv"
    empty.write_text("", encoding="utf-8")
    with pytest.raises(DataError):
        ingest_csv(empty, ["a"], ["y1"])


def test_ingest_bad_reference(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("a,y1,y2\n1,2,3\n2,3,2\n", encoding="utf-8")
    with pytest.raises(ReferencePointError):
        ingest_csv(path, ["a"], ["y1", "y2"], reference_point=(2.5, 0.0))
    pool = ingest_csv(path, ["a"], ["y1", "y2"])
    assert pool.spec.reference_point.tolist() == [2.0, 2.0]


def test_manifest_stats_reproduce_inputs():
    pool = generate_synthetic_pool(n=50, d=3, seed=1)
    stats = InputStats.from_dict(pool.manifest.input_stats)
    assert np.array_equal(stats.transform(pool.raw_inputs), pool.inputs)


def test_write_ingest_round_trip(tmp_path):
    pool = generate_synthetic_pool("convex", n=40, d=3, seed=2, directions="max-min")
    path = write_pool_csv(pool, tmp_path / "s.csv")
    back = ingest_csv(path, pool.feature_names, pool.objective_names, "max-min")
    assert back.digest == pool.digest
    assert np.array_equal(back.objectives, pool.objectives)


@pytest.mark.parametrize("scenario", ["max-max", "max-min"])
def test_concave_front_on_analytic_curve(scenario):
    pool = generate_synthetic_pool("concave", n=402, d=7, noise=0.0, seed=0, directions=scenario)
    rel = relative(pool)[pool.true_front.indices]
    # quarter circle of radius 1 centred on the ideal point (1, 1)
    assert np.all(np.abs((1 - rel[:, 0]) ** 2 + (1 - rel[:, 1]) ** 2 - 1.0) <= 1e-9)
    assert len(pool.true_front) >= 5


def test_convex_front_on_analytic_curve():
    pool = generate_synthetic_pool("convex", n=402, d=7, noise=0.0, seed=4)
    rel = relative(pool)[pool.true_front.indices]
    assert np.all(np.abs(rel[:, 0] ** 2 + rel[:, 1] ** 2 - 1.0) <= 1e-9)


def test_disconnected_front_has_gap():
    for seed in range(3):
        pool = generate_synthetic_pool("disconnected", seed=seed)
        assert np.sum(front_gaps(pool) > 0.1) >= 1


def test_synthetic_determinism_and_shape():
    a = generate_synthetic_pool(seed=7)
    b = generate_synthetic_pool(seed=7)
    assert a.digest == b.digest
    assert (a.n, a.d, a.m) == (402, 7, 2)
    assert generate_synthetic_pool(seed=8).digest != a.digest
    with pytest.raises(DataError):
        generate_synthetic_pool(n=19)


def test_true_front_matches_brute_force():
    pool = generate_synthetic_pool(n=120, d=4, seed=5, directions="max-min")
    assert pool.true_front.indices.tolist() == brute_front_indices(pool.objectives, pool.spec.signs)


def test_on_front_ball_fraction():
    rng = np.random.default_rng(0)
    for k in (2, 6):
        U = rng.uniform(size=(200_000, k))
        inside = np.linalg.norm(U - 0.5, axis=1) <= on_front_radius(k)
        assert inside.mean() == pytest.approx(0.06, abs=0.003)
    X = np.full((2, 7), 0.5)
    X[0, 0] = 0.0
    rel = synthetic_objectives(Family.CONCAVE, X)
    assert rel[0].tolist() == [1.0, 0.0]
    assert rel[1] == pytest.approx([1 - np.sqrt(0.5)] * 2, abs=1e-15)
    X[:, 1] = 1.0  # off the ball: the fixed drop applies
    assert np.all(synthetic_objectives(Family.CONCAVE, X).sum(axis=1) < 0.51)


def test_subsample():
    pool = generate_synthetic_pool(seed=0)
    same = subsample(pool, pool.n, seed=3)
    assert same.digest == pool.digest and same.manifest.notes == pool.manifest.notes
    cap = subsample(pool, 100, seed=3)
    assert cap.n == 100 and cap.digest != pool.digest
    assert cap.manifest.notes and np.array_equal(cap.spec.reference_point, pool.spec.reference_point)
    assert phv(cap.true_front.objectives, pool.true_front.objectives,
               pool.spec.reference_point, pool.spec) <= 1.0 + 1e-12
    assert subsample(pool, 100, seed=3).digest == cap.digest
    with pytest.raises(DataError):
        subsample(pool, 1)
    with pytest.raises(DataError):
        subsample(pool, pool.n + 1)


def test_fresh_and_with_spec():
    pool = generate_synthetic_pool(n=30, d=2, seed=1)
    pool.consumed[:3] = True
    clean = pool.fresh()
    assert not clean.consumed.any() and pool.consumed[:3].all()
    flipped = pool.with_spec("max-min")
    assert flipped.spec.scenario == "max-min" and flipped.digest == pool.digest
