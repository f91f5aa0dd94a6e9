import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import brute_dominates, brute_front_indices, peel_ranks
from seqpareto.core import (Direction, ObjectiveSpec, dominates, extract_pareto_front,
                            nondomination_rank, normalize_inputs, parse_directions)
from seqpareto.errors import DataError, DimensionError, EmptySetError, ReferencePointError

MAXMAX = ObjectiveSpec.from_scenario("max-max")
MAXMIN = ObjectiveSpec.from_scenario("max-min")

small_sets = st.integers(2, 3).flatmap(
    lambda m: arrays(np.float64, st.tuples(st.integers(1, 25), st.just(m)),
                     elements=st.integers(0, 5).map(float)))


def test_dominates_examples():
    assert dominates((3, 3), (2, 2), MAXMAX)
    assert not dominates((3, 3), (3, 3), MAXMAX)
    assert dominates((300, 100), (250, 150), MAXMIN)
    assert not dominates((250, 150), (300, 100), MAXMIN)


def test_dominates_length_mismatch():
    with pytest.raises(DimensionError):
        dominates((1, 2, 3), (1, 2), MAXMAX)


def test_parse_directions():
    assert parse_directions("max-min") == (Direction.MAXIMIZE, Direction.MINIMIZE)
    assert parse_directions(["min", "max"]) == (Direction.MINIMIZE, Direction.MAXIMIZE)
    with pytest.raises(ValueError):
        parse_directions("sideways")


def test_reference_point_check():
    spec = ObjectiveSpec.from_scenario("max-min", reference_point=(0.0, 10.0))
    spec.check_reference(np.array([[1.0, 5.0], [2.0, 10.0]]))
    with pytest.raises(ReferencePointError):
        spec.check_reference(np.array([[1.0, 11.0]]))
    corner = spec.worst_corner(np.array([[1.0, 5.0], [2.0, 7.0]]))
    assert corner.tolist() == [1.0, 7.0]


def test_extract_examples():
    assert extract_pareto_front(np.array([[1.0, 1.0]]), MAXMAX).as_set() == {(1.0, 1.0)}
    f = extract_pareto_front(np.array([[3, 1], [1, 3], [2, 2], [1, 1]], float), MAXMAX)
    assert f.as_set() == {(3.0, 1.0), (1.0, 3.0), (2.0, 2.0)}
    assert f.indices.tolist() == [0, 1, 2]
    dup = extract_pareto_front(np.array([[0.0, 0.0], [0.0, 0.0]]), MAXMAX)
    assert len(dup) == 1 and dup.indices.tolist() == [0]


def test_extract_pairs_keep_inputs():
    pts = [((0.1,), (3.0, 1.0)), ((0.2,), (1.0, 1.0)), ((0.3,), (1.0, 3.0))]
    f = extract_pareto_front(pts, MAXMAX)
    assert f.indices.tolist() == [0, 2]
    assert f.inputs.ravel().tolist() == [0.1, 0.3]


def test_extract_empty():
    with pytest.raises(EmptySetError):
        extract_pareto_front([], MAXMAX)
    with pytest.raises(EmptySetError):
        nondomination_rank(np.zeros((0, 2)), MAXMAX)


def test_rank_examples():
    assert nondomination_rank(np.array([[3, 3], [2, 2], [1, 1]], float), MAXMAX).tolist() == [0, 1, 2]


def test_rank_agrees_with_peeling_on_50_points():
    rng = np.random.default_rng(0)
    Y = rng.uniform(size=(50, 2))
    ranks = nondomination_rank(Y, MAXMAX)
    assert ranks.tolist() == peel_ranks(Y, (1, 1))
    front = extract_pareto_front(Y, MAXMAX)
    assert np.all(ranks[front.indices] == 0)


def test_normalize_examples():
    Z, stats = normalize_inputs(np.array([[2.0, 5.0], [4.0, 5.0], [6.0, 5.0]]))
    assert Z[:, 0].tolist() == [0.0, 0.5, 1.0]
    assert Z[:, 1].tolist() == [0.5, 0.5, 0.5]
    with pytest.raises(DataError):
        normalize_inputs(np.array([[1.0], [np.nan]]))


@given(arrays(np.float64, st.tuples(st.integers(2, 20), st.integers(1, 5)),
              elements=st.floats(-1e6, 1e6, allow_nan=False)))
def test_normalize_round_trip(raw):
    Z, stats = normalize_inputs(raw)
    assert np.all((Z >= 0) & (Z <= 1))
    back = stats.inverse(Z)
    varying = ~stats.constant
    # relative to each column's magnitude
    scale = np.maximum(np.abs(raw).max(axis=0), 1.0)
    assert np.all(np.abs(back - raw)[:, varying] <= 4e-12 * scale[varying])
    assert np.all(Z[:, stats.constant] == 0.5)


@given(small_sets)
def test_extract_matches_brute_force(Y):
    m = Y.shape[1]
    for dirs in ("max",) * m, ("min",) + ("max",) * (m - 1):
        spec = ObjectiveSpec(parse_directions(list(dirs)))
        assert extract_pareto_front(Y, spec).indices.tolist() == brute_front_indices(Y, spec.signs)


@given(small_sets)
def test_front_invariants(Y):
    spec = ObjectiveSpec(parse_directions(["max"] * Y.shape[1]))
    f = extract_pareto_front(Y, spec)
    members = f.objectives
    for a in members:
        assert not any(dominates(b, a, spec) for b in members)
    for i, y in enumerate(Y):
        if i in f.indices:
            continue
        assert any(dominates(p, y, spec) or np.array_equal(p, y) for p in members)


@given(small_sets, st.randoms(use_true_random=False))
def test_extract_permutation_invariant(Y, rnd):
    spec = ObjectiveSpec(parse_directions(["max"] * Y.shape[1]))
    perm = list(range(Y.shape[0]))
    rnd.shuffle(perm)
    assert extract_pareto_front(Y, spec).as_set() == extract_pareto_front(Y[perm], spec).as_set()


@given(small_sets)
def test_direction_flip_consistency(Y):
    m = Y.shape[1]
    spec = ObjectiveSpec(parse_directions(["max"] * m))
    flipped = ObjectiveSpec(parse_directions(["min"] + ["max"] * (m - 1)))
    Yf = Y.copy()
    Yf[:, 0] = -Yf[:, 0]
    assert extract_pareto_front(Y, spec).indices.tolist() == \
        extract_pareto_front(Yf, flipped).indices.tolist()
    assert nondomination_rank(Y, spec).tolist() == nondomination_rank(Yf, flipped).tolist()


@given(small_sets)
def test_dominance_order_properties(Y):
    spec = ObjectiveSpec(parse_directions(["max"] * Y.shape[1]))
    n = min(Y.shape[0], 8)
    for i in range(n):
        assert not dominates(Y[i], Y[i], spec)
        for j in range(n):
            dij = dominates(Y[i], Y[j], spec)
            assert dij == brute_dominates(Y[i], Y[j], spec.signs)
            assert not (dij and dominates(Y[j], Y[i], spec))
            for k in range(n):
                if dij and dominates(Y[j], Y[k], spec):
                    assert dominates(Y[i], Y[k], spec)


@given(small_sets)
def test_rank_matches_peeling(Y):
    spec = ObjectiveSpec(parse_directions(["max"] * Y.shape[1]))
    assert nondomination_rank(Y, spec).tolist() == peel_ranks(Y, spec.signs)
