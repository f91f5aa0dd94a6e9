import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import inclusion_exclusion_hv, mc_hypervolume
from seqpareto.core import ObjectiveSpec, extract_pareto_front
from seqpareto.errors import DimensionError, MetricError, ReferencePointError
from seqpareto.metrics import (ObjectiveScaler, data_usage, evaluate, gd, hypervolume,
                               hypervolume_canonical, igd, phv)

MAXMAX = ObjectiveSpec.from_scenario("max-max")
MAXMIN = ObjectiveSpec.from_scenario("max-min")

point_sets = arrays(np.float64, st.tuples(st.integers(1, 12), st.just(2)),
                    elements=st.floats(-100, 100, allow_nan=False))


def test_gd_examples():
    assert gd([[0.0, 0.0]], [[3.0, 4.0]]) == 5.0
    assert gd([[0.0, 0.0], [3.0, 4.0]], [[3.0, 4.0]]) == 2.5
    P = [[1.0, 2.0], [2.0, 1.0]]
    assert gd(P, P) == 0.0


def test_igd_examples():
    assert igd([[1.0, 0.0]], [[0.0, 0.0], [2.0, 0.0]]) == pytest.approx(math.sqrt(2) / 2, abs=1e-12)
    assert igd([[1.0, 2.0], [2.0, 1.0], [0.0, 0.0]], [[1.0, 2.0], [2.0, 1.0]]) == 0.0


def test_conventions_differ():
    A = [[0.0, 0.0], [3.0, 4.0]]
    P = [[3.0, 4.0]]
    assert gd(A, P, "paper") == 2.5
    assert gd(A, P, "classic") == pytest.approx(math.sqrt(12.5), abs=1e-12)
    with pytest.raises(ValueError):
        gd(A, P, "other")


def test_metric_errors():
    with pytest.raises(MetricError):
        gd([], [[1.0, 1.0]])
    with pytest.raises(MetricError):
        igd([[1.0, 1.0]], [])
    with pytest.raises(DimensionError):
        gd([[1.0, 1.0]], [[1.0, 1.0, 1.0]])
    with pytest.raises(MetricError):
        data_usage(1, 0)
    with pytest.raises(MetricError):
        data_usage(0, 10)
    with pytest.raises(ReferencePointError):
        hypervolume([[1.0, -1.0]], (0, 0), MAXMAX)
    with pytest.raises(MetricError):
        phv([[1.0, 1.0]], [[0.0, 0.0]], (0, 0), MAXMAX)


def test_hypervolume_examples():
    assert hypervolume([[1.0, 1.0]], (0, 0), MAXMAX) == 1.0
    assert hypervolume([[3.0, 1.0], [2.0, 2.0], [1.0, 3.0]], (0, 0), MAXMAX) == 6.0
    both = np.array([[3.0, 1.0], [2.0, 2.0], [1.0, 3.0], [1.0, 1.0], [2.0, 0.5]])
    f = extract_pareto_front(both, MAXMAX).objectives
    assert hypervolume(f, (0, 0), MAXMAX) == 6.0
    # max-min: the reference sits at the worst value of the minimized objective
    assert hypervolume([[3.0, -1.0], [1.0, -3.0]], (0, 0), MAXMIN) == 3.0 + 2.0


def test_phv_examples():
    truth = [[2.0, 1.0], [1.0, 2.0]]
    assert phv(truth, truth, (0, 0), MAXMAX) == 1.0
    assert phv([[2.0, 1.0]], truth, (0, 0), MAXMAX) == pytest.approx(2.0 / 3.0, abs=1e-12)
    assert phv(np.zeros((0, 2)), truth, (0, 0), MAXMAX) == 0.0


def test_data_usage_examples():
    assert data_usage(216, 402) == pytest.approx(0.5373, abs=5e-5)
    assert f"{100 * data_usage(216, 402):.2f}%" == "53.73%"
    assert data_usage(402, 402) == 1.0
    assert data_usage(100, 402) == pytest.approx(0.2488, abs=5e-5)


def test_hv2d_matches_mc():
    rng = np.random.default_rng(0)
    for _ in range(5):
        P = rng.uniform(size=(int(rng.integers(1, 15)), 2))
        P = extract_pareto_front(P, MAXMAX).objectives
        want = mc_hypervolume(P, np.zeros(2), samples=200_000, seed=1)
        assert hypervolume(P, (0, 0), MAXMAX) == pytest.approx(want, rel=0.01)


def test_hv3d_matches_inclusion_exclusion():
    rng = np.random.default_rng(1)
    for _ in range(30):
        P = rng.uniform(size=(int(rng.integers(1, 9)), 3))
        assert hypervolume_canonical(P, np.zeros(3)) == pytest.approx(
            inclusion_exclusion_hv(P, np.zeros(3)), abs=1e-12)


@given(arrays(np.float64, st.tuples(st.integers(1, 8), st.just(2)),
              elements=st.floats(0, 10, allow_nan=False)))
def test_hv2d_matches_inclusion_exclusion(P):
    assert hypervolume_canonical(P, np.zeros(2)) == pytest.approx(
        inclusion_exclusion_hv(P, np.zeros(2)), abs=1e-9)


@given(arrays(np.float64, st.tuples(st.integers(2, 10), st.just(2)),
              elements=st.floats(0, 10, allow_nan=False)))
def test_hv_monotone_under_superset(P):
    sub = extract_pareto_front(P[:-1], MAXMAX).objectives
    full = extract_pareto_front(P, MAXMAX).objectives
    assert hypervolume(full, (0, 0), MAXMAX) >= hypervolume(sub, (0, 0), MAXMAX) - 1e-12


@given(point_sets, point_sets, st.floats(-50, 50), st.floats(-50, 50), st.randoms(use_true_random=False))
def test_gd_igd_invariances(A, P, dx, dy, rnd):
    shift = np.array([dx, dy])
    perm = list(range(A.shape[0]))
    rnd.shuffle(perm)
    for conv in ("paper", "classic"):
        g = gd(A, P, conv)
        assert gd(A[perm], P, conv) == pytest.approx(g, abs=1e-9)
        assert gd(A + shift, P + shift, conv) == pytest.approx(g, rel=1e-6, abs=1e-6)
        assert igd(A, P, conv) == gd(P, A, conv)


def test_gd_zero_iff_equal_sets():
    P = np.array([[1.0, 3.0], [2.0, 2.0]])
    assert gd(P, P) == 0.0 and igd(P, P) == 0.0
    assert igd(P[:1], P) > 0.0


def test_evaluate_report():
    Y = np.array([[1.0, 3.0], [2.0, 2.0], [3.0, 1.0], [0.5, 0.5]])
    spec = MAXMAX.with_worst_corner(Y)
    scaler = ObjectiveScaler.from_objectives(Y, spec)
    truth = extract_pareto_front(Y, spec).objectives
    rep = evaluate(Y[[0, 3]], truth, spec, scaler, 2, 4)
    assert rep.points_used == 2 and rep.data_usage == 0.5
    assert 0.0 < rep.phv < 1.0
    # normalized HV uses the pool's min-max box: (1,3) -> (0.2, 1), ref (0.5, 0.5) -> (0, 0)
    assert rep.hv == pytest.approx(0.2, abs=1e-12)
    full = evaluate(Y, truth, spec, scaler, 4, 4)
    assert full.gd == 0.0 and full.igd == 0.0 and full.phv == 1.0
    empty = evaluate(np.zeros((0, 2)), truth, spec, scaler, 0, 4)
    assert empty.phv == 0.0 and math.isnan(empty.gd)
