import numpy as np
import pytest

from src.core.treemetric import (
    ReadCounter,
    WeightedPath,
    distance_matrix,
    four_point_check,
    random_path,
    reconstruct_path,
    same_up_to_reversal,
    temporal_distance_matrix,
    validate_metric,
)
from src.errors import DegenerateWeights, InvalidMetric, NotAPathMetric

SQUARE = np.array([[0, 1, 2, 1], [1, 0, 1, 2], [2, 1, 0, 1], [1, 2, 1, 0]], dtype=float)
STAR = np.array([[0, 1, 1, 1], [1, 0, 2, 2], [1, 2, 0, 2], [1, 2, 2, 0]], dtype=float)


def test_path_metric_passes_four_point(rng):
    d = distance_matrix(random_path(7, rng))
    assert four_point_check(d) == (True, None)


def test_cycle_fails_four_point():
    ok, quadruple = four_point_check(SQUARE)
    assert not ok
    assert quadruple == (0, 1, 2, 3)


def test_three_points_always_pass():
    d = np.array([[0, 1, 1.5], [1, 0, 1], [1.5, 1, 0]])
    assert four_point_check(d) == (True, None)


def test_reconstruct_small_path():
    path = reconstruct_path(np.array([[0, 2, 5], [2, 0, 3], [5, 3, 0]], dtype=float))
    assert path.order == [0, 1, 2]
    assert path.weights == [2.0, 3.0]


def test_reconstruct_single_vertex():
    path = reconstruct_path(np.zeros((1, 1)))
    assert path.order == [0] and path.weights == []


def test_star_is_not_a_path():
    assert four_point_check(STAR)[0]
    with pytest.raises(NotAPathMetric):
        reconstruct_path(STAR)


def test_coincident_vertices_are_degenerate():
    with pytest.raises(DegenerateWeights):
        reconstruct_path(np.zeros((2, 2)))
    with pytest.raises(DegenerateWeights):
        WeightedPath(order=[0, 1], weights=[0.0])


@pytest.mark.parametrize(
    "matrix",
    [
        np.zeros((2, 3)),
        np.array([[0.0, 1.0], [2.0, 0.0]]),
        np.array([[0.0, -1.0], [-1.0, 0.0]]),
        np.array([[1.0, 1.0], [1.0, 0.0]]),
        np.array([[0, 1, 5], [1, 0, 1], [5, 1, 0]], dtype=float),
        np.array([[0.0, np.nan], [np.nan, 0.0]]),
    ],
)
def test_invalid_matrices(matrix):
    with pytest.raises(InvalidMetric):
        validate_metric(matrix)


def test_relative_tolerance_accepts_rounding():
    d = distance_matrix(WeightedPath(order=[0, 1, 2], weights=[1e6, 1e6]))
    d[0, 2] = d[2, 0] = 2e6 * (1 - 1e-8)
    with pytest.raises(NotAPathMetric):
        reconstruct_path(d)
    assert reconstruct_path(d, rtol=1e-6).order == [0, 1, 2]


def test_reconstruction_reads_quadratic_entries(rng):
    n = 30
    counter = ReadCounter(distance_matrix(random_path(n, rng)))
    reconstruct_path(counter.all(), counter=counter)
    assert counter.reads <= 4 * n * n


def test_temporal_distances_recover_timestamps(make_path):
    graph = make_path("hr", [1.0, 2.0, 3.0], [0.0, 5.0, 12.0])
    path = reconstruct_path(temporal_distance_matrix(graph))
    assert same_up_to_reversal(path.order, [0, 1, 2])
    assert sorted(path.weights) == [5.0, 7.0]


@pytest.mark.slow
def test_random_paths_round_trip():
    rng = np.random.default_rng(42)
    for _ in range(1000):
        n = int(rng.integers(2, 65))
        truth = random_path(n, rng)
        found = reconstruct_path(distance_matrix(truth))
        assert same_up_to_reversal(found.order, truth.order)
        expected = truth.weights if found.order == truth.order else truth.weights[::-1]
        np.testing.assert_allclose(found.weights, expected, atol=1e-9)
