import numpy as np
import pytest

from src.core.signal_graphs import (
    DeltaPolicy,
    Direction,
    FeatureGrouping,
    GraphSet,
    MeasurementRecord,
    PartitionConfig,
    SubsetPartition,
    bind_partition,
    build_graph,
    build_path_graph,
    fit_normalization,
    group_records,
    mask_delta,
    normalize_features,
    split_dataset,
    validate_partition,
)
from src.errors import ConfigError, EmptySignal, InvalidConfig, PartitionError, SchemaError


def records(signal, times, values=None, entity="e1"):
    values = values if values is not None else [float(i) for i in range(len(times))]
    return [MeasurementRecord(entity, signal, t, (v,)) for t, v in zip(times, values)]


def test_path_graph_sorts_and_fills_delta():
    graph = build_path_graph(records("hr", [12.0, 0.0, 5.0], [3.0, 1.0, 2.0]))
    np.testing.assert_array_equal(graph.node_timestamps, [0.0, 5.0, 12.0])
    np.testing.assert_array_equal(graph.node_features[:, 0], [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(graph.delta[:, 2], [-12.0, -7.0, 0.0])
    assert graph.edges == ((0, 1), (1, 2))


def test_forward_reachability_runs_from_earlier_nodes():
    graph = build_path_graph(records("hr", [0.0, 5.0, 12.0]))
    expected = np.array([[1, 1, 1], [0, 1, 1], [0, 0, 1]], dtype=bool)
    np.testing.assert_array_equal(graph.reach_mask, expected)
    backward = build_path_graph(records("hr", [0.0, 5.0, 12.0]), Direction.BACKWARD)
    np.testing.assert_array_equal(backward.reach_mask, expected.T)
    both = build_path_graph(records("hr", [0.0, 5.0, 12.0]), Direction.BIDIRECTIONAL)
    assert both.reach_mask.all()


def test_single_measurement():
    graph = build_path_graph(records("hr", [4.0]))
    assert graph.delta.tolist() == [[0.0]]
    assert graph.reach_mask.tolist() == [[True]]


def test_tied_timestamps_keep_input_order():
    graph = build_path_graph(records("hr", [3.0, 3.0], [10.0, 20.0]))
    assert graph.node_features[:, 0].tolist() == [10.0, 20.0]
    assert graph.delta[0, 1] == 0.0
    assert graph.edges == ((0, 1),)


def test_empty_signal_raises():
    with pytest.raises(EmptySignal):
        build_path_graph([])


def test_group_records_counts():
    rows = []
    for entity in ("e1", "e2"):
        for signal in ("a", "b", "c"):
            rows += records(signal, [1.0, 2.0], entity=entity)
    rows += records("a", [3.0, 4.0, 5.0], entity="e1")
    graph_sets = group_records(rows, {"e1": 1, "e2": 0})
    assert [gs.entity_id for gs in graph_sets] == ["e1", "e2"]
    assert all(len(gs.graphs) <= 3 for gs in graph_sets)
    assert graph_sets[0].graphs_of("a")[0].num_nodes == 5


def test_unknown_signal_in_vocabulary_raises():
    with pytest.raises(SchemaError):
        group_records(records("zz", [1.0]), {"e1": 1}, vocabulary=["a"])


def test_explicit_edges_use_transitive_closure():
    graph = build_graph("cascade", np.ones((4, 1)), np.arange(4.0), [(0, 1), (0, 2), (2, 3)])
    assert graph.reach_mask[0, 3]
    assert not graph.reach_mask[1, 3]


def test_adjacent_only_counts(make_path):
    both = make_path("x", np.zeros(4), np.arange(4.0), Direction.BIDIRECTIONAL)
    assert mask_delta(both, DeltaPolicy.ADJACENT_ONLY).reach_mask.sum() == 4 + 2 * 3
    forward = make_path("x", np.zeros(4), np.arange(4.0))
    assert mask_delta(forward, DeltaPolicy.ADJACENT_ONLY).reach_mask.sum() == 4 + 3


def test_window_policy(make_path):
    graph = make_path("x", np.zeros(5), np.arange(5.0))
    assert mask_delta(graph, DeltaPolicy.WINDOW, 2).reach_mask.sum() == 5 + 4 + 3
    assert mask_delta(graph, DeltaPolicy.FULL) is graph
    with pytest.raises(InvalidConfig):
        mask_delta(graph, DeltaPolicy.WINDOW, 0)


def test_normalisation_z_scores(make_path):
    train = [
        GraphSet("e1", (make_path("x", [8.0, 12.0], [0.0, 1.0]),), 0),
        GraphSet("e2", (make_path("y", [3.0, 3.0], [0.0, 1.0]),), 1),
    ]
    stats = fit_normalization(train)
    assert stats.feature_mean["x"] == [10.0]
    assert stats.feature_std["x"] == [2.0]
    test = [GraphSet("e3", (make_path("x", [14.0], [0.0]), make_path("y", [3.0], [0.0])), 1)]
    out = normalize_features(test, stats)[0]
    assert out.graphs_of("x")[0].node_features[0, 0] == pytest.approx(2.0)
    assert out.graphs_of("y")[0].node_features[0, 0] == 0.0


def test_time_normalisation_scales_delta(make_path):
    train = [GraphSet("e1", (make_path("x", [1.0, 2.0, 3.0], [0.0, 10.0, 20.0]),), 0)]
    stats = fit_normalization(train, normalize_timestamps=True)
    graph = normalize_features(train, stats)[0].graphs[0]
    scale = np.std([0.0, 10.0, 20.0])
    np.testing.assert_allclose(graph.delta, train[0].graphs[0].delta / scale)


def test_partition_with_seven_subsets_over_seventeen_signals():
    signals = [f"b{i:02d}" for i in range(17)]
    sizes = [3, 3, 2, 3, 2, 2, 2]
    subsets, start = [], 0
    for size in sizes:
        subsets.append(tuple(signals[start:start + size]))
        start += size
    report = validate_partition(
        SubsetPartition(subsets=tuple(subsets)), {s: FeatureGrouping.single(1) for s in signals}, signals
    )
    assert report.ok
    assert len(report.mixed_subsets) == 7


def test_overlapping_partition_names_the_signal():
    partition = SubsetPartition(subsets=(("a", "b"), ("b",)))
    with pytest.raises(PartitionError, match="'b'"):
        validate_partition(partition, {s: FeatureGrouping.single(1) for s in "ab"}, ["a", "b"])


def test_uncovered_signal_raises():
    with pytest.raises(PartitionError, match="'c'"):
        validate_partition(SubsetPartition(subsets=(("a",),)), {"a": FeatureGrouping.single(1)}, ["a", "c"])


def test_mixed_widths_in_one_subset_raise():
    groupings = {"a": FeatureGrouping.single(1), "b": FeatureGrouping.single(3)}
    with pytest.raises(PartitionError):
        validate_partition(SubsetPartition(subsets=(("a", "b"),)), groupings, ["a", "b"])


def test_feature_groups_must_partition_indices():
    with pytest.raises(ConfigError):
        FeatureGrouping(((0,), (0, 1)))


def test_bind_rejects_two_graphs_in_single_subset(make_path):
    sample = GraphSet("e", (make_path("a", [1.0], [0.0]), make_path("a", [2.0], [1.0])), 0)
    with pytest.raises(PartitionError):
        bind_partition([sample], SubsetPartition(subsets=(("a",),)))


def test_collector_subset_takes_small_graphs(make_path):
    partition = PartitionConfig(subsets=[["a"], ["b"]], collectors={1: 1}).partition()
    sample = GraphSet("e", (make_path("a", [1.0, 2.0], [0.0, 1.0]), make_path("a", [3.0], [0.0])), 0)
    bound = bind_partition([sample], partition)[0]
    assert bound.partition_binding == (0, 1)


def test_partition_config_round_trip():
    config = PartitionConfig(
        subsets=[["a", "b"], ["c"]], feature_groups={"c": [[0], [1, 2]]}, delta_policy="window", window=2
    )
    again = PartitionConfig.from_dict(config.to_dict())
    assert again.to_dict() == config.to_dict()
    assert again.groupings({"a": 1, "b": 1, "c": 3})["c"].groups == ((0,), (1, 2))


def test_split_is_seeded_and_exhaustive(make_path):
    data = [GraphSet(f"e{i}", (make_path("a", [float(i)], [0.0]),), i % 2) for i in range(20)]
    first = split_dataset(data, seed=4)
    second = split_dataset(data, seed=4)
    assert [len(part) for part in first] == [16, 2, 2]
    assert [[s.entity_id for s in part] for part in first] == [[s.entity_id for s in part] for part in second]
    ids = sorted(s.entity_id for part in first for s in part)
    assert ids == sorted(s.entity_id for s in data)


def test_delta_is_antisymmetric_and_telescopes(rng):
    times = np.cumsum(rng.exponential(3.0, size=6))
    graph = build_path_graph(records("hr", rng.permutation(times).tolist()), Direction.BIDIRECTIONAL)
    delta = graph.delta
    np.testing.assert_array_equal(delta, -delta.T)
    for i in range(6):
        for j in range(i + 1, 6):
            for k in range(j + 1, 6):
                assert delta[k, i] == pytest.approx(delta[k, j] + delta[j, i], abs=1e-12)
