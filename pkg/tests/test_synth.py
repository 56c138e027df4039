import pytest

from src.core.signal_graphs import GraphSet
from src.core.synth import (
    IRREGULAR_SIGNALS,
    SynthKind,
    SynthSpec,
    bayes_accuracy,
    class_balance,
    feature_xor_dataset,
    generate,
    set_xor_dataset,
)
from src.errors import ConfigError


def test_feature_xor_truth_table():
    data = feature_xor_dataset(1)
    rows = [(tuple(gs.graphs[0].node_features[0]), gs.label) for gs in data.graph_sets]
    assert rows == [((0.0, 0.0), 0), ((0.0, 1.0), 1), ((1.0, 0.0), 1), ((1.0, 1.0), 0)]
    assert data.groupings["x"].groups == ((0, 1),)
    assert feature_xor_dataset(1, grouped=False).groupings["x"].is_univariate


def test_set_xor_truth_table():
    data = set_xor_dataset(1)
    for gs in data.graph_sets:
        a = gs.graphs_of("a")[0].node_features[0, 0]
        b = gs.graphs_of("b")[0].node_features[0, 0]
        assert gs.label == int(a) ^ int(b)
    assert data.partition.subsets == (("a", "b"),)
    assert set_xor_dataset(1, paired=False).partition.subsets == (("a",), ("b",))


def test_graph_order_does_not_change_label():
    sample = set_xor_dataset(1).graph_sets[1]
    swapped = GraphSet(sample.entity_id, tuple(reversed(sample.graphs)), sample.label)
    assert swapped.label == sample.label == 1
    assert {g.signal_type for g in swapped.graphs} == {"a", "b"}


def test_xor_size_scales_with_copies():
    assert len(feature_xor_dataset(5).graph_sets) == 20
    assert class_balance(set_xor_dataset(3).graph_sets) == (6, 6)


def test_irregular_dataset_metadata(irregular_data):
    assert len(irregular_data.graph_sets) == 60
    assert irregular_data.partition.subsets == tuple((s,) for s in IRREGULAR_SIGNALS)
    metadata = irregular_data.metadata
    assert metadata["kind"] == "irregular_signal"
    assert 0.5 < metadata["bayes_accuracy"] <= 1.0
    assert "level" in metadata["rule"] and "rhythm" in metadata["rule"]
    positives, negatives = class_balance(irregular_data.graph_sets)
    assert positives > 0 and negatives > 0


def test_irregular_entities_have_level_and_rhythm(irregular_data):
    for gs in irregular_data.graph_sets:
        assert gs.graphs_of("s0")[0].num_nodes == 4
        assert gs.graphs_of("s1")[0].num_nodes == 5
        assert len({g.signal_type for g in gs.graphs}) == len(gs.graphs)


def test_generation_is_seeded():
    spec = SynthSpec(n_samples=8, seed=12, oracle_draws=100)
    a, b = generate(spec), generate(spec)
    assert [gs.label for gs in a.graph_sets] == [gs.label for gs in b.graph_sets]
    for x, y in zip(a.graph_sets, b.graph_sets):
        assert [g.node_timestamps.tolist() for g in x.graphs] == [g.node_timestamps.tolist() for g in y.graphs]


def test_more_label_noise_lowers_bayes_accuracy():
    sharp = bayes_accuracy(SynthSpec(label_noise=0.1, oracle_draws=20000))
    blurry = bayes_accuracy(SynthSpec(label_noise=2.0, oracle_draws=20000))
    assert sharp > blurry


def test_generate_dispatches_on_kind():
    data = generate(SynthSpec(kind="set_xor", n_samples=2))
    assert data.metadata["kind"] == SynthKind.SET_XOR.value
    assert data.metadata["spec"]["n_samples"] == 2
    assert len(data.graph_sets) == 8


def test_spec_validation():
    with pytest.raises(ConfigError):
        SynthSpec(n_samples=0)
    with pytest.raises(ValueError):
        SynthSpec(kind="spiral")


@pytest.mark.slow
def test_irregular_labels_are_balanced():
    data = generate(SynthSpec(n_samples=10_000, seed=11, oracle_draws=100))
    positives, _ = class_balance(data.graph_sets)
    assert 0.48 <= positives / 10_000 <= 0.52
