import itertools
import math

import numpy as np
import pytest

from src.core.diffcore import finite_difference_grad, value_and_grad
from src.core.extgnan import EncoderAblation, ExtGnanParams, graph_representation
from src.core.signal_graphs import (
    FeatureGrouping,
    GraphSet,
    SubsetPartition,
    bind_partition,
    build_graph,
    empty_graph,
    path_edges,
)
from src.core.superman import (
    DeepSetsParams,
    Link,
    ModelAblation,
    ModelConfig,
    SubsetModule,
    SupermanModel,
    assign_subsets,
    build_model,
    find_infeasibility_certificate,
    forward,
    forward_batch,
    model_from_dict,
    model_parameters,
    model_to_dict,
    predict_logits,
    predict_proba,
    subset_representation,
    xor_threshold_system,
    xor_witness_model,
    xor_witness_transforms,
)
from src.core.synth import feature_xor_dataset, set_xor_dataset
from src.core.training import bce_loss
from src.errors import ConfigError, PartitionError, SchemaError


def node(signal, features, t=0.0):
    return build_graph(signal, np.array([features], dtype=np.float64), np.array([t]), [])


def test_singleton_subset_passes_graph_representation_through(small_model, irregular_data):
    sample = irregular_data.graph_sets[0]
    graph = sample.graphs_of("s0")[0]
    module = small_model.subsets[0]
    expected = graph_representation(module.encoder, graph)
    np.testing.assert_array_equal(subset_representation(module, [graph]).data, expected)


def test_identity_mixer_sums_graph_representations():
    encoder = ExtGnanParams(rho=None, psi=[None], grouping=FeatureGrouping.single(2),
                            ablation=EncoderAblation.RHO_CONST_ONE)
    module = SubsetModule("ab", encoder, DeepSetsParams())
    g1, g2 = node("a", [1.0, 2.0]), node("b", [0.5, -1.0])
    np.testing.assert_allclose(subset_representation(module, [g1, g2]).data, [1.5, 1.0])


def test_set_xor_mixer():
    witness = xor_witness_transforms()
    encoder = ExtGnanParams(rho=witness["rho_one"], psi=[None], grouping=FeatureGrouping.single(1))
    module = SubsetModule("ab", encoder, DeepSetsParams(g=witness["mixer_g"]))
    for x1, x2 in itertools.product((0, 1), repeat=2):
        rep = subset_representation(module, [node("a", [x1]), node("b", [x2])])
        assert rep.data[0] == x1 ^ x2


def test_empty_subsets_give_output_bias(small_model):
    sample = GraphSet("empty", (), 0)
    assert forward(small_model, sample) == pytest.approx(0.25)


def test_single_node_with_unit_rho_adds_features():
    encoder = ExtGnanParams(rho=None, psi=[None], grouping=FeatureGrouping.single(3),
                            ablation=EncoderAblation.RHO_CONST_ONE)
    model = SupermanModel([SubsetModule("x", encoder)], SubsetPartition(subsets=(("x",),)), output_bias=None)
    sample = GraphSet("e", (node("x", [1.0, 2.0, 4.0]),), 1)
    assert forward(model, sample) == pytest.approx(7.0)


@pytest.mark.parametrize("set_level", [False, True])
def test_xor_witness_returns_truth_table(set_level):
    data = set_xor_dataset(1) if set_level else feature_xor_dataset(1)
    logits = predict_logits(xor_witness_model(set_level), data.graph_sets)
    assert logits.tolist() == [0.0, 1.0, 1.0, 0.0]
    probs = [predict_proba(xor_witness_model(set_level), s) for s in data.graph_sets]
    assert probs == pytest.approx([1 / (1 + math.exp(-v)) for v in (0.0, 1.0, 1.0, 0.0)], abs=1e-12)


def test_probability_is_clamped_for_huge_logits():
    encoder = ExtGnanParams(rho=None, psi=[None], grouping=FeatureGrouping.single(1),
                            ablation=EncoderAblation.RHO_CONST_ONE)
    model = SupermanModel([SubsetModule("x", encoder)], SubsetPartition(subsets=(("x",),)))
    p = predict_proba(model, GraphSet("e", (node("x", [1e6]),), 1))
    assert p == 1.0


def test_identity_link_rejects_probabilities():
    encoder = ExtGnanParams(rho=None, psi=[None], grouping=FeatureGrouping.single(1),
                            ablation=EncoderAblation.RHO_CONST_ONE)
    model = SupermanModel([SubsetModule("x", encoder)], SubsetPartition(subsets=(("x",),)), link=Link.IDENTITY)
    with pytest.raises(ConfigError):
        predict_proba(model, GraphSet("e", (node("x", [1.0]),), 1))


def test_unknown_signal_type_raises(small_model):
    with pytest.raises(SchemaError):
        forward(small_model, GraphSet("e", (node("zz", [1.0]),), 0))


def test_two_graphs_in_single_subset_raise(small_model):
    with pytest.raises(PartitionError):
        forward(small_model, GraphSet("e", (node("s0", [1.0]), node("s0", [2.0], 1.0)), 0))


def test_contributions_add_up_to_logit(mixed_setup):
    model, samples = mixed_setup
    logits, contributions = forward_batch(model, samples)
    np.testing.assert_allclose(logits.data, contributions.data.sum(axis=1) + model.bias_value, atol=1e-12)


def test_mixed_subset_is_permutation_invariant(mixed_setup):
    model, _ = mixed_setup
    gen = np.random.default_rng(0)
    graphs = [
        build_graph(s, gen.normal(size=(2, 2)), np.array([0.0, float(i + 1)]), [(0, 1)])
        for i, s in enumerate("ababa")
    ]
    module = model.subsets[0]
    reference = subset_representation(module, graphs).data
    for order in itertools.permutations(range(5)):
        again = subset_representation(module, [graphs[i] for i in order]).data
        assert np.array_equal(again, reference)


def test_empty_subset_contributes_nothing(mixed_setup):
    model, samples = mixed_setup
    only_c = GraphSet("c-only", tuple(g for g in samples[0].graphs if g.signal_type == "c"), 1)
    _, contributions = forward_batch(model, [only_c])
    assert contributions.data[0, 0] == 0.0


def test_batch_and_single_forward_agree(mixed_setup):
    model, samples = mixed_setup
    batch = predict_logits(model, samples)
    single = [forward(model, s) for s in samples]
    np.testing.assert_allclose(batch, single, atol=1e-12)


def jitter(params, seed, scale=0.1):
    """Move every parameter, biases included, off the zero-initialised kinks of ReLU."""
    gen = np.random.default_rng(seed)
    for p in params.values():
        p.data = p.data + scale * gen.normal(size=p.data.shape)


def assert_gradients_match(model, samples):
    params = model_parameters(model)

    def objective():
        logits, _ = forward_batch(model, samples)
        return bce_loss(logits, [s.label for s in samples])

    _, grads = value_and_grad(objective, params)
    numeric = finite_difference_grad(objective, params, h=1e-6)
    for name in params:
        scale = np.maximum(np.abs(numeric[name]), 1e-2)
        assert (np.abs(grads[name] - numeric[name]) / scale).max() < 1e-4, name


def test_bce_gradients_match_finite_differences(mixed_setup):
    model, samples = mixed_setup
    params = model_parameters(model)
    jitter(params, seed=11)
    assert any(k.startswith("subset0.f.") for k in params)
    assert any(k.startswith("subset0.g.") for k in params)
    assert any(".rho." in k for k in params) and any(".psi1." in k for k in params)
    assert_gradients_match(model, samples)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(100))
def test_gradients_match_on_random_configurations(seed):
    gen = np.random.default_rng(seed)
    activation = ("relu", "tanh")[seed % 2]
    config = ModelConfig(
        hidden=int(gen.integers(2, 6)), layers=int(gen.integers(2, 4)), dropout=0.0, activation=activation
    )
    partition = SubsetPartition(subsets=(("a", "b"), ("c",)))
    groupings = {"a": FeatureGrouping.single(2), "b": FeatureGrouping.single(2), "c": FeatureGrouping(((0,), (1,)))}
    model = build_model(partition, groupings, config, seed=seed)
    jitter(model_parameters(model), seed=seed + 1000)
    samples = []
    for i in range(3):
        graphs = []
        for signal, width in (("a", 2), ("b", 2), ("c", 2)):
            n = int(gen.integers(1, 4))
            times = np.sort(gen.uniform(0, 5, n))
            graphs.append(build_graph(signal, gen.normal(size=(n, width)), times, path_edges(n)))
        samples.append(GraphSet(f"r{i}", tuple(graphs), i % 2))
    assert_gradients_match(model, bind_partition(samples, partition))


@pytest.mark.parametrize("ablation", [a.value for a in ModelAblation])
def test_every_ablation_builds_and_runs(ablation, mixed_setup):
    _, samples = mixed_setup
    partition = SubsetPartition(subsets=(("a", "b"), ("c",)))
    groupings = {"a": FeatureGrouping.single(2), "b": FeatureGrouping.single(2), "c": FeatureGrouping(((0,), (1, 2)))}
    model = build_model(partition, groupings, ModelConfig(hidden=4, layers=2, ablation=ablation), seed=1)
    assert predict_logits(model, samples).shape == (len(samples),)
    if ablation == "mean_pool":
        assert model.subsets[0].mixer.f is None and model.subsets[0].mixer.pooling.value == "mean"
    if ablation == "gnan":
        assert model.subsets[1].encoder.grouping.is_univariate


def test_checkpoint_dict_round_trip(mixed_setup):
    model, samples = mixed_setup
    restored = model_from_dict(model_to_dict(model))
    np.testing.assert_array_equal(predict_logits(restored, samples), predict_logits(model, samples))


def test_assign_subsets_orders_graphs_canonically(mixed_setup):
    model, samples = mixed_setup
    reversed_sample = GraphSet("r", tuple(reversed(samples[0].graphs)), 0)
    a = [g.signal_type for g in assign_subsets(model, samples[0])[0]]
    b = [g.signal_type for g in assign_subsets(model, reversed_sample)[0]]
    assert a == b == ["a", "b"]


def test_xor_threshold_system_is_infeasible():
    certificate = find_infeasibility_certificate(*xor_threshold_system())
    assert certificate is not None
    assert certificate.combined == (1, 1, 1, 1)


def test_feasible_system_has_no_certificate():
    negative = np.array([[1, 0, 1, 0]])
    positive = np.array([[0, 1, 0, 1]])
    assert find_infeasibility_certificate(negative, positive) is None


def test_empty_graph_in_mixed_subset(mixed_setup):
    model, _ = mixed_setup
    rep = subset_representation(model.subsets[0], [empty_graph("a", 2)])
    assert rep.shape == (2,)
