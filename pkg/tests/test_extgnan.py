import numpy as np
import pytest

from src.core.diffcore import Mlp, Tensor, add, init_params, mul
from src.core.extgnan import (
    DeltaMode,
    EncoderAblation,
    EncoderConfig,
    ExtGnanParams,
    build_extgnan,
    graph_representation,
    node_contribution_terms,
    node_representation,
)
from src.core.signal_graphs import Direction, FeatureGrouping, build_graph, empty_graph, path_edges
from src.errors import ConfigError, InvalidNode, InvalidShape


def constant_rho(value):
    return lambda d: add(mul(d, 0.0), value)


def random_graph(rng, n, d, direction=Direction.FORWARD):
    times = np.sort(rng.uniform(0, 10, n))
    return build_graph("g", rng.normal(size=(n, d)), times, path_edges(n, direction))


def oracle_nodes(params, graph):
    """Per-pair double loop over nodes, groups and features."""
    n, d = graph.num_nodes, graph.feature_dim
    out = np.zeros((n, d))
    for j in range(n):
        for w in range(n):
            if params.delta_mode == DeltaMode.MASKED and not graph.reach_mask[w, j]:
                continue
            r = _rho(params, graph.delta[w, j])
            col = 0
            for net, group in zip(params.psi, params.grouping.groups):
                block = graph.node_features[w, list(group)]
                shaped = _mlp_vector(net, block) if net is not None else block
                for c, value in enumerate(shaped):
                    out[j, col + c] += r * value
                col += len(group)
    return out


def _rho(params, delta):
    x = delta / params.time_scale
    if isinstance(params.rho, Mlp):
        return _mlp_scalar(params.rho, x)
    return params.rho(Tensor(np.array([[x]]))).data.item()


def _mlp_vector(net, x):
    h = np.asarray(x, dtype=np.float64)
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ w.data + b.data
        if k < len(net.weights) - 1:
            h = np.maximum(h, 0.0)
    return h


def _mlp_scalar(net, x):
    return _mlp_vector(net, np.array([x]))[0]


def test_single_node_identity_psi():
    graph = build_graph("g", np.array([[2.0, -1.0]]), np.zeros(1), [])
    params = ExtGnanParams(rho=constant_rho(0.5), psi=[None], grouping=FeatureGrouping.single(2),
                           ablation=EncoderAblation.PSI_IDENTITY)
    np.testing.assert_allclose(node_representation(params, graph, 0), [1.0, -0.5])


def test_rho_one_literal_mode_sums_all_features(rng):
    graph = random_graph(rng, 3, 2)
    params = ExtGnanParams(rho=None, psi=[None], grouping=FeatureGrouping.single(2),
                           delta_mode=DeltaMode.LITERAL, ablation=EncoderAblation.RHO_CONST_ONE)
    total = graph.node_features.sum(axis=0)
    for j in range(3):
        np.testing.assert_allclose(node_representation(params, graph, j), total, atol=1e-12)


def test_random_graph_matches_double_loop(rng):
    grouping = FeatureGrouping(((0, 2), (1,)))
    params = build_extgnan(grouping, EncoderConfig(hidden=5, layers=3, time_scale=4.0), seed=2)
    graph = random_graph(rng, 4, 3)
    expected = oracle_nodes(params, graph)
    # representation blocks follow group order (0, 2) then (1,)
    for j in range(4):
        np.testing.assert_allclose(node_representation(params, graph, j), expected[j], rtol=0, atol=1e-12)


def test_univariate_grouping_matches_per_feature_loop(rng):
    params = build_extgnan(FeatureGrouping.singletons(3), EncoderConfig(hidden=4, layers=2), seed=8)
    graph = random_graph(rng, 5, 3, Direction.BIDIRECTIONAL)
    expected = oracle_nodes(params, graph)
    got = np.stack([node_representation(params, graph, j) for j in range(5)])
    np.testing.assert_allclose(got, expected, rtol=0, atol=1e-12)


def test_node_index_out_of_range(rng):
    params = build_extgnan(FeatureGrouping.single(1), EncoderConfig(hidden=3, layers=2), seed=0)
    with pytest.raises(InvalidNode):
        node_representation(params, random_graph(rng, 2, 1), 2)


def test_graph_representation_of_single_node_equals_node(rng):
    params = build_extgnan(FeatureGrouping.single(2), EncoderConfig(hidden=3, layers=2), seed=1)
    graph = random_graph(rng, 1, 2)
    np.testing.assert_array_equal(graph_representation(params, graph), node_representation(params, graph, 0))


def test_unreachable_nodes_keep_only_self_terms():
    graph = build_graph("g", np.array([[1.0], [3.0]]), np.array([0.0, 2.0]), [])
    params = ExtGnanParams(rho=constant_rho(0.7), psi=[lambda x: mul(x, 2.0)], grouping=FeatureGrouping.single(1))
    assert graph_representation(params, graph)[0] == pytest.approx(0.7 * (2.0 + 6.0))


def test_empty_graph_gives_zero_vector():
    params = build_extgnan(FeatureGrouping.single(3), EncoderConfig(hidden=3, layers=2), seed=1)
    np.testing.assert_array_equal(graph_representation(params, empty_graph("g", 3)), np.zeros(3))


def test_zero_rho_gives_zero_terms(rng):
    params = ExtGnanParams(rho=constant_rho(0.0), psi=[None], grouping=FeatureGrouping.single(2))
    assert not node_contribution_terms(params, random_graph(rng, 4, 2)).any()


def test_contribution_terms_sum_to_node_totals(rng):
    params = build_extgnan(FeatureGrouping(((0,), (1,))), EncoderConfig(hidden=4, layers=3), seed=3)
    graph = random_graph(rng, 6, 2)
    terms = node_contribution_terms(params, graph)
    for j in range(6):
        assert terms[:, j].sum() == pytest.approx(node_representation(params, graph, j).sum(), abs=1e-12)
    single = random_graph(rng, 1, 2)
    assert node_contribution_terms(params, single)[0, 0] == pytest.approx(node_representation(params, single, 0).sum())


def test_shape_network_widths_are_checked():
    with pytest.raises(InvalidShape):
        ExtGnanParams(rho=None, psi=[init_params(Mlp([2, 3, 1]), 0)], grouping=FeatureGrouping.single(2))


def test_gnan_ablation_needs_singletons():
    with pytest.raises(ConfigError):
        ExtGnanParams(rho=None, psi=[None], grouping=FeatureGrouping.single(2),
                      ablation=EncoderAblation.GNAN_UNIVARIATE)


def test_node_mlp_ablation_has_no_cross_node_terms(rng):
    params = build_extgnan(FeatureGrouping.single(2), EncoderConfig(hidden=4, layers=2, ablation="node_mlp"), seed=0)
    terms = node_contribution_terms(params, random_graph(rng, 4, 2))
    assert np.count_nonzero(terms - np.diag(np.diag(terms))) == 0
