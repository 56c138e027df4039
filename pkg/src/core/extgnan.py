"""
Extended GNAN encoder.

A signal graph is encoded by pure summation. For node ``j`` and feature group
``F_l``::

    [h_j]_{F_l} = sum_w rho(delta[w][j]) * psi_l([x_w]_{F_l})

and the graph representation is ``h_G = sum_j h_j``. ``rho`` is a scalar
network on temporal distances, ``psi_l`` a same-width shape network per
feature group. Representations are laid out as concatenated group blocks.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import ConfigError, InvalidNode, InvalidShape
from .diffcore import (
    Activation,
    Mlp,
    ParameterRegistry,
    Tensor,
    Transform,
    apply_transform,
    concat,
    init_params,
    mlp_from_dict,
    mlp_to_dict,
    mul,
    reshape,
    segment_sum,
    take,
    transform_parameters,
)
from .signal_graphs import FeatureGrouping, SignalGraph

logger = logging.getLogger(__name__)


class DeltaMode(str, Enum):
    MASKED = "masked"  # only reachable pairs, diagonal included
    LITERAL = "literal"  # every ordered pair


class EncoderAblation(str, Enum):
    NONE = "none"
    RHO_CONST_ONE = "rho_const_one"
    PSI_IDENTITY = "psi_identity"
    NODE_MLP = "node_mlp"
    GNAN_UNIVARIATE = "gnan_univariate"


@dataclass
class ExtGnanParams:
    """Parameters of one subset encoder.

    ``node_net`` is only used by the ``node_mlp`` ablation, where each node is
    mapped on its own (width d to d) and no distance weighting takes place.
    """

    rho: Transform
    psi: List[Transform]
    grouping: FeatureGrouping
    delta_mode: DeltaMode = DeltaMode.MASKED
    ablation: EncoderAblation = EncoderAblation.NONE
    time_scale: float = 1.0
    node_net: Transform = None

    def __post_init__(self) -> None:
        self.delta_mode = DeltaMode(self.delta_mode)
        self.ablation = EncoderAblation(self.ablation)
        if self.time_scale <= 0:
            raise ConfigError(f"time_scale must be positive, got {self.time_scale}")
        if len(self.psi) != len(self.grouping.groups):
            raise ConfigError(f"{len(self.psi)} shape networks for {len(self.grouping.groups)} feature groups")
        for net, group in zip(self.psi, self.grouping.groups):
            if isinstance(net, Mlp) and (net.in_dim != len(group) or net.out_dim != len(group)):
                raise InvalidShape(f"Shape network for group {group} maps {net.in_dim} -> {net.out_dim}")
        if isinstance(self.rho, Mlp) and (self.rho.in_dim != 1 or self.rho.out_dim != 1):
            raise InvalidShape(f"Distance network must map 1 -> 1, got {self.rho.in_dim} -> {self.rho.out_dim}")
        if self.ablation == EncoderAblation.GNAN_UNIVARIATE and not self.grouping.is_univariate:
            raise ConfigError("gnan_univariate needs every feature group to be a singleton")
        if self.ablation == EncoderAblation.NODE_MLP and self.node_net is None:
            raise ConfigError("node_mlp ablation needs a node network")

    @property
    def feature_dim(self) -> int:
        return self.grouping.feature_dim

    def uses_rho(self) -> bool:
        return self.ablation not in (EncoderAblation.RHO_CONST_ONE, EncoderAblation.NODE_MLP)


def _group_order(grouping: FeatureGrouping) -> List[int]:
    return [i for g in grouping.groups for i in g]


def _check_width(params: ExtGnanParams, graph: SignalGraph) -> None:
    if graph.feature_dim != params.feature_dim:
        raise InvalidShape(
            f"Graph '{graph.signal_type}' has {graph.feature_dim} features, encoder expects {params.feature_dim}"
        )


def _pairs(params: ExtGnanParams, graph: SignalGraph) -> Tuple[np.ndarray, np.ndarray]:
    """Source and target node indices of every interacting pair, target-major."""
    if params.ablation == EncoderAblation.NODE_MLP:
        idx = np.arange(graph.num_nodes)
        return idx, idx
    if params.delta_mode == DeltaMode.LITERAL:
        include = np.ones((graph.num_nodes, graph.num_nodes), dtype=bool)
    else:
        include = graph.reach_mask
    dst, src = np.nonzero(include.T)
    return src, dst


def shape_values(
    params: ExtGnanParams, features: Any, training: bool = False, rng: Optional[np.random.Generator] = None
) -> Tensor:
    """Apply every shape network to its feature block; returns (n, d) in group-block order."""
    x = features if isinstance(features, Tensor) else Tensor(features)
    if params.ablation == EncoderAblation.NODE_MLP:
        return apply_transform(params.node_net, take(x, _group_order(params.grouping), axis=1), training, rng)
    blocks = []
    for net, group in zip(params.psi, params.grouping.groups):
        block = take(x, list(group), axis=1)
        if params.ablation != EncoderAblation.PSI_IDENTITY:
            block = apply_transform(net, block, training, rng)
        blocks.append(block)
    return concat(blocks, axis=1)


def rho_values(
    params: ExtGnanParams, deltas: Any, training: bool = False, rng: Optional[np.random.Generator] = None
) -> Tensor:
    """Distance weights for a vector of temporal distances."""
    d = np.asarray(deltas, dtype=np.float64).reshape(-1)
    if not params.uses_rho():
        return Tensor(np.ones_like(d))
    out = apply_transform(params.rho, Tensor((d / params.time_scale).reshape(-1, 1)), training, rng)
    return reshape(out, (d.shape[0],))


def encode_nodes(
    params: ExtGnanParams,
    graphs: Sequence[SignalGraph],
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[Tensor, np.ndarray]:
    """Node representations of several graphs stacked row-wise.

    Returns the (N, d) representation matrix and the graph index of each row.
    """
    d = params.feature_dim
    for g in graphs:
        _check_width(params, g)
    sizes = [g.num_nodes for g in graphs]
    owner = np.repeat(np.arange(len(graphs)), sizes)
    total = int(sum(sizes))
    if total == 0:
        return Tensor(np.zeros((0, d))), owner
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
    src_all, dst_all, delta_all = [], [], []
    for g, offset in zip(graphs, offsets):
        src, dst = _pairs(params, g)
        src_all.append(src + offset)
        dst_all.append(dst + offset)
        delta_all.append(g.delta[src, dst])
    src = np.concatenate(src_all)
    dst = np.concatenate(dst_all)
    features = np.concatenate([g.node_features for g in graphs], axis=0)

    psi = shape_values(params, features, training, rng)
    if params.ablation == EncoderAblation.NODE_MLP:
        return psi, owner
    weights = rho_values(params, np.concatenate(delta_all), training, rng)
    terms = mul(reshape(weights, (src.shape[0], 1)), take(psi, src, axis=0))
    return segment_sum(terms, dst, total), owner


def encode_graphs(
    params: ExtGnanParams,
    graphs: Sequence[SignalGraph],
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    """Graph representations, one row per graph; empty graphs give zero rows."""
    nodes, owner = encode_nodes(params, graphs, training, rng)
    if nodes.shape[0] == 0:
        return Tensor(np.zeros((len(graphs), params.feature_dim)))
    return segment_sum(nodes, owner, len(graphs))


def node_representation(params: ExtGnanParams, graph: SignalGraph, j: int) -> np.ndarray:
    if not 0 <= j < graph.num_nodes:
        raise InvalidNode(f"Node {j} out of range for '{graph.signal_type}' with {graph.num_nodes} nodes")
    nodes, _ = encode_nodes(params, [graph])
    return nodes.data[j].copy()


def graph_representation(params: ExtGnanParams, graph: SignalGraph) -> np.ndarray:
    return encode_graphs(params, [graph]).data[0].copy()


def node_contribution_terms(params: ExtGnanParams, graph: SignalGraph) -> np.ndarray:
    """Scalar pair terms ``term[w][j] = rho(delta[w][j]) * sum(psi(x_w))``.

    Column ``j`` sums to the total of node ``j``'s representation.
    """
    _check_width(params, graph)
    n = graph.num_nodes
    terms = np.zeros((n, n))
    if n == 0:
        return terms
    totals = shape_values(params, graph.node_features).data.sum(axis=1)
    src, dst = _pairs(params, graph)
    if params.ablation == EncoderAblation.NODE_MLP:
        terms[src, dst] = totals[src]
        return terms
    weights = rho_values(params, graph.delta[src, dst]).data
    terms[src, dst] = weights * totals[src]
    return terms


def extgnan_parameters(params: ExtGnanParams, prefix: str = "") -> ParameterRegistry:
    registry: Dict[str, Tensor] = {}
    if params.uses_rho():
        registry.update(transform_parameters(params.rho, f"{prefix}rho."))
    if params.ablation == EncoderAblation.NODE_MLP:
        registry.update(transform_parameters(params.node_net, f"{prefix}node."))
    elif params.ablation != EncoderAblation.PSI_IDENTITY:
        for l, net in enumerate(params.psi):
            registry.update(transform_parameters(net, f"{prefix}psi{l}."))
    return registry


@dataclass
class EncoderConfig:
    hidden: int = 64
    layers: int = 3
    activation: Activation = Activation.RELU
    dropout: float = 0.0
    delta_mode: DeltaMode = DeltaMode.MASKED
    ablation: EncoderAblation = EncoderAblation.NONE
    time_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.hidden < 1 or self.layers < 1:
            raise ConfigError(f"hidden and layers must be positive, got {self.hidden} and {self.layers}")


def _dims(width_in: int, width_out: int, hidden: int, layers: int) -> List[int]:
    return [width_in] + [hidden] * (layers - 1) + [width_out]


def child_seeds(seed: int, count: int) -> List[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(count)]


def build_extgnan(grouping: FeatureGrouping, config: EncoderConfig, seed: int) -> ExtGnanParams:
    """Freshly initialised encoder for one subset."""
    seeds = child_seeds(seed, len(grouping.groups) + 2)

    def mlp(width_in: int, width_out: int, s: int) -> Mlp:
        net = Mlp(
            _dims(width_in, width_out, config.hidden, config.layers),
            activation=config.activation,
            dropout_rate=config.dropout,
        )
        return init_params(net, s)

    ablation = EncoderAblation(config.ablation)
    rho = None if ablation in (EncoderAblation.RHO_CONST_ONE, EncoderAblation.NODE_MLP) else mlp(1, 1, seeds[0])
    if ablation == EncoderAblation.PSI_IDENTITY:
        psi: List[Transform] = [None] * len(grouping.groups)
    else:
        psi = [mlp(len(g), len(g), s) for g, s in zip(grouping.groups, seeds[2:])]
    node_net = None
    if ablation == EncoderAblation.NODE_MLP:
        node_net = mlp(grouping.feature_dim, grouping.feature_dim, seeds[1])
        psi = [None] * len(grouping.groups)
    return ExtGnanParams(
        rho=rho,
        psi=psi,
        grouping=grouping,
        delta_mode=config.delta_mode,
        ablation=ablation,
        time_scale=config.time_scale,
        node_net=node_net,
    )


def extgnan_to_dict(params: ExtGnanParams) -> Dict[str, Any]:
    return {
        "grouping": [list(g) for g in params.grouping.groups],
        "delta_mode": params.delta_mode.value,
        "ablation": params.ablation.value,
        "time_scale": params.time_scale,
        "rho": mlp_to_dict(params.rho),
        "psi": [mlp_to_dict(net) for net in params.psi],
        "node_net": mlp_to_dict(params.node_net),
    }


def extgnan_from_dict(data: Dict[str, Any]) -> ExtGnanParams:
    return ExtGnanParams(
        rho=mlp_from_dict(data["rho"]),
        psi=[mlp_from_dict(net) for net in data["psi"]],
        grouping=FeatureGrouping(tuple(tuple(g) for g in data["grouping"])),
        delta_mode=data.get("delta_mode", DeltaMode.MASKED.value),
        ablation=data.get("ablation", EncoderAblation.NONE.value),
        time_scale=data.get("time_scale", 1.0),
        node_net=mlp_from_dict(data.get("node_net")),
    )
