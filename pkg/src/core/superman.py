"""
SuperMAN: per-subset ExtGNAN encoders, DeepSets mixing and an additive readout.

The logit of a sample is ``output_bias + sum_i sum_c [h_i]_c`` where ``h_i`` is
the representation of partition subset ``i``. Subsets that can hold a single
graph pass its ExtGNAN representation through unchanged; subsets that can hold
several graphs mix them with ``g(pool(f(h_G)))``.
"""

import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from ..errors import ConfigError, PartitionError
from .diffcore import (
    Activation,
    Mlp,
    ParameterRegistry,
    Tensor,
    Transform,
    add,
    apply_transform,
    concat,
    div,
    init_params,
    mlp_from_dict,
    mlp_to_dict,
    mul,
    reshape,
    segment_sum,
    take,
    tensor_sum,
    transform_parameters,
)
from .extgnan import (
    DeltaMode,
    EncoderAblation,
    EncoderConfig,
    ExtGnanParams,
    build_extgnan,
    child_seeds,
    encode_graphs,
    extgnan_from_dict,
    extgnan_parameters,
    extgnan_to_dict,
)
from .signal_graphs import (
    TIME_UNIT,
    FeatureGrouping,
    GraphSet,
    NormalizationStats,
    SignalGraph,
    SubsetPartition,
    validate_partition,
)

logger = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1


class Pooling(str, Enum):
    SUM = "sum"
    MEAN = "mean"


class Link(str, Enum):
    IDENTITY = "identity"
    SIGMOID = "sigmoid"


class ModelAblation(str, Enum):
    """Component ablations selectable from the command line."""

    NONE = "none"
    RHO1 = "rho1"
    MEAN_POOL = "mean_pool"
    NODE_MLP = "node_mlp"
    IDENTITY = "identity"
    GNAN = "gnan"


_ENCODER_ABLATION = {
    ModelAblation.NONE: EncoderAblation.NONE,
    ModelAblation.RHO1: EncoderAblation.RHO_CONST_ONE,
    ModelAblation.MEAN_POOL: EncoderAblation.NONE,
    ModelAblation.NODE_MLP: EncoderAblation.NODE_MLP,
    ModelAblation.IDENTITY: EncoderAblation.PSI_IDENTITY,
    ModelAblation.GNAN: EncoderAblation.GNAN_UNIVARIATE,
}


@dataclass
class DeepSetsParams:
    """``g(pool(f(h)))``; ``None`` in a slot means identity."""

    f: Transform = None
    g: Transform = None
    pooling: Pooling = Pooling.SUM

    def __post_init__(self) -> None:
        self.pooling = Pooling(self.pooling)


@dataclass
class SubsetModule:
    name: str
    encoder: ExtGnanParams
    mixer: Optional[DeepSetsParams] = None

    @property
    def rep_dim(self) -> int:
        return self.encoder.feature_dim

    def __post_init__(self) -> None:
        if self.mixer is not None:
            for slot in (self.mixer.f, self.mixer.g):
                if isinstance(slot, Mlp) and (slot.in_dim != self.rep_dim or slot.out_dim != self.rep_dim):
                    raise ConfigError(
                        f"Mixer of subset '{self.name}' maps {slot.in_dim} -> {slot.out_dim}, "
                        f"expected {self.rep_dim} -> {self.rep_dim}"
                    )


@dataclass
class ModelConfig:
    """Structural options of a SuperMAN model."""

    hidden: int = 64
    layers: int = 3
    dropout: float = 0.1
    activation: Activation = Activation.RELU
    delta_mode: DeltaMode = DeltaMode.MASKED
    time_scale: float = 1.0
    link: Link = Link.SIGMOID
    output_bias: bool = True
    pooling: Pooling = Pooling.SUM
    ablation: ModelAblation = ModelAblation.NONE

    def __post_init__(self) -> None:
        self.activation = Activation(self.activation)
        self.delta_mode = DeltaMode(self.delta_mode)
        self.link = Link(self.link)
        self.pooling = Pooling(self.pooling)
        self.ablation = ModelAblation(self.ablation)
        if self.hidden < 1 or self.layers < 1:
            raise ConfigError(f"hidden and layers must be positive, got {self.hidden} and {self.layers}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"Dropout must lie in [0, 1), got {self.dropout}")
        if self.time_scale <= 0:
            raise ConfigError(f"time_scale must be positive, got {self.time_scale}")


@dataclass
class SupermanModel:
    subsets: List[SubsetModule]
    partition: SubsetPartition
    link: Link = Link.SIGMOID
    output_bias: Optional[Tensor] = None
    ablation: ModelAblation = ModelAblation.NONE
    normalization: Optional[NormalizationStats] = None
    time_unit: str = TIME_UNIT
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.link = Link(self.link)
        self.ablation = ModelAblation(self.ablation)
        if len(self.subsets) != len(self.partition.subsets):
            raise ConfigError(f"{len(self.subsets)} subset modules for {len(self.partition.subsets)} subsets")

    @property
    def bias_value(self) -> float:
        return 0.0 if self.output_bias is None else self.output_bias.item()


# construction ---------------------------------------------------------------


def build_model(
    partition: SubsetPartition,
    groupings: Dict[str, FeatureGrouping],
    config: ModelConfig,
    seed: int,
) -> SupermanModel:
    """Initialise a model for ``partition``.

    ``groupings`` maps every signal type to its feature grouping. The ``gnan``
    ablation replaces each grouping by singletons.
    """
    if config.ablation == ModelAblation.GNAN:
        groupings = {s: FeatureGrouping.singletons(g.feature_dim) for s, g in groupings.items()}
    validate_partition(partition, groupings, partition.vocabulary)
    encoder_config = EncoderConfig(
        hidden=config.hidden,
        layers=config.layers,
        activation=config.activation,
        dropout=config.dropout,
        delta_mode=config.delta_mode,
        ablation=_ENCODER_ABLATION[config.ablation],
        time_scale=config.time_scale,
    )
    seeds = child_seeds(seed, 3 * len(partition.subsets))
    modules = []
    for index, members in enumerate(partition.subsets):
        grouping = groupings[members[0]]
        encoder = build_extgnan(grouping, encoder_config, seeds[3 * index])
        mixer = None
        if partition.is_mixed(index):
            if config.ablation == ModelAblation.MEAN_POOL:
                mixer = DeepSetsParams(pooling=Pooling.MEAN)
            else:
                d = grouping.feature_dim
                dims = [d] + [config.hidden] * (config.layers - 1) + [d]
                shape = Mlp(dims, activation=config.activation, dropout_rate=config.dropout)
                f = init_params(shape, seeds[3 * index + 1])
                g = init_params(shape, seeds[3 * index + 2])
                mixer = DeepSetsParams(f=f, g=g, pooling=config.pooling)
        modules.append(SubsetModule(name=partition.names[index], encoder=encoder, mixer=mixer))
    bias = Tensor(np.zeros(1)) if config.output_bias else None
    logger.debug(f"Built model with {len(modules)} subsets, ablation={config.ablation.value}")
    return SupermanModel(
        subsets=modules, partition=partition, link=config.link, output_bias=bias, ablation=config.ablation
    )


def model_parameters(model: SupermanModel) -> ParameterRegistry:
    registry: Dict[str, Tensor] = {}
    for index, module in enumerate(model.subsets):
        prefix = f"subset{index}."
        registry.update(extgnan_parameters(module.encoder, prefix))
        if module.mixer is not None:
            registry.update(transform_parameters(module.mixer.f, f"{prefix}f."))
            registry.update(transform_parameters(module.mixer.g, f"{prefix}g."))
    if model.output_bias is not None:
        registry["output_bias"] = model.output_bias
    return registry


# evaluation -----------------------------------------------------------------


def assign_subsets(model: SupermanModel, sample: GraphSet) -> List[List[SignalGraph]]:
    """Group a sample's graphs by subset, each list in canonical order."""
    buckets: List[List[SignalGraph]] = [[] for _ in model.subsets]
    binding = sample.partition_binding
    for position, graph in enumerate(sample.graphs):
        index = model.partition.subset_of(graph)
        if binding and len(binding) == len(sample.graphs) and binding[position] != index:
            raise PartitionError(
                f"Entity '{sample.entity_id}' binds '{graph.signal_type}' to subset {binding[position]}, "
                f"model expects {index}"
            )
        buckets[index].append(graph)
    for index, graphs in enumerate(buckets):
        if model.subsets[index].mixer is None and len(graphs) > 1:
            raise PartitionError(
                f"Entity '{sample.entity_id}' has {len(graphs)} graphs in single-graph subset "
                f"'{model.subsets[index].name}'"
            )
        graphs.sort(key=SignalGraph.sort_key)
    return buckets


def subset_representation(
    module: SubsetModule,
    graphs: Sequence[SignalGraph],
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    """Representation of one subset for one sample; an empty subset gives zeros."""
    if not graphs:
        return Tensor(np.zeros(module.rep_dim))
    if module.mixer is None:
        if len(graphs) > 1:
            raise PartitionError(f"Subset '{module.name}' holds a single graph, got {len(graphs)}")
        return reshape(encode_graphs(module.encoder, graphs, training, rng), (module.rep_dim,))
    ordered = sorted(graphs, key=SignalGraph.sort_key)
    reps = apply_transform(module.mixer.f, encode_graphs(module.encoder, ordered, training, rng), training, rng)
    pooled = tensor_sum(reps, axis=0)
    if module.mixer.pooling == Pooling.MEAN:
        pooled = div(pooled, float(len(ordered)))
    return apply_transform(module.mixer.g, pooled, training, rng)


def _subset_block(
    module: SubsetModule,
    per_sample: List[List[SignalGraph]],
    training: bool,
    rng: Optional[np.random.Generator],
) -> Tensor:
    """(batch, rep_dim) subset representations for a batch of samples."""
    batch = len(per_sample)
    counts = np.array([len(g) for g in per_sample])
    graphs = [g for sample in per_sample for g in sample]
    if not graphs:
        return Tensor(np.zeros((batch, module.rep_dim)))
    reps = encode_graphs(module.encoder, graphs, training, rng)
    owner = np.repeat(np.arange(batch), counts)
    if module.mixer is None:
        return segment_sum(reps, owner, batch)
    pooled = segment_sum(apply_transform(module.mixer.f, reps, training, rng), owner, batch)
    if module.mixer.pooling == Pooling.MEAN:
        pooled = div(pooled, np.maximum(counts, 1).reshape(-1, 1).astype(np.float64))
    mixed = apply_transform(module.mixer.g, pooled, training, rng)
    # empty subsets bypass g
    return mul(mixed, (counts > 0).reshape(-1, 1).astype(np.float64))


def forward_batch(
    model: SupermanModel,
    samples: Sequence[GraphSet],
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[Tensor, Tensor]:
    """Logits (batch,) and per-subset scalar contributions (batch, k)."""
    assigned = [assign_subsets(model, s) for s in samples]
    columns = []
    for index, module in enumerate(model.subsets):
        block = _subset_block(module, [a[index] for a in assigned], training, rng)
        columns.append(reshape(tensor_sum(block, axis=1), (len(samples), 1)))
    contributions = concat(columns, axis=1)
    logits = tensor_sum(contributions, axis=1)
    if model.output_bias is not None:
        logits = add(logits, model.output_bias)
    return logits, contributions


def forward(model: SupermanModel, sample: GraphSet) -> float:
    logits, _ = forward_batch(model, [sample])
    return logits.item()


def predict_logits(model: SupermanModel, samples: Sequence[GraphSet], batch_size: int = 256) -> np.ndarray:
    out = [forward_batch(model, samples[i:i + batch_size])[0].data for i in range(0, len(samples), batch_size)]
    return np.concatenate(out) if out else np.zeros(0)


def predict_proba(model: SupermanModel, sample: GraphSet) -> float:
    if model.link != Link.SIGMOID:
        raise ConfigError("predict_proba needs a sigmoid link")
    return float(expit(forward(model, sample)))


def predict_proba_batch(model: SupermanModel, samples: Sequence[GraphSet]) -> np.ndarray:
    if model.link != Link.SIGMOID:
        raise ConfigError("predict_proba needs a sigmoid link")
    return expit(predict_logits(model, samples))


# expressivity ---------------------------------------------------------------


@dataclass
class InfeasibilityCertificate:
    """Nonnegative combinations of strict inequalities with equal left-hand sides."""

    negative: Tuple[int, ...]
    positive: Tuple[int, ...]
    combined: Tuple[int, ...]


def xor_threshold_system() -> Tuple[np.ndarray, np.ndarray]:
    """Threshold constraints an additive univariate model must meet to realise XOR.

    Unknowns are ``(a, b, c, e) = (phi_1(0), phi_1(1), phi_2(0), phi_2(1))``.
    Rows of the first matrix must sum below zero (label 0), rows of the second
    above zero (label 1). The same system arises for two single-graph subsets.
    """
    negative = np.array([[1, 0, 1, 0], [0, 1, 0, 1]])  # (0,0), (1,1)
    positive = np.array([[1, 0, 0, 1], [0, 1, 1, 0]])  # (0,1), (1,0)
    return negative, positive


def find_infeasibility_certificate(
    negative: np.ndarray, positive: np.ndarray
) -> Optional[InfeasibilityCertificate]:
    """Search 0/1 combinations for a linear form forced both below and above zero."""
    negative = np.asarray(negative, dtype=np.int64)
    positive = np.asarray(positive, dtype=np.int64)
    for r in range(1, negative.shape[0] + 1):
        for neg in itertools.combinations(range(negative.shape[0]), r):
            left = negative[list(neg)].sum(axis=0)
            for s in range(1, positive.shape[0] + 1):
                for pos in itertools.combinations(range(positive.shape[0]), s):
                    if np.array_equal(left, positive[list(pos)].sum(axis=0)):
                        return InfeasibilityCertificate(neg, pos, tuple(int(v) for v in left))
    return None


def xor_witness_transforms() -> Dict[str, Transform]:
    """Fixed networks that realise XOR exactly.

    ``psi_pair`` is the grouped shape function ``x1 + x2 - 2 x1 x2``;
    ``mixer_g`` is ``s (2 - s)`` applied after identity ``f`` and sum pooling.
    """

    def psi_pair(x: Tensor) -> Tensor:
        x1, x2 = take(x, [0], axis=1), take(x, [1], axis=1)
        prod = mul(x1, x2)
        return concat([add(add(x1, x2), mul(prod, -2.0)), mul(prod, 0.0)], axis=1)

    def mixer_g(s: Tensor) -> Tensor:
        return mul(s, add(mul(s, -1.0), 2.0))

    def rho_one(d: Tensor) -> Tensor:
        return add(mul(d, 0.0), 1.0)

    return {"psi_pair": psi_pair, "mixer_g": mixer_g, "rho_one": rho_one}


def xor_witness_model(set_level: bool = False) -> SupermanModel:
    """Hand-built model computing XOR exactly as its logit.

    Feature level: one signal ``x`` with grouped features ``(x1, x2)``.
    Set level: signals ``a`` and ``b`` sharing one mixed subset.
    """
    witness = xor_witness_transforms()
    if set_level:
        encoder = ExtGnanParams(rho=witness["rho_one"], psi=[None], grouping=FeatureGrouping.single(1))
        module = SubsetModule(name="a+b", encoder=encoder, mixer=DeepSetsParams(f=None, g=witness["mixer_g"]))
        partition = SubsetPartition(subsets=(("a", "b"),))
    else:
        encoder = ExtGnanParams(rho=witness["rho_one"], psi=[witness["psi_pair"]], grouping=FeatureGrouping.single(2))
        module = SubsetModule(name="x", encoder=encoder)
        partition = SubsetPartition(subsets=(("x",),))
    return SupermanModel(subsets=[module], partition=partition, link=Link.SIGMOID, output_bias=None)


# serialisation --------------------------------------------------------------


def model_to_dict(model: SupermanModel) -> Dict[str, Any]:
    norm = model.normalization
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "partition": {
            "subsets": [list(s) for s in model.partition.subsets],
            "collectors": [list(c) for c in model.partition.collectors],
            "names": list(model.partition.names),
        },
        "link": model.link.value,
        "ablation": model.ablation.value,
        "output_bias": None if model.output_bias is None else model.bias_value,
        "time_unit": model.time_unit,
        "subsets": [
            {
                "name": m.name,
                "encoder": extgnan_to_dict(m.encoder),
                "mixer": None
                if m.mixer is None
                else {"f": mlp_to_dict(m.mixer.f), "g": mlp_to_dict(m.mixer.g), "pooling": m.mixer.pooling.value},
            }
            for m in model.subsets
        ],
        "normalization": None
        if norm is None
        else {"feature_mean": norm.feature_mean, "feature_std": norm.feature_std, "time_scale": norm.time_scale},
        "metadata": model.metadata,
    }


def model_from_dict(data: Dict[str, Any]) -> SupermanModel:
    if data.get("format_version") != MODEL_FORMAT_VERSION:
        raise ConfigError(f"Unsupported checkpoint format {data.get('format_version')}")
    part = data["partition"]
    partition = SubsetPartition(
        subsets=tuple(tuple(s) for s in part["subsets"]),
        collectors=tuple(tuple(c) for c in part.get("collectors", [])),
        names=tuple(part.get("names", [])),
    )
    modules = []
    for entry in data["subsets"]:
        mixer = entry.get("mixer")
        modules.append(
            SubsetModule(
                name=entry["name"],
                encoder=extgnan_from_dict(entry["encoder"]),
                mixer=None
                if mixer is None
                else DeepSetsParams(f=mlp_from_dict(mixer["f"]), g=mlp_from_dict(mixer["g"]), pooling=mixer["pooling"]),
            )
        )
    bias = data.get("output_bias")
    norm = data.get("normalization")
    return SupermanModel(
        subsets=modules,
        partition=partition,
        link=data.get("link", Link.SIGMOID.value),
        output_bias=None if bias is None else Tensor(np.array([bias], dtype=np.float64)),
        ablation=data.get("ablation", ModelAblation.NONE.value),
        normalization=None if norm is None else NormalizationStats(**norm),
        time_unit=data.get("time_unit", TIME_UNIT),
        metadata=data.get("metadata", {}),
    )
