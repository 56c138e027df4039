"""
Data model for sets of irregularly sampled signals.

Each entity's measurements of one signal type become a directed graph whose
nodes are time-stamped feature vectors. Every graph carries the literal
signed temporal distances ``delta[u][v] = t_u - t_v`` together with a
reachability mask recording which ordered pairs are connected by a directed
path (diagonal included).
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from ..errors import ConfigError, EmptySignal, InvalidConfig, PartitionError, SchemaError

logger = logging.getLogger(__name__)

TIME_UNIT = "days"


class Direction(str, Enum):
    """Orientation of path-graph edges."""

    FORWARD = "forward"  # earlier -> later
    BACKWARD = "backward"  # later -> earlier
    BIDIRECTIONAL = "bidirectional"


class DeltaPolicy(str, Enum):
    FULL = "full"
    ADJACENT_ONLY = "adjacent_only"
    WINDOW = "window"


@dataclass(frozen=True)
class MeasurementRecord:
    entity_id: str
    signal_type: str
    timestamp: float
    features: Tuple[float, ...]

    def __post_init__(self) -> None:
        feats = tuple(float(v) for v in self.features)
        if not feats:
            raise SchemaError(f"Measurement of {self.signal_type} for {self.entity_id} has no features")
        if not np.isfinite(self.timestamp) or not np.all(np.isfinite(feats)):
            raise SchemaError(f"Non-finite measurement of {self.signal_type} for {self.entity_id}")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "timestamp", float(self.timestamp))


@dataclass(frozen=True, eq=False)
class SignalGraph:
    signal_type: str
    node_features: np.ndarray
    node_timestamps: np.ndarray
    edges: Tuple[Tuple[int, int], ...]
    delta: np.ndarray
    reach_mask: np.ndarray

    @property
    def num_nodes(self) -> int:
        return int(self.node_timestamps.shape[0])

    @property
    def feature_dim(self) -> int:
        return int(self.node_features.shape[1])

    def sort_key(self) -> Tuple:
        """Canonical ordering key used wherever graphs are accumulated as a set."""
        return (
            self.signal_type,
            self.num_nodes,
            tuple(self.node_timestamps.tolist()),
            tuple(self.node_features.reshape(-1).tolist()),
            self.edges,
        )


@dataclass(frozen=True)
class FeatureGrouping:
    groups: Tuple[Tuple[int, ...], ...]

    def __post_init__(self) -> None:
        groups = tuple(tuple(int(i) for i in g) for g in self.groups)
        if not groups or any(len(g) == 0 for g in groups):
            raise ConfigError("Feature groups must be nonempty")
        flat = [i for g in groups for i in g]
        if sorted(flat) != list(range(len(flat))):
            raise ConfigError(f"Feature groups {groups} are not a partition of 0..{len(flat) - 1}")
        object.__setattr__(self, "groups", groups)

    @property
    def feature_dim(self) -> int:
        return sum(len(g) for g in self.groups)

    @property
    def is_univariate(self) -> bool:
        return all(len(g) == 1 for g in self.groups)

    @classmethod
    def single(cls, dim: int) -> "FeatureGrouping":
        return cls((tuple(range(dim)),))

    @classmethod
    def singletons(cls, dim: int) -> "FeatureGrouping":
        return cls(tuple((i,) for i in range(dim)))


@dataclass(frozen=True)
class SubsetPartition:
    """Disjoint grouping of signal types.

    ``collectors`` maps a subset index to a node-count bound: any graph with at
    most that many nodes binds to the collector subset regardless of its signal
    type, so many small graphs of one type can be mixed together.
    """

    subsets: Tuple[Tuple[str, ...], ...]
    collectors: Tuple[Tuple[int, int], ...] = ()
    names: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        subsets = tuple(tuple(s) for s in self.subsets)
        object.__setattr__(self, "subsets", subsets)
        object.__setattr__(self, "collectors", tuple((int(i), int(n)) for i, n in self.collectors))
        if not self.names:
            object.__setattr__(self, "names", tuple("+".join(s) for s in subsets))
        if len(self.names) != len(subsets):
            raise ConfigError("One name per subset is required")

    @property
    def vocabulary(self) -> List[str]:
        return [s for subset in self.subsets for s in subset]

    def is_mixed(self, index: int) -> bool:
        """Whether subset ``index`` may hold more than one graph per sample."""
        return len(self.subsets[index]) > 1 or any(i == index for i, _ in self.collectors)

    def subset_of(self, graph: SignalGraph) -> int:
        for index, max_nodes in self.collectors:
            if graph.num_nodes <= max_nodes:
                return index
        for index, members in enumerate(self.subsets):
            if graph.signal_type in members:
                return index
        raise SchemaError(f"Signal type '{graph.signal_type}' is not in the partition vocabulary")


@dataclass(frozen=True)
class GraphSet:
    entity_id: str
    graphs: Tuple[SignalGraph, ...]
    label: int
    partition_binding: Tuple[int, ...] = ()

    def graphs_of(self, signal_type: str) -> List[SignalGraph]:
        return [g for g in self.graphs if g.signal_type == signal_type]


@dataclass
class PartitionConfig:
    """Grouping and partition settings as stored in a partition config file.

    Signal types without declared feature groups get a single group spanning
    all their features.
    """

    subsets: List[List[str]]
    feature_groups: Dict[str, List[List[int]]] = field(default_factory=dict)
    delta_policy: DeltaPolicy = DeltaPolicy.FULL
    window: Optional[int] = None
    collectors: Dict[int, int] = field(default_factory=dict)
    names: List[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.delta_policy = DeltaPolicy(self.delta_policy)
        self.collectors = {int(k): int(v) for k, v in self.collectors.items()}
        if not self.subsets:
            raise ConfigError("Partition config needs at least one subset")
        if self.delta_policy == DeltaPolicy.WINDOW and (self.window is None or self.window < 1):
            raise InvalidConfig(f"Delta window must be at least 1, got {self.window}")

    @classmethod
    def singletons(cls, vocabulary: Iterable[str]) -> "PartitionConfig":
        return cls(subsets=[[s] for s in sorted(vocabulary)])

    @classmethod
    def from_dict(cls, data: Dict) -> "PartitionConfig":
        return cls(
            subsets=[list(s) for s in data["subsets"]],
            feature_groups={k: [list(g) for g in v] for k, v in data.get("feature_groups", {}).items()},
            delta_policy=data.get("delta_policy", DeltaPolicy.FULL.value),
            window=data.get("window"),
            collectors=data.get("collectors", {}),
            names=list(data.get("names", [])),
        )

    def to_dict(self) -> Dict:
        return {
            "subsets": self.subsets,
            "feature_groups": self.feature_groups,
            "delta_policy": self.delta_policy.value,
            "window": self.window,
            "collectors": {str(k): v for k, v in self.collectors.items()},
            "names": self.names,
        }

    def partition(self) -> SubsetPartition:
        return SubsetPartition(
            subsets=tuple(tuple(s) for s in self.subsets),
            collectors=tuple(sorted(self.collectors.items())),
            names=tuple(self.names),
        )

    def groupings(self, dims: Dict[str, int]) -> Dict[str, FeatureGrouping]:
        out = {}
        for signal in (s for subset in self.subsets for s in subset):
            if signal in self.feature_groups:
                out[signal] = FeatureGrouping(tuple(tuple(g) for g in self.feature_groups[signal]))
            elif signal in dims:
                out[signal] = FeatureGrouping.single(dims[signal])
            else:
                raise PartitionError(f"Cannot infer the feature width of '{signal}'")
        return out


@dataclass
class PartitionReport:
    ok: bool
    subset_dims: List[int]
    mixed_subsets: List[int] = field(default_factory=list)


@dataclass
class NormalizationStats:
    """Per-signal feature means and standard deviations from the training split."""

    feature_mean: Dict[str, List[float]]
    feature_std: Dict[str, List[float]]
    time_scale: Dict[str, float] = field(default_factory=dict)


# construction ---------------------------------------------------------------


def _reachability(n: int, edges: Sequence[Tuple[int, int]]) -> np.ndarray:
    if n == 0:
        return np.zeros((0, 0), dtype=bool)
    if not edges:
        return np.eye(n, dtype=bool)
    src, dst = zip(*edges)
    adjacency = csr_matrix((np.ones(len(edges)), (src, dst)), shape=(n, n))
    hops = shortest_path(adjacency, directed=True, unweighted=True)
    return np.isfinite(hops)


def build_graph(
    signal_type: str,
    features: np.ndarray,
    timestamps: np.ndarray,
    edges: Iterable[Tuple[int, int]],
) -> SignalGraph:
    """Build a signal graph from explicit nodes and directed edges."""
    x = np.asarray(features, dtype=np.float64)
    t = np.asarray(timestamps, dtype=np.float64).reshape(-1)
    if x.ndim != 2 or x.shape[0] != t.shape[0]:
        raise SchemaError(f"{signal_type}: {x.shape} features for {t.shape[0]} timestamps")
    edge_list = tuple((int(u), int(v)) for u, v in edges)
    n = t.shape[0]
    if any(not (0 <= u < n and 0 <= v < n) for u, v in edge_list):
        raise SchemaError(f"{signal_type}: edge endpoint out of range")
    delta = t[:, None] - t[None, :]
    return SignalGraph(
        signal_type=signal_type,
        node_features=x,
        node_timestamps=t,
        edges=edge_list,
        delta=delta,
        reach_mask=_reachability(n, edge_list),
    )


def path_edges(n: int, direction: Direction = Direction.FORWARD) -> List[Tuple[int, int]]:
    direction = Direction(direction)
    forward = [(i, i + 1) for i in range(n - 1)]
    if direction == Direction.FORWARD:
        return forward
    backward = [(i + 1, i) for i in range(n - 1)]
    if direction == Direction.BACKWARD:
        return backward
    return forward + backward


def build_path_graph(
    records: Sequence[MeasurementRecord], direction: Direction = Direction.FORWARD
) -> SignalGraph:
    """Order one entity's measurements of a signal by time and chain them."""
    if not records:
        raise EmptySignal("Cannot build a signal graph from zero measurements")
    signal_types = {r.signal_type for r in records}
    if len(signal_types) != 1:
        raise SchemaError(f"Path graph needs a single signal type, got {sorted(signal_types)}")
    dims = {len(r.features) for r in records}
    if len(dims) != 1:
        raise SchemaError(f"{records[0].signal_type}: inconsistent feature widths {sorted(dims)}")
    times = np.array([r.timestamp for r in records], dtype=np.float64)
    order = np.argsort(times, kind="stable")
    features = np.array([records[i].features for i in order], dtype=np.float64)
    return build_graph(records[0].signal_type, features, times[order], path_edges(len(records), direction))


def empty_graph(signal_type: str, feature_dim: int) -> SignalGraph:
    return build_graph(signal_type, np.zeros((0, feature_dim)), np.zeros(0), [])


def group_records(
    records: Iterable[MeasurementRecord],
    labels: Dict[str, int],
    direction: Direction = Direction.FORWARD,
    vocabulary: Optional[Sequence[str]] = None,
) -> List[GraphSet]:
    """Turn flat measurement records into one ``GraphSet`` per entity, ordered by id."""
    known = set(vocabulary) if vocabulary is not None else None
    by_entity: Dict[str, Dict[str, List[MeasurementRecord]]] = {}
    for record in records:
        if known is not None and record.signal_type not in known:
            raise SchemaError(f"Unknown signal type '{record.signal_type}'")
        by_entity.setdefault(record.entity_id, {}).setdefault(record.signal_type, []).append(record)
    graph_sets = []
    for entity_id in sorted(by_entity):
        if entity_id not in labels:
            raise SchemaError(f"No label for entity '{entity_id}'")
        signals = by_entity[entity_id]
        graphs = tuple(build_path_graph(signals[s], direction) for s in sorted(signals))
        graph_sets.append(GraphSet(entity_id=entity_id, graphs=graphs, label=int(labels[entity_id])))
    return graph_sets


# masking --------------------------------------------------------------------


def _hop_distance(graph: SignalGraph) -> np.ndarray:
    n = graph.num_nodes
    if not graph.edges:
        hops = np.full((n, n), np.inf)
        np.fill_diagonal(hops, 0.0)
        return hops
    src, dst = zip(*graph.edges)
    adjacency = csr_matrix((np.ones(len(graph.edges)), (src, dst)), shape=(n, n))
    return shortest_path(adjacency, directed=False, unweighted=True)


def mask_delta(
    graph: SignalGraph, policy: DeltaPolicy = DeltaPolicy.FULL, window: Optional[int] = None
) -> SignalGraph:
    """Restrict which node pairs interact.

    ``adjacent_only`` keeps the diagonal and pairs joined by an edge;
    ``window(w)`` keeps pairs at most ``w`` hops apart. Both are intersected
    with the existing reachability, so the direction convention still applies.
    """
    policy = DeltaPolicy(policy)
    if policy == DeltaPolicy.FULL:
        return graph
    if policy == DeltaPolicy.ADJACENT_ONLY:
        window = 1
    if window is None or window < 1:
        raise InvalidConfig(f"Delta window must be at least 1, got {window}")
    keep = _hop_distance(graph) <= window
    return replace(graph, reach_mask=graph.reach_mask & keep)


def apply_delta_policy(
    graph_sets: Sequence[GraphSet], policy: DeltaPolicy, window: Optional[int] = None
) -> List[GraphSet]:
    if DeltaPolicy(policy) == DeltaPolicy.FULL:
        return list(graph_sets)
    return [
        replace(gs, graphs=tuple(mask_delta(g, policy, window) for g in gs.graphs)) for gs in graph_sets
    ]


# partitions -----------------------------------------------------------------


def validate_partition(
    partition: SubsetPartition,
    grouping: Dict[str, FeatureGrouping],
    vocabulary: Sequence[str],
) -> PartitionReport:
    """Check the partition is a disjoint cover and each subset can share one encoder."""
    seen: Dict[str, int] = {}
    for index, members in enumerate(partition.subsets):
        if not members:
            raise PartitionError(f"Subset {index} is empty")
        for signal in members:
            if signal in seen:
                raise PartitionError(f"Signal type '{signal}' appears in subsets {seen[signal]} and {index}")
            if signal not in vocabulary:
                raise PartitionError(f"Signal type '{signal}' is not in the vocabulary")
            seen[signal] = index
    for signal in vocabulary:
        if signal not in seen:
            raise PartitionError(f"Signal type '{signal}' is not covered by any subset")
    for index, _ in partition.collectors:
        if not 0 <= index < len(partition.subsets):
            raise PartitionError(f"Collector refers to missing subset {index}")

    dims = []
    for index, members in enumerate(partition.subsets):
        for signal in members:
            if signal not in grouping:
                raise PartitionError(f"No feature grouping declared for '{signal}'")
        reference = grouping[members[0]]
        for signal in members[1:]:
            if grouping[signal].feature_dim != reference.feature_dim:
                raise PartitionError(
                    f"Signal type '{signal}' has width {grouping[signal].feature_dim}, "
                    f"subset {index} expects {reference.feature_dim}"
                )
            if grouping[signal].groups != reference.groups:
                raise PartitionError(f"Signal type '{signal}' uses a different feature grouping than subset {index}")
        dims.append(reference.feature_dim)
    mixed = [i for i in range(len(partition.subsets)) if partition.is_mixed(i)]
    return PartitionReport(ok=True, subset_dims=dims, mixed_subsets=mixed)


def bind_partition(graph_sets: Sequence[GraphSet], partition: SubsetPartition) -> List[GraphSet]:
    """Record which subset each graph belongs to."""
    bound = []
    for gs in graph_sets:
        binding = tuple(partition.subset_of(g) for g in gs.graphs)
        for index in set(binding):
            if not partition.is_mixed(index) and binding.count(index) > 1:
                raise PartitionError(
                    f"Entity '{gs.entity_id}' has {binding.count(index)} graphs in single-graph subset {index}"
                )
        bound.append(replace(gs, partition_binding=binding))
    return bound


def feature_dims(graph_sets: Iterable[GraphSet]) -> Dict[str, int]:
    dims: Dict[str, int] = {}
    for gs in graph_sets:
        for g in gs.graphs:
            if dims.setdefault(g.signal_type, g.feature_dim) != g.feature_dim:
                raise SchemaError(f"Signal type '{g.signal_type}' has inconsistent feature widths")
    return dims


# normalisation --------------------------------------------------------------


def fit_normalization(graph_sets: Iterable[GraphSet], normalize_timestamps: bool = False) -> NormalizationStats:
    pooled: Dict[str, List[np.ndarray]] = {}
    times: Dict[str, List[np.ndarray]] = {}
    for gs in graph_sets:
        for g in gs.graphs:
            pooled.setdefault(g.signal_type, []).append(g.node_features)
            times.setdefault(g.signal_type, []).append(g.node_timestamps)
    mean, std, scale = {}, {}, {}
    for signal, blocks in sorted(pooled.items()):
        x = np.concatenate(blocks, axis=0)
        mean[signal] = x.mean(axis=0).tolist()
        std[signal] = x.std(axis=0).tolist()
        if normalize_timestamps:
            spread = float(np.concatenate(times[signal]).std())
            scale[signal] = spread if spread >= 1e-12 else 1.0
    return NormalizationStats(feature_mean=mean, feature_std=std, time_scale=scale)


def normalize_features(graph_sets: Sequence[GraphSet], stats: NormalizationStats) -> List[GraphSet]:
    """Z-score every signal's features with training statistics.

    Features whose training deviation is below 1e-12 are only centred.
    """
    out = []
    for gs in graph_sets:
        graphs = []
        for g in gs.graphs:
            if g.signal_type not in stats.feature_mean:
                raise SchemaError(f"No normalisation statistics for '{g.signal_type}'")
            mu = np.asarray(stats.feature_mean[g.signal_type])
            sd = np.asarray(stats.feature_std[g.signal_type])
            sd = np.where(sd < 1e-12, 1.0, sd)
            x = (g.node_features - mu) / sd
            scale = stats.time_scale.get(g.signal_type)
            if scale:
                t = g.node_timestamps / scale
                graphs.append(replace(g, node_features=x, node_timestamps=t, delta=g.delta / scale))
            else:
                graphs.append(replace(g, node_features=x))
        out.append(replace(gs, graphs=tuple(graphs)))
    return out


def split_dataset(
    graph_sets: Sequence[GraphSet], fractions: Tuple[float, float, float] = (0.8, 0.1, 0.1), seed: int = 0
) -> Tuple[List[GraphSet], List[GraphSet], List[GraphSet]]:
    """Random train/validation/test split."""
    if len(fractions) != 3 or any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"Split fractions must be three nonnegative numbers summing to 1, got {fractions}")
    order = np.random.default_rng(seed).permutation(len(graph_sets))
    n_train = int(round(fractions[0] * len(order)))
    n_val = int(round(fractions[1] * len(order)))
    pick = lambda idx: [graph_sets[i] for i in idx]  # noqa: E731
    return pick(order[:n_train]), pick(order[n_train:n_train + n_val]), pick(order[n_train + n_val:])
