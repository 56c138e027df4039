"""
Synthetic datasets for the expressivity and ablation experiments.

``feature_xor`` and ``set_xor`` are the two XOR constructions: XOR of two
features of one node, and XOR of two single-node graphs. ``irregular_signal``
is an irregularly sampled multi-signal task whose label depends on the level
of one signal and on the sampling rhythm of another, so a model can only get
the second part from temporal distances.
"""

import logging
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Dict, List, Tuple

import numpy as np
from scipy.stats import norm

from ..errors import ConfigError
from .signal_graphs import FeatureGrouping, GraphSet, SubsetPartition, build_graph, path_edges

logger = logging.getLogger(__name__)

IRREGULAR_SIGNALS = ("s0", "s1", "s2", "s3", "s4", "s5")
LEVEL_SIGNAL = "s0"
RHYTHM_SIGNAL = "s1"
LEVEL_NODES = 4
RHYTHM_NODES = 5
RHYTHM_SHAPE = 20.0


class SynthKind(str, Enum):
    FEATURE_XOR = "feature_xor"
    SET_XOR = "set_xor"
    IRREGULAR_SIGNAL = "irregular_signal"


@dataclass
class SynthSpec:
    """Generator settings.

    For the XOR kinds ``n_samples`` is the number of copies of the truth
    table; for ``irregular_signal`` it is the number of entities.
    """

    kind: SynthKind = SynthKind.IRREGULAR_SIGNAL
    n_samples: int = 1000
    seed: int = 0
    trend_coef: float = 1.0
    gap_coef: float = 1.0
    label_noise: float = 0.5
    value_noise: float = 0.1
    base_gap: float = 10.0
    oracle_draws: int = 200_000

    def __post_init__(self) -> None:
        self.kind = SynthKind(self.kind)
        if self.n_samples < 1:
            raise ConfigError(f"n_samples must be positive, got {self.n_samples}")
        if self.label_noise <= 0 or self.value_noise < 0 or self.base_gap <= 0:
            raise ConfigError("label_noise and base_gap must be positive, value_noise nonnegative")
        if self.oracle_draws < 1:
            raise ConfigError(f"oracle_draws must be positive, got {self.oracle_draws}")

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["kind"] = self.kind.value
        return data


@dataclass
class SynthDataset:
    graph_sets: List[GraphSet]
    partition: SubsetPartition
    groupings: Dict[str, FeatureGrouping]
    metadata: Dict[str, Any] = field(default_factory=dict)


TRUTH_TABLE = ((0, 0), (0, 1), (1, 0), (1, 1))


def _single_node(signal_type: str, features: List[float]) -> Any:
    return build_graph(signal_type, np.array([features], dtype=np.float64), np.zeros(1), [])


def feature_xor_dataset(n_samples: int = 1, grouped: bool = True) -> SynthDataset:
    """Single-node graphs with features ``(x1, x2)`` labelled ``x1 xor x2``.

    ``grouped`` selects the joint grouping ``{{0, 1}}``; otherwise each
    feature gets its own group, which is the univariate setting.
    """
    graph_sets = []
    for copy in range(n_samples):
        for x1, x2 in TRUTH_TABLE:
            graph_sets.append(
                GraphSet(
                    entity_id=f"fx{copy:05d}-{x1}{x2}",
                    graphs=(_single_node("x", [float(x1), float(x2)]),),
                    label=x1 ^ x2,
                )
            )
    grouping = FeatureGrouping.single(2) if grouped else FeatureGrouping.singletons(2)
    return SynthDataset(
        graph_sets=graph_sets,
        partition=SubsetPartition(subsets=(("x",),)),
        groupings={"x": grouping},
        metadata={"kind": SynthKind.FEATURE_XOR.value, "rule": "label = x1 xor x2", "bayes_accuracy": 1.0},
    )


def set_xor_dataset(n_samples: int = 1, paired: bool = True) -> SynthDataset:
    """Two single-node graphs ``a`` and ``b`` with binary features, labelled by their XOR.

    ``paired`` puts both signal types in one mixed subset; otherwise each is
    its own subset.
    """
    graph_sets = []
    for copy in range(n_samples):
        for x1, x2 in TRUTH_TABLE:
            graph_sets.append(
                GraphSet(
                    entity_id=f"sx{copy:05d}-{x1}{x2}",
                    graphs=(_single_node("a", [float(x1)]), _single_node("b", [float(x2)])),
                    label=x1 ^ x2,
                )
            )
    subsets = (("a", "b"),) if paired else (("a",), ("b",))
    return SynthDataset(
        graph_sets=graph_sets,
        partition=SubsetPartition(subsets=subsets),
        groupings={"a": FeatureGrouping.single(1), "b": FeatureGrouping.single(1)},
        metadata={"kind": SynthKind.SET_XOR.value, "rule": "label = a xor b", "bayes_accuracy": 1.0},
    )


def _path(signal_type: str, values: np.ndarray, times: np.ndarray) -> Any:
    return build_graph(signal_type, values.reshape(-1, 1), times, path_edges(times.shape[0]))


def _irregular_entity(spec: SynthSpec, index: int, rng: np.random.Generator) -> GraphSet:
    level = rng.normal()
    rhythm = rng.normal()
    graphs = []

    start = rng.uniform(0.0, spec.base_gap)
    times = start + np.cumsum(rng.exponential(spec.base_gap, size=LEVEL_NODES))
    values = level + spec.value_noise * rng.normal(size=LEVEL_NODES)
    graphs.append(_path(LEVEL_SIGNAL, values, times))

    theta = spec.base_gap * np.exp(0.5 * rhythm)
    gaps = rng.gamma(RHYTHM_SHAPE, theta / RHYTHM_SHAPE, size=RHYTHM_NODES - 1)
    times = np.concatenate([[rng.uniform(0.0, spec.base_gap)], gaps]).cumsum()
    graphs.append(_path(RHYTHM_SIGNAL, rng.normal(size=RHYTHM_NODES), times))

    n_extra = int(rng.integers(1, len(IRREGULAR_SIGNALS) - 1))
    for signal in sorted(rng.choice(IRREGULAR_SIGNALS[2:], size=n_extra, replace=False)):
        count = 1 + int(rng.poisson(3.0))
        times = rng.uniform(0.0, spec.base_gap) + np.cumsum(rng.exponential(spec.base_gap, size=count))
        graphs.append(_path(str(signal), rng.normal(size=count), times))

    score = spec.trend_coef * level + spec.gap_coef * rhythm + spec.label_noise * rng.normal()
    return GraphSet(entity_id=f"e{index:06d}", graphs=tuple(graphs), label=int(score > 0))


def bayes_accuracy(spec: SynthSpec) -> float:
    """Monte-Carlo accuracy of the optimal classifier that knows level and rhythm exactly."""
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 1]))
    latent = spec.trend_coef * rng.normal(size=spec.oracle_draws) + spec.gap_coef * rng.normal(size=spec.oracle_draws)
    p = norm.cdf(latent / spec.label_noise)
    return float(np.mean(np.maximum(p, 1.0 - p)))


def irregular_signal_dataset(spec: SynthSpec) -> SynthDataset:
    rng = np.random.default_rng(spec.seed)
    graph_sets = [_irregular_entity(spec, i, rng) for i in range(spec.n_samples)]
    positives = sum(gs.label for gs in graph_sets)
    logger.info(f"Generated {len(graph_sets)} irregular-signal entities, {positives} positive")
    return SynthDataset(
        graph_sets=graph_sets,
        partition=SubsetPartition(subsets=tuple((s,) for s in IRREGULAR_SIGNALS)),
        groupings={s: FeatureGrouping.single(1) for s in IRREGULAR_SIGNALS},
        metadata={
            "kind": SynthKind.IRREGULAR_SIGNAL.value,
            "rule": (
                f"label = 1[{spec.trend_coef} * level + {spec.gap_coef} * rhythm + {spec.label_noise} * eps > 0]; "
                f"{LEVEL_SIGNAL} values ~ N(level, {spec.value_noise}^2); "
                f"{RHYTHM_SIGNAL} gaps ~ Gamma({RHYTHM_SHAPE:g}, mean {spec.base_gap} * exp(rhythm / 2)); "
                "level, rhythm, eps ~ N(0, 1)"
            ),
            "bayes_accuracy": bayes_accuracy(spec),
            "time_scale": spec.base_gap,
            "spec": spec.to_dict(),
        },
    )


def generate(spec: SynthSpec, grouped: bool = True) -> SynthDataset:
    if spec.kind == SynthKind.FEATURE_XOR:
        dataset = feature_xor_dataset(spec.n_samples, grouped)
    elif spec.kind == SynthKind.SET_XOR:
        dataset = set_xor_dataset(spec.n_samples, grouped)
    else:
        return irregular_signal_dataset(spec)
    dataset.metadata["spec"] = spec.to_dict()
    return dataset


def class_balance(graph_sets: List[GraphSet]) -> Tuple[int, int]:
    positives = sum(gs.label for gs in graph_sets)
    return positives, len(graph_sets) - positives
