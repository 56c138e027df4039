"""
Exact additive attribution and perturbation analyses.

Contributions are read straight off the model's summation: node terms add up
to graph totals, graph totals to subset totals, and subset totals plus the
output bias to the logit. Node and graph contributions exist only for subsets
that hold a single graph; mixed subsets combine their graphs non-linearly.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from ..errors import DegenerateDirection, InvalidNode, NotNodeAttributable, PartitionError
from .extgnan import node_contribution_terms
from .metrics import auprc, auroc
from .signal_graphs import GraphSet, SignalGraph
from .superman import Link, SupermanModel, assign_subsets, forward_batch, predict_logits, subset_representation

logger = logging.getLogger(__name__)

ADDITIVE_LEVELS = (0.0, 0.1, 0.2, 0.3, 0.5, 0.8, 1.5, 3.0, 5.5, 7.0)
MULTIPLICATIVE_LEVELS = ADDITIVE_LEVELS
TEMPORAL_LEVELS = (0.0, 10.0, 30.0, 90.0, 150.0, 300.0, 500.0)


class NoiseKind(str, Enum):
    ADDITIVE = "additive"
    MULTIPLICATIVE = "multiplicative"
    TEMPORAL = "temporal"


DEFAULT_LEVELS = {
    NoiseKind.ADDITIVE: ADDITIVE_LEVELS,
    NoiseKind.MULTIPLICATIVE: MULTIPLICATIVE_LEVELS,
    NoiseKind.TEMPORAL: TEMPORAL_LEVELS,
}


@dataclass
class NodeContribution:
    subset: str
    signal_type: str
    node_index: int
    timestamp: float
    contribution: float


@dataclass
class GraphContribution:
    subset: str
    signal_type: str
    contribution: float


@dataclass
class ContributionReport:
    entity_id: str
    logit: float
    output_bias: float
    subset_contributions: Dict[str, float]
    graph_contributions: List[GraphContribution] = field(default_factory=list)
    node_contributions: List[NodeContribution] = field(default_factory=list)
    reconstruction_residual: float = 0.0


@dataclass
class PerturbationCurve:
    target: str
    noise_levels: List[float]
    outputs: List[float]
    stds: List[float]
    direction: List[float]


@dataclass
class RobustnessRow:
    level: float
    delta_auroc_pct: float
    delta_auroc_std: float
    delta_auprc_pct: float
    delta_auprc_std: float


# attribution ----------------------------------------------------------------


def _locate(model: SupermanModel, sample: GraphSet, graph: SignalGraph) -> int:
    if not any(g is graph or g.sort_key() == graph.sort_key() for g in sample.graphs):
        raise PartitionError(f"Graph '{graph.signal_type}' is not part of entity '{sample.entity_id}'")
    index = model.partition.subset_of(graph)
    if model.subsets[index].mixer is not None:
        raise NotNodeAttributable(
            f"Subset '{model.subsets[index].name}' mixes its graphs non-linearly; "
            "only its subset contribution is defined"
        )
    return index


def node_contribution(model: SupermanModel, sample: GraphSet, graph: SignalGraph, node: int) -> float:
    index = _locate(model, sample, graph)
    if not 0 <= node < graph.num_nodes:
        raise InvalidNode(f"Node {node} out of range for '{graph.signal_type}' with {graph.num_nodes} nodes")
    terms = node_contribution_terms(model.subsets[index].encoder, graph)
    return float(terms[:, node].sum())


def graph_contribution(model: SupermanModel, sample: GraphSet, graph: SignalGraph) -> float:
    index = _locate(model, sample, graph)
    terms = node_contribution_terms(model.subsets[index].encoder, graph)
    return float(terms.sum(axis=0).sum())


def subset_contribution(model: SupermanModel, sample: GraphSet, subset: int) -> float:
    graphs = assign_subsets(model, sample)[subset]
    return float(subset_representation(model.subsets[subset], graphs).data.sum())


def explain(model: SupermanModel, sample: GraphSet) -> ContributionReport:
    """Full contribution breakdown for one sample."""
    logits, contributions = forward_batch(model, [sample])
    logit = logits.item()
    per_subset = contributions.data[0]
    report = ContributionReport(
        entity_id=sample.entity_id,
        logit=logit,
        output_bias=model.bias_value,
        subset_contributions={m.name: float(v) for m, v in zip(model.subsets, per_subset)},
        reconstruction_residual=abs(logit - model.bias_value - float(per_subset.sum())),
    )
    for index, graphs in enumerate(assign_subsets(model, sample)):
        module = model.subsets[index]
        if module.mixer is not None:
            continue
        for graph in graphs:
            terms = node_contribution_terms(module.encoder, graph)
            per_node = terms.sum(axis=0)
            report.graph_contributions.append(GraphContribution(module.name, graph.signal_type, float(per_node.sum())))
            for j, value in enumerate(per_node):
                report.node_contributions.append(
                    NodeContribution(module.name, graph.signal_type, j, float(graph.node_timestamps[j]), float(value))
                )
    return report


# perturbation ---------------------------------------------------------------


def first_principal_component(matrix: np.ndarray) -> np.ndarray:
    """Leading eigenvector of the covariance, sign fixed so its largest-magnitude entry is positive."""
    x = np.asarray(matrix, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2 or x.shape[1] < 1:
        raise DegenerateDirection(f"Need at least two nodes with one feature, got shape {x.shape}")
    centred = x - x.mean(axis=0)
    cov = centred.T @ centred / (x.shape[0] - 1)
    values, vectors = np.linalg.eigh(cov)
    if values[-1] <= 1e-12 * max(1.0, float(np.abs(x).max())):
        raise DegenerateDirection("Pooled feature matrix has rank zero")
    pc = vectors[:, -1]
    if pc[np.argmax(np.abs(pc))] < 0:
        pc = -pc
    return pc


def _outputs(model: SupermanModel, samples: Sequence[GraphSet]) -> np.ndarray:
    logits = predict_logits(model, samples)
    return expit(logits) if model.link == Link.SIGMOID else logits


def pca_perturbation_curve(
    model: SupermanModel, dataset: Sequence[GraphSet], subset: int, noise_levels: Sequence[float]
) -> PerturbationCurve:
    """Mean model output while shifting the subset's node features along its first principal component."""

    def belongs(g: SignalGraph) -> bool:
        return model.partition.subset_of(g) == subset

    pooled = [g.node_features for s in dataset for g in s.graphs if belongs(g)]
    if not pooled:
        raise DegenerateDirection(f"No nodes of subset '{model.subsets[subset].name}' in the dataset")
    direction = first_principal_component(np.concatenate(pooled, axis=0))
    baseline = _outputs(model, dataset)
    outputs, stds = [], []
    for level in noise_levels:
        if level == 0:
            values = baseline
        else:
            shift = level * direction
            shifted = [
                replace(
                    s,
                    graphs=tuple(
                        replace(g, node_features=g.node_features + shift) if belongs(g) else g for g in s.graphs
                    ),
                )
                for s in dataset
            ]
            values = _outputs(model, shifted)
        outputs.append(float(values.mean()))
        stds.append(float(values.std()))
    return PerturbationCurve(
        target=model.subsets[subset].name,
        noise_levels=[float(v) for v in noise_levels],
        outputs=outputs,
        stds=stds,
        direction=direction.tolist(),
    )


def _perturb_graph(graph: SignalGraph, kind: NoiseKind, level: float, rng: np.random.Generator) -> SignalGraph:
    if kind == NoiseKind.TEMPORAL:
        n = graph.num_nodes
        upper = np.triu(rng.normal(0.0, level, size=(n, n)), k=1)
        return replace(graph, delta=graph.delta + upper - upper.T)
    x = graph.node_features.copy()
    noise = rng.normal(0.0, 1.0, size=x.shape[0])
    if kind == NoiseKind.ADDITIVE:
        x[:, 0] = x[:, 0] + noise * level
    else:
        x[:, 0] = x[:, 0] + noise * np.abs(x[:, 0]) * level
    return replace(graph, node_features=x)


def perturb_dataset(
    dataset: Sequence[GraphSet], kind: NoiseKind, level: float, level_index: int, seed: int
) -> List[GraphSet]:
    """Noisy copy of raw ``dataset``; each sample draws from its own (seed, level, sample) stream.

    Values and temporal distances are perturbed in the units they were
    measured in, so this runs before any normalisation.
    """
    kind = NoiseKind(kind)
    out = []
    for position, sample in enumerate(dataset):
        rng = np.random.default_rng(np.random.SeedSequence([seed, level_index, position]))
        out.append(replace(sample, graphs=tuple(_perturb_graph(g, kind, level, rng) for g in sample.graphs)))
    return out


def _ranking_metrics(scores: np.ndarray, labels: np.ndarray) -> Tuple[float, float]:
    return auroc(scores, labels), auprc(scores, labels)


def _relative_change(value: float, base: float) -> float:
    return 100.0 * (value - base) / base if base != 0 else float("nan")


def noise_robustness(
    model: SupermanModel,
    dataset: Sequence[GraphSet],
    kind: NoiseKind,
    levels: Optional[Sequence[float]] = None,
    seeds: Sequence[int] = (0,),
    prepare: Optional[Callable[[Sequence[GraphSet]], List[GraphSet]]] = None,
) -> List[RobustnessRow]:
    """Relative change (%) of AUROC and AUPRC under test-time noise, mean and std over seeds.

    ``dataset`` holds raw samples; ``prepare`` turns them into model inputs
    (masking, normalisation) after the noise is injected. A clean metric of
    zero makes its relative change NaN.
    """
    kind = NoiseKind(kind)
    prepare = prepare or list
    levels = list(DEFAULT_LEVELS[kind] if levels is None else levels)
    labels = np.array([s.label for s in dataset], dtype=np.int64)
    clean = predict_logits(model, prepare(dataset))
    base_auroc, base_auprc = _ranking_metrics(clean, labels)
    if base_auroc == 0 or base_auprc == 0:
        logger.warning(f"Clean AUROC={base_auroc:.4f}, AUPRC={base_auprc:.4f}: relative changes from zero are NaN")
    rows = []
    for level_index, level in enumerate(levels):
        d_auroc, d_auprc = [], []
        for seed in seeds:
            if level == 0:
                m_auroc, m_auprc = base_auroc, base_auprc
            else:
                noisy = prepare(perturb_dataset(dataset, kind, level, level_index, seed))
                m_auroc, m_auprc = _ranking_metrics(predict_logits(model, noisy), labels)
            d_auroc.append(_relative_change(m_auroc, base_auroc))
            d_auprc.append(_relative_change(m_auprc, base_auprc))
        rows.append(
            RobustnessRow(
                level=float(level),
                delta_auroc_pct=float(np.mean(d_auroc)),
                delta_auroc_std=float(np.std(d_auroc)),
                delta_auprc_pct=float(np.mean(d_auprc)),
                delta_auprc_std=float(np.std(d_auprc)),
            )
        )
        logger.debug(f"{kind.value} noise {level}: dAUROC={rows[-1].delta_auroc_pct:.2f}%")
    return rows
