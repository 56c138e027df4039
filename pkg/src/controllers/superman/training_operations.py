import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from scipy.special import expit

from ...core.metrics import MetricsReport, evaluate_probabilities, reliability_diagram, summarize
from ...core.signal_graphs import (
    DeltaPolicy,
    FeatureGrouping,
    GraphSet,
    NormalizationStats,
    PartitionConfig,
    SubsetPartition,
    apply_delta_policy,
    bind_partition,
    feature_dims,
    fit_normalization,
    normalize_features,
    split_dataset,
    validate_partition,
)
from ...core.superman import Link, SupermanModel, build_model, predict_logits
from ...core.training import EpochRecord, train
from ...errors import ConfigError
from ...utils.csv_export import write_history_csv, write_reliability_csv
from ...utils.json_export import load_checkpoint, save_checkpoint, write_json, write_manifest
from .base_controller import SupermanMixin
from .run_config import RunConfig

logger = logging.getLogger(__name__)


@dataclass
class PreparedData:
    train: List[GraphSet]
    val: List[GraphSet]
    test: List[GraphSet]
    partition_config: PartitionConfig
    partition: SubsetPartition
    groupings: Dict[str, FeatureGrouping]
    stats: Optional[NormalizationStats]
    metadata: Dict[str, Any]


@dataclass
class SeedResult:
    seed: int
    model: SupermanModel
    history: List[EpochRecord]
    metrics: MetricsReport


def resolve_partition_config(
    graph_sets: Sequence[GraphSet], config: Optional[PartitionConfig], run: RunConfig
) -> PartitionConfig:
    vocabulary = sorted({g.signal_type for gs in graph_sets for g in gs.graphs})
    resolved = config if config is not None else PartitionConfig.singletons(vocabulary)
    if run.delta_policy is not None:
        resolved = replace(resolved, delta_policy=run.delta_policy, window=run.window)
    return resolved


def prepare_splits(
    graph_sets: Sequence[GraphSet],
    partition_config: Optional[PartitionConfig],
    run: RunConfig,
    metadata: Optional[Dict[str, Any]] = None,
    holdout: bool = True,
) -> PreparedData:
    """Validate the partition, mask, split and normalise a raw dataset.

    With ``holdout=False`` every sample is used for training, validation and
    testing (the XOR truth tables).
    """
    config = resolve_partition_config(graph_sets, partition_config, run)
    dims = feature_dims(graph_sets)
    partition = config.partition()
    groupings = config.groupings(dims)
    vocabulary = sorted(set(partition.vocabulary) | set(dims))
    validate_partition(partition, groupings, vocabulary)
    for signal, width in dims.items():
        if groupings[signal].feature_dim != width:
            covered = groupings[signal].feature_dim
            raise ConfigError(f"Grouping for '{signal}' covers {covered} features, data has {width}")

    masked = apply_delta_policy(graph_sets, config.delta_policy, config.window)
    if holdout:
        train_set, val_set, test_set = split_dataset(masked, run.split, run.split_seed)
    else:
        train_set, val_set, test_set = list(masked), list(masked), list(masked)
    stats = None
    if run.normalize:
        stats = fit_normalization(train_set, run.normalize_timestamps)
        train_set, val_set, test_set = (normalize_features(s, stats) for s in (train_set, val_set, test_set))
    train_set, val_set, test_set = (bind_partition(s, partition) for s in (train_set, val_set, test_set))
    logger.info(f"Prepared splits: {len(train_set)} train, {len(val_set)} val, {len(test_set)} test")
    return PreparedData(train_set, val_set, test_set, config, partition, groupings, stats, dict(metadata or {}))


def prepare_for_model(model: SupermanModel, graph_sets: Sequence[GraphSet]) -> List[GraphSet]:
    """Apply a trained model's masking and normalisation to raw samples."""
    meta = model.metadata.get("partition_config")
    out = list(graph_sets)
    if meta is not None:
        config = PartitionConfig.from_dict(meta)
        out = apply_delta_policy(out, config.delta_policy, config.window)
    if model.normalization is not None:
        out = normalize_features(out, model.normalization)
    return bind_partition(out, model.partition)


def model_scores(model: SupermanModel, samples: Sequence[GraphSet]) -> np.ndarray:
    logits = predict_logits(model, samples)
    if model.link == Link.SIGMOID:
        return expit(logits)
    return logits


def run_seed(prepared: PreparedData, run: RunConfig, seed: int) -> SeedResult:
    """Build, train and test one model."""
    model = build_model(prepared.partition, prepared.groupings, run.model_config(prepared.metadata), seed)
    model, history = train(model, prepared.train, prepared.val, replace(run.train, seed=seed))
    model.normalization = prepared.stats
    model.metadata = {"partition_config": prepared.partition_config.to_dict(), "seed": seed}
    labels = [s.label for s in prepared.test]
    metrics = evaluate_probabilities(model_scores(model, prepared.test), labels)
    logger.info(f"Seed {seed}: test AUPRC={metrics.auprc:.4f} AUROC={metrics.auroc:.4f}")
    return SeedResult(seed=seed, model=model, history=history, metrics=metrics)


def run_seeds(prepared: PreparedData, run: RunConfig) -> List[SeedResult]:
    if run.workers > 1 and len(run.seeds) > 1:
        with ProcessPoolExecutor(max_workers=run.workers) as pool:
            futures = [pool.submit(run_seed, prepared, run, seed) for seed in run.seeds]
            return [f.result() for f in futures]
    return [run_seed(prepared, run, seed) for seed in run.seeds]


def metrics_document(results: Sequence[SeedResult], run: RunConfig) -> Dict[str, Any]:
    return {
        "config_hash": run.config_hash(),
        "seeds": [r.seed for r in results],
        "per_seed": [dict(r.metrics.to_dict(), seed=r.seed) for r in results],
        "summary": summarize([r.metrics for r in results]),
    }


class TrainingOperationsController(SupermanMixin):
    """Controller for training and evaluating models."""

    def train_run(self, run: RunConfig, out_dir: Optional[str] = None) -> Dict[str, Any]:
        """
        Train one model per seed on the current dataset.

        Args:
            run: Run configuration
            out_dir: Directory for checkpoints, histories, metrics and manifest

        Returns:
            dict: Metrics summary and files written
        """
        dataset = self._ensure_dataset_loaded()
        files: List[str] = []
        if out_dir is not None:
            files.append(write_json(run.to_dict(), os.path.join(out_dir, "run_config.json")))
        prepared = prepare_splits(dataset, self.partition_config, run, self.dataset_metadata)
        results = run_seeds(prepared, run)
        self.model = results[0].model
        document = metrics_document(results, run)
        if out_dir is not None:
            for r in results:
                files.append(save_checkpoint(r.model, os.path.join(out_dir, f"checkpoint_seed{r.seed}.json")))
                files.append(write_history_csv(r.history, os.path.join(out_dir, f"history_seed{r.seed}.csv")))
            files.append(write_json(document, os.path.join(out_dir, "metrics.json")))
            files.append(write_manifest(out_dir, "train", run.config_hash(), run.seeds, files))
        return {"metrics": document, "files": files}

    def evaluate(self, out_dir: Optional[str] = None, n_bins: int = 10) -> Dict[str, Any]:
        """Metrics, ECE and reliability diagram of the current model on the whole current dataset."""
        model = self._ensure_model_loaded()
        samples = prepare_for_model(model, self._ensure_dataset_loaded())
        if model.link != Link.SIGMOID:
            raise ConfigError("Calibration metrics need a sigmoid link")
        probs = model_scores(model, samples)
        labels = [s.label for s in samples]
        report = evaluate_probabilities(probs, labels, n_bins)
        bins = reliability_diagram(probs, labels, n_bins)
        files: List[str] = []
        if out_dir is not None:
            files.append(write_json(report.to_dict(), os.path.join(out_dir, "metrics.json")))
            files.append(write_reliability_csv(bins, os.path.join(out_dir, "reliability.csv")))
        return {"metrics": report.to_dict(), "reliability": [b.__dict__ for b in bins], "files": files}

    def use_delta_policy(self, policy: str, window: Optional[int] = None) -> Dict[str, Any]:
        """Set the masking policy of the session's partition config."""
        dataset = self._ensure_dataset_loaded()
        base = self.partition_config or PartitionConfig.singletons({g.signal_type for gs in dataset for g in gs.graphs})
        self.partition_config = replace(base, delta_policy=DeltaPolicy(policy), window=window)
        return self.partition_config.to_dict()

    def load_model(self, file_path: str) -> Dict[str, Any]:
        """Load a checkpoint as the session model."""
        try:
            self.model = load_checkpoint(file_path)
        except Exception as e:
            logger.error(f"Error loading checkpoint: {e}")
            raise
        return {
            "subsets": [m.name for m in self.model.subsets],
            "link": self.model.link.value,
            "ablation": self.model.ablation.value,
            "metadata": self.model.metadata,
        }

    def save_model(self, file_path: str) -> str:
        return save_checkpoint(self._ensure_model_loaded(), file_path)
