import logging
import os
from dataclasses import replace
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from ...core.metrics import accuracy
from ...core.signal_graphs import PartitionConfig
from ...core.superman import (
    ModelAblation,
    find_infeasibility_certificate,
    predict_logits,
    xor_threshold_system,
    xor_witness_model,
)
from ...core.synth import SynthDataset, feature_xor_dataset, set_xor_dataset
from ...core.training import TrainConfig
from ...errors import ConfigError
from ...utils.csv_export import write_rows
from ...utils.json_export import write_json, write_manifest
from .base_controller import SupermanMixin
from .run_config import RunConfig
from .training_operations import model_scores, prepare_splits, run_seeds

logger = logging.getLogger(__name__)

XOR_KINDS = ("feature", "set")
XOR_TRAIN = TrainConfig(
    epochs=600,
    batch_size=4,
    lr_max=1e-2,
    plateau_patience=100,
    dropout=0.0,
    hidden=32,
    layers=3,
    upsample_minority=False,
)


def xor_configurations(kind: str, grouped: Optional[bool] = None) -> Dict[str, SynthDataset]:
    """Truth-table datasets keyed by configuration name."""
    if kind not in XOR_KINDS:
        raise ConfigError(f"Unknown XOR benchmark '{kind}', expected one of {XOR_KINDS}")
    choices = [True, False] if grouped is None else [grouped]
    out = {}
    for flag in choices:
        if kind == "feature":
            out["grouped" if flag else "univariate"] = feature_xor_dataset(1, grouped=flag)
        else:
            out["paired" if flag else "singletons"] = set_xor_dataset(1, paired=flag)
    return out


def partition_config_of(data: SynthDataset) -> PartitionConfig:
    return PartitionConfig(
        subsets=[list(s) for s in data.partition.subsets],
        feature_groups={s: [list(g) for g in grouping.groups] for s, grouping in data.groupings.items()},
    )


class BenchOperationsController(SupermanMixin):
    """Controller for the XOR separation benchmarks and the ablation table."""

    def xor_bench(
        self,
        kind: str = "feature",
        grouped: Optional[bool] = None,
        seeds: Sequence[int] = tuple(range(10)),
        train_config: Optional[TrainConfig] = None,
        out_dir: Optional[str] = None,
    ) -> Dict[str, Any]:
        """
        Train on the four XOR patterns with and without a joint grouping.

        Args:
            kind: ``feature`` (grouped features of one signal) or ``set`` (two signals in one subset)
            grouped: Run only the joint (True) or only the split (False) configuration
            seeds: Training seeds
            train_config: Optimiser settings, full-batch defaults when omitted
            out_dir: When given, write ``xor_{kind}.csv``, ``xor_{kind}.json`` and the manifest

        Returns:
            dict: Per-seed accuracies, summaries, the exact witness and the infeasibility certificate
        """
        train_config = train_config or XOR_TRAIN
        run = RunConfig(seeds=list(seeds), train=train_config, normalize=False, deterministic=True)
        files: List[str] = []
        if out_dir is not None:
            files.append(write_json(run.to_dict(), os.path.join(out_dir, "run_config.json")))
        rows: List[Dict[str, Any]] = []
        summary: Dict[str, Dict[str, float]] = {}
        for name, data in xor_configurations(kind, grouped).items():
            prepared = prepare_splits(data.graph_sets, partition_config_of(data), run, data.metadata, holdout=False)
            labels = [s.label for s in prepared.test]
            scores = []
            for result in run_seeds(prepared, run):
                acc = accuracy(model_scores(result.model, prepared.test), labels)
                scores.append(acc)
                rows.append({"task": kind, "configuration": name, "seed": result.seed, "accuracy": acc})
            summary[name] = {
                "mean": float(np.mean(scores)),
                "min": float(np.min(scores)),
                "max": float(np.max(scores)),
                "solved": int(sum(s == 1.0 for s in scores)),
            }
            logger.info(
                f"XOR {kind}/{name}: mean accuracy {summary[name]['mean']:.3f}, "
                f"solved {summary[name]['solved']}/{len(scores)}"
            )

        witness_data = xor_configurations(kind, True)["grouped" if kind == "feature" else "paired"]
        witness = predict_logits(xor_witness_model(set_level=kind == "set"), witness_data.graph_sets).tolist()
        certificate = find_infeasibility_certificate(*xor_threshold_system())
        document = {
            "task": kind,
            "rows": rows,
            "summary": summary,
            "witness_outputs": [round(v, 12) for v in witness],
            "witness_labels": [s.label for s in witness_data.graph_sets],
            "certificate": None
            if certificate is None
            else {
                "negative": list(certificate.negative),
                "positive": list(certificate.positive),
                "combined": list(certificate.combined),
            },
        }
        if out_dir is not None:
            columns = ["task", "configuration", "seed", "accuracy"]
            files.append(write_rows(os.path.join(out_dir, f"xor_{kind}.csv"), columns, rows))
            files.append(write_json(document, os.path.join(out_dir, f"xor_{kind}.json")))
            files.append(write_manifest(out_dir, "xor-bench", run.config_hash(), run.seeds, files))
        return {**document, "files": files}

    def ablate(
        self,
        run: RunConfig,
        variants: Optional[Sequence[str]] = None,
        partition_configs: Optional[Dict[str, Optional[PartitionConfig]]] = None,
        out_dir: Optional[str] = None,
    ) -> Dict[str, Any]:
        """
        Test AUPRC per partition configuration and ablation variant on the current dataset.

        ``auprc_drop`` is the full model's mean minus the variant's mean, so
        positive values mean the ablated component helped.
        """
        dataset = self._ensure_dataset_loaded()
        chosen = [ModelAblation(v) for v in (variants or [a.value for a in ModelAblation])]
        if ModelAblation.NONE not in chosen:
            chosen.insert(0, ModelAblation.NONE)
        configs = partition_configs or {"session": self.partition_config}
        files: List[str] = []
        if out_dir is not None:
            files.append(write_json(run.to_dict(), os.path.join(out_dir, "run_config.json")))
        rows: List[Dict[str, Any]] = []
        for label, config in configs.items():
            prepared = prepare_splits(dataset, config, run, self.dataset_metadata)
            means: Dict[ModelAblation, float] = {}
            for variant in chosen:
                results = run_seeds(prepared, replace(run, ablation=variant))
                values = np.array([r.metrics.auprc for r in results], dtype=np.float64)
                means[variant] = float(np.nanmean(values)) if np.isfinite(values).any() else float("nan")
                rows.append(
                    {
                        "configuration": label,
                        "variant": variant.value,
                        "auprc_mean": means[variant],
                        "auprc_std": float(np.nanstd(values)) if np.isfinite(values).any() else float("nan"),
                        "seeds": len(results),
                    }
                )
                logger.info(f"Ablation {label}/{variant.value}: AUPRC {means[variant]:.4f}")
            for row in rows:
                if row["configuration"] == label:
                    row["auprc_drop"] = means[ModelAblation.NONE] - row["auprc_mean"]
        if out_dir is not None:
            columns = ["configuration", "variant", "auprc_mean", "auprc_std", "auprc_drop", "seeds"]
            files.append(write_rows(os.path.join(out_dir, "ablation.csv"), columns, rows))
            table = {"config_hash": run.config_hash(), "rows": rows}
            files.append(write_json(table, os.path.join(out_dir, "ablation.json")))
            files.append(write_manifest(out_dir, "ablate", run.config_hash(), run.seeds, files))
        return {"rows": rows, "files": files}
