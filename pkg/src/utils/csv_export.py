"""
CSV writers for plot data and tables.
"""

import csv
import logging
import os
from dataclasses import asdict, is_dataclass
from typing import Any, Dict, List, Sequence

import numpy as np

from ..core.interpret import ContributionReport, PerturbationCurve, RobustnessRow
from ..core.metrics import ReliabilityBin
from ..core.signal_graphs import GraphSet
from ..core.training import EpochRecord
from ..errors import SchemaError

logger = logging.getLogger(__name__)


def write_rows(file_path: str, columns: Sequence[str], rows: Sequence[Any]) -> str:
    """Write dicts or dataclasses as CSV with a fixed column order."""
    os.makedirs(os.path.dirname(os.path.abspath(file_path)), exist_ok=True)
    with open(file_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow(asdict(row) if is_dataclass(row) else row)
    logger.debug(f"Wrote {len(rows)} rows to {file_path}")
    return file_path


def write_history_csv(history: Sequence[EpochRecord], file_path: str) -> str:
    return write_rows(file_path, ["epoch", "train_loss", "val_loss", "val_auprc", "lr"], history)


def write_contributions_csv(reports: Sequence[ContributionReport], file_path: str) -> str:
    """One row per node for single-graph subsets, one summary row (node_index empty) per subset."""
    rows: List[Dict[str, Any]] = []
    for report in reports:
        for node in report.node_contributions:
            rows.append(
                {
                    "entity_id": report.entity_id,
                    "subset": node.subset,
                    "graph": node.signal_type,
                    "node_index": node.node_index,
                    "timestamp": node.timestamp,
                    "contribution": node.contribution,
                }
            )
        for subset, value in report.subset_contributions.items():
            rows.append(
                {
                    "entity_id": report.entity_id,
                    "subset": subset,
                    "graph": "",
                    "node_index": "",
                    "timestamp": "",
                    "contribution": value,
                }
            )
    return write_rows(file_path, ["entity_id", "subset", "graph", "node_index", "timestamp", "contribution"], rows)


def write_curve_csv(curve: PerturbationCurve, file_path: str) -> str:
    rows = [
        {"target": curve.target, "level": level, "mean_output": out, "std": std}
        for level, out, std in zip(curve.noise_levels, curve.outputs, curve.stds)
    ]
    return write_rows(file_path, ["target", "level", "mean_output", "std"], rows)


def write_robustness_csv(rows: Sequence[RobustnessRow], file_path: str) -> str:
    return write_rows(
        file_path, ["level", "delta_auroc_pct", "delta_auroc_std", "delta_auprc_pct", "delta_auprc_std"], rows
    )


def write_reliability_csv(bins: Sequence[ReliabilityBin], file_path: str) -> str:
    return write_rows(file_path, ["bin_center", "confidence", "accuracy", "count"], bins)


def write_measurements_csv(graph_sets: Sequence[GraphSet], file_path: str) -> str:
    """Long-format measurements with a label column, readable by ``ingest_csv``."""
    widths = {g.feature_dim for gs in graph_sets for g in gs.graphs}
    if len(widths) > 1:
        raise SchemaError(f"Long-format CSV needs one feature width across signals, got {sorted(widths)}")
    width = widths.pop() if widths else 1
    extra = [f"feature_{k}" for k in range(1, width)]
    rows = []
    for gs in graph_sets:
        for g in gs.graphs:
            for t, x in zip(g.node_timestamps, g.node_features):
                row: Dict[str, Any] = {
                    "entity_id": gs.entity_id,
                    "signal_type": g.signal_type,
                    "timestamp": repr(float(t)),
                    "value": repr(float(x[0])),
                    "label": gs.label,
                }
                for k, name in enumerate(extra, start=1):
                    row[name] = repr(float(x[k]))
                rows.append(row)
    return write_rows(file_path, ["entity_id", "signal_type", "timestamp", "value"] + extra + ["label"], rows)


def write_matrix_csv(matrix: np.ndarray, file_path: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(file_path)), exist_ok=True)
    with open(file_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        for row in np.asarray(matrix, dtype=np.float64):
            writer.writerow([repr(float(v)) for v in row])
    return file_path
