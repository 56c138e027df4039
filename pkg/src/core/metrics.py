"""
Classification metrics and calibration summaries.
"""

import logging
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Sequence

import numpy as np
from sklearn.metrics import average_precision_score, roc_auc_score

from ..errors import InvalidShape, MetricUndefined

logger = logging.getLogger(__name__)


def _as_arrays(scores: Any, labels: Any) -> tuple:
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(labels).reshape(-1).astype(np.int64)
    if s.shape != y.shape:
        raise InvalidShape(f"{s.shape[0]} scores for {y.shape[0]} labels")
    return s, y


def _require_both_classes(y: np.ndarray, name: str) -> None:
    if y.size == 0 or np.all(y == y[0]):
        raise MetricUndefined(f"{name} needs both classes present")


def auprc(scores: Any, labels: Any) -> float:
    """Area under the precision-recall curve with step-wise interpolation.

    Tied scores form a single threshold.
    """
    s, y = _as_arrays(scores, labels)
    _require_both_classes(y, "AUPRC")
    return float(average_precision_score(y, s))


def auroc(scores: Any, labels: Any) -> float:
    s, y = _as_arrays(scores, labels)
    _require_both_classes(y, "AUROC")
    return float(roc_auc_score(y, s))


def accuracy(scores: Any, labels: Any, threshold: float = 0.5) -> float:
    s, y = _as_arrays(scores, labels)
    if s.size == 0:
        raise MetricUndefined("Accuracy of an empty set")
    return float(np.mean((s >= threshold).astype(np.int64) == y))


def _bin_index(p: np.ndarray, n_bins: int) -> np.ndarray:
    return np.clip(np.floor(p * n_bins).astype(np.int64), 0, n_bins - 1)


def ece(probs: Any, labels: Any, n_bins: int = 10) -> float:
    """Expected calibration error over equal-width probability bins.

    Each bin compares the observed positive rate with the mean predicted
    probability; empty bins contribute nothing.
    """
    p, y = _as_arrays(probs, labels)
    if p.size == 0:
        return 0.0
    bins = _bin_index(p, n_bins)
    total = 0.0
    for b in range(n_bins):
        members = bins == b
        count = int(members.sum())
        if count:
            total += count / p.size * abs(float(y[members].mean()) - float(p[members].mean()))
    return total


@dataclass
class ReliabilityBin:
    bin_center: float
    confidence: float
    accuracy: float
    count: int


def reliability_diagram(probs: Any, labels: Any, n_bins: int = 10) -> List[ReliabilityBin]:
    p, y = _as_arrays(probs, labels)
    bins = _bin_index(p, n_bins)
    rows = []
    for b in range(n_bins):
        members = bins == b
        count = int(members.sum())
        rows.append(
            ReliabilityBin(
                bin_center=(b + 0.5) / n_bins,
                confidence=float(p[members].mean()) if count else float("nan"),
                accuracy=float(y[members].mean()) if count else float("nan"),
                count=count,
            )
        )
    return rows


@dataclass
class MetricsReport:
    auprc: float
    auroc: float
    accuracy: float
    ece: float

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def evaluate_probabilities(probs: Any, labels: Any, n_bins: int = 10) -> MetricsReport:
    """All reporting metrics for one set of predictions; undefined ranking metrics become NaN."""
    values = {}
    for name, fn in (("auprc", auprc), ("auroc", auroc)):
        try:
            values[name] = fn(probs, labels)
        except MetricUndefined as e:
            logger.warning(f"{name} undefined: {e}")
            values[name] = float("nan")
    return MetricsReport(
        auprc=values["auprc"],
        auroc=values["auroc"],
        accuracy=accuracy(probs, labels),
        ece=ece(probs, labels, n_bins),
    )


def summarize(reports: Sequence[MetricsReport]) -> Dict[str, Dict[str, float]]:
    """Mean and population standard deviation of every metric across seeds."""
    summary = {}
    for name in ("auprc", "auroc", "accuracy", "ece"):
        values = np.array([getattr(r, name) for r in reports], dtype=np.float64)
        summary[name] = {
            "mean": float(values.mean()) if values.size else float("nan"),
            "std": float(values.std()) if values.size else float("nan"),
        }
    return summary
