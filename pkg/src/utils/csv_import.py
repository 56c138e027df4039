"""
CSV ingestion of long-format measurement tables and distance matrices.
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from ..core.signal_graphs import Direction, GraphSet, MeasurementRecord, group_records
from ..errors import ConfigError, ParseError, SchemaError

logger = logging.getLogger(__name__)

REQUIRED_COLUMNS = ("entity_id", "signal_type", "timestamp", "value")


@dataclass
class IngestSchema:
    """How to read a measurement CSV.

    Labels come either from ``label_column`` in the measurement file or from
    a sidecar CSV ``labels_path`` with columns ``entity_id,label``. Columns
    after ``value`` (other than the label column) become extra features.
    """

    vocabulary: Optional[List[str]] = None
    label_column: str = "label"
    labels_path: Optional[str] = None
    direction: Direction = Direction.FORWARD
    time_unit: str = "days"
    extra_features: List[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.direction = Direction(self.direction)
        if self.vocabulary is not None and len(set(self.vocabulary)) != len(self.vocabulary):
            raise ConfigError("Signal vocabulary has duplicates")


def _number(text: str, column: str, line: int) -> float:
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise ParseError(f"{column} '{text}' is not a number", line=line) from None
    if not math.isfinite(value):
        raise ParseError(f"{column} '{text}' is not finite", line=line)
    return value


def _label(text: str, line: int) -> int:
    value = _number(text, "label", line)
    if value not in (0.0, 1.0):
        raise ParseError(f"label '{text}' must be 0 or 1", line=line)
    return int(value)


def read_labels(path: str) -> Dict[str, int]:
    labels: Dict[str, int] = {}
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or not {"entity_id", "label"} <= set(reader.fieldnames):
            raise ParseError(f"{path}: label file needs columns entity_id,label", line=1)
        for row in reader:
            labels[row["entity_id"]] = _label(row["label"], reader.line_num)
    return labels


def ingest_csv(path: str, schema: Optional[IngestSchema] = None) -> List[GraphSet]:
    """
    Read a long-format measurement CSV into one graph set per entity.

    Args:
        path: CSV with header ``entity_id,signal_type,timestamp,value[,...]``
        schema: Vocabulary, label source and graph direction

    Returns:
        list: Graph sets ordered by entity id
    """
    schema = schema or IngestSchema()
    records: List[MeasurementRecord] = []
    labels: Dict[str, int] = {}
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        header = reader.fieldnames or []
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise ParseError(f"missing columns {missing}", line=1)
        extras = schema.extra_features or [
            c for c in header[header.index("value") + 1:] if c != schema.label_column
        ]
        has_label = schema.label_column in header
        if not has_label and schema.labels_path is None:
            raise ConfigError(f"No '{schema.label_column}' column and no label file given")
        known = set(schema.vocabulary) if schema.vocabulary is not None else None
        for row in reader:
            line = reader.line_num
            if None in row or any(row.get(c) is None for c in REQUIRED_COLUMNS):
                raise ParseError("wrong number of fields", line=line)
            entity, signal = row["entity_id"].strip(), row["signal_type"].strip()
            if not entity or not signal:
                raise ParseError("empty entity_id or signal_type", line=line)
            if known is not None and signal not in known:
                raise SchemaError(f"line {line}: unknown signal type '{signal}'")
            features = [_number(row["value"], "value", line)]
            features += [_number(row[c], c, line) for c in extras]
            timestamp = _number(row["timestamp"], "timestamp", line)
            records.append(MeasurementRecord(entity, signal, timestamp, tuple(features)))
            if has_label and row[schema.label_column] not in ("", None):
                label = _label(row[schema.label_column], line)
                if labels.setdefault(entity, label) != label:
                    raise ParseError(f"conflicting labels for entity '{entity}'", line=line)
    if schema.labels_path is not None:
        labels.update(read_labels(schema.labels_path))
    graph_sets = group_records(records, labels, schema.direction, schema.vocabulary)
    logger.info(
        f"Ingested {len(records)} measurements into {len(graph_sets)} entities "
        f"and {sum(len(gs.graphs) for gs in graph_sets)} graphs"
    )
    return graph_sets


def read_matrix_csv(path: str) -> np.ndarray:
    """Read a square numeric matrix; a non-numeric first row is taken as a header."""
    with open(path, newline="", encoding="utf-8") as f:
        rows = [r for r in csv.reader(f) if r]
    if not rows:
        raise ParseError(f"{path} is empty", line=1)
    start = 0
    try:
        float(rows[0][0])
    except ValueError:
        start = 1
    matrix = []
    for offset, row in enumerate(rows[start:]):
        line = start + offset + 1
        matrix.append([_number(cell, "entry", line) for cell in row])
    widths = {len(r) for r in matrix}
    if len(widths) > 1:
        raise ParseError(f"{path}: rows have different lengths {sorted(widths)}")
    return np.asarray(matrix, dtype=np.float64)
