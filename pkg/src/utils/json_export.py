"""
JSON export/import for datasets, model checkpoints, configs and run manifests.

The canonical dataset document stores, per graph, the signal type, node
timestamps, node features and edges. Temporal distances and reachability are
recomputed on load.
"""

import hashlib
import json
import logging
import os
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.signal_graphs import TIME_UNIT, GraphSet, PartitionConfig, SignalGraph, build_graph
from ..core.superman import SupermanModel, model_from_dict, model_to_dict
from ..errors import ConfigError, ParseError, SchemaError

logger = logging.getLogger(__name__)

DATASET_FORMAT_VERSION = 1


def graph_to_json(graph: SignalGraph) -> Dict[str, Any]:
    return {
        "signal_type": graph.signal_type,
        "timestamps": graph.node_timestamps.tolist(),
        "features": graph.node_features.tolist(),
        "edges": [list(e) for e in graph.edges],
    }


def graph_from_json(data: Dict[str, Any]) -> SignalGraph:
    features = np.asarray(data["features"], dtype=np.float64)
    timestamps = np.asarray(data["timestamps"], dtype=np.float64)
    if timestamps.shape[0] == 0:
        raise SchemaError(f"Graph '{data['signal_type']}' has no nodes")
    if features.ndim == 1:
        features = features.reshape(timestamps.shape[0], -1)
    return build_graph(data["signal_type"], features, timestamps, [tuple(e) for e in data.get("edges", [])])


def dataset_to_json(graph_sets: Sequence[GraphSet], metadata: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """
    Convert graph sets to a JSON-serializable dictionary.

    Args:
        graph_sets: Samples to serialize
        metadata: Free-form generator or ingestion metadata

    Returns:
        dict: Canonical dataset document
    """
    return {
        "format_version": DATASET_FORMAT_VERSION,
        "time_unit": (metadata or {}).get("time_unit", TIME_UNIT),
        "metadata": metadata or {},
        "graph_sets": [
            {
                "entity_id": gs.entity_id,
                "label": int(gs.label),
                "graphs": [graph_to_json(g) for g in gs.graphs],
            }
            for gs in graph_sets
        ],
    }


def dataset_from_json(data: Dict[str, Any]) -> Tuple[List[GraphSet], Dict[str, Any]]:
    if data.get("format_version") != DATASET_FORMAT_VERSION:
        raise SchemaError(f"Unsupported dataset format {data.get('format_version')}")
    try:
        graph_sets = [
            GraphSet(
                entity_id=str(entry["entity_id"]),
                graphs=tuple(graph_from_json(g) for g in entry["graphs"]),
                label=int(entry["label"]),
            )
            for entry in data["graph_sets"]
        ]
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError(f"Malformed dataset document: {e}") from e
    return graph_sets, data.get("metadata", {})


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"), allow_nan=True)


def fingerprint(data: Any) -> str:
    """SHA-256 of the canonical JSON text of ``data``."""
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()


def dataset_hash(graph_sets: Sequence[GraphSet]) -> str:
    return fingerprint(dataset_to_json(graph_sets)["graph_sets"])


def write_json(data: Any, file_path: str) -> str:
    """Write ``data`` with sorted keys so equal content gives equal bytes."""
    os.makedirs(os.path.dirname(os.path.abspath(file_path)), exist_ok=True)
    with open(file_path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")
    return file_path


def read_json(file_path: str) -> Any:
    try:
        with open(file_path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ParseError(f"{file_path}: {e.msg}", line=e.lineno) from e


def export_dataset(graph_sets: Sequence[GraphSet], file_path: str, metadata: Optional[Dict[str, Any]] = None) -> str:
    write_json(dataset_to_json(graph_sets, metadata), file_path)
    logger.info(f"Wrote {len(graph_sets)} graph sets to {file_path}")
    return file_path


def import_dataset(file_path: str) -> Tuple[List[GraphSet], Dict[str, Any]]:
    graph_sets, metadata = dataset_from_json(read_json(file_path))
    logger.info(f"Loaded {len(graph_sets)} graph sets from {file_path}")
    return graph_sets, metadata


def save_checkpoint(model: SupermanModel, file_path: str) -> str:
    return write_json(model_to_dict(model), file_path)


def load_checkpoint(file_path: str) -> SupermanModel:
    return model_from_dict(read_json(file_path))


def load_partition_config(file_path: str) -> PartitionConfig:
    data = read_json(file_path)
    if not isinstance(data, dict) or "subsets" not in data:
        raise ConfigError(f"{file_path}: partition config needs a 'subsets' list")
    return PartitionConfig.from_dict(data)


def sha256_file(file_path: str) -> str:
    h = hashlib.sha256()
    with open(file_path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(
    out_dir: str, command: str, config_hash: str, seeds: Sequence[int], files: Sequence[str]
) -> str:
    """Record every artifact a command wrote, with checksums, in ``manifest.json``."""
    entries = []
    for path in sorted(set(files)):
        rel = os.path.relpath(path, out_dir)
        if rel.startswith(".."):
            raise ConfigError(f"Artifact {path} lies outside the output directory {out_dir}")
        entries.append({"path": rel.replace(os.sep, "/"), "sha256": sha256_file(path)})
    manifest = {"command": command, "config_hash": config_hash, "seeds": list(seeds), "artifacts": entries}
    return write_json(manifest, os.path.join(out_dir, "manifest.json"))
