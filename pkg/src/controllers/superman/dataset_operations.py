import logging
import os
from typing import Any, Dict, List, Optional

from ...core.signal_graphs import GraphSet, PartitionConfig, feature_dims
from ...core.synth import SynthSpec, generate
from ...utils.csv_export import write_measurements_csv
from ...utils.csv_import import IngestSchema, ingest_csv
from ...utils.json_export import dataset_hash, export_dataset, import_dataset, load_partition_config, write_json
from .base_controller import SupermanMixin

logger = logging.getLogger(__name__)


def summarize_dataset(graph_sets: List[GraphSet]) -> Dict[str, Any]:
    """Entity, graph and node counts per signal type."""
    per_signal: Dict[str, Dict[str, int]] = {}
    for gs in graph_sets:
        for g in gs.graphs:
            entry = per_signal.setdefault(g.signal_type, {"graphs": 0, "nodes": 0})
            entry["graphs"] += 1
            entry["nodes"] += g.num_nodes
    return {
        "entities": len(graph_sets),
        "positives": sum(gs.label for gs in graph_sets),
        "graphs": sum(len(gs.graphs) for gs in graph_sets),
        "nodes": sum(g.num_nodes for gs in graph_sets for g in gs.graphs),
        "signals": {k: per_signal[k] for k in sorted(per_signal)},
    }


class DatasetOperationsController(SupermanMixin):
    """Controller for loading, ingesting and generating datasets."""

    def load_dataset(self, file_path: str) -> Dict[str, Any]:
        """Load a canonical dataset JSON file."""
        try:
            self.dataset, self.dataset_metadata = import_dataset(file_path)
        except Exception as e:
            logger.error(f"Error loading dataset: {e}")
            raise
        summary = summarize_dataset(self.dataset)
        logger.info(f"Dataset has {summary['entities']} entities, {summary['graphs']} graphs, {summary['nodes']} nodes")
        return summary

    def save_dataset(self, file_path: str) -> str:
        self._ensure_dataset_loaded()
        return export_dataset(self.dataset or [], file_path, self.dataset_metadata)

    def ingest(
        self, csv_path: str, schema: Optional[IngestSchema] = None, out_dir: Optional[str] = None
    ) -> Dict[str, Any]:
        """
        Ingest a measurement CSV into the session.

        Args:
            csv_path: Long-format measurement file
            schema: Vocabulary and label source
            out_dir: When given, write ``dataset.json`` and ``summary.json`` there

        Returns:
            dict: Dataset summary and the files written
        """
        schema = schema or IngestSchema()
        self.dataset = ingest_csv(csv_path, schema)
        self.dataset_metadata = {"source": os.path.basename(csv_path), "time_unit": schema.time_unit}
        summary = summarize_dataset(self.dataset)
        files = []
        if out_dir is not None:
            files.append(export_dataset(self.dataset, os.path.join(out_dir, "dataset.json"), self.dataset_metadata))
            files.append(write_json(summary, os.path.join(out_dir, "summary.json")))
        return {"summary": summary, "files": files}

    def synthesize(self, spec: SynthSpec, grouped: bool = True, out_dir: Optional[str] = None) -> Dict[str, Any]:
        """Generate a synthetic dataset, its partition config and (optionally) its files."""
        data = generate(spec, grouped)
        self.dataset = data.graph_sets
        self.dataset_metadata = dict(data.metadata)
        self.dataset_metadata["dataset_hash"] = dataset_hash(data.graph_sets)
        self.partition_config = PartitionConfig(
            subsets=[list(s) for s in data.partition.subsets],
            feature_groups={s: [list(g) for g in grouping.groups] for s, grouping in data.groupings.items()},
        )
        files = []
        if out_dir is not None:
            files.append(export_dataset(self.dataset, os.path.join(out_dir, "dataset.json"), self.dataset_metadata))
            files.append(write_measurements_csv(self.dataset, os.path.join(out_dir, "measurements.csv")))
            files.append(write_json(self.partition_config.to_dict(), os.path.join(out_dir, "partition.json")))
        return {"summary": summarize_dataset(self.dataset), "metadata": self.dataset_metadata, "files": files}

    def load_partition(self, file_path: str) -> Dict[str, Any]:
        self.partition_config = load_partition_config(file_path)
        return self.partition_config.to_dict()

    def get_dataset_info(self) -> Dict[str, Any]:
        dataset = self._ensure_dataset_loaded()
        info = summarize_dataset(dataset)
        info["feature_dims"] = feature_dims(dataset)
        info["metadata"] = self.dataset_metadata
        return info

    def get_entity(self, entity_id: str) -> Dict[str, Any]:
        sample = self._find_sample(entity_id)
        return {
            "entity_id": sample.entity_id,
            "label": sample.label,
            "graphs": [
                {
                    "signal_type": g.signal_type,
                    "timestamps": g.node_timestamps.tolist(),
                    "features": g.node_features.tolist(),
                }
                for g in sample.graphs
            ],
        }
