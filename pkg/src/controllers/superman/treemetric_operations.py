import logging
import os
from typing import Any, Dict, List, Optional

import numpy as np

from ...core.treemetric import INGESTED_RTOL, four_point_check, reconstruct_path, temporal_distance_matrix
from ...utils.csv_import import read_matrix_csv
from ...utils.json_export import write_json
from .base_controller import SupermanMixin

logger = logging.getLogger(__name__)


class TreeMetricOperationsController(SupermanMixin):
    """Controller for four-point checks and path reconstruction."""

    def check_tree_metric(self, matrix_path: str, atol: float = 1e-9, rtol: float = INGESTED_RTOL) -> Dict[str, Any]:
        ok, quadruple = four_point_check(read_matrix_csv(matrix_path), atol, rtol)
        logger.info(f"Four-point check on {matrix_path}: {'passed' if ok else f'violated at {quadruple}'}")
        return {"tree_metric": ok, "violation": list(quadruple) if quadruple else None}

    def reconstruct(
        self, matrix_path: str, out_dir: Optional[str] = None, atol: float = 1e-9, rtol: float = INGESTED_RTOL
    ) -> Dict[str, Any]:
        """Reconstruct the weighted path behind a distance-matrix CSV."""
        path = reconstruct_path(read_matrix_csv(matrix_path), atol, rtol)
        result = {"order": path.order, "weights": path.weights}
        files: List[str] = []
        if out_dir is not None:
            files.append(write_json(result, os.path.join(out_dir, "path.json")))
        return {**result, "files": files}

    def graph_distances(self, entity_id: str, signal_type: str) -> Dict[str, Any]:
        """Unsigned temporal distances of one signal graph of the current dataset."""
        sample = self._find_sample(entity_id)
        graphs = sample.graphs_of(signal_type)
        if not graphs:
            return {"entity_id": entity_id, "signal_type": signal_type, "matrix": []}
        matrix = temporal_distance_matrix(graphs[0])
        return {"entity_id": entity_id, "signal_type": signal_type, "matrix": np.round(matrix, 12).tolist()}
