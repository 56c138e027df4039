import logging
import os
from dataclasses import asdict
from typing import Any, Dict, List, Optional, Sequence

from ...core.interpret import (
    DEFAULT_LEVELS,
    NoiseKind,
    explain,
    noise_robustness,
    pca_perturbation_curve,
)
from ...errors import DegenerateDirection, SchemaError
from ...utils.csv_export import write_contributions_csv, write_curve_csv, write_robustness_csv
from ...utils.json_export import write_json
from .base_controller import SupermanMixin
from .training_operations import prepare_for_model

logger = logging.getLogger(__name__)

PCA_LEVELS = (0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0)


class InterpretOperationsController(SupermanMixin):
    """Controller for contributions and perturbation analyses of the current model."""

    def explain_entities(
        self, entity_ids: Optional[Sequence[str]] = None, out_dir: Optional[str] = None
    ) -> Dict[str, Any]:
        """
        Exact contribution reports for selected entities (all when none given).

        Args:
            entity_ids: Entities to explain
            out_dir: When given, write ``contributions.json`` and ``contributions.csv``

        Returns:
            dict: Reports and files written
        """
        model = self._ensure_model_loaded()
        samples = prepare_for_model(model, self._ensure_dataset_loaded())
        if entity_ids:
            wanted = set(entity_ids)
            samples = [s for s in samples if s.entity_id in wanted]
            missing = wanted - {s.entity_id for s in samples}
            if missing:
                raise SchemaError(f"Unknown entities {sorted(missing)}")
        reports = [explain(model, s) for s in samples]
        worst = max((r.reconstruction_residual for r in reports), default=0.0)
        logger.info(f"Explained {len(reports)} entities, max reconstruction residual {worst:.3e}")
        files: List[str] = []
        if out_dir is not None:
            files.append(write_json([asdict(r) for r in reports], os.path.join(out_dir, "contributions.json")))
            files.append(write_contributions_csv(reports, os.path.join(out_dir, "contributions.csv")))
        return {"reports": [asdict(r) for r in reports], "max_residual": worst, "files": files}

    def perturbation_curves(
        self,
        subsets: Optional[Sequence[str]] = None,
        levels: Sequence[float] = PCA_LEVELS,
        out_dir: Optional[str] = None,
    ) -> Dict[str, Any]:
        """Mean output along each subset's first principal component."""
        model = self._ensure_model_loaded()
        samples = prepare_for_model(model, self._ensure_dataset_loaded())
        names = [m.name for m in model.subsets]
        targets = list(subsets) if subsets else names
        curves = []
        files: List[str] = []
        for name in targets:
            if name not in names:
                raise SchemaError(f"Unknown subset '{name}'")
            try:
                curve = pca_perturbation_curve(model, samples, names.index(name), levels)
            except DegenerateDirection as e:
                if subsets:
                    raise
                logger.warning(f"Skipping subset '{name}': {e}")
                continue
            curves.append(asdict(curve))
            if out_dir is not None:
                safe = "".join(c if c.isalnum() or c in "-_" else "_" for c in name)
                files.append(write_curve_csv(curve, os.path.join(out_dir, f"perturbation_{safe}.csv")))
        return {"curves": curves, "files": files}

    def robustness(
        self,
        kind: str,
        levels: Optional[Sequence[float]] = None,
        seeds: Sequence[int] = (0, 1, 2, 3, 4),
        out_dir: Optional[str] = None,
    ) -> Dict[str, Any]:
        """Relative AUROC/AUPRC change under test-time noise."""
        model = self._ensure_model_loaded()
        dataset = self._ensure_dataset_loaded()
        noise = NoiseKind(kind)
        rows = noise_robustness(
            model,
            dataset,
            noise,
            levels if levels else DEFAULT_LEVELS[noise],
            seeds,
            prepare=lambda samples: prepare_for_model(model, samples),
        )
        files: List[str] = []
        if out_dir is not None:
            files.append(write_robustness_csv(rows, os.path.join(out_dir, f"robustness_{noise.value}.csv")))
        return {"kind": noise.value, "rows": [asdict(r) for r in rows], "files": files}
