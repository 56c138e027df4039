import logging
from typing import Any, Dict, List, Optional

from ...core.signal_graphs import GraphSet, PartitionConfig
from ...core.superman import SupermanModel
from ...errors import ConfigError, SchemaError

logger = logging.getLogger(__name__)


class SupermanMixin:
    """Mixin class providing the session state every operation controller shares."""

    SESSION_FIELDS = ("dataset", "dataset_metadata", "model", "partition_config")

    def __init__(self) -> None:
        """Initialize an empty session."""
        self.dataset: Optional[List[GraphSet]] = None
        self.dataset_metadata: Dict[str, Any] = {}
        self.model: Optional[SupermanModel] = None
        self.partition_config: Optional[PartitionConfig] = None

    def _ensure_dataset_loaded(self) -> List[GraphSet]:
        """Ensure a dataset is loaded before performing operations."""
        if not self.dataset:
            raise ConfigError("No dataset is currently loaded")
        return self.dataset

    def _ensure_model_loaded(self) -> SupermanModel:
        """Ensure a model is trained or loaded before performing operations."""
        if self.model is None:
            raise ConfigError("No model is currently loaded")
        return self.model

    def _find_sample(self, entity_id: str) -> GraphSet:
        for sample in self._ensure_dataset_loaded():
            if sample.entity_id == entity_id:
                return sample
        raise SchemaError(f"No entity '{entity_id}' in the current dataset")
