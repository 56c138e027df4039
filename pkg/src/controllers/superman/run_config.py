"""
Run configuration shared by the command line and the MCP tools.
"""

import logging
import os
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional, Tuple

from ...core.diffcore import Activation
from ...core.extgnan import DeltaMode
from ...core.signal_graphs import DeltaPolicy
from ...core.superman import Link, ModelAblation, ModelConfig
from ...core.training import TrainConfig
from ...errors import ConfigError
from ...utils.json_export import fingerprint, read_json

logger = logging.getLogger(__name__)

OUTPUT_ROOT_ENV = "SUPERMAN_OUTPUT_ROOT"


def default_output_root() -> str:
    return os.environ.get(OUTPUT_ROOT_ENV, "runs")


@dataclass
class RunConfig:
    """Everything a command needs to reproduce its results.

    ``delta_policy`` and ``window`` override the partition config when set.
    ``time_scale`` defaults to the dataset's own ``time_scale`` metadata, or 1.
    """

    dataset: Optional[str] = None
    partition: Optional[str] = None
    out_dir: str = field(default_factory=default_output_root)
    seeds: List[int] = field(default_factory=lambda: [0, 1, 2])
    train: TrainConfig = field(default_factory=TrainConfig)
    ablation: ModelAblation = ModelAblation.NONE
    delta_mode: DeltaMode = DeltaMode.MASKED
    delta_policy: Optional[DeltaPolicy] = None
    window: Optional[int] = None
    time_scale: Optional[float] = None
    activation: Activation = Activation.RELU
    link: Link = Link.SIGMOID
    output_bias: bool = True
    normalize: bool = True
    normalize_timestamps: bool = False
    split: Tuple[float, float, float] = (0.8, 0.1, 0.1)
    split_seed: int = 0
    deterministic: bool = False
    workers: int = 1

    def __post_init__(self) -> None:
        if isinstance(self.train, dict):
            self.train = TrainConfig(**self.train)
        self.ablation = ModelAblation(self.ablation)
        self.delta_mode = DeltaMode(self.delta_mode)
        self.activation = Activation(self.activation)
        self.link = Link(self.link)
        if self.delta_policy is not None:
            self.delta_policy = DeltaPolicy(self.delta_policy)
        self.seeds = [int(s) for s in self.seeds]
        self.split = tuple(float(f) for f in self.split)  # type: ignore[assignment]
        if not self.seeds:
            raise ConfigError("At least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError(f"Duplicate seeds {self.seeds}")
        if self.workers < 1:
            raise ConfigError(f"workers must be positive, got {self.workers}")
        if self.time_scale is not None and self.time_scale <= 0:
            raise ConfigError(f"time_scale must be positive, got {self.time_scale}")
        if self.deterministic and self.workers > 1:
            logger.info("Deterministic mode: running seeds sequentially")
            self.workers = 1

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown run config keys {unknown}")
        return cls(**data)

    @classmethod
    def load(cls, file_path: Optional[str], overrides: Optional[Dict[str, Any]] = None) -> "RunConfig":
        """Read a JSON run config (if given) and apply non-None overrides on top."""
        data: Dict[str, Any] = read_json(file_path) if file_path else {}
        train = dict(data.pop("train", {}))
        for key, value in (overrides or {}).items():
            if value is None:
                continue
            if key.startswith("train."):
                train[key[len("train."):]] = value
            else:
                data[key] = value
        data["train"] = train
        return cls.from_dict(data)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        for key in ("ablation", "delta_mode", "activation", "link"):
            data[key] = getattr(self, key).value
        data["delta_policy"] = self.delta_policy.value if self.delta_policy is not None else None
        data["split"] = list(self.split)
        return data

    def config_hash(self) -> str:
        """Hash of the settings that affect results (paths and parallelism excluded)."""
        data = self.to_dict()
        for key in ("out_dir", "workers", "deterministic"):
            data.pop(key)
        return fingerprint(data)

    def model_config(self, metadata: Optional[Dict[str, Any]] = None) -> ModelConfig:
        time_scale = self.time_scale or float((metadata or {}).get("time_scale", 1.0))
        return ModelConfig(
            hidden=self.train.hidden,
            layers=self.train.layers,
            dropout=self.train.dropout,
            activation=self.activation,
            delta_mode=self.delta_mode,
            time_scale=time_scale,
            link=self.link,
            output_bias=self.output_bias,
            ablation=self.ablation,
        )
