"""Validated configuration records for data, model, training and experiments."""

import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple

import jsonschema
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .errors import ConfigurationError

DESCRIPTOR_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "required": ["name", "values_path", "coords_path"],
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "values_path": {"type": "string", "minLength": 1},
        "coords_path": {"type": "string", "minLength": 1},
        "expected_T": {"type": ["integer", "null"], "minimum": 1},
        "expected_N": {"type": ["integer", "null"], "minimum": 1},
    },
    "additionalProperties": False,
}


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SplitSpec(_Strict):
    """Chronological train/val/test fractions."""

    train_frac: float = Field(0.70, gt=0, lt=1)
    val_frac: float = Field(0.10, gt=0, lt=1)
    test_frac: float = Field(0.20, gt=0, lt=1)
    ordering: Literal["chronological"] = "chronological"

    @model_validator(mode="after")
    def _fractions_sum_to_one(self) -> "SplitSpec":
        total = self.train_frac + self.val_frac + self.test_frac
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"split fractions must sum to 1, got {total}")
        return self


class DatasetDescriptor(_Strict):
    """Where a geo-coded series lives on disk and what it should contain."""

    name: str
    values_path: Path
    coords_path: Path
    expected_T: Optional[int] = None
    expected_N: Optional[int] = None

    @classmethod
    def from_file(cls, path: Path) -> "DatasetDescriptor":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Dataset descriptor not found: {path}")
        with open(path, "r") as f:
            raw = json.load(f)
        jsonschema.validate(raw, DESCRIPTOR_SCHEMA)
        descriptor = cls(**raw)
        base = path.parent
        return descriptor.model_copy(update={
            "values_path": _resolve(base, descriptor.values_path),
            "coords_path": _resolve(base, descriptor.coords_path),
        })


class ModelConfig(_Strict):
    """Every architectural hyperparameter of the forecaster."""

    num_nodes: Optional[int] = Field(None, ge=1)
    in_dim: int = Field(1, ge=1)
    input_length: int = Field(12, ge=1)
    horizon: int = Field(12, ge=1)
    embedding_dim: int = Field(40, ge=1)
    num_heads: int = Field(4, ge=1)
    head_dim: int = Field(10, ge=1)
    skip_dim: int = Field(10, ge=1)
    num_blocks: int = Field(2, ge=1)
    propagation_depth: int = Field(3, ge=1)
    residual_channels: int = Field(32, ge=1)
    lpgc_channels: int = Field(32, ge=1)
    skip_channels: int = Field(64, ge=1)
    end_channels: int = Field(128, ge=1)
    dilation_base: int = Field(1, ge=1)
    kernel_set: Tuple[int, ...] = (2, 3, 6, 7)
    dropout: float = Field(0.2, ge=0, lt=1)
    padding: Literal["auto", "none"] = "auto"
    seed: int = 0

    @field_validator("kernel_set")
    @classmethod
    def _kernels_positive(cls, value: Tuple[int, ...]) -> Tuple[int, ...]:
        if not value or any(k < 1 for k in value):
            raise ValueError("kernel_set must be a non-empty set of positive sizes")
        return tuple(sorted(set(value)))

    @model_validator(mode="after")
    def _channels_split_evenly(self) -> "ModelConfig":
        if self.residual_channels % len(self.kernel_set) != 0:
            raise ValueError(
                f"residual_channels={self.residual_channels} must be divisible by "
                f"the number of kernel sizes ({len(self.kernel_set)})"
            )
        return self

    def with_nodes(self, num_nodes: int) -> "ModelConfig":
        if self.num_nodes is not None and self.num_nodes != num_nodes:
            raise ConfigurationError(
                f"model.num_nodes={self.num_nodes} conflicts with dataset node count {num_nodes}"
            )
        return self.model_copy(update={"num_nodes": num_nodes})


class TrainConfig(_Strict):
    """Optimizer and schedule settings."""

    epochs: int = Field(100, ge=1)
    batch_size: int = Field(32, ge=1)
    learning_rate: float = Field(1e-3, ge=0)
    weight_decay: float = Field(1e-4, ge=0)
    clip_norm: float = Field(5.0, gt=0)
    patience: int = Field(15, ge=1)
    max_steps: Optional[int] = Field(None, ge=1)
    seed: int = 0
    device: str = "cpu"
    deterministic: bool = True


class ExperimentConfig(_Strict):
    """One archivable experiment: data, model, training and outputs."""

    dataset: Path
    model: ModelConfig = ModelConfig()
    train: TrainConfig = TrainConfig()
    split: SplitSpec = SplitSpec()
    output_dir: Path = Path("runs")
    variant: str = "full"
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2], min_length=1)
    horizons: List[int] = Field(default_factory=lambda: [3, 6, 9, 12], min_length=1)
    interpolate_gaps: bool = False

    @model_validator(mode="after")
    def _horizons_within_output(self) -> "ExperimentConfig":
        bad = [h for h in self.horizons if not 1 <= h <= self.model.horizon]
        if bad:
            raise ValueError(f"horizons {bad} outside 1..{self.model.horizon}")
        return self


def _resolve(base: Path, path: Path) -> Path:
    path = Path(path)
    return path if path.is_absolute() else (base / path)


def apply_overrides(raw: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """Apply ``key.path=value`` overrides; values are parsed as JSON when possible."""
    for item in overrides:
        if "=" not in item:
            raise ConfigurationError(f"Override '{item}' is not of the form key=value")
        key, text = item.split("=", 1)
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        node = raw
        parts = key.strip().split(".")
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigurationError(f"Override '{key}' descends into a non-object value")
            node = child
        node[parts[-1]] = value
    return raw


def load_experiment_config(path: Path, overrides: Sequence[str] = ()) -> ExperimentConfig:
    """Read a JSON experiment config, apply overrides and validate it."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Configuration file not found: {path}")
    with open(path, "r") as f:
        raw = json.load(f)
    raw = apply_overrides(raw, overrides)
    config = ExperimentConfig(**raw)
    return config.model_copy(update={"dataset": _resolve(path.parent, config.dataset)})
