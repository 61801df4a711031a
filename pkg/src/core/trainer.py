"""Optimization loop, evaluation protocol and the persistence baseline."""

import copy
import json
import logging
import random
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
import torch
from pydantic import BaseModel, Field, model_validator

from ..tools import metrics
from .config import TrainConfig
from .data_pipeline import NormStats, PreparedSplits, make_windows, window_count
from .errors import DataValidationError, TrainingDivergedError

logger = logging.getLogger(__name__)

DEFAULT_HORIZONS = (3, 6, 9, 12)


class HorizonMetrics(BaseModel):
    mae: float = Field(ge=0)
    rmse: float = Field(ge=0)
    mape: float = Field(ge=0)

    @model_validator(mode="after")
    def _rmse_dominates_mae(self) -> "HorizonMetrics":
        if self.rmse < self.mae - 1e-9:
            raise ValueError(f"RMSE {self.rmse} below MAE {self.mae}")
        return self


class MetricsReport(BaseModel):
    """Per-horizon and averaged errors on the de-normalized (°C) scale."""

    dataset: str = ""
    variant: str = ""
    seed: int = 0
    split: str = "test"
    horizons: Dict[int, HorizonMetrics]
    average: HorizonMetrics
    restart_means: Optional[Dict[str, Any]] = None

    def to_frame(self) -> pd.DataFrame:
        rows = {str(h): m.model_dump() for h, m in sorted(self.horizons.items())}
        rows["avg"] = self.average.model_dump()
        frame = pd.DataFrame.from_dict(rows, orient="index")
        frame.index.name = "horizon"
        return frame


def seed_everything(seed: int, deterministic: bool = False) -> None:
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)
    if deterministic:
        torch.set_num_threads(1)
        torch.use_deterministic_algorithms(True, warn_only=True)


def mae_loss(forecast: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean absolute error on the normalized scale."""
    return (forecast - target).abs().mean()


def report_from_arrays(
    prediction: np.ndarray,
    truth: np.ndarray,
    horizons: Sequence[int] = DEFAULT_HORIZONS,
    **info: Any,
) -> MetricsReport:
    """Metrics from aligned [S, v, N] arrays; horizon h reads step h − 1."""
    if prediction.shape != truth.shape:
        raise ValueError(f"prediction {prediction.shape} and truth {truth.shape} differ in shape")
    per_horizon = {}
    for h in horizons:
        if not 1 <= h <= truth.shape[1]:
            raise ValueError(f"horizon {h} outside 1..{truth.shape[1]}")
        y, yhat = truth[:, h - 1], prediction[:, h - 1]
        per_horizon[h] = HorizonMetrics(mae=metrics.mae(y, yhat), rmse=metrics.rmse(y, yhat), mape=metrics.mape(y, yhat))
    average = HorizonMetrics(
        mae=metrics.mae(truth, prediction), rmse=metrics.rmse(truth, prediction), mape=metrics.mape(truth, prediction)
    )
    return MetricsReport(horizons=per_horizon, average=average, **info)


@torch.no_grad()
def predict(model: torch.nn.Module, data: np.ndarray, batch_size: int = 64, device: str = "cpu"):
    """Normalized forecasts and targets for every window of a partition, [S, v, N] each."""
    config = model.config
    dtype = next(model.parameters()).dtype
    model.eval()
    forecasts, targets = [], []
    for batch in make_windows(data, config.input_length, config.horizon, batch_size=batch_size, dtype=dtype):
        batch = batch.to(device)
        forecasts.append(model(batch.inputs).cpu())
        targets.append(batch.target_steps().cpu())
    return torch.cat(forecasts).numpy(), torch.cat(targets).numpy()


def evaluate(
    model: torch.nn.Module,
    data: np.ndarray,
    norm_stats: NormStats,
    horizons: Sequence[int] = DEFAULT_HORIZONS,
    batch_size: int = 64,
    device: str = "cpu",
    **info: Any,
) -> MetricsReport:
    """Evaluate a model on a normalized partition, scoring de-normalized values."""
    config = model.config
    try:
        window_count(len(data), config.input_length, config.horizon)
    except DataValidationError as e:
        raise DataValidationError(f"empty split: {e}")
    forecast, target = predict(model, data, batch_size, device)
    report = report_from_arrays(
        norm_stats.inverse_transform(forecast.astype(np.float64)),
        norm_stats.inverse_transform(target.astype(np.float64)),
        horizons,
        **info,
    )
    if model.wiring.propagation != "identity":
        sample = torch.as_tensor(data[: config.input_length].T[None, None], dtype=next(model.parameters()).dtype)
        report.restart_means = model.diagnose(sample.to(device))
    return report


def persistence_baseline(
    values: np.ndarray,
    input_length: int,
    horizon: int,
    horizons: Sequence[int] = DEFAULT_HORIZONS,
    **info: Any,
) -> MetricsReport:
    """Repeat the last observed value of each window for every forecast step."""
    values = np.asarray(values, dtype=np.float64)
    count = window_count(len(values), input_length, horizon)
    starts = np.arange(count)
    last = values[starts + input_length - 1]
    steps = np.arange(horizon)
    truth = values[starts[:, None] + input_length + steps[None, :]]
    prediction = np.repeat(last[:, None, :], horizon, axis=1)
    info.setdefault("variant", "persistence")
    return report_from_arrays(prediction, truth, horizons, **info)


class TrainingRecord(BaseModel):
    epoch: int
    train_loss: float
    val_mae: float
    val_rmse: float
    val_mape: float
    lr: float
    wall_time: float


@dataclass
class TrainingResult:
    best_state: Dict[str, torch.Tensor]
    best_epoch: int
    best_val_mae: float
    history: List[TrainingRecord] = field(default_factory=list)
    step_losses: List[float] = field(default_factory=list)
    optimizer_state: Optional[Dict[str, Any]] = None
    stopped_early: bool = False


class Trainer:
    """Owns a model and its optimizer for one training run."""

    def __init__(
        self,
        model: torch.nn.Module,
        config: TrainConfig,
        norm_stats: NormStats,
        horizons: Sequence[int] = DEFAULT_HORIZONS,
        log_path: Optional[Path] = None,
    ):
        self.model = model.to(config.device)
        self.config = config
        self.norm_stats = norm_stats
        self.horizons = tuple(horizons)
        self.log_path = Path(log_path) if log_path else None
        self.optimizer = torch.optim.Adam(
            self.model.parameters(), lr=config.learning_rate, weight_decay=config.weight_decay
        )
        self.step = 0
        self.last_grad_norm = 0.0

    def validate(self, val_data: np.ndarray) -> MetricsReport:
        return evaluate(
            self.model, val_data, self.norm_stats, self.horizons, self.config.batch_size, self.config.device, split="val"
        )

    def _budget_spent(self) -> bool:
        return self.config.max_steps is not None and self.step >= self.config.max_steps

    def train_epoch(self, loader, epoch: int, step_losses: List[float]) -> float:
        self.model.train()
        losses = []
        for batch in loader:
            batch = batch.to(self.config.device)
            self.optimizer.zero_grad()
            loss = mae_loss(self.model(batch.inputs), batch.target_steps())
            if not torch.isfinite(loss):
                raise TrainingDivergedError(epoch, self.optimizer.param_groups[0]["lr"], self.last_grad_norm)
            loss.backward()
            grad_norm = torch.nn.utils.clip_grad_norm_(self.model.parameters(), self.config.clip_norm)
            self.last_grad_norm = float(grad_norm)
            self.optimizer.step()
            self.step += 1
            losses.append(loss.item())
            step_losses.append(loss.item())
            if self._budget_spent():
                break
        return float(np.mean(losses))

    def _log(self, record: TrainingRecord) -> None:
        logger.info(
            f"Epoch {record.epoch}: train_loss={record.train_loss:.4f} val_mae={record.val_mae:.4f} "
            f"val_rmse={record.val_rmse:.4f} val_mape={record.val_mape:.2f}%"
        )
        if self.log_path:
            with open(self.log_path, "a") as f:
                f.write(json.dumps(record.model_dump()) + "\n")

    def train(self, train_data: np.ndarray, val_data: np.ndarray) -> TrainingResult:
        config = self.model.config
        dtype = next(self.model.parameters()).dtype
        loader = make_windows(
            train_data,
            config.input_length,
            config.horizon,
            batch_size=self.config.batch_size,
            shuffle=True,
            seed=self.config.seed,
            dtype=dtype,
        )
        if self.log_path:
            self.log_path.parent.mkdir(parents=True, exist_ok=True)
            self.log_path.write_text("")

        start = time.perf_counter()
        best_mae, best_epoch, best_state, best_optimizer = float("inf"), 0, None, None
        history: List[TrainingRecord] = []
        step_losses: List[float] = []
        waited, stopped_early = 0, False
        for epoch in range(1, self.config.epochs + 1):
            train_loss = self.train_epoch(loader, epoch, step_losses)
            report = self.validate(val_data)
            record = TrainingRecord(
                epoch=epoch,
                train_loss=train_loss,
                val_mae=report.average.mae,
                val_rmse=report.average.rmse,
                val_mape=report.average.mape,
                lr=self.optimizer.param_groups[0]["lr"],
                wall_time=time.perf_counter() - start,
            )
            history.append(record)
            self._log(record)

            if report.average.mae < best_mae:
                best_mae, best_epoch, waited = report.average.mae, epoch, 0
                best_state = {k: v.detach().clone() for k, v in self.model.state_dict().items()}
                best_optimizer = copy.deepcopy(self.optimizer.state_dict())
            else:
                waited += 1
                if waited >= self.config.patience:
                    logger.info(f"Early stop after epoch {epoch}: no val MAE gain for {waited} epochs")
                    stopped_early = True
                    break
            if self._budget_spent():
                logger.info(f"Step budget of {self.config.max_steps} reached at epoch {epoch}")
                break

        if best_state is None:
            best_state = {k: v.detach().clone() for k, v in self.model.state_dict().items()}
            best_optimizer = copy.deepcopy(self.optimizer.state_dict())
        self.model.load_state_dict(best_state)
        return TrainingResult(
            best_state=best_state,
            best_epoch=best_epoch,
            best_val_mae=best_mae,
            history=history,
            step_losses=step_losses,
            optimizer_state=best_optimizer,
            stopped_early=stopped_early,
        )


def train(
    model: torch.nn.Module,
    splits: PreparedSplits,
    config: TrainConfig,
    horizons: Sequence[int] = DEFAULT_HORIZONS,
    log_path: Optional[Path] = None,
) -> TrainingResult:
    """Train on the train split, early-stopping on the val split."""
    trainer = Trainer(model, config, splits.norm_stats, horizons, log_path)
    return trainer.train(splits.normalized("train"), splits.normalized("val"))
