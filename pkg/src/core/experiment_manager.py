import hashlib
import json
import logging
import os
from contextlib import contextmanager
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Iterator, List, Tuple

import numpy as np
import pandas as pd
import torch

from ..tools.plotting import plot_artifacts
from .ablation import AblationTable, run_ablation_suite
from .config import DatasetDescriptor, ExperimentConfig
from .data_pipeline import PreparedSplits, load_dataset, prepare_splits, window_count
from .errors import ConfigurationError, DataValidationError
from .model import Checkpoint, build_variant, load_checkpoint, save_checkpoint
from .trainer import MetricsReport, evaluate, persistence_baseline, seed_everything, train

logger = logging.getLogger(__name__)

LOCK_FILE = ".lock"


@contextmanager
def open_run_dir(base: Path, command: str) -> Iterator[Path]:
    """Create a timestamped run directory and hold its lock file while in use."""
    stamp = datetime.now().strftime("%Y%m%d-%H%M%S-%f")
    run_dir = Path(base) / f"{stamp}-{command}"
    run_dir.mkdir(parents=True, exist_ok=True)
    lock = run_dir / LOCK_FILE
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ConfigurationError(f"Run directory {run_dir} is locked by another process")
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        logger.info(f"Run directory: {run_dir}")
        yield run_dir
    finally:
        lock.unlink(missing_ok=True)


def _file_digest(*paths: Path):
    digest = hashlib.sha256()
    for path in paths:
        digest.update(Path(path).read_bytes())
    return digest


def write_report(report: MetricsReport, directory: Path, stem: str) -> None:
    with open(directory / f"{stem}.json", "w") as f:
        f.write(report.model_dump_json(indent=2))
    report.to_frame().to_csv(directory / f"{stem}.csv", float_format="%.6f")


class ExperimentManager:
    """Manages and coordinates data preparation, training and reporting for one experiment."""

    def __init__(self, config: ExperimentConfig, cache_root: Path):
        self.config = config
        self.cache_root = Path(cache_root)

    def _cache_key(self, descriptor: DatasetDescriptor) -> str:
        for path in (descriptor.values_path, descriptor.coords_path):
            if not Path(path).exists():
                raise FileNotFoundError(f"Data file not found: {path}")
        digest = _file_digest(descriptor.values_path, descriptor.coords_path)
        digest.update(descriptor.model_dump_json().encode())
        digest.update(self.config.split.model_dump_json().encode())
        digest.update(str(self.config.interpolate_gaps).encode())
        return digest.hexdigest()

    def prepare(self) -> Tuple[PreparedSplits, Dict[str, Any]]:
        """Validate the raw CSVs and cache normalized splits; reuse an unchanged cache."""
        descriptor = DatasetDescriptor.from_file(self.config.dataset)
        key = self._cache_key(descriptor)
        cache_dir = self.cache_root / f"{descriptor.name}-{key[:12]}"
        summary_path = cache_dir / "summary.json"

        if summary_path.exists():
            with open(summary_path, "r") as f:
                summary = json.load(f)
            if summary.get("cache_hash") == key:
                logger.info(f"Using prepared data from {cache_dir}")
                return PreparedSplits.load(cache_dir, descriptor.name), summary

        dataset = load_dataset(descriptor, interpolate_gaps=self.config.interpolate_gaps)
        splits = prepare_splits(dataset, self.config.split)
        splits.save(cache_dir)
        summary = {**splits.summary(), "cache_hash": key, "cache_dir": str(cache_dir)}
        with open(summary_path, "w") as f:
            json.dump(summary, f, indent=2)
        logger.info(f"Prepared {descriptor.name} into {cache_dir}")
        return splits, summary

    def _load_for_data(self, checkpoint_path: Path) -> Tuple[Checkpoint, PreparedSplits]:
        checkpoint = load_checkpoint(checkpoint_path)
        splits, _ = self.prepare()
        if checkpoint.model.config.num_nodes != splits.num_nodes:
            raise ConfigurationError(
                f"checkpoint expects {checkpoint.model.config.num_nodes} nodes, dataset has {splits.num_nodes}"
            )
        if checkpoint.manifest.norm_stats is not None:
            splits.norm_stats = checkpoint.manifest.norm_stats
        return checkpoint, splits

    def _window(self, splits: PreparedSplits, split: str, index: int, model) -> Tuple[torch.Tensor, int]:
        data = splits.normalized(split)
        u, v = model.config.input_length, model.config.horizon
        count = window_count(len(data), u, v)
        start = index if index >= 0 else count + index
        if not 0 <= start < count:
            raise DataValidationError(f"window index {index} outside the {count} windows of split '{split}'")
        dtype = next(model.parameters()).dtype
        window = torch.as_tensor(data[start:start + u].T[None, None], dtype=dtype)
        return window, start

    def train(self) -> Path:
        cfg = self.config
        with open_run_dir(cfg.output_dir, "train") as run_dir:
            splits, _ = self.prepare()
            model_config = cfg.model.with_nodes(splits.num_nodes)
            seed_everything(cfg.train.seed, cfg.train.deterministic)
            model = build_variant(model_config, cfg.variant)
            logger.info(f"Training {cfg.variant} ({model.num_parameters} parameters) on {splits.name}")
            (run_dir / "config.json").write_text(cfg.model_copy(update={"model": model_config}).model_dump_json(indent=2))

            result = train(model, splits, cfg.train, cfg.horizons, run_dir / "train_log.jsonl")
            save_checkpoint(
                model,
                run_dir / "checkpoint",
                norm_stats=splits.norm_stats,
                dataset=splits.name,
                epoch=result.best_epoch,
                best_val_mae=result.best_val_mae,
                optimizer_state=result.optimizer_state,
            )
            report = evaluate(
                model, splits.normalized("test"), splits.norm_stats, cfg.horizons, cfg.train.batch_size,
                cfg.train.device, dataset=splits.name, variant=cfg.variant, seed=cfg.train.seed,
            )
            write_report(report, run_dir, "metrics")
            return run_dir

    def evaluate(self, checkpoint_path: Path, split: str = "test") -> Tuple[Path, MetricsReport, MetricsReport]:
        cfg = self.config
        with open_run_dir(cfg.output_dir, "evaluate") as run_dir:
            checkpoint, splits = self._load_for_data(checkpoint_path)
            model = checkpoint.model
            report = evaluate(
                model, splits.normalized(split), splits.norm_stats, cfg.horizons, cfg.train.batch_size,
                cfg.train.device, dataset=splits.name, variant=checkpoint.manifest.variant,
                seed=checkpoint.manifest.seed, split=split,
            )
            baseline = persistence_baseline(
                splits.splits[split].values, model.config.input_length, model.config.horizon, cfg.horizons,
                dataset=splits.name, split=split,
            )
            write_report(report, run_dir, "metrics")
            write_report(baseline, run_dir, "persistence")
            return run_dir, report, baseline

    def forecast(self, checkpoint_path: Path, split: str = "test", index: int = -1) -> Path:
        with open_run_dir(self.config.output_dir, "forecast") as run_dir:
            checkpoint, splits = self._load_for_data(checkpoint_path)
            model = checkpoint.model
            window, start = self._window(splits, split, index, model)
            with torch.no_grad():
                forecast = model(window)[0].double().numpy()
            values = splits.norm_stats.inverse_transform(forecast)
            u, v = model.config.input_length, model.config.horizon
            dates = splits.splits[split].timestamps[start + u - 1] + pd.to_timedelta(np.arange(1, v + 1), unit="D")
            frame = pd.DataFrame(values, columns=list(splits.splits[split].node_names))
            frame.insert(0, "date", dates.strftime("%Y-%m-%d"))
            frame.to_csv(run_dir / "forecast.csv", index=False, float_format="%.4f")
            return run_dir

    def ablation(self) -> Tuple[Path, AblationTable]:
        cfg = self.config
        with open_run_dir(cfg.output_dir, "ablation") as run_dir:
            splits, _ = self.prepare()
            table = run_ablation_suite(
                splits, cfg.model.with_nodes(splits.num_nodes), cfg.train, cfg.seeds,
                horizons=cfg.horizons, log_dir=run_dir / "logs",
            )
            table.to_csv(run_dir / "ablation.csv")
            (run_dir / "ablation.txt").write_text(table.render())
            for variant, reports in table.reports.items():
                for report in reports:
                    write_report(report, run_dir / "logs", f"{variant}_seed{report.seed}_metrics")
            return run_dir, table

    def export_graphs(self, checkpoint_path: Path, split: str = "test", index: int = 0) -> Path:
        with open_run_dir(self.config.output_dir, "export-graphs") as run_dir:
            checkpoint, splits = self._load_for_data(checkpoint_path)
            model = checkpoint.model
            window, start = self._window(splits, split, index, model)
            with torch.no_grad():
                static_adj, dynamic_adj = model.infer_graphs(window)
            nodes = list(splits.splits[split].node_names)
            written: List[str] = []
            for name, adj in (("static_adjacency", static_adj), ("dynamic_adjacency", dynamic_adj)):
                if adj is None:
                    continue
                matrix = adj[0] if adj.dim() == 3 else adj
                pd.DataFrame(matrix.double().numpy(), index=nodes, columns=nodes).to_csv(
                    run_dir / f"{name}.csv", float_format="%.8f"
                )
                written.append(f"{name}.csv")
            manifest = {
                "dataset": splits.name,
                "variant": checkpoint.manifest.variant,
                "epoch": checkpoint.manifest.epoch,
                "seed": checkpoint.manifest.seed,
                "split": split,
                "window_start": start,
                "window_first_date": str(splits.splits[split].timestamps[start].date()),
                "files": written,
            }
            with open(run_dir / "manifest.json", "w") as f:
                json.dump(manifest, f, indent=2)
            return run_dir


def plot(inputs: List[Path], output_dir: Path) -> Tuple[Path, List[str]]:
    with open_run_dir(output_dir, "plot") as run_dir:
        return run_dir, plot_artifacts([str(p) for p in inputs], str(run_dir))
