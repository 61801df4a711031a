"""Train every architecture variant over several seeds and tabulate the medians."""

import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import pandas as pd
from rich.console import Console
from rich.table import Table

from ..plugins.variant_manager import default_manager
from .config import ModelConfig, TrainConfig
from .data_pipeline import PreparedSplits
from .model import build_variant
from .trainer import DEFAULT_HORIZONS, MetricsReport, evaluate, seed_everything, train

logger = logging.getLogger(__name__)

ABLATION_VARIANTS = ("full", "no_SL", "no_DL", "no_LPGC", "SD_GCN")
TABLE_COLUMNS = ("Avg-MAE", "Avg-RMSE", "Avg-MAPE(%)")


@dataclass
class AblationTable:
    dataset: str
    seeds: List[int]
    reports: Dict[str, List[MetricsReport]] = field(default_factory=dict)

    def frame(self) -> pd.DataFrame:
        """One row per variant, median over seeds of the averaged test metrics."""
        manager = default_manager()
        rows = {}
        for variant, reports in self.reports.items():
            averages = pd.DataFrame([r.average.model_dump() for r in reports])
            medians = averages.median()
            rows[manager.get(variant).label] = [medians["mae"], medians["rmse"], medians["mape"]]
        frame = pd.DataFrame.from_dict(rows, orient="index", columns=list(TABLE_COLUMNS))
        frame.index.name = "Variants"
        return frame

    def to_csv(self, path: Path) -> None:
        self.frame().to_csv(path, float_format="%.4f")

    def render(self) -> str:
        table = Table(title=f"Ablation on {self.dataset} (median over seeds {self.seeds})")
        table.add_column("Variants")
        for column in TABLE_COLUMNS:
            table.add_column(column, justify="right")
        for label, row in self.frame().iterrows():
            table.add_row(str(label), f"{row.iloc[0]:.2f}", f"{row.iloc[1]:.2f}", f"{row.iloc[2]:.2f}")
        console = Console(record=True, width=100, file=io.StringIO())
        console.print(table)
        return console.export_text()


def run_ablation_suite(
    splits: PreparedSplits,
    model_config: ModelConfig,
    train_config: TrainConfig,
    seeds: Sequence[int],
    variants: Sequence[str] = ABLATION_VARIANTS,
    horizons: Sequence[int] = DEFAULT_HORIZONS,
    log_dir: Optional[Path] = None,
) -> AblationTable:
    if not seeds:
        raise ValueError("ablation suite needs at least one seed")
    table = AblationTable(dataset=splits.name, seeds=list(seeds))
    for seed in seeds:
        for variant in variants:
            logger.info(f"Ablation: training {variant} with seed {seed}")
            seed_everything(seed, train_config.deterministic)
            model = build_variant(model_config.model_copy(update={"seed": seed}), variant)
            log_path = log_dir / f"{variant}_seed{seed}.jsonl" if log_dir else None
            train(model, splits, train_config.model_copy(update={"seed": seed}), horizons, log_path)
            report = evaluate(
                model,
                splits.normalized("test"),
                splits.norm_stats,
                horizons,
                train_config.batch_size,
                train_config.device,
                dataset=splits.name,
                variant=variant,
                seed=seed,
            )
            table.reports.setdefault(variant, []).append(report)
    return table
