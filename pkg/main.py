import json
import logging
import os
from pathlib import Path
from typing import Callable, List, TypeVar

import jsonschema
import typer
from dotenv import load_dotenv
from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape
from rich.table import Table

from src.core.config import load_experiment_config
from src.core.errors import CheckpointError, ConfigurationError, DataValidationError
from src.core.experiment_manager import ExperimentManager, plot as plot_files

load_dotenv()

# Configure logging
logging.basicConfig(
    level=os.getenv("LOG_LEVEL", "INFO"),
    format="%(message)s",
    datefmt="[%X]",
    handlers=[RichHandler(rich_tracebacks=True)]
)

console = Console()
app = typer.Typer(add_completion=False, help="Static/dynamic graph SST forecaster: prepare, train, evaluate, ablate.")

DEFAULT_CACHE_DIR = ".cache/sdlpgc"
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

VALIDATION_ERRORS = (
    DataValidationError,
    ConfigurationError,
    CheckpointError,
    FileNotFoundError,
    jsonschema.ValidationError,
    json.JSONDecodeError,
    ValueError,
)

T = TypeVar("T")

ConfigOption = typer.Option(..., "--config", "-c", help="Experiment config JSON file")
SetOption = typer.Option([], "--set", help="Override a config value, e.g. --set train.epochs=20")
CheckpointOption = typer.Option(..., "--checkpoint", help="Checkpoint directory written by 'train'")
SplitOption = typer.Option("test", "--split", help="train, val or test")


def _guarded(action: Callable[[], T]) -> T:
    """Run a command body and translate failures into exit codes."""
    try:
        return action()
    except VALIDATION_ERRORS as e:
        console.print(f"[red]Error: {escape(str(e))}[/red]")
        raise typer.Exit(code=EXIT_VALIDATION)
    except Exception as e:
        logging.exception("Command failed")
        console.print(f"[red]Fatal error: {escape(str(e))}[/red]")
        raise typer.Exit(code=EXIT_RUNTIME)


def _manager(config_path: Path, overrides: List[str]) -> ExperimentManager:
    config = load_experiment_config(config_path, overrides)
    cache_root = Path(os.getenv("SDLPGC_CACHE_DIR", DEFAULT_CACHE_DIR))
    return ExperimentManager(config, cache_root)


@app.command()
def prepare(config: Path = ConfigOption, overrides: List[str] = SetOption):
    """Validate the raw CSVs and cache normalized splits."""
    def body():
        _, summary = _manager(config, overrides).prepare()
        console.print(f"[green]Prepared {summary['name']}:[/green] T={summary['T']}, N={summary['N']}, "
                      f"{summary['date_range'][0]} .. {summary['date_range'][1]}, splits {summary['split_lengths']}")
        console.print(f"Cache: {summary['cache_dir']}")
    _guarded(body)


@app.command()
def train(config: Path = ConfigOption, overrides: List[str] = SetOption):
    """Train the configured variant and save the best checkpoint."""
    def body():
        run_dir = _manager(config, overrides).train()
        console.print(f"[green]Training finished:[/green] {run_dir}")
    _guarded(body)


@app.command()
def evaluate(
    config: Path = ConfigOption,
    checkpoint: Path = CheckpointOption,
    split: str = SplitOption,
    overrides: List[str] = SetOption,
):
    """Score a checkpoint at every horizon next to the persistence baseline."""
    def body():
        run_dir, report, baseline = _manager(config, overrides).evaluate(checkpoint, split)
        table = Table(title=f"{report.dataset} / {split}")
        table.add_column("horizon")
        for column in ("MAE", "RMSE", "MAPE(%)", "persistence MAE"):
            table.add_column(column, justify="right")
        for h, m in sorted(report.horizons.items()):
            table.add_row(str(h), f"{m.mae:.3f}", f"{m.rmse:.3f}", f"{m.mape:.2f}", f"{baseline.horizons[h].mae:.3f}")
        a = report.average
        table.add_row("avg", f"{a.mae:.3f}", f"{a.rmse:.3f}", f"{a.mape:.2f}", f"{baseline.average.mae:.3f}")
        console.print(table)
        console.print(f"Reports written to {run_dir}")
    _guarded(body)


@app.command()
def forecast(
    config: Path = ConfigOption,
    checkpoint: Path = CheckpointOption,
    split: str = SplitOption,
    index: int = typer.Option(-1, "--index", help="Window index in the split; negative counts from the end"),
    overrides: List[str] = SetOption,
):
    """Write the de-normalized forecast for one window."""
    def body():
        run_dir = _manager(config, overrides).forecast(checkpoint, split, index)
        console.print(f"[green]Forecast written:[/green] {run_dir / 'forecast.csv'}")
    _guarded(body)


@app.command()
def ablation(config: Path = ConfigOption, overrides: List[str] = SetOption):
    """Train all five variants per seed and report median test metrics."""
    def body():
        run_dir, table = _manager(config, overrides).ablation()
        console.print(table.render())
        console.print(f"Ablation report written to {run_dir}")
    _guarded(body)


@app.command("export-graphs")
def export_graphs(
    config: Path = ConfigOption,
    checkpoint: Path = CheckpointOption,
    split: str = SplitOption,
    index: int = typer.Option(0, "--index", help="Window used for the dynamic graph"),
    overrides: List[str] = SetOption,
):
    """Export the learned static graph and one window's dynamic graph as CSV."""
    def body():
        run_dir = _manager(config, overrides).export_graphs(checkpoint, split, index)
        console.print(f"[green]Graphs exported:[/green] {run_dir}")
    _guarded(body)


@app.command()
def plot(
    inputs: List[Path] = typer.Argument(..., help="train_log.jsonl, metrics.json or adjacency CSV files"),
    output_dir: Path = typer.Option(Path("runs"), "--output-dir", "-o", help="Parent of the run directory"),
):
    """Render logs, metrics and adjacency matrices to image files."""
    def body():
        run_dir, images = plot_files(inputs, output_dir)
        for image in images:
            console.print(f"Plot saved to: {image}")
    _guarded(body)


def main():
    """Main entry point for the application."""
    app()


if __name__ == "__main__":
    main()
