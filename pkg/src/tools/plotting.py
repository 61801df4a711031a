#!/usr/bin/env python3

import json
from pathlib import Path
from typing import List

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd


def plot_loss_curve(log_path: str, output_path: str) -> str:
    """
    Plot train loss and validation MAE per epoch from an NDJSON training log.

    Args:
        log_path (str): Path to a train_log.jsonl file
        output_path (str): Path of the PNG to write

    Returns:
        str: Path to the saved image
    """
    records = pd.read_json(log_path, lines=True)
    if records.empty:
        raise ValueError(f"Training log has no records: {log_path}")

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(records["epoch"], records["train_loss"], marker="o", label="train loss (normalized MAE)")
    ax.plot(records["epoch"], records["val_mae"], marker="s", label="val MAE (°C)")
    ax.set_xlabel("epoch")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(output_path, dpi=120)
    plt.close(fig)
    return output_path


def plot_horizon_metrics(metrics_path: str, output_path: str) -> str:
    """
    Bar chart of MAE/RMSE/MAPE per horizon from a metrics JSON report.

    Args:
        metrics_path (str): Path to a metrics.json file
        output_path (str): Path of the PNG to write

    Returns:
        str: Path to the saved image
    """
    with open(metrics_path, "r") as f:
        report = json.load(f)
    horizons = sorted(report["horizons"], key=int)
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.5))
    for ax, metric in zip(axes, ("mae", "rmse", "mape")):
        values = [report["horizons"][h][metric] for h in horizons]
        ax.bar([str(h) for h in horizons], values, color="tab:blue")
        ax.axhline(report["average"][metric], color="tab:red", linestyle="--", label="avg")
        ax.set_title(metric.upper() + (" (%)" if metric == "mape" else " (°C)"))
        ax.set_xlabel("horizon (days)")
        ax.legend()
    fig.tight_layout()
    fig.savefig(output_path, dpi=120)
    plt.close(fig)
    return output_path


def plot_adjacency(matrix_path: str, output_path: str) -> str:
    """
    Heatmap of an exported adjacency matrix CSV.

    Args:
        matrix_path (str): Path to an adjacency CSV (header row + index column)
        output_path (str): Path of the PNG to write

    Returns:
        str: Path to the saved image
    """
    matrix = pd.read_csv(matrix_path, index_col=0).to_numpy(dtype=np.float64)
    fig, ax = plt.subplots(figsize=(5, 4.5))
    image = ax.imshow(matrix, cmap="viridis", aspect="auto")
    ax.set_xlabel("source node")
    ax.set_ylabel("destination node")
    ax.set_title(Path(matrix_path).stem)
    fig.colorbar(image, ax=ax)
    fig.tight_layout()
    fig.savefig(output_path, dpi=120)
    plt.close(fig)
    return output_path


def plot_artifacts(paths: List[str], output_dir: str) -> List[str]:
    """
    Dispatch each input file to the matching plot by its name.

    Returns:
        List[str]: Paths of the images written
    """
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for path in map(Path, paths):
        if not path.exists():
            raise FileNotFoundError(f"Plot input not found: {path}")
        target = str(out / f"{path.stem}.png")
        if path.suffix == ".jsonl":
            written.append(plot_loss_curve(str(path), target))
        elif path.suffix == ".json":
            written.append(plot_horizon_metrics(str(path), target))
        elif path.suffix == ".csv":
            written.append(plot_adjacency(str(path), target))
        else:
            raise ValueError(f"Don't know how to plot {path}")
    return written


if __name__ == "__main__":
    import argparse
    parser = argparse.ArgumentParser(description='Render training logs, metrics and graphs to PNG files')
    parser.add_argument('inputs', nargs='+', help='train_log.jsonl, metrics.json or adjacency CSV files')
    parser.add_argument('--output-dir', '-o', default='plots', help='Directory for the images')

    args = parser.parse_args()
    for image in plot_artifacts(args.inputs, args.output_dir):
        print(f"Plot saved to: {image}")
