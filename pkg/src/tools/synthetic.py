#!/usr/bin/env python3

import argparse
import json
from pathlib import Path

import numpy as np
import pandas as pd


def coupled_sinusoids(num_nodes=5, num_steps=400, period=30.0, coupling=0.5, noise=0.0, seed=0):
    """
    Daily temperature-like series where each node follows its own phase-shifted
    cycle plus the lagged cycle of its ring neighbour.

    Args:
        num_nodes (int): Number of stations
        num_steps (int): Number of days
        period (float): Cycle length in days
        coupling (float): Weight of the neighbour's lagged signal
        noise (float): Standard deviation of additive Gaussian noise (°C)
        seed (int): Seed for phases and noise

    Returns:
        np.ndarray: [num_steps, num_nodes] values in °C
    """
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0, 2 * np.pi, size=num_nodes)
    t = np.arange(num_steps + 1)[:, None]
    own = np.sin(2 * np.pi * t / period + phases[None, :])
    neighbour = np.roll(own, -1, axis=1)
    signal = own[1:] + coupling * neighbour[:-1]
    values = 15.0 + 8.0 * signal
    if noise > 0:
        values = values + rng.normal(0, noise, size=values.shape)
    return values


def write_dataset(directory, values, name="synthetic", start="2015-01-01", seed=0):
    """
    Write values.csv, coords.csv and descriptor.json for a [T, N] matrix.

    Returns:
        Path: Path of the descriptor
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    num_steps, num_nodes = values.shape
    dates = pd.date_range(start, periods=num_steps, freq="D")
    frame = pd.DataFrame(values, columns=[f"node_{i}" for i in range(num_nodes)])
    frame.insert(0, "date", dates.strftime("%Y-%m-%d"))
    frame.to_csv(directory / "values.csv", index=False, float_format="%.6f")

    rng = np.random.default_rng(seed + 1)
    coords = pd.DataFrame({
        "node": range(num_nodes),
        "lat": 37.0 + rng.uniform(0, 3, size=num_nodes),
        "lon": 118.0 + rng.uniform(0, 4, size=num_nodes),
    })
    coords.to_csv(directory / "coords.csv", index=False, float_format="%.6f")

    descriptor = {
        "name": name,
        "values_path": "values.csv",
        "coords_path": "coords.csv",
        "expected_T": num_steps,
        "expected_N": num_nodes,
    }
    with open(directory / "descriptor.json", "w") as f:
        json.dump(descriptor, f, indent=2)
    return directory / "descriptor.json"


def main():
    parser = argparse.ArgumentParser(description="Write a synthetic coupled-sinusoid SST-like dataset")
    parser.add_argument("directory", help="Output directory")
    parser.add_argument("--nodes", type=int, default=5, help="Number of nodes (default: 5)")
    parser.add_argument("--steps", type=int, default=400, help="Number of days (default: 400)")
    parser.add_argument("--noise", type=float, default=0.0, help="Noise std in °C (default: 0)")
    parser.add_argument("--seed", type=int, default=0, help="Random seed (default: 0)")

    args = parser.parse_args()
    values = coupled_sinusoids(args.nodes, args.steps, noise=args.noise, seed=args.seed)
    path = write_dataset(args.directory, values, seed=args.seed)
    print(f"Descriptor written to: {path}")


if __name__ == "__main__":
    main()
