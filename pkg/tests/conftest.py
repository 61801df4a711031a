import numpy as np
import pandas as pd
import pytest

from src.core.config import ModelConfig, SplitSpec
from src.core.data_pipeline import GeoSeriesDataset, prepare_splits
from src.tools.synthetic import coupled_sinusoids, write_dataset

# Small enough for gradient checks, large enough to exercise every block
TINY_MODEL = {
    "input_length": 8,
    "horizon": 4,
    "embedding_dim": 6,
    "num_heads": 2,
    "head_dim": 3,
    "skip_dim": 3,
    "num_blocks": 1,
    "propagation_depth": 2,
    "residual_channels": 4,
    "lpgc_channels": 4,
    "skip_channels": 4,
    "end_channels": 8,
    "dropout": 0.0,
}
TINY_NODES = 4
TINY_HORIZONS = [1, 2, 3, 4]


@pytest.fixture
def tiny_model_dict():
    return dict(TINY_MODEL)


@pytest.fixture
def tiny_config():
    return ModelConfig(num_nodes=TINY_NODES, **TINY_MODEL)


@pytest.fixture
def tiny_horizons():
    return list(TINY_HORIZONS)


@pytest.fixture
def synthetic_values():
    return coupled_sinusoids(num_nodes=TINY_NODES, num_steps=120, noise=0.1, seed=0)


@pytest.fixture
def synthetic_descriptor(tmp_path, synthetic_values):
    return write_dataset(tmp_path / "data", synthetic_values, name="synthetic")


@pytest.fixture
def synthetic_splits(synthetic_values):
    dataset = GeoSeriesDataset(
        values=synthetic_values,
        timestamps=pd.date_range("2015-01-01", periods=len(synthetic_values), freq="D"),
        coords=np.arange(2 * TINY_NODES, dtype=np.float64).reshape(TINY_NODES, 2),
        name="synthetic",
        node_names=tuple(f"node_{i}" for i in range(TINY_NODES)),
    )
    return prepare_splits(dataset, SplitSpec())
