"""
Core components of the SST graph forecaster.
"""

from .config import ExperimentConfig, ModelConfig, SplitSpec, TrainConfig
from .data_pipeline import GeoSeriesDataset, NormStats, WindowBatch
from .experiment_manager import ExperimentManager
from .model import SDLPGC, build_variant, load_checkpoint, save_checkpoint
from .trainer import MetricsReport, Trainer

__all__ = [
    'ExperimentConfig',
    'ModelConfig',
    'SplitSpec',
    'TrainConfig',
    'GeoSeriesDataset',
    'NormStats',
    'WindowBatch',
    'ExperimentManager',
    'SDLPGC',
    'build_variant',
    'load_checkpoint',
    'save_checkpoint',
    'MetricsReport',
    'Trainer'
]
