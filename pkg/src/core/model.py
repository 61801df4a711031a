"""End-to-end forecaster: graph learning, K gated TC/LPGC blocks, output module."""

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F
from pydantic import BaseModel, ValidationError

from ..plugins.variant_base import VariantWiring
from ..plugins.variant_manager import default_manager
from .config import ModelConfig
from .data_pipeline import NormStats
from .errors import CheckpointError, ConfigurationError
from .graph_learning import GraphLearner
from .lpgc import DualBranchLPGC, IdentityPropagation
from .temporal_convolution import GatedTemporalConv, block_dilations, padded_input_length

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
WEIGHTS_FILE = "weights.pt"
MANIFEST_FILE = "manifest.json"

FULL_WIRING = VariantWiring(static_graph=True, dynamic_graph=True, propagation="lpgc")


class SpatioTemporalBlock(nn.Module):
    """Gated TC → LPGC → residual add, with a skip tap on the last timestep."""

    def __init__(self, config: ModelConfig, dilation: int, propagation: str):
        super().__init__()
        channels = config.residual_channels
        self.temporal = GatedTemporalConv(channels, channels, config.kernel_set, dilation)
        if propagation == "identity":
            self.spatial = IdentityPropagation()
        else:
            self.spatial = DualBranchLPGC(
                channels, config.lpgc_channels, channels, config.embedding_dim, config.propagation_depth, propagation
            )
        self.residual_proj = nn.Conv2d(channels, channels, kernel_size=(1, 1))
        self.skip_conv = nn.Conv2d(channels, config.skip_channels, kernel_size=(1, 1))

    def forward(
        self,
        x: torch.Tensor,
        static_adj: torch.Tensor,
        dynamic_adj: torch.Tensor,
        node_embeddings: torch.Tensor,
        diagnostics: Optional[Dict[str, Any]] = None,
    ) -> Tuple[torch.Tensor, torch.Tensor]:
        residual = x
        x = self.temporal(x)
        if diagnostics is None:
            x = self.spatial(x, static_adj, dynamic_adj, node_embeddings)
        else:
            results = self.spatial.branches(x, static_adj, dynamic_adj, node_embeddings)
            for name, result in results.items():
                diagnostics[name] = [alpha.mean().item() for alpha in result.restart]
            if results:
                x = sum(result.output for result in results.values())
        x = x + self.residual_proj(residual[..., -x.shape[-1]:])
        return x, self.skip_conv(x[..., -1:])


class SDLPGC(nn.Module):
    """Static/dynamic learnable personalized graph convolution forecaster.

    Maps a normalized window [B, in_dim, N, u] to a v-step forecast [B, v, N].
    Both adjacencies are inferred once per forward pass and shared by every
    block.
    """

    def __init__(self, config: ModelConfig, wiring: VariantWiring = FULL_WIRING, variant: str = "full"):
        super().__init__()
        if config.num_nodes is None:
            raise ConfigurationError("model.num_nodes must be set before building the model")
        self.config = config
        self.wiring = wiring
        self.variant = variant
        padded = padded_input_length(
            config.input_length, config.num_blocks, config.dilation_base, config.kernel_set, config.padding
        )
        self.padding_length = padded - config.input_length

        self.graph_learner = GraphLearner(
            config.num_nodes,
            config.in_dim,
            config.embedding_dim,
            config.num_heads,
            config.head_dim,
            config.skip_dim,
            config.dropout,
            static_graph=wiring.static_graph,
            dynamic_graph=wiring.dynamic_graph,
        )
        self.start_conv = nn.Conv2d(config.in_dim, config.residual_channels, kernel_size=(1, 1))
        self.blocks = nn.ModuleList(
            SpatioTemporalBlock(config, dilation, wiring.propagation)
            for dilation in block_dilations(config.num_blocks, config.dilation_base)
        )
        self.end_conv_1 = nn.Conv2d(config.skip_channels, config.end_channels, kernel_size=(1, 1))
        self.end_conv_2 = nn.Conv2d(config.end_channels, config.horizon, kernel_size=(1, 1))

    @property
    def num_parameters(self) -> int:
        return sum(p.numel() for p in self.parameters() if p.requires_grad)

    def _check_window(self, window: torch.Tensor) -> None:
        expected = (self.config.in_dim, self.config.num_nodes, self.config.input_length)
        if window.dim() != 4 or tuple(window.shape[1:]) != expected:
            raise ValueError(f"expected window [B, {', '.join(map(str, expected))}], got {tuple(window.shape)}")

    def infer_graphs(self, window: torch.Tensor) -> Tuple[Optional[torch.Tensor], Optional[torch.Tensor]]:
        """Learned (Â^s, Â^d) for a window; either is None when the variant drops it."""
        self._check_window(window)
        return self.graph_learner(window)

    def _branch_graphs(self, window: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        static_adj, dynamic_adj = self.graph_learner(window)
        static_input = static_adj if self.wiring.static_graph else dynamic_adj
        dynamic_input = dynamic_adj if self.wiring.dynamic_graph else static_adj
        return static_input, dynamic_input

    def _run(self, window: torch.Tensor, diagnostics: Optional[Dict[str, Any]] = None) -> torch.Tensor:
        self._check_window(window)
        static_adj, dynamic_adj = self._branch_graphs(window)
        node_embeddings = self.graph_learner.node_embeddings

        x = F.pad(window, (self.padding_length, 0)) if self.padding_length else window
        x = self.start_conv(x)
        skip = None
        for index, block in enumerate(self.blocks):
            block_diagnostics = None
            if diagnostics is not None:
                block_diagnostics = diagnostics.setdefault(f"block_{index}", {})
            x, tap = block(x, static_adj, dynamic_adj, node_embeddings, block_diagnostics)
            skip = tap if skip is None else skip + tap

        out = F.relu(self.end_conv_1(F.relu(skip)))
        return self.end_conv_2(out).squeeze(-1)

    def forward(self, window: torch.Tensor) -> torch.Tensor:
        return self._run(window)

    @torch.no_grad()
    def diagnose(self, window: torch.Tensor) -> Dict[str, Any]:
        """Mean restart probability per block, branch and propagation step."""
        diagnostics: Dict[str, Any] = {}
        was_training = self.training
        self.eval()
        try:
            self._run(window, diagnostics)
        finally:
            self.train(was_training)
        return diagnostics


def build_variant(config: ModelConfig, variant: str = "full") -> SDLPGC:
    """Construct a variant with parameters initialized from ``config.seed``."""
    wiring = default_manager().get(variant).wiring()
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(config.seed)
        model = SDLPGC(config, wiring, variant)
    logger.debug(f"Built variant {variant} with {model.num_parameters} parameters")
    return model


class CheckpointManifest(BaseModel):
    version: int
    variant: str
    config: ModelConfig
    norm_stats: Optional[NormStats] = None
    dataset: Optional[str] = None
    seed: int = 0
    padding_length: int = 0
    epoch: int = 0
    best_val_mae: Optional[float] = None
    content_hash: str


@dataclass
class Checkpoint:
    model: SDLPGC
    manifest: CheckpointManifest
    optimizer_state: Optional[Dict[str, Any]] = None


def content_hash(data: bytes) -> str:
    """Git blob hash of a byte string."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def save_checkpoint(
    model: SDLPGC,
    path: Path,
    norm_stats: Optional[NormStats] = None,
    dataset: Optional[str] = None,
    epoch: int = 0,
    best_val_mae: Optional[float] = None,
    optimizer_state: Optional[Dict[str, Any]] = None,
) -> Path:
    """Write ``weights.pt`` and ``manifest.json`` into the directory ``path``."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    weights_path = path / WEIGHTS_FILE
    torch.save({"model": model.state_dict(), "optimizer": optimizer_state}, weights_path)
    manifest = CheckpointManifest(
        version=CHECKPOINT_VERSION,
        variant=model.variant,
        config=model.config,
        norm_stats=norm_stats,
        dataset=dataset,
        seed=model.config.seed,
        padding_length=model.padding_length,
        epoch=epoch,
        best_val_mae=best_val_mae,
        content_hash=content_hash(weights_path.read_bytes()),
    )
    with open(path / MANIFEST_FILE, "w") as f:
        f.write(manifest.model_dump_json(indent=2))
    logger.info(f"Saved checkpoint to {path}")
    return path


def read_manifest(path: Path) -> CheckpointManifest:
    manifest_path = Path(path) / MANIFEST_FILE
    if not manifest_path.exists():
        raise FileNotFoundError(f"Checkpoint manifest not found: {manifest_path}")
    try:
        with open(manifest_path, "r") as f:
            raw = json.load(f)
    except json.JSONDecodeError as e:
        raise CheckpointError(f"corrupt checkpoint manifest {manifest_path}: {e}")
    version = raw.get("version") if isinstance(raw, dict) else None
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {CHECKPOINT_VERSION})")
    try:
        return CheckpointManifest(**raw)
    except ValidationError as e:
        raise CheckpointError(f"corrupt checkpoint manifest {manifest_path}: {e}")


def load_checkpoint(path: Path, map_location: str = "cpu") -> Checkpoint:
    path = Path(path)
    manifest = read_manifest(path)
    weights_path = path / WEIGHTS_FILE
    if not weights_path.exists():
        raise FileNotFoundError(f"Checkpoint weights not found: {weights_path}")
    data = weights_path.read_bytes()
    if content_hash(data) != manifest.content_hash:
        raise CheckpointError(f"corrupt checkpoint {weights_path}: content hash mismatch")
    try:
        payload = torch.load(weights_path, map_location=map_location, weights_only=True)
    except Exception as e:
        raise CheckpointError(f"corrupt checkpoint {weights_path}: {e}")

    model = build_variant(manifest.config, manifest.variant)
    if model.padding_length != manifest.padding_length:
        raise CheckpointError(
            f"checkpoint padding {manifest.padding_length} does not match rebuilt model {model.padding_length}"
        )
    try:
        model.load_state_dict(payload["model"])
    except (KeyError, RuntimeError) as e:
        raise CheckpointError(f"checkpoint parameters do not fit the model: {e}")
    model.eval()
    return Checkpoint(model, manifest, payload.get("optimizer"))
