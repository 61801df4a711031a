"""Static and dynamic adjacency inference from node embeddings and input windows."""

import math
from typing import List, Optional, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F


def static_adjacency(node_embeddings: torch.Tensor) -> torch.Tensor:
    """Row-softmax of ReLU(M·Mᵀ): the long-term graph, one [N, N] matrix."""
    logits = F.relu(node_embeddings @ node_embeddings.T)
    return torch.softmax(logits, dim=-1)


class StaticGraphLearner(nn.Module):
    """Holds the trainable node embeddings M^s shared across the whole model."""

    def __init__(self, num_nodes: int, embedding_dim: int):
        super().__init__()
        self.node_embeddings = nn.Parameter(torch.randn(num_nodes, embedding_dim) / math.sqrt(embedding_dim))

    def forward(self) -> torch.Tensor:
        return static_adjacency(self.node_embeddings)


class DynamicGraphLearner(nn.Module):
    """Per-window graph from the input fused with node embeddings.

    The window is projected to the embedding width with a 1×1 convolution, a
    GRU cell whose hidden state starts at M^s consumes the projected steps,
    multi-head bilinear similarity of the fused states gives edge logits, and
    the static graph is added as a prior before the final row-softmax.
    """

    def __init__(
        self,
        num_nodes: int,
        in_dim: int,
        embedding_dim: int,
        num_heads: int,
        head_dim: int,
        skip_dim: int,
        dropout: float,
    ):
        super().__init__()
        self.num_heads = num_heads
        self.head_dim = head_dim
        self.input_proj = nn.Conv2d(in_dim, embedding_dim, kernel_size=(1, 1))
        self.fusion_cell = nn.GRUCell(embedding_dim, embedding_dim)
        self.head_norm = nn.LayerNorm(embedding_dim)
        self.query = nn.ModuleList(nn.Linear(embedding_dim, head_dim) for _ in range(num_heads))
        self.key = nn.ModuleList(nn.Linear(embedding_dim, head_dim) for _ in range(num_heads))
        self.skip_query = nn.Linear(embedding_dim, skip_dim)
        self.skip_key = nn.Linear(embedding_dim, skip_dim)
        self.skip_norm = nn.LayerNorm((num_nodes, num_nodes))
        self.edge_norm = nn.LayerNorm((num_nodes, num_nodes))
        self.head_dropout = nn.Dropout(dropout)
        self.edge_dropout = nn.Dropout(dropout)

    def fuse_node_state(self, window: torch.Tensor, node_embeddings: torch.Tensor) -> torch.Tensor:
        """[B, C_in, N, u] window → fused node states h_r of shape [B, N, d]."""
        if window.dim() != 4 or window.shape[2] != node_embeddings.shape[0]:
            raise ValueError(
                f"window shape {tuple(window.shape)} does not match {node_embeddings.shape[0]} nodes"
            )
        batch, _, num_nodes, steps = window.shape
        features = self.input_proj(window)  # [B, d, N, u]
        hidden = node_embeddings.unsqueeze(0).expand(batch, -1, -1).reshape(batch * num_nodes, -1)
        for t in range(steps):
            step = features[..., t].permute(0, 2, 1).reshape(batch * num_nodes, -1)
            hidden = self.fusion_cell(step, hidden)
        return hidden.view(batch, num_nodes, -1)

    def head_similarity(self, fused: torch.Tensor, head: int) -> torch.Tensor:
        normed = self.head_norm(fused)
        query = torch.tanh(self.query[head](normed))
        key = torch.tanh(self.key[head](normed))
        scores = query @ key.transpose(1, 2) / math.sqrt(self.head_dim)
        return self.head_dropout(scores)

    def aggregate_heads(self, heads: List[torch.Tensor], fused: torch.Tensor) -> torch.Tensor:
        skip = self.skip_query(fused) @ self.skip_key(fused).transpose(1, 2)
        return torch.stack(heads).sum(dim=0) + self.skip_norm(skip)

    def dynamic_adjacency(self, edge_logits: torch.Tensor, static_adj: torch.Tensor) -> torch.Tensor:
        logits = self.edge_dropout(self.edge_norm(edge_logits)) + static_adj
        return torch.softmax(F.relu(logits), dim=-1)

    def forward(
        self, window: torch.Tensor, node_embeddings: torch.Tensor, static_prior: torch.Tensor
    ) -> torch.Tensor:
        fused = self.fuse_node_state(window, node_embeddings)
        heads = [self.head_similarity(fused, k) for k in range(self.num_heads)]
        return self.dynamic_adjacency(self.aggregate_heads(heads, fused), static_prior)


class GraphLearner(nn.Module):
    """Both graph learning layers behind one call: window → (Â^s, Â^d)."""

    def __init__(
        self,
        num_nodes: int,
        in_dim: int,
        embedding_dim: int,
        num_heads: int,
        head_dim: int,
        skip_dim: int,
        dropout: float,
        static_graph: bool = True,
        dynamic_graph: bool = True,
    ):
        super().__init__()
        self.static_graph = static_graph
        self.static = StaticGraphLearner(num_nodes, embedding_dim)
        self.dynamic = (
            DynamicGraphLearner(num_nodes, in_dim, embedding_dim, num_heads, head_dim, skip_dim, dropout)
            if dynamic_graph
            else None
        )

    @property
    def node_embeddings(self) -> torch.Tensor:
        return self.static.node_embeddings

    def forward(self, window: torch.Tensor) -> Tuple[Optional[torch.Tensor], Optional[torch.Tensor]]:
        static_adj = self.static() if self.static_graph else None
        dynamic_adj = None
        if self.dynamic is not None:
            prior = static_adj
            if prior is None:
                num_nodes = self.node_embeddings.shape[0]
                prior = self.node_embeddings.new_zeros(num_nodes, num_nodes)
            dynamic_adj = self.dynamic(window, self.node_embeddings, prior)
        return static_adj, dynamic_adj
