"""Learnable personalized graph convolution.

Each propagation step mixes neighbour aggregation over a row-stochastic
adjacency with the node's own self-evolution state, weighted by a learned
per-node, per-timestep restart probability. One branch runs on the static
graph, another on the dynamic graph, and their outputs are summed.
"""

from typing import Dict, List, Literal, NamedTuple, Optional

import torch
import torch.nn as nn
import torch.nn.functional as F

ROW_SUM_TOLERANCE = 1e-4

PropagationMode = Literal["lpgc", "gcn"]


class PropagationResult(NamedTuple):
    states: List[torch.Tensor]
    output: torch.Tensor
    restart: List[torch.Tensor]


def check_row_stochastic(adj: torch.Tensor, tolerance: float = ROW_SUM_TOLERANCE) -> None:
    deviation = (adj.sum(dim=-1) - 1).abs().max().item()
    if deviation > tolerance:
        raise AssertionError(f"adjacency is not row-stochastic (max row-sum deviation {deviation:.2e})")


def aggregate_neighbours(adj: torch.Tensor, z: torch.Tensor) -> torch.Tensor:
    """A·Z over the node axis for a shared [N, N] or per-window [B, N, N] adjacency."""
    if adj.dim() == 2:
        return torch.einsum("vw,bcwt->bcvt", adj, z)
    return torch.einsum("bvw,bcwt->bcvt", adj, z)


class SelfEvolution(nn.Module):
    """Ḧ = FC2(FC3(ReLU(FC4(Ĥ))) + Ĥ) with Ĥ = Concat(FC1(X̂), M^s)."""

    def __init__(self, in_channels: int, hidden_channels: int, embedding_dim: int, out_channels: int):
        super().__init__()
        width = hidden_channels + embedding_dim
        self.fc1 = nn.Conv2d(in_channels, hidden_channels, kernel_size=(1, 1))
        self.fc4 = nn.Conv2d(width, width, kernel_size=(1, 1))
        self.fc3 = nn.Conv2d(width, width, kernel_size=(1, 1))
        self.fc2 = nn.Conv2d(width, out_channels, kernel_size=(1, 1))

    def forward(self, x_hat: torch.Tensor, node_embeddings: torch.Tensor) -> torch.Tensor:
        batch, _, num_nodes, steps = x_hat.shape
        hidden = self.fc1(x_hat)
        identity = node_embeddings.T.reshape(1, -1, num_nodes, 1).expand(batch, -1, num_nodes, steps)
        joined = torch.cat([hidden, identity], dim=1)
        return self.fc2(self.fc3(F.relu(self.fc4(joined))) + joined)


class PersonalizedPropagation(nn.Module):
    """One LPGC branch over a single adjacency.

    mode="gcn" drops the self-evolution path entirely so every step is a
    plain Z^{l+1} = A·Z^l, keeping the input map and the collection layer.
    """

    def __init__(
        self,
        in_channels: int,
        channels: int,
        out_channels: int,
        embedding_dim: int,
        depth: int,
        mode: PropagationMode = "lpgc",
    ):
        super().__init__()
        if depth < 1:
            raise ValueError(f"propagation depth must be >= 1, got {depth}")
        self.depth = depth
        self.mode = mode
        self.input_map = nn.Conv2d(in_channels, channels, kernel_size=(1, 1))
        if mode == "lpgc":
            self.self_evolution = SelfEvolution(in_channels, channels, embedding_dim, channels)
            self.restart_head = nn.Conv2d(channels, 1, kernel_size=(1, 1))
        else:
            self.self_evolution = None
            self.restart_head = None
        self.collect_map = nn.Conv2d(depth * channels, out_channels, kernel_size=(1, 1))

    def restart_probability(self, evolution: torch.Tensor, state: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.restart_head(evolution + state))

    def propagate(self, x_hat: torch.Tensor, adj: torch.Tensor, node_embeddings: torch.Tensor) -> PropagationResult:
        check_row_stochastic(adj)
        state = self.input_map(x_hat)
        states, restart = [state], []
        evolution = self.self_evolution(x_hat, node_embeddings) if self.self_evolution is not None else None
        for _ in range(self.depth - 1):
            neighbours = aggregate_neighbours(adj, state)
            if evolution is None:
                state = neighbours
            else:
                alpha = self.restart_probability(evolution, state)
                state = (1 - alpha) * neighbours + alpha * evolution
                restart.append(alpha)
            states.append(state)
        output = self.collect_map(torch.cat(states, dim=1))
        return PropagationResult(states, output, restart)

    def forward(self, x_hat: torch.Tensor, adj: torch.Tensor, node_embeddings: torch.Tensor) -> torch.Tensor:
        return self.propagate(x_hat, adj, node_embeddings).output


class DualBranchLPGC(nn.Module):
    """Sum of two independently parameterized branches (static and dynamic graph)."""

    def __init__(
        self,
        in_channels: int,
        channels: int,
        out_channels: int,
        embedding_dim: int,
        depth: int,
        mode: PropagationMode = "lpgc",
    ):
        super().__init__()
        self.static_branch = PersonalizedPropagation(in_channels, channels, out_channels, embedding_dim, depth, mode)
        self.dynamic_branch = PersonalizedPropagation(in_channels, channels, out_channels, embedding_dim, depth, mode)

    def branches(
        self, x_hat: torch.Tensor, static_adj: torch.Tensor, dynamic_adj: torch.Tensor, node_embeddings: torch.Tensor
    ) -> Dict[str, PropagationResult]:
        return {
            "static": self.static_branch.propagate(x_hat, static_adj, node_embeddings),
            "dynamic": self.dynamic_branch.propagate(x_hat, dynamic_adj, node_embeddings),
        }

    def forward(
        self, x_hat: torch.Tensor, static_adj: torch.Tensor, dynamic_adj: torch.Tensor, node_embeddings: torch.Tensor
    ) -> torch.Tensor:
        results = self.branches(x_hat, static_adj, dynamic_adj, node_embeddings)
        static_out, dynamic_out = results["static"].output, results["dynamic"].output
        if static_out.shape != dynamic_out.shape:
            raise ValueError(f"branch outputs differ in shape: {tuple(static_out.shape)} vs {tuple(dynamic_out.shape)}")
        return static_out + dynamic_out


class IdentityPropagation(nn.Module):
    """Stand-in for the LPGC module that passes TC features through unchanged."""

    def branches(self, x_hat, static_adj, dynamic_adj, node_embeddings) -> Dict[str, PropagationResult]:
        return {}

    def forward(
        self,
        x_hat: torch.Tensor,
        static_adj: Optional[torch.Tensor] = None,
        dynamic_adj: Optional[torch.Tensor] = None,
        node_embeddings: Optional[torch.Tensor] = None,
    ) -> torch.Tensor:
        return x_hat
