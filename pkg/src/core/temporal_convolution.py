"""Gated dilated-inception temporal convolution blocks."""

from typing import List, Sequence, Tuple

import torch
import torch.nn as nn

from .errors import ConfigurationError

DEFAULT_KERNEL_SET = (2, 3, 6, 7)


def block_dilations(num_blocks: int, dilation_base: int) -> List[int]:
    """Block k (1-based) uses dilation_base ** (k - 1)."""
    return [dilation_base ** k for k in range(num_blocks)]


def receptive_field(
    num_blocks: int, dilation_base: int, kernel_set: Sequence[int] = DEFAULT_KERNEL_SET
) -> int:
    """Lookback consumed by the stacked blocks: 1 + Σ (k_max − 1)·dilation."""
    if num_blocks < 1:
        raise ConfigurationError(f"num_blocks must be >= 1, got {num_blocks}")
    span = max(kernel_set) - 1
    return 1 + sum(span * d for d in block_dilations(num_blocks, dilation_base))


def valid_block_layouts(
    input_length: int, kernel_set: Sequence[int] = DEFAULT_KERNEL_SET, max_blocks: int = 4, max_base: int = 3
) -> List[Tuple[int, int]]:
    return [
        (blocks, base)
        for blocks in range(1, max_blocks + 1)
        for base in range(1, max_base + 1)
        if receptive_field(blocks, base, kernel_set) <= input_length
    ]


def padded_input_length(
    input_length: int,
    num_blocks: int,
    dilation_base: int,
    kernel_set: Sequence[int] = DEFAULT_KERNEL_SET,
    padding: str = "auto",
) -> int:
    """Window length the TC stack sees after optional left zero-padding."""
    field = receptive_field(num_blocks, dilation_base, kernel_set)
    if padding == "auto":
        return max(input_length, field)
    if field > input_length:
        raise ConfigurationError(
            f"receptive field {field} of {num_blocks} blocks with dilation base {dilation_base} "
            f"exceeds input length {input_length}; valid (num_blocks, dilation_base): "
            f"{valid_block_layouts(input_length, kernel_set)} or use padding='auto'"
        )
    return input_length


class DilatedInception(nn.Module):
    """Parallel dilated causal convolutions over time, concatenated on channels."""

    def __init__(self, in_channels: int, out_channels: int, kernel_set: Sequence[int] = DEFAULT_KERNEL_SET, dilation: int = 1):
        super().__init__()
        if out_channels % len(kernel_set) != 0:
            raise ConfigurationError(
                f"out_channels={out_channels} not divisible by {len(kernel_set)} kernel sizes"
            )
        if dilation < 1:
            raise ConfigurationError(f"dilation must be >= 1, got {dilation}")
        self.kernel_set = tuple(kernel_set)
        self.dilation = dilation
        branch_channels = out_channels // len(self.kernel_set)
        self.tconv = nn.ModuleList(
            nn.Conv2d(in_channels, branch_channels, (1, k), dilation=(1, dilation)) for k in self.kernel_set
        )

    @property
    def min_length(self) -> int:
        return 1 + self.dilation * (max(self.kernel_set) - 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-1] < self.min_length:
            raise ValueError(
                f"input of length {x.shape[-1]} too short for dilated inception: "
                f"need at least T={self.min_length}"
            )
        outputs = [conv(x) for conv in self.tconv]
        length = min(o.shape[-1] for o in outputs)
        return torch.cat([o[..., -length:] for o in outputs], dim=1)


class GatedTemporalConv(nn.Module):
    """tanh(filter(x)) ⊙ sigmoid(gate(x)); entries stay inside (−1, 1)."""

    def __init__(self, in_channels: int, out_channels: int, kernel_set: Sequence[int] = DEFAULT_KERNEL_SET, dilation: int = 1):
        super().__init__()
        self.filter_branch = DilatedInception(in_channels, out_channels, kernel_set, dilation)
        self.gate_branch = DilatedInception(in_channels, out_channels, kernel_set, dilation)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return torch.tanh(self.filter_branch(x)) * torch.sigmoid(self.gate_branch(x))
