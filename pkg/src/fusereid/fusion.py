"""Learnable global-to-local fusion: a channel gate on the teacher's feature map.

A local embedding from the student drives a bottleneck MLP whose output is
multiplied back onto the embedding (residual gate) to form per-channel
attention logits. The sigmoid of those logits rescales every spatial column of
the global feature map. Each part index owns an independent gate.
"""

import math

import torch
from torch import nn

from .errors import ConfigError, InputError
from .models import global_avg_pool


class FusionModule(nn.Module):
    """Channel-attention gate derived from a local embedding.

    The gate logits are ``mlp(local) * local`` so a zero local vector always
    yields neutral attention 0.5 regardless of the MLP weights.
    """

    def __init__(self, channels: int, reduction_ratio: int = 4):
        super().__init__()
        if reduction_ratio < 1 or channels % reduction_ratio:
            raise ConfigError(
                f"reduction ratio {reduction_ratio} must divide channels {channels}"
            )
        self.channels = channels
        self.reduction_ratio = reduction_ratio
        hidden = channels // reduction_ratio
        self.fc1 = nn.Linear(channels, hidden)
        self.fc2 = nn.Linear(hidden, channels)
        self.reset_parameters()

    def reset_parameters(self) -> None:
        # fan-in scaled uniform weights, zero biases
        for fc in (self.fc1, self.fc2):
            bound = 1.0 / math.sqrt(fc.in_features)
            nn.init.uniform_(fc.weight, -bound, bound)
            nn.init.zeros_(fc.bias)

    def attention_logits(self, local_vec: torch.Tensor) -> torch.Tensor:
        """Pre-sigmoid per-channel attention; (C,) -> (C,) or (B,C) -> (B,C)."""
        if local_vec.shape[-1] != self.channels:
            raise InputError(
                f"local vector has {local_vec.shape[-1]} channels, expected {self.channels}"
            )
        return self.fc2(torch.relu(self.fc1(local_vec))) * local_vec

    def forward(self, local_vec: torch.Tensor, global_map: torch.Tensor) -> torch.Tensor:
        """Gate ``global_map`` by attention from ``local_vec``.

        Accepts a single (C,) vector with a (C,H,W) map or a (B,C) batch with
        (B,C,H,W) maps. The attention broadcasts over the spatial dimensions.
        """
        if global_map.dim() != local_vec.dim() + 2:
            raise InputError(
                f"rank mismatch: local {tuple(local_vec.shape)} vs map {tuple(global_map.shape)}"
            )
        if global_map.shape[-3] != self.channels or local_vec.shape[-1] != self.channels:
            raise InputError("channel count mismatch between local vector and global map")
        if local_vec.dim() == 2 and local_vec.shape[0] != global_map.shape[0]:
            raise InputError("batch size mismatch between local vector and global map")
        gate = torch.sigmoid(self.attention_logits(local_vec))
        return gate.unsqueeze(-1).unsqueeze(-1) * global_map

    def fused_embedding(self, local_vec: torch.Tensor, global_map: torch.Tensor) -> torch.Tensor:
        """Pooled fused map; the vector handed to clustering."""
        return global_avg_pool(self.forward(local_vec, global_map))
