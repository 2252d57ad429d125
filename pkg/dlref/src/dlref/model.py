"""CNN-Transformer segment classifier.

A three-layer convolutional front end turns one multichannel EEG epoch
into a time-ordered sequence of spatiotemporal feature vectors; the
reshape that builds the sequence aggregates the channel and feature-map
axes, which is the only positional information the attention stage gets.
Two multi-head self-attention blocks then weigh the sequence, and a
single sigmoid neuron scores the whole segment.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn

from . import ShapeError


@dataclass(frozen=True)
class ModelConfig:
    """Architecture and training protocol knobs.

    Defaults describe the full-scale model for 5-second 23-channel
    segments sampled at 256 Hz; every field can be shrunk for toy runs.
    """

    time_points: int = 1280
    channels: int = 23
    conv_filters: tuple[int, int, int] = (32, 64, 128)
    kernel: int = 3
    pool: int = 2
    dropout_conv: float = 0.1
    attention_layers: int = 2
    heads: int = 8
    model_dim: int = 64
    dense_dim: int = 64
    dropout_attn: float = 0.3
    lr: float = 1e-3
    batch_size: int = 64
    max_epochs: int = 100
    patience: int = 20

    def __post_init__(self):
        for name in ("time_points", "channels", "kernel", "pool", "heads",
                     "model_dim", "dense_dim", "attention_layers",
                     "batch_size", "max_epochs", "patience"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if len(self.conv_filters) != 3 or any(f < 1 for f in self.conv_filters):
            raise ValueError("conv_filters must be three positive counts")
        if self.model_dim % self.heads:
            raise ValueError(
                f"model_dim {self.model_dim} not divisible by {self.heads} heads")
        if not 0.0 <= self.dropout_conv < 1.0 or not 0.0 <= self.dropout_attn < 1.0:
            raise ValueError("dropout probabilities must lie in [0, 1)")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.seq_len < 1 or self.pooled_channels < 1:
            raise ValueError(
                f"input {self.time_points}x{self.channels} collapses to nothing "
                f"after three pools of {self.pool}")

    @property
    def seq_len(self) -> int:
        """Time points left after the three pooling stages."""
        t = self.time_points
        for _ in range(3):
            t //= self.pool
        return t

    @property
    def pooled_channels(self) -> int:
        c = self.channels
        for _ in range(3):
            c //= self.pool
        return c

    @property
    def token_dim(self) -> int:
        """Width of one sequence element: pooled channels times feature maps."""
        return self.pooled_channels * self.conv_filters[-1]


class ConvBlock(nn.Module):
    """conv 3x3 (stride 1, same padding), dropout, pool, batch norm, ReLU."""

    def __init__(self, in_ch: int, out_ch: int, kernel: int, pool: int,
                 dropout: float):
        super().__init__()
        self.conv = nn.Conv2d(in_ch, out_ch, kernel, padding="same")
        self.drop = nn.Dropout(dropout)
        self.pool = nn.MaxPool2d(pool)
        self.norm = nn.BatchNorm2d(out_ch)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return torch.relu(self.norm(self.pool(self.drop(self.conv(x)))))


class SelfAttentionBlock(nn.Module):
    """Multi-head self-attention whose query/key/value projections shrink
    the token width to the model dimension, followed by a dense layer with
    ReLU and dropout that keeps it there."""

    def __init__(self, in_dim: int, dim: int, heads: int, dense_dim: int,
                 dropout: float):
        super().__init__()
        self.heads = heads
        self.head_dim = dim // heads
        self.q_proj = nn.Linear(in_dim, dim)
        self.k_proj = nn.Linear(in_dim, dim)
        self.v_proj = nn.Linear(in_dim, dim)
        self.out_proj = nn.Linear(dim, dim)
        self.dense = nn.Linear(dim, dense_dim)
        self.drop = nn.Dropout(dropout)

    def _split(self, x: torch.Tensor) -> torch.Tensor:
        b, t, _ = x.shape
        return x.view(b, t, self.heads, self.head_dim).transpose(1, 2)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        q, k, v = self._split(self.q_proj(x)), self._split(self.k_proj(x)), \
            self._split(self.v_proj(x))
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        mixed = torch.softmax(scores, dim=-1) @ v
        b, _, t, _ = mixed.shape
        merged = mixed.transpose(1, 2).reshape(b, t, self.heads * self.head_dim)
        return self.drop(torch.relu(self.dense(self.out_proj(merged))))


class CnnTransformer(nn.Module):
    """Segment scorer: conv stack, sequence reshape, attention, sigmoid."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        widths = (1, *config.conv_filters)
        self.conv_stack = nn.Sequential(*(
            ConvBlock(widths[i], widths[i + 1], config.kernel, config.pool,
                      config.dropout_conv)
            for i in range(3)))
        in_dims = (config.token_dim,) + \
            (config.dense_dim,) * (config.attention_layers - 1)
        self.attention = nn.Sequential(*(
            SelfAttentionBlock(d, config.model_dim, config.heads,
                               config.dense_dim, config.dropout_attn)
            for d in in_dims))
        self.head = nn.Linear(config.seq_len * config.dense_dim, 1)
        self.apply(_init_layer)

    def features(self, x: torch.Tensor) -> torch.Tensor:
        """Conv features as a (batch, time, channel-major token) sequence."""
        expected = (1, self.config.time_points, self.config.channels)
        if x.ndim != 4 or tuple(x.shape[1:]) != expected:
            raise ShapeError(
                f"expected (batch, {expected[0]}, {expected[1]}, {expected[2]}), "
                f"got {tuple(x.shape)}")
        z = self.conv_stack(x)
        b, f, t, c = z.shape
        return z.permute(0, 2, 3, 1).reshape(b, t, c * f)

    def logits(self, x: torch.Tensor) -> torch.Tensor:
        tokens = self.attention(self.features(x))
        return self.head(tokens.flatten(1)).squeeze(-1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """Per-segment probability of the preictal class, shape (batch,)."""
        return torch.sigmoid(self.logits(x))


def _init_layer(module: nn.Module) -> None:
    # Glorot to match the training protocol the reference results used
    if isinstance(module, (nn.Conv2d, nn.Linear)):
        nn.init.xavier_uniform_(module.weight)
        nn.init.zeros_(module.bias)


def build_model(config: ModelConfig) -> CnnTransformer:
    """Construct the model; parameter shapes depend only on the config."""
    return CnnTransformer(config)
