"""Temporal super-resolution of the VA curve into a dense control signal:
linear interpolation to acoustic rate, an MLP projection into decoder space,
and a causal dilated convolution stack that smooths local jitter."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .world.arcs import AffectTrajectory


@dataclass(frozen=True)
class AdapterConfig:
    dim: int = 128  # must match the acoustic decoder width
    dropout: float = 0.1
    kernel: int = 3
    dilations: tuple[int, ...] = (1, 2, 4)
    leaky_slope: float = 0.1
    epochs: int = 50
    learning_rate: float = 3e-3
    rng_seed: int = 0

    @property
    def receptive_field(self) -> int:
        """Number of past rows each output row can see (exclusive of itself)."""
        return (self.kernel - 1) * sum(self.dilations)


def interpolate_trajectory(traj: AffectTrajectory, t_a: int) -> np.ndarray:
    """Resample each VA coordinate onto t_a uniform times over the curve's span.

    A single-point trajectory broadcasts; when t_a equals the trajectory
    length the knots pass through unchanged.
    """
    if len(traj) == 0:
        raise ValueError("cannot interpolate an empty trajectory")
    if t_a < 1:
        raise ValueError("t_a must be >= 1")
    if len(traj) == 1:
        return np.repeat(traj.values, t_a, axis=0)
    knots = np.arange(len(traj), dtype=np.float64)
    times = np.linspace(0.0, float(len(traj) - 1), t_a)
    return np.stack(
        [np.interp(times, knots, traj.values[:, c]) for c in range(2)], axis=1
    )


class ControlAdapter(nn.Module):
    """projector (2 -> dim -> dim, GELU + dropout) then causal dilated convs.

    Convolutions are left-padded only, so row t of the output depends on
    input rows t-receptive_field .. t and nothing later.  Conv kernels start
    as causal moving averages (plus small seeded noise) and the output layer
    starts near identity, so a fresh adapter smooths rather than scrambles.
    """

    def __init__(self, config: AdapterConfig = AdapterConfig()):
        super().__init__()
        self.config = config
        d = config.dim
        torch.manual_seed(0x61646170 ^ config.rng_seed)
        self.proj_in = nn.Linear(2, d)
        self.proj_out = nn.Linear(d, d)
        self.dropout = nn.Dropout(config.dropout)
        self.convs = nn.ModuleList(
            nn.Conv1d(d, d, config.kernel, dilation=dil) for dil in config.dilations
        )
        self.out = nn.Linear(d, d)
        with torch.no_grad():
            for conv in self.convs:
                noise = torch.empty_like(conv.weight).normal_(0.0, 0.02)
                conv.weight.copy_(noise)
                conv.weight += (
                    torch.eye(d).unsqueeze(-1).expand(d, d, config.kernel) / config.kernel
                )
                conv.bias.zero_()
            self.out.weight.copy_(
                torch.eye(d) + torch.empty(d, d).normal_(0.0, 0.01)
            )
            self.out.bias.zero_()

    def projector(self, dense_va: torch.Tensor) -> torch.Tensor:
        return self.proj_out(self.dropout(F.gelu(self.proj_in(dense_va))))

    def forward(self, dense_va: torch.Tensor) -> torch.Tensor:
        """(..., T, 2) dense VA -> (..., T, dim) control signal."""
        squeeze = dense_va.ndim == 2
        if squeeze:
            dense_va = dense_va.unsqueeze(0)
        h = self.projector(dense_va)
        h = h.transpose(1, 2)  # (B, dim, T)
        for conv, dil in zip(self.convs, self.config.dilations):
            padded = F.pad(h, ((self.config.kernel - 1) * dil, 0))
            h = F.leaky_relu(conv(padded), negative_slope=self.config.leaky_slope)
        h = self.out(h.transpose(1, 2))
        return h.squeeze(0) if squeeze else h


def control_signal(
    traj: AffectTrajectory, t_a: int, adapter: ControlAdapter
) -> np.ndarray:
    """Deterministic (t_a, dim) control matrix for inference (dropout off)."""
    dense = torch.as_tensor(interpolate_trajectory(traj, t_a), dtype=torch.float32)
    was_training = adapter.training
    adapter.eval()
    try:
        with torch.no_grad():
            out = adapter(dense).numpy().astype(np.float64)
    finally:
        adapter.train(was_training)
    return out
