"""Affective probing: a frozen feature backbone plus a small trainable
regression head that reads per-frame hidden states into VA space."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from ._transformer import EncoderBlock
from .weights import module_checksum
from .world.arcs import AffectTrajectory
from .world.video import FEATURE_DIM, VECTORS_PER_FRAME, PseudoVideo

# The backbone stub stands in for a large pretrained model: its weights come
# from this fixed seed and are never updated.
_BACKBONE_FIXED_SEED = 0x66726F7A


@dataclass(frozen=True)
class ProbeConfig:
    hidden_dim: int = 64  # backbone width; the probe reads vectors of this size
    backbone_layers: int = 4
    backbone_heads: int = 4
    probe_width: int = 64
    lam: float = 0.5  # weight of the L1 term in the hybrid loss
    epochs: int = 150
    learning_rate: float = 1e-3
    rng_seed: int = 0
    max_seconds: int = 512
    n_instructions: int = 4
    instruction_len: int = 4

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.hidden_dim % self.backbone_heads:
            raise ValueError("backbone_heads must divide hidden_dim")


@dataclass
class InterleavedSequence:
    """Instruction prefix followed by strictly time-ordered (marker, frame) pairs."""

    instruction_tokens: tuple[int, ...]
    elements: list[tuple[int, np.ndarray]]

    def __post_init__(self):
        seconds = [s for s, _ in self.elements]
        if seconds != sorted(set(seconds)):
            raise ValueError("elements must be strictly time-ordered")

    @property
    def num_frames(self) -> int:
        return len(self.elements)


def build_interleaved_sequence(
    video: PseudoVideo, instruction_id: int = 0, config: ProbeConfig = ProbeConfig()
) -> InterleavedSequence:
    """Lay out [instruction, marker_1, frame_1, ..., marker_T, frame_T]."""
    if len(video) == 0:
        raise ValueError("cannot build a sequence from an empty video")
    if not 0 <= instruction_id < config.n_instructions:
        raise ValueError(f"instruction_id {instruction_id} outside [0, {config.n_instructions})")
    if len(video) > config.max_seconds:
        raise ValueError(
            f"video of {len(video)}s exceeds the {config.max_seconds}s marker table; "
            "probe it window-by-window instead"
        )
    tokens = tuple(
        instruction_id * config.instruction_len + j for j in range(config.instruction_len)
    )
    elements = [(t, video.frames[t]) for t in range(len(video))]
    return InterleavedSequence(tokens, elements)


def sequence_length(seq: InterleavedSequence) -> int:
    """Total positions: instruction + one marker and M vectors per frame."""
    return len(seq.instruction_tokens) + seq.num_frames * (1 + VECTORS_PER_FRAME)


class FrozenBackbone(nn.Module):
    """Fixed-weight causal transformer over interleaved sequences.

    Parameters are seeded once from a constant and frozen; training code never
    touches them, which the checksum makes cheap to assert.
    """

    def __init__(self, config: ProbeConfig = ProbeConfig()):
        super().__init__()
        self.config = config
        d = config.hidden_dim
        max_positions = (
            config.n_instructions * config.instruction_len
            + config.max_seconds * (1 + VECTORS_PER_FRAME)
        )
        torch.manual_seed(_BACKBONE_FIXED_SEED)
        self.instruction_emb = nn.Embedding(config.n_instructions * config.instruction_len, d)
        self.time_emb = nn.Embedding(config.max_seconds, d)
        self.visual_proj = nn.Linear(FEATURE_DIM, d)
        self.pos_emb = nn.Embedding(max_positions, d)
        self.blocks = nn.ModuleList(
            EncoderBlock(d, config.backbone_heads) for _ in range(config.backbone_layers)
        )
        self.ln_f = nn.LayerNorm(d)
        for p in self.parameters():
            p.requires_grad_(False)
        self.eval()

    def forward(self, seq: InterleavedSequence) -> torch.Tensor:
        """Hidden states of the visual positions, shaped (T, M, hidden_dim)."""
        inst = torch.tensor(seq.instruction_tokens, dtype=torch.long)
        seconds = torch.tensor([s for s, _ in seq.elements], dtype=torch.long)
        blocks = torch.as_tensor(
            np.stack([b for _, b in seq.elements]), dtype=self.visual_proj.weight.dtype
        )
        t, m = blocks.shape[:2]
        frame_parts = torch.cat(
            [self.time_emb(seconds).unsqueeze(1), self.visual_proj(blocks)], dim=1
        )
        x = torch.cat([self.instruction_emb(inst), frame_parts.reshape(t * (1 + m), -1)], dim=0)
        x = x + self.pos_emb.weight[: x.shape[0]]
        h = x.unsqueeze(0)
        for blk in self.blocks:
            h = blk(h, causal=True)
        h = self.ln_f(h)
        offset = len(seq.instruction_tokens)
        idx = offset + torch.arange(t).unsqueeze(1) * (1 + m) + 1 + torch.arange(m).unsqueeze(0)
        return h[0, idx.reshape(-1)].reshape(t, m, -1)

    def frame_hiddens(self, video: PseudoVideo, instruction_id: int = 0) -> torch.Tensor:
        with torch.no_grad():
            return self(build_interleaved_sequence(video, instruction_id, self.config))

    def checksum(self) -> int:
        return module_checksum(self)


class ProbeHead(nn.Module):
    """Pool the frame's vectors, regress to VA, clip to the unit square."""

    def __init__(self, in_dim: int = 64, width: int = 64, rng_seed: int = 0,
                 net: nn.Module | None = None, vectors_per_frame: int = VECTORS_PER_FRAME):
        super().__init__()
        if net is None:
            torch.manual_seed(0x70726F62 ^ rng_seed)
            net = nn.Sequential(nn.Linear(in_dim, width), nn.GELU(), nn.Linear(width, 2))
        self.net = net
        self.vectors_per_frame = vectors_per_frame

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        if z.shape[-2] != self.vectors_per_frame:
            raise ValueError(
                f"expected {self.vectors_per_frame} vectors per frame, got {z.shape[-2]}"
            )
        return torch.clamp(self.net(z.mean(dim=-2)), -1.0, 1.0)


def emo_loss(pred: torch.Tensor, truth: torch.Tensor, lam: float = 0.5) -> torch.Tensor:
    """Mean over time of squared-L2 plus lam times L1 residual norms."""
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch {tuple(pred.shape)} vs {tuple(truth.shape)}")
    if pred.numel() == 0:
        raise ValueError("empty trajectories")
    diff = pred - truth
    return (diff.pow(2).sum(dim=-1) + lam * diff.abs().sum(dim=-1)).mean()


def predict_trajectory(
    video: PseudoVideo, backbone: FrozenBackbone, head: ProbeHead, instruction_id: int = 0
) -> AffectTrajectory:
    with torch.no_grad():
        pred = head(backbone.frame_hiddens(video, instruction_id))
    return AffectTrajectory(pred.numpy().astype(np.float64))


def train_probe(
    dataset: list[tuple[PseudoVideo, AffectTrajectory]],
    config: ProbeConfig = ProbeConfig(),
    backbone: FrozenBackbone | None = None,
) -> tuple[ProbeHead, FrozenBackbone, list[float]]:
    """Fit the probe head on frozen backbone features.

    Hidden states are precomputed once per video (the backbone never changes),
    then the head takes one optimizer step per video per epoch in a seeded
    shuffle order.  Returns the head, the backbone and per-epoch mean losses.
    """
    if not dataset:
        raise ValueError("empty probe dataset")
    if backbone is None:
        backbone = FrozenBackbone(config)
    hiddens = [backbone.frame_hiddens(video) for video, _ in dataset]
    targets = [torch.as_tensor(truth.values, dtype=torch.float32) for _, truth in dataset]

    head = ProbeHead(config.hidden_dim, config.probe_width, config.rng_seed)
    optimizer = torch.optim.Adam(head.parameters(), lr=config.learning_rate)
    order_rng = np.random.default_rng(config.rng_seed)

    history: list[float] = []
    for _ in range(config.epochs):
        order = order_rng.permutation(len(dataset))
        total = 0.0
        for i in order:
            optimizer.zero_grad()
            loss = emo_loss(head(hiddens[i]), targets[i], config.lam)
            loss.backward()
            optimizer.step()
            total += float(loss.detach())
        history.append(total / len(dataset))
    return head, backbone, history
