"""Global style anchor: schema, rule-based conceptualizer, and embedding encoder.

The anchor is computed once per video and held fixed for the whole
generation; its four fields index small per-field vocabularies.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
import torch
import torch.nn as nn

if TYPE_CHECKING:
    from .world.video import PseudoVideo

FIELDS = ("genre", "instrumentation", "mood", "pacing")
FIELD_VOCAB_SIZE = 8

VOCAB: dict[str, tuple[str, ...]] = {
    "genre": ("ambient", "classical", "electronic", "folk", "jazz", "lofi", "orchestral", "rock"),
    "instrumentation": ("strings", "piano", "synth", "guitar", "brass", "woodwind", "percussion", "choir"),
    # mood ordered dark -> bright, pacing ordered slow -> fast; the
    # conceptualizer's bucketing relies on these orderings.
    "mood": ("bleak", "somber", "tense", "neutral", "warm", "hopeful", "bright", "euphoric"),
    "pacing": ("glacial", "slow", "relaxed", "steady", "moving", "brisk", "fast", "frantic"),
}


@dataclass(frozen=True)
class SemanticAnchor:
    """Four vocabulary ids describing the global musical identity."""

    genre: int
    instrumentation: int
    mood: int
    pacing: int

    def __post_init__(self):
        for name in FIELDS:
            value = getattr(self, name)
            if not 0 <= value < FIELD_VOCAB_SIZE:
                raise ValueError(f"{name} id {value} outside vocabulary [0, {FIELD_VOCAB_SIZE})")

    def field_ids(self) -> tuple[int, int, int, int]:
        return (self.genre, self.instrumentation, self.mood, self.pacing)

    def to_strings(self) -> dict[str, str]:
        return {name: VOCAB[name][getattr(self, name)] for name in FIELDS}

    @classmethod
    def from_strings(cls, record: dict[str, str]) -> "SemanticAnchor":
        ids = {}
        for name in FIELDS:
            if name not in record:
                raise ValueError(f"anchor record missing field {name!r}")
            try:
                ids[name] = VOCAB[name].index(record[name])
            except ValueError:
                raise ValueError(f"unknown {name} label {record[name]!r}") from None
        return cls(**ids)


def _bucket(x: float) -> int:
    return min(FIELD_VOCAB_SIZE - 1, max(0, int((x + 1.0) / 2.0 * FIELD_VOCAB_SIZE)))


def conceptualize(video: "PseudoVideo", num_keyframes: int = 8) -> SemanticAnchor:
    """Map a video to its anchor via uniform keyframes and fixed VA bucketing.

    Mean keyframe valence picks the mood bucket, mean arousal the pacing
    bucket; genre and instrumentation derive from the scene identity.
    """
    if len(video) == 0:
        raise ValueError("cannot conceptualize an empty video")
    idx = np.unique(np.round(np.linspace(0, len(video) - 1, num_keyframes)).astype(int))
    mean_v, mean_a = video.ground_truth.values[idx].mean(axis=0)
    return SemanticAnchor(
        genre=video.scene_id % FIELD_VOCAB_SIZE,
        instrumentation=(video.scene_id // FIELD_VOCAB_SIZE) % FIELD_VOCAB_SIZE,
        mood=_bucket(float(mean_v)),
        pacing=_bucket(float(mean_a)),
    )


class AnchorEncoder(nn.Module):
    """Embed the four anchor fields into cross-attention memory rows.

    Row f depends only on field f's id plus a per-field position offset, so
    anchors differing in one field produce embeddings differing in one row.
    """

    def __init__(self, dim: int, rng_seed: int = 0):
        super().__init__()
        self.dim = dim
        torch.manual_seed(0x414E4348 ^ rng_seed)
        self.field_tables = nn.Embedding(len(FIELDS) * FIELD_VOCAB_SIZE, dim)
        self.field_position = nn.Embedding(len(FIELDS), dim)

    def forward(self, anchor: SemanticAnchor) -> torch.Tensor:
        ids = torch.tensor(
            [f * FIELD_VOCAB_SIZE + v for f, v in enumerate(anchor.field_ids())],
            dtype=torch.long,
        )
        positions = torch.arange(len(FIELDS))
        return self.field_tables(ids) + self.field_position(positions)

    def encode_batch(self, anchors: list[SemanticAnchor]) -> torch.Tensor:
        return torch.stack([self(a) for a in anchors])


def encode_anchor(anchor: SemanticAnchor, encoder: AnchorEncoder) -> np.ndarray:
    """Deterministic (4, dim) embedding of an anchor."""
    with torch.no_grad():
        return encoder(anchor).numpy().copy()
