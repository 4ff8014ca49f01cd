"""Pseudo-video rendering: feature streams with a linearly recoverable VA signal."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arcs import AffectTrajectory, NarrativeArc

VECTORS_PER_FRAME = 4
FEATURE_DIM = 32
NOISE_SIGMA = 0.1

_COUPLING_SALT = 0x76613332
_BASIS_SALT = 0x7363656E
_NOISE_SALT = 0x6E6F6973


@dataclass
class PseudoVideo:
    """1 Hz stream of frame feature blocks plus its ground-truth VA curve."""

    frames: np.ndarray  # (T, VECTORS_PER_FRAME, FEATURE_DIM) float64
    ground_truth: AffectTrajectory
    scene_id: int
    rng_seed: int = 0

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 3:
            raise ValueError(f"frames must be (T, M, D), got {self.frames.shape}")
        if self.frames.shape[0] != len(self.ground_truth):
            raise ValueError(
                f"{self.frames.shape[0]} frames vs {len(self.ground_truth)} truth points"
            )

    def __len__(self) -> int:
        return self.frames.shape[0]

    @property
    def duration_s(self) -> int:
        return len(self)

    def slice_seconds(self, start: int, stop: int) -> "PseudoVideo":
        return PseudoVideo(
            self.frames[start:stop].copy(),
            self.ground_truth.slice_seconds(start, stop),
            self.scene_id,
            self.rng_seed,
        )


def va_coupling() -> np.ndarray:
    """Fixed (FEATURE_DIM, 2) map from VA to feature space, shared by all scenes."""
    rng = np.random.default_rng(_COUPLING_SALT)
    return rng.normal(0.0, 0.7, size=(FEATURE_DIM, 2))


def scene_basis(scene_id: int) -> np.ndarray:
    rng = np.random.default_rng([_BASIS_SALT, scene_id])
    return rng.normal(0.0, 1.0, size=(VECTORS_PER_FRAME, FEATURE_DIM))


def render_pseudo_video(arc: NarrativeArc, scene_id: int, rng_seed: int) -> PseudoVideo:
    """Render arc -> features as scene basis + coupling @ VA + Gaussian noise.

    Noise depends only on (rng_seed, scene_id), so two renders that differ
    only in the arc differ exactly by the coupled VA term.
    """
    truth = arc.sample_1hz()
    t = len(truth)
    signal = truth.values @ va_coupling().T  # (T, FEATURE_DIM)
    noise = np.random.default_rng([_NOISE_SALT, rng_seed, scene_id]).normal(
        0.0, NOISE_SIGMA, size=(t, VECTORS_PER_FRAME, FEATURE_DIM)
    )
    frames = scene_basis(scene_id)[None, :, :] + signal[:, None, :] + noise
    return PseudoVideo(frames, truth, scene_id, rng_seed)
