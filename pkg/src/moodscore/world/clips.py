"""Stream segmentation into overlapping clips and the silence filter."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

from ..anchor import SemanticAnchor
from .arcs import AffectTrajectory
from .codec import TokenGrid
from .video import PseudoVideo

SILENCE_RATIO_LIMIT = 0.40


@dataclass
class SourceStream:
    """A full paired media stream before segmentation."""

    va: AffectTrajectory
    tokens: TokenGrid
    anchor: SemanticAnchor
    source_id: int
    rng_seed: int = 0

    def __post_init__(self):
        expected = len(self.va) * self.tokens.codec.tokens_per_second
        if len(self.tokens) != expected:
            raise ValueError(
                f"token length {len(self.tokens)} != trajectory seconds x rate {expected}"
            )

    @property
    def duration_s(self) -> int:
        return len(self.va)


@dataclass
class ClipRecord:
    """A clip-length slice of a stream, carrying its VA curve, tokens and anchor."""

    va_curve: AffectTrajectory
    tokens: TokenGrid
    anchor: SemanticAnchor
    source_id: int
    clip_start_s: int
    rng_seed: int = 0

    def __post_init__(self):
        expected = len(self.va_curve) * self.tokens.codec.tokens_per_second
        if len(self.tokens) != expected:
            raise ValueError(
                f"token length {len(self.tokens)} != trajectory seconds x rate {expected}"
            )


def clip_starts(duration_s: int, clip_len_s: int, hop_s: int) -> list[int]:
    if clip_len_s < 1 or hop_s < 1:
        raise ValueError("clip_len_s and hop_s must be positive")
    starts = []
    start = 0
    while start + clip_len_s <= duration_s:
        starts.append(start)
        start += hop_s
    return starts


def segment_clips(stream: SourceStream, clip_len_s: int = 30, hop_s: int = 15) -> list[ClipRecord]:
    """Cut a stream into clip_len_s clips every hop_s seconds.

    A stream shorter than one clip yields no clips (with a warning).
    """
    starts = clip_starts(stream.duration_s, clip_len_s, hop_s)
    if not starts:
        warnings.warn(
            f"stream {stream.source_id} shorter than {clip_len_s}s; no clips emitted",
            stacklevel=2,
        )
        return []
    tps = stream.tokens.codec.tokens_per_second
    return [
        ClipRecord(
            va_curve=stream.va.slice_seconds(s, s + clip_len_s),
            tokens=stream.tokens.slice_steps(s * tps, (s + clip_len_s) * tps),
            anchor=stream.anchor,
            source_id=stream.source_id,
            clip_start_s=s,
            rng_seed=stream.rng_seed,
        )
        for s in starts
    ]


def segment_video(video: PseudoVideo, clip_len_s: int = 30, hop_s: int = 15) -> list[PseudoVideo]:
    """Segment a pseudo-video the same way clips are cut from token streams."""
    starts = clip_starts(len(video), clip_len_s, hop_s)
    if not starts:
        warnings.warn(
            f"video scene {video.scene_id} shorter than {clip_len_s}s; no clips emitted",
            stacklevel=2,
        )
        return []
    return [video.slice_seconds(s, s + clip_len_s) for s in starts]


def silence_filter(clips: list[ClipRecord]) -> list[ClipRecord]:
    """Drop clips whose codebook-0 silence ratio strictly exceeds the 40% limit."""
    return [c for c in clips if c.tokens.silence_ratio() <= SILENCE_RATIO_LIMIT]
