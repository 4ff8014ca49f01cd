"""Synthetic paired-corpus world: arcs, grammar, pseudo-video, clips, formats."""

from .arcs import ARCHETYPES, AffectTrajectory, NarrativeArc, make_arc
from .codec import CodecSpec, DelayDecodeError, DelayedGrid, TokenGrid, apply_delay, remove_delay
from .clips import ClipRecord, SourceStream, segment_clips, segment_video, silence_filter
from .grammar import DecodedAffect, grammar_emit, oracle_decode
from .video import PseudoVideo, render_pseudo_video

__all__ = [
    "ARCHETYPES",
    "AffectTrajectory",
    "ClipRecord",
    "CodecSpec",
    "DecodedAffect",
    "DelayDecodeError",
    "DelayedGrid",
    "NarrativeArc",
    "PseudoVideo",
    "SourceStream",
    "TokenGrid",
    "apply_delay",
    "grammar_emit",
    "make_arc",
    "oracle_decode",
    "remove_delay",
    "render_pseudo_video",
    "segment_clips",
    "segment_video",
    "silence_filter",
]
