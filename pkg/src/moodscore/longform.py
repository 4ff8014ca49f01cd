"""Long-form inference: window planning, overlapped trajectory extraction with
crossfade merging, and prefix-prompted acoustic continuation under a single
stationary anchor."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from .adapter import ControlAdapter, control_signal
from .anchor import AnchorEncoder, SemanticAnchor, conceptualize
from .decoder import AcousticDecoder, InjectionGates, SamplerConfig, sample
from .probe import FrozenBackbone, ProbeHead, predict_trajectory
from .world.arcs import AffectTrajectory
from .world.codec import CodecSpec, TokenGrid
from .world.video import PseudoVideo


@dataclass(frozen=True)
class WindowPlan:
    window_s: int
    overlap_s: int
    prefix_s: int
    windows: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if not 0 <= self.overlap_s < self.window_s:
            raise ValueError(f"overlap {self.overlap_s} must satisfy 0 <= O < W={self.window_s}")
        if not 0 < self.prefix_s <= self.overlap_s and not (
            self.overlap_s == 0 and self.prefix_s > 0
        ):
            raise ValueError(f"prefix {self.prefix_s} must satisfy 0 < P <= O={self.overlap_s}")

    @property
    def duration_s(self) -> int:
        return self.windows[-1][1]


def plan_windows(
    duration_s: int, window_s: int = 30, overlap_s: int = 15, prefix_s: int = 5
) -> WindowPlan:
    """Windows start every window_s - overlap_s seconds; the last is clipped."""
    if duration_s < 1:
        raise ValueError("duration_s must be >= 1")
    if not 0 <= overlap_s < window_s:
        raise ValueError(f"need 0 <= overlap ({overlap_s}) < window ({window_s})")
    stride = window_s - overlap_s
    windows = []
    start = 0
    while True:
        end = min(start + window_s, duration_s)
        windows.append((start, end))
        if end >= duration_s:
            break
        start += stride
    return WindowPlan(window_s, overlap_s, prefix_s, tuple(windows))


def merge_window_predictions(
    preds: list[np.ndarray], windows: tuple[tuple[int, int], ...], duration_s: int
) -> np.ndarray:
    """Blend overlapped per-window curves into one (duration_s, 2) curve.

    In each overlap the previous and current windows crossfade linearly with
    weights (j+1)/(O+1), so two constant predictions trace a straight line
    from one to the other, including the samples on either side.
    """
    merged = np.zeros((duration_s, 2))
    prev_end = 0
    for (start, end), pred in zip(windows, preds):
        if pred.shape[0] != end - start:
            raise ValueError(f"prediction rows {pred.shape[0]} != window span {end - start}")
        if start >= prev_end:
            merged[start:end] = pred
        else:
            overlap = prev_end - start
            w = (np.arange(overlap) + 1.0) / (overlap + 1.0)
            merged[start:prev_end] = (1.0 - w[:, None]) * merged[start:prev_end] + w[
                :, None
            ] * pred[:overlap]
            merged[prev_end:end] = pred[overlap:]
        prev_end = end
    return merged


def extract_trajectory_longform(
    video: PseudoVideo,
    backbone: FrozenBackbone,
    head: ProbeHead,
    plan: WindowPlan,
    instruction_id: int = 0,
) -> AffectTrajectory:
    """Probe each window independently (window-relative time markers), then
    crossfade-merge the overlapped predictions into one continuous curve."""
    if plan.duration_s != len(video):
        raise ValueError(f"plan covers {plan.duration_s}s but video has {len(video)}s")
    preds = [
        predict_trajectory(video.slice_seconds(start, end), backbone, head, instruction_id).values
        for start, end in plan.windows
    ]
    merged = merge_window_predictions(preds, plan.windows, len(video))
    return AffectTrajectory(np.clip(merged, -1.0, 1.0))


@dataclass
class LongformResult:
    tokens: TokenGrid
    window_bounds: tuple[tuple[int, int], ...]
    trajectory: AffectTrajectory
    anchor: SemanticAnchor
    seam_seconds: tuple[int, ...]
    prefixes: list[np.ndarray] = field(default_factory=list)


@dataclass
class GenerationModels:
    """Everything the long-form engine needs, trained elsewhere."""

    backbone: FrozenBackbone
    head: ProbeHead
    anchor_encoder: AnchorEncoder
    decoder: AcousticDecoder
    adapter: ControlAdapter
    gates: InjectionGates
    codec: CodecSpec


def generate_longform(
    video: PseudoVideo,
    models: GenerationModels,
    plan: WindowPlan,
    sampler: SamplerConfig,
    use_prefix: bool = True,
    trajectory: AffectTrajectory | None = None,
    conditioned: bool = True,
) -> LongformResult:
    """Window-by-window acoustic continuation.

    The anchor is conceptualized and encoded exactly once.  Window i >= 1 is
    prompted with the final prefix_s seconds of the tokens emitted so far
    (unless use_prefix=False, the independent-window baseline), and only the
    non-prefix continuation is appended, so every acoustic step is generated
    once.  Control rows come from one adapter pass over the merged trajectory.
    """
    if plan.duration_s != len(video):
        raise ValueError(f"plan covers {plan.duration_s}s but video has {len(video)}s")
    codec = models.codec
    tps = codec.tokens_per_second

    anchor = conceptualize(video)
    with torch.no_grad():
        memory = models.anchor_encoder(anchor).detach()

    if trajectory is None:
        trajectory = extract_trajectory_longform(video, models.backbone, models.head, plan)
    if len(trajectory) != len(video):
        raise ValueError(f"trajectory of {len(trajectory)}s does not match {len(video)}s video")
    control_full = (
        control_signal(trajectory, len(video) * tps, models.adapter) if conditioned else None
    )

    pieces: list[np.ndarray] = []
    prefixes: list[np.ndarray] = []
    emitted = 0  # seconds generated so far
    for i, (start, end) in enumerate(plan.windows):
        span_start = emitted
        prefix = None
        if use_prefix and i > 0:
            prefix_steps = min(plan.prefix_s, span_start) * tps
            done = np.concatenate(pieces)
            prefix = TokenGrid(done[len(done) - prefix_steps :], codec)
            prefixes.append(prefix.tokens.copy())
        control = None
        if control_full is not None:
            lo = (span_start - (len(prefix) // tps if prefix is not None else 0)) * tps
            control = control_full[lo : end * tps]
        piece = sample(
            models.decoder,
            memory,
            control,
            prefix,
            (end - span_start) * tps,
            SamplerConfig(sampler.temperature, sampler.top_k, sampler.rng_seed + i),
            codec,
            models.gates if conditioned else None,
        )
        pieces.append(piece.tokens)
        emitted = end

    tokens = TokenGrid(np.concatenate(pieces), codec)
    seams = tuple(end for _, end in plan.windows[:-1])
    return LongformResult(tokens, plan.windows, trajectory, anchor, seams, prefixes)


def seam_discontinuity(
    tokens: TokenGrid, seam_seconds: tuple[int, ...], side_s: int = 5
) -> np.ndarray:
    """Mean absolute oracle-VA change across each seam, NaN when undefined."""
    from .world.grammar import oracle_decode

    tps = tokens.codec.tokens_per_second
    scores = np.full(len(seam_seconds), np.nan)
    for i, seam in enumerate(seam_seconds):
        before = tokens.slice_steps((seam - side_s) * tps, seam * tps)
        after = tokens.slice_steps(seam * tps, (seam + side_s) * tps)
        if len(before) == 0 or len(after) == 0:
            continue
        db = oracle_decode(before, side_s)
        da = oracle_decode(after, side_s)
        if db.valid[0] and da.valid[0]:
            scores[i] = 0.5 * (
                abs(db.valence[0] - da.valence[0]) + abs(db.arousal[0] - da.arousal[0])
            )
    return scores
