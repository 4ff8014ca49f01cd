"""Valence-arousal narrative arcs and their 1 Hz trajectory form."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ARCHETYPES = ("rise", "fall", "rise-fall", "plateau", "random-walk")

_ARC_SALT = 0x41524321


@dataclass
class AffectTrajectory:
    """Per-second (valence, arousal) samples, each coordinate in [-1, 1]."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[1] != 2:
            raise ValueError(f"trajectory must be (T, 2), got {self.values.shape}")
        if self.values.size and not np.all(np.isfinite(self.values)):
            raise ValueError("trajectory contains non-finite values")
        if self.values.size and np.max(np.abs(self.values)) > 1.0 + 1e-9:
            raise ValueError("trajectory coordinate outside [-1, 1]")

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def valence(self) -> np.ndarray:
        return self.values[:, 0]

    @property
    def arousal(self) -> np.ndarray:
        return self.values[:, 1]

    def slice_seconds(self, start: int, stop: int) -> "AffectTrajectory":
        return AffectTrajectory(self.values[start:stop].copy())


@dataclass
class NarrativeArc:
    """Continuous piecewise-linear VA curve over [0, total_duration_s].

    Segments are (duration_s, start_va, end_va); consecutive segments share
    their endpoint, so the curve has no jumps.
    """

    segments: list[tuple[float, tuple[float, float], tuple[float, float]]]
    total_duration_s: float

    def __post_init__(self):
        if not self.segments:
            raise ValueError("arc needs at least one segment")
        total = sum(seg[0] for seg in self.segments)
        if not math.isclose(total, self.total_duration_s, rel_tol=0, abs_tol=1e-6):
            raise ValueError(f"segment durations sum to {total}, expected {self.total_duration_s}")
        for dur, start, end in self.segments:
            if dur <= 0:
                raise ValueError("segment duration must be positive")
            for point in (start, end):
                if max(abs(point[0]), abs(point[1])) > 1.0 + 1e-9:
                    raise ValueError(f"VA point {point} outside [-1, 1]^2")
        for (_, _, prev_end), (_, cur_start, _) in zip(self.segments, self.segments[1:]):
            if prev_end != cur_start:
                raise ValueError("consecutive segments must share their endpoint")

    def value_at(self, t: float) -> tuple[float, float]:
        """Evaluate the curve at time t in [0, total_duration_s]."""
        if t < -1e-9 or t > self.total_duration_s + 1e-9:
            raise ValueError(f"t={t} outside [0, {self.total_duration_s}]")
        elapsed = 0.0
        for i, (dur, start, end) in enumerate(self.segments):
            if t <= elapsed + dur or i == len(self.segments) - 1:
                frac = min(max((t - elapsed) / dur, 0.0), 1.0)
                return (
                    start[0] + frac * (end[0] - start[0]),
                    start[1] + frac * (end[1] - start[1]),
                )
            elapsed += dur
        raise AssertionError("unreachable")

    def sample_1hz(self) -> AffectTrajectory:
        """Sample at integer seconds 0 .. total_duration_s - 1."""
        n = int(round(self.total_duration_s))
        vals = np.array([self.value_at(float(t)) for t in range(n)], dtype=np.float64)
        return AffectTrajectory(vals)


def _from_waypoints(times: np.ndarray, points: np.ndarray, total: float) -> NarrativeArc:
    segments = []
    for i in range(len(times) - 1):
        segments.append(
            (
                float(times[i + 1] - times[i]),
                (float(points[i, 0]), float(points[i, 1])),
                (float(points[i + 1, 0]), float(points[i + 1, 1])),
            )
        )
    return NarrativeArc(segments, total)


def _free_walk(rng: np.random.Generator, n: int, step: float = 0.45) -> np.ndarray:
    path = np.empty(n)
    path[0] = rng.uniform(-0.8, 0.8)
    for i in range(1, n):
        path[i] = np.clip(path[i - 1] + rng.normal(0.0, step), -0.9, 0.9)
    return path


def make_arc(rng_seed: int, duration_s: float, archetype: str) -> NarrativeArc:
    """Build a seeded narrative arc of the given archetype.

    Archetypes shape the arousal (tension) axis: rise = monotone
    nondecreasing, fall = nonincreasing, rise-fall = interior peak, plateau =
    constant, random-walk = free.  The tension archetypes hold valence at a
    fixed mood; only random-walk moves both axes, and plateau is constant on
    both.
    """
    if duration_s < 10:
        raise ValueError(f"duration_s must be >= 10, got {duration_s}")
    if archetype not in ARCHETYPES:
        raise ValueError(f"unknown archetype {archetype!r}; expected one of {ARCHETYPES}")

    rng = np.random.default_rng([_ARC_SALT, rng_seed, ARCHETYPES.index(archetype)])
    duration = float(duration_s)

    if archetype == "plateau":
        point = tuple(rng.uniform(-0.95, 0.95, size=2))
        return NarrativeArc([(duration, point, point)], duration)

    n_seg = int(max(2, min(16, duration // 5)))
    times = np.linspace(0.0, duration, n_seg + 1)
    if archetype == "random-walk":
        valence = _free_walk(rng, n_seg + 1)
    else:
        valence = np.full(n_seg + 1, rng.uniform(-0.95, 0.95))

    if archetype == "rise":
        lo = rng.uniform(-0.9, -0.2)
        hi = rng.uniform(0.3, 0.9)
        arousal = np.sort(np.concatenate([[lo, hi], rng.uniform(lo, hi, n_seg - 1)]))
    elif archetype == "fall":
        lo = rng.uniform(-0.9, -0.2)
        hi = rng.uniform(0.3, 0.9)
        arousal = np.sort(np.concatenate([[lo, hi], rng.uniform(lo, hi, n_seg - 1)]))[::-1]
    elif archetype == "rise-fall":
        peak_idx = int(rng.integers(1, n_seg))
        peak = rng.uniform(0.4, 0.9)
        start = rng.uniform(-0.9, peak - 0.3)
        end = rng.uniform(-0.9, peak - 0.3)
        up = np.sort(np.concatenate([[start], rng.uniform(start, peak, peak_idx - 1), [peak]]))
        down = np.sort(np.concatenate([[peak, end], rng.uniform(end, peak, n_seg - peak_idx - 1)]))[::-1]
        arousal = np.concatenate([up, down[1:]])
    else:  # random-walk
        arousal = _free_walk(rng, n_seg + 1)

    points = np.stack([valence, np.asarray(arousal, dtype=np.float64)], axis=1)
    return _from_waypoints(times, points, duration)
