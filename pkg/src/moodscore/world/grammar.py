"""The synthetic music grammar and its analytic inverse.

Codebook-0 tokens follow a run-length process whose switch rate is an affine
function of arousal and whose pool choice (major vs minor ids) tracks
valence; higher codebooks are a fixed bijection of codebook 0.  Because the
map is invertible, :func:`oracle_decode` recovers a VA estimate from tokens
alone, which is what every downstream metric leans on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arcs import AffectTrajectory, NarrativeArc
from .codec import CodecSpec, TokenGrid

_GRAMMAR_SALT = 0x6D757A69

SWITCH_FLOOR = 0.05
SWITCH_SPAN = 0.90
_CODEBOOK_STRIDE = 7


def codebook_pools(codec: CodecSpec) -> tuple[np.ndarray, np.ndarray]:
    """Split the non-silence vocabulary into the major and minor pools."""
    n = codec.vocab_size
    hi_major = (n - 2) // 2 + 1
    ids = np.arange(n)
    nonsilence = ids[ids != codec.silence_token]
    major = nonsilence[(nonsilence >= 1) & (nonsilence <= hi_major)]
    minor = nonsilence[nonsilence > hi_major]
    return major, minor


def switch_probability(arousal: float) -> float:
    return SWITCH_FLOOR + SWITCH_SPAN * (arousal + 1.0) / 2.0


def arousal_from_switch_rate(rate: float) -> float:
    return float(np.clip(2.0 * (rate - SWITCH_FLOOR) / SWITCH_SPAN - 1.0, -1.0, 1.0))


def derived_codebook(c0: np.ndarray | int, k: int, vocab_size: int) -> np.ndarray | int:
    """Codebook k >= 1 as a silence-free bijection of codebook 0."""
    return 1 + ((np.asarray(c0) - 1 + _CODEBOOK_STRIDE * k) % (vocab_size - 1))


def grammar_emit(arc: NarrativeArc, codec: CodecSpec, rng_seed: int) -> TokenGrid:
    """Emit a token grid whose statistics encode the arc's VA curve.

    Per step, with probability switch_probability(arousal) the codebook-0
    token is redrawn from the major pool (probability (valence+1)/2) or the
    minor pool, excluding the current token so every redraw is a visible
    switch.  The silence token is never emitted.
    """
    major, minor = codebook_pools(codec)
    if len(major) == 0 or len(minor) == 0:
        raise ValueError(f"vocab_size {codec.vocab_size} too small for a two-pool grammar")
    rng = np.random.default_rng([_GRAMMAR_SALT, rng_seed])
    traj = arc.sample_1hz()
    tps = codec.tokens_per_second
    t_a = len(traj) * tps

    c0 = np.empty(t_a, dtype=np.int64)
    current = -1
    for step in range(t_a):
        v, a = traj.values[step // tps]
        if step == 0 or rng.random() < switch_probability(a):
            pool = major if rng.random() < (v + 1.0) / 2.0 else minor
            candidates = pool[pool != current]
            if len(candidates) == 0:
                candidates = pool
            current = int(candidates[rng.integers(len(candidates))])
        c0[step] = current

    grid = np.empty((t_a, codec.num_codebooks), dtype=np.int64)
    grid[:, 0] = c0
    for k in range(1, codec.num_codebooks):
        grid[:, k] = derived_codebook(c0, k, codec.vocab_size)
    return TokenGrid(grid, codec)


@dataclass
class DecodedAffect:
    """Per-window VA estimates from token statistics.

    ``valid[i]`` is False when window i had no usable transitions (e.g. all
    silence); its estimates are NaN.
    """

    valence: np.ndarray
    arousal: np.ndarray
    valid: np.ndarray
    window_s: int

    def __len__(self) -> int:
        return len(self.valid)


def oracle_decode(tokens: TokenGrid, window_s: int) -> DecodedAffect:
    """Invert the grammar: estimate per-window VA from codebook-0 statistics.

    Arousal comes from the observed switch rate, valence from the major-pool
    fraction; silence steps are dropped before both estimates.  Windows are
    non-overlapping; a grid shorter than one window is treated as a single
    window.
    """
    if len(tokens) == 0:
        raise ValueError("cannot decode an empty token grid")
    if window_s < 1:
        raise ValueError("window_s must be >= 1")
    codec = tokens.codec
    major, _ = codebook_pools(codec)
    major_set = np.zeros(codec.vocab_size, dtype=bool)
    major_set[major] = True

    w = window_s * codec.tokens_per_second
    n_win = max(1, len(tokens) // w)
    c0 = tokens.tokens[:, 0]

    valence = np.full(n_win, np.nan)
    arousal = np.full(n_win, np.nan)
    valid = np.zeros(n_win, dtype=bool)
    for i in range(n_win):
        chunk = c0[i * w : min((i + 1) * w, len(c0))]
        voiced = chunk[chunk != codec.silence_token]
        if len(voiced) < 2:
            continue
        switches = np.mean(voiced[1:] != voiced[:-1])
        arousal[i] = arousal_from_switch_rate(float(switches))
        valence[i] = float(np.clip(2.0 * np.mean(major_set[voiced]) - 1.0, -1.0, 1.0))
        valid[i] = True
    return DecodedAffect(valence, arousal, valid, window_s)


def decoded_to_trajectory(decoded: DecodedAffect) -> AffectTrajectory:
    """Expand window estimates to a 1 Hz trajectory (valid windows only)."""
    if not np.all(decoded.valid):
        raise ValueError("trajectory conversion requires all windows defined")
    vals = np.repeat(
        np.stack([decoded.valence, decoded.arousal], axis=1), decoded.window_s, axis=0
    )
    return AffectTrajectory(vals)
