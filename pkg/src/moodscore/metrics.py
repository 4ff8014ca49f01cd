"""Distributional and alignment metrics over token corpora.

Clips embed as interpretable per-window token statistics, so the Fréchet
machinery can be validated against closed-form univariate cases; alignment is
measured through the grammar's analytic oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .world.arcs import AffectTrajectory
from .world.codec import TokenGrid
from .world.grammar import codebook_pools, oracle_decode


class MetricError(ValueError):
    """Raised when a metric's preconditions are not met."""


STATS_PER_WINDOW = 4


def clip_embedding(tokens: TokenGrid, window_s: int = 5) -> np.ndarray:
    """Per 5s window: codebook-0 switch rate, major-pool fraction, unigram
    entropy (nats) and silence ratio, concatenated over the clip."""
    codec = tokens.codec
    w = window_s * codec.tokens_per_second
    n_win = len(tokens) // w
    if n_win < 1:
        raise MetricError(f"clip of {len(tokens)} steps shorter than one {window_s}s window")
    major, _ = codebook_pools(codec)
    major_mask = np.zeros(codec.vocab_size, dtype=bool)
    major_mask[major] = True
    c0 = tokens.tokens[:, 0]
    feats = np.empty((n_win, STATS_PER_WINDOW))
    for i in range(n_win):
        chunk = c0[i * w : (i + 1) * w]
        switches = float(np.mean(chunk[1:] != chunk[:-1]))
        major_frac = float(np.mean(major_mask[chunk]))
        counts = np.bincount(chunk, minlength=codec.vocab_size).astype(np.float64)
        probs = counts[counts > 0] / counts.sum()
        entropy = float(-(probs * np.log(probs)).sum())
        silence = float(np.mean(chunk == codec.silence_token))
        feats[i] = (switches, major_frac, entropy, silence)
    return feats.reshape(-1)


def _trace_sqrt_product(sigma_a: np.ndarray, sigma_b: np.ndarray) -> float:
    eigvals = np.linalg.eigvals(sigma_a @ sigma_b)
    if not np.all(np.isfinite(eigvals)):
        raise MetricError("eigensolve produced non-finite values")
    real = eigvals.real
    if np.any(real < -1e-8):
        raise MetricError(f"covariance product has eigenvalue {real.min():.3e} < -1e-8")
    return float(np.sqrt(np.clip(real, 0.0, None)).sum())


def frechet_distance(set_a: np.ndarray, set_b: np.ndarray) -> float:
    """Fréchet distance between Gaussians fit to the two embedding sets."""
    a = np.atleast_2d(np.asarray(set_a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(set_b, dtype=np.float64))
    if a.shape[1] != b.shape[1]:
        raise MetricError("embedding dimensions disagree")
    dim = a.shape[1]
    for name, s in (("A", a), ("B", b)):
        if s.shape[0] <= dim:
            raise MetricError(
                f"set {name} has {s.shape[0]} samples; needs more than dim {dim}"
            )
    mu_a, mu_b = a.mean(axis=0), b.mean(axis=0)
    sigma_a = np.atleast_2d(np.cov(a, rowvar=False))
    sigma_b = np.atleast_2d(np.cov(b, rowvar=False))
    diff = mu_a - mu_b
    value = float(
        diff @ diff
        + np.trace(sigma_a)
        + np.trace(sigma_b)
        - 2.0 * _trace_sqrt_product(sigma_a, sigma_b)
    )
    return value


def _unigram(tokens: list[TokenGrid], alpha: float) -> np.ndarray:
    vocab = tokens[0].codec.vocab_size
    counts = np.zeros(vocab, dtype=np.float64)
    for grid in tokens:
        counts += np.bincount(grid.tokens[:, 0], minlength=vocab)
    smoothed = counts + alpha
    return smoothed / smoothed.sum()


def kld_score(
    corpus_a: list[TokenGrid] | TokenGrid,
    corpus_b: list[TokenGrid] | TokenGrid,
    alpha: float = 1.0,
) -> float:
    """Symmetrized KL between Laplace-smoothed codebook-0 unigram distributions."""
    a = [corpus_a] if isinstance(corpus_a, TokenGrid) else list(corpus_a)
    b = [corpus_b] if isinstance(corpus_b, TokenGrid) else list(corpus_b)
    if not a or not b:
        raise MetricError("empty corpus")
    p, q = _unigram(a, alpha), _unigram(b, alpha)
    kl_pq = float(np.sum(p * np.log(p / q)))
    kl_qp = float(np.sum(q * np.log(q / p)))
    return 0.5 * kl_pq + 0.5 * kl_qp


@dataclass
class AlignmentScore:
    valence: float
    arousal: float
    n_windows: int
    valence_defined: bool = True
    arousal_defined: bool = True

    def mean(self) -> float:
        return 0.5 * (self.valence + self.arousal)


def _pearson(x: np.ndarray, y: np.ndarray) -> tuple[float, bool]:
    if np.std(x) < 1e-12 or np.std(y) < 1e-12:
        return math.nan, False
    return float(np.corrcoef(x, y)[0, 1]), True


def affect_alignment(
    generated: TokenGrid, target: AffectTrajectory, window_s: int = 5
) -> AlignmentScore:
    """Pearson correlation per VA axis between oracle-decoded windows of the
    generated tokens and the matching windows of the target curve."""
    tps = generated.codec.tokens_per_second
    n_windows = min(len(generated) // (window_s * tps), len(target) // window_s)
    if n_windows < 3:
        raise MetricError(f"need >= 3 aligned windows, got {n_windows}")
    decoded = oracle_decode(generated.slice_steps(0, n_windows * window_s * tps), window_s)
    if not decoded.valid.any():
        raise MetricError("generation is all silence; alignment undefined")
    target_means = target.values[: n_windows * window_s].reshape(n_windows, window_s, 2).mean(axis=1)
    valid = decoded.valid
    v, v_ok = _pearson(decoded.valence[valid], target_means[valid, 0])
    a, a_ok = _pearson(decoded.arousal[valid], target_means[valid, 1])
    return AlignmentScore(v, a, int(valid.sum()), v_ok, a_ok)


@dataclass
class MetricReport:
    fd: float
    kld: float
    alignment_valence: float
    alignment_arousal: float
    n_clips_gen: int
    n_clips_ref: int
    per_clip: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "fd": self.fd,
            "kld": self.kld,
            "alignment_valence": self.alignment_valence,
            "alignment_arousal": self.alignment_arousal,
            "n_clips_gen": self.n_clips_gen,
            "n_clips_ref": self.n_clips_ref,
            "per_clip": self.per_clip,
        }


def evaluate_corpora(
    gen: list[tuple[TokenGrid, AffectTrajectory]],
    ref: list[TokenGrid],
    window_s: int = 5,
) -> MetricReport:
    """Full report: FD and KLD between corpora plus per-clip affect alignment."""
    if not gen or not ref:
        raise MetricError("empty corpus")
    gen_emb = np.stack([clip_embedding(t, window_s) for t, _ in gen])
    ref_emb = np.stack([clip_embedding(t, window_s) for t in ref])
    fd = frechet_distance(gen_emb, ref_emb)
    kld = kld_score([t for t, _ in gen], ref)

    per_clip = []
    vs, ars = [], []
    for i, (tokens, target) in enumerate(gen):
        try:
            score = affect_alignment(tokens, target, window_s)
        except MetricError:
            per_clip.append({"clip": i, "valence": math.nan, "arousal": math.nan})
            continue
        per_clip.append({"clip": i, "valence": score.valence, "arousal": score.arousal})
        if score.valence_defined:
            vs.append(score.valence)
        if score.arousal_defined:
            ars.append(score.arousal)
    return MetricReport(
        fd=fd,
        kld=kld,
        alignment_valence=float(np.mean(vs)) if vs else math.nan,
        alignment_arousal=float(np.mean(ars)) if ars else math.nan,
        n_clips_gen=len(gen),
        n_clips_ref=len(ref),
        per_clip=per_clip,
    )
