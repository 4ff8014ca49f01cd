"""Discrete token codec conventions: grid containers and the codebook delay pattern."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DelayDecodeError(ValueError):
    """Raised when a delayed grid has pad tokens in illegal positions."""


@dataclass(frozen=True)
class CodecSpec:
    """Shape of the discrete acoustic token space.

    ``pad_token`` (= ``vocab_size``) is reserved for the delay pattern and is
    never a legal grid entry.
    """

    num_codebooks: int = 4
    vocab_size: int = 64
    tokens_per_second: int = 10
    silence_token: int = 0

    def __post_init__(self):
        if self.num_codebooks < 1:
            raise ValueError(f"num_codebooks must be >= 1, got {self.num_codebooks}")
        if self.vocab_size < 2:
            raise ValueError(f"vocab_size must be >= 2, got {self.vocab_size}")
        if not 0 <= self.silence_token < self.vocab_size:
            raise ValueError(
                f"silence_token {self.silence_token} outside vocab [0, {self.vocab_size})"
            )
        if self.tokens_per_second < 1:
            raise ValueError("tokens_per_second must be >= 1")

    @property
    def pad_token(self) -> int:
        return self.vocab_size

    def steps(self, duration_s: float) -> int:
        return int(round(duration_s * self.tokens_per_second))


@dataclass
class TokenGrid:
    """A (steps x codebooks) matrix of token ids, all within the codec vocab."""

    tokens: np.ndarray
    codec: CodecSpec = field(default_factory=CodecSpec)

    def __post_init__(self):
        self.tokens = np.asarray(self.tokens, dtype=np.int64)
        if self.tokens.ndim != 2:
            raise ValueError(f"token grid must be 2-D, got shape {self.tokens.shape}")
        if self.tokens.shape[1] != self.codec.num_codebooks:
            raise ValueError(
                f"grid has {self.tokens.shape[1]} codebooks, codec expects "
                f"{self.codec.num_codebooks}"
            )
        if self.tokens.size and (
            self.tokens.min() < 0 or self.tokens.max() >= self.codec.vocab_size
        ):
            raise ValueError("token id outside [0, vocab_size)")

    def __len__(self) -> int:
        return self.tokens.shape[0]

    @property
    def duration_s(self) -> float:
        return len(self) / self.codec.tokens_per_second

    def silence_ratio(self) -> float:
        """Fraction of steps whose codebook-0 entry is the silence token."""
        if len(self) == 0:
            return 0.0
        return float(np.mean(self.tokens[:, 0] == self.codec.silence_token))

    def slice_steps(self, start: int, stop: int) -> "TokenGrid":
        return TokenGrid(self.tokens[start:stop].copy(), self.codec)


@dataclass
class DelayedGrid:
    """Token grid in delayed layout: codebook k shifted right by k steps."""

    tokens: np.ndarray
    codec: CodecSpec

    def __post_init__(self):
        self.tokens = np.asarray(self.tokens, dtype=np.int64)
        if self.tokens.ndim != 2 or self.tokens.shape[1] != self.codec.num_codebooks:
            raise ValueError(f"bad delayed grid shape {self.tokens.shape}")

    def __len__(self) -> int:
        return self.tokens.shape[0]


def apply_delay(grid: TokenGrid, pad_token: int | None = None) -> DelayedGrid:
    """Stagger codebook k by k steps so coarse codes precede fine ones.

    Output length is T + K - 1; vacated positions carry the pad token.
    """
    codec = grid.codec
    pad = codec.pad_token if pad_token is None else pad_token
    if pad < codec.vocab_size:
        raise ValueError(f"pad token {pad} collides with the codec vocab")
    t, k = grid.tokens.shape
    out = np.full((t + k - 1, k), pad, dtype=np.int64)
    for cb in range(k):
        out[cb : cb + t, cb] = grid.tokens[:, cb]
    return DelayedGrid(out, codec)


def remove_delay(delayed: DelayedGrid, pad_token: int | None = None) -> TokenGrid:
    """Invert :func:`apply_delay`, validating the triangular pad layout."""
    codec = delayed.codec
    pad = codec.pad_token if pad_token is None else pad_token
    td, k = delayed.tokens.shape
    t = td - k + 1
    if t < 1:
        raise DelayDecodeError(f"delayed grid of {td} rows too short for K={k}")
    out = np.empty((t, k), dtype=np.int64)
    for cb in range(k):
        column = delayed.tokens[:, cb]
        head, body, tail = column[:cb], column[cb : cb + t], column[cb + t :]
        if not (np.all(head == pad) and np.all(tail == pad)):
            raise DelayDecodeError(f"codebook {cb}: pad expected outside rows [{cb}, {cb + t})")
        if np.any(body == pad):
            raise DelayDecodeError(f"codebook {cb}: pad inside the payload region")
        out[:, cb] = body
    return TokenGrid(out, codec)
