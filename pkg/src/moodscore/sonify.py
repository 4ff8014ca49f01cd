"""Optional sine-bank rendering of codebook-0 tokens to a mono WAV file.

Strictly for human inspection; no metric reads audio.
"""

from __future__ import annotations

import wave
from pathlib import Path

import numpy as np

from .world.codec import TokenGrid

SAMPLE_RATE = 16_000
TOKEN_SECONDS = 0.1
_BASE_FREQ = 220.0
_FADE = int(0.005 * SAMPLE_RATE)


def token_frequency(token_id: int) -> float:
    """Silence maps to 0 Hz; other ids climb a semitone ladder from 220 Hz."""
    if token_id == 0:
        return 0.0
    return _BASE_FREQ * 2.0 ** ((token_id - 1) / 12.0)


def sonify(tokens: TokenGrid, path: Path | str, gain: float = 0.6) -> None:
    n_samples = int(TOKEN_SECONDS * SAMPLE_RATE)
    t = np.arange(n_samples) / SAMPLE_RATE
    envelope = np.ones(n_samples)
    envelope[:_FADE] = np.linspace(0.0, 1.0, _FADE)
    envelope[-_FADE:] = np.linspace(1.0, 0.0, _FADE)

    chunks = []
    for token in tokens.tokens[:, 0]:
        freq = token_frequency(int(token))
        chunk = np.sin(2.0 * np.pi * freq * t) * envelope if freq > 0 else np.zeros(n_samples)
        chunks.append(chunk)
    signal = np.concatenate(chunks) * gain
    pcm = np.clip(signal * 32767.0, -32768, 32767).astype("<i2")

    with wave.open(str(path), "wb") as handle:
        handle.setnchannels(1)
        handle.setsampwidth(2)
        handle.setframerate(SAMPLE_RATE)
        handle.writeframes(pcm.tobytes())
