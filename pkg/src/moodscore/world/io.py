"""Versioned on-disk formats for clips, videos and corpora.

All writers are byte-deterministic: fixed float formatting, sorted JSON keys,
explicit little-endian binary layouts.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..anchor import VOCAB, SemanticAnchor
from .arcs import AffectTrajectory
from .clips import ClipRecord
from .codec import CodecSpec, TokenGrid
from .video import PseudoVideo

TOKENS_MAGIC = "TOKENS v1"
FRAMES_MAGIC = "FRAMES v1"


class FormatError(ValueError):
    """Raised when an on-disk artifact does not match its declared format."""


# -- tokens.bin ---------------------------------------------------------------


def write_tokens_bin(path: Path | str, grid: TokenGrid) -> None:
    t, k = grid.tokens.shape
    if grid.codec.vocab_size > np.iinfo(np.uint16).max:
        raise FormatError("vocab too large for u16 token storage")
    header = f"{TOKENS_MAGIC} {t} {k} {grid.codec.vocab_size}\n".encode("ascii")
    payload = grid.tokens.astype("<u2").tobytes(order="C")
    Path(path).write_bytes(header + payload)


def read_tokens_bin(path: Path | str, codec: CodecSpec | None = None) -> TokenGrid:
    raw = Path(path).read_bytes()
    nl = raw.find(b"\n")
    if nl < 0:
        raise FormatError(f"{path}: missing header line")
    parts = raw[:nl].decode("ascii", errors="replace").split()
    if len(parts) != 5 or " ".join(parts[:2]) != TOKENS_MAGIC:
        raise FormatError(f"{path}: bad header {raw[:nl]!r}")
    t, k, n = (int(p) for p in parts[2:])
    body = raw[nl + 1 :]
    if len(body) != t * k * 2:
        raise FormatError(f"{path}: payload is {len(body)} bytes, expected {t * k * 2}")
    tokens = np.frombuffer(body, dtype="<u2").reshape(t, k).astype(np.int64)
    if codec is None:
        codec = CodecSpec(num_codebooks=k, vocab_size=n)
    elif codec.num_codebooks != k or codec.vocab_size != n:
        raise FormatError(f"{path}: header {k}/{n} disagrees with codec {codec}")
    return TokenGrid(tokens, codec)


# -- va.csv -------------------------------------------------------------------


def write_va_csv(path: Path | str, traj: AffectTrajectory) -> None:
    lines = ["t_s,valence,arousal"]
    for t, (v, a) in enumerate(traj.values):
        lines.append(f"{t},{v:.6f},{a:.6f}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_va_csv(path: Path | str) -> AffectTrajectory:
    lines = Path(path).read_text(encoding="utf-8").strip().splitlines()
    if not lines or lines[0] != "t_s,valence,arousal":
        raise FormatError(f"{path}: bad va.csv header")
    vals = []
    for line in lines[1:]:
        cells = line.split(",")
        if len(cells) != 3:
            raise FormatError(f"{path}: bad row {line!r}")
        vals.append((float(cells[1]), float(cells[2])))
    return AffectTrajectory(np.array(vals, dtype=np.float64).reshape(-1, 2))


# -- frames.bin ---------------------------------------------------------------


def write_frames_bin(path: Path | str, frames: np.ndarray) -> None:
    t, m, d = frames.shape
    header = f"{FRAMES_MAGIC} {t} {m} {d}\n".encode("ascii")
    Path(path).write_bytes(header + frames.astype("<f4").tobytes(order="C"))


def read_frames_bin(path: Path | str) -> np.ndarray:
    raw = Path(path).read_bytes()
    nl = raw.find(b"\n")
    parts = raw[:nl].decode("ascii", errors="replace").split()
    if nl < 0 or len(parts) != 5 or " ".join(parts[:2]) != FRAMES_MAGIC:
        raise FormatError(f"{path}: bad frames header")
    t, m, d = (int(p) for p in parts[2:])
    body = raw[nl + 1 :]
    if len(body) != t * m * d * 4:
        raise FormatError(f"{path}: payload is {len(body)} bytes, expected {t * m * d * 4}")
    return np.frombuffer(body, dtype="<f4").reshape(t, m, d).astype(np.float64)


# -- json sidecars ------------------------------------------------------------


def _write_json(path: Path | str, obj: dict) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _read_json(path: Path | str) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


# -- clip / video directories -------------------------------------------------


def write_clip_dir(path: Path | str, clip: ClipRecord) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    write_va_csv(path / "va.csv", clip.va_curve)
    write_tokens_bin(path / "tokens.bin", clip.tokens)
    _write_json(path / "anchor.json", clip.anchor.to_strings())
    _write_json(
        path / "meta.json",
        {"source_id": clip.source_id, "clip_start_s": clip.clip_start_s, "seed": clip.rng_seed},
    )


def read_clip_dir(path: Path | str, codec: CodecSpec | None = None) -> ClipRecord:
    path = Path(path)
    tokens = read_tokens_bin(path / "tokens.bin", codec)
    meta = _read_json(path / "meta.json")
    return ClipRecord(
        va_curve=read_va_csv(path / "va.csv"),
        tokens=tokens,
        anchor=SemanticAnchor.from_strings(_read_json(path / "anchor.json")),
        source_id=int(meta["source_id"]),
        clip_start_s=int(meta["clip_start_s"]),
        rng_seed=int(meta["seed"]),
    )


def write_video_dir(path: Path | str, video: PseudoVideo, archetype: str | None = None) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    write_frames_bin(path / "frames.bin", video.frames)
    write_va_csv(path / "va.csv", video.ground_truth)
    meta = {"scene_id": video.scene_id, "seed": video.rng_seed}
    if archetype is not None:
        meta["archetype"] = archetype
    _write_json(path / "meta.json", meta)


def read_video_dir(path: Path | str) -> PseudoVideo:
    path = Path(path)
    meta = _read_json(path / "meta.json")
    return PseudoVideo(
        frames=read_frames_bin(path / "frames.bin"),
        ground_truth=read_va_csv(path / "va.csv"),
        scene_id=int(meta["scene_id"]),
        rng_seed=int(meta["seed"]),
    )


# -- corpus directories -------------------------------------------------------


def write_music_corpus(root: Path | str, clips: list[ClipRecord], codec: CodecSpec) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for i, clip in enumerate(clips):
        write_clip_dir(root / f"clip_{i:06d}", clip)
    _write_json(root / "vocab.json", {k: list(v) for k, v in VOCAB.items()})
    _write_json(
        root / "manifest.json",
        {
            "kind": "music",
            "clips": len(clips),
            "codec": {
                "num_codebooks": codec.num_codebooks,
                "vocab_size": codec.vocab_size,
                "tokens_per_second": codec.tokens_per_second,
                "silence_token": codec.silence_token,
            },
        },
    )


def read_music_corpus(root: Path | str) -> tuple[list[ClipRecord], CodecSpec]:
    root = Path(root)
    manifest = _read_json(root / "manifest.json")
    codec = CodecSpec(**manifest["codec"])
    dirs = sorted(p for p in root.iterdir() if p.is_dir() and p.name.startswith("clip_"))
    if not dirs:
        raise FormatError(f"{root}: corpus contains no clips")
    return [read_clip_dir(p, codec) for p in dirs], codec


def write_video_corpus(root: Path | str, videos: list[PseudoVideo]) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for i, video in enumerate(videos):
        write_video_dir(root / f"vid_{i:06d}", video)
    _write_json(root / "manifest.json", {"kind": "video", "videos": len(videos)})


def read_video_corpus(root: Path | str) -> list[PseudoVideo]:
    root = Path(root)
    dirs = sorted(p for p in root.iterdir() if p.is_dir() and p.name.startswith("vid_"))
    if not dirs:
        raise FormatError(f"{root}: corpus contains no videos")
    return [read_video_dir(p) for p in dirs]
