"""Shared weight container: named f32 tensors with an FNV-1a payload checksum.

Layout: a UTF-8 header (``WEIGHTS v1`` line, then one ``<name> f32 <shape>``
line per tensor, then a blank line), the concatenated little-endian float32
payloads in header order, and a trailing little-endian u64 FNV-1a checksum of
the payload bytes.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
import torch.nn as nn

WEIGHTS_MAGIC = "WEIGHTS v1"

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = 0xFFFFFFFFFFFFFFFF


class WeightFormatError(ValueError):
    """Raised on malformed or corrupted weight files."""


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _U64
    return h


def save_weights(path: Path | str, tensors: dict[str, np.ndarray]) -> None:
    lines = [WEIGHTS_MAGIC]
    payloads = []
    for name, tensor in tensors.items():
        arr = np.ascontiguousarray(tensor, dtype="<f4")
        if arr.ndim == 0:
            arr = arr.reshape(1)
        shape = "x".join(str(d) for d in arr.shape)
        lines.append(f"{name} f32 {shape}")
        payloads.append(arr.tobytes(order="C"))
    payload = b"".join(payloads)
    header = ("\n".join(lines) + "\n\n").encode("utf-8")
    Path(path).write_bytes(header + payload + struct.pack("<Q", fnv1a64(payload)))


def load_weights(path: Path | str) -> dict[str, np.ndarray]:
    raw = Path(path).read_bytes()
    sep = raw.find(b"\n\n")
    if sep < 0:
        raise WeightFormatError(f"{path}: missing header terminator")
    lines = raw[:sep].decode("utf-8").splitlines()
    if not lines or lines[0] != WEIGHTS_MAGIC:
        raise WeightFormatError(f"{path}: bad magic")
    entries = []
    for line in lines[1:]:
        parts = line.split(" ")
        if len(parts) != 3 or parts[1] != "f32":
            raise WeightFormatError(f"{path}: bad header entry {line!r}")
        shape = tuple(int(d) for d in parts[2].split("x"))
        entries.append((parts[0], shape))
    body = raw[sep + 2 :]
    if len(body) < 8:
        raise WeightFormatError(f"{path}: truncated file")
    payload, tail = body[:-8], body[-8:]
    if struct.unpack("<Q", tail)[0] != fnv1a64(payload):
        raise WeightFormatError(f"{path}: checksum mismatch")
    tensors: dict[str, np.ndarray] = {}
    offset = 0
    for name, shape in entries:
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 4
        if offset + nbytes > len(payload):
            raise WeightFormatError(f"{path}: payload shorter than header declares")
        tensors[name] = np.frombuffer(payload, dtype="<f4", count=count, offset=offset).reshape(
            shape
        ).astype(np.float32)
        offset += nbytes
    if offset != len(payload):
        raise WeightFormatError(f"{path}: {len(payload) - offset} trailing payload bytes")
    return tensors


def module_tensors(module: nn.Module) -> dict[str, np.ndarray]:
    return {
        name: value.detach().cpu().numpy().astype(np.float32)
        for name, value in module.state_dict().items()
    }


def save_module(path: Path | str, module: nn.Module, prefix: str = "") -> None:
    save_weights(path, {prefix + k: v for k, v in module_tensors(module).items()})


def load_into_module(
    tensors: dict[str, np.ndarray], module: nn.Module, prefix: str = ""
) -> None:
    import torch

    state = module.state_dict()
    selected = {}
    for name in state:
        key = prefix + name
        if key not in tensors:
            raise WeightFormatError(f"missing tensor {key!r} in weight file")
        selected[name] = torch.from_numpy(
            np.ascontiguousarray(tensors[key], dtype=np.float32).reshape(tuple(state[name].shape))
        )
    module.load_state_dict(selected)


def module_checksum(module: nn.Module) -> int:
    """FNV-1a over the module's f32 payload; constant iff parameters unchanged."""
    payload = b"".join(
        np.ascontiguousarray(v, dtype="<f4").tobytes(order="C")
        for v in module_tensors(module).values()
    )
    return fnv1a64(payload)
