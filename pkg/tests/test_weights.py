import numpy as np
import pytest
import torch.nn as nn

from moodscore.weights import (
    WeightFormatError,
    fnv1a64,
    load_into_module,
    load_weights,
    module_checksum,
    module_tensors,
    save_module,
    save_weights,
)


def test_fnv1a64_known_vectors():
    # Reference values for the 64-bit FNV-1a parameters.
    assert fnv1a64(b"") == 0xCBF29CE484222325
    assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a64(b"foobar") == 0x85944171F73967E8


def test_save_load_round_trip(tmp_path):
    tensors = {
        "layer.weight": np.arange(12, dtype=np.float32).reshape(3, 4),
        "layer.bias": np.array([1.5, -2.5, 3.0], dtype=np.float32),
        "gate": np.array([0.25], dtype=np.float32),
    }
    path = tmp_path / "model.weights"
    save_weights(path, tensors)
    loaded = load_weights(path)
    assert list(loaded) == list(tensors)
    for name in tensors:
        assert np.array_equal(loaded[name], tensors[name])


def test_checksum_mismatch_detected(tmp_path):
    path = tmp_path / "model.weights"
    save_weights(path, {"w": np.ones(4, dtype=np.float32)})
    raw = bytearray(path.read_bytes())
    raw[-12] ^= 0xFF  # flip a payload byte
    path.write_bytes(bytes(raw))
    with pytest.raises(WeightFormatError, match="checksum"):
        load_weights(path)


def test_module_round_trip(tmp_path):
    a = nn.Sequential(nn.Linear(4, 8), nn.Linear(8, 2))
    b = nn.Sequential(nn.Linear(4, 8), nn.Linear(8, 2))
    path = tmp_path / "net.weights"
    save_module(path, a)
    load_into_module(load_weights(path), b)
    for ta, tb in zip(module_tensors(a).values(), module_tensors(b).values()):
        assert np.array_equal(ta, tb)
    assert module_checksum(a) == module_checksum(b)


def test_missing_tensor_rejected(tmp_path):
    path = tmp_path / "net.weights"
    save_weights(path, {"other": np.zeros(3, dtype=np.float32)})
    with pytest.raises(WeightFormatError, match="missing tensor"):
        load_into_module(load_weights(path), nn.Linear(2, 2))


def test_checksum_tracks_parameter_changes():
    net = nn.Linear(3, 3)
    before = module_checksum(net)
    with __import__("torch").no_grad():
        net.weight += 1.0
    assert module_checksum(net) != before
