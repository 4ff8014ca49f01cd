import numpy as np
import pytest
import torch
import torch.nn as nn
from hypothesis import given, settings
from hypothesis import strategies as st

from moodscore.probe import (
    FrozenBackbone,
    ProbeConfig,
    ProbeHead,
    build_interleaved_sequence,
    emo_loss,
    predict_trajectory,
    sequence_length,
)
from moodscore.world import make_arc, render_pseudo_video
from moodscore.world.video import VECTORS_PER_FRAME


@pytest.fixture(scope="module")
def backbone():
    return FrozenBackbone(ProbeConfig())


def small_video(duration=3, seed=0):
    arc = make_arc(seed, max(10, duration), "random-walk")
    return render_pseudo_video(arc, scene_id=seed, rng_seed=seed).slice_seconds(0, duration)


def test_interleaved_layout_three_frames():
    seq = build_interleaved_sequence(small_video(3), instruction_id=0)
    assert [s for s, _ in seq.elements] == [0, 1, 2]
    assert len(seq.instruction_tokens) == ProbeConfig().instruction_len
    for t, (second, block) in enumerate(seq.elements):
        assert second == t
        assert block.shape == (VECTORS_PER_FRAME, 32)


def test_interleaved_layout_single_frame():
    seq = build_interleaved_sequence(small_video(1), instruction_id=1)
    assert seq.num_frames == 1 and seq.elements[0][0] == 0


@pytest.mark.parametrize("t", [1, 2, 3])
def test_sequence_length_formula(t):
    seq = build_interleaved_sequence(small_video(t))
    assert sequence_length(seq) == ProbeConfig().instruction_len + t * (1 + VECTORS_PER_FRAME)


def test_empty_video_rejected():
    video = small_video(10).slice_seconds(0, 0)
    with pytest.raises(ValueError, match="empty"):
        build_interleaved_sequence(video)


def test_backbone_deterministic_and_shaped(backbone):
    video = small_video(5, seed=3)
    a = backbone.frame_hiddens(video)
    b = backbone.frame_hiddens(video)
    assert torch.equal(a, b)
    assert a.shape == (5, VECTORS_PER_FRAME, ProbeConfig().hidden_dim)


def test_backbone_construction_is_reproducible():
    a, b = FrozenBackbone(), FrozenBackbone()
    assert a.checksum() == b.checksum()


def test_backbone_is_frozen(backbone):
    assert all(not p.requires_grad for p in backbone.parameters())
    before = backbone.checksum()
    backbone.frame_hiddens(small_video(4))
    assert backbone.checksum() == before


def test_instruction_changes_first_frame_hiddens(backbone):
    video = small_video(2, seed=5)
    h0 = backbone.frame_hiddens(video, instruction_id=0)
    h1 = backbone.frame_hiddens(video, instruction_id=1)
    # causal attention sees the instruction prefix from the very first frame
    assert not torch.allclose(h0[0], h1[0])


def test_probe_clips_raw_outputs():
    net = nn.Linear(64, 2)
    with torch.no_grad():
        net.weight.zero_()
        net.bias.copy_(torch.tensor([2.0, -3.0]))
    head = ProbeHead(net=net)
    out = head(torch.zeros(VECTORS_PER_FRAME, 64))
    assert out.tolist() == [1.0, -1.0]


def test_probe_zero_inputs_zero_bias():
    net = nn.Linear(64, 2)
    with torch.no_grad():
        net.weight.zero_()
        net.bias.zero_()
    head = ProbeHead(net=net)
    assert head(torch.zeros(VECTORS_PER_FRAME, 64)).tolist() == [0.0, 0.0]


def test_probe_pooling_by_hand():
    # vectors {(1,3),(3,1)} pool to (2,2); identity affine leaves (2,2);
    # the clip maps it to (1,1).
    net = nn.Linear(2, 2)
    with torch.no_grad():
        net.weight.copy_(torch.eye(2))
        net.bias.zero_()
    head = ProbeHead(net=net, vectors_per_frame=2)
    z = torch.tensor([[1.0, 3.0], [3.0, 1.0]])
    assert head(z).tolist() == [1.0, 1.0]


def test_probe_rejects_wrong_block_size():
    head = ProbeHead()
    with pytest.raises(ValueError, match="vectors per frame"):
        head(torch.zeros(3, 64))


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=2**16))
def test_probe_outputs_always_clipped(seed):
    rng = np.random.default_rng(seed)
    head = ProbeHead(rng_seed=0)
    z = torch.as_tensor(rng.normal(0, 100, size=(VECTORS_PER_FRAME, 64)), dtype=torch.float32)
    out = head(z)
    assert torch.all(out <= 1.0) and torch.all(out >= -1.0)


def test_emo_loss_zero_on_equal():
    t = torch.tensor([[0.1, -0.2], [0.3, 0.4]])
    assert float(emo_loss(t, t.clone(), lam=0.5)) == 0.0


def test_emo_loss_hand_example():
    pred = torch.tensor([[0.5, -0.5]])
    truth = torch.zeros(1, 2)
    assert float(emo_loss(pred, truth, lam=0.5)) == pytest.approx(1.0, abs=1e-7)


def test_emo_loss_lambda_zero_is_mean_squared_l2():
    rng = np.random.default_rng(1)
    pred = torch.as_tensor(rng.uniform(-1, 1, (7, 2)))
    truth = torch.as_tensor(rng.uniform(-1, 1, (7, 2)))
    expected = float(((pred - truth) ** 2).sum(dim=1).mean())
    assert float(emo_loss(pred, truth, lam=0.0)) == pytest.approx(expected, rel=1e-12)


def test_emo_loss_shape_mismatch():
    with pytest.raises(ValueError, match="mismatch"):
        emo_loss(torch.zeros(3, 2), torch.zeros(4, 2), 0.5)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=2**16))
def test_emo_loss_nonnegative_zero_iff_equal(seed):
    rng = np.random.default_rng(seed)
    pred = torch.as_tensor(rng.uniform(-1, 1, (4, 2)))
    truth = torch.as_tensor(rng.uniform(-1, 1, (4, 2)))
    val = float(emo_loss(pred, truth, lam=0.5))
    assert val >= 0.0
    assert (val == 0.0) == bool(torch.equal(pred, truth))


def test_predict_trajectory_matches_video_length(backbone):
    video = small_video(6, seed=2)
    traj = predict_trajectory(video, backbone, ProbeHead())
    assert len(traj) == 6
    assert np.max(np.abs(traj.values)) <= 1.0


def test_overlong_video_rejected():
    config = ProbeConfig(max_seconds=8)
    video = small_video(10)
    with pytest.raises(ValueError, match="window-by-window"):
        build_interleaved_sequence(video, 0, config)
