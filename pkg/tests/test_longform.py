import numpy as np
import pytest
import torch

import moodscore.longform as longform_mod
from moodscore.adapter import AdapterConfig, ControlAdapter
from moodscore.anchor import AnchorEncoder
from moodscore.decoder import AcousticDecoder, DecoderConfig, InjectionGates, SamplerConfig
from moodscore.longform import (
    GenerationModels,
    WindowPlan,
    extract_trajectory_longform,
    generate_longform,
    merge_window_predictions,
    plan_windows,
    seam_discontinuity,
)
from moodscore.probe import FrozenBackbone, ProbeConfig, ProbeHead, predict_trajectory
from moodscore.world import CodecSpec, make_arc, render_pseudo_video


def test_plan_sixty_seconds():
    plan = plan_windows(60, 30, 15)
    assert plan.windows == ((0, 30), (15, 45), (30, 60))


def test_plan_exact_single_window():
    assert plan_windows(30, 30, 15).windows == ((0, 30),)


def test_plan_short_input_clipped():
    assert plan_windows(20, 30, 15).windows == ((0, 20),)


def test_plan_ninety_seconds():
    plan = plan_windows(90, 30, 15)
    assert plan.windows == ((0, 30), (15, 45), (30, 60), (45, 75), (60, 90))


def test_plan_rejects_bad_overlap():
    with pytest.raises(ValueError, match="overlap"):
        plan_windows(60, 30, 30)
    with pytest.raises(ValueError, match="overlap"):
        WindowPlan(30, 31, 5, ((0, 30),))


def test_plan_rejects_bad_prefix():
    with pytest.raises(ValueError, match="prefix"):
        WindowPlan(30, 15, 16, ((0, 30),))


def test_crossfade_traces_straight_line():
    # constant predictions c1 then c2: the merged overlap is the line between
    # them, with uniform steps across both boundaries
    windows = ((0, 30), (15, 45))
    c1, c2 = np.array([0.2, -0.4]), np.array([0.8, 0.6])
    preds = [np.tile(c1, (30, 1)), np.tile(c2, (30, 1))]
    merged = merge_window_predictions(preds, windows, 45)
    assert np.allclose(merged[:15], c1)
    assert np.allclose(merged[30:], c2)
    steps = np.diff(merged[14:31], axis=0)
    assert np.allclose(steps, steps[0])
    assert np.allclose(merged[30], c2)


def test_merge_covers_every_second_once():
    plan = plan_windows(90, 30, 15)
    preds = [np.full((e - s, 2), i, dtype=float) for i, (s, e) in enumerate(plan.windows)]
    merged = merge_window_predictions(preds, plan.windows, 90)
    assert merged.shape == (90, 2)
    assert np.all(np.isfinite(merged))


@pytest.fixture(scope="module")
def probe_parts():
    config = ProbeConfig()
    backbone = FrozenBackbone(config)
    head = ProbeHead(config.hidden_dim, config.probe_width, rng_seed=3)
    return backbone, head


def test_single_window_extraction_matches_plain_probe(probe_parts):
    backbone, head = probe_parts
    video = render_pseudo_video(make_arc(2, 30, "rise"), scene_id=1, rng_seed=2)
    plan = plan_windows(30, 30, 15)
    merged = extract_trajectory_longform(video, backbone, head, plan)
    plain = predict_trajectory(video, backbone, head)
    assert np.allclose(merged.values, plain.values, atol=1e-12)


def test_extraction_covers_duration(probe_parts):
    backbone, head = probe_parts
    video = render_pseudo_video(make_arc(5, 75, "random-walk"), scene_id=2, rng_seed=5)
    plan = plan_windows(75, 30, 15)
    merged = extract_trajectory_longform(video, backbone, head, plan)
    assert len(merged) == 75


@pytest.fixture(scope="module")
def tiny_models(probe_parts):
    backbone, head = probe_parts
    codec = CodecSpec(num_codebooks=2, vocab_size=16)
    dconfig = DecoderConfig(layers=2, dim=32, heads=2, codebooks=2, vocab_size=16,
                            max_context=512, rng_seed=0)
    decoder = AcousticDecoder(dconfig)
    adapter = ControlAdapter(AdapterConfig(dim=32, rng_seed=0)).eval()
    gates = InjectionGates(dconfig.shallow_layers)
    with torch.no_grad():
        gates.gamma.fill_(0.1)
    return GenerationModels(
        backbone, head, AnchorEncoder(32, rng_seed=0), decoder, adapter, gates, codec
    )


def test_longform_shapes_and_prefix_contract(tiny_models):
    video = render_pseudo_video(make_arc(7, 60, "random-walk"), scene_id=3, rng_seed=7)
    plan = plan_windows(60, 30, 15, prefix_s=5)
    result = generate_longform(video, tiny_models, plan, SamplerConfig(rng_seed=1))
    tps = tiny_models.codec.tokens_per_second
    assert result.tokens.tokens.shape == (60 * tps, 2)
    # window i's prompt must equal the final prefix_s seconds already emitted
    assert len(result.prefixes) == len(plan.windows) - 1
    for i, prefix in enumerate(result.prefixes):
        boundary = plan.windows[i][1]  # end of window i = start of continuation
        lo = (boundary - plan.prefix_s) * tps
        assert np.array_equal(prefix, result.tokens.tokens[lo : boundary * tps])


def test_longform_determinism(tiny_models):
    video = render_pseudo_video(make_arc(9, 45, "rise-fall"), scene_id=4, rng_seed=9)
    plan = plan_windows(45, 30, 15)
    a = generate_longform(video, tiny_models, plan, SamplerConfig(rng_seed=4))
    b = generate_longform(video, tiny_models, plan, SamplerConfig(rng_seed=4))
    assert np.array_equal(a.tokens.tokens, b.tokens.tokens)
    assert np.array_equal(a.trajectory.values, b.trajectory.values)


def test_anchor_computed_exactly_once(tiny_models, monkeypatch):
    calls = {"n": 0}
    real = longform_mod.conceptualize

    def counting(video, num_keyframes=8):
        calls["n"] += 1
        return real(video, num_keyframes)

    monkeypatch.setattr(longform_mod, "conceptualize", counting)
    video = render_pseudo_video(make_arc(11, 60, "plateau"), scene_id=5, rng_seed=11)
    plan = plan_windows(60, 30, 15)
    result = generate_longform(video, tiny_models, plan, SamplerConfig(rng_seed=0))
    assert calls["n"] == 1
    assert len(plan.windows) == 3
    assert result.anchor is not None


def test_unconditioned_longform_runs(tiny_models):
    video = render_pseudo_video(make_arc(13, 45, "fall"), scene_id=6, rng_seed=13)
    plan = plan_windows(45, 30, 15)
    result = generate_longform(
        video, tiny_models, plan, SamplerConfig(rng_seed=2), conditioned=False
    )
    assert len(result.tokens) == 45 * tiny_models.codec.tokens_per_second


def test_independent_windows_mode(tiny_models):
    video = render_pseudo_video(make_arc(15, 60, "random-walk"), scene_id=7, rng_seed=15)
    plan = plan_windows(60, 30, 15)
    joined = generate_longform(video, tiny_models, plan, SamplerConfig(rng_seed=3))
    independent = generate_longform(
        video, tiny_models, plan, SamplerConfig(rng_seed=3), use_prefix=False
    )
    assert independent.prefixes == []
    assert not np.array_equal(joined.tokens.tokens, independent.tokens.tokens)


def test_seam_discontinuity_shape(tiny_models):
    video = render_pseudo_video(make_arc(17, 60, "random-walk"), scene_id=8, rng_seed=17)
    plan = plan_windows(60, 30, 15)
    result = generate_longform(video, tiny_models, plan, SamplerConfig(rng_seed=5))
    scores = seam_discontinuity(result.tokens, result.seam_seconds)
    assert scores.shape == (len(result.seam_seconds),)
    assert np.all(np.isfinite(scores) | np.isnan(scores))


def test_plan_duration_must_match_video(tiny_models):
    video = render_pseudo_video(make_arc(19, 40, "rise"), scene_id=9, rng_seed=19)
    plan = plan_windows(60, 30, 15)
    with pytest.raises(ValueError, match="plan covers"):
        generate_longform(video, tiny_models, plan, SamplerConfig(rng_seed=0))
