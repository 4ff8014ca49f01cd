import math

import numpy as np
import pytest
import torch

from moodscore.anchor import AnchorEncoder, SemanticAnchor
from moodscore.decoder import (
    AcousticDecoder,
    DecoderConfig,
    InjectionGates,
    SamplerConfig,
    gen_loss,
    sample,
)
from moodscore.world import CodecSpec


def tiny_config(**kw):
    base = dict(layers=3, dim=16, heads=2, codebooks=2, vocab_size=16, max_context=64)
    base.update(kw)
    return DecoderConfig(**base)


def tiny_setup(seed=0, **kw):
    config = tiny_config(rng_seed=seed, **kw)
    decoder = AcousticDecoder(config)
    encoder = AnchorEncoder(config.dim, rng_seed=seed)
    memory = encoder(SemanticAnchor(1, 2, 3, 4)).detach()
    return config, decoder, memory


def random_delayed(config, t, seed=0):
    rng = np.random.default_rng(seed)
    k = config.codebooks
    grid = rng.integers(0, config.vocab_size, size=(t, k))
    for cb in range(k):
        grid[:cb, cb] = config.vocab_size
    return torch.as_tensor(grid)


def test_zero_gates_match_unconditioned_exactly():
    config, decoder, memory = tiny_setup()
    gates = InjectionGates(config.shallow_layers)
    delayed = random_delayed(config, 12)
    control = torch.randn(12, config.dim, generator=torch.Generator().manual_seed(1))
    with torch.no_grad():
        plain = decoder(delayed, memory)
        gated = decoder(delayed, memory, control, gates)
    assert torch.equal(plain, gated)


def test_zero_control_matches_unconditioned_for_any_gamma():
    config, decoder, memory = tiny_setup()
    gates = InjectionGates(config.shallow_layers)
    with torch.no_grad():
        gates.gamma.copy_(torch.tensor([0.7, -1.3, 2.0][: config.shallow_layers]))
    delayed = random_delayed(config, 10)
    with torch.no_grad():
        plain = decoder(delayed, memory)
        gated = decoder(delayed, memory, torch.zeros(10, config.dim), gates)
    assert torch.equal(plain, gated)


def test_injection_arithmetic_by_hand():
    gates = InjectionGates(1)
    with torch.no_grad():
        gates.gamma.fill_(0.5)
    h = torch.tensor([1.0, 2.0])
    c = torch.tensor([0.2, -0.4])
    injected = h + gates.value(0) * c
    assert torch.allclose(injected, torch.tensor([1.1, 1.8]))


def test_forced_zero_gate_on_one_layer_removes_its_contribution():
    config, decoder, memory = tiny_setup()
    gates = InjectionGates(config.shallow_layers)
    with torch.no_grad():
        gates.gamma.copy_(torch.full((config.shallow_layers,), 0.3))
    delayed = random_delayed(config, 8)
    control = torch.randn(8, config.dim, generator=torch.Generator().manual_seed(2))
    with torch.no_grad():
        full = decoder(delayed, memory, control, gates)
        gates.gamma[1] = 0.0
        ablated = decoder(delayed, memory, control, gates)
        gates.gamma[1] = 0.3
        restored = decoder(delayed, memory, control, gates)
    assert not torch.allclose(full, ablated)
    assert torch.equal(full, restored)


@pytest.mark.parametrize("ratio,expected", [(0.5, 4), (0.75, 6), (1.0, 8)])
def test_shallow_layer_schedule(ratio, expected):
    config = DecoderConfig(layers=8, dim=16, heads=2, injection_ratio=ratio)
    assert config.shallow_layers == expected


def test_injection_ratio_bounds():
    with pytest.raises(ValueError, match="injection_ratio"):
        DecoderConfig(injection_ratio=0.0)
    with pytest.raises(ValueError, match="injection_ratio"):
        DecoderConfig(injection_ratio=1.5)


def test_tied_gates_share_one_scalar():
    gates = InjectionGates(4, tied=True)
    assert gates.gamma.shape == (1,)
    with torch.no_grad():
        gates.gamma.fill_(0.25)
    assert all(float(gates.value(i).detach()) == 0.25 for i in range(4))


def test_gates_initialized_to_zero():
    assert torch.all(InjectionGates(6).gamma == 0)
    assert torch.all(InjectionGates(6, tied=True).gamma == 0)


def test_causality_in_tokens_and_control():
    config, decoder, memory = tiny_setup()
    gates = InjectionGates(config.shallow_layers)
    with torch.no_grad():
        gates.gamma.fill_(0.4)
    delayed = random_delayed(config, 14)
    control = torch.randn(14, config.dim, generator=torch.Generator().manual_seed(3))
    changed = delayed.clone()
    changed[9:, 0] = (changed[9:, 0] + 1) % config.vocab_size
    control_changed = control.clone()
    control_changed[9:] += 1.0
    with torch.no_grad():
        base = decoder(delayed, memory, control, gates)
        tok = decoder(changed, memory, control, gates)
        ctl = decoder(delayed, memory, control_changed, gates)
    # logits at row t consume tokens < t and control <= t
    assert torch.equal(base[:9], tok[:9])
    assert torch.equal(base[:9], ctl[:9])
    assert not torch.allclose(base[9:], ctl[9:])


def test_context_overflow_rejected():
    config, decoder, memory = tiny_setup()
    delayed = random_delayed(config, config.max_context + 1)
    with pytest.raises(ValueError, match="max_context"):
        decoder(delayed, memory)


def test_control_length_mismatch_rejected():
    config, decoder, memory = tiny_setup()
    delayed = random_delayed(config, 10)
    gates = InjectionGates(config.shallow_layers)
    with pytest.raises(ValueError, match="control shape"):
        decoder(delayed, memory, torch.zeros(9, config.dim), gates)


def test_gen_loss_uniform_logits():
    logits = torch.zeros(5, 2, 65)
    targets = torch.randint(0, 64, (5, 2))
    loss = gen_loss(logits, targets, pad_id=64)
    assert float(loss) == pytest.approx(math.log(64), rel=1e-6)


def test_gen_loss_one_hot_limit():
    targets = torch.randint(0, 16, (6, 2))
    logits = torch.full((6, 2, 17), -50.0)
    for t in range(6):
        for k in range(2):
            logits[t, k, targets[t, k]] = 50.0
    assert float(gen_loss(logits, targets, pad_id=16)) < 1e-8


def test_gen_loss_all_pad_rejected():
    logits = torch.zeros(3, 2, 17)
    targets = torch.full((3, 2), 16)
    with pytest.raises(ValueError, match="padded"):
        gen_loss(logits, targets, pad_id=16)


def test_gen_loss_masks_pad_positions():
    logits = torch.zeros(2, 1, 5)
    targets = torch.tensor([[0], [4]])  # second position is pad
    loss = gen_loss(logits, targets, pad_id=4)
    assert float(loss) == pytest.approx(math.log(4), rel=1e-6)


def sampling_codec():
    return CodecSpec(num_codebooks=2, vocab_size=16, tokens_per_second=10)


def test_sample_is_seeded_and_deterministic():
    config, decoder, memory = tiny_setup()
    codec = sampling_codec()
    sampler = SamplerConfig(rng_seed=7)
    a = sample(decoder, memory, None, None, 20, sampler, codec)
    b = sample(decoder, memory, None, None, 20, sampler, codec)
    c = sample(decoder, memory, None, None, 20, SamplerConfig(rng_seed=8), codec)
    assert np.array_equal(a.tokens, b.tokens)
    assert not np.array_equal(a.tokens, c.tokens)


def test_sample_shape_and_no_pads():
    config, decoder, memory = tiny_setup()
    codec = sampling_codec()
    grid = sample(decoder, memory, None, None, 25, SamplerConfig(rng_seed=1), codec)
    assert grid.tokens.shape == (25, 2)
    assert np.all(grid.tokens < codec.vocab_size)


def test_sample_respects_prefix():
    config, decoder, memory = tiny_setup()
    codec = sampling_codec()
    from moodscore.world import TokenGrid

    prefix = TokenGrid(np.random.default_rng(0).integers(1, 16, size=(8, 2)), codec)
    continuation = sample(decoder, memory, None, prefix, 10, SamplerConfig(rng_seed=2), codec)
    assert continuation.tokens.shape == (10, 2)


def test_sample_control_needs_enough_rows():
    config, decoder, memory = tiny_setup()
    codec = sampling_codec()
    gates = InjectionGates(config.shallow_layers)
    with pytest.raises(ValueError, match="control has"):
        sample(
            decoder, memory, np.zeros((5, config.dim)), None, 10,
            SamplerConfig(rng_seed=0), codec, gates,
        )


def test_sampler_config_validation():
    with pytest.raises(ValueError, match="temperature"):
        SamplerConfig(temperature=0.0)
    with pytest.raises(ValueError, match="top_k"):
        SamplerConfig(top_k=0)


def test_incremental_sampling_matches_batch_forward_distribution():
    # The KV-cached path must produce the same logits as the batch forward
    # (up to float accumulation): force greedy equivalence on a short run.
    config, decoder, memory = tiny_setup(seed=5)
    codec = sampling_codec()
    gates = InjectionGates(config.shallow_layers)
    with torch.no_grad():
        gates.gamma.fill_(0.2)
    control = np.random.default_rng(4).normal(size=(12, config.dim))
    grid = sample(
        decoder, memory, control, None, 12, SamplerConfig(temperature=1e-6, rng_seed=0),
        codec, gates,
    )
    delayed = torch.as_tensor(
        np.stack(
            [
                np.concatenate([np.full(cb, 16), grid.tokens[:, cb], np.full(1 - cb, 16)])
                for cb in range(2)
            ],
            axis=1,
        )
    )
    control_ext = torch.as_tensor(
        np.concatenate([control, control[-1:]]), dtype=torch.float32
    )
    with torch.no_grad():
        logits = decoder(delayed, memory, control_ext, gates)
    for pos in range(13):
        for cb in range(2):
            if pos < cb or pos - cb >= 12:
                continue
            assert int(logits[pos, cb, :16].argmax()) == int(delayed[pos, cb])
