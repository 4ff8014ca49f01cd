"""Autoregressive multi-codebook acoustic decoder with dual conditioning.

Every block cross-attends to the four anchor rows; the shallow blocks
additionally receive the dense control signal as a gated additive bias on
their input hidden states.  Gates start at exactly zero, so a fresh model is
bitwise indistinguishable from the unconditioned one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from ._transformer import CrossAttention, FeedForward, SelfAttention
from .adapter import ControlAdapter, interpolate_trajectory
from .anchor import AnchorEncoder
from .world.clips import ClipRecord
from .world.codec import CodecSpec, DelayedGrid, TokenGrid, apply_delay, remove_delay

INJECTION_SITES = ("pre_attn", "pre_mlp", "both")


@dataclass(frozen=True)
class DecoderConfig:
    layers: int = 8
    dim: int = 128
    heads: int = 4
    codebooks: int = 4
    vocab_size: int = 64
    max_context: int = 1024
    injection_ratio: float = 0.75
    tie_gates: bool = False
    injection_site: str = "pre_attn"
    rng_seed: int = 0

    def __post_init__(self):
        if not 0 < self.injection_ratio <= 1:
            raise ValueError(f"injection_ratio must be in (0, 1], got {self.injection_ratio}")
        if self.dim % self.heads:
            raise ValueError("heads must divide dim")
        if self.injection_site not in INJECTION_SITES:
            raise ValueError(f"injection_site must be one of {INJECTION_SITES}")

    @property
    def shallow_layers(self) -> int:
        return math.ceil(self.injection_ratio * self.layers)


@dataclass(frozen=True)
class SamplerConfig:
    temperature: float = 1.0
    top_k: int = 16
    rng_seed: int = 0

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")


class InjectionGates(nn.Module):
    """One learnable scalar per injected layer (or one shared when tied)."""

    def __init__(self, n_layers: int, tied: bool = False):
        super().__init__()
        self.tied = tied
        self.gamma = nn.Parameter(torch.zeros(1 if tied else n_layers))

    def value(self, layer: int) -> torch.Tensor:
        return self.gamma[0] if self.tied else self.gamma[layer]


class DecoderBlock(nn.Module):
    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.ln1 = nn.LayerNorm(dim)
        self.attn = SelfAttention(dim, heads)
        self.ln_cross = nn.LayerNorm(dim)
        self.cross = CrossAttention(dim, heads)
        self.ln2 = nn.LayerNorm(dim)
        self.mlp = FeedForward(dim)

    def forward(self, h, memory_kv, inject=None, site="pre_attn", cache=None):
        if inject is not None and site in ("pre_attn", "both"):
            h = h + inject
        if cache is None:
            h = h + self.attn(self.ln1(h), causal=True)
        else:
            h = h + self.attn.step(self.ln1(h), cache)
        h = h + self.cross(self.ln_cross(h), memory_kv=memory_kv)
        if inject is not None and site in ("pre_mlp", "both"):
            h = h + inject
        h = h + self.mlp(self.ln2(h))
        return h


def sinusoidal_positions(length: int, dim: int) -> torch.Tensor:
    """Fixed sin/cos position table; extrapolates to any context length."""
    pos = torch.arange(length, dtype=torch.float32).unsqueeze(1)
    freq = torch.exp(
        torch.arange(0, dim, 2, dtype=torch.float32) * (-math.log(10000.0) / dim)
    )
    table = torch.zeros(length, dim)
    table[:, 0::2] = torch.sin(pos * freq)
    table[:, 1::2] = torch.cos(pos * freq[: (dim + 1) // 2])
    return table


class AcousticDecoder(nn.Module):
    def __init__(self, config: DecoderConfig = DecoderConfig()):
        super().__init__()
        self.config = config
        d, k, v = config.dim, config.codebooks, config.vocab_size
        torch.manual_seed(0x6465636F ^ config.rng_seed)
        self.token_emb = nn.ModuleList(nn.Embedding(v + 1, d) for _ in range(k))
        self.register_buffer("pos_table", sinusoidal_positions(config.max_context, d))
        self.blocks = nn.ModuleList(DecoderBlock(d, config.heads) for _ in range(config.layers))
        self.ln_f = nn.LayerNorm(d)
        self.out_heads = nn.ModuleList(nn.Linear(d, v + 1) for _ in range(k))

    @property
    def pad_id(self) -> int:
        return self.config.vocab_size

    def _embed_rows(self, rows: torch.Tensor) -> torch.Tensor:
        return sum(emb(rows[..., k]) for k, emb in enumerate(self.token_emb))

    def _check_inputs(self, delayed, control):
        b, t, k = delayed.shape
        if k != self.config.codebooks:
            raise ValueError(f"got {k} codebooks, model expects {self.config.codebooks}")
        if t > self.config.max_context:
            raise ValueError(f"context of {t} rows exceeds max_context {self.config.max_context}")
        if control is not None and tuple(control.shape) != (b, t, self.config.dim):
            raise ValueError(
                f"control shape {tuple(control.shape)} must be {(b, t, self.config.dim)}"
            )

    def forward(
        self,
        delayed: torch.Tensor,
        anchor_memory: torch.Tensor,
        control: torch.Tensor | None = None,
        gates: InjectionGates | None = None,
    ) -> torch.Tensor:
        """Per-row, per-codebook next-token logits.

        ``delayed`` is (B, T, K) in delayed layout; ``control`` (when given)
        carries one row per predicted position.  logits[:, t] predict row t
        from rows < t, so targets equal the input grid.
        """
        squeeze = delayed.ndim == 2
        if squeeze:
            delayed = delayed.unsqueeze(0)
            if control is not None:
                control = control.unsqueeze(0)
        if anchor_memory.ndim == 2:
            anchor_memory = anchor_memory.unsqueeze(0).expand(delayed.shape[0], -1, -1)
        self._check_inputs(delayed, control)
        b, t, _ = delayed.shape
        bos = torch.full((b, 1, self.config.codebooks), self.pad_id, dtype=torch.long)
        inputs = torch.cat([bos, delayed[:, :-1]], dim=1)
        h = self._embed_rows(inputs) + self.pos_table[:t]
        use_control = control is not None and gates is not None
        for layer, blk in enumerate(self.blocks):
            inject = None
            if use_control and layer < self.config.shallow_layers:
                inject = gates.value(layer) * control
            h = blk(
                h, blk.cross.memory_kv(anchor_memory), inject, self.config.injection_site
            )
        h = self.ln_f(h)
        logits = torch.stack([head(h) for head in self.out_heads], dim=2)
        return logits.squeeze(0) if squeeze else logits


def gen_loss(logits: torch.Tensor, targets: torch.Tensor, pad_id: int) -> torch.Tensor:
    """Mean cross-entropy over non-pad positions and codebooks.

    The softmax runs over the real vocabulary only; the pad column is
    structural and never predicted.
    """
    if logits.shape[:-1] != targets.shape:
        raise ValueError(f"logits {tuple(logits.shape)} do not match targets {tuple(targets.shape)}")
    mask = targets != pad_id
    if not bool(mask.any()):
        raise ValueError("all positions padded; loss undefined")
    logp = torch.log_softmax(logits[..., :pad_id], dim=-1)
    picked = logp.gather(-1, targets.clamp(max=pad_id - 1).unsqueeze(-1)).squeeze(-1)
    return -(picked[mask]).mean()


def sample(
    decoder: AcousticDecoder,
    anchor_memory: torch.Tensor | np.ndarray,
    control: np.ndarray | torch.Tensor | None,
    prefix: TokenGrid | None,
    length: int,
    sampler: SamplerConfig,
    codec: CodecSpec,
    gates: InjectionGates | None = None,
) -> TokenGrid:
    """Seeded autoregressive top-k sampling in delayed space.

    ``control`` covers prefix plus continuation at acoustic rate; it is
    edge-extended internally over the K-1 delay rows.  The pad id is masked
    out of every softmax, so it is never emitted.  Returns only the
    continuation (``length`` steps).
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    cfg = decoder.config
    if codec.num_codebooks != cfg.codebooks or codec.vocab_size != cfg.vocab_size:
        raise ValueError("codec disagrees with decoder config")
    k, n = cfg.codebooks, cfg.vocab_size
    prefix_len = 0 if prefix is None else len(prefix)
    t_total = prefix_len + length
    t_d = t_total + k - 1
    if t_d > cfg.max_context:
        raise ValueError(f"{t_d} delayed rows exceed max_context {cfg.max_context}")

    memory = torch.as_tensor(anchor_memory, dtype=torch.float32)
    if memory.ndim == 2:
        memory = memory.unsqueeze(0)
    control_t = None
    if control is not None:
        control_t = torch.as_tensor(np.asarray(control), dtype=torch.float32)
        if control_t.shape[0] < t_total:
            raise ValueError(f"control has {control_t.shape[0]} rows, needs {t_total}")
        control_t = control_t[:t_total]
        control_t = torch.cat([control_t, control_t[-1:].expand(k - 1, -1)], dim=0)

    delayed = np.full((t_d, k), cfg.vocab_size, dtype=np.int64)
    if prefix is not None:
        for cb in range(k):
            delayed[cb : cb + prefix_len, cb] = prefix.tokens[:, cb]

    generator = torch.Generator().manual_seed(sampler.rng_seed)
    caches = [{} for _ in decoder.blocks]
    memory_kvs = [blk.cross.memory_kv(memory) for blk in decoder.blocks]
    use_control = control_t is not None and gates is not None
    top_k = min(sampler.top_k, n)

    with torch.no_grad():
        for pos in range(t_d):
            if pos == 0:
                row = torch.full((1, 1, k), decoder.pad_id, dtype=torch.long)
            else:
                row = torch.as_tensor(delayed[pos - 1]).view(1, 1, k)
            h = decoder._embed_rows(row) + decoder.pos_table[pos]
            for layer, blk in enumerate(decoder.blocks):
                inject = None
                if use_control and layer < cfg.shallow_layers:
                    inject = gates.value(layer) * control_t[pos]
                h = blk(h, memory_kvs[layer], inject, cfg.injection_site, cache=caches[layer])
            h = decoder.ln_f(h)
            for cb in range(k):
                if pos < cb or pos - cb >= t_total:
                    continue  # structural pad
                if pos - cb < prefix_len:
                    continue  # forced prefix token
                logits = decoder.out_heads[cb](h)[0, 0, :n] / sampler.temperature
                values, ids = torch.topk(logits, top_k)
                choice = torch.multinomial(torch.softmax(values, dim=-1), 1, generator=generator)
                delayed[pos, cb] = int(ids[choice])

    full = remove_delay(DelayedGrid(delayed, codec))
    return TokenGrid(full.tokens[prefix_len:], codec)


# -- training stages ----------------------------------------------------------


def _prepare_clips(clips: list[ClipRecord], codec: CodecSpec) -> tuple[torch.Tensor, np.ndarray]:
    lengths = {len(c.tokens) for c in clips}
    if len(lengths) != 1:
        raise ValueError(f"training clips must share one length, got {sorted(lengths)}")
    for clip in clips:
        if clip.tokens.codec != codec:
            raise ValueError("clip codec disagrees with the corpus codec")
    delayed = np.stack([apply_delay(c.tokens).tokens for c in clips])
    dense = np.stack(
        [interpolate_trajectory(c.va_curve, len(c.tokens)) for c in clips]
    )
    return torch.as_tensor(delayed), dense


def _extend_control(control: torch.Tensor, k: int) -> torch.Tensor:
    return torch.cat([control, control[:, -1:].expand(-1, k - 1, -1)], dim=1)


def pretrain_backbone(
    clips: list[ClipRecord],
    codec: CodecSpec,
    config: DecoderConfig,
    epochs: int = 20,
    learning_rate: float = 1e-3,
    batch_size: int = 16,
    rng_seed: int = 0,
) -> tuple[AcousticDecoder, AnchorEncoder, list[float]]:
    """Anchor-conditioned next-token pretraining (no control branch, no gates)."""
    if not clips:
        raise ValueError("empty pretraining corpus")
    decoder = AcousticDecoder(config)
    anchor_encoder = AnchorEncoder(config.dim, rng_seed=config.rng_seed)
    delayed, _ = _prepare_clips(clips, codec)
    anchors = [c.anchor for c in clips]

    torch.manual_seed(0x70726574 ^ rng_seed)
    params = list(decoder.parameters()) + list(anchor_encoder.parameters())
    optimizer = torch.optim.Adam(params, lr=learning_rate)
    order_rng = np.random.default_rng(rng_seed)

    history = []
    for _ in range(epochs):
        order = order_rng.permutation(len(clips))
        total, steps = 0.0, 0
        for lo in range(0, len(clips), batch_size):
            idx = order[lo : lo + batch_size]
            batch = delayed[idx]
            memory = anchor_encoder.encode_batch([anchors[i] for i in idx])
            optimizer.zero_grad()
            loss = gen_loss(decoder(batch, memory), batch, decoder.pad_id)
            loss.backward()
            optimizer.step()
            total += float(loss.detach())
            steps += 1
        history.append(total / steps)
    return decoder, anchor_encoder, history


def train_adapter(
    clips: list[ClipRecord],
    codec: CodecSpec,
    decoder: AcousticDecoder,
    anchor_encoder: AnchorEncoder,
    adapter: ControlAdapter,
    gates: InjectionGates | None = None,
    epochs: int = 50,
    learning_rate: float = 3e-3,
    gate_learning_rate: float | None = None,
    batch_size: int = 16,
    rng_seed: int = 0,
    crop_steps: int | None = None,
) -> tuple[InjectionGates, list[float]]:
    """Fine-tune only the adapter and the gates against the frozen backbone.

    Gates start at zero, which blocks gradient flow into the adapter until
    they move; they get their own (larger) learning rate by default so the
    two co-adapt within a short schedule.  ``crop_steps`` trains on the
    leading crop of each clip (clips already start every hop interval of the
    source streams), trading context length for optimizer steps per minute.
    """
    if not clips:
        raise ValueError("empty adapter corpus")
    if adapter.config.dim != decoder.config.dim:
        raise ValueError("adapter dim must match decoder dim")
    for p in decoder.parameters():
        p.requires_grad_(False)
    for p in anchor_encoder.parameters():
        p.requires_grad_(False)
    if gates is None:
        gates = InjectionGates(decoder.config.shallow_layers, decoder.config.tie_gates)
    if gate_learning_rate is None:
        gate_learning_rate = 10.0 * learning_rate

    delayed, dense = _prepare_clips(clips, codec)
    if crop_steps is not None and crop_steps + decoder.config.codebooks - 1 < delayed.shape[1]:
        delayed = delayed[:, : crop_steps + decoder.config.codebooks - 1]
        dense = dense[:, :crop_steps]
    dense_t = torch.as_tensor(dense, dtype=torch.float32)
    anchors = [c.anchor for c in clips]

    torch.manual_seed(0x61667475 ^ rng_seed)
    optimizer = torch.optim.Adam(
        [
            {"params": list(adapter.parameters()), "lr": learning_rate},
            {"params": list(gates.parameters()), "lr": gate_learning_rate},
        ]
    )
    order_rng = np.random.default_rng(rng_seed)

    adapter.train()
    history = []
    for _ in range(epochs):
        order = order_rng.permutation(len(clips))
        total, steps = 0.0, 0
        for lo in range(0, len(clips), batch_size):
            idx = order[lo : lo + batch_size]
            batch = delayed[idx]
            memory = anchor_encoder.encode_batch([anchors[i] for i in idx])
            control = _extend_control(adapter(dense_t[idx]), decoder.config.codebooks)
            optimizer.zero_grad()
            loss = gen_loss(decoder(batch, memory, control, gates), batch, decoder.pad_id)
            loss.backward()
            optimizer.step()
            total += float(loss.detach())
            steps += 1
        history.append(total / steps)
    adapter.eval()
    return gates, history


def held_out_ce(
    clips: list[ClipRecord],
    codec: CodecSpec,
    decoder: AcousticDecoder,
    anchor_encoder: AnchorEncoder,
    adapter: ControlAdapter | None = None,
    gates: InjectionGates | None = None,
) -> float:
    """Mean next-token CE on clips, conditioned when adapter+gates are given."""
    delayed, dense = _prepare_clips(clips, codec)
    was_training = adapter.training if adapter is not None else False
    if adapter is not None:
        adapter.eval()
    with torch.no_grad():
        memory = anchor_encoder.encode_batch([c.anchor for c in clips])
        control = None
        if adapter is not None and gates is not None:
            control = _extend_control(
                adapter(torch.as_tensor(dense, dtype=torch.float32)),
                decoder.config.codebooks,
            )
        loss = gen_loss(decoder(delayed, memory, control, gates), delayed, decoder.pad_id)
    if adapter is not None:
        adapter.train(was_training)
    return float(loss)
