"""Run configuration: one JSON document covering every stage's hyperparameters.

A saved config plus a seed pins the whole pipeline; unknown keys are rejected
so typos cannot silently fall back to defaults.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .adapter import AdapterConfig
from .decoder import DecoderConfig, SamplerConfig
from .probe import ProbeConfig
from .world.codec import CodecSpec


@dataclass(frozen=True)
class WindowConfig:
    window_s: int = 30
    overlap_s: int = 15
    prefix_s: int = 5


@dataclass(frozen=True)
class DatagenConfig:
    scale: float = 1.0
    music_streams_at_scale_1: int = 360
    video_streams_at_scale_1: int = 48
    stream_duration_s: int = 90
    clip_len_s: int = 30
    hop_s: int = 15

    @property
    def music_streams(self) -> int:
        return int(round(self.scale * self.music_streams_at_scale_1))

    @property
    def video_streams(self) -> int:
        return int(round(self.scale * self.video_streams_at_scale_1))


@dataclass(frozen=True)
class TrainConfig:
    pretrain_epochs: int = 20
    pretrain_lr: float = 2e-3
    adapter_epochs: int = 50
    adapter_lr: float = 3e-3
    gate_lr: float = 3e-2
    batch_size: int = 16
    adapter_crop_s: int | None = 10  # train the adapter on leading clip crops
    eval_arcs: int = 20
    eval_duration_s: int = 60


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    codec: CodecSpec = field(default_factory=CodecSpec)
    probe: ProbeConfig = field(default_factory=ProbeConfig)
    adapter: AdapterConfig = field(default_factory=AdapterConfig)
    decoder: DecoderConfig = field(default_factory=DecoderConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    windows: WindowConfig = field(default_factory=WindowConfig)
    datagen: DatagenConfig = field(default_factory=DatagenConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.adapter.dim != self.decoder.dim:
            raise ValueError(
                f"adapter dim {self.adapter.dim} must match decoder dim {self.decoder.dim}"
            )

    def with_seed(self, seed: int) -> "RunConfig":
        return dataclasses.replace(
            self,
            seed=seed,
            probe=dataclasses.replace(self.probe, rng_seed=seed),
            adapter=dataclasses.replace(self.adapter, rng_seed=seed),
            decoder=dataclasses.replace(self.decoder, rng_seed=seed),
            sampler=dataclasses.replace(self.sampler, rng_seed=seed),
        )

    def to_dict(self) -> dict:
        out = {"seed": self.seed}
        for name in ("codec", "probe", "adapter", "decoder", "sampler", "windows",
                     "datagen", "train"):
            section = dataclasses.asdict(getattr(self, name))
            for key, value in section.items():
                if isinstance(value, tuple):
                    section[key] = list(value)
            out[name] = section
        return out

    def save(self, path: Path | str) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )


_SECTIONS = {
    "codec": CodecSpec,
    "probe": ProbeConfig,
    "adapter": AdapterConfig,
    "decoder": DecoderConfig,
    "sampler": SamplerConfig,
    "windows": WindowConfig,
    "datagen": DatagenConfig,
    "train": TrainConfig,
}

_TUPLE_KEYS = {("adapter", "dilations")}


def config_from_dict(data: dict) -> RunConfig:
    unknown = set(data) - set(_SECTIONS) - {"seed"}
    if unknown:
        raise ValueError(f"unknown config sections: {sorted(unknown)}")
    kwargs = {"seed": int(data.get("seed", 0))}
    for name, cls in _SECTIONS.items():
        section = dict(data.get(name, {}))
        valid = {f.name for f in dataclasses.fields(cls)}
        bad = set(section) - valid
        if bad:
            raise ValueError(f"unknown keys in [{name}]: {sorted(bad)}")
        for key in list(section):
            if (name, key) in _TUPLE_KEYS and isinstance(section[key], list):
                section[key] = tuple(section[key])
        kwargs[name] = cls(**section)
    return RunConfig(**kwargs)


def load_config(path: Path | str) -> RunConfig:
    return config_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
