"""End-to-end stage orchestration shared by the CLI and the acceptance tests:
corpus generation, the three training stages, generation and evaluation."""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .adapter import ControlAdapter, control_signal
from .anchor import AnchorEncoder, conceptualize
from .config import RunConfig
from .decoder import (
    AcousticDecoder,
    InjectionGates,
    SamplerConfig,
    held_out_ce,
    pretrain_backbone,
    sample,
    train_adapter,
)
from .longform import GenerationModels, LongformResult, generate_longform, plan_windows, seam_discontinuity
from .metrics import affect_alignment, evaluate_corpora
from .probe import FrozenBackbone, ProbeHead, train_probe
from .weights import load_into_module, load_weights, save_weights, module_tensors
from .world import (
    PseudoVideo,
    SourceStream,
    grammar_emit,
    make_arc,
    render_pseudo_video,
    segment_clips,
    segment_video,
    silence_filter,
)
from .world.arcs import NarrativeArc
from .world.clips import ClipRecord
from .world.grammar import oracle_decode
from .world.io import (
    read_music_corpus,
    read_video_corpus,
    write_music_corpus,
    write_tokens_bin,
    write_va_csv,
    write_video_corpus,
)

# Archetype mix for corpus generation.  Plateau clips make the anchor's mood
# and pacing fields non-redundant during pretraining (the backbone learns
# externally drivable regime dials); the tension archetypes hold valence
# fixed so adapter fine-tuning gets clean per-axis gradients; random-walk
# covers joint variation.
ARCHETYPE_MIX = (
    "plateau",
    "rise-fall",
    "plateau",
    "random-walk",
    "rise",
    "rise-fall",
    "plateau",
    "fall",
)


def _stream_seed(seed: int, index: int, realm: int) -> int:
    return seed * 1_000_003 + realm * 7_777_777 + index


def make_scene(
    config: RunConfig, index: int, realm: int, duration_s: int | None = None
) -> tuple[NarrativeArc, PseudoVideo]:
    seed = _stream_seed(config.seed, index, realm)
    arc = make_arc(seed, duration_s or config.datagen.stream_duration_s,
                   ARCHETYPE_MIX[index % len(ARCHETYPE_MIX)])
    return arc, render_pseudo_video(arc, scene_id=index, rng_seed=seed)


def build_music_clips(config: RunConfig, n_streams: int, realm: int = 0) -> list[ClipRecord]:
    clips: list[ClipRecord] = []
    for i in range(n_streams):
        arc, video = make_scene(config, i, realm)
        seed = _stream_seed(config.seed, i, realm)
        stream = SourceStream(
            va=arc.sample_1hz(),
            tokens=grammar_emit(arc, config.codec, seed),
            anchor=conceptualize(video),
            source_id=i,
            rng_seed=seed,
        )
        clips.extend(
            silence_filter(
                segment_clips(stream, config.datagen.clip_len_s, config.datagen.hop_s)
            )
        )
    return clips


def build_video_clips(config: RunConfig, n_streams: int, realm: int = 1) -> list[PseudoVideo]:
    videos: list[PseudoVideo] = []
    for i in range(n_streams):
        _, video = make_scene(config, i, realm)
        videos.extend(
            segment_video(video, config.datagen.clip_len_s, config.datagen.hop_s)
        )
    return videos


def datagen(config: RunConfig, out_dir: Path | str) -> dict:
    out_dir = Path(out_dir)
    if config.datagen.music_streams == 0:
        warnings.warn("datagen scale produced zero streams; corpora are empty", stacklevel=2)
    music = build_music_clips(config, config.datagen.music_streams)
    videos = build_video_clips(config, config.datagen.video_streams)
    write_music_corpus(out_dir / "music", music, config.codec)
    write_video_corpus(out_dir / "video", videos)
    counts = {
        "music_clips": len(music),
        "music_clip_minutes": len(music) * config.datagen.clip_len_s / 60.0,
        "video_clips": len(videos),
    }
    (out_dir / "datagen.json").write_text(
        json.dumps(counts, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return counts


def write_loss_csv(history: list[float], path: Path | str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["epoch", "loss"])
        for epoch, loss in enumerate(history, start=1):
            writer.writerow([epoch, f"{loss:.6f}"])


# -- training stages ----------------------------------------------------------


def train_probe_stage(dataset_dir: Path | str, config: RunConfig, out_dir: Path | str) -> dict:
    from .plots import plot_loss_curve

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    videos = read_video_corpus(Path(dataset_dir) / "video")
    dataset = [(v, v.ground_truth) for v in videos]
    head, backbone, history = train_probe(dataset, config.probe)
    tensors = {f"backbone.{k}": v for k, v in module_tensors(backbone).items()}
    tensors.update({f"head.{k}": v for k, v in module_tensors(head).items()})
    save_weights(out_dir / "probe.weights", tensors)
    write_loss_csv(history, out_dir / "probe_loss.csv")
    plot_loss_curve(history, out_dir / "probe_loss.png", "probe training loss")
    return {"weights": str(out_dir / "probe.weights"), "final_loss": history[-1],
            "epochs": len(history)}


def train_backbone_stage(dataset_dir: Path | str, config: RunConfig, out_dir: Path | str) -> dict:
    from .plots import plot_loss_curve

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    clips, codec = read_music_corpus(Path(dataset_dir) / "music")
    decoder, anchor_encoder, history = pretrain_backbone(
        clips,
        codec,
        config.decoder,
        epochs=config.train.pretrain_epochs,
        learning_rate=config.train.pretrain_lr,
        batch_size=config.train.batch_size,
        rng_seed=config.seed,
    )
    tensors = {f"decoder.{k}": v for k, v in module_tensors(decoder).items()}
    tensors.update({f"anchor_encoder.{k}": v for k, v in module_tensors(anchor_encoder).items()})
    save_weights(out_dir / "backbone.weights", tensors)
    write_loss_csv(history, out_dir / "backbone_loss.csv")
    plot_loss_curve(history, out_dir / "backbone_loss.png", "backbone pretraining loss")
    return {"weights": str(out_dir / "backbone.weights"), "final_loss": history[-1],
            "epochs": len(history)}


def load_backbone(path: Path | str, config: RunConfig) -> tuple[AcousticDecoder, AnchorEncoder]:
    tensors = load_weights(path)
    decoder = AcousticDecoder(config.decoder)
    anchor_encoder = AnchorEncoder(config.decoder.dim, rng_seed=config.decoder.rng_seed)
    load_into_module(tensors, decoder, prefix="decoder.")
    load_into_module(tensors, anchor_encoder, prefix="anchor_encoder.")
    for p in decoder.parameters():
        p.requires_grad_(False)
    for p in anchor_encoder.parameters():
        p.requires_grad_(False)
    return decoder, anchor_encoder


def train_adapter_stage(
    dataset_dir: Path | str,
    backbone_path: Path | str,
    config: RunConfig,
    out_dir: Path | str,
    injection_ratio: float | None = None,
) -> dict:
    import dataclasses

    from .plots import plot_loss_curve

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    backbone_path = Path(backbone_path)
    if not backbone_path.exists():
        raise FileNotFoundError(
            f"backbone weights not found at {backbone_path}; run `train backbone` first"
        )
    run_config = config
    if injection_ratio is not None:
        run_config = dataclasses.replace(
            config, decoder=dataclasses.replace(config.decoder, injection_ratio=injection_ratio)
        )
    clips, codec = read_music_corpus(Path(dataset_dir) / "music")
    decoder, anchor_encoder = load_backbone(backbone_path, run_config)
    adapter = ControlAdapter(run_config.adapter)
    crop = run_config.train.adapter_crop_s
    gates, history = train_adapter(
        clips,
        codec,
        decoder,
        anchor_encoder,
        adapter,
        epochs=run_config.train.adapter_epochs,
        learning_rate=run_config.train.adapter_lr,
        gate_learning_rate=run_config.train.gate_lr,
        batch_size=run_config.train.batch_size,
        rng_seed=run_config.seed,
        crop_steps=None if crop is None else crop * codec.tokens_per_second,
    )
    tensors = {f"adapter.{k}": v for k, v in module_tensors(adapter).items()}
    tensors.update({f"gates.{k}": v for k, v in module_tensors(gates).items()})
    save_weights(out_dir / "control.weights", tensors)
    write_loss_csv(history, out_dir / "adapter_loss.csv")
    plot_loss_curve(history, out_dir / "adapter_loss.png", "adapter fine-tuning loss")
    return {"weights": str(out_dir / "control.weights"), "final_loss": history[-1],
            "epochs": len(history)}


def load_control(path: Path | str, config: RunConfig) -> tuple[ControlAdapter, InjectionGates]:
    tensors = load_weights(path)
    adapter = ControlAdapter(config.adapter)
    gates = InjectionGates(config.decoder.shallow_layers, config.decoder.tie_gates)
    load_into_module(tensors, adapter, prefix="adapter.")
    load_into_module(tensors, gates, prefix="gates.")
    adapter.eval()
    return adapter, gates


def load_probe(path: Path | str, config: RunConfig) -> tuple[FrozenBackbone, ProbeHead]:
    tensors = load_weights(path)
    backbone = FrozenBackbone(config.probe)
    head = ProbeHead(config.probe.hidden_dim, config.probe.probe_width, config.probe.rng_seed)
    load_into_module(tensors, backbone, prefix="backbone.")
    load_into_module(tensors, head, prefix="head.")
    return backbone, head


def load_models(
    config: RunConfig,
    probe_path: Path | str,
    backbone_path: Path | str,
    control_path: Path | str,
) -> GenerationModels:
    for path, stage in ((probe_path, "probe"), (backbone_path, "backbone"),
                        (control_path, "adapter")):
        if not Path(path).exists():
            raise FileNotFoundError(f"missing {stage} weights: {path}")
    backbone, head = load_probe(probe_path, config)
    decoder, anchor_encoder = load_backbone(backbone_path, config)
    adapter, gates = load_control(control_path, config)
    return GenerationModels(backbone, head, anchor_encoder, decoder, adapter, gates, config.codec)


# -- generation ---------------------------------------------------------------


def generate_stage(
    video: PseudoVideo,
    models: GenerationModels,
    config: RunConfig,
    out_dir: Path | str,
    sonify_to: str | None = None,
) -> LongformResult:
    from .plots import plot_seams, plot_trajectory

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    plan = plan_windows(
        len(video), config.windows.window_s, config.windows.overlap_s, config.windows.prefix_s
    )
    result = generate_longform(video, models, plan, config.sampler)
    write_tokens_bin(out_dir / "tokens.bin", result.tokens)
    write_va_csv(out_dir / "va.csv", result.trajectory)

    scores = seam_discontinuity(result.tokens, result.seam_seconds)
    with open(out_dir / "seams.csv", "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["seam_s", "discontinuity"])
        for second, score in zip(result.seam_seconds, scores):
            writer.writerow([second, f"{score:.6f}"])

    decoded = oracle_decode(result.tokens, window_s=5)
    plot_trajectory(
        result.trajectory,
        out_dir / "trajectory.png",
        decoded=(decoded.valence, decoded.arousal, 5),
        title="extracted trajectory vs oracle-decoded output",
    )
    if result.seam_seconds:
        plot_seams(scores, result.seam_seconds, out_dir / "seams.png")
    if sonify_to:
        from .sonify import sonify

        sonify(result.tokens, out_dir / sonify_to)
    return result


# -- evaluation ---------------------------------------------------------------


def eval_stage(gen_dir: Path | str, ref_dir: Path | str, out_dir: Path | str,
               window_s: int = 5) -> dict:
    from .metrics import clip_embedding
    from .plots import plot_alignment, plot_embedding_stats

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    gen_clips, gen_codec = read_music_corpus(gen_dir)
    ref_clips, ref_codec = read_music_corpus(ref_dir)
    if gen_codec != ref_codec:
        raise ValueError("generated and reference corpora use different codecs")
    report = evaluate_corpora(
        [(c.tokens, c.va_curve) for c in gen_clips],
        [c.tokens for c in ref_clips],
        window_s=window_s,
    )
    payload = report.to_dict()
    (out_dir / "report.json").write_text(
        json.dumps(payload, sort_keys=True, indent=2, allow_nan=True) + "\n", encoding="utf-8"
    )
    with open(out_dir / "report.csv", "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["clip", "alignment_valence", "alignment_arousal"])
        for row in report.per_clip:
            writer.writerow([row["clip"], f"{row['valence']:.6f}", f"{row['arousal']:.6f}"])
    plot_alignment(report.per_clip, out_dir / "alignment.png")
    plot_embedding_stats(
        np.stack([clip_embedding(c.tokens, window_s) for c in gen_clips]),
        np.stack([clip_embedding(c.tokens, window_s) for c in ref_clips]),
        out_dir / "embedding_stats.png",
    )
    return payload


# -- ablation -----------------------------------------------------------------


@dataclass
class EvalArc:
    arc: NarrativeArc
    video: PseudoVideo
    seed: int


def build_eval_arcs(config: RunConfig, count: int | None = None,
                    duration_s: int | None = None, realm: int = 2) -> list[EvalArc]:
    count = count or config.train.eval_arcs
    duration_s = duration_s or config.train.eval_duration_s
    arcs = []
    for j in range(count):
        seed = _stream_seed(config.seed, j, realm)
        arc = make_arc(seed, duration_s, "random-walk")
        video = render_pseudo_video(arc, scene_id=1000 + j, rng_seed=seed)
        arcs.append(EvalArc(arc, video, seed))
    return arcs


def alignment_on_arcs(
    eval_arcs: list[EvalArc],
    decoder: AcousticDecoder,
    anchor_encoder: AnchorEncoder,
    adapter: ControlAdapter | None,
    gates: InjectionGates | None,
    config: RunConfig,
    window_s: int = 5,
) -> tuple[float, float, list[dict]]:
    """Mean per-axis alignment of conditioned (or unconditioned) generations."""
    tps = config.codec.tokens_per_second
    rows = []
    vs, ars = [], []
    for j, item in enumerate(eval_arcs):
        traj = item.arc.sample_1hz()
        control = (
            control_signal(traj, len(traj) * tps, adapter) if adapter is not None else None
        )
        with torch.no_grad():
            memory = anchor_encoder(conceptualize(item.video)).detach()
        grid = sample(
            decoder,
            memory,
            control,
            None,
            len(traj) * tps,
            SamplerConfig(config.sampler.temperature, config.sampler.top_k,
                          config.sampler.rng_seed + item.seed % 100_000),
            config.codec,
            gates,
        )
        score = affect_alignment(grid, traj, window_s)
        rows.append({"arc": j, "valence": score.valence, "arousal": score.arousal})
        if score.valence_defined:
            vs.append(score.valence)
        if score.arousal_defined:
            ars.append(score.arousal)
    return float(np.mean(vs)), float(np.mean(ars)), rows


def ablate_stage(
    dataset_dir: Path | str,
    config: RunConfig,
    ratios: list[float],
    out_dir: Path | str,
    backbone_path: Path | str | None = None,
) -> list[dict]:
    """Train one adapter per injection ratio off a shared pretrained backbone
    and compare conditioned alignment on held-out arcs."""
    from .plots import plot_ablation

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for ratio in ratios:
        if not 0 < ratio <= 1:
            raise ValueError(f"injection ratio {ratio} outside (0, 1]")
    if backbone_path is None:
        info = train_backbone_stage(dataset_dir, config, out_dir)
        backbone_path = info["weights"]

    clips, codec = read_music_corpus(Path(dataset_dir) / "music")
    eval_arcs = build_eval_arcs(config)
    rows = []
    for ratio in ratios:
        ratio_dir = out_dir / f"ratio_{int(round(ratio * 100)):03d}"
        info = train_adapter_stage(dataset_dir, backbone_path, config, ratio_dir,
                                   injection_ratio=ratio)
        import dataclasses

        ratio_config = dataclasses.replace(
            config, decoder=dataclasses.replace(config.decoder, injection_ratio=ratio)
        )
        decoder, anchor_encoder = load_backbone(backbone_path, ratio_config)
        adapter, gates = load_control(info["weights"], ratio_config)
        ce = held_out_ce(clips[: min(len(clips), 16)], codec, decoder, anchor_encoder,
                         adapter, gates)
        val, aro, _ = alignment_on_arcs(eval_arcs, decoder, anchor_encoder, adapter, gates,
                                        ratio_config)
        rows.append(
            {
                "injection_ratio": ratio,
                "alignment_valence": val,
                "alignment_arousal": aro,
                "alignment_mean": 0.5 * (val + aro),
                "train_ce": info["final_loss"],
                "sample_ce": ce,
            }
        )

    (out_dir / "ablation.json").write_text(
        json.dumps(rows, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    with open(out_dir / "ablation.csv", "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(list(rows[0].keys()))
        for row in rows:
            writer.writerow([f"{v:.6f}" if isinstance(v, float) else v for v in row.values()])
    plot_ablation(rows, out_dir / "ablation.png")
    return rows
