"""Command-line entry point: datagen, train, generate, eval, ablate.

Exit codes: 0 ok, 1 usage error, 2 runtime error.  Every command echoes its
resolved configuration into the output directory so a run can be repeated
bit-for-bit from the artifacts alone.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import torch

from . import pipeline
from .config import RunConfig, load_config
from .world import make_arc, render_pseudo_video
from .world.arcs import ARCHETYPES
from .world.io import read_video_dir


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; usage errors are 1
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON run configuration")
    parser.add_argument("--seed", type=int, help="override the global seed")
    parser.add_argument("--out", type=Path, required=True, help="output directory")
    parser.add_argument("--threads", type=int, help="torch CPU thread count")


def build_parser() -> _Parser:
    parser = _Parser(prog="moodscore", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_data = sub.add_parser("datagen", help="generate the paired synthetic corpora")
    _add_common(p_data)

    p_train = sub.add_parser("train", help="run one training stage")
    p_train.add_argument("stage", choices=("probe", "backbone", "adapter"))
    p_train.add_argument("--dataset", type=Path, required=True, help="datagen output dir")
    p_train.add_argument("--backbone", type=Path, help="backbone weights (adapter stage)")
    _add_common(p_train)

    p_gen = sub.add_parser("generate", help="long-form generation from a video or an arc spec")
    src = p_gen.add_argument_group("input (video dir, or duration+archetype)")
    src.add_argument("--video", type=Path, help="video directory (frames.bin + va.csv)")
    src.add_argument("--duration", type=int, help="arc duration in seconds")
    src.add_argument("--archetype", choices=ARCHETYPES, default="random-walk")
    src.add_argument("--scene-id", type=int, default=0)
    src.add_argument("--arc-seed", type=int, default=0)
    p_gen.add_argument("--probe", type=Path, required=True)
    p_gen.add_argument("--backbone", type=Path, required=True)
    p_gen.add_argument("--control", type=Path, required=True)
    p_gen.add_argument("--sonify", metavar="WAV", help="also render audio to this filename")
    _add_common(p_gen)

    p_eval = sub.add_parser("eval", help="metric report between two clip corpora")
    p_eval.add_argument("--gen", type=Path, required=True, help="generated corpus dir")
    p_eval.add_argument("--ref", type=Path, required=True, help="reference corpus dir")
    _add_common(p_eval)

    p_abl = sub.add_parser("ablate", help="injection-ratio comparison harness")
    p_abl.add_argument("--dataset", type=Path, required=True)
    p_abl.add_argument("--backbone", type=Path, help="reuse a pretrained backbone")
    p_abl.add_argument(
        "--ratios", default="0.5,0.75,1.0",
        help="comma-separated injection ratios in (0, 1]",
    )
    _add_common(p_abl)
    return parser


def _resolve_config(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        config = config.with_seed(args.seed)
    return config


def _cmd_datagen(args, config: RunConfig) -> int:
    counts = pipeline.datagen(config, args.out)
    print(
        f"wrote {counts['music_clips']} music clips "
        f"({counts['music_clip_minutes']:.1f} clip-minutes) and "
        f"{counts['video_clips']} video clips to {args.out}"
    )
    return 0


def _cmd_train(args, config: RunConfig) -> int:
    if args.stage == "probe":
        info = pipeline.train_probe_stage(args.dataset, config, args.out)
    elif args.stage == "backbone":
        info = pipeline.train_backbone_stage(args.dataset, config, args.out)
    else:
        if args.backbone is None:
            print(
                "moodscore train adapter: error: --backbone is required "
                "(run `train backbone` first)",
                file=sys.stderr,
            )
            return 1
        info = pipeline.train_adapter_stage(args.dataset, args.backbone, config, args.out)
    print(f"{args.stage}: final loss {info['final_loss']:.4f} over {info['epochs']} epochs; "
          f"weights at {info['weights']}")
    return 0


def _cmd_generate(args, config: RunConfig) -> int:
    if args.video is None and args.duration is None:
        print("moodscore generate: error: provide --video or --duration", file=sys.stderr)
        return 1
    if args.video is not None:
        video = read_video_dir(args.video)
    else:
        arc = make_arc(args.arc_seed, args.duration, args.archetype)
        video = render_pseudo_video(arc, scene_id=args.scene_id, rng_seed=args.arc_seed)
    models = pipeline.load_models(config, args.probe, args.backbone, args.control)
    result = pipeline.generate_stage(video, models, config, args.out, sonify_to=args.sonify)
    print(
        f"generated {len(result.tokens)} steps x {result.tokens.tokens.shape[1]} codebooks "
        f"across {len(result.window_bounds)} windows -> {args.out}"
    )
    return 0


def _cmd_eval(args, config: RunConfig) -> int:
    payload = pipeline.eval_stage(args.gen, args.ref, args.out)
    print(
        f"fd={payload['fd']:.6f} kld={payload['kld']:.6f} "
        f"alignment=({payload['alignment_valence']:.3f}, {payload['alignment_arousal']:.3f}) "
        f"-> {args.out / 'report.json'}"
    )
    return 0


def _cmd_ablate(args, config: RunConfig) -> int:
    try:
        ratios = [float(r) for r in args.ratios.split(",") if r.strip()]
    except ValueError:
        print(f"moodscore ablate: error: bad --ratios {args.ratios!r}", file=sys.stderr)
        return 1
    if not ratios or any(not 0 < r <= 1 for r in ratios):
        print(
            f"moodscore ablate: error: ratios must lie in (0, 1], got {args.ratios!r}",
            file=sys.stderr,
        )
        return 1
    rows = pipeline.ablate_stage(args.dataset, config, ratios, args.out,
                                 backbone_path=args.backbone)
    header = f"{'ratio':>6} {'align_v':>8} {'align_a':>8} {'mean':>8}"
    print(header)
    for row in rows:
        print(
            f"{row['injection_ratio']:>6.2f} {row['alignment_valence']:>8.3f} "
            f"{row['alignment_arousal']:>8.3f} {row['alignment_mean']:>8.3f}"
        )
    return 0


_COMMANDS = {
    "datagen": _cmd_datagen,
    "train": _cmd_train,
    "generate": _cmd_generate,
    "eval": _cmd_eval,
    "ablate": _cmd_ablate,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    torch.use_deterministic_algorithms(True)
    if args.threads:
        torch.set_num_threads(args.threads)
    try:
        config = _resolve_config(args)
        args.out.mkdir(parents=True, exist_ok=True)
        config.save(args.out / "run_config.json")
        return _COMMANDS[args.command](args, config)
    except (ValueError, OSError) as err:
        print(f"moodscore {args.command}: error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
