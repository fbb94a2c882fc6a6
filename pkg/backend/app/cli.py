"""
Command Line Interface
Runs the pipeline stages and the benchmark/ablation harnesses.

Usage:
    python -m app preprocess frames/ --out maps/
    python -m app link detections.jsonl --output tubes.jsonl --link.k 3
    python -m app link --heatmaps sim/heatmaps --output tubes.jsonl --detect.nms_iou 0.4
    python -m app eval --tubes tubes.jsonl --dets detections.jsonl --gt gt.jsonl
    python -m app bench --scenario scenario.json
    python -m app sweep --scenario scenario.json --param k --values 0:8
    python -m app simulate --scenario scenario.json --out sim/ --frames --heatmaps

Every config key is also a flag (``--ssim.window 7``, ``--link.lambda 0.3``).
Precedence: flags > config file (--config or ACTIONTUBE_CONFIG) > defaults.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from app.core.config import APP_NAME, APP_VERSION, PipelineConfig, flatten_config, iter_config_keys, load_pipeline_config
from app.core.errors import InputError, PipelineError
from app.core.logging import setup_logging
from app.models.detection import Detection
from app.services.benchmark import ALL_MODES, empty_heatmaps, run_benchmark, scenario_inputs
from app.services.detect import HEATMAP_NAME_FORMAT, detect_frame, iter_heatmap_dir, write_heatmap_file
from app.services.evaluation import map_suite
from app.services.frame_io import frame_filename, iter_frames, write_frame_png, write_map_png
from app.services.imaging import TemporalPreprocessor
from app.services.records import (
    read_ground_truth,
    read_tubes,
    read_video_detections,
    tube_class_count,
    tube_to_record,
    write_detections,
    write_ground_truth,
    write_tubes,
)
from app.services.simulation import load_scenario_file, render_frames, render_ground_truth, synth_detections, synth_heatmaps
from app.services.sweep import SWEEP_PARAMS, parse_values, run_sweep
from app.services.tubes import TubeLinker

logger = logging.getLogger("app.cli")


# =============================================================================
# PARSER
# =============================================================================

def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="Key-value config file (default: $ACTIONTUBE_CONFIG)")
    group = parser.add_argument_group("pipeline configuration")
    for key, info in iter_config_keys():
        group.add_argument(f"--{key}", dest=key, default=None, metavar="VALUE", help=info.description)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=APP_NAME,
        description="Online action-tube detection toolkit",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__.split("Usage:", 1)[1] if __doc__ else None,
    )
    parser.add_argument("--version", action="version", version=f"{APP_NAME} {APP_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="Write temporal maps and the shift-direction manifest")
    p.add_argument("frames", help="PNG frame directory or raw frame stream")
    p.add_argument("--out", required=True, help="Output directory")
    _add_config_flags(p)

    p = sub.add_parser("link", help="Link per-frame detections into action tubes")
    p.add_argument("detections", nargs="?", help="Detections JSONL")
    p.add_argument("--heatmaps", metavar="DIR", help="Decode heatmap files (%%06d.bin) instead of reading detections")
    p.add_argument("--video", default="", help="Video name for tubes decoded from --heatmaps")
    p.add_argument("--output", "-o", default="-", help="Tubes JSONL (default: stdout)")
    p.add_argument("--emit-online", metavar="PATH", help="Write the tube set after every frame as JSONL")
    _add_config_flags(p)

    p = sub.add_parser("eval", help="Frame and video mAP against ground truth")
    p.add_argument("--tubes", required=True, help="Tubes JSONL")
    p.add_argument("--gt", required=True, help="Ground-truth JSONL")
    p.add_argument("--dets", help="Detections JSONL for f-mAP (default: boxes carried by the tubes)")
    p.add_argument("--num-classes", type=int, help="Class count when it cannot be inferred")
    p.add_argument("--output", "-o", help="Also write the report as JSON")
    _add_config_flags(p)

    p = sub.add_parser("bench", help="Per-stage latency for each temporal mode")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--scenario", help="Scenario JSON to simulate frames and heatmaps from")
    source.add_argument("--frames", help="PNG frame directory or raw stream")
    p.add_argument("--heatmaps", metavar="DIR", help="Heatmap files matching --frames (default: peak-free maps)")
    p.add_argument("--num-frames", type=int, default=500, help="Timed frames per mode")
    p.add_argument("--warmup", type=int, default=20, help="Untimed frames per mode")
    p.add_argument("--modes", default=",".join(ALL_MODES), help="Comma-separated temporal modes")
    p.add_argument("--down-ratio", type=int, default=4)
    p.add_argument("--output", "-o", help="Also write the report as JSON")
    _add_config_flags(p)

    p = sub.add_parser("sweep", help="Ablation table over one linking or temporal parameter")
    p.add_argument("--scenario", required=True, help="Scenario JSON")
    p.add_argument("--param", required=True, choices=sorted(SWEEP_PARAMS))
    p.add_argument("--values", required=True, help="Comma list, or lo:hi for integer parameters")
    p.add_argument("--output", "-o", help="Also write the table as JSON")
    _add_config_flags(p)

    p = sub.add_parser("simulate", help="Generate ground truth, detections, frames and heatmaps")
    p.add_argument("--scenario", required=True, help="Scenario JSON")
    p.add_argument("--out", required=True, help="Output directory")
    p.add_argument("--frames", action="store_true", help="Also render PNG frames")
    p.add_argument("--heatmaps", action="store_true", help="Also write binary heatmap files")
    p.add_argument("--down-ratio", type=int, default=4)
    p.add_argument("--seed", type=int, help="Override the scenario file's seed")
    _add_config_flags(p)

    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    values = vars(args)
    return {key: values[key] for key, _ in iter_config_keys() if values.get(key) is not None}


def _write_json(payload: Any, path: Optional[str]) -> None:
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


# =============================================================================
# COMMANDS
# =============================================================================

def cmd_preprocess(args: argparse.Namespace, config: PipelineConfig) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    preprocessor = TemporalPreprocessor(config.ssim, config.temporal)
    mode = config.temporal.mode
    entries: List[Dict[str, Any]] = []

    for frame in iter_frames(args.frames):
        cascaded = preprocessor.push(frame)
        name = frame_filename(frame.index)
        if mode in ("ssmap", "dsim"):
            write_map_png(cascaded.temporal, out / name)
        elif mode == "raw_prev":
            write_frame_png(frame.with_pixels(cascaded.temporal), out / name)
        entries.append({
            "frame": frame.index,
            "past": cascaded.past_index,
            "direction": cascaded.direction.as_list(),
        })

    if not entries:
        raise InputError(f"No frames found in {args.frames}")
    manifest = {"mode": mode, "frame_gap": config.temporal.frame_gap, "frames": entries}
    _write_json(manifest, str(out / "manifest.json"))
    logger.info("Preprocessed %d frames into %s", len(entries), out)
    return 0


def _link_source(args: argparse.Namespace, config: PipelineConfig) -> Dict[str, Dict[int, List[Detection]]]:
    if args.heatmaps and args.detections:
        raise InputError("Give either a detections file or --heatmaps, not both")
    if args.heatmaps:
        frames = {hm.frame: detect_frame(hm, config.detect) for hm in iter_heatmap_dir(args.heatmaps)}
        return {args.video: frames}
    if not args.detections:
        raise InputError("link needs a detections file or --heatmaps")
    videos, _ = read_video_detections(args.detections)
    return videos


def cmd_link(args: argparse.Namespace, config: PipelineConfig) -> int:
    videos = _link_source(args, config)
    online = open(args.emit_online, "w", encoding="utf-8") if args.emit_online else None
    tubes = []
    try:
        for video in sorted(videos):
            linker = TubeLinker(config.link, video=video)
            for t, detections in videos[video].items():
                linker.step(t, detections)
                if online is not None:
                    snapshot = [tube_to_record(tb).model_dump(by_alias=True) for tb in linker.snapshot()]
                    online.write(json.dumps({"video": video, "frame": t, "tubes": snapshot}) + "\n")
                    online.flush()
            tubes.extend(linker.finalize())
    finally:
        if online is not None:
            online.close()
    count = write_tubes(tubes, args.output)
    logger.info("Wrote %d tubes", count)
    return 0


def cmd_eval(args: argparse.Namespace, config: PipelineConfig) -> int:
    tubes = read_tubes(args.tubes)
    num_classes = args.num_classes
    preds = None
    if args.dets:
        preds, num_classes = read_video_detections(args.dets, num_classes)
    gt = read_ground_truth(args.gt, num_classes, min_classes=tube_class_count(tubes))
    report = map_suite(preds, tubes, gt, config.evaluation)
    sys.stdout.write(report.to_tsv())
    _write_json(report.model_dump(mode="json"), args.output)
    return 0


def cmd_bench(args: argparse.Namespace, config: PipelineConfig) -> int:
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    if args.scenario:
        frames, heatmaps = scenario_inputs(load_scenario_file(args.scenario), args.down_ratio)
    else:
        frames = list(iter_frames(args.frames))
        if not frames:
            raise InputError(f"No frames found in {args.frames}")
        if args.heatmaps:
            heatmaps = list(iter_heatmap_dir(args.heatmaps))
        else:
            heatmaps = empty_heatmaps(frames, down_ratio=args.down_ratio)
    report = run_benchmark(frames, heatmaps, config, modes, args.num_frames, args.warmup)
    sys.stdout.write(report.to_tsv())
    _write_json(report.model_dump(mode="json"), args.output)
    return 0


def cmd_sweep(args: argparse.Namespace, config: PipelineConfig) -> int:
    scenario_file = load_scenario_file(args.scenario)
    table = run_sweep(scenario_file, config, args.param, parse_values(args.param, args.values))
    sys.stdout.write(table.to_tsv())
    _write_json(table.model_dump(mode="json"), args.output)
    return 0


def cmd_simulate(args: argparse.Namespace, config: PipelineConfig) -> int:
    scenario_file = load_scenario_file(args.scenario)
    seed = scenario_file.seed if args.seed is None else args.seed
    scenario = scenario_file.scenario
    out = Path(args.out)

    write_ground_truth(render_ground_truth(scenario), out / "gt.jsonl")
    detections = synth_detections(scenario, scenario_file.noise, seed)
    write_detections(detections, out / "detections.jsonl", video=scenario.video)
    if args.frames:
        for frame in render_frames(scenario, seed):
            write_frame_png(frame, out / "frames" / frame_filename(frame.index))
    if args.heatmaps:
        for t, dets in detections.items():
            heatmaps = synth_heatmaps(dets, scenario.num_classes, scenario.width, scenario.height, args.down_ratio, t)
            write_heatmap_file(heatmaps, out / "heatmaps" / HEATMAP_NAME_FORMAT.format(t))
    _write_json({"seed": seed, "config": flatten_config(config)}, str(out / "run.json"))
    logger.info("Simulated %d frames into %s", scenario.num_frames, out)
    return 0


COMMANDS = {
    "preprocess": cmd_preprocess,
    "link": cmd_link,
    "eval": cmd_eval,
    "bench": cmd_bench,
    "sweep": cmd_sweep,
    "simulate": cmd_simulate,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point; returns the process exit code"""
    args = build_parser().parse_args(argv)
    try:
        config = load_pipeline_config(args.config, _overrides(args))
        setup_logging(config.log)
        return COMMANDS[args.command](args, config)
    except PipelineError as e:
        logger.debug("%s failed", args.command, exc_info=True)
        print(f"error: {e.message}", file=sys.stderr)
        return 1
