"""Command-line front end wiring the whole pipeline.

Every command is deterministic for a fixed config and seed, and writes
machine-readable JSON first; text tables, CSVs and figures are derived
from the same data.  Exit codes: 0 success, 1 runtime failure, 2 usage
or configuration error.

The dataset root for relative input paths can be set with the
``SPIKEMATCH_DATA_ROOT`` environment variable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import render as rendering
from .checkpoint import load_weights, save_weights, validate_weights
from .config import NetworkConfig, load_network_config
from .errors import ConfigError, SpikeMatchError
from .events import EventStream, buffer, read_aer, write_aer
from .evaluation import (
    SHAPE_NAMES,
    ExperimentSpec,
    build_multistream_scene,
    build_occlusion_scene,
    build_recovery_scene,
    default_synthetic_config,
    identity_stream,
    network_for_geometry,
    report_csv,
    report_table,
    run_experiment,
    training_corpus,
)
from .network import SpikingNetwork, train
from .pipeline import Pipeline
from .tracker import track_sequence

DATA_ROOT_ENV = "SPIKEMATCH_DATA_ROOT"
SCENARIOS = ("multistream", "occlusion", "recovery", "self_match")


def _write_json(path: Path, payload) -> Path:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def _resolve_input(raw: str) -> Path:
    """Try the path as given, then under the dataset root."""
    path = Path(raw)
    if path.exists():
        return path
    root = os.environ.get(DATA_ROOT_ENV)
    if root and (Path(root) / raw).exists():
        return Path(root) / raw
    raise ConfigError(f"input not found: {raw}")


def _load_config(args) -> NetworkConfig:
    config = load_network_config(args.config) if args.config else default_synthetic_config()
    if getattr(args, "window_us", None):
        config = replace(config, window_us=args.window_us)
    return config


def _load_net(args, config: NetworkConfig) -> SpikingNetwork:
    ckpt = Path(args.checkpoint)
    if not ckpt.exists():
        raise ConfigError(f"checkpoint not found: {ckpt}")
    weights = load_weights(ckpt)
    validate_weights(config, weights)
    return SpikingNetwork(config, weights)


def _recording_geometry(path: Path, config: NetworkConfig) -> tuple[int, int]:
    """Canvas size for a recording: its JSON sidecar, else the config.

    AER files do not store geometry; ``synth`` leaves it in a sidecar so
    recordings larger than the configured canvas still read correctly.
    """
    sidecar = path.with_suffix(".json")
    if not sidecar.exists():
        return config.width, config.height
    try:
        meta = json.loads(sidecar.read_text())
        return int(meta["width"]), int(meta["height"])
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"{sidecar}: cannot read geometry sidecar: {exc}") from exc


def _input_stream(args, config: NetworkConfig) -> EventStream:
    """Positional AER file, or a synthesized scenario as a fallback."""
    if args.input:
        path = _resolve_input(args.input)
        width, height = _recording_geometry(path, config)
        return read_aer(path.read_bytes(), width, height)
    if args.scenario:
        return _synthesize(args.scenario, args.seed)
    raise ConfigError("give an input AER file or --scenario")


def _synthesize(scenario: str, seed: int) -> EventStream:
    if scenario in SHAPE_NAMES:
        return identity_stream(scenario, seed)
    builders = {
        "multistream": build_multistream_scene,
        "recovery": build_recovery_scene,
        "occlusion": build_occlusion_scene,
    }
    if scenario not in builders:
        raise ConfigError(
            f"unknown scenario {scenario!r} (identities: {', '.join(SHAPE_NAMES)}; "
            f"scenes: {', '.join(builders)})"
        )
    pct = 25 if scenario == "occlusion" else 0
    stream, _inputs = builders[scenario](ExperimentSpec(scenario, seed=seed, occlusion_pct=pct))
    return stream


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_train(args) -> int:
    config = _load_config(args)
    if args.corpus:
        corpus_dir = Path(args.corpus)
        if not corpus_dir.is_dir():
            raise ConfigError(f"corpus not found: {corpus_dir}")
        dataset = []
        for path in sorted(corpus_dir.glob("*.aer")):
            stream = read_aer(path.read_bytes(), config.width, config.height)
            dataset.extend(buffer(stream, config.window_us))
        if not dataset:
            raise ConfigError(f"corpus has no .aer files: {corpus_dir}")
    else:
        dataset = training_corpus(config, seed=args.seed)

    net, logs = train(dataset, epochs=args.epochs, config=config, seed=args.seed)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ckpt = out / "checkpoint.smw"
    save_weights(ckpt, net.weights)
    _write_json(
        out / "training_log.json",
        [{"layer": l.layer, "epoch": l.epoch, "metric": round(l.metric, 8)} for l in logs],
    )
    print(f"trained {len(logs)} epochs over {len(dataset)} buffers -> {ckpt}")
    return 0


def cmd_segment(args) -> int:
    config = _load_config(args)
    stream = _input_stream(args, config)
    net = network_for_geometry(_load_net(args, config), stream.width, stream.height)
    results = Pipeline(net).process_stream(stream)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "results.json", [r.to_json() for r in results])
    if args.render:
        bufs = buffer(stream, net.config.window_us)
        for r, b in zip(results, bufs):
            rendering.render_buffer(out, r, b, n_classes=net.config.n_classes)
    total = sum(len(r.objects) for r in results)
    print(f"{len(results)} buffers, {total} objects -> {out / 'results.json'}")
    return 0


def cmd_track(args) -> int:
    config = _load_config(args)
    stream = _input_stream(args, config)
    net = network_for_geometry(_load_net(args, config), stream.width, stream.height)
    pipe = Pipeline(net)
    bufs = buffer(stream, net.config.window_us)
    timeline = track_sequence(
        bufs,
        lambda b: pipe.process_buffer(b).objects,
        retention_horizon=net.config.tracker.retention_horizon,
        ash_update=net.config.tracker.ash_update,
    )

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "timeline.json", [[e.to_json() for e in step] for step in timeline])
    if args.render:
        for bi, (b, entries) in enumerate(zip(bufs, timeline)):
            rendering.render_timeline_frame(out, b, entries, bi)
    ids = {e.persistent_id for step in timeline for e in step}
    print(f"{len(timeline)} buffers, {len(ids)} persistent ids -> {out / 'timeline.json'}")
    return 0


def cmd_eval(args) -> int:
    spec = ExperimentSpec(
        scenario=args.scenario,
        seed=args.seed,
        occlusion_pct=args.occlusion_pct,
        noise_rate=args.noise_rate,
        include_query=args.include_query,
        aggregation=args.aggregation,
    )
    if args.checkpoint:
        net = _load_net(args, _load_config(args))
    else:
        # No checkpoint given: train the bundled synthetic network.
        from .evaluation import train_synthetic

        net = train_synthetic(_load_config(args) if args.config else None, seed=args.train_seed)
    report = run_experiment(net, spec)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "report.json", report.to_json())
    table = report_table(report)
    (out / "report.txt").write_text(table + "\n")
    (out / "report.csv").write_text(report_csv(report))
    if args.render:
        rendering.render_eval_figures(out, report)
    print(table)
    return 0


def cmd_viz_features(args) -> int:
    config = _load_config(args)
    net = _load_net(args, config)
    frame = None
    if args.input or args.scenario:
        stream = _input_stream(args, config)
        bufs = buffer(stream, config.window_us)
        if bufs:
            frame = rendering.accumulate_frame(bufs[0])
    out = Path(args.out)
    written = rendering.render_feature_atlas(out, net, frame)
    tiles = sum(1 for p in written if p.name.startswith("feature_"))
    print(f"{tiles} feature tiles -> {out}")
    return 0


def cmd_synth(args) -> int:
    stream = _synthesize(args.scenario, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(write_aer(stream))
    meta = {
        "scenario": args.scenario,
        "seed": args.seed,
        "width": stream.width,
        "height": stream.height,
        "events": int(len(stream.events)),
        "duration_us": int(stream.events["t"].max()) + 1 if len(stream.events) else 0,
    }
    _write_json(out.with_suffix(".json"), meta)
    print(f"{meta['events']} events -> {out}")
    return 0


# ---------------------------------------------------------------------------
# argument wiring
# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser, *, checkpoint_required: bool = False) -> None:
    p.add_argument("--config", help="network config YAML (omit for the bundled synthetic net)")
    p.add_argument("--checkpoint", required=checkpoint_required, help="weight checkpoint path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--window-us", type=int, default=10_000, dest="window_us",
                   help="buffer window in microseconds")


def _add_input(p: argparse.ArgumentParser) -> None:
    p.add_argument("input", nargs="?", help="AER event file")
    p.add_argument("--scenario", help="synthesize this input instead of reading a file")
    p.add_argument("--render", action="store_true", help="write per-buffer frames")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spikematch", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="unsupervised training, writes a checkpoint")
    _add_common(p)
    p.add_argument("--corpus", help="directory of .aer recordings (default: synthetic corpus)")
    p.add_argument("--epochs", type=int, default=6)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("segment", help="per-buffer masks, instances and objects")
    _add_common(p, checkpoint_required=True)
    _add_input(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("track", help="persistent object identities across buffers")
    _add_common(p, checkpoint_required=True)
    _add_input(p)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("eval", help="run an experiment scenario, write a report")
    _add_common(p)
    p.add_argument("--scenario", required=True, choices=SCENARIOS)
    p.add_argument("--occlusion-pct", type=int, default=0, choices=(0, 5, 25, 50))
    p.add_argument("--noise-rate", type=float, default=0.0,
                   help="injected noise, events/pixel/second (recovery scenario)")
    p.add_argument("--include-query", action="store_true",
                   help="self-match: rank the query among its own candidates")
    p.add_argument("--aggregation", default="majority", choices=("majority", "all", "any"))
    p.add_argument("--train-seed", type=int, default=0,
                   help="training seed when no checkpoint is given")
    p.add_argument("--render", action="store_true", help="write summary figures")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("viz-features", help="render learned features in pixel space")
    _add_common(p, checkpoint_required=True)
    _add_input(p)
    p.set_defaults(func=cmd_viz_features)

    p = sub.add_parser("synth", help="write a synthetic scenario as an AER file")
    p.add_argument("--scenario", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="scene.aer")
    p.set_defaults(func=cmd_synth)

    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SpikeMatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
