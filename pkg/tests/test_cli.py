"""End-to-end checks of the command line: exit codes, files, determinism."""

import json

import numpy as np
import pytest

from spikematch import (
    SpikingNetwork,
    default_synthetic_config,
    identity_stream,
    read_aer,
    save_weights,
    write_aer,
)
from spikematch.cli import main
from spikematch.config import load_network_config
from spikematch.events import synthesize_stream

TOY_CONFIG = """\
geometry: {width: 16, height: 16}
input_features: 1
ticks_per_buffer: 4
window_us: 8000
layers:
  - {name: cls, kind: conv, features: 2, kernel: 3, threshold: 1.0, weights: stdp}
stdp: {a_plus: 0.05, a_minus: -0.02, convergence_threshold: 1.0e-12}
"""


@pytest.fixture()
def toy_setup(tmp_path):
    """Tiny config plus a two-recording corpus, cheap enough to train twice."""
    cfg = tmp_path / "toy.yaml"
    cfg.write_text(TOY_CONFIG)
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    square = np.ones((3, 3), dtype=bool)
    for i in range(2):
        path = [(2 + k, 3 + i) for k in range(8)]
        stream = synthesize_stream(
            square, path, event_rate=40_000, duration_us=40_000,
            seed=i, width=16, height=16,
        )
        (corpus / f"rec{i}.aer").write_bytes(write_aer(stream))
    return cfg, corpus


def test_train_toy_corpus_reruns_byte_identical(toy_setup, tmp_path):
    cfg, corpus = toy_setup
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        rc = main(["train", "--config", str(cfg), "--corpus", str(corpus),
                   "--epochs", "2", "--out", str(out)])
        assert rc == 0
        outs.append(out)
    first, second = outs
    assert (first / "checkpoint.smw").read_bytes() == (second / "checkpoint.smw").read_bytes()
    assert (first / "training_log.json").read_text() == (second / "training_log.json").read_text()
    log = json.loads((first / "training_log.json").read_text())
    # one plastic layer, threshold unreachable in two epochs: exactly two entries
    assert [e["epoch"] for e in log] == [0, 1]
    assert all(e["layer"] == "cls" for e in log)


def test_train_missing_corpus_is_usage_error(tmp_path):
    rc = main(["train", "--corpus", str(tmp_path / "nope"), "--out", str(tmp_path / "o")])
    assert rc == 2


def test_train_corpus_without_recordings_is_usage_error(tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    rc = main(["train", "--corpus", str(empty), "--out", str(tmp_path / "o")])
    assert rc == 2


def test_segment_needs_an_input(checkpoint_path, tmp_path):
    rc = main(["segment", "--checkpoint", str(checkpoint_path), "--out", str(tmp_path)])
    assert rc == 2


def test_segment_missing_checkpoint_is_usage_error(tmp_path):
    rc = main(["segment", "--checkpoint", str(tmp_path / "absent.smw"),
               "--scenario", "hbar", "--out", str(tmp_path / "o")])
    assert rc == 2


def test_unknown_eval_scenario_is_rejected_by_parser():
    with pytest.raises(SystemExit) as exc:
        main(["eval", "--scenario", "bogus"])
    assert exc.value.code == 2


@pytest.fixture()
def solo_recording(tmp_path):
    stream = identity_stream("hbar", 3, n_buffers=5)
    path = tmp_path / "solo.aer"
    path.write_bytes(write_aer(stream))
    return path


def test_segment_solo_identity_one_object_per_buffer(checkpoint_path, solo_recording, tmp_path):
    out = tmp_path / "seg"
    rc = main(["segment", "--checkpoint", str(checkpoint_path),
               str(solo_recording), "--out", str(out)])
    assert rc == 0
    results = json.loads((out / "results.json").read_text())
    assert len(results) == 5
    assert [len(r["objects"]) for r in results] == [1] * 5


def test_segment_rerun_is_byte_identical(checkpoint_path, solo_recording, tmp_path):
    payloads = []
    for name in ("a", "b"):
        out = tmp_path / name
        rc = main(["segment", "--checkpoint", str(checkpoint_path),
                   str(solo_recording), "--out", str(out)])
        assert rc == 0
        payloads.append((out / "results.json").read_bytes())
    assert payloads[0] == payloads[1]


def test_segment_render_writes_four_frames_per_buffer(checkpoint_path, solo_recording, tmp_path):
    out = tmp_path / "seg"
    rc = main(["segment", "--checkpoint", str(checkpoint_path),
               str(solo_recording), "--out", str(out), "--render"])
    assert rc == 0
    for suffix in ("input.png", "mask.pgm", "instances.png", "objects.png"):
        assert len(list(out.glob(f"buf*_{suffix}"))) == 5


def test_track_recovery_scene_keeps_two_identities(checkpoint_path, tmp_path):
    out = tmp_path / "trk"
    rc = main(["track", "--checkpoint", str(checkpoint_path),
               "--scenario", "recovery", "--out", str(out)])
    assert rc == 0
    timeline = json.loads((out / "timeline.json").read_text())
    assert len(timeline) == 30
    ids = {e["id"] for step in timeline for e in step}
    assert len(ids) == 2


def test_track_empty_recording_yields_empty_timeline(checkpoint_path, tmp_path):
    empty = tmp_path / "empty.aer"
    empty.write_bytes(b"")
    out = tmp_path / "trk"
    rc = main(["track", "--checkpoint", str(checkpoint_path), str(empty), "--out", str(out)])
    assert rc == 0
    assert json.loads((out / "timeline.json").read_text()) == []


def test_eval_recovery_reports_rate_and_tables(checkpoint_path, tmp_path):
    out = tmp_path / "ev"
    rc = main(["eval", "--checkpoint", str(checkpoint_path),
               "--scenario", "recovery", "--out", str(out)])
    assert rc == 0
    report = json.loads((out / "report.json").read_text())
    assert report["scenario"] == "recovery"
    assert report["recovery_rate"] == 100.0
    assert (out / "report.txt").read_text().strip()
    csv_lines = (out / "report.csv").read_text().splitlines()
    assert csv_lines[0] == "buffer,expected,detected,instances,correct,failure"
    assert len(csv_lines) == 1 + len(report["buffers"])


def test_eval_self_match_with_query_is_perfect(checkpoint_path, tmp_path):
    out = tmp_path / "ev"
    rc = main(["eval", "--checkpoint", str(checkpoint_path),
               "--scenario", "self_match", "--include-query", "--out", str(out)])
    assert rc == 0
    report = json.loads((out / "report.json").read_text())
    assert report["self_match"]["1"] == 100.0


def test_viz_features_renders_every_map(tmp_path):
    # full-scale config straight from initialization; rendering must not
    # depend on training having happened
    config = load_network_config("configs/face.yaml")
    net = SpikingNetwork.initialize(config, seed=0)
    ckpt = tmp_path / "fresh.smw"
    save_weights(ckpt, net.weights)
    out = tmp_path / "viz"
    rc = main(["viz-features", "--config", "configs/face.yaml",
               "--checkpoint", str(ckpt), "--out", str(out)])
    assert rc == 0
    tiles = list(out.glob("feature_*.png"))
    assert len(tiles) == sum(l.features for l in config.conv_layers)


def test_synth_writes_recording_with_sidecar(tmp_path):
    out = tmp_path / "scene.aer"
    rc = main(["synth", "--scenario", "hbar", "--seed", "3", "--out", str(out)])
    assert rc == 0
    meta = json.loads(out.with_suffix(".json").read_text())
    stream = read_aer(out.read_bytes(), meta["width"], meta["height"])
    assert len(stream.events) == meta["events"] > 0


def test_segment_reads_geometry_from_sidecar(checkpoint_path, tmp_path):
    # the scene is 128x128 while the checkpoint's config canvas is 64x64;
    # without the sidecar the events would land outside the canvas
    scene = tmp_path / "scene.aer"
    assert main(["synth", "--scenario", "multistream", "--seed", "5",
                 "--out", str(scene)]) == 0
    out = tmp_path / "seg"
    rc = main(["segment", "--checkpoint", str(checkpoint_path), str(scene),
               "--out", str(out)])
    assert rc == 0
    assert len(json.loads((out / "results.json").read_text())) == 30


def test_corrupt_sidecar_is_usage_error(checkpoint_path, tmp_path):
    scene = tmp_path / "scene.aer"
    assert main(["synth", "--scenario", "hbar", "--out", str(scene)]) == 0
    scene.with_suffix(".json").write_text("[1, 2, 3]")
    rc = main(["segment", "--checkpoint", str(checkpoint_path), str(scene),
               "--out", str(tmp_path / "seg")])
    assert rc == 2


def test_synth_unknown_scenario_is_usage_error(tmp_path):
    rc = main(["synth", "--scenario", "bogus", "--out", str(tmp_path / "x.aer")])
    assert rc == 2


def test_default_config_matches_bundled_yaml():
    assert load_network_config("configs/synthetic.yaml") == default_synthetic_config()
