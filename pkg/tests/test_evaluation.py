"""Experiment harness: scenario specs, metrics, synthetic scenes."""

import json

import numpy as np
import pytest

from spikematch.errors import ConfigError
from spikematch.evaluation import (
    CADENCE_BLOCKS,
    SHAPE_NAMES,
    BufferOutcome,
    ExperimentSpec,
    MetricsReport,
    _aggregate,
    _visible_counts,
    billiard_trajectory,
    build_multistream_scene,
    build_recovery_scene,
    identity_stream,
    network_for_geometry,
    report_csv,
    report_table,
    run_experiment,
    shape_template,
    training_corpus,
)
from spikematch.events import EVENT_DTYPE, EventStream


# ---------------------------------------------------------------------------
# spec validation
# ---------------------------------------------------------------------------


def test_spec_rejects_unknown_scenario():
    with pytest.raises(ConfigError):
        ExperimentSpec("faces")


def test_spec_rejects_bad_aggregation():
    with pytest.raises(ConfigError):
        ExperimentSpec("multistream", aggregation="median")


def test_spec_rejects_unsupported_occlusion():
    with pytest.raises(ConfigError):
        ExperimentSpec("occlusion", occlusion_pct=30)
    ExperimentSpec("occlusion", occlusion_pct=25)  # supported


# ---------------------------------------------------------------------------
# aggregation and report plumbing
# ---------------------------------------------------------------------------


def outcomes(flags):
    return [BufferOutcome(i, 1, 1 if ok else 0, 0, ok, None) for i, ok in enumerate(flags)]


def test_aggregation_rules():
    mostly = outcomes([True, True, False])
    assert _aggregate(mostly, "majority") == 100.0
    assert _aggregate(mostly, "all") == 0.0
    assert _aggregate(mostly, "any") == 100.0
    none = outcomes([False, False])
    assert _aggregate(none, "any") == 0.0


def test_report_serialization_round_trip():
    report = MetricsReport(
        scenario="recovery", seed=3,
        per_input_accuracy=50.0, per_sequence_accuracy=100.0,
        recovery_rate=100.0, self_match={1: 95.0},
        outcomes=outcomes([True, False]),
        failures={"missed_classification": 1},
    )
    doc = json.loads(json.dumps(report.to_json()))
    assert doc["recovery_rate"] == 100.0
    assert doc["self_match"]["1"] == 95.0
    assert len(doc["buffers"]) == 2

    table = report_table(report)
    assert "recovery rate (%)" in table
    assert "top-1 self-match (%)" in table
    assert "failures: missed_classification" in table

    csv = report_csv(report)
    lines = csv.strip().split("\n")
    assert lines[0] == "buffer,expected,detected,instances,correct,failure"
    assert len(lines) == 3


# ---------------------------------------------------------------------------
# synthetic identities
# ---------------------------------------------------------------------------


def test_templates_are_connected_and_distinct():
    masks = {name: shape_template(name) for name in SHAPE_NAMES}
    for name, mask in masks.items():
        assert mask.any(), name
        # flood fill from the first set pixel covers the whole template
        pts = {tuple(p) for p in np.argwhere(mask)}
        seen = {next(iter(pts))}
        frontier = list(seen)
        while frontier:
            y, x = frontier.pop()
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    q = (y + dy, x + dx)
                    if q in pts and q not in seen:
                        seen.add(q)
                        frontier.append(q)
        assert seen == pts, f"{name} template is disconnected"
    arrays = list(masks.values())
    for i in range(len(arrays)):
        for j in range(i + 1, len(arrays)):
            assert not np.array_equal(arrays[i], arrays[j])


def test_cadence_blocks_disjoint():
    spans = sorted(CADENCE_BLOCKS.values())
    for (a0, a1), (b0, b1) in zip(spans, spans[1:]):
        assert a1 <= b0  # active windows never overlap between identities


def test_billiard_reflects_only_at_buffer_boundaries():
    steps_per_buf = 20
    active = np.zeros(steps_per_buf, dtype=bool)
    active[:4] = True
    pos = billiard_trajectory(
        start=(16, 16), velocity=(1, 0), n_buffers=12,
        active=active, lo=8, hi_x=41, hi_y=41,
    )
    assert len(pos) == 12 * steps_per_buf + 1  # final resting position appended
    for b in range(12):
        chunk = pos[b * steps_per_buf : (b + 1) * steps_per_buf]
        xs = [p[0] for p in chunk]
        ys = [p[1] for p in chunk]
        # within one buffer the motion is monotone: no mid-buffer reversal
        assert sorted(xs) == xs or sorted(xs, reverse=True) == xs
        assert sorted(ys) == ys or sorted(ys, reverse=True) == ys
        for x, y in chunk:
            assert 8 <= x <= 41 and 8 <= y <= 41


def test_identity_stream_respects_bounds():
    stream = identity_stream("hbar", seed=4)
    assert stream.width == 64 and stream.height == 64
    ev = stream.events
    assert len(ev) > 0
    assert ev["x"].min() >= 8 and ev["x"].max() < 64 - 8
    assert ev["y"].min() >= 8 and ev["y"].max() < 64 - 8


def test_identity_stream_deterministic():
    a = identity_stream("ring", seed=9)
    b = identity_stream("ring", seed=9)
    assert np.array_equal(a.events, b.events)


def test_training_corpus_size(trained_net):
    corpus = training_corpus(trained_net.config, seed=0)
    assert len(corpus) == 4 * 30


# ---------------------------------------------------------------------------
# scenes
# ---------------------------------------------------------------------------


def test_multistream_scene_composition():
    stream, expected = build_multistream_scene(ExperimentSpec("multistream", seed=0))
    assert stream.width == 128 and stream.height == 128
    assert expected == 3  # distractor patches are not counted as objects
    assert len(stream.events) > 0


def test_recovery_scene_objects_cross():
    stream, inputs = build_recovery_scene(ExperimentSpec("recovery", seed=0))
    assert set(inputs) == {"far", "near"}
    counts = _visible_counts(inputs, 10_000)
    assert max(counts) == 2  # both visible at least once
    assert min(counts) == 1  # and the crossing hides one at least once


def test_visible_counts_geometry():
    def blob(x, y, t):
        ev = np.zeros(1, dtype=EVENT_DTYPE)
        ev["x"], ev["y"], ev["t"] = x, y, t
        return ev

    apart = {
        "far": EventStream(np.concatenate([blob(5, 5, 1000)]), 64, 64),
        "near": EventStream(np.concatenate([blob(50, 50, 1200)]), 64, 64),
    }
    assert _visible_counts(apart, 10_000) == [2]
    # near's extent covers far's single pixel completely
    covered = {
        "far": EventStream(np.concatenate([blob(10, 10, 1000)]), 64, 64),
        "near": EventStream(
            np.concatenate([blob(9, 9, 1100), blob(11, 11, 1300)]), 64, 64
        ),
    }
    assert _visible_counts(covered, 10_000) == [1]


# ---------------------------------------------------------------------------
# runners (on the session-trained network)
# ---------------------------------------------------------------------------


def test_occlusion_zero_pct_equals_multistream(trained_net):
    multi = run_experiment(trained_net, ExperimentSpec("multistream", seed=0))
    occ0 = run_experiment(trained_net, ExperimentSpec("occlusion", seed=0, occlusion_pct=0))
    assert occ0.per_input_accuracy == multi.per_input_accuracy
    assert occ0.per_sequence_accuracy == multi.per_sequence_accuracy
    assert [o.detected for o in occ0.outcomes] == [o.detected for o in multi.outcomes]


def test_self_match_with_query_included_is_perfect(trained_net):
    report = run_experiment(
        trained_net, ExperimentSpec("self_match", seed=0, top_k=(1,), include_query=True)
    )
    assert report.self_match == {1: 100.0}


def test_self_match_rejects_oversized_k(trained_net):
    with pytest.raises(ConfigError):
        run_experiment(trained_net, ExperimentSpec("self_match", seed=0, top_k=(5000,)))


def test_network_for_geometry_preserves_weights(trained_net):
    same = network_for_geometry(trained_net, 64, 64)
    assert same is trained_net
    resized = network_for_geometry(trained_net, 96, 96)
    assert resized.config.width == 96
    for name, w in trained_net.weights.items():
        assert np.array_equal(resized.weights[name], w)
