"""Per-spike instance traces: cover invariant and footprint containment."""

import numpy as np
import pytest

from oracles import reachable_pixels
from spikematch.config import LayerConfig, NetworkConfig
from spikematch.decoder import decode_semantic, record_provenance
from spikematch.errors import GeometryError
from spikematch.hulk import unravel, unravel_all
from spikematch.network import SpikeRecord, SpikeTensor, SpikingNetwork


def random_case(seed: int):
    """A small random network plus a random input tensor."""
    rng = np.random.default_rng(seed)
    layers = (
        LayerConfig("c1", "conv", features=2, in_features=1, kernel=3,
                    threshold=float(rng.uniform(0.8, 1.6))),
        LayerConfig("p1", "pool", features=2, in_features=2, kernel=2, stride=2),
        LayerConfig("cls", "conv", features=2, in_features=2, kernel=3,
                    threshold=float(rng.uniform(1.0, 2.5))),
    )
    config = NetworkConfig(
        width=12, height=12, layers=layers, ticks_per_buffer=4,
        decoder_threshold=float(rng.choice([0.0, 0.5, 0.75])),
    )
    net = SpikingNetwork.initialize(config, seed=seed)
    n = int(rng.integers(15, 45))
    tuples = {
        (0, int(rng.integers(12)), int(rng.integers(12)), int(rng.integers(4)))
        for _ in range(n)
    }
    return net, SpikeTensor.from_tuples(tuples, 1, 12, 12, 4)


def test_union_of_instances_equals_semantic_mask():
    total_traces = 0
    for seed in range(60):
        net, inp = random_case(seed)
        activity = net.forward(inp)
        traces = unravel_all(activity, net)
        total_traces += len(traces)
        mask = decode_semantic(activity, net)
        union: dict[int, set] = {}
        for t in traces:
            union.setdefault(t.class_feature, set()).update(t.pixels)
        assert union == {cls: mask.pixels[cls] for cls in mask.classes()}
    assert total_traces > 50  # the sweep actually exercised instances


def test_traces_match_reachability_oracle():
    for seed in range(40):
        net, inp = random_case(seed)
        activity = net.forward(inp)
        occupancies = [st.occupancy() for st in activity.stages]
        switches = [st.switches for st in activity.stages]
        for trace in unravel_all(activity, net):
            want = reachable_pixels(
                trace.source, occupancies, net.config.layers,
                net.weights, switches, net.config.decoder_threshold,
            )
            assert set(trace.pixels) == want


def test_every_stage_record_inside_parent_window():
    for seed in range(30):
        net, inp = random_case(seed)
        activity = net.forward(inp)
        path = record_provenance(activity, net)
        for tree in path.trees:
            for rec in tree.records:
                if rec.parent is None:
                    continue
                layer = net.config.layers[rec.parent.layer - 1]
                y0 = rec.parent.y * layer.stride
                x0 = rec.parent.x * layer.stride
                assert y0 <= rec.spike.y < y0 + layer.kernel
                assert x0 <= rec.spike.x < x0 + layer.kernel
                assert rec.spike.tick <= rec.parent.tick


def test_instance_ids_follow_spike_order(trained_net):
    from spikematch.evaluation import identity_stream
    from spikematch.events import buffer

    stream = identity_stream("saltire", seed=3)
    for buf in buffer(stream, trained_net.config.window_us)[:6]:
        activity = trained_net.forward_buffer(buf)
        traces = unravel_all(activity, trained_net)
        assert [t.instance_id for t in traces] == list(range(len(traces)))
        assert [t.source for t in traces] == activity.class_spikes()


def test_unravel_single_source():
    for seed in range(30):
        net, inp = random_case(seed)
        activity = net.forward(inp)
        path = record_provenance(activity, net)
        if not path.trees:
            continue
        source = path.trees[0].root
        trace = unravel(source, path)
        assert trace.instance_id == 0
        assert trace.source == source
        assert trace.pixels
        return
    pytest.skip("no classification spikes in the sweep")


def test_unravel_unknown_source_raises():
    net, inp = random_case(0)
    path = record_provenance(net.forward(inp), net)
    bogus = SpikeRecord(len(net.config.layers), 0, 99, 99, 0)
    with pytest.raises(GeometryError):
        unravel(bogus, path)


def test_spike_count_sums_stages():
    for seed in range(20):
        net, inp = random_case(seed)
        traces = unravel_all(net.forward(inp), net)
        for t in traces:
            assert t.spike_count() == sum(len(s) for s in t.by_stage)
            assert len(t.by_stage[0]) == len(t.pixels)
