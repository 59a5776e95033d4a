"""End-to-end per-buffer processing.

One buffer flows: events -> spike tensor -> encoder forward ->
per-classification-spike decode -> instance hash/box -> pair scores ->
object grouping.  Tracking composes this step with the registry matcher
across consecutive buffers.
"""

from __future__ import annotations

from dataclasses import dataclass

from .decoder import SemanticMask, decode_semantic, record_provenance
from .events import EventStream, SequenceBuffer, buffer
from .hulk import InstanceTrace, unravel_all
from .network import EncoderActivity, SpikingNetwork
from .smash import (
    ClassObject,
    HashedInstance,
    SmashPairing,
    group_instances,
    hash_instances,
    pair_scores,
)
from .tracker import TimelineEntry, track_sequence


@dataclass
class BufferResult:
    """Everything the pipeline derived from one buffered input."""

    buffer_index: int
    mask: SemanticMask
    traces: list[InstanceTrace]
    instances: list[HashedInstance]
    pairings: list[SmashPairing]
    objects: list[ClassObject]
    activity: EncoderActivity

    def to_json(self) -> dict:
        return {
            "buffer": self.buffer_index,
            "classes": {
                str(cls): len(self.mask.pixels[cls]) for cls in self.mask.classes()
            },
            "instances": [
                {
                    "id": t.instance_id,
                    "class": t.class_feature,
                    "tick": t.source.tick,
                    "pixels": len(t.pixels),
                }
                for t in self.traces
            ],
            "pairs": [
                {
                    "i": p.i,
                    "j": p.j,
                    "similarity": round(p.similarity, 6),
                    "iou": round(p.iou, 6),
                    "smash": round(p.score, 6),
                }
                for p in self.pairings
            ],
            "objects": [
                {
                    "id": o.object_id,
                    "members": list(o.members),
                    "class": o.class_feature,
                    "box": o.box.to_json(),
                }
                for o in self.objects
            ],
        }


class Pipeline:
    """Intra-sequence detector over a trained network."""

    def __init__(self, net: SpikingNetwork):
        self.net = net

    def process_buffer(self, buf: SequenceBuffer, index: int = 0) -> BufferResult:
        activity = self.net.forward_buffer(buf)
        path = record_provenance(activity, self.net)
        mask = decode_semantic(activity, self.net, path)
        traces = unravel_all(activity, self.net)
        instances = hash_instances(traces, self.net.config)
        pairs = pair_scores(instances)
        objects = group_instances(instances)
        return BufferResult(index, mask, traces, instances, pairs, objects, activity)

    def process_stream(self, stream: EventStream) -> list[BufferResult]:
        bufs = buffer(stream, self.net.config.window_us)
        return [self.process_buffer(b, i) for i, b in enumerate(bufs)]

    def track_stream(self, stream: EventStream) -> list[list[TimelineEntry]]:
        bufs = buffer(stream, self.net.config.window_us)
        cfg = self.net.config.tracker
        return track_sequence(
            bufs,
            lambda b: self.process_buffer(b).objects,
            retention_horizon=cfg.retention_horizon,
            ash_update=cfg.ash_update,
        )
