"""Per-spike instance extraction.

Every classification spike is one candidate instance.  Its trace is the
decode tree rooted at that spike: the spike records reached at every
stage plus the pixel footprint they rebuild.  Instance ids follow
classification-spike order (tick, then y, then x, then feature) so that
downstream pair reports are stable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .decoder import DecodePath, DecodeTree, record_provenance
from .errors import GeometryError
from .network import EncoderActivity, SpikeRecord, SpikingNetwork


@dataclass(frozen=True)
class InstanceTrace:
    """Decoded footprint of one classification spike."""

    instance_id: int
    source: SpikeRecord
    by_stage: tuple[frozenset[SpikeRecord], ...]  # index = stage, 0 is pixels
    pixels: frozenset[tuple[int, int]]  # (x, y)

    @property
    def class_feature(self) -> int:
        return self.source.feature

    def spike_count(self) -> int:
        return sum(len(s) for s in self.by_stage)

    def to_json(self) -> str:
        payload = {
            "instance_id": self.instance_id,
            "source": vars(self.source),
            "stages": [
                sorted([s.feature, s.y, s.x, s.tick] for s in stage)
                for stage in self.by_stage
            ],
            "pixels": sorted(self.pixels),
        }
        return json.dumps(payload, separators=(",", ":"))


def _trace_from_tree(tree: DecodeTree, instance_id: int, n_stages: int) -> InstanceTrace:
    stages = tuple(frozenset(s) for s in tree.by_stage(n_stages))
    pix = tree.pixels()
    if not pix:
        raise GeometryError(
            f"classification spike {tree.root} decoded to an empty pixel set"
        )
    return InstanceTrace(instance_id, tree.root, stages, pix)


def unravel(source: SpikeRecord, path: DecodePath) -> InstanceTrace:
    """Extract the single instance rooted at ``source`` from a decode pass."""
    for idx, tree in enumerate(path.trees):
        if tree.root == source:
            return _trace_from_tree(tree, idx, path.n_stages)
    raise GeometryError(f"spike {source} is not a decoded classification spike")


def unravel_all(activity: EncoderActivity, net: SpikingNetwork) -> list[InstanceTrace]:
    """One InstanceTrace per classification spike, in instance order."""
    path = record_provenance(activity, net)
    return [
        _trace_from_tree(tree, idx, path.n_stages)
        for idx, tree in enumerate(path.trees)
    ]
