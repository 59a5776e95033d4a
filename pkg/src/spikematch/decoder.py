"""Segmentation decoder: mirror the encoder back to pixel space.

Decoding is a gated transposed pass over the spikes the encoder actually
emitted.  Starting from each classification spike, it walks down through
the stack: a conv spike fans out to the input spikes under its kernel
whose synapse weight clears the decoder threshold and whose tick is not
later than the parent's (causality); a pool spike maps to exactly the
input location that won its window during encoding.

Each classification spike grows its own tree.  Within a tree every
neuron appears at most once (the first parent found keeps it), so every
record carries exactly one parent chain back to its root.  Trees from
different roots may revisit the same neurons; that repetition is what
lets instances overlap.
"""

from __future__ import annotations

from dataclasses import dataclass
from collections import deque

import numpy as np

from .errors import GeometryError
from .network import EncoderActivity, SpikeRecord, SpikingNetwork


@dataclass(frozen=True)
class PathRecord:
    """One decoder spike with its parent one stage up (None at the root)."""

    spike: SpikeRecord
    parent: SpikeRecord | None


@dataclass
class DecodeTree:
    """All decoder spikes reached from one classification spike."""

    root: SpikeRecord
    records: list[PathRecord]  # breadth-first, root first

    def by_stage(self, n_stages: int) -> list[set[SpikeRecord]]:
        out: list[set[SpikeRecord]] = [set() for _ in range(n_stages)]
        for rec in self.records:
            out[rec.spike.layer].add(rec.spike)
        return out

    def pixels(self) -> frozenset[tuple[int, int]]:
        """Decoded footprint as (x, y) pairs."""
        return frozenset(
            (rec.spike.x, rec.spike.y) for rec in self.records if rec.spike.layer == 0
        )


@dataclass
class DecodePath:
    """Per-classification-spike decode trees, in instance order."""

    trees: list[DecodeTree]
    n_stages: int

    def total_records(self) -> int:
        return sum(len(t.records) for t in self.trees)


@dataclass
class SemanticMask:
    """Per-class set of active pixels (x, y) for one buffer."""

    pixels: dict[int, set[tuple[int, int]]]
    width: int
    height: int

    def classes(self) -> list[int]:
        return sorted(self.pixels)

    def to_array(self) -> np.ndarray:
        """Label image: 0 background, class feature + 1 elsewhere.

        Where classes overlap the lowest class index wins.
        """
        out = np.zeros((self.height, self.width), dtype=np.int32)
        for cls in sorted(self.pixels, reverse=True):
            for x, y in self.pixels[cls]:
                out[y, x] = cls + 1
        return out


def _trace_root(
    root: SpikeRecord,
    activity: EncoderActivity,
    net: SpikingNetwork,
    threshold: float,
) -> DecodeTree:
    """Breadth-first walk from one classification spike to the pixels."""
    layers = net.config.layers
    occupancy = [st.occupancy() for st in activity.stages]
    records = [PathRecord(root, None)]
    seen = {(root.layer, root.feature, root.y, root.x)}
    queue: deque[SpikeRecord] = deque([root])

    while queue:
        parent = queue.popleft()
        stage = parent.layer
        if stage == 0:
            continue
        layer = layers[stage - 1]
        children: list[SpikeRecord] = []
        if layer.kind == "pool":
            win = activity.stages[stage].switches.get((parent.feature, parent.y, parent.x))
            if win is None:
                raise GeometryError(
                    f"pool stage {layer.name!r} has no switch for spike "
                    f"({parent.feature}, {parent.y}, {parent.x})"
                )
            wy, wx = win
            occ = occupancy[stage - 1]
            ticks = np.flatnonzero(occ[parent.feature, wy, wx, : parent.tick + 1])
            if len(ticks):
                children.append(
                    SpikeRecord(stage - 1, parent.feature, wy, wx, int(ticks[-1]))
                )
        else:
            w = net.weights[layer.name][parent.feature]  # [F_in, k, k]
            occ = occupancy[stage - 1]
            y0 = parent.y * layer.stride
            x0 = parent.x * layer.stride
            window = occ[:, y0 : y0 + layer.kernel, x0 : x0 + layer.kernel, : parent.tick + 1]
            hits = np.argwhere((w > threshold)[:, :, :, None] & window)
            # spike-once means at most one tick per neuron; keep it simple
            for fi, ky, kx, t in hits:
                children.append(
                    SpikeRecord(stage - 1, int(fi), y0 + int(ky), x0 + int(kx), int(t))
                )
        for child in children:
            key = (child.layer, child.feature, child.y, child.x)
            if key in seen:
                continue
            seen.add(key)
            records.append(PathRecord(child, parent))
            queue.append(child)
    return DecodeTree(root, records)


def record_provenance(activity: EncoderActivity, net: SpikingNetwork) -> DecodePath:
    """Decode every classification spike, keeping full parent annotations."""
    threshold = net.config.decoder_threshold
    trees = [
        _trace_root(root, activity, net, threshold) for root in activity.class_spikes()
    ]
    return DecodePath(trees, n_stages=len(activity.stages))


def decode_semantic(
    activity: EncoderActivity,
    net: SpikingNetwork,
    path: DecodePath | None = None,
) -> SemanticMask:
    """Union of every classification spike's decoded pixels, per class."""
    if path is None:
        path = record_provenance(activity, net)
    pixels: dict[int, set[tuple[int, int]]] = {}
    for tree in path.trees:
        pixels.setdefault(tree.root.feature, set()).update(tree.pixels())
    inp = activity.stages[0].tensor
    return SemanticMask(pixels, width=inp.width, height=inp.height)


def check_footprints(path: DecodePath, net: SpikingNetwork) -> int:
    """Count records violating parent-footprint containment (0 when sound)."""
    layers = net.config.layers
    bad = 0
    for tree in path.trees:
        for rec in tree.records:
            if rec.parent is None:
                continue
            layer = layers[rec.parent.layer - 1]
            y0 = rec.parent.y * layer.stride
            x0 = rec.parent.x * layer.stride
            if not (
                y0 <= rec.spike.y < y0 + layer.kernel
                and x0 <= rec.spike.x < x0 + layer.kernel
                and rec.spike.tick <= rec.parent.tick
            ):
                bad += 1
    return bad
