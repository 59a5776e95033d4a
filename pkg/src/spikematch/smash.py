"""Instance hashing, pair scoring, and grouping into objects.

Each decoded instance is collapsed to a binary feature-by-tick matrix
(spatial coordinates discarded) plus a tight pixel bounding box.  A pair
of instances scores

    score = J(bits_a, bits_b) * IoU(box_a, box_b)

where J is the binary Jaccard coefficient computed with ANDs and ORs.
Both factors live in [0, 1], so a pair merges only when the instances
share featural-temporal content AND overlap spatially; either factor at
zero kills the score.

Grouping takes each instance's best-scoring partner and merges
transitively (union-find), so chains like 1-3, 3-5 collapse into one
object even though 1 and 5 were never each other's best match.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import NetworkConfig
from .errors import GeometryError
from .hulk import InstanceTrace


@dataclass(frozen=True)
class BoundingBox:
    """Pixel-inclusive extent: a single pixel has area 1."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self) -> None:
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise GeometryError(f"degenerate box {self}")

    @property
    def area(self) -> int:
        return (self.x_max - self.x_min + 1) * (self.y_max - self.y_min + 1)

    def union(self, other: "BoundingBox") -> "BoundingBox":
        return BoundingBox(
            min(self.x_min, other.x_min),
            min(self.y_min, other.y_min),
            max(self.x_max, other.x_max),
            max(self.y_max, other.y_max),
        )

    def to_json(self) -> dict:
        return {
            "x_min": self.x_min,
            "y_min": self.y_min,
            "x_max": self.x_max,
            "y_max": self.y_max,
        }


@dataclass(frozen=True)
class AshMatrix:
    """Binary feature-by-tick signature of an instance."""

    bits: np.ndarray  # bool [rows, ticks]

    def __post_init__(self) -> None:
        object.__setattr__(self, "bits", np.asarray(self.bits, dtype=bool))

    @property
    def rows(self) -> int:
        return self.bits.shape[0]

    @property
    def ticks(self) -> int:
        return self.bits.shape[1]

    def count(self) -> int:
        return int(self.bits.sum())

    def union(self, other: "AshMatrix") -> "AshMatrix":
        if self.bits.shape != other.bits.shape:
            raise GeometryError(
                f"signature shapes differ: {self.bits.shape} vs {other.bits.shape}"
            )
        return AshMatrix(self.bits | other.bits)

    def support(self) -> set[tuple[int, int]]:
        return {(int(r), int(c)) for r, c in np.argwhere(self.bits)}


def ash_row_base(config: NetworkConfig) -> dict[int, int]:
    """Row offset per stage index in the global feature layout.

    Rows run classification maps first, then hidden conv maps from the
    deepest layer up; pool stages share their source conv layer's rows.
    """
    conv_stages = [i + 1 for i, l in enumerate(config.layers) if l.kind == "conv"]
    ordered = [conv_stages[-1]] + list(reversed(conv_stages[:-1]))
    base: dict[int, int] = {}
    offset = 0
    for stage in ordered:
        base[stage] = offset
        offset += config.layers[stage - 1].features
    # pool stages alias the conv stage directly below them
    for i, layer in enumerate(config.layers):
        if layer.kind == "pool":
            base[i + 1] = base[i]
    return base


def ash_hash(trace: InstanceTrace, config: NetworkConfig) -> AshMatrix:
    """Collapse a trace to bits: entry (f, t) set iff feature f spiked at t."""
    bits = np.zeros((config.total_features, config.ticks_per_buffer), dtype=bool)
    base = ash_row_base(config)
    for stage, records in enumerate(trace.by_stage):
        if stage == 0:
            continue  # pixels carry no feature identity
        for rec in records:
            bits[base[stage] + rec.feature, rec.tick] = True
    return AshMatrix(bits)


def bbox_of(trace: InstanceTrace) -> BoundingBox:
    if not trace.pixels:
        raise GeometryError(f"instance {trace.instance_id} has no pixels")
    xs = [p[0] for p in trace.pixels]
    ys = [p[1] for p in trace.pixels]
    return BoundingBox(min(xs), min(ys), max(xs), max(ys))


def similarity(a: AshMatrix, b: AshMatrix) -> float:
    """Binary Jaccard: popcount(a AND b) / popcount(a OR b); 0 over empties."""
    if a.bits.shape != b.bits.shape:
        raise GeometryError(f"signature shapes differ: {a.bits.shape} vs {b.bits.shape}")
    union = int(np.logical_or(a.bits, b.bits).sum())
    if union == 0:
        return 0.0
    inter = int(np.logical_and(a.bits, b.bits).sum())
    return inter / union


def bbox_iou(a: BoundingBox, b: BoundingBox) -> float:
    ix0, ix1 = max(a.x_min, b.x_min), min(a.x_max, b.x_max)
    iy0, iy1 = max(a.y_min, b.y_min), min(a.y_max, b.y_max)
    if ix0 > ix1 or iy0 > iy1:
        return 0.0
    inter = (ix1 - ix0 + 1) * (iy1 - iy0 + 1)
    return inter / (a.area + b.area - inter)


@dataclass(frozen=True)
class HashedInstance:
    """An instance reduced to what scoring needs."""

    instance_id: int
    ash: AshMatrix
    box: BoundingBox
    class_feature: int = 0


@dataclass(frozen=True)
class SmashPairing:
    i: int
    j: int
    similarity: float
    iou: float
    score: float


@dataclass(frozen=True)
class ClassObject:
    """A transitively merged group of instances."""

    object_id: int
    members: tuple[int, ...]  # instance ids, ascending
    ash: AshMatrix
    box: BoundingBox
    class_feature: int


def smash_score(a: HashedInstance, b: HashedInstance) -> SmashPairing:
    sim = similarity(a.ash, b.ash)
    iou = bbox_iou(a.box, b.box)
    return SmashPairing(a.instance_id, b.instance_id, sim, iou, sim * iou)


def hash_instances(
    traces: list[InstanceTrace], config: NetworkConfig
) -> list[HashedInstance]:
    return [
        HashedInstance(t.instance_id, ash_hash(t, config), bbox_of(t), t.class_feature)
        for t in traces
    ]


# One explicit spike record is four 32-bit fields: x, y, feature, tick.
RAW_RECORD_BYTES = 16


def packed_size(ash: AshMatrix) -> int:
    """Bitpacked storage for one signature, in bytes."""
    return int(np.packbits(ash.bits.ravel()).nbytes)


def storage_savings(traces: list[InstanceTrace], config: NetworkConfig) -> float:
    """Percent saved by hashing traces instead of keeping raw spike records."""
    raw = sum(t.spike_count() * RAW_RECORD_BYTES for t in traces)
    if raw == 0:
        raise GeometryError("no spikes to measure storage against")
    hashed = sum(packed_size(ash_hash(t, config)) for t in traces)
    return 100.0 * (1.0 - hashed / raw)


def pair_scores(instances: list[HashedInstance]) -> list[SmashPairing]:
    out = []
    for i in range(len(instances)):
        for j in range(i + 1, len(instances)):
            out.append(smash_score(instances[i], instances[j]))
    return out


def group_instances(instances: list[HashedInstance]) -> list[ClassObject]:
    """Merge instances into objects by best-partner links.

    Each instance nominates its argmax-scoring partner (ties resolve to
    the lowest index; a zero best score nominates nobody) and union-find
    merges the nominations transitively.  The alternative, merging only
    mutual best pairs, would split chains; transitive merging is what the
    worked pairings require.
    """
    n = len(instances)
    if n == 0:
        return []
    scores = np.zeros((n, n), dtype=np.float64)
    for a in range(n):
        for b in range(a + 1, n):
            scores[a, b] = scores[b, a] = smash_score(instances[a], instances[b]).score

    parent = list(range(n))

    def find(u: int) -> int:
        while parent[u] != u:
            parent[u] = parent[parent[u]]
            u = parent[u]
        return u

    def union(u: int, v: int) -> None:
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[max(ru, rv)] = min(ru, rv)

    for i in range(n):
        if n == 1:
            break
        row = scores[i].copy()
        row[i] = -1.0
        partner = int(np.argmax(row))  # argmax takes the lowest index on ties
        if row[partner] > 0.0:
            union(i, partner)

    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)

    objects = []
    for oid, root in enumerate(sorted(groups, key=lambda r: instances[groups[r][0]].instance_id)):
        members = sorted(groups[root], key=lambda k: instances[k].instance_id)
        ash = instances[members[0]].ash
        box = instances[members[0]].box
        for k in members[1:]:
            ash = ash.union(instances[k].ash)
            box = box.union(instances[k].box)
        objects.append(
            ClassObject(
                object_id=oid,
                members=tuple(instances[k].instance_id for k in members),
                ash=ash,
                box=box,
                class_feature=instances[members[0]].class_feature,
            )
        )
    return objects
