"""Object identity across buffers.

A registry keeps the latest signature and box of every object seen
recently.  Each new buffer's objects are compared to same-class registry
entries by binary Jaccard over their signatures and assigned greedily in
descending similarity, one registry entry per object.  An object with no
similar registry entry gets a fresh persistent id; registry entries that
found no match are marked occluded and survive until the retention
horizon passes, which is what lets an object keep its id through a full
occlusion and reappearance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .smash import AshMatrix, BoundingBox, ClassObject, similarity


@dataclass
class TrackedObject:
    persistent_id: int
    ash: AshMatrix
    box: BoundingBox
    class_feature: int
    last_seen: int
    status: str = "visible"  # or "occluded"


@dataclass
class Registry:
    """Recently seen objects; entries expire retention_horizon buffers
    after their last match."""

    retention_horizon: int = 30
    ash_update: str = "replace"  # or "accumulate"
    objects: list[TrackedObject] = field(default_factory=list)
    next_id: int = 0

    def evict(self, buffer_index: int) -> None:
        self.objects = [
            o for o in self.objects if buffer_index - o.last_seen <= self.retention_horizon
        ]


@dataclass(frozen=True)
class Assignment:
    """Outcome for one current object in one buffer."""

    persistent_id: int
    object: ClassObject
    matched: bool  # False when the id is fresh
    similarity: float


def match_objects(
    current: list[ClassObject], registry: Registry, buffer_index: int
) -> list[Assignment]:
    """Greedy one-to-one matching of current objects to the registry.

    Pairs are considered in descending similarity (ties break toward the
    earlier current object, then the older persistent id).  Zero
    similarity never matches.
    """
    registry.evict(buffer_index)
    pairs = []
    for ci, cur in enumerate(current):
        for reg in registry.objects:
            if reg.class_feature != cur.class_feature:
                continue
            sim = similarity(cur.ash, reg.ash)
            if sim > 0.0:
                pairs.append((sim, ci, reg))
    pairs.sort(key=lambda p: (-p[0], p[1], p[2].persistent_id))

    assigned_current: dict[int, tuple[TrackedObject, float]] = {}
    taken_ids: set[int] = set()
    for sim, ci, reg in pairs:
        if ci in assigned_current or reg.persistent_id in taken_ids:
            continue
        assigned_current[ci] = (reg, sim)
        taken_ids.add(reg.persistent_id)

    out: list[Assignment] = []
    for ci, cur in enumerate(current):
        if ci in assigned_current:
            reg, sim = assigned_current[ci]
            reg.ash = cur.ash if registry.ash_update == "replace" else reg.ash.union(cur.ash)
            reg.box = cur.box
            reg.last_seen = buffer_index
            reg.status = "visible"
            out.append(Assignment(reg.persistent_id, cur, True, sim))
        else:
            obj = TrackedObject(
                persistent_id=registry.next_id,
                ash=cur.ash,
                box=cur.box,
                class_feature=cur.class_feature,
                last_seen=buffer_index,
            )
            registry.next_id += 1
            registry.objects.append(obj)
            out.append(Assignment(obj.persistent_id, cur, False, 0.0))
    for reg in registry.objects:
        if reg.persistent_id not in taken_ids and reg.last_seen != buffer_index:
            reg.status = "occluded"
    return out


@dataclass(frozen=True)
class TimelineEntry:
    buffer_index: int
    persistent_id: int
    box: BoundingBox
    members: tuple[int, ...]
    class_feature: int
    matched: bool
    similarity: float

    def to_json(self) -> dict:
        return {
            "buffer": self.buffer_index,
            "id": self.persistent_id,
            "box": self.box.to_json(),
            "members": list(self.members),
            "class": self.class_feature,
            "matched": self.matched,
            "similarity": round(self.similarity, 6),
        }


def track_sequence(
    buffers: list,
    step: Callable[[object], list[ClassObject]],
    retention_horizon: int = 30,
    ash_update: str = "replace",
) -> list[list[TimelineEntry]]:
    """Run intra-sequence detection per buffer, then registry matching.

    ``step`` maps a buffer to its detected objects; the timeline holds
    one entry per object per buffer, in buffer order.
    """
    registry = Registry(retention_horizon=retention_horizon, ash_update=ash_update)
    timeline: list[list[TimelineEntry]] = []
    for bi, buf in enumerate(buffers):
        objects = step(buf)
        entries = [
            TimelineEntry(
                bi, a.persistent_id, a.object.box, a.object.members,
                a.object.class_feature, a.matched, a.similarity,
            )
            for a in match_objects(objects, registry, bi)
        ]
        timeline.append(entries)
    return timeline
