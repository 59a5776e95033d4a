"""Address-event streams: parsing, synthesis, compositing, noise, buffering.

An event camera emits sparse address-events (x, y, polarity, timestamp).
This module turns raw ``.bin`` recordings or synthetic generators into
:class:`EventStream` objects and slices them into fixed-duration
:class:`SequenceBuffer` windows for the spiking network.

All operations are pure: they return new streams and never mutate their
inputs, so they are safe to call from multiple threads.

The on-disk format is the 5-byte AER record:

    byte 0          x coordinate
    byte 1          y coordinate
    byte 2, bit 7   polarity (1 = ON)
    byte 2, bits 6-0 + bytes 3-4 (big-endian)   23-bit timestamp in us
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Sequence

import numpy as np

from .errors import ConfigError, EncodeError, FormatError, GeometryError, OrderingError

AER_RECORD_SIZE = 5
MAX_AER_COORD = 255
MAX_AER_TIMESTAMP = (1 << 23) - 1

EVENT_DTYPE = np.dtype([("x", "<i4"), ("y", "<i4"), ("p", "<i1"), ("t", "<i8")])


class Polarity(IntEnum):
    OFF = 0
    ON = 1


@dataclass(frozen=True)
class Event:
    """One address-event: pixel column, pixel row, polarity, time in us."""

    x: int
    y: int
    polarity: Polarity
    t: int


def _as_record_array(events: Sequence[Event] | np.ndarray) -> np.ndarray:
    if isinstance(events, np.ndarray):
        if events.dtype != EVENT_DTYPE:
            raise ConfigError(f"event array must have dtype {EVENT_DTYPE}, got {events.dtype}")
        return events
    arr = np.zeros(len(events), dtype=EVENT_DTYPE)
    for i, ev in enumerate(events):
        arr[i] = (ev.x, ev.y, int(ev.polarity), ev.t)
    return arr


@dataclass
class EventStream:
    """Time-ordered events plus the sensor geometry they live on."""

    events: np.ndarray  # structured EVENT_DTYPE, sorted by t (stable)
    width: int
    height: int

    def __post_init__(self) -> None:
        self.events = _as_record_array(self.events)
        if len(self.events):
            ev = self.events
            if ev["x"].min() < 0 or ev["x"].max() >= self.width:
                raise GeometryError(f"x coordinates outside [0, {self.width})")
            if ev["y"].min() < 0 or ev["y"].max() >= self.height:
                raise GeometryError(f"y coordinates outside [0, {self.height})")
            if np.any(np.diff(ev["t"]) < 0):
                order = np.argsort(ev["t"], kind="stable")
                self.events = ev[order]

    def __len__(self) -> int:
        return len(self.events)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EventStream):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and len(self.events) == len(other.events)
            and bool(np.all(self.events == other.events))
        )

    @property
    def duration_us(self) -> int:
        """Length of the covered window: last timestamp + 1 (0 when empty)."""
        return int(self.events["t"][-1]) + 1 if len(self.events) else 0

    def event_list(self) -> list[Event]:
        return [
            Event(int(r["x"]), int(r["y"]), Polarity(int(r["p"])), int(r["t"]))
            for r in self.events
        ]

    @staticmethod
    def from_events(events: Sequence[Event], width: int, height: int) -> "EventStream":
        return EventStream(_as_record_array(events), width, height)


@dataclass
class SequenceBuffer:
    """Events of one fixed-duration input window."""

    events: np.ndarray
    window_start: int
    window_duration: int
    width: int
    height: int

    def __post_init__(self) -> None:
        self.events = _as_record_array(self.events)
        if len(self.events):
            t = self.events["t"]
            lo, hi = self.window_start, self.window_start + self.window_duration
            if t.min() < lo or t.max() >= hi:
                raise GeometryError("buffer contains events outside its window")

    def __len__(self) -> int:
        return len(self.events)


@dataclass(frozen=True)
class Placement:
    """One stream dropped onto the scene canvas.

    ``z`` orders overlapping placements (higher = nearer the camera) and is
    required whenever two placement extents intersect.
    """

    stream_id: str
    x_offset: int = 0
    y_offset: int = 0
    start_us: int = 0
    z: int | None = None


@dataclass
class SceneComposition:
    placements: list[Placement]
    width: int
    height: int
    noise_rate: float = 0.0  # events per pixel per second, over the whole canvas
    seed: int = 0

    def __post_init__(self) -> None:
        if self.noise_rate < 0:
            raise ConfigError("noise_rate must be >= 0")


# ---------------------------------------------------------------------------
# AER binary format
# ---------------------------------------------------------------------------


def read_aer(
    data: bytes,
    width: int = MAX_AER_COORD + 1,
    height: int = MAX_AER_COORD + 1,
    regression_tolerance_us: int = 0,
) -> EventStream:
    """Decode 5-byte AER records into an event stream.

    The geometry is not stored in the file; callers that know the sensor
    size pass it explicitly, otherwise the full 8-bit address space is
    assumed.  A timestamp that steps backwards by more than
    ``regression_tolerance_us`` raises :class:`OrderingError` (real
    recordings occasionally jitter; the default is strict).
    """
    if len(data) % AER_RECORD_SIZE:
        offset = len(data) - (len(data) % AER_RECORD_SIZE)
        raise FormatError(
            f"truncated AER record at byte offset {offset}: "
            f"{len(data) % AER_RECORD_SIZE} trailing bytes"
        )
    raw = np.frombuffer(data, dtype=np.uint8).reshape(-1, AER_RECORD_SIZE)
    out = np.zeros(len(raw), dtype=EVENT_DTYPE)
    out["x"] = raw[:, 0]
    out["y"] = raw[:, 1]
    out["p"] = (raw[:, 2] >> 7) & 1
    out["t"] = (
        (raw[:, 2].astype(np.int64) & 0x7F) << 16
        | raw[:, 3].astype(np.int64) << 8
        | raw[:, 4].astype(np.int64)
    )
    if len(out) > 1:
        regress = np.diff(out["t"])
        worst = regress.min() if len(regress) else 0
        if worst < -regression_tolerance_us:
            idx = int(np.argmin(regress)) + 1
            raise OrderingError(
                f"timestamp regression of {-int(worst)}us at record {idx} "
                f"exceeds tolerance {regression_tolerance_us}us"
            )
    return EventStream(out, width, height)


def write_aer(stream: EventStream) -> bytes:
    """Encode a stream as 5-byte AER records (inverse of :func:`read_aer`)."""
    ev = stream.events
    for name, limit in (("x", MAX_AER_COORD), ("y", MAX_AER_COORD)):
        if len(ev) and ev[name].max() > limit:
            idx = int(np.argmax(ev[name] > limit))
            raise EncodeError(f"event {idx}: field {name}={int(ev[name][idx])} exceeds {limit}")
    if len(ev) and ev["t"].max() > MAX_AER_TIMESTAMP:
        idx = int(np.argmax(ev["t"] > MAX_AER_TIMESTAMP))
        raise EncodeError(
            f"event {idx}: field t={int(ev['t'][idx])} exceeds {MAX_AER_TIMESTAMP}"
        )
    raw = np.zeros((len(ev), AER_RECORD_SIZE), dtype=np.uint8)
    raw[:, 0] = ev["x"]
    raw[:, 1] = ev["y"]
    t = ev["t"].astype(np.int64)
    raw[:, 2] = (ev["p"].astype(np.uint8) << 7) | ((t >> 16) & 0x7F)
    raw[:, 3] = (t >> 8) & 0xFF
    raw[:, 4] = t & 0xFF
    return raw.tobytes()


# ---------------------------------------------------------------------------
# Synthesis
# ---------------------------------------------------------------------------


def synthesize_stream(
    shape: np.ndarray,
    trajectory: Sequence[tuple[int, int]],
    event_rate: float,
    duration_us: int,
    seed: int,
    width: int = 128,
    height: int = 128,
) -> EventStream:
    """Generate a contrast-change stream for a binary shape moving on a canvas.

    ``trajectory`` lists top-left shape positions sampled uniformly across
    ``duration_us``; events appear only at pixels the shape newly covers or
    uncovers between consecutive positions (ON and OFF respectively), which
    is how a real sensor sees a moving contour.  ``event_rate`` is the
    target total events per second; generated counts land within 10% of it
    whenever there is any motion.  Deterministic for a fixed seed.
    """
    shape = np.asarray(shape, dtype=bool)
    if shape.ndim != 2 or not shape.any():
        raise GeometryError("shape template must be a non-empty 2D binary mask")
    sh, sw = shape.shape
    positions = list(trajectory)
    if not positions:
        raise GeometryError("trajectory must contain at least one position")
    for px, py in positions:
        if px < 0 or py < 0 or px + sw > width or py + sh > height:
            raise GeometryError(
                f"trajectory position ({px},{py}) pushes the {sw}x{sh} shape "
                f"off the {width}x{height} canvas"
            )
    rng = np.random.default_rng(seed)

    # Pixel sets that changed occupancy between consecutive positions.
    steps: list[tuple[np.ndarray, np.ndarray]] = []  # (on_pixels, off_pixels), Nx2 (x, y)
    total_candidates = 0
    prev = np.zeros((height, width), dtype=bool)
    prev[positions[0][1] : positions[0][1] + sh, positions[0][0] : positions[0][0] + sw] = shape
    for px, py in positions[1:]:
        cur = np.zeros((height, width), dtype=bool)
        cur[py : py + sh, px : px + sw] = shape
        on = np.argwhere(cur & ~prev)[:, ::-1]  # (x, y)
        off = np.argwhere(prev & ~cur)[:, ::-1]
        steps.append((on, off))
        total_candidates += len(on) + len(off)
        prev = cur

    if total_candidates == 0:
        return EventStream(np.zeros(0, dtype=EVENT_DTYPE), width, height)

    target_total = event_rate * duration_us * 1e-6
    per_candidate = target_total / total_candidates
    step_us = duration_us / max(1, len(steps))

    chunks = []
    for k, (on, off) in enumerate(steps):
        t0 = k * step_us
        for pixels, pol in ((on, Polarity.ON), (off, Polarity.OFF)):
            if not len(pixels):
                continue
            # Integer repeat count per candidate pixel, expectation per_candidate.
            base = int(np.floor(per_candidate))
            extra = rng.random(len(pixels)) < (per_candidate - base)
            counts = base + extra.astype(np.int64)
            n = int(counts.sum())
            if n == 0:
                continue
            rec = np.zeros(n, dtype=EVENT_DTYPE)
            rec["x"] = np.repeat(pixels[:, 0], counts)
            rec["y"] = np.repeat(pixels[:, 1], counts)
            rec["p"] = int(pol)
            rec["t"] = np.clip(
                (t0 + rng.random(n) * step_us).astype(np.int64), 0, duration_us - 1
            )
            chunks.append(rec)

    if not chunks:
        return EventStream(np.zeros(0, dtype=EVENT_DTYPE), width, height)
    merged = np.concatenate(chunks)
    merged = merged[np.argsort(merged["t"], kind="stable")]
    return EventStream(merged, width, height)


# ---------------------------------------------------------------------------
# Compositing and noise
# ---------------------------------------------------------------------------


def composite(scene: SceneComposition, inputs: dict[str, EventStream]) -> EventStream:
    """Merge placed streams onto one canvas, suppressing occluded events.

    Occlusion is resolved by z-order: within each millisecond slice, the
    bounding extent of a nearer placement's events hides any farther
    placement's events inside it.  The rule is a reading of how overlapped
    recordings look on a real sensor (the nearer object's contour wins);
    it is confined to this function so it can be swapped out.
    """
    for pl in scene.placements:
        if pl.stream_id not in inputs:
            raise ConfigError(f"placement references unknown stream {pl.stream_id!r}")
        src = inputs[pl.stream_id]
        if (
            pl.x_offset < 0
            or pl.y_offset < 0
            or pl.x_offset + src.width > scene.width
            or pl.y_offset + src.height > scene.height
        ):
            raise GeometryError(
                f"placement of {pl.stream_id!r} at ({pl.x_offset},{pl.y_offset}) "
                f"exceeds the {scene.width}x{scene.height} canvas"
            )

    # Overlapping extents require explicit z.
    extents = []
    for pl in scene.placements:
        src = inputs[pl.stream_id]
        extents.append(
            (pl, pl.x_offset, pl.y_offset, pl.x_offset + src.width, pl.y_offset + src.height)
        )
    for i in range(len(extents)):
        for j in range(i + 1, len(extents)):
            a, b = extents[i], extents[j]
            overlap = a[1] < b[3] and b[1] < a[3] and a[2] < b[4] and b[2] < a[4]
            if overlap and (a[0].z is None or b[0].z is None):
                raise ConfigError(
                    f"placements {a[0].stream_id!r} and {b[0].stream_id!r} overlap "
                    "but have no z-order"
                )

    placed: list[tuple[Placement, np.ndarray]] = []
    for pl in scene.placements:
        src = inputs[pl.stream_id]
        ev = src.events.copy()
        ev["x"] += pl.x_offset
        ev["y"] += pl.y_offset
        ev["t"] += pl.start_us
        placed.append((pl, ev))

    quantum = 1000  # us; occlusion footprints are evaluated per-millisecond
    kept: list[np.ndarray] = []
    for pl, ev in placed:
        if not len(ev):
            continue
        mask = np.ones(len(ev), dtype=bool)
        for other, oev in placed:
            if other is pl or not len(oev):
                continue
            if pl.z is None or other.z is None or other.z <= pl.z:
                continue
            # Suppress events under the nearer placement's per-slice extent.
            slices = ev["t"] // quantum
            oslices = oev["t"] // quantum
            for s in np.unique(slices):
                sel = slices == s
                osel = oslices == s
                if not osel.any():
                    continue
                ox0, ox1 = int(oev["x"][osel].min()), int(oev["x"][osel].max())
                oy0, oy1 = int(oev["y"][osel].min()), int(oev["y"][osel].max())
                covered = (
                    sel
                    & (ev["x"] >= ox0)
                    & (ev["x"] <= ox1)
                    & (ev["y"] >= oy0)
                    & (ev["y"] <= oy1)
                )
                mask &= ~covered
        kept.append(ev[mask])

    merged = (
        np.concatenate(kept) if kept else np.zeros(0, dtype=EVENT_DTYPE)
    )
    merged = merged[np.argsort(merged["t"], kind="stable")]
    out = EventStream(merged, scene.width, scene.height)
    if scene.noise_rate > 0:
        out = inject_noise(out, scene.noise_rate, scene.seed)
    return out


def inject_noise(
    stream: EventStream, rate: float, seed: int, duration_us: int | None = None
) -> EventStream:
    """Add uniform spurious events at ``rate`` events/pixel/second.

    Original events are preserved; the added count is Poisson with mean
    rate x area x duration.  Identity when rate is 0.
    """
    if rate < 0:
        raise ConfigError("noise rate must be >= 0")
    if rate == 0:
        return EventStream(stream.events.copy(), stream.width, stream.height)
    if duration_us is None:
        duration_us = stream.duration_us
    if duration_us <= 0:
        return EventStream(stream.events.copy(), stream.width, stream.height)
    rng = np.random.default_rng(seed)
    mean = rate * stream.width * stream.height * duration_us * 1e-6
    n = int(rng.poisson(mean))
    noise = np.zeros(n, dtype=EVENT_DTYPE)
    noise["x"] = rng.integers(0, stream.width, n)
    noise["y"] = rng.integers(0, stream.height, n)
    noise["p"] = rng.integers(0, 2, n)
    noise["t"] = rng.integers(0, duration_us, n)
    merged = np.concatenate([stream.events, noise])
    merged = merged[np.argsort(merged["t"], kind="stable")]
    return EventStream(merged, stream.width, stream.height)


def buffer(stream: EventStream, window_duration: int = 10_000) -> list[SequenceBuffer]:
    """Slice a stream into contiguous non-overlapping windows.

    Windows cover [0, max t]; every event lands in exactly one buffer and
    buffers with no events are still emitted so downstream indices line up
    with wall-clock time.
    """
    if window_duration <= 0:
        raise ConfigError("window_duration must be positive")
    if not len(stream.events):
        return []
    t = stream.events["t"]
    n_windows = int(t.max()) // window_duration + 1
    idx = t // window_duration
    out = []
    for k in range(n_windows):
        out.append(
            SequenceBuffer(
                events=stream.events[idx == k],
                window_start=k * window_duration,
                window_duration=window_duration,
                width=stream.width,
                height=stream.height,
            )
        )
    return out
