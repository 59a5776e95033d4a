"""Rendering: masks to PGM, overlays and figures to PNG.

Masks go out as binary PGM so golden tests can diff them byte for byte.
Everything drawn through matplotlib uses the Agg backend; nothing here
ever opens a display.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .decoder import SemanticMask
from .errors import GeometryError
from .events import SequenceBuffer
from .evaluation import MetricsReport
from .network import SpikingNetwork
from .pipeline import BufferResult
from .smash import BoundingBox
from .tracker import TimelineEntry

# Distinct colors for instance/object/id overlays, RGB in [0, 1].
PALETTE = np.array(
    [
        (0.894, 0.102, 0.110),
        (0.216, 0.494, 0.722),
        (0.302, 0.686, 0.290),
        (0.596, 0.306, 0.639),
        (1.000, 0.498, 0.000),
        (0.969, 0.506, 0.749),
        (0.651, 0.337, 0.157),
        (0.400, 0.761, 0.647),
        (0.906, 0.541, 0.765),
        (0.851, 0.373, 0.008),
        (0.459, 0.439, 0.702),
        (0.400, 0.651, 0.118),
    ]
)


def color_for(index: int) -> np.ndarray:
    return PALETTE[index % len(PALETTE)]


def write_pgm(path: str | Path, gray: np.ndarray) -> Path:
    """Binary PGM (P5), 8-bit."""
    arr = np.asarray(gray)
    if arr.ndim != 2:
        raise GeometryError(f"PGM wants a 2-d array, got shape {arr.shape}")
    arr = arr.astype(np.uint8)
    path = Path(path)
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode("ascii")
    path.write_bytes(header + arr.tobytes())
    return path


def read_pgm(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise GeometryError(f"{path}: not a binary PGM")
    fields: list[bytes] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":  # comment line
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    w, h, maxval = (int(f) for f in fields)
    if maxval > 255:
        raise GeometryError(f"{path}: 16-bit PGM not supported")
    return np.frombuffer(data[pos : pos + w * h], dtype=np.uint8).reshape(h, w).copy()


def mask_to_gray(mask: SemanticMask, n_classes: int) -> np.ndarray:
    """Label image as gray levels: background 0, class c at a fixed level.

    Levels are spread from 255 downward so any two classes stay visually
    and numerically distinct.
    """
    labels = mask.to_array()
    step = 128 // n_classes if n_classes > 1 else 0
    gray = np.zeros_like(labels, dtype=np.uint8)
    for cls in range(n_classes):
        gray[labels == cls + 1] = 255 - cls * step
    return gray


def accumulate_frame(buf: SequenceBuffer) -> np.ndarray:
    """Per-pixel event counts scaled to 8-bit, both polarities together."""
    frame = np.zeros((buf.height, buf.width), dtype=np.int64)
    if len(buf.events):
        np.add.at(frame, (buf.events["y"], buf.events["x"]), 1)
    peak = frame.max()
    if peak == 0:
        return frame.astype(np.uint8)
    return (frame * 255 // peak).astype(np.uint8)


def _frame_to_rgb(frame: np.ndarray, dim: float = 0.5) -> np.ndarray:
    return np.repeat((frame / 255.0 * dim)[:, :, None], 3, axis=2)


def _paint_pixels(rgb: np.ndarray, pixels, color: np.ndarray) -> None:
    for x, y in pixels:
        rgb[y, x] = color


def _paint_box(rgb: np.ndarray, box: BoundingBox, color: np.ndarray) -> None:
    h, w = rgb.shape[:2]
    x0, x1 = max(box.x_min, 0), min(box.x_max, w - 1)
    y0, y1 = max(box.y_min, 0), min(box.y_max, h - 1)
    rgb[y0, x0 : x1 + 1] = color
    rgb[y1, x0 : x1 + 1] = color
    rgb[y0 : y1 + 1, x0] = color
    rgb[y0 : y1 + 1, x1] = color


def save_png(path: str | Path, rgb: np.ndarray) -> Path:
    path = Path(path)
    plt.imsave(path, np.clip(rgb, 0.0, 1.0))
    return path


def render_buffer(
    outdir: str | Path,
    result: BufferResult,
    buf: SequenceBuffer,
    n_classes: int,
    prefix: str | None = None,
) -> list[Path]:
    """Four files per buffer: input PNG, mask PGM, instance and object PNGs."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    prefix = prefix or f"buf{result.buffer_index:03d}"
    frame = accumulate_frame(buf)
    written = [save_png(outdir / f"{prefix}_input.png", _frame_to_rgb(frame, dim=1.0))]

    written.append(write_pgm(outdir / f"{prefix}_mask.pgm", mask_to_gray(result.mask, n_classes)))

    inst = _frame_to_rgb(frame)
    for trace in result.traces:
        _paint_pixels(inst, trace.pixels, color_for(trace.instance_id))
    written.append(save_png(outdir / f"{prefix}_instances.png", inst))

    objs = _frame_to_rgb(frame)
    for obj in result.objects:
        c = color_for(obj.object_id)
        for member in obj.members:
            _paint_pixels(objs, result.traces[member].pixels, c * 0.7)
        _paint_box(objs, obj.box, c)
    written.append(save_png(outdir / f"{prefix}_objects.png", objs))
    return written


def render_timeline_frame(
    outdir: str | Path,
    buf: SequenceBuffer,
    entries: list[TimelineEntry],
    buffer_index: int,
) -> Path:
    """One tracking overlay per buffer, boxes colored by persistent id."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    rgb = _frame_to_rgb(accumulate_frame(buf), dim=0.7)
    for e in entries:
        _paint_box(rgb, e.box, color_for(e.persistent_id))
    return save_png(outdir / f"track{buffer_index:03d}.png", rgb)


# ---------------------------------------------------------------------------
# feature atlas
# ---------------------------------------------------------------------------


def _stamp_full(acc: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Transposed-convolution stamp: place kernel at every active cell."""
    ah, aw = acc.shape
    kh, kw = kernel.shape
    out = np.zeros((ah + kh - 1, aw + kw - 1))
    for i in range(ah):
        for j in range(aw):
            v = acc[i, j]
            if v != 0.0:
                out[i : i + kh, j : j + kw] += v * kernel
    return out


def feature_atlas(net: SpikingNetwork) -> dict[str, np.ndarray]:
    """Per conv layer: every feature's kernel projected back to pixels.

    Pool stages spread each cell over their stride window; conv stages
    below stamp their own kernels wherever the projection is active.  The
    result approximates what input arrangement drives each feature, in
    actual pixel coordinates.
    """
    config = net.config
    atlas: dict[str, np.ndarray] = {}
    for li, layer in enumerate(config.layers):
        if layer.kind != "conv":
            continue
        w = net.weights[layer.name]  # (features, in, k, k)
        proj = w.astype(np.float64).copy()
        for below in range(li - 1, -1, -1):
            lower = config.layers[below]
            if lower.kind == "pool":
                proj = np.kron(proj, np.ones((1, 1, lower.stride, lower.stride)))
            else:
                lw = net.weights[lower.name].astype(np.float64)
                f, mid, ph, pw = proj.shape
                kh, kw = lw.shape[2], lw.shape[3]
                nxt = np.zeros((f, lower.in_features, ph + kh - 1, pw + kw - 1))
                for fi in range(f):
                    for m in range(mid):
                        for c in range(lower.in_features):
                            nxt[fi, c] += _stamp_full(proj[fi, m], lw[m, c])
                proj = nxt
        tiles = proj.sum(axis=1)  # collapse input channels
        peak = tiles.reshape(tiles.shape[0], -1).max(axis=1)
        peak[peak == 0.0] = 1.0
        atlas[layer.name] = tiles / peak[:, None, None]
    return atlas


def feature_overlay(tile: np.ndarray, frame: np.ndarray) -> np.ndarray:
    """Blend an accumulated frame patch into a tile; empty patch changes nothing."""
    if tile.shape != frame.shape:
        raise GeometryError(f"tile {tile.shape} vs frame patch {frame.shape}")
    weight = (frame > 0) * 0.5
    return tile * (1.0 - weight) + (frame / 255.0) * weight


def render_feature_atlas(
    outdir: str | Path,
    net: SpikingNetwork,
    frame: np.ndarray | None = None,
) -> list[Path]:
    """One PNG per feature tile, plus per-layer overview grids.

    With ``frame`` given, also writes an overlay PNG per tile blending a
    center crop of the frame into the tile.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for name, tiles in feature_atlas(net).items():
        n, th, tw = tiles.shape
        for fi in range(n):
            rgb = np.repeat(tiles[fi][:, :, None], 3, axis=2)
            written.append(save_png(outdir / f"feature_{name}_{fi:02d}.png", rgb))
            if frame is not None:
                patch = _center_crop(frame, th, tw)
                over = feature_overlay(tiles[fi], patch)
                written.append(
                    save_png(
                        outdir / f"overlay_{name}_{fi:02d}.png",
                        np.repeat(over[:, :, None], 3, axis=2),
                    )
                )
        cols = int(np.ceil(np.sqrt(n)))
        rows = int(np.ceil(n / cols))
        grid = np.zeros((rows * (th + 1) - 1, cols * (tw + 1) - 1))
        for fi in range(n):
            r, c = divmod(fi, cols)
            grid[r * (th + 1) : r * (th + 1) + th, c * (tw + 1) : c * (tw + 1) + tw] = tiles[fi]
        written.append(save_png(outdir / f"atlas_{name}.png", np.repeat(grid[:, :, None], 3, axis=2)))
    return written


def _center_crop(frame: np.ndarray, th: int, tw: int) -> np.ndarray:
    h, w = frame.shape
    out = np.zeros((th, tw), dtype=frame.dtype)
    y0 = max((h - th) // 2, 0)
    x0 = max((w - tw) // 2, 0)
    part = frame[y0 : y0 + th, x0 : x0 + tw]
    out[: part.shape[0], : part.shape[1]] = part
    return out


# ---------------------------------------------------------------------------
# evaluation figures
# ---------------------------------------------------------------------------


def render_eval_figures(outdir: str | Path, report: MetricsReport) -> list[Path]:
    """Two figures per report: summary bars and the per-buffer count trace."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    labels = ["per input", "per sequence"]
    values = [report.per_input_accuracy, report.per_sequence_accuracy]
    if report.recovery_rate is not None:
        labels.append("recovery")
        values.append(report.recovery_rate)
    for k in sorted(report.self_match or {}):
        labels.append(f"top-{k}")
        values.append(report.self_match[k])

    fig, ax = plt.subplots(figsize=(1.2 + 0.9 * len(labels), 3.2))
    bars = ax.bar(labels, values, color="#4878cf")
    ax.set_ylim(0, 105)
    ax.set_ylabel("%")
    ax.set_title(f"{report.scenario} (seed {report.seed})")
    for bar, v in zip(bars, values):
        ax.text(bar.get_x() + bar.get_width() / 2, v + 1, f"{v:.1f}", ha="center", fontsize=8)
    fig.tight_layout()
    path = outdir / f"eval_{report.scenario}_summary.png"
    fig.savefig(path, dpi=100)
    plt.close(fig)
    written.append(path)

    if report.outcomes:
        idx = [o.buffer_index for o in report.outcomes]
        fig, ax = plt.subplots(figsize=(6.4, 3.2))
        ax.step(idx, [o.expected for o in report.outcomes], where="mid", label="expected")
        ax.step(idx, [o.detected for o in report.outcomes], where="mid", label="detected")
        wrong = [o.buffer_index for o in report.outcomes if not o.correct]
        if wrong:
            ax.plot(wrong, [0] * len(wrong), "rx", label="incorrect")
        ax.set_xlabel("buffer")
        ax.set_ylabel("objects")
        ax.set_title(f"{report.scenario}: objects per buffer")
        ax.legend(loc="upper right", fontsize=8)
        fig.tight_layout()
        path = outdir / f"eval_{report.scenario}_buffers.png"
        fig.savefig(path, dpi=100)
        plt.close(fig)
        written.append(path)
    return written
