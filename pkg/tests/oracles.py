"""Independent reference implementations the tests compare against.

Everything here recomputes results from first principles with dense
arrays and plain loops, sharing no code paths with the package.
"""

from __future__ import annotations

import numpy as np


def dense_if_conv(
    occ: np.ndarray,
    weights: np.ndarray,
    threshold: float,
    stride: int = 1,
    inhibition: str = "wta",
    radius: int = 0,
) -> set[tuple[int, int, int, int]]:
    """Dense brute-force integrate-and-fire convolution, valid padding.

    ``occ`` is a bool [F_in, H, W, T] occupancy grid.  Per tick: integrate
    this tick's spikes into every window by explicit patch products, apply
    lateral silencing scheduled by the previous tick's winners, then fire
    the lowest-index feature crossing threshold at each still-alive
    location.  A location fires at most once per buffer.
    """
    f_out, f_in, k, _ = weights.shape
    h_out = (occ.shape[1] - k) // stride + 1
    w_out = (occ.shape[2] - k) // stride + 1
    w64 = weights.astype(np.float64)
    pot = np.zeros((f_out, h_out, w_out))
    alive = np.ones((h_out, w_out), dtype=bool)
    pending: list[tuple[int, int]] = []
    fired: set[tuple[int, int, int, int]] = set()

    for t in range(occ.shape[3]):
        frame = occ[:, :, :, t].astype(np.float64)
        for oy in range(h_out):
            for ox in range(w_out):
                patch = frame[:, oy * stride : oy * stride + k, ox * stride : ox * stride + k]
                pot[:, oy, ox] += np.tensordot(w64, patch, axes=([1, 2, 3], [0, 1, 2]))

        r = radius or k // 2
        for cy, cx in pending:
            alive[max(0, cy - r) : cy + r + 1, max(0, cx - r) : cx + r + 1] = False
        pending = []

        crossed = (pot >= threshold) & alive[None, :, :]
        for oy in range(h_out):
            for ox in range(w_out):
                feats = np.flatnonzero(crossed[:, oy, ox])
                if len(feats) == 0:
                    continue
                f = int(feats[0])
                fired.add((f, oy, ox, t))
                pot[f, oy, ox] = 0.0
                alive[oy, ox] = False
                if inhibition == "lateral":
                    pending.append((oy, ox))
    return fired


def jaccard_of_sets(a: np.ndarray, b: np.ndarray) -> float:
    """Set-based Jaccard over the coordinates of set bits.

    Coordinates are flattened to scalar indices; for equal-shape
    matrices that is a bijection, so the sets are the same sets.
    """
    a, b = np.asarray(a), np.asarray(b)
    assert a.shape == b.shape
    sa = set(np.flatnonzero(a.ravel()).tolist())
    sb = set(np.flatnonzero(b.ravel()).tolist())
    union = sa | sb
    if not union:
        return 0.0
    return len(sa & sb) / len(union)


def brute_force_grouping(sims: np.ndarray, ious: np.ndarray) -> list[frozenset[int]]:
    """Reference partition: score matrix, per-row argmax, transitive closure."""
    n = sims.shape[0]
    scores = sims * ious
    links: set[tuple[int, int]] = set()
    for i in range(n):
        row = scores[i].copy()
        row[i] = -1.0
        j = int(np.argmax(row))
        if row[j] > 0.0:
            links.add((min(i, j), max(i, j)))
    groups = [{i} for i in range(n)]
    changed = True
    while changed:
        changed = False
        for a, b in links:
            ga = next(g for g in groups if a in g)
            gb = next(g for g in groups if b in g)
            if ga is not gb:
                ga |= gb
                groups.remove(gb)
                changed = True
    return sorted((frozenset(g) for g in groups), key=min)


def reachable_pixels(
    root,
    occupancies: list[np.ndarray],
    layers,
    weights: dict[str, np.ndarray],
    switches: list[dict],
    threshold: float,
) -> set[tuple[int, int]]:
    """Recompute one classification spike's decoded footprint by BFS.

    ``occupancies[i]`` is stage i's bool [F, H, W, T] grid; ``switches[i]``
    holds stage i's unpooling map when that stage is a pool.  Mirrors the
    documented decode rules: conv spikes fan out to active inputs under
    the kernel with weight above threshold, at ticks at or before the
    parent; pool spikes map to their recorded winner at its latest
    causal tick.  Deduplication is per neuron, matching a tree where the
    first parent keeps a child.
    """
    seen = {(root.layer, root.feature, root.y, root.x)}
    queue = [(root.layer, root.feature, root.y, root.x, root.tick)]
    pixels: set[tuple[int, int]] = set()
    while queue:
        stage, f, y, x, t = queue.pop(0)
        if stage == 0:
            pixels.add((x, y))
            continue
        layer = layers[stage - 1]
        children = []
        if layer.kind == "pool":
            wy, wx = switches[stage][(f, y, x)]
            ticks = np.flatnonzero(occupancies[stage - 1][f, wy, wx, : t + 1])
            if len(ticks):
                children.append((stage - 1, f, wy, wx, int(ticks[-1])))
        else:
            w = weights[layer.name][f]
            y0, x0 = y * layer.stride, x * layer.stride
            for fi in range(w.shape[0]):
                for ky in range(layer.kernel):
                    for kx in range(layer.kernel):
                        if w[fi, ky, kx] <= threshold:
                            continue
                        hist = occupancies[stage - 1][fi, y0 + ky, x0 + kx, : t + 1]
                        for tick in np.flatnonzero(hist):
                            children.append((stage - 1, fi, y0 + ky, x0 + kx, int(tick)))
        for child in children:
            key = child[:4]
            if key in seen:
                continue
            seen.add(key)
            queue.append(child)
    return pixels
