"""Binary weight checkpoints.

Layout (all integers little-endian):

    magic   4 bytes  b"SMW1"
    u32     layer count
    per layer:
        u32     name length, then that many UTF-8 bytes
        u32     rank (always 4), then rank u32 dims
        f32[]   weights, C order

The format carries no config; loading validates shapes against the
network description it is paired with.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .config import NetworkConfig
from .errors import CheckpointError

MAGIC = b"SMW1"


def save_weights(path: str | Path, weights: dict[str, np.ndarray]) -> None:
    chunks = [MAGIC, struct.pack("<I", len(weights))]
    for name, w in weights.items():
        raw = name.encode("utf-8")
        arr = np.ascontiguousarray(w, dtype="<f4")
        chunks.append(struct.pack("<I", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<I", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_weights(path: str | Path) -> dict[str, np.ndarray]:
    data = Path(path).read_bytes()
    if len(data) < 8 or data[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a weight checkpoint (bad magic)")
    pos = 4

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(data):
            raise CheckpointError(f"{path}: truncated at byte {pos}")
        out = data[pos : pos + n]
        pos += n
        return out

    (count,) = struct.unpack("<I", take(4))
    weights: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<I", take(4))
        name = take(name_len).decode("utf-8")
        (rank,) = struct.unpack("<I", take(4))
        dims = struct.unpack(f"<{rank}I", take(4 * rank))
        n = int(np.prod(dims)) if rank else 1
        arr = np.frombuffer(take(4 * n), dtype="<f4").reshape(dims)
        weights[name] = arr.copy()
    if pos != len(data):
        raise CheckpointError(f"{path}: {len(data) - pos} trailing bytes")
    return weights


def validate_weights(config: NetworkConfig, weights: dict[str, np.ndarray]) -> None:
    """Raise CheckpointError if the weights do not fit the network."""
    for layer in config.layers:
        if layer.kind != "conv":
            continue
        if layer.name not in weights:
            raise CheckpointError(f"checkpoint has no weights for layer {layer.name!r}")
        want = (layer.features, layer.in_features, layer.kernel, layer.kernel)
        got = weights[layer.name].shape
        if got != want:
            raise CheckpointError(
                f"layer {layer.name!r}: checkpoint shape {got}, config wants {want}"
            )
