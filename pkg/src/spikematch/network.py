"""Spiking convolutional encoder: integrate-and-fire layers and STDP.

Neurons are non-leaky integrate-and-fire, binary-spiking, and fire at most
once per buffered input.  Convolution layers apply winner-take-all
inhibition at each location (only the first feature map to cross
threshold fires there); pooling layers forward the first spike in each
window and remember which input won, so the decoder can invert them.

Learning is unsupervised, layer by layer: the multiplicative update

    dw = a_plus  * w * (1 - w)   if a presynaptic spike preceded the winner
    dw = a_minus * w * (1 - w)   otherwise

is applied to the per-map winner neurons of each buffer, which keeps every
weight inside [0, 1] and drives converged weights toward the endpoints.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import LayerConfig, NetworkConfig, StdpConfig
from .errors import ConfigError, GeometryError
from .events import SequenceBuffer

SPIKE_DTYPE = np.dtype([("f", "<i4"), ("y", "<i4"), ("x", "<i4"), ("t", "<i4")])


@dataclass(frozen=True, order=True)
class SpikeRecord:
    """One spike: stage index within the network, map, location, tick.

    ``layer`` 0 is the pixel/input stage; layer ``i`` is the output of the
    i-th configured layer.
    """

    layer: int
    feature: int
    y: int
    x: int
    tick: int


def _canonical(spikes: np.ndarray) -> np.ndarray:
    order = np.lexsort((spikes["f"], spikes["x"], spikes["y"], spikes["t"]))
    return spikes[order]


@dataclass
class SpikeTensor:
    """Sparse set of spikes over a (features, height, width, ticks) grid."""

    spikes: np.ndarray  # SPIKE_DTYPE, canonically ordered
    features: int
    height: int
    width: int
    ticks: int

    def __post_init__(self) -> None:
        self.spikes = _canonical(np.asarray(self.spikes, dtype=SPIKE_DTYPE))

    def __len__(self) -> int:
        return len(self.spikes)

    def to_set(self) -> set[tuple[int, int, int, int]]:
        return {(int(s["f"]), int(s["y"]), int(s["x"]), int(s["t"])) for s in self.spikes}

    def occupancy(self) -> np.ndarray:
        """Dense bool grid [F, H, W, T]; True where a spike exists."""
        occ = np.zeros((self.features, self.height, self.width, self.ticks), dtype=bool)
        s = self.spikes
        occ[s["f"], s["y"], s["x"], s["t"]] = True
        return occ

    @staticmethod
    def empty(features: int, height: int, width: int, ticks: int) -> "SpikeTensor":
        return SpikeTensor(np.zeros(0, dtype=SPIKE_DTYPE), features, height, width, ticks)

    @staticmethod
    def from_tuples(
        tuples, features: int, height: int, width: int, ticks: int
    ) -> "SpikeTensor":
        arr = np.array(sorted(set(tuples)), dtype=np.int64).reshape(-1, 4)
        out = np.zeros(len(arr), dtype=SPIKE_DTYPE)
        if len(arr):
            out["f"], out["y"], out["x"], out["t"] = arr.T
        return SpikeTensor(out, features, height, width, ticks)


@dataclass
class StageActivity:
    """What one stage of the encoder did during a buffer."""

    name: str
    kind: str  # "input" | "conv" | "pool"
    tensor: SpikeTensor
    potentials: np.ndarray | None = None  # firing potential per spike (conv)
    switches: dict[tuple[int, int, int], tuple[int, int]] = field(default_factory=dict)

    def occupancy(self) -> np.ndarray:
        if not hasattr(self, "_occ"):
            self._occ = self.tensor.occupancy()
        return self._occ


@dataclass
class EncoderActivity:
    """Per-stage spike record of one forward pass; stage 0 is the input."""

    stages: list[StageActivity]

    @property
    def classification(self) -> StageActivity:
        return self.stages[-1]

    def class_spikes(self) -> list[SpikeRecord]:
        """Classification spikes in instance order: tick, y, x, feature."""
        last = len(self.stages) - 1
        s = self.classification.tensor.spikes
        order = np.lexsort((s["f"], s["x"], s["y"], s["t"]))
        return [
            SpikeRecord(last, int(r["f"]), int(r["y"]), int(r["x"]), int(r["t"]))
            for r in s[order]
        ]


# ---------------------------------------------------------------------------
# Fixed first-layer kernels
# ---------------------------------------------------------------------------


def make_edge_kernels(size: int = 5, sigma: float = 1.0, offset: float = 1.0) -> np.ndarray:
    """Four oriented edge detectors (0, 45, 90, 135 degrees).

    Each kernel is the difference of two offset Gaussians, so it sums to
    zero exactly and is L2-normalized; the 90-degree kernel is the
    transpose of the 0-degree one by construction.
    """
    if size % 2 == 0:
        raise ConfigError("edge kernel size must be odd")
    r = size // 2
    yy, xx = np.mgrid[-r : r + 1, -r : r + 1].astype(float)

    def gauss(cy: float, cx: float) -> np.ndarray:
        return np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * sigma**2))

    kernels = []
    for angle in (0.0, 45.0, 90.0, 135.0):
        theta = np.deg2rad(angle)
        ny, nx = np.cos(theta), np.sin(theta)  # normal to the edge line
        k = gauss(-offset * ny, -offset * nx) - gauss(offset * ny, offset * nx)
        k /= np.linalg.norm(k)
        kernels.append(k)
    return np.stack(kernels)


# ---------------------------------------------------------------------------
# Forward passes
# ---------------------------------------------------------------------------


def conv_out_size(in_size: int, kernel: int, stride: int) -> int:
    if in_size < kernel:
        raise GeometryError(f"input extent {in_size} smaller than kernel {kernel}")
    return (in_size - kernel) // stride + 1


def conv_forward(
    inp: SpikeTensor, layer: LayerConfig, weights: np.ndarray
) -> tuple[SpikeTensor, np.ndarray]:
    """Event-driven integrate-and-fire convolution (valid padding).

    Returns the output spikes and, parallel to them, the membrane
    potential each neuron held when it crossed threshold.  Per location
    only the first crossing feature fires; with ``lateral`` inhibition a
    winner additionally silences all locations within
    ``inhibition_radius`` from the next tick onward.
    """
    if weights.shape != (layer.features, layer.in_features, layer.kernel, layer.kernel):
        raise GeometryError(
            f"layer {layer.name!r}: weight shape {weights.shape} does not match config"
        )
    if inp.features != layer.in_features:
        raise GeometryError(
            f"layer {layer.name!r}: input has {inp.features} maps, expected {layer.in_features}"
        )
    k, stride = layer.kernel, layer.stride
    h_out = conv_out_size(inp.height, k, stride)
    w_out = conv_out_size(inp.width, k, stride)

    pot = np.zeros((layer.features, h_out, w_out), dtype=np.float64)
    alive = np.ones((h_out, w_out), dtype=bool)  # location-level inhibition
    w_rev = np.ascontiguousarray(weights[:, :, ::-1, ::-1])

    spikes: list[tuple[int, int, int, int]] = []
    potentials: list[float] = []
    sp = inp.spikes
    lateral_hits: list[tuple[int, int]] = []

    for t in range(inp.ticks):
        batch = sp[sp["t"] == t]
        for rec in batch:
            x, y, fi = int(rec["x"]), int(rec["y"]), int(rec["f"])
            if stride == 1:
                oy0, oy1 = max(0, y - k + 1), min(h_out - 1, y)
                ox0, ox1 = max(0, x - k + 1), min(w_out - 1, x)
                if oy0 > oy1 or ox0 > ox1:
                    continue
                pot[:, oy0 : oy1 + 1, ox0 : ox1 + 1] += w_rev[
                    :, fi, k - 1 - y + oy0 : k - y + oy1, k - 1 - x + ox0 : k - x + ox1
                ]
            else:
                oy_lo = max(0, -(-(y - k + 1) // stride))
                oy_hi = min(h_out - 1, y // stride)
                ox_lo = max(0, -(-(x - k + 1) // stride))
                ox_hi = min(w_out - 1, x // stride)
                for oy in range(oy_lo, oy_hi + 1):
                    for ox in range(ox_lo, ox_hi + 1):
                        pot[:, oy, ox] += weights[:, fi, y - oy * stride, x - ox * stride]

        # Lateral suppression from winners of earlier ticks.
        for cy, cx in lateral_hits:
            r = layer.inhibition_radius or k // 2
            alive[max(0, cy - r) : cy + r + 1, max(0, cx - r) : cx + r + 1] = False
        lateral_hits.clear()

        crossing = (pot >= layer.threshold) & alive[None, :, :]
        if not crossing.any():
            continue
        any_loc = crossing.any(axis=0)
        winners = np.argmax(crossing, axis=0)  # lowest feature index that crossed
        for oy, ox in np.argwhere(any_loc):
            fo = int(winners[oy, ox])
            spikes.append((fo, int(oy), int(ox), t))
            potentials.append(float(pot[fo, oy, ox]))
            pot[fo, oy, ox] = 0.0
            alive[oy, ox] = False
            if layer.inhibition == "lateral":
                lateral_hits.append((int(oy), int(ox)))

    arr = np.zeros(len(spikes), dtype=SPIKE_DTYPE)
    pots = np.array(potentials, dtype=np.float64)
    if spikes:
        arr["f"], arr["y"], arr["x"], arr["t"] = np.array(spikes, dtype=np.int64).T
        order = np.lexsort((arr["f"], arr["x"], arr["y"], arr["t"]))
        arr = arr[order]
        pots = pots[order]
    return SpikeTensor(arr, layer.features, h_out, w_out, inp.ticks), pots


def pool_forward(
    inp: SpikeTensor, layer: LayerConfig
) -> tuple[SpikeTensor, dict[tuple[int, int, int], tuple[int, int]]]:
    """First-spike-forwarding max pool.

    Each output location fires once, at the tick of the earliest spike in
    its window; the winning input location is recorded as the unpooling
    switch.  Simultaneous candidates resolve in (y, x) scan order.
    """
    k, stride = layer.kernel, layer.stride
    h_out = conv_out_size(inp.height, k, stride)
    w_out = conv_out_size(inp.width, k, stride)
    fired = np.zeros((inp.features, h_out, w_out), dtype=bool)
    switches: dict[tuple[int, int, int], tuple[int, int]] = {}
    spikes: list[tuple[int, int, int, int]] = []

    sp = inp.spikes
    order = np.lexsort((sp["f"], sp["x"], sp["y"], sp["t"]))
    for rec in sp[order]:
        f, y, x, t = int(rec["f"]), int(rec["y"]), int(rec["x"]), int(rec["t"])
        oy, ox = y // stride, x // stride
        if oy >= h_out or ox >= w_out or y - oy * stride >= k or x - ox * stride >= k:
            continue  # trailing rows/cols outside any complete window
        if fired[f, oy, ox]:
            continue
        fired[f, oy, ox] = True
        switches[(f, oy, ox)] = (y, x)
        spikes.append((f, oy, ox, t))

    arr = np.zeros(len(spikes), dtype=SPIKE_DTYPE)
    if spikes:
        arr["f"], arr["y"], arr["x"], arr["t"] = np.array(spikes, dtype=np.int64).T
    return SpikeTensor(arr, inp.features, h_out, w_out, inp.ticks), switches


# ---------------------------------------------------------------------------
# Network
# ---------------------------------------------------------------------------


class SpikingNetwork:
    """Layer stack with weights; forward passes record full provenance."""

    def __init__(self, config: NetworkConfig, weights: dict[str, np.ndarray] | None = None):
        self.config = config
        self.weights: dict[str, np.ndarray] = {}
        if weights is not None:
            for layer in config.layers:
                if layer.kind != "conv":
                    continue
                if layer.name not in weights:
                    raise ConfigError(f"missing weights for layer {layer.name!r}")
                self.weights[layer.name] = np.asarray(weights[layer.name], dtype=np.float32)

    @staticmethod
    def initialize(config: NetworkConfig, seed: int = 0) -> "SpikingNetwork":
        rng = np.random.default_rng(seed)
        net = SpikingNetwork(config)
        for layer in config.layers:
            if layer.kind != "conv":
                continue
            if layer.weights == "edge":
                base = make_edge_kernels(layer.kernel)
                if base.shape[0] != layer.features:
                    raise ConfigError(
                        f"layer {layer.name!r}: edge kernel set has {base.shape[0]} maps, "
                        f"config asks for {layer.features}"
                    )
                w = np.repeat(base[:, None, :, :], layer.in_features, axis=1)
            else:
                w = rng.normal(
                    config.stdp.w_init_mean,
                    config.stdp.w_init_sd,
                    size=(layer.features, layer.in_features, layer.kernel, layer.kernel),
                )
                w = np.clip(w, 0.0, 1.0)
            net.weights[layer.name] = w.astype(np.float32)
        return net

    def events_to_tensor(self, buf: SequenceBuffer) -> SpikeTensor:
        """Quantize a buffer's events into the input spike tensor.

        With one input feature the polarities are collapsed; with two,
        feature 0 carries OFF and feature 1 carries ON events.
        """
        cfg = self.config
        tick_us = cfg.window_us / cfg.ticks_per_buffer
        ev = buf.events
        if len(ev) == 0:
            return SpikeTensor.empty(cfg.input_features, buf.height, buf.width, cfg.ticks_per_buffer)
        ticks = ((ev["t"] - buf.window_start) / tick_us).astype(np.int64)
        ticks = np.clip(ticks, 0, cfg.ticks_per_buffer - 1)
        if cfg.input_features == 1:
            feats = np.zeros(len(ev), dtype=np.int64)
        elif cfg.input_features == 2:
            feats = ev["p"].astype(np.int64)
        else:
            raise ConfigError("input_features must be 1 or 2")
        tuples = set(zip(feats.tolist(), ev["y"].tolist(), ev["x"].tolist(), ticks.tolist()))
        return SpikeTensor.from_tuples(
            tuples, cfg.input_features, buf.height, buf.width, cfg.ticks_per_buffer
        )

    def forward(self, inp: SpikeTensor, upto: int | None = None) -> EncoderActivity:
        """Run the stack (optionally only the first ``upto`` layers)."""
        stages = [StageActivity("input", "input", inp)]
        cur = inp
        layers = self.config.layers if upto is None else self.config.layers[:upto]
        for layer in layers:
            if layer.kind == "conv":
                cur, pots = conv_forward(cur, layer, self.weights[layer.name])
                stages.append(StageActivity(layer.name, "conv", cur, potentials=pots))
            else:
                cur, switches = pool_forward(cur, layer)
                stages.append(StageActivity(layer.name, "pool", cur, switches=switches))
        return EncoderActivity(stages)

    def forward_buffer(self, buf: SequenceBuffer) -> EncoderActivity:
        return self.forward(self.events_to_tensor(buf))


# ---------------------------------------------------------------------------
# Plasticity
# ---------------------------------------------------------------------------


def stdp_update(
    pre: SpikeTensor,
    post_spike: SpikeRecord,
    weights: np.ndarray,
    a_plus: float,
    a_minus: float,
    stride: int = 1,
) -> np.ndarray:
    """Apply one multiplicative STDP step to the winning neuron's synapses.

    Synapses whose presynaptic location spiked at or before the winner's
    tick are potentiated, all others depressed; the w(1-w) factor pins
    weights to [0, 1] without explicit clamping (a clip guards rounding).
    """
    out = weights.copy()
    f_out, f_in, k, _ = weights.shape
    occ = pre.occupancy()
    causal_any = occ[:, :, :, : post_spike.tick + 1].any(axis=3)  # [F_in, H, W]
    y0, x0 = post_spike.y * stride, post_spike.x * stride
    window = causal_any[:, y0 : y0 + k, x0 : x0 + k]
    w = out[post_spike.feature]
    delta = np.where(window, a_plus, a_minus) * w * (1.0 - w)
    out[post_spike.feature] = np.clip(w + delta, 0.0, 1.0)
    return out


def select_winners(
    stage: StageActivity, winners_per_map: int
) -> list[tuple[SpikeRecord, float]]:
    """Per-map training winners: earliest tick first, then highest potential."""
    by_map: dict[int, list[tuple[SpikeRecord, float]]] = {}
    sp = stage.tensor.spikes
    pots = stage.potentials if stage.potentials is not None else np.zeros(len(sp))
    for rec, pot in zip(sp, pots):
        r = SpikeRecord(-1, int(rec["f"]), int(rec["y"]), int(rec["x"]), int(rec["t"]))
        by_map.setdefault(r.feature, []).append((r, float(pot)))
    winners = []
    for f in sorted(by_map):
        ranked = sorted(by_map[f], key=lambda rp: (rp[0].tick, -rp[1], rp[0].y, rp[0].x))
        winners.extend(ranked[:winners_per_map])
    return winners


def convergence_metric(weights: np.ndarray) -> float:
    """Mean w(1-w); approaches 0 as weights saturate at 0 or 1."""
    return float(np.mean(weights * (1.0 - weights)))


@dataclass
class EpochLog:
    layer: str
    epoch: int
    metric: float


def train(
    dataset: list[SequenceBuffer],
    epochs: int,
    config: NetworkConfig,
    seed: int = 0,
) -> tuple[SpikingNetwork, list[EpochLog]]:
    """Layer-wise unsupervised training over buffered inputs.

    Each learnable layer trains for up to ``epochs`` passes (stopping
    early once its convergence metric drops below the configured
    threshold) before the next, deeper one starts.  Deterministic for a
    fixed seed.
    """
    if not dataset:
        raise ConfigError("training dataset is empty")
    net = SpikingNetwork.initialize(config, seed)
    logs: list[EpochLog] = []
    stdp = config.stdp
    for li, layer in enumerate(config.layers):
        if layer.kind != "conv" or layer.weights != "stdp":
            continue
        for epoch in range(epochs):
            for buf in dataset:
                activity = net.forward(net.events_to_tensor(buf), upto=li + 1)
                stage = activity.stages[-1]
                pre = activity.stages[-2].tensor
                for winner, _pot in select_winners(stage, stdp.winners_per_map):
                    net.weights[layer.name] = stdp_update(
                        pre,
                        winner,
                        net.weights[layer.name],
                        stdp.a_plus,
                        stdp.a_minus,
                        stride=layer.stride,
                    )
            metric = convergence_metric(net.weights[layer.name])
            logs.append(EpochLog(layer.name, epoch, metric))
            if metric < stdp.convergence_threshold:
                break
    return net, logs
