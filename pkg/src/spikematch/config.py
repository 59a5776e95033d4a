"""YAML configuration: network shape, learning parameters, scenes.

One plain-text schema covers the whole pipeline; see README for the
documented fields.  Everything numeric that the underlying method leaves
open (thresholds, learning rates, tick resolution) lives here as an
explicit default rather than a constant buried in code.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError
from .events import Placement, SceneComposition


@dataclass(frozen=True)
class LayerConfig:
    """Shape and dynamics of one network layer.

    ``kind`` is ``conv`` (integrate-and-fire convolution) or ``pool``
    (first-spike-forwarding max pool).  ``inhibition`` selects how firing
    suppresses competitors: ``wta`` lets only the first feature fire at
    each location; ``lateral`` additionally silences every feature within
    ``inhibition_radius`` of the winner for the rest of the buffer.
    """

    name: str
    kind: str  # "conv" | "pool"
    features: int
    in_features: int
    kernel: int
    stride: int = 1
    threshold: float = 1.0
    inhibition: str = "wta"  # "wta" | "lateral"
    inhibition_radius: int = 0
    weights: str = "stdp"  # "edge" (fixed kernels) | "stdp" (learned)

    def __post_init__(self) -> None:
        if self.kind not in ("conv", "pool"):
            raise ConfigError(f"layer {self.name!r}: unknown kind {self.kind!r}")
        if self.features < 1:
            raise ConfigError(f"layer {self.name!r}: features must be >= 1")
        if self.kind == "conv" and self.threshold <= 0:
            raise ConfigError(f"layer {self.name!r}: threshold must be > 0")
        if self.inhibition not in ("wta", "lateral"):
            raise ConfigError(f"layer {self.name!r}: unknown inhibition {self.inhibition!r}")


@dataclass(frozen=True)
class StdpConfig:
    """Multiplicative STDP parameters; weights always stay inside [0, 1]."""

    a_plus: float = 0.004
    a_minus: float = -0.003
    w_init_mean: float = 0.8
    w_init_sd: float = 0.05
    winners_per_map: int = 1
    convergence_threshold: float = 0.01

    def __post_init__(self) -> None:
        if self.a_plus <= 0:
            raise ConfigError("a_plus must be > 0 (potentiation)")
        if self.a_minus >= 0:
            raise ConfigError("a_minus must be < 0 (depression)")


@dataclass(frozen=True)
class TrackerConfig:
    retention_horizon: int = 30  # buffers an unseen object is remembered for
    ash_update: str = "replace"  # "replace" | "accumulate"

    def __post_init__(self) -> None:
        if self.retention_horizon < 0:
            raise ConfigError("retention_horizon must be >= 0")
        if self.ash_update not in ("replace", "accumulate"):
            raise ConfigError(f"unknown ash_update policy {self.ash_update!r}")


@dataclass(frozen=True)
class NetworkConfig:
    """Full network description: geometry, quantization, layer stack."""

    width: int
    height: int
    layers: tuple[LayerConfig, ...]
    ticks_per_buffer: int = 10
    window_us: int = 10_000
    input_features: int = 1
    stdp: StdpConfig = field(default_factory=StdpConfig)
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    decoder_threshold: float = 0.0  # weights must exceed this to carry a decode path

    def __post_init__(self) -> None:
        if not self.layers:
            raise ConfigError("network needs at least one layer")
        if self.layers[-1].kind != "conv":
            raise ConfigError("last layer must be the classification convolution")
        prev = self.input_features
        for layer in self.layers:
            if layer.in_features != prev:
                raise ConfigError(
                    f"layer {layer.name!r}: in_features {layer.in_features} "
                    f"!= previous feature count {prev}"
                )
            if layer.kind == "pool" and layer.features != layer.in_features:
                raise ConfigError(f"pool layer {layer.name!r} cannot change feature count")
            prev = layer.features

    @property
    def n_classes(self) -> int:
        return self.layers[-1].features

    @property
    def conv_layers(self) -> tuple[LayerConfig, ...]:
        return tuple(l for l in self.layers if l.kind == "conv")

    @property
    def total_features(self) -> int:
        """Rows of the featural-temporal hash: every conv layer's maps."""
        return sum(l.features for l in self.conv_layers)

    def with_canvas(self, width: int, height: int) -> "NetworkConfig":
        """Same network applied to a different canvas (fully convolutional)."""
        return NetworkConfig(
            width=width,
            height=height,
            layers=self.layers,
            ticks_per_buffer=self.ticks_per_buffer,
            window_us=self.window_us,
            input_features=self.input_features,
            stdp=self.stdp,
            tracker=self.tracker,
            decoder_threshold=self.decoder_threshold,
        )


def _require(mapping: dict, key: str, context: str):
    if key not in mapping:
        raise ConfigError(f"{context}: missing required key {key!r}")
    return mapping[key]


def network_from_dict(doc: dict) -> NetworkConfig:
    geom = _require(doc, "geometry", "network config")
    layers_doc = _require(doc, "layers", "network config")
    in_features = int(doc.get("input_features", 1))
    layers = []
    prev = in_features
    for entry in layers_doc:
        name = _require(entry, "name", "layer")
        kind = _require(entry, "kind", f"layer {name!r}")
        features = int(entry.get("features", prev))
        layers.append(
            LayerConfig(
                name=str(name),
                kind=str(kind),
                features=features,
                in_features=prev,
                kernel=int(_require(entry, "kernel", f"layer {name!r}")),
                stride=int(entry.get("stride", 2 if kind == "pool" else 1)),
                threshold=float(entry.get("threshold", 1.0)),
                inhibition=str(entry.get("inhibition", "wta")),
                inhibition_radius=int(entry.get("inhibition_radius", 0)),
                weights=str(entry.get("weights", "stdp")),
            )
        )
        prev = features
    stdp = StdpConfig(**doc.get("stdp", {}))
    tracker = TrackerConfig(**doc.get("tracker", {}))
    return NetworkConfig(
        width=int(_require(geom, "width", "geometry")),
        height=int(_require(geom, "height", "geometry")),
        layers=tuple(layers),
        ticks_per_buffer=int(doc.get("ticks_per_buffer", 10)),
        window_us=int(doc.get("window_us", 10_000)),
        input_features=in_features,
        stdp=stdp,
        tracker=tracker,
        decoder_threshold=float(doc.get("decoder_threshold", 0.0)),
    )


def load_network_config(path: str | Path) -> NetworkConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"network config not found: {path}")
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    try:
        return network_from_dict(doc)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def scene_from_dict(doc: dict) -> SceneComposition:
    canvas = _require(doc, "canvas", "scene config")
    placements = []
    for entry in doc.get("placements", []):
        placements.append(
            Placement(
                stream_id=str(_require(entry, "stream", "placement")),
                x_offset=int(entry.get("x", 0)),
                y_offset=int(entry.get("y", 0)),
                start_us=int(entry.get("start_us", 0)),
                z=None if entry.get("z") is None else int(entry["z"]),
            )
        )
    return SceneComposition(
        placements=placements,
        width=int(_require(canvas, "width", "canvas")),
        height=int(_require(canvas, "height", "canvas")),
        noise_rate=float(doc.get("noise_rate", 0.0)),
        seed=int(doc.get("seed", 0)),
    )


def load_scene_config(path: str | Path) -> SceneComposition:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"scene config not found: {path}")
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    try:
        return scene_from_dict(doc)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
