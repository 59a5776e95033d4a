"""Spiking encoder-decoder instance segmentation and tracking."""

from .config import (
    LayerConfig,
    NetworkConfig,
    StdpConfig,
    TrackerConfig,
    load_network_config,
    load_scene_config,
)
from .checkpoint import load_weights, save_weights, validate_weights
from .decoder import DecodePath, SemanticMask, decode_semantic, record_provenance
from .errors import (
    CheckpointError,
    ConfigError,
    EncodeError,
    FormatError,
    GeometryError,
    OrderingError,
    SpikeMatchError,
)
from .events import (
    Event,
    EventStream,
    Placement,
    SceneComposition,
    SequenceBuffer,
    buffer,
    composite,
    inject_noise,
    read_aer,
    synthesize_stream,
    write_aer,
)
from .evaluation import (
    ExperimentSpec,
    MetricsReport,
    default_synthetic_config,
    identity_stream,
    network_for_geometry,
    report_csv,
    report_table,
    run_experiment,
    train_synthetic,
    training_corpus,
)
from .hulk import InstanceTrace, unravel, unravel_all
from .network import (
    EncoderActivity,
    SpikeRecord,
    SpikeTensor,
    SpikingNetwork,
    make_edge_kernels,
    train,
)
from .pipeline import BufferResult, Pipeline
from .smash import (
    AshMatrix,
    BoundingBox,
    ClassObject,
    HashedInstance,
    SmashPairing,
    ash_hash,
    bbox_iou,
    bbox_of,
    group_instances,
    hash_instances,
    packed_size,
    pair_scores,
    similarity,
    smash_score,
    storage_savings,
)
from .tracker import Assignment, Registry, TimelineEntry, TrackedObject, match_objects, track_sequence

__version__ = "0.1.0"

__all__ = [
    "AshMatrix",
    "Assignment",
    "BoundingBox",
    "BufferResult",
    "CheckpointError",
    "ClassObject",
    "ConfigError",
    "DecodePath",
    "EncodeError",
    "EncoderActivity",
    "Event",
    "EventStream",
    "ExperimentSpec",
    "FormatError",
    "GeometryError",
    "HashedInstance",
    "InstanceTrace",
    "LayerConfig",
    "MetricsReport",
    "NetworkConfig",
    "OrderingError",
    "Pipeline",
    "Placement",
    "Registry",
    "SceneComposition",
    "SemanticMask",
    "SequenceBuffer",
    "SmashPairing",
    "SpikeMatchError",
    "SpikeRecord",
    "SpikeTensor",
    "SpikingNetwork",
    "StdpConfig",
    "TimelineEntry",
    "TrackedObject",
    "TrackerConfig",
    "ash_hash",
    "bbox_iou",
    "bbox_of",
    "buffer",
    "composite",
    "decode_semantic",
    "default_synthetic_config",
    "group_instances",
    "hash_instances",
    "identity_stream",
    "inject_noise",
    "load_network_config",
    "load_scene_config",
    "load_weights",
    "make_edge_kernels",
    "match_objects",
    "network_for_geometry",
    "packed_size",
    "pair_scores",
    "read_aer",
    "record_provenance",
    "report_csv",
    "report_table",
    "run_experiment",
    "save_weights",
    "similarity",
    "smash_score",
    "storage_savings",
    "synthesize_stream",
    "track_sequence",
    "train",
    "train_synthetic",
    "training_corpus",
    "unravel",
    "unravel_all",
    "validate_weights",
    "write_aer",
]
