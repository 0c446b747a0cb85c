"""Cooperative multi-agent 3D multi-object tracking toolkit.

The package covers the full loop: a deterministic multi-agent scenario
simulator, rotated-box geometry, per-class motion filters, two-stage
bounding-box association, appearance re-identification across agents,
an attention-based feature fusion kernel, CLEAR/AMOTA-style evaluation,
and a file-format layer plus CLI that chains the stages together.
"""
from .association import (
    AffinityMatrix,
    MatchResult,
    associate_two_stage,
    build_affinity,
    greedy,
    hungarian,
)
from .core import (
    CLASS_DIMS,
    AgentPose,
    Box3D,
    CameraModel,
    ClassRegistry,
    Detection,
    FrameBundle,
    GroundTruthObject,
    IdSource,
    MatcherKind,
    MotionModel,
    ObjectClass,
    Track,
    default_registry,
    wrap_angle,
)
from .errors import (
    BehindCameraError,
    CotrackError,
    DataFormatError,
    DegenerateCovarianceError,
    SchemaVersionError,
    ShapeError,
    UndefinedMetricError,
    UnknownClassError,
    ValidationError,
)
from .fusion import (
    FeatureMap,
    GsafConfig,
    gsaf_forward,
    interagent_fuse,
    load_config,
    make_config,
    multiscale_attention,
    naive_forward,
    residual_ffn,
    save_config,
)
from .geometry import (
    Bbox2D,
    crop_box_for,
    giou3d,
    iou3d,
    nms,
    project_to_pixel,
    transform_box,
    transform_point,
)
from .metrics import (
    AmotaResult,
    EvalCounts,
    MotSample,
    amota_family,
    average_precision,
    evaluate_sequence,
    get_thresholds,
    mean_average_precision,
    mota,
    motp,
)
from .motion import (
    ClassNoise,
    FilterState,
    NoiseConfig,
    ctra_step,
    init_state,
    predict,
    speed,
    state_box,
    update,
)
from .reid import (
    DictProvider,
    EmbeddingProvider,
    EmbeddingRecord,
    FeatureLUT,
    FileBackedProvider,
    NullProvider,
    ReidMatch,
    cosine,
    reid_match,
)
from .simulator import (
    AgentSpec,
    MotionSegment,
    NoiseSpec,
    ObjectSpec,
    Purpose,
    Scenario,
    canned_scenarios,
    generate,
    keyed_rng,
)
from .tracker import (
    MultiObjectTracker,
    ReidConfig,
    TrackerConfig,
    TrackerOutput,
    TrackSnapshot,
    baseline_config,
)

__version__ = "0.1.0"

__all__ = [
    "AffinityMatrix",
    "AgentPose",
    "AgentSpec",
    "AmotaResult",
    "Bbox2D",
    "BehindCameraError",
    "Box3D",
    "CLASS_DIMS",
    "CameraModel",
    "ClassNoise",
    "ClassRegistry",
    "CotrackError",
    "DataFormatError",
    "DegenerateCovarianceError",
    "Detection",
    "DictProvider",
    "EmbeddingProvider",
    "EmbeddingRecord",
    "EvalCounts",
    "FeatureLUT",
    "FeatureMap",
    "FileBackedProvider",
    "FilterState",
    "FrameBundle",
    "GroundTruthObject",
    "GsafConfig",
    "IdSource",
    "MatchResult",
    "MatcherKind",
    "MotSample",
    "MotionModel",
    "MotionSegment",
    "MultiObjectTracker",
    "NoiseConfig",
    "NoiseSpec",
    "NullProvider",
    "ObjectClass",
    "ObjectSpec",
    "Purpose",
    "ReidConfig",
    "ReidMatch",
    "Scenario",
    "SchemaVersionError",
    "ShapeError",
    "Track",
    "TrackSnapshot",
    "TrackerConfig",
    "TrackerOutput",
    "UndefinedMetricError",
    "UnknownClassError",
    "ValidationError",
    "amota_family",
    "associate_two_stage",
    "average_precision",
    "baseline_config",
    "build_affinity",
    "canned_scenarios",
    "cosine",
    "crop_box_for",
    "ctra_step",
    "default_registry",
    "evaluate_sequence",
    "generate",
    "get_thresholds",
    "giou3d",
    "greedy",
    "gsaf_forward",
    "hungarian",
    "init_state",
    "interagent_fuse",
    "iou3d",
    "keyed_rng",
    "load_config",
    "make_config",
    "mean_average_precision",
    "mota",
    "motp",
    "multiscale_attention",
    "naive_forward",
    "nms",
    "predict",
    "project_to_pixel",
    "reid_match",
    "residual_ffn",
    "save_config",
    "speed",
    "state_box",
    "transform_box",
    "transform_point",
    "update",
    "wrap_angle",
]
