"""Open-set 3D surfel mapping.

Fuses per-region embedding features from posed RGB-D frames into a
confidence-weighted surfel map, then answers vector, click, and spatial
queries against it. See the README for the file formats, the HTTP service,
and the CLI.
"""

from .errors import (
    DegenerateFeatureError,
    EngineError,
    FormatError,
    InputError,
    MapBusyError,
    ObjectNotFoundError,
    ParseError,
    UnknownRelationError,
)
from .geometry import (
    CameraIntrinsics,
    ConceptVector,
    InputFrame,
    Pose,
    VertexNormalMaps,
    backproject,
    compute_normals,
    cosine_similarity,
    project,
    radial_confidence,
    transform_to_world,
)
from .features import (
    FrameFeaturePack,
    PixelFeatureMap,
    RegionProposal,
    blend_features,
    compute_pixel_features,
    global_alignment,
    mixing_weights,
    rasterize,
    region_uniqueness,
)
from .fusion import (
    Association,
    FusionConfig,
    FusionReport,
    SurfelMap,
    SurfelPoint,
    associate,
    fuse_frame,
    fuse_point,
)
from .query import (
    ClusterRegion,
    QueryResult,
    ThresholdPolicy,
    click_query,
    cluster_regions,
    query,
    score_map,
    threshold_scores,
)
from .spatial import (
    RelationResult,
    ResolvedObject,
    SpatialExpr,
    ViewConfig,
    evaluate,
    parse_3dsc,
    resolve_operand,
)
from .metrics import (
    SegmentationMetrics,
    detection_at,
    iou3d,
    segmentation_metrics,
)
from .formats import (
    decode_frame_pack,
    decode_labels,
    decode_map,
    encode_frame_pack,
    encode_labels,
    encode_map,
    load_map,
    load_vector_table,
    read_frame_pack,
    read_labels,
    save_map,
    write_frame_pack,
    write_labels,
)

__version__ = "0.1.0"

__all__ = [
    "Association",
    "CameraIntrinsics",
    "ClusterRegion",
    "ConceptVector",
    "DegenerateFeatureError",
    "EngineError",
    "FormatError",
    "FrameFeaturePack",
    "FusionConfig",
    "FusionReport",
    "InputError",
    "InputFrame",
    "MapBusyError",
    "ObjectNotFoundError",
    "ParseError",
    "PixelFeatureMap",
    "Pose",
    "QueryResult",
    "RegionProposal",
    "RelationResult",
    "ResolvedObject",
    "SegmentationMetrics",
    "SpatialExpr",
    "SurfelMap",
    "SurfelPoint",
    "ThresholdPolicy",
    "UnknownRelationError",
    "VertexNormalMaps",
    "ViewConfig",
    "associate",
    "backproject",
    "blend_features",
    "click_query",
    "cluster_regions",
    "compute_normals",
    "compute_pixel_features",
    "cosine_similarity",
    "decode_frame_pack",
    "decode_labels",
    "decode_map",
    "detection_at",
    "encode_frame_pack",
    "encode_labels",
    "encode_map",
    "evaluate",
    "fuse_frame",
    "fuse_point",
    "global_alignment",
    "iou3d",
    "load_map",
    "load_vector_table",
    "mixing_weights",
    "parse_3dsc",
    "project",
    "query",
    "radial_confidence",
    "rasterize",
    "read_frame_pack",
    "read_labels",
    "resolve_operand",
    "save_map",
    "score_map",
    "segmentation_metrics",
    "threshold_scores",
    "transform_to_world",
    "write_frame_pack",
    "write_labels",
]
