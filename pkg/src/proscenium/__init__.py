"""Deterministic simulator of a dual-layer transparent-display workstation."""

from .core import (
    Color,
    DisplayGeometry,
    DomainError,
    LayerId,
    PixelBuffer,
    luminance_alpha,
    m_to_px,
    px_to_m,
)
from .transition import (
    EasingStyle,
    Envelope,
    LayerRenderState,
    PhaseSpec,
    RenderParams,
    TransitionSpec,
    evaluate_envelope,
    evaluate_transition,
    make_fade,
    make_transition,
)
from .linking import BinaryMask, LinkingParams, LinkingStyle, mask_of, render_linking
from .calibration import (
    CalibrationReport,
    PointSet3,
    SimilarityTransform,
    estimate_similarity,
    rmse,
)
from .compositor import (
    CompositeFrame,
    OpticalModel,
    Viewpoint,
    composite,
    project_back_to_front,
    render_layers,
)
from .profile import (
    ExperienceProfile,
    ParseError,
    Zone,
    ZoneConfig,
    parse_profile,
    serialize_profile,
    validate,
)
from .runtime import (
    DT,
    DepthFrame,
    Engine,
    HandFrame,
    UserDistance,
    classify_proximity,
    depth_segment,
    ingest_hand,
)

__version__ = "0.1.0"
