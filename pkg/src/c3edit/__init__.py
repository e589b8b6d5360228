"""Desk-scale controllable, view-consistent 2D-lifting 3D scene editing."""

from .editmodel import AdapterBank, AdapterPair, EditorModel, EditResult, edit, encode_prompt
from .errors import (
    C3EditError,
    ConflictError,
    NumericFault,
    ParseError,
    PhaseError,
    ValidationError,
)
from .evalmetrics import (
    PyramidEmbedder,
    build_report,
    feature_scatter,
    frechet_distance,
    image_image_score,
    image_text_score,
)
from .losses import LossWeights, inter_loss, intra_loss, l1, perceptual
from .pipeline import EditSession, RunConfig, resume
from .propagation import (
    PropagationState,
    ViewSchedule,
    build_schedule,
    closest_processed,
    propagation_visits,
    record_edit,
)
from .scene import (
    Camera,
    SplatScene,
    ViewImage,
    camera_distance,
    load_scene,
    make_ring_scene,
    render,
    save_scene,
)

__version__ = "0.1.0"

__all__ = [
    "AdapterBank",
    "AdapterPair",
    "C3EditError",
    "Camera",
    "ConflictError",
    "EditResult",
    "EditSession",
    "EditorModel",
    "LossWeights",
    "NumericFault",
    "ParseError",
    "PhaseError",
    "PropagationState",
    "PyramidEmbedder",
    "RunConfig",
    "SplatScene",
    "ValidationError",
    "ViewImage",
    "ViewSchedule",
    "build_report",
    "build_schedule",
    "camera_distance",
    "closest_processed",
    "edit",
    "encode_prompt",
    "feature_scatter",
    "frechet_distance",
    "image_image_score",
    "image_text_score",
    "inter_loss",
    "intra_loss",
    "l1",
    "load_scene",
    "make_ring_scene",
    "perceptual",
    "propagation_visits",
    "record_edit",
    "render",
    "resume",
    "save_scene",
]
