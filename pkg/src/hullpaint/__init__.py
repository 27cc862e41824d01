"""Local 3D edits of radiance fields via silhouette hulls and 2D inpainting."""

from .cameras import CameraModel, look_at
from .editloss import ConstraintSampleBatch, l_out
from .engine import (
    EditJobConfig,
    JobState,
    desk_profile,
    fit_field,
    run_edit_job,
    strength_at,
    update_dataset,
)
from .errors import (
    CheckpointError,
    CorruptCheckpointError,
    DegenerateHullWarning,
    HullpaintError,
    IncompatibleCheckpointError,
    InvalidInputError,
    ManifestError,
    NoRegionError,
    ProtocolError,
    TrainingDivergedError,
    TransportError,
    ValidationError,
)
from .fields import FieldConfig, RadianceField
from .hull import (
    MaskImage,
    PosedMesh,
    VisualHull,
    hull_from_masks,
    hull_from_mesh,
    load_mesh_obj,
    parse_obj,
    silhouettes_from_mesh,
)
from .inpaint import (
    InpaintRequest,
    InpaintResponse,
    MockBackend,
    RemoteBackend,
    mock_inpaint,
    parse_backend,
)
from .maskproj import CropRect, FloatMask, binarize, dilate, render_hull_mask, select_crop
from .rendering import SamplingConfig, composite, opacity, render_view, sample_ray
from .sceneio import (
    SceneDataset,
    SceneEntry,
    generate_synthetic_scene,
    load_checkpoint,
    load_manifest,
    save_checkpoint,
    save_manifest,
)
from .training import LossWeights, RayBatch, make_optimizer, train_step

__version__ = "0.1.0"

__all__ = [
    "CameraModel",
    "CheckpointError",
    "ConstraintSampleBatch",
    "CorruptCheckpointError",
    "CropRect",
    "DegenerateHullWarning",
    "EditJobConfig",
    "FieldConfig",
    "FloatMask",
    "HullpaintError",
    "IncompatibleCheckpointError",
    "InpaintRequest",
    "InpaintResponse",
    "InvalidInputError",
    "JobState",
    "LossWeights",
    "ManifestError",
    "MaskImage",
    "MockBackend",
    "NoRegionError",
    "PosedMesh",
    "ProtocolError",
    "RadianceField",
    "RayBatch",
    "RemoteBackend",
    "SamplingConfig",
    "SceneDataset",
    "SceneEntry",
    "TrainingDivergedError",
    "TransportError",
    "ValidationError",
    "VisualHull",
    "binarize",
    "composite",
    "desk_profile",
    "dilate",
    "fit_field",
    "generate_synthetic_scene",
    "hull_from_masks",
    "hull_from_mesh",
    "l_out",
    "load_checkpoint",
    "load_manifest",
    "load_mesh_obj",
    "look_at",
    "make_optimizer",
    "mock_inpaint",
    "opacity",
    "parse_backend",
    "parse_obj",
    "render_hull_mask",
    "render_view",
    "run_edit_job",
    "sample_ray",
    "save_checkpoint",
    "save_manifest",
    "select_crop",
    "silhouettes_from_mesh",
    "strength_at",
    "train_step",
    "update_dataset",
]
