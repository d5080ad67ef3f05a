"""Copy-paste augmentation for grayscale images with Poisson blending."""

from .errors import *  # noqa: F401,F403
from .solver import (
    PoissonSystem,
    RegionIndex,
    SolveReport,
    assemble_system,
    compute_divergence,
    harmonic_fill,
    index_region,
    seamless_clone,
    solve,
)
from .pipeline import (
    AugmentConfig,
    AugmentedSample,
    Placement,
    RoiPatch,
    TransformParams,
    augment_dataset,
    extract_roi,
    paste,
    sample_placement,
    seam_score,
    transform_roi,
)
from .dataset_io import load_image, load_manifest, load_mask, save_image, save_mask, write_output_manifest

__version__ = "0.1.0"
