"""Scene augmentation engine for tabletop pick-and-place demonstrations."""

from .augment import (
    AssetLibrary,
    AugmentConfig,
    AugmentPlan,
    PromptVocab,
    aug_add_distractor,
    aug_background,
    aug_cross_category,
    aug_in_category,
    augment_dataset,
    default_vocab,
    sample_plan,
)
from .evaluation import AffordanceModel, EvalConfig, EvalReport, ablation_run, evaluate, fit, predict
from .genbackend import BackendConfig, GenRequest, GenResult, composite, generate, make_backend, procedural_generate
from .geometry import (
    CameraIntrinsics,
    CameraPose,
    RgbdFrame,
    TopDownConfig,
    TopDownObservation,
    build_topdown,
    deproject_pixel,
    topdown_px_to_world,
    world_to_topdown_px,
)
from .rasterizer import Placement, RenderPatch, TriMesh, fit_scale_to_footprint, load_obj, rasterize
from .scene import (
    Demo,
    DemoDataset,
    MaskSet,
    PickPlaceAction,
    ScoreMap,
    dataset_digest,
    load_dataset,
    save_dataset,
    synth_demo,
    validate_demo,
)

__version__ = "0.1.0"
