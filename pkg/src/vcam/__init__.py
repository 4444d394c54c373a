"""Virtual-camera toolkit: trajectory design, sampling plans, and a verifiable
synthetic renderer for generative novel view synthesis pipelines."""

from .geometry import (
    Camera,
    Intrinsics,
    MatchSet,
    NormalizationParams,
    PluckerMap,
    Pose,
    camera_descriptor,
    epipolar_sed,
    fundamental_matrix,
    normalize_scene,
    plucker_map,
    relative_to_first,
)
from .trajectory import TrajectorySpec, generate, interpolate_keyframes, resample_uniform
from .planner import (
    ForwardPass,
    FrameRef,
    MemoryBank,
    PlannerConfig,
    SamplingPlan,
    ViewRequest,
    assign_nearest_chunks,
    compute_stride,
    make_plan,
    plan_memory_bank_anchors,
    select_anchor_indices,
    validate_plan,
)
from .oracle import (
    Frame,
    GenerationRequest,
    SyntheticScene,
    build_scene,
    oracle_generate,
    render_ground_truth,
    visibility_mask,
)
from .executor import ExecutionResult, execute, sweep_scale
from .backends import OracleBackend, HttpBackend

__version__ = "0.1.0"
