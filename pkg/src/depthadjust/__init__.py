"""Stereoscopic depth adjustment toolkit.

Disparity fields, a visual-comfort metric over angular disparity
statistics, a deterministic baseline-scaling decision process, a small
Q-learning agent that learns when to move the cameras and when to stop,
and exact grid oracles to validate it all against.
"""

__version__ = "0.1.0"

from .agent import (
    AgentConfig,
    QNetwork,
    ReplayBuffer,
    TrainingLog,
    backward,
    forward,
    load_model,
    rollout_greedy,
    save_model,
    select_action,
    train,
    train_step,
)
from .comfort import (
    ComfortModel,
    FeatureConfig,
    FeatureVector,
    LabeledSample,
    SignificanceMap,
    comfort_score,
    default_comfort_model,
    depth_richness,
    extract_features,
    features_for_map,
    fit_model,
    load_comfort_model,
    save_comfort_model,
    significance_map,
)
from .disparity import (
    DisparityMap,
    DisparityStats,
    ViewingGeometry,
    scale_disparity,
    stats,
    to_angular,
    warp_view,
)
from .env import (
    Action,
    AdjustmentState,
    CameraState,
    DepthAdjustEnv,
    EnvConfig,
    Transition,
    apply_action,
    encoding_fingerprint,
    reset,
    reward,
    step,
)
from .errors import (
    ConfigError,
    ConfigMismatchError,
    DepthAdjustError,
    DomainError,
    EmptyBatchError,
    EmptyMapError,
    FingerprintMismatchError,
    FormatError,
    LengthMismatchError,
    ShapeMismatchError,
    SingularSystemError,
    SpecError,
    TerminalStateError,
)
from .formats import load_disparity, load_scene_file, save_disparity
from .oracle import (
    OracleResult,
    RatioGridMDP,
    build_ratio_mdp,
    grid_search,
    regret,
    solve,
    value_iteration,
)
from .scenes import SceneLayer, SceneSpec, generate_scene, sample_scenes

__all__ = [name for name in dir() if not name.startswith("_")]
