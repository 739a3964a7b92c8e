"""The iterative depth-adjustment decision process.

States pair the perceptual features of the currently scaled scene with the
camera baseline ratio and step counter. Actions emulate moving the stereo
cameras: Closer shrinks the baseline ratio by a fixed step, Farther grows
it, Stop ends the episode. The reward tracks the change in the comfort
score and in the retained depth range, plus a terminal bonus for stopping
in a comfortable state:

    r_t = alpha * (VC' - VC) + beta * (D' - D)
          + (on Stop) +tau if VC' >= vc_ok else -tau

Transitions are deterministic. An episode ends on Stop, when the step
budget runs out, or when a movement is clamped into a no-op at a ratio
bound (the clamped move still consumes a step).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np

from .comfort import (
    ComfortModel,
    FeatureConfig,
    FeatureVector,
    comfort_score,
    default_comfort_model,
    depth_richness,
    features_for_map,
)
from .disparity import DisparityMap, ViewingGeometry, scale_disparity
from .errors import ConfigError, TerminalStateError


class Action(IntEnum):
    CLOSER = 0
    FARTHER = 1
    STOP = 2


@dataclass(frozen=True)
class CameraState:
    """Baseline ratio relative to the original capture, and the step index."""

    ratio: float
    step: int


@dataclass(frozen=True)
class AdjustmentState:
    """Full decision-process state: features plus encoded vector for the agent.

    ``encoded`` is the feature vector with the ratio (normalized to [0, 1]
    over the ratio bounds) and the step fraction appended.
    """

    features: FeatureVector
    camera: CameraState
    encoded: np.ndarray


@dataclass(frozen=True)
class Transition:
    state: AdjustmentState
    action: Action
    reward: float
    next_state: AdjustmentState
    done: bool


def _default_geometry() -> ViewingGeometry:
    return ViewingGeometry(viewing_distance_mm=900.0, pixel_pitch_mm=0.25)


@dataclass(frozen=True)
class EnvConfig:
    delta: float = 0.05
    ratio_min: float = 0.2
    ratio_max: float = 2.0
    max_steps: int = 20
    alpha: float = 1.0
    beta: float = 0.5
    tau: float = 1.0
    vc_ok: float = 3.5
    geometry: ViewingGeometry = field(default_factory=_default_geometry)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    model: ComfortModel | None = None

    def __post_init__(self) -> None:
        if not (math.isfinite(self.delta) and self.delta > 0):
            raise ConfigError("delta must be > 0")
        if not 0 < self.ratio_min < 1 < self.ratio_max:
            raise ConfigError("ratio bounds must satisfy 0 < ratio_min < 1 < ratio_max")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be >= 1")
        for name in ("alpha", "beta", "tau"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if not 1.0 <= self.vc_ok <= 5.0:
            raise ConfigError("vc_ok must be in [1, 5]")
        if self.model is None:
            object.__setattr__(self, "model", default_comfort_model(self.features))
        if self.model.weights.size != self.features.feature_length:
            raise ConfigError(
                f"comfort model length {self.model.weights.size} != "
                f"feature length {self.features.feature_length}"
            )

    @property
    def encoded_length(self) -> int:
        return self.features.feature_length + 2


def encoding_fingerprint(config: EnvConfig) -> str:
    """Digest of everything that defines the encoded state vector.

    Models trained under one fingerprint are rejected under another: the
    feature parameters fix the vector layout and the ratio/step bounds fix
    the normalization of the two appended entries.
    """
    f = config.features
    doc = {
        "comfort_halfwidth_deg": f.comfort_halfwidth_deg,
        "histogram_bins": f.histogram_bins,
        "histogram_halfrange_deg": f.histogram_halfrange_deg,
        "significance_gamma": f.significance_gamma,
        "significance_floor": f.significance_floor,
        "ratio_min": config.ratio_min,
        "ratio_max": config.ratio_max,
        "max_steps": config.max_steps,
    }
    blob = json.dumps(doc, sort_keys=True).encode("ascii")
    return hashlib.sha256(blob).hexdigest()


def _encode(features: FeatureVector, camera: CameraState, config: EnvConfig) -> np.ndarray:
    ratio_norm = (camera.ratio - config.ratio_min) / (config.ratio_max - config.ratio_min)
    return np.concatenate([features.values, [ratio_norm, camera.step / config.max_steps]])


def _state_at(scene: DisparityMap, camera: CameraState, config: EnvConfig) -> AdjustmentState:
    features = features_for_map(
        scale_disparity(scene, camera.ratio), config.geometry, config.features
    )
    return AdjustmentState(
        features=features, camera=camera, encoded=_encode(features, camera, config)
    )


def reset(scene: DisparityMap, config: EnvConfig) -> AdjustmentState:
    """Initial state: the unscaled scene at ratio 1, step 0."""
    return _state_at(scene, CameraState(ratio=1.0, step=0), config)


def apply_action(camera: CameraState, action: Action, config: EnvConfig) -> CameraState:
    """Next camera state; movement clamps to the ratio bounds, Stop holds."""
    ratio = camera.ratio
    if action == Action.CLOSER:
        ratio = max(ratio - config.delta, config.ratio_min)
    elif action == Action.FARTHER:
        ratio = min(ratio + config.delta, config.ratio_max)
    return CameraState(ratio=ratio, step=camera.step + 1)


def reward(
    prev: tuple[float, float],
    nxt: tuple[float, float],
    action: Action,
    config: EnvConfig,
) -> float:
    """Comfort-change plus depth-change reward; Stop adds the terminal bonus."""
    vc_prev, d_prev = prev
    vc_next, d_next = nxt
    r = config.alpha * (vc_next - vc_prev) + config.beta * (d_next - d_prev)
    if action == Action.STOP:
        r += config.tau if vc_next >= config.vc_ok else -config.tau
    return r


def step(
    scene: DisparityMap,
    state: AdjustmentState,
    action: Action,
    config: EnvConfig,
) -> Transition:
    """One deterministic transition.

    Features of the next state are recomputed from the rescaled scene, never
    scaled analytically, so the feature extractor stays the single source of
    truth. Raises :class:`TerminalStateError` when the step budget is spent;
    Stop- and clamp-terminations are only visible on the returned transition,
    so episode drivers must honor ``done`` (see :class:`DepthAdjustEnv`).
    """
    if state.camera.step >= config.max_steps:
        raise TerminalStateError("episode already at the step limit")
    action = Action(action)
    camera = apply_action(state.camera, action, config)
    next_state = _state_at(scene, camera, config)
    vc_prev = comfort_score(state.features, config.model)
    vc_next = comfort_score(next_state.features, config.model)
    rew = reward(
        (vc_prev, depth_richness(state.features)),
        (vc_next, depth_richness(next_state.features)),
        action,
        config,
    )
    clamped_noop = action != Action.STOP and camera.ratio == state.camera.ratio
    done = action == Action.STOP or camera.step >= config.max_steps or clamped_noop
    return Transition(state=state, action=action, reward=rew, next_state=next_state, done=done)


class DepthAdjustEnv:
    """Episode driver over one scene: tracks the current state and doneness."""

    def __init__(self, scene: DisparityMap, config: EnvConfig):
        self.scene = scene
        self.config = config
        self._state: AdjustmentState | None = None
        self._done = True

    def reset(self) -> AdjustmentState:
        self._state = reset(self.scene, self.config)
        self._done = False
        return self._state

    def step(self, action: Action) -> Transition:
        if self._done or self._state is None:
            raise TerminalStateError("reset the environment before stepping")
        transition = step(self.scene, self._state, action, self.config)
        self._state = transition.next_state
        self._done = transition.done
        return transition

    @property
    def state(self) -> AdjustmentState:
        if self._state is None:
            raise TerminalStateError("environment not reset")
        return self._state

    @property
    def done(self) -> bool:
        return self._done

    def comfort(self) -> float:
        return comfort_score(self.state.features, self.config.model)

    def richness(self) -> float:
        return depth_richness(self.state.features)


def write_trajectory_csv(
    path: str | Path,
    transitions: list[Transition],
    config: EnvConfig,
    episode_id: int = 0,
) -> None:
    """One row per transition: episode, t, r, action, VC, D, reward, done."""
    lines = ["episode,t,ratio,action,vc,depth,reward,done"]
    for tr in transitions:
        cam = tr.next_state.camera
        vc = comfort_score(tr.next_state.features, config.model)
        d = depth_richness(tr.next_state.features)
        lines.append(
            f"{episode_id},{cam.step},{cam.ratio!r},{tr.action.name},"
            f"{vc!r},{d!r},{tr.reward!r},{int(tr.done)}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")
