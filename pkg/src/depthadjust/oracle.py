"""Exact reference solvers over the finite ratio grid.

The set of baseline ratios reachable from 1.0 under clamped fixed-size
steps is finite, so the decision process can be solved exactly: a single
sweep over all reachable ratios bounds the achievable comfort score, and
finite-horizon backward induction gives the optimal discounted value.

Reachable ratios are enumerated by replaying :func:`env.apply_action`
itself rather than by generating an arithmetic grid: repeated float
addition is path-sensitive at the last bit, and the caches here must match
the environment's numbers bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .comfort import comfort_score, depth_richness, features_for_map
from .disparity import DisparityMap, scale_disparity
from .env import (
    Action,
    CameraState,
    EnvConfig,
    Transition,
    apply_action,
    encoding_fingerprint,
    reward,
)
from .errors import ConfigMismatchError, DomainError


@dataclass(frozen=True)
class RatioGridMDP:
    """All reachable ratios with cached comfort/depth values and transitions.

    ``ratios`` is sorted ascending and contains 1.0. ``move_to[i, a]`` is the
    ratio index after movement action ``a`` from ratio ``i``; ``vc`` and
    ``depth`` match the comfort module bit for bit. ``parents`` records the
    first-discovery (shortest) path of each ratio from 1.0.
    """

    ratios: np.ndarray
    vc: np.ndarray
    depth: np.ndarray
    move_to: np.ndarray  # (n_ratios, 2) for CLOSER / FARTHER
    max_steps: int
    config: EnvConfig
    parents: dict[float, tuple[float, Action] | None]


@dataclass(frozen=True)
class OracleResult:
    best_ratio: float
    best_vc: float
    best_action_sequence: tuple[Action, ...]
    vc_at_identity: float
    v_star: float | None
    fingerprint: str


def build_ratio_mdp(scene: DisparityMap, config: EnvConfig) -> RatioGridMDP:
    """Enumerate every ratio reachable within the step budget and cache values."""
    parents: dict[float, tuple[float, Action] | None] = {1.0: None}
    first_depth = {1.0: 0}
    frontier = [1.0]
    for depth_t in range(1, config.max_steps + 1):
        nxt = []
        for r in frontier:
            cam = CameraState(ratio=r, step=0)
            for action in (Action.CLOSER, Action.FARTHER):
                r2 = apply_action(cam, action, config).ratio
                if r2 not in parents:
                    parents[r2] = (r, action)
                    first_depth[r2] = depth_t
                    nxt.append(r2)
        frontier = nxt
        if not frontier:
            break
    ratios = np.array(sorted(parents))
    index = {r: i for i, r in enumerate(ratios)}
    vc = np.empty(ratios.size)
    depth = np.empty(ratios.size)
    for i, r in enumerate(ratios):
        features = features_for_map(
            scale_disparity(scene, r), config.geometry, config.features
        )
        vc[i] = comfort_score(features, config.model)
        depth[i] = depth_richness(features)
    move_to = np.empty((ratios.size, 2), dtype=np.int64)
    for i, r in enumerate(ratios):
        if first_depth[float(r)] >= config.max_steps:
            # Only ever occupied at t = max_steps, where no action is taken;
            # successors may lie outside the enumerated set, so park the row.
            move_to[i, :] = i
            continue
        cam = CameraState(ratio=float(r), step=0)
        for action in (Action.CLOSER, Action.FARTHER):
            move_to[i, int(action)] = index[apply_action(cam, action, config).ratio]
    return RatioGridMDP(
        ratios=ratios,
        vc=vc,
        depth=depth,
        move_to=move_to,
        max_steps=config.max_steps,
        config=config,
        parents=parents,
    )


def _sequence_to(mdp: RatioGridMDP, target: float) -> tuple[Action, ...]:
    seq: list[Action] = []
    r = target
    while mdp.parents[r] is not None:
        r, action = mdp.parents[r]
        seq.append(action)
    seq.reverse()
    if len(seq) < mdp.max_steps:
        seq.append(Action.STOP)
    return tuple(seq)


def grid_search(
    scene: DisparityMap, config: EnvConfig, mdp: RatioGridMDP | None = None
) -> OracleResult:
    """Best comfort score over every reachable ratio.

    Ties prefer the ratio closest to 1.0 (keep the original capture), then
    the smaller ratio.
    """
    if mdp is None:
        mdp = build_ratio_mdp(scene, config)
    best = max(
        range(mdp.ratios.size),
        key=lambda i: (mdp.vc[i], -abs(mdp.ratios[i] - 1.0), -mdp.ratios[i]),
    )
    identity = int(np.searchsorted(mdp.ratios, 1.0))
    return OracleResult(
        best_ratio=float(mdp.ratios[best]),
        best_vc=float(mdp.vc[best]),
        best_action_sequence=_sequence_to(mdp, float(mdp.ratios[best])),
        vc_at_identity=float(mdp.vc[identity]),
        v_star=None,
        fingerprint=encoding_fingerprint(config),
    )


def value_iteration(mdp: RatioGridMDP, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    """Finite-horizon backward induction over (ratio, t) states.

    Returns ``v`` of shape (n_ratios, max_steps + 1) with ``v[:, T] = 0`` and
    a greedy ``policy`` of shape (n_ratios, max_steps); greedy ties break to
    the lowest action index.
    """
    if not 0 <= gamma < 1:
        raise DomainError("gamma must be in [0, 1)")
    cfg = mdp.config
    n = mdp.ratios.size
    t_max = mdp.max_steps
    v = np.zeros((n, t_max + 1))
    policy = np.zeros((n, t_max), dtype=np.int64)
    for t in range(t_max - 1, -1, -1):
        for i in range(n):
            q = np.empty(3)
            for action in (Action.CLOSER, Action.FARTHER):
                j = mdp.move_to[i, int(action)]
                rew = reward(
                    (mdp.vc[i], mdp.depth[i]), (mdp.vc[j], mdp.depth[j]), action, cfg
                )
                done = (t + 1 >= t_max) or (j == i)
                q[int(action)] = rew if done else rew + gamma * v[j, t + 1]
            q[int(Action.STOP)] = reward(
                (mdp.vc[i], mdp.depth[i]), (mdp.vc[i], mdp.depth[i]), Action.STOP, cfg
            )
            policy[i, t] = int(np.argmax(q))
            v[i, t] = q[policy[i, t]]
    return v, policy


def solve(scene: DisparityMap, config: EnvConfig, gamma: float) -> OracleResult:
    """Grid search plus the optimal discounted value at the initial state."""
    mdp = build_ratio_mdp(scene, config)
    result = grid_search(scene, config, mdp=mdp)
    v, _ = value_iteration(mdp, gamma)
    identity = int(np.searchsorted(mdp.ratios, 1.0))
    return OracleResult(
        best_ratio=result.best_ratio,
        best_vc=result.best_vc,
        best_action_sequence=result.best_action_sequence,
        vc_at_identity=result.vc_at_identity,
        v_star=float(v[identity, 0]),
        fingerprint=result.fingerprint,
    )


def regret(
    trajectory: list[Transition], oracle: OracleResult, config: EnvConfig
) -> float:
    """Oracle-best comfort minus the trajectory's final comfort, floored at 0.

    The agent cannot exceed the oracle; a gap below -1e-9 means the two were
    computed under different configurations and is rejected.
    """
    if oracle.fingerprint != encoding_fingerprint(config):
        raise ConfigMismatchError("oracle was computed under a different configuration")
    if not trajectory:
        raise DomainError("empty trajectory")
    final_vc = comfort_score(trajectory[-1].next_state.features, config.model)
    gap = oracle.best_vc - final_vc
    if gap < -1e-9:
        raise ConfigMismatchError(
            f"trajectory comfort {final_vc!r} exceeds oracle bound {oracle.best_vc!r}"
        )
    return max(gap, 0.0)
