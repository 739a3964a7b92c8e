import math

import numpy as np
import pytest

from depthadjust.comfort import (
    FeatureConfig,
    comfort_score,
    default_comfort_model,
)
from depthadjust.env import (
    Action,
    CameraState,
    DepthAdjustEnv,
    EnvConfig,
    apply_action,
    encoding_fingerprint,
    reset,
    reward,
    step,
    write_trajectory_csv,
)
from depthadjust.errors import ConfigError, TerminalStateError
from depthadjust.scenes import SceneLayer, SceneSpec, generate_scene

from conftest import GEOM, constant_map, deg_to_px


def make_scene(seed=0):
    spec = SceneSpec(
        width=24,
        height=16,
        layers=(SceneLayer("rectangle", 120.0, 0.2),),
        background_disparity_px=45.0,
        noise_sigma_px=0.4,
    )
    return generate_scene(spec, seed=seed)


class TestConfigValidation:
    def test_defaults_valid(self):
        cfg = EnvConfig()
        assert cfg.model is not None
        assert cfg.encoded_length == cfg.features.feature_length + 2

    @pytest.mark.parametrize(
        "kw",
        [
            {"delta": 0.0},
            {"ratio_min": 0.0},
            {"ratio_min": 1.2},
            {"ratio_max": 0.9},
            {"max_steps": 0},
            {"alpha": -1.0},
            {"vc_ok": 9.0},
        ],
    )
    def test_rejects_bad_values(self, kw):
        with pytest.raises(ConfigError):
            EnvConfig(**kw)

    def test_model_length_checked(self, small_features):
        from depthadjust.comfort import ComfortModel

        with pytest.raises(ConfigError):
            EnvConfig(features=small_features, model=ComfortModel(np.zeros(99), 5.0))


class TestReset:
    def test_initial_camera(self, quick_env):
        state = reset(make_scene(), quick_env)
        assert state.camera.ratio == 1.0
        assert state.camera.step == 0

    def test_flat_scene_encoding(self, quick_env):
        state = reset(constant_map(0.0), quick_env)
        n = quick_env.features.feature_length
        f = state.encoded[:n]
        assert f[:5].tolist() == [0.0] * 5
        assert f[5:][4] == 1.0  # center histogram bin
        ratio_norm = (1.0 - quick_env.ratio_min) / (quick_env.ratio_max - quick_env.ratio_min)
        assert state.encoded[n] == pytest.approx(ratio_norm)
        assert state.encoded[n + 1] == 0.0

    def test_deterministic(self, quick_env):
        a = reset(make_scene(), quick_env)
        b = reset(make_scene(), quick_env)
        assert np.array_equal(a.encoded, b.encoded)


class TestApplyAction:
    def test_single_closer(self):
        cfg = EnvConfig(delta=0.05)
        cam = apply_action(CameraState(1.0, 0), Action.CLOSER, cfg)
        assert cam.ratio == 0.95 and cam.step == 1

    def test_clamp_at_lower_bound(self):
        cfg = EnvConfig(delta=0.05, ratio_min=0.2)
        cam = apply_action(CameraState(0.2, 3), Action.CLOSER, cfg)
        assert cam.ratio == 0.2 and cam.step == 4

    def test_stop_keeps_ratio(self):
        cfg = EnvConfig()
        cam = apply_action(CameraState(0.85, 2), Action.STOP, cfg)
        assert cam.ratio == 0.85 and cam.step == 3

    def test_sequence_replay(self):
        cfg = EnvConfig(delta=0.05)
        seq = [Action.CLOSER] * 4 + [Action.FARTHER] * 2
        cam = CameraState(1.0, 0)
        expected = 1.0
        for action in seq:
            cam = apply_action(cam, action, cfg)
            # independent replay of the stated update rule
            if action == Action.CLOSER:
                expected = max(expected - 0.05, cfg.ratio_min)
            elif action == Action.FARTHER:
                expected = min(expected + 0.05, cfg.ratio_max)
        assert cam.ratio == expected
        assert cam.ratio == pytest.approx(1.0 - 2 * 0.05, rel=1e-12)
        assert cam.step == 6


class TestReward:
    def test_weighted_changes(self):
        cfg = EnvConfig(alpha=1.0, beta=0.5)
        r = reward((3.0, 1.0), (3.3, 1.0), Action.CLOSER, cfg)
        assert r == pytest.approx(0.3, rel=1e-12)

    def test_depth_term(self):
        cfg = EnvConfig(alpha=1.0, beta=0.5)
        r = reward((3.0, 2.0), (3.0, 1.0), Action.FARTHER, cfg)
        assert r == pytest.approx(-0.5, rel=1e-12)

    def test_stop_bonus_positive(self):
        cfg = EnvConfig(tau=1.0, vc_ok=3.5)
        r = reward((4.2, 1.0), (4.2, 1.0), Action.STOP, cfg)
        assert r == 1.0

    def test_stop_bonus_negative(self):
        cfg = EnvConfig(tau=1.0, vc_ok=3.5)
        r = reward((2.0, 1.0), (2.0, 1.0), Action.STOP, cfg)
        assert r == -1.0


class TestStep:
    def test_immediate_stop(self, quick_env):
        scene = make_scene()
        state = reset(scene, quick_env)
        tr = step(scene, state, Action.STOP, quick_env)
        assert tr.done
        assert tr.next_state.camera.ratio == 1.0
        vc = comfort_score(state.features, quick_env.model)
        expected = quick_env.tau if vc >= quick_env.vc_ok else -quick_env.tau
        assert tr.reward == pytest.approx(expected, abs=1e-12)

    def test_horizon_cutoff(self, quick_env):
        scene = make_scene()
        env = DepthAdjustEnv(scene, quick_env)
        env.reset()
        transitions = []
        while not env.done:
            transitions.append(env.step(Action.FARTHER))
        # Farther clamps at ratio_max and the clamped no-op ends the episode
        # before the horizon does.
        assert transitions[-1].done
        assert len(transitions) <= quick_env.max_steps

    def test_horizon_reached_without_clamp(self):
        cfg = EnvConfig(
            delta=0.01,
            ratio_min=0.5,
            ratio_max=1.5,
            max_steps=6,
            features=FeatureConfig(histogram_bins=8),
            geometry=GEOM,
        )
        scene = make_scene()
        env = DepthAdjustEnv(scene, cfg)
        env.reset()
        transitions = []
        while not env.done:
            transitions.append(env.step(Action.FARTHER))
        assert len(transitions) == 6
        assert transitions[-1].next_state.camera.step == cfg.max_steps

    def test_clamp_noop_terminates(self, quick_env):
        scene = make_scene()
        env = DepthAdjustEnv(scene, quick_env)
        state = env.reset()
        # Descend until the clamp lands the ratio exactly on the bound.
        while state.camera.ratio != quick_env.ratio_min:
            state = env.step(Action.CLOSER).next_state
        assert not env.done
        tr = env.step(Action.CLOSER)
        assert tr.done
        assert tr.next_state.camera.ratio == quick_env.ratio_min

    def test_one_closer_step_hand_evaluated(self):
        # A constant scene fully at +1.5 deg; one Closer step with delta
        # large enough to pull every pixel inside the 1 deg zone.
        features = FeatureConfig(histogram_bins=8)
        cfg = EnvConfig(
            delta=0.35,
            ratio_min=0.5,
            ratio_max=1.5,
            max_steps=4,
            geometry=GEOM,
            features=features,
        )
        scene = constant_map(deg_to_px(1.5), (6, 6))
        state = reset(scene, cfg)
        tr = step(scene, state, Action.CLOSER, cfg)

        def expected_features(eta_deg):
            hist = np.zeros(8)
            idx = min(7, int(math.floor((eta_deg + 2.0) / 4.0 * 8)))
            hist[idx] = 1.0
            violation = 1.0 if eta_deg > 1.0 else 0.0
            return np.concatenate(
                [[abs(eta_deg), abs(eta_deg), violation, 0.0, 0.0], hist]
            )

        eta0 = 1.5
        eta1 = math.degrees(math.atan(0.65 * math.tan(math.radians(1.5))))
        np.testing.assert_allclose(state.features.values, expected_features(eta0), rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(
            tr.next_state.features.values, expected_features(eta1), rtol=1e-12, atol=1e-12
        )
        model = default_comfort_model(features)
        vc0 = max(1.0, 5.0 - 1.2 * eta0 - 0.8 * eta0 - 2.0)  # clamps to 1.0
        vc1 = max(1.0, 5.0 - 1.2 * eta1 - 0.8 * eta1)
        assert comfort_score(state.features, model) == pytest.approx(vc0, rel=1e-12)
        expected_reward = cfg.alpha * (vc1 - vc0)  # depth range is 0 both sides
        assert tr.reward == pytest.approx(expected_reward, rel=1e-10)
        assert tr.next_state.features.values[2] == 0.0  # violation collapsed

    def test_step_past_horizon_raises(self, quick_env):
        scene = make_scene()
        env = DepthAdjustEnv(scene, quick_env)
        env.reset()
        while not env.done:
            env.step(Action.FARTHER)
        with pytest.raises(TerminalStateError):
            env.step(Action.FARTHER)

    def test_functional_step_checks_budget(self, quick_env):
        scene = make_scene()
        state = reset(scene, quick_env)
        exhausted = CameraState(ratio=1.0, step=quick_env.max_steps)
        from depthadjust.env import AdjustmentState

        bad = AdjustmentState(
            features=state.features, camera=exhausted, encoded=state.encoded
        )
        with pytest.raises(TerminalStateError):
            step(scene, bad, Action.STOP, quick_env)

    def test_stop_then_step_raises(self, quick_env):
        env = DepthAdjustEnv(make_scene(), quick_env)
        env.reset()
        env.step(Action.STOP)
        with pytest.raises(TerminalStateError):
            env.step(Action.CLOSER)


class TestTrajectoryProperties:
    def test_deterministic_trajectories(self, quick_env, rng):
        scene = make_scene()
        actions = [Action(int(a)) for a in rng.integers(0, 2, size=8)]

        def run():
            env = DepthAdjustEnv(scene, quick_env)
            env.reset()
            out = []
            for action in actions:
                if env.done:
                    break
                out.append(env.step(action))
            return out

        a, b = run(), run()
        assert len(a) == len(b)
        for ta, tb in zip(a, b):
            assert ta.reward == tb.reward
            assert np.array_equal(ta.next_state.encoded, tb.next_state.encoded)

    def test_telescoping_return(self, quick_env, rng):
        cfg = EnvConfig(
            delta=quick_env.delta,
            ratio_min=quick_env.ratio_min,
            ratio_max=quick_env.ratio_max,
            max_steps=quick_env.max_steps,
            beta=0.0,
            tau=0.0,
            geometry=quick_env.geometry,
            features=quick_env.features,
        )
        for seed in range(2):
            scene = make_scene(seed)
            for _ in range(20):
                env = DepthAdjustEnv(scene, cfg)
                state = env.reset()
                vc0 = comfort_score(state.features, cfg.model)
                total = 0.0
                while not env.done:
                    tr = env.step(Action(int(rng.integers(0, 3))))
                    total += tr.reward
                vc_end = comfort_score(tr.next_state.features, cfg.model)
                assert abs(total - cfg.alpha * (vc_end - vc0)) < 1e-9

    def test_ratios_stay_on_reachable_grid(self, quick_env, rng):
        from depthadjust.oracle import build_ratio_mdp

        scene = make_scene()
        grid = set(build_ratio_mdp(scene, quick_env).ratios.tolist())
        env = DepthAdjustEnv(scene, quick_env)
        state = env.reset()
        while not env.done:
            state = env.step(Action(int(rng.integers(0, 2)))).next_state
            assert state.camera.ratio in grid

    def test_episode_length_bound(self, quick_env, rng):
        for _ in range(10):
            env = DepthAdjustEnv(make_scene(), quick_env)
            env.reset()
            n = 0
            while not env.done:
                env.step(Action(int(rng.integers(0, 3))))
                n += 1
            assert n <= quick_env.max_steps + 1


class TestFingerprintAndLogs:
    def test_fingerprint_sensitive_to_features_and_bounds(self, quick_env):
        base = encoding_fingerprint(quick_env)
        other = EnvConfig(
            delta=quick_env.delta,
            ratio_min=quick_env.ratio_min,
            ratio_max=quick_env.ratio_max,
            max_steps=quick_env.max_steps,
            geometry=quick_env.geometry,
            features=FeatureConfig(histogram_bins=16),
        )
        assert encoding_fingerprint(other) != base
        bounds = EnvConfig(
            delta=quick_env.delta,
            ratio_min=0.3,
            ratio_max=quick_env.ratio_max,
            max_steps=quick_env.max_steps,
            geometry=quick_env.geometry,
            features=quick_env.features,
        )
        assert encoding_fingerprint(bounds) != base

    def test_fingerprint_ignores_reward_params(self, quick_env):
        other = EnvConfig(
            delta=quick_env.delta,
            ratio_min=quick_env.ratio_min,
            ratio_max=quick_env.ratio_max,
            max_steps=quick_env.max_steps,
            alpha=2.0,
            tau=0.0,
            geometry=quick_env.geometry,
            features=quick_env.features,
        )
        assert encoding_fingerprint(other) == encoding_fingerprint(quick_env)

    def test_trajectory_csv(self, quick_env, tmp_path):
        env = DepthAdjustEnv(make_scene(), quick_env)
        env.reset()
        transitions = [env.step(Action.CLOSER), env.step(Action.STOP)]
        path = tmp_path / "trajectory.csv"
        write_trajectory_csv(path, transitions, quick_env, episode_id=7)
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "episode,t,ratio,action,vc,depth,reward,done"
        assert len(lines) == 3
        first = lines[1].split(",")
        assert first[0] == "7" and first[3] == "CLOSER" and first[7] == "0"
        vc = comfort_score(transitions[0].next_state.features, quick_env.model)
        assert float(first[4]) == vc
