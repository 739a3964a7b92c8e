"""Acceptance suite: one test per criterion, each at its stated tolerance.

Each test prints a PASS line once its assertions hold (visible with -s or
-rA); pytest -v also reports one line per criterion.
"""

import time

import numpy as np
import pytest

from depthadjust.agent import (
    AgentConfig,
    backward,
    forward,
    rollout_greedy,
    train,
)
from depthadjust.comfort import (
    FeatureConfig,
    FeatureVector,
    LabeledSample,
    comfort_score,
    default_comfort_model,
    features_for_map,
    fit_model,
)
from depthadjust.cli import main
from depthadjust.disparity import DisparityMap, scale_disparity, stats
from depthadjust.env import Action, DepthAdjustEnv, EnvConfig
from depthadjust.oracle import build_ratio_mdp, grid_search, regret, value_iteration
from depthadjust.scenes import default_scene_template, sample_scenes

from conftest import GEOM, constant_map, random_net


def ok(number, message):
    print(f"ACCEPTANCE {number} PASS: {message}")


def test_criterion_1_gradient_oracle(rng):
    t0 = time.perf_counter()
    h = 1e-5
    worst = 0.0
    for _ in range(20):
        net = random_net([7, 5, 4, 3], rng)
        x = rng.normal(size=7)
        action = int(rng.integers(3))
        target = float(rng.normal())
        grad_w, grad_b = backward(net, x, action, target)

        def loss():
            return (forward(net, x)[action] - target) ** 2

        for layer in range(len(net.weights)):
            for arr, grads in ((net.weights, grad_w), (net.biases, grad_b)):
                it = np.nditer(arr[layer], flags=["multi_index"])
                for _v in it:
                    idx = it.multi_index
                    orig = arr[layer][idx]
                    arr[layer][idx] = orig + h
                    up = loss()
                    arr[layer][idx] = orig - h
                    down = loss()
                    arr[layer][idx] = orig
                    fd = (up - down) / (2 * h)
                    rel = abs(grads[layer][idx] - fd) / max(abs(fd), 1e-7)
                    worst = max(worst, rel)
                    assert rel < 1e-4
    elapsed = time.perf_counter() - t0
    assert elapsed < 5.0
    ok(1, f"analytic gradients match finite differences (max rel {worst:.2e}, {elapsed:.2f}s)")


def test_criterion_2_value_iteration_vs_enumeration():
    t0 = time.perf_counter()
    config = EnvConfig(
        delta=0.2,
        ratio_min=0.6,
        ratio_max=1.4,
        max_steps=3,
        geometry=GEOM,
        features=FeatureConfig(histogram_bins=8),
    )
    gamma = 0.9
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(10):
        values = rng.uniform(-90, 90) + rng.normal(0, 25, size=(12, 10))
        scene = DisparityMap.from_values(values)
        mdp = build_ratio_mdp(scene, config)
        v, _ = value_iteration(mdp, gamma)
        start = int(np.searchsorted(mdp.ratios, 1.0))

        best = -np.inf
        for code in range(3**config.max_steps):
            seq, c = [], code
            for _ in range(config.max_steps):
                seq.append(Action(c % 3))
                c //= 3
            env = DepthAdjustEnv(scene, config)
            env.reset()
            total, discount = 0.0, 1.0
            for action in seq:
                if env.done:
                    break
                total += discount * env.step(action).reward
                discount *= gamma
            best = max(best, total)
        worst = max(worst, abs(v[start, 0] - best))
        assert abs(v[start, 0] - best) <= 1e-12
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0
    ok(2, f"V*(1.0, 0) equals exhaustive 3^3 enumeration (max diff {worst:.1e}, {elapsed:.2f}s)")


def test_criterion_3_telescoping_return():
    config = EnvConfig(beta=0.0, tau=0.0)
    rng = np.random.default_rng(7)
    scenes = [s for _, s in sample_scenes(default_scene_template(), 5, seed=21)]
    worst = 0.0
    for scene in scenes:
        for _ in range(100):
            env = DepthAdjustEnv(scene, config)
            state = env.reset()
            vc0 = comfort_score(state.features, config.model)
            total = 0.0
            while not env.done:
                tr = env.step(Action(int(rng.integers(0, 3))))
                total += tr.reward
            vc_end = comfort_score(tr.next_state.features, config.model)
            gap = abs(total - config.alpha * (vc_end - vc0))
            worst = max(worst, gap)
            assert gap < 1e-9
    ok(3, f"returns telescope to VC_final - VC_initial (max |gap| {worst:.1e})")


def test_criterion_4_agent_vs_oracle_regret():
    t0 = time.perf_counter()
    env_config = EnvConfig()
    agent_config = AgentConfig()  # defaults: 2000 episodes, seed 0
    pairs = sample_scenes(default_scene_template(), 50, seed=0)
    train_scenes = [s for _, s in pairs[:40]]
    held_out = [s for _, s in pairs[40:50]]

    net, _ = train(train_scenes, env_config, agent_config)

    within = 0
    gaps = []
    for scene in held_out:
        oracle = grid_search(scene, env_config)
        trajectory, _ = rollout_greedy(net, scene, env_config)
        gap = regret(trajectory, oracle, env_config)
        gaps.append(gap)
        within += gap <= 0.05
    elapsed = time.perf_counter() - t0
    assert within >= 9, f"only {within}/10 held-out scenes within 0.05 MOS (gaps {gaps})"
    assert elapsed < 300.0
    ok(4, f"{within}/10 held-out scenes within 0.05 MOS of oracle ({elapsed:.0f}s)")


def test_criterion_5_scaling_linearity_suite():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        sign = 1.0 if rng.random() < 0.5 else -1.0
        values = sign * rng.uniform(5.0, 60.0, size=(12, 9))
        m = DisparityMap.from_values(values)
        r1, r2 = rng.uniform(0.1, 3.0, size=2)

        composed = scale_disparity(scale_disparity(m, r1), r2).values
        direct = scale_disparity(m, r1 * r2).values
        np.testing.assert_allclose(composed, direct, rtol=1e-12)

        scale = abs(r1) * 60.0
        a, b = stats(scale_disparity(m, r1)), stats(m)
        for field in ("min", "max", "mean", "p5", "p50", "p95", "range_p"):
            assert getattr(a, field) == pytest.approx(
                r1 * getattr(b, field), rel=1e-12, abs=1e-12 * scale
            )
    ok(5, "1000 random triples satisfy composition and percentile equivariance at 1e-12")


def test_criterion_6_cmd_train_determinism(tmp_path):
    import json

    template = default_scene_template()
    config = {
        "schema_version": 1,
        "agent": {"episodes": 50, "eps_decay_steps": 400, "seed": 0},
    }
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(config))
    template_path = tmp_path / "template.json"
    from depthadjust.scenes import scene_template_to_json

    template_path.write_text(json.dumps(scene_template_to_json(template)))

    scenes_dir = tmp_path / "scenes"
    rc = main(
        ["generate", "--spec", str(template_path), "--count", "4", "--seed", "0",
         "--out", str(scenes_dir), "--quiet", "--config", str(config_path)]
    )
    assert rc == 0

    outputs = []
    for name in ("runA", "runB"):
        out = tmp_path / name
        rc = main(
            ["train", "--scenes", str(scenes_dir), "--out", str(out), "--quiet",
             "--config", str(config_path)]
        )
        assert rc == 0
        outputs.append(out)
    for fname in ("model.json", "training_episodes.csv", "training_losses.csv"):
        a = (outputs[0] / fname).read_bytes()
        b = (outputs[1] / fname).read_bytes()
        assert a == b, f"{fname} differs between identical runs"
    ok(6, "two identical cmd_train runs are byte-identical (model + logs)")


def test_criterion_7_ridge_regression_recovery():
    rng = np.random.default_rng(3)
    d = 21  # 5 + 16 histogram bins
    w_true = rng.normal(0, 0.1, size=d)
    b_true = 3.0
    x = rng.normal(0, 1, size=(60, d))
    y = x @ w_true + b_true
    assert y.min() > 1.0 and y.max() < 5.0
    samples = [LabeledSample(FeatureVector(xi), float(yi)) for xi, yi in zip(x, y)]
    model = fit_model(samples, ridge_lambda=0.0)
    assert np.abs(model.weights - w_true).max() < 1e-6
    assert abs(model.bias - b_true) < 1e-6

    lam = 0.1
    x2 = rng.normal(0, 1, size=(50, d))
    y2 = np.clip(x2 @ w_true + b_true + rng.normal(0, 0.2, size=50), 1.0, 5.0)
    samples2 = [LabeledSample(FeatureVector(xi), float(yi)) for xi, yi in zip(x2, y2)]
    fitted = fit_model(samples2, ridge_lambda=lam)
    a = np.hstack([x2, np.ones((50, 1))])
    aug = np.vstack([a, np.sqrt(lam) * np.hstack([np.eye(d), np.zeros((d, 1))])])
    rhs = np.concatenate([y2, np.zeros(d)])
    theta, *_ = np.linalg.lstsq(aug, rhs, rcond=None)
    assert np.abs(fitted.weights - theta[:d]).max() < 1e-9
    assert abs(fitted.bias - theta[d]) < 1e-9
    ok(7, "exact linear recovery at lambda=0; independent dense solve agrees at 1e-9")


def test_criterion_8_comfort_range_and_ceiling():
    rng = np.random.default_rng(5)
    features_config = FeatureConfig()  # 16 bins, default zone
    model = default_comfort_model(features_config)
    for _ in range(10_000):
        hist = rng.dirichlet(np.ones(features_config.histogram_bins))
        head = np.array(
            [
                rng.uniform(0, 5),  # weighted mean |eta|
                rng.uniform(0, 6),  # p95 |eta|
                rng.uniform(0, 1),  # crossed violation mass
                rng.uniform(0, 1),  # uncrossed violation mass
                rng.uniform(0, 6),  # depth range
            ]
        )
        vc = comfort_score(FeatureVector(np.concatenate([head, hist])), model)
        assert 1.0 <= vc <= 5.0
    flat = features_for_map(constant_map(0.0, (16, 16)), GEOM, features_config)
    assert comfort_score(flat, model) == 5.0
    ok(8, "VC in [1,5] on 10^4 random feature vectors; flat scene scores exactly 5.0")
