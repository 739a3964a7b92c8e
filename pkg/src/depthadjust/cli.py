"""Command-line front end.

Subcommands: ``generate`` (synthesize scene files), ``score`` (comfort and
depth of one scene), ``train`` (fit the adjustment agent), ``adjust``
(greedy rollout on one scene), ``evaluate`` (agent vs oracle over a scene
directory), ``config`` (print the default config). Every command that
writes artifacts also writes a ``manifest.json`` recording tool version,
config hash, seed, inputs, outputs, and per-phase timings.

Exit codes: 0 success, 2 I/O or file-format failure, 3 configuration
failure, 4 model-fingerprint mismatch. All randomness flows from --seed
(default 0), never from entropy.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .agent import (
    final_comfort,
    load_model,
    rollout_greedy,
    save_model,
    train,
    write_training_log_csv,
)
from .comfort import comfort_score, depth_richness, features_for_map
from .disparity import DisparityMap, warp_view
from .env import write_trajectory_csv
from .errors import ConfigError, DepthAdjustError, FingerprintMismatchError, FormatError
from .formats import load_disparity, load_scene_file, save_disparity, write_pgm
from .oracle import grid_search, regret
from .runconfig import (
    RunConfig,
    default_config_hash,
    default_config_text,
    default_run_config,
    load_run_config,
    with_seed,
)
from .scenes import (
    default_scene_template,
    generate_scene,
    load_scene_template,
    sample_scene_spec,
    scene_template_to_json,
)

EXIT_OK = 0
EXIT_IO = 2
EXIT_CONFIG = 3
EXIT_FINGERPRINT = 4


class _Manifest:
    def __init__(self, command: str, config_hash: str, seed: int | None):
        self.doc = {
            "tool_version": __version__,
            "command": command,
            "config_hash": config_hash,
            "seed": seed,
            "inputs": [],
            "outputs": [],
            "timings_s": {},
        }
        self._t0 = time.perf_counter()
        self._phase = None

    def phase(self, name: str) -> None:
        now = time.perf_counter()
        if self._phase is not None:
            self.doc["timings_s"][self._phase] = now - self._t0
        self._phase = name
        self._t0 = now

    def add_input(self, path) -> None:
        self.doc["inputs"].append(str(path))

    def add_output(self, path) -> None:
        self.doc["outputs"].append(str(path))

    def write(self, out_dir: Path) -> None:
        self.phase("_end")
        self.doc["timings_s"].pop("_end", None)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "manifest.json").write_text(
            json.dumps(self.doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )


def _load_config(args) -> tuple[RunConfig, str]:
    if getattr(args, "config", None):
        config, digest = load_run_config(args.config)
    else:
        config, digest = default_run_config(), default_config_hash()
    return with_seed(config, getattr(args, "seed", None)), digest


def _say(args, message: str) -> None:
    if not args.quiet:
        print(message)


def _load_scene(path: Path) -> DisparityMap:
    path = Path(path)
    if path.suffix == ".csv":
        return load_disparity(path, "csv")
    if path.suffix == ".pfm":
        return load_disparity(path, "pfm")
    return load_scene_file(path)


def _scene_paths(directory: Path) -> list[Path]:
    paths = sorted(Path(directory).glob("*.pgm"))
    if not paths:
        raise FormatError(f"no .pgm scenes in {directory}")
    return paths


def cmd_generate(args) -> int:
    config, digest = _load_config(args)
    manifest = _Manifest("generate", digest, args.seed or 0)
    if args.spec:
        template = load_scene_template(args.spec)
        manifest.add_input(args.spec)
    else:
        template = default_scene_template()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest.phase("generate")
    rng = np.random.default_rng(args.seed or 0)
    for i in range(args.count):
        spec = sample_scene_spec(template, rng)
        scene_seed = int(rng.integers(0, 2**63 - 1))
        scene = generate_scene(spec, scene_seed)
        path = out_dir / f"scene_{i:04d}.pgm"
        sidecar = save_disparity(scene, path)
        manifest.add_output(path)
        manifest.add_output(sidecar)
    spec_path = out_dir / "scene_template.json"
    spec_path.write_text(
        json.dumps(scene_template_to_json(template), indent=2) + "\n", encoding="utf-8"
    )
    manifest.add_output(spec_path)
    manifest.write(out_dir)
    _say(args, f"wrote {args.count} scenes to {out_dir}")
    return EXIT_OK


def cmd_score(args) -> int:
    config, digest = _load_config(args)
    env = config.env
    scene = _load_scene(args.scene)
    features = features_for_map(scene, env.geometry, env.features)
    vc = comfort_score(features, env.model)
    depth = depth_richness(features)
    print(f"vc {vc!r}")
    print(f"depth_deg {depth!r}")
    print("features " + ",".join(repr(float(v)) for v in features.values))
    if args.csv:
        path = Path(args.csv)
        header = not path.exists()
        with open(path, "a", encoding="ascii") as fh:
            if header:
                fh.write("scene,vc,depth_deg\n")
            fh.write(f"{args.scene},{vc!r},{depth!r}\n")
    if args.out:
        manifest = _Manifest("score", digest, getattr(args, "seed", None))
        manifest.add_input(args.scene)
        if args.csv:
            manifest.add_output(args.csv)
        manifest.write(Path(args.out))
    return EXIT_OK


def cmd_train(args) -> int:
    config, digest = _load_config(args)
    manifest = _Manifest("train", digest, config.agent.seed)
    manifest.phase("load")
    paths = _scene_paths(args.scenes)
    scenes = [load_scene_file(p) for p in paths]
    for p in paths:
        manifest.add_input(p)
    manifest.phase("train")
    stride = max(1, config.agent.episodes // 10)

    def progress(record):
        if not args.quiet and record.episode % stride == 0:
            print(
                f"episode {record.episode} return {record.episode_return:.3f} "
                f"final_vc {record.final_vc:.3f} eps {record.epsilon:.3f}"
            )

    net, log = train(scenes, config.env, config.agent, progress=progress)
    manifest.phase("write")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    model_path = Path(args.model) if args.model else out_dir / "model.json"
    save_model(model_path, net, config.env)
    episodes_csv = out_dir / "training_episodes.csv"
    losses_csv = out_dir / "training_losses.csv"
    write_training_log_csv(log, episodes_csv, losses_csv)
    for p in (model_path, episodes_csv, losses_csv):
        manifest.add_output(p)
    manifest.write(out_dir)
    _say(args, f"model written to {model_path}")
    return EXIT_OK


def cmd_adjust(args) -> int:
    config, digest = _load_config(args)
    manifest = _Manifest("adjust", digest, getattr(args, "seed", None))
    manifest.phase("load")
    scene = _load_scene(args.scene)
    net = load_model(args.model, config.env)
    manifest.add_input(args.scene)
    manifest.add_input(args.model)
    manifest.phase("rollout")
    transitions, adjusted = rollout_greedy(net, scene, config.env)
    manifest.phase("write")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    trajectory_csv = out_dir / "trajectory.csv"
    write_trajectory_csv(trajectory_csv, transitions, config.env)
    adjusted_path = out_dir / "adjusted.pgm"
    sidecar = save_disparity(adjusted, adjusted_path)
    for p in (trajectory_csv, adjusted_path, sidecar):
        manifest.add_output(p)
    if args.image:
        image = load_disparity(args.image, "pgm16").values  # raw gray levels
        warped = warp_view(image, scene, transitions[-1].next_state.camera.ratio)
        warped_path = out_dir / "warped.pgm"
        write_pgm(warped_path, np.clip(np.round(warped), 0, 65535), maxval=65535)
        manifest.add_input(args.image)
        manifest.add_output(warped_path)
    manifest.write(out_dir)
    final_ratio = transitions[-1].next_state.camera.ratio
    _say(
        args,
        f"final ratio {final_ratio!r} final vc {final_comfort(transitions, config.env)!r}",
    )
    return EXIT_OK


def _evaluate_one(path: Path, net, env_config):
    scene = load_scene_file(path)
    oracle = grid_search(scene, env_config)
    transitions, _ = rollout_greedy(net, scene, env_config)
    vc_after = final_comfort(transitions, env_config)
    gap = regret(transitions, oracle, env_config)
    return {
        "scene": path.name,
        "vc_before": oracle.vc_at_identity,
        "vc_after": vc_after,
        "best_vc": oracle.best_vc,
        "best_ratio": oracle.best_ratio,
        "final_ratio": transitions[-1].next_state.camera.ratio,
        "steps": len(transitions),
        "regret": gap,
    }


def cmd_evaluate(args) -> int:
    config, digest = _load_config(args)
    manifest = _Manifest("evaluate", digest, getattr(args, "seed", None))
    manifest.phase("load")
    paths = _scene_paths(args.scenes)
    net = load_model(args.model, config.env)
    manifest.add_input(args.model)
    for p in paths:
        manifest.add_input(p)
    manifest.phase("evaluate")
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(lambda p: _evaluate_one(p, net, config.env), paths))
    else:
        rows = [_evaluate_one(p, net, config.env) for p in paths]
    manifest.phase("write")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = out_dir / "evaluation.csv"
    header = "scene,vc_before,vc_after,best_vc,best_ratio,final_ratio,steps,regret"
    lines = [header]
    for r in rows:
        lines.append(
            f"{r['scene']},{r['vc_before']!r},{r['vc_after']!r},{r['best_vc']!r},"
            f"{r['best_ratio']!r},{r['final_ratio']!r},{r['steps']},{r['regret']!r}"
        )
    report.write_text("\n".join(lines) + "\n", encoding="ascii")
    manifest.add_output(report)

    mean_before = float(np.mean([r["vc_before"] for r in rows]))
    mean_after = float(np.mean([r["vc_after"] for r in rows]))
    mean_regret = float(np.mean([r["regret"] for r in rows]))
    near_oracle = float(np.mean([r["regret"] <= 0.05 for r in rows]))
    summary = {
        "scenes": len(rows),
        "mean_vc_before": mean_before,
        "mean_vc_after": mean_after,
        "mean_regret": mean_regret,
        "fraction_within_0.05_of_oracle": near_oracle,
    }
    summary_path = out_dir / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    manifest.add_output(summary_path)
    manifest.write(out_dir)
    _say(
        args,
        f"scenes {len(rows)} mean vc {mean_before:.3f} -> {mean_after:.3f} "
        f"mean regret {mean_regret:.4f} within 0.05 of oracle {near_oracle:.1%}",
    )
    return EXIT_OK


def cmd_config(args) -> int:
    if args.print_default:
        sys.stdout.write(default_config_text())
        return EXIT_OK
    config, digest = _load_config(args)
    print(f"config ok, hash {digest}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="depthadjust",
        description="Iterative stereo depth adjustment with a comfort-aware agent",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--config", help="config file (JSON); defaults if omitted")
        p.add_argument("--seed", type=int, default=None, help="seed override (default 0)")
        p.add_argument("--quiet", action="store_true")
        p.add_argument("--out", required=out_required, help="output directory")

    p = sub.add_parser("generate", help="synthesize a scene dataset")
    common(p)
    p.add_argument("--spec", help="scene template JSON (built-in default if omitted)")
    p.add_argument("--count", type=int, default=10)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("score", help="comfort score of one scene")
    common(p, out_required=False)
    p.add_argument("scene", help="scene .pgm (with sidecar), .pfm, or .csv")
    p.add_argument("--csv", help="append one scene,vc,depth row to this CSV")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("train", help="train the adjustment agent")
    common(p)
    p.add_argument("--scenes", required=True, help="directory of generated scenes")
    p.add_argument("--model", help="model output path (default OUT/model.json)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("adjust", help="greedy rollout on one scene")
    common(p)
    p.add_argument("scene")
    p.add_argument("--model", required=True)
    p.add_argument("--image", help="grayscale PGM to warp to the adjusted view")
    p.set_defaults(func=cmd_adjust)

    p = sub.add_parser("evaluate", help="agent vs oracle over a scene directory")
    common(p)
    p.add_argument("--scenes", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--jobs", type=int, default=1, help="parallel scene workers")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("config", help="inspect configuration")
    p.add_argument("--print-default", action="store_true")
    p.add_argument("--config")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_config)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FingerprintMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FINGERPRINT
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, DepthAdjustError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
