"""The tool-level configuration file: geometry, features, environment, agent.

One JSON document (``schema_version`` 1) configures every subcommand; any
omitted section falls back to its defaults, and ``comfort_model`` may name
a fitted model file to replace the built-in default weights. The printed
default (``depthadjust config --print-default``) is the schema reference.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from pathlib import Path

from .agent import AgentConfig
from .comfort import FeatureConfig, load_comfort_model
from .disparity import ViewingGeometry
from .env import EnvConfig
from .errors import ConfigError

CONFIG_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class RunConfig:
    env: EnvConfig
    agent: AgentConfig
    comfort_model_path: str | None = None


def default_run_config() -> RunConfig:
    return RunConfig(env=EnvConfig(), agent=AgentConfig())


def _take(doc: dict, section: str, keys: dict[str, type]) -> dict:
    node = doc.get(section, {})
    if not isinstance(node, dict):
        raise ConfigError(f"section {section!r} must be an object")
    unknown = set(node) - set(keys)
    if unknown:
        raise ConfigError(f"unknown keys in {section!r}: {sorted(unknown)}")
    out = {}
    for key, cast in keys.items():
        if key in node:
            try:
                out[key] = cast(node[key])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{section}.{key}: {exc}") from exc
    return out


def run_config_from_json(doc: dict, base_dir: Path | None = None) -> RunConfig:
    if not isinstance(doc, dict) or doc.get("schema_version") != CONFIG_SCHEMA_VERSION:
        raise ConfigError("unsupported config schema_version")
    geometry = ViewingGeometry(
        **{
            "viewing_distance_mm": 900.0,
            "pixel_pitch_mm": 0.25,
            **_take(doc, "geometry", {"viewing_distance_mm": float, "pixel_pitch_mm": float}),
        }
    )
    features = FeatureConfig(
        **_take(
            doc,
            "features",
            {
                "comfort_halfwidth_deg": float,
                "histogram_bins": int,
                "histogram_halfrange_deg": float,
                "significance_gamma": float,
                "significance_floor": float,
            },
        )
    )
    model = None
    model_path = doc.get("comfort_model")
    if model_path is not None:
        if not isinstance(model_path, str):
            raise ConfigError("comfort_model must be a path string or null")
        resolved = Path(model_path)
        if base_dir is not None and not resolved.is_absolute():
            resolved = base_dir / resolved
        model, features = load_comfort_model(resolved)
    env = EnvConfig(
        geometry=geometry,
        features=features,
        model=model,
        **_take(
            doc,
            "env",
            {
                "delta": float,
                "ratio_min": float,
                "ratio_max": float,
                "max_steps": int,
                "alpha": float,
                "beta": float,
                "tau": float,
                "vc_ok": float,
            },
        ),
    )
    agent = AgentConfig(
        **_take(
            doc,
            "agent",
            {
                "discount": float,
                "learning_rate": float,
                "batch_size": int,
                "eps_start": float,
                "eps_end": float,
                "eps_decay_steps": int,
                "target_sync": int,
                "buffer_capacity": int,
                "episodes": int,
                "hidden": tuple,
                "seed": int,
            },
        )
    )
    return RunConfig(env=env, agent=agent, comfort_model_path=model_path)


def run_config_to_json(config: RunConfig) -> dict:
    env, agent = config.env, config.agent
    return {
        "schema_version": CONFIG_SCHEMA_VERSION,
        "geometry": {
            "viewing_distance_mm": env.geometry.viewing_distance_mm,
            "pixel_pitch_mm": env.geometry.pixel_pitch_mm,
        },
        "features": {
            "comfort_halfwidth_deg": env.features.comfort_halfwidth_deg,
            "histogram_bins": env.features.histogram_bins,
            "histogram_halfrange_deg": env.features.histogram_halfrange_deg,
            "significance_gamma": env.features.significance_gamma,
            "significance_floor": env.features.significance_floor,
        },
        "env": {
            "delta": env.delta,
            "ratio_min": env.ratio_min,
            "ratio_max": env.ratio_max,
            "max_steps": env.max_steps,
            "alpha": env.alpha,
            "beta": env.beta,
            "tau": env.tau,
            "vc_ok": env.vc_ok,
        },
        "agent": {
            "discount": agent.discount,
            "learning_rate": agent.learning_rate,
            "batch_size": agent.batch_size,
            "eps_start": agent.eps_start,
            "eps_end": agent.eps_end,
            "eps_decay_steps": agent.eps_decay_steps,
            "target_sync": agent.target_sync,
            "buffer_capacity": agent.buffer_capacity,
            "episodes": agent.episodes,
            "hidden": list(agent.hidden),
            "seed": agent.seed,
        },
        "comfort_model": config.comfort_model_path,
    }


def load_run_config(path: str | Path) -> tuple[RunConfig, str]:
    """Parse a config file; returns (config, sha256 of the file bytes)."""
    path = Path(path)
    blob = path.read_bytes()
    try:
        doc = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"bad config file {path}: {exc}") from exc
    return run_config_from_json(doc, base_dir=path.parent), hashlib.sha256(blob).hexdigest()


def default_config_text() -> str:
    return json.dumps(run_config_to_json(default_run_config()), indent=2) + "\n"


def default_config_hash() -> str:
    return hashlib.sha256(default_config_text().encode("utf-8")).hexdigest()


def with_seed(config: RunConfig, seed: int | None) -> RunConfig:
    """Config with the agent seed overridden by a CLI --seed flag."""
    if seed is None:
        return config
    return RunConfig(
        env=config.env,
        agent=replace(config.agent, seed=seed),
        comfort_model_path=config.comfort_model_path,
    )
