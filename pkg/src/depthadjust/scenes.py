"""Synthetic disparity scenes: layered rectangles and Gaussian blobs.

A :class:`SceneSpec` is an exact recipe (every layer value fixed); a scene
template file may give ``[lo, hi]`` ranges instead of scalars, from which
:func:`sample_scene_spec` draws concrete specs so one template yields a
varied dataset (e.g. a mix of crossed- and uncrossed-violating scenes).

Template file schema (JSON, ``schema_version`` 1)::

    {
      "schema_version": 1,
      "width": 48, "height": 32,
      "background_disparity_px": [30, 60],   # scalar or [lo, hi]
      "noise_sigma_px": [0.0, 1.0],
      "random_sign": true,                   # flip all disparities with p=1/2
      "layers": [
        {"shape": ["rectangle", "gaussian-blob"],   # name or list of choices
         "disparity_px": [120, 190],
         "area_fraction": [0.12, 0.3]}
      ]
    }
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .disparity import DisparityMap
from .errors import ConfigError, SpecError

TEMPLATE_SCHEMA_VERSION = 1

_SHAPES = ("rectangle", "gaussian-blob")


@dataclass(frozen=True)
class SceneLayer:
    shape: str
    disparity_px: float
    area_fraction: float

    def __post_init__(self) -> None:
        if self.shape not in _SHAPES:
            raise SpecError(f"unknown layer shape {self.shape!r}")
        if not 0 < self.area_fraction <= 1:
            raise SpecError(f"area_fraction must be in (0, 1], got {self.area_fraction}")
        if not math.isfinite(self.disparity_px):
            raise SpecError("layer disparity must be finite")


@dataclass(frozen=True)
class SceneSpec:
    width: int
    height: int
    layers: tuple[SceneLayer, ...]
    background_disparity_px: float = 0.0
    noise_sigma_px: float = 0.0

    def __post_init__(self) -> None:
        if self.width < 8 or self.height < 8:
            raise SpecError(f"scene must be at least 8x8, got {self.width}x{self.height}")
        if self.noise_sigma_px < 0:
            raise SpecError("noise sigma must be non-negative")
        if not math.isfinite(self.background_disparity_px):
            raise SpecError("background disparity must be finite")
        object.__setattr__(self, "layers", tuple(self.layers))


def generate_scene(spec: SceneSpec, seed: int) -> DisparityMap:
    """Render a spec into a disparity map; pure function of (spec, seed).

    Rectangles overwrite their support with the layer disparity; blobs blend
    the current field toward the layer disparity under a Gaussian profile
    (the blob center hits the layer disparity exactly, and no stack of
    layers can exceed the largest layer magnitude). Layer placement and the
    additive noise come from one seeded generator drawn in declaration
    order.
    """
    rng = np.random.default_rng(seed)
    h, w = spec.height, spec.width
    values = np.full((h, w), float(spec.background_disparity_px))
    yy, xx = np.mgrid[0:h, 0:w]
    for layer in spec.layers:
        if layer.shape == "rectangle":
            target = max(1, round(layer.area_fraction * w * h))
            rh = min(h, max(1, round(math.sqrt(target * h / w))))
            rw = min(w, max(1, round(target / rh)))
            top = int(rng.integers(0, h - rh + 1))
            left = int(rng.integers(0, w - rw + 1))
            values[top : top + rh, left : left + rw] = layer.disparity_px
        else:
            sigma = math.sqrt(layer.area_fraction * w * h / (2 * math.pi))
            cy = rng.uniform(0, h - 1)
            cx = rng.uniform(0, w - 1)
            profile = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * sigma**2))
            values += (layer.disparity_px - values) * profile
    if spec.noise_sigma_px > 0:
        values += rng.normal(0.0, spec.noise_sigma_px, size=(h, w))
    return DisparityMap.from_values(values)


def _as_range(node, name: str) -> tuple[float, float]:
    if isinstance(node, (int, float)):
        return float(node), float(node)
    if (
        isinstance(node, (list, tuple))
        and len(node) == 2
        and all(isinstance(x, (int, float)) for x in node)
    ):
        lo, hi = float(node[0]), float(node[1])
        if lo > hi:
            raise ConfigError(f"{name}: range lower bound exceeds upper bound")
        return lo, hi
    raise ConfigError(f"{name}: expected a number or [lo, hi], got {node!r}")


def _as_choices(node, name: str) -> tuple[str, ...]:
    if isinstance(node, str):
        node = [node]
    if not isinstance(node, (list, tuple)) or not node:
        raise ConfigError(f"{name}: expected a shape name or list of names")
    for s in node:
        if s not in _SHAPES:
            raise ConfigError(f"{name}: unknown shape {s!r}")
    return tuple(node)


@dataclass(frozen=True)
class LayerTemplate:
    shapes: tuple[str, ...]
    disparity_px: tuple[float, float]
    area_fraction: tuple[float, float]


@dataclass(frozen=True)
class SceneTemplate:
    width: int
    height: int
    background_disparity_px: tuple[float, float]
    noise_sigma_px: tuple[float, float]
    random_sign: bool
    layers: tuple[LayerTemplate, ...]


def default_scene_template() -> SceneTemplate:
    """Template behind ``generate`` when no spec file is given.

    Scenes carry one salient layer well outside the comfort zone over a
    background near the zone edge, with a per-scene sign flip mixing crossed
    and uncrossed violations. The ranges are calibrated so the initial
    comfort score stays off its lower clamp (the agent sees a comfort
    gradient from the first step) while shrinking the baseline all the way
    to the ratio floor remains optimal under the default reward discounting.
    """
    layer = LayerTemplate(
        shapes=_SHAPES,
        disparity_px=(130.0, 150.0),
        area_fraction=(0.11, 0.17),
    )
    return SceneTemplate(
        width=48,
        height=32,
        background_disparity_px=(54.0, 62.0),
        noise_sigma_px=(0.0, 0.6),
        random_sign=True,
        layers=(layer,),
    )


def sample_scene_spec(template: SceneTemplate, rng: np.random.Generator) -> SceneSpec:
    """Draw one concrete SceneSpec from a template (fixed draw order)."""
    sign = -1.0 if (template.random_sign and rng.random() < 0.5) else 1.0
    background = sign * rng.uniform(*template.background_disparity_px)
    noise = rng.uniform(*template.noise_sigma_px)
    layers = []
    for lt in template.layers:
        shape = lt.shapes[int(rng.integers(0, len(lt.shapes)))]
        disparity = sign * rng.uniform(*lt.disparity_px)
        area = rng.uniform(*lt.area_fraction)
        layers.append(SceneLayer(shape=shape, disparity_px=disparity, area_fraction=area))
    return SceneSpec(
        width=template.width,
        height=template.height,
        layers=tuple(layers),
        background_disparity_px=background,
        noise_sigma_px=noise,
    )


def sample_scenes(
    template: SceneTemplate, count: int, seed: int
) -> list[tuple[SceneSpec, DisparityMap]]:
    """Sample ``count`` scenes; deterministic for a fixed (template, seed)."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        spec = sample_scene_spec(template, rng)
        scene_seed = int(rng.integers(0, 2**63 - 1))
        out.append((spec, generate_scene(spec, scene_seed)))
    return out


def load_scene_template(path: str | Path) -> SceneTemplate:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"bad scene template {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("schema_version") != TEMPLATE_SCHEMA_VERSION:
        raise ConfigError(f"unsupported scene template schema in {path}")
    try:
        width, height = int(doc["width"]), int(doc["height"])
        layers = tuple(
            LayerTemplate(
                shapes=_as_choices(node.get("shape", list(_SHAPES)), "layers.shape"),
                disparity_px=_as_range(node["disparity_px"], "layers.disparity_px"),
                area_fraction=_as_range(node["area_fraction"], "layers.area_fraction"),
            )
            for node in doc["layers"]
        )
        return SceneTemplate(
            width=width,
            height=height,
            background_disparity_px=_as_range(
                doc.get("background_disparity_px", 0.0), "background_disparity_px"
            ),
            noise_sigma_px=_as_range(doc.get("noise_sigma_px", 0.0), "noise_sigma_px"),
            random_sign=bool(doc.get("random_sign", False)),
            layers=layers,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad scene template {path}: {exc}") from exc


def scene_template_to_json(template: SceneTemplate) -> dict:
    return {
        "schema_version": TEMPLATE_SCHEMA_VERSION,
        "width": template.width,
        "height": template.height,
        "background_disparity_px": list(template.background_disparity_px),
        "noise_sigma_px": list(template.noise_sigma_px),
        "random_sign": template.random_sign,
        "layers": [
            {
                "shape": list(lt.shapes),
                "disparity_px": list(lt.disparity_px),
                "area_fraction": list(lt.area_fraction),
            }
            for lt in template.layers
        ],
    }
