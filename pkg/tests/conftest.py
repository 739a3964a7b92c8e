import math

import numpy as np
import pytest

from depthadjust.comfort import FeatureConfig
from depthadjust.disparity import DisparityMap, ViewingGeometry
from depthadjust.env import EnvConfig

# Default geometry: 0.25 mm pixels viewed from 900 mm -> one pixel of
# disparity is about 0.0159 degrees.
GEOM = ViewingGeometry(viewing_distance_mm=900.0, pixel_pitch_mm=0.25)


def deg_to_px(deg: float, geom: ViewingGeometry = GEOM) -> float:
    """Pixel disparity whose angular disparity is exactly ``deg`` degrees."""
    return math.tan(math.radians(deg)) * geom.viewing_distance_mm / geom.pixel_pitch_mm


def constant_map(value: float, shape=(8, 8)) -> DisparityMap:
    return DisparityMap.from_values(np.full(shape, float(value)))


def percentile_oracle(values, q: float) -> float:
    """Brute-force percentile with linear interpolation between order stats."""
    v = sorted(float(x) for x in values)
    rank = q / 100.0 * (len(v) - 1)
    lo = math.floor(rank)
    hi = math.ceil(rank)
    frac = rank - lo
    return v[lo] * (1.0 - frac) + v[hi] * frac


def random_net(layer_sizes, rng):
    """Fully random network (biases too) for derivative checks.

    Random biases keep every pre-activation in generic position; the
    production initializer's zero biases can park a layer exactly on the
    rectifier kink when the previous layer is entirely dead, where central
    differences straddle the kink.
    """
    from depthadjust.agent import QNetwork

    weights, biases = [], []
    for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        limit = math.sqrt(6.0 / (n_in + n_out))
        weights.append(rng.uniform(-limit, limit, size=(n_in, n_out)))
        biases.append(rng.uniform(-limit, limit, size=n_out))
    return QNetwork(weights=weights, biases=biases)


@pytest.fixture
def geom() -> ViewingGeometry:
    return GEOM


@pytest.fixture
def small_features() -> FeatureConfig:
    return FeatureConfig(histogram_bins=8)


@pytest.fixture
def quick_env(small_features) -> EnvConfig:
    # Small horizon and coarse grid keep unit tests fast.
    return EnvConfig(
        delta=0.1,
        ratio_min=0.4,
        ratio_max=1.6,
        max_steps=8,
        geometry=GEOM,
        features=small_features,
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
