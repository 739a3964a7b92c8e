"""Perceptual disparity features and the visual-comfort score.

The comfort score is a clamped linear predictor on a fixed-length feature
vector summarizing the angular disparity field:

    f1          significance-weighted mean of |eta|            (degrees)
    f2          95th percentile of |eta|, unweighted            (degrees)
    f3          significance mass with eta > +zc  (crossed violation)
    f4          significance mass with eta < -zc  (uncrossed violation)
    f5          p95 - p5 of eta, the perceived depth range      (degrees)
    f6..f(5+K)  significance-weighted histogram of eta on
                [-hmax, +hmax], K equal bins, clamped, mass-normalized

Significance weights realize "perceptually significant" as magnitude
salience: ``|eta|**gamma`` blended with a uniform floor so no scene has
zero mass. Scores live on a 1..5 mean-opinion scale; 5 is most comfortable
and a flat scene scores exactly 5 under the default model.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .disparity import DisparityMap, ViewingGeometry, to_angular
from .errors import (
    ConfigError,
    DomainError,
    FormatError,
    LengthMismatchError,
    ShapeMismatchError,
    SingularSystemError,
)

MODEL_SCHEMA_VERSION = 1

MOS_MIN = 1.0
MOS_MAX = 5.0


@dataclass(frozen=True)
class FeatureConfig:
    """Parameters defining the feature vector (and hence its length, 5 + bins)."""

    comfort_halfwidth_deg: float = 1.0
    histogram_bins: int = 16
    histogram_halfrange_deg: float = 2.0
    significance_gamma: float = 1.0
    significance_floor: float = 0.1

    def __post_init__(self) -> None:
        if self.comfort_halfwidth_deg <= 0:
            raise ConfigError("comfort_halfwidth_deg must be > 0")
        if self.histogram_bins < 2:
            raise ConfigError("histogram_bins must be >= 2")
        if self.histogram_halfrange_deg <= 0:
            raise ConfigError("histogram_halfrange_deg must be > 0")
        if self.significance_gamma < 0:
            raise ConfigError("significance_gamma must be >= 0")
        if not 0 <= self.significance_floor < 1:
            raise ConfigError("significance_floor must be in [0, 1)")

    @property
    def feature_length(self) -> int:
        return 5 + self.histogram_bins


@dataclass(frozen=True)
class SignificanceMap:
    """Per-pixel non-negative weights summing to one over the valid pixels."""

    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        if (w < 0).any():
            raise DomainError("significance weights must be non-negative")
        total = w.sum()
        if abs(total - 1.0) > 1e-9:
            raise DomainError(f"significance weights must sum to 1, got {total!r}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size < 5:
            raise LengthMismatchError(f"feature vector must be 1-D of length >= 5, got {v.shape}")
        if not np.isfinite(v).all():
            raise DomainError("feature vector entries must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.size

    @property
    def weighted_abs_mean(self) -> float:
        return float(self.values[0])

    @property
    def abs_p95(self) -> float:
        return float(self.values[1])

    @property
    def crossed_violation(self) -> float:
        return float(self.values[2])

    @property
    def uncrossed_violation(self) -> float:
        return float(self.values[3])

    @property
    def depth_range(self) -> float:
        return float(self.values[4])

    @property
    def histogram(self) -> np.ndarray:
        return self.values[5:]


@dataclass(frozen=True)
class ComfortModel:
    """Linear MOS-scale comfort predictor; output clamped to [mos_min, mos_max]."""

    weights: np.ndarray
    bias: float
    mos_min: float = MOS_MIN
    mos_max: float = MOS_MAX

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1:
            raise LengthMismatchError("model weights must be 1-D")
        if self.mos_min >= self.mos_max:
            raise ConfigError("mos_min must be < mos_max")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class LabeledSample:
    features: FeatureVector
    mos: float

    def __post_init__(self) -> None:
        if not MOS_MIN <= self.mos <= MOS_MAX:
            raise DomainError(f"mos must be in [{MOS_MIN}, {MOS_MAX}], got {self.mos}")


def default_comfort_model(config: FeatureConfig) -> ComfortModel:
    """Engineering default: flat scenes score 5, violations pull toward 1.

    Replace with :func:`fit_model` output when labeled data is available.
    """
    w = np.zeros(config.feature_length)
    w[0] = -1.2
    w[1] = -0.8
    w[2] = -2.0
    w[3] = -1.5
    return ComfortModel(weights=w, bias=5.0)


def significance_map(
    dmap: DisparityMap, geom: ViewingGeometry, gamma: float, floor: float
) -> SignificanceMap:
    """Magnitude-salience weights ``|eta|**gamma``, blended with a uniform floor.

    ``gamma=0`` gives the uniform map for any floor; a scene whose raw mass is
    all zero (flat at the screen plane) falls back to uniform as well.
    """
    if gamma < 0:
        raise DomainError("gamma must be >= 0")
    if not 0 <= floor < 1:
        raise DomainError("floor must be in [0, 1)")
    eta = to_angular(dmap, geom)
    n_valid = dmap.n_valid
    raw = np.zeros(dmap.values.shape)
    raw[dmap.valid] = np.abs(eta[dmap.valid]) ** gamma
    total = raw.sum()
    uniform = dmap.valid / n_valid
    base = raw / total if total > 0 else uniform
    weights = (1.0 - floor) * base + floor * uniform
    return SignificanceMap(weights=weights)


def extract_features(
    dmap: DisparityMap,
    sig: SignificanceMap,
    geom: ViewingGeometry,
    config: FeatureConfig,
) -> FeatureVector:
    """Compute the feature vector described in the module docstring."""
    if sig.weights.shape != dmap.values.shape:
        raise ShapeMismatchError(
            f"significance shape {sig.weights.shape} != map shape {dmap.values.shape}"
        )
    eta = to_angular(dmap, geom)[dmap.valid]
    w = sig.weights[dmap.valid]
    abs_eta = np.abs(eta)
    zc = config.comfort_halfwidth_deg
    hmax = config.histogram_halfrange_deg
    k = config.histogram_bins

    f1 = float(w @ abs_eta)
    f2 = float(np.percentile(abs_eta, 95.0))
    f3 = float(w[eta > zc].sum())
    f4 = float(w[eta < -zc].sum())
    p5, p95 = np.percentile(eta, [5.0, 95.0])
    f5 = float(p95 - p5)

    clamped = np.clip(eta, -hmax, hmax)
    idx = np.minimum((np.floor((clamped + hmax) / (2 * hmax) * k)).astype(np.int64), k - 1)
    hist = np.bincount(idx, weights=w, minlength=k)
    hist = hist / hist.sum()

    return FeatureVector(values=np.concatenate([[f1, f2, f3, f4, f5], hist]))


def features_for_map(
    dmap: DisparityMap, geom: ViewingGeometry, config: FeatureConfig
) -> FeatureVector:
    """Significance map plus feature extraction in one call."""
    sig = significance_map(
        dmap, geom, config.significance_gamma, config.significance_floor
    )
    return extract_features(dmap, sig, geom, config)


def comfort_score(features: FeatureVector, model: ComfortModel) -> float:
    """Predicted mean opinion score, clamped to the model's output range."""
    if len(features) != model.weights.size:
        raise LengthMismatchError(
            f"feature length {len(features)} != model length {model.weights.size}"
        )
    raw = float(model.weights @ features.values + model.bias)
    return min(max(raw, model.mos_min), model.mos_max)


def depth_richness(features: FeatureVector) -> float:
    """Perceived depth budget: the p95 - p5 angular range, in degrees."""
    return features.depth_range


def fit_model(samples: list[LabeledSample], ridge_lambda: float) -> ComfortModel:
    """Closed-form ridge regression of MOS on features; bias unpenalized.

    Solves the augmented normal equations; with ``ridge_lambda`` 0 a
    rank-deficient system raises :class:`SingularSystemError`.
    """
    if ridge_lambda < 0:
        raise DomainError("ridge_lambda must be >= 0")
    if len(samples) < 2:
        raise DomainError("need at least 2 samples")
    d = len(samples[0].features)
    if any(len(s.features) != d for s in samples):
        raise LengthMismatchError("samples have inconsistent feature lengths")
    x = np.stack([s.features.values for s in samples])
    y = np.array([s.mos for s in samples])
    a = np.hstack([x, np.ones((x.shape[0], 1))])
    g = a.T @ a
    g[:d, :d] += ridge_lambda * np.eye(d)
    cond = np.linalg.cond(g)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularSystemError("normal matrix is singular; add ridge regularization")
    theta = np.linalg.solve(g, a.T @ y)
    return ComfortModel(weights=theta[:d], bias=float(theta[d]))


def save_comfort_model(path: str | Path, model: ComfortModel, config: FeatureConfig) -> None:
    doc = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "comfort_halfwidth_deg": config.comfort_halfwidth_deg,
        "histogram_bins": config.histogram_bins,
        "histogram_halfrange_deg": config.histogram_halfrange_deg,
        "significance_gamma": config.significance_gamma,
        "significance_floor": config.significance_floor,
        "weights": [float(v) for v in model.weights],
        "bias": model.bias,
        "mos_min": model.mos_min,
        "mos_max": model.mos_max,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="ascii")


def load_comfort_model(path: str | Path) -> tuple[ComfortModel, FeatureConfig]:
    try:
        doc = json.loads(Path(path).read_text(encoding="ascii"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"bad comfort model file {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("schema_version") != MODEL_SCHEMA_VERSION:
        raise FormatError(f"unsupported comfort model schema in {path}")
    try:
        config = FeatureConfig(
            comfort_halfwidth_deg=float(doc["comfort_halfwidth_deg"]),
            histogram_bins=int(doc["histogram_bins"]),
            histogram_halfrange_deg=float(doc["histogram_halfrange_deg"]),
            significance_gamma=float(doc["significance_gamma"]),
            significance_floor=float(doc["significance_floor"]),
        )
        model = ComfortModel(
            weights=np.array(doc["weights"], dtype=np.float64),
            bias=float(doc["bias"]),
            mos_min=float(doc.get("mos_min", MOS_MIN)),
            mos_max=float(doc.get("mos_max", MOS_MAX)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad comfort model file {path}: {exc}") from exc
    if model.weights.size != config.feature_length:
        raise FormatError(
            f"model weight length {model.weights.size} != feature length "
            f"{config.feature_length}"
        )
    return model, config


def load_calibration_csv(path: str | Path) -> list[LabeledSample]:
    """Read labeled samples: header row, feature columns, final ``mos`` column."""
    samples = []
    with open(path, "r", encoding="ascii", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[-1].strip().lower() != "mos":
            raise FormatError("calibration CSV must end with a 'mos' column")
        for row in reader:
            if not row:
                continue
            try:
                nums = [float(c) for c in row]
            except ValueError as exc:
                raise FormatError(f"bad calibration row {row!r}: {exc}") from exc
            samples.append(
                LabeledSample(features=FeatureVector(np.array(nums[:-1])), mos=nums[-1])
            )
    return samples
