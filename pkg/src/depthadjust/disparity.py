"""Dense disparity fields and the geometric operations on them.

Sign convention used everywhere in this package: positive disparity is
crossed (the object appears in front of the screen), negative is uncrossed
(behind the screen). Disparities are stored in pixels; angular disparities
are derived from a viewing geometry and expressed in degrees.

Changing the stereo camera baseline by a factor ``r`` scales every scene
disparity by the same factor under the parallel-rig pinhole model, so the
camera-movement operation on stored content is plain multiplication of the
disparity field (see :func:`scale_disparity`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, EmptyMapError, ShapeMismatchError


@dataclass(frozen=True)
class ViewingGeometry:
    """Physical viewing setup: distance to the screen and pixel pitch, in mm."""

    viewing_distance_mm: float
    pixel_pitch_mm: float

    def __post_init__(self) -> None:
        for name in ("viewing_distance_mm", "pixel_pitch_mm"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be positive and finite, got {v!r}")


@dataclass(frozen=True)
class DisparityMap:
    """Per-pixel signed horizontal disparity (pixels) with a validity mask.

    Invalid pixels carry no disparity information and are excluded from every
    statistic and feature. Arrays are frozen after construction; operations
    return new maps.
    """

    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        valid = np.asarray(self.valid, dtype=bool)
        if values.ndim != 2:
            raise ShapeMismatchError(f"values must be 2-D, got shape {values.shape}")
        if valid.shape != values.shape:
            raise ShapeMismatchError(
                f"valid mask shape {valid.shape} != values shape {values.shape}"
            )
        if not valid.any():
            raise EmptyMapError("disparity map has no valid pixels")
        if not np.isfinite(values[valid]).all():
            raise DomainError("valid disparity values must be finite")
        values.setflags(write=False)
        valid.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "valid", valid)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def n_valid(self) -> int:
        return int(self.valid.sum())

    @classmethod
    def from_values(cls, values: np.ndarray, valid: np.ndarray | None = None) -> "DisparityMap":
        values = np.asarray(values, dtype=np.float64)
        if valid is None:
            valid = np.ones(values.shape, dtype=bool)
        return cls(values=values, valid=valid)


@dataclass(frozen=True)
class DisparityStats:
    """Order statistics of the valid disparities, in pixels."""

    min: float
    max: float
    mean: float
    p5: float
    p50: float
    p95: float
    range_p: float

    def __post_init__(self) -> None:
        if not (self.min <= self.p5 <= self.p50 <= self.p95 <= self.max):
            raise DomainError("percentiles out of order")
        if self.range_p < 0:
            raise DomainError("range_p must be non-negative")


def _check_ratio(ratio: float) -> float:
    ratio = float(ratio)
    if not (math.isfinite(ratio) and ratio > 0):
        raise DomainError(f"baseline ratio must be positive and finite, got {ratio!r}")
    return ratio


def scale_disparity(dmap: DisparityMap, ratio: float) -> DisparityMap:
    """Disparity field after scaling the camera baseline by ``ratio``.

    Every valid disparity is multiplied by ``ratio``; the mask and the values
    stored at invalid pixels are unchanged.
    """
    ratio = _check_ratio(ratio)
    values = dmap.values.copy()
    values[dmap.valid] = values[dmap.valid] * ratio
    return DisparityMap(values=values, valid=dmap.valid)


def to_angular(dmap: DisparityMap, geom: ViewingGeometry) -> np.ndarray:
    """Angular disparity in degrees, NaN at invalid pixels.

    Uses the single-atan small-angle vergence model
    ``eta = atan(d * pitch / distance)``; sign is preserved and ``|eta| < 90``
    for any finite disparity.
    """
    eta = np.degrees(
        np.arctan(dmap.values * (geom.pixel_pitch_mm / geom.viewing_distance_mm))
    )
    eta[~dmap.valid] = np.nan
    return eta


def stats(dmap: DisparityMap) -> DisparityStats:
    """Summary statistics over the valid pixels.

    Percentiles interpolate linearly between closest order statistics.
    """
    v = dmap.values[dmap.valid]
    if v.size == 0:
        raise EmptyMapError("no valid pixels")
    p5, p50, p95 = np.percentile(v, [5.0, 50.0, 95.0])
    return DisparityStats(
        min=float(v.min()),
        max=float(v.max()),
        mean=float(v.mean()),
        p5=float(p5),
        p50=float(p50),
        p95=float(p95),
        range_p=float(p95 - p5),
    )


def warp_view(image: np.ndarray, dmap: DisparityMap, ratio: float) -> np.ndarray:
    """Forward-warp a grayscale raster to the view implied by a baseline ratio.

    Each pixel moves horizontally by ``(ratio - 1) * d`` rounded to the
    nearest column (half away from zero toward +inf). When two sources land
    on the same column the one with the larger disparity wins (nearer object
    occludes). Holes are filled from the nearest written column to the left,
    else to the right. Invalid-disparity pixels do not move.
    """
    ratio = _check_ratio(ratio)
    image = np.asarray(image)
    if image.shape != dmap.values.shape:
        raise ShapeMismatchError(
            f"image shape {image.shape} != map shape {dmap.values.shape}"
        )
    h, w = image.shape
    disp = np.where(dmap.valid, dmap.values, 0.0)
    dest = np.arange(w)[None, :] + np.floor((ratio - 1.0) * disp + 0.5).astype(np.int64)

    out = np.zeros_like(image)
    written = np.zeros((h, w), dtype=bool)
    # Assign sources in ascending disparity order so larger disparities
    # overwrite; stable sort keeps the result deterministic on ties.
    order = np.argsort(disp, axis=1, kind="stable")
    rows = np.arange(h)[:, None]
    dest_sorted = dest[rows, order]
    src_sorted = image[rows, order]
    inside = (dest_sorted >= 0) & (dest_sorted < w)
    for y in range(h):
        cols = dest_sorted[y][inside[y]]
        out[y, cols] = src_sorted[y][inside[y]]
        written[y, cols] = True

    # Hole filling: nearest written column to the left, else to the right.
    col = np.arange(w)[None, :]
    left = np.where(written, col, -1)
    left = np.maximum.accumulate(left, axis=1)
    right = np.where(written, col, w)
    right = np.flip(np.minimum.accumulate(np.flip(right, axis=1), axis=1), axis=1)
    fill = np.where(left >= 0, left, np.minimum(right, w - 1))
    out = out[np.arange(h)[:, None], fill]
    # A row where every source lands out of bounds has nothing to fill from;
    # keep the input row.
    empty = ~written.any(axis=1)
    if empty.any():
        out[empty] = image[empty]
    return out
