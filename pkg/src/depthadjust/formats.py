"""Disparity file ingestion and emission: PGM (P5), PFM (Pf), CSV.

Stored samples map to signed pixel disparities through an affine transform
``d = scale * raw + offset``. Generated scene files are 16-bit PGM plus a
JSON sidecar recording that transform, so a directory of scenes round-trips
through :func:`save_disparity` / :func:`load_scene_file`.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .disparity import DisparityMap
from .errors import FormatError

SIDECAR_SCHEMA_VERSION = 1

_FORMATS = ("pgm16", "pfm", "csv")


def load_disparity(
    path: str | Path,
    fmt: str,
    offset: float = 0.0,
    scale: float = 1.0,
    zero_invalid: bool = False,
) -> DisparityMap:
    """Load a disparity map from ``path`` in the declared format.

    ``zero_invalid`` treats raw PGM sample value 0 as an unknown-disparity
    sentinel. PFM non-finite samples and CSV NaN cells are always invalid.
    """
    if fmt not in _FORMATS:
        raise FormatError(f"unknown format {fmt!r}, expected one of {_FORMATS}")
    if not (math.isfinite(offset) and math.isfinite(scale)):
        raise FormatError("offset and scale must be finite")
    path = Path(path)
    if fmt == "pgm16":
        raw = _read_pgm(path).astype(np.float64)
        valid = raw != 0 if zero_invalid else np.ones(raw.shape, dtype=bool)
    elif fmt == "pfm":
        raw = _read_pfm(path).astype(np.float64)
        valid = np.isfinite(raw)
    else:
        raw = _read_csv(path)
        valid = np.isfinite(raw)
    values = np.zeros(raw.shape, dtype=np.float64)
    values[valid] = scale * raw[valid] + offset
    return DisparityMap(values=values, valid=valid)


def _read_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    # Whitespace-separated header tokens; '#' starts a comment to end of line.
    tokens: list[bytes] = []
    i = 0
    n = len(data)
    while len(tokens) < count and i < n:
        c = data[i : i + 1]
        if c == b"#":
            while i < n and data[i : i + 1] != b"\n":
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < n and not data[j : j + 1].isspace() and data[j : j + 1] != b"#":
                j += 1
            tokens.append(data[i:j])
            i = j
    if len(tokens) < count:
        raise FormatError("truncated header")
    return tokens, i


def _read_pgm(path: Path) -> np.ndarray:
    data = path.read_bytes()
    tokens, pos = _read_tokens(data, 4)
    if tokens[0] != b"P5":
        raise FormatError(f"not a binary PGM: magic {tokens[0]!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError as exc:
        raise FormatError(f"bad PGM header: {exc}") from exc
    if width <= 0 or height <= 0:
        raise FormatError("non-positive PGM dimensions")
    if maxval not in (255, 65535):
        raise FormatError(f"unsupported PGM maxval {maxval}")
    pos += 1  # single whitespace byte after maxval
    dtype = np.dtype(">u2") if maxval == 65535 else np.dtype("u1")
    need = width * height * dtype.itemsize
    payload = data[pos : pos + need]
    if len(payload) < need:
        raise FormatError("truncated PGM payload")
    return np.frombuffer(payload, dtype=dtype).reshape(height, width)


def _read_pfm(path: Path) -> np.ndarray:
    data = path.read_bytes()
    tokens, pos = _read_tokens(data, 4)
    if tokens[0] == b"PF":
        raise FormatError("color PFM not supported, expected grayscale 'Pf'")
    if tokens[0] != b"Pf":
        raise FormatError(f"not a PFM: magic {tokens[0]!r}")
    try:
        width, height = int(tokens[1]), int(tokens[2])
        scale = float(tokens[3])
    except ValueError as exc:
        raise FormatError(f"bad PFM header: {exc}") from exc
    if width <= 0 or height <= 0 or scale == 0:
        raise FormatError("bad PFM dimensions or scale")
    pos += 1
    endian = "<" if scale < 0 else ">"
    need = width * height * 4
    payload = data[pos : pos + need]
    if len(payload) < need:
        raise FormatError("truncated PFM payload")
    img = np.frombuffer(payload, dtype=endian + "f4").reshape(height, width)
    # PFM scanlines run bottom-to-top.
    return np.flipud(img)


def _read_csv(path: Path) -> np.ndarray:
    rows: list[list[float]] = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            try:
                rows.append([float(c) for c in cells])
            except ValueError as exc:
                raise FormatError(f"line {lineno}: {exc}") from exc
    if not rows:
        raise FormatError("empty CSV")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise FormatError("ragged CSV rows")
    return np.array(rows, dtype=np.float64)


def write_pgm(path: str | Path, raw: np.ndarray, maxval: int = 65535) -> None:
    raw = np.asarray(raw)
    if raw.ndim != 2:
        raise FormatError("PGM payload must be 2-D")
    if maxval not in (255, 65535):
        raise FormatError(f"unsupported PGM maxval {maxval}")
    if raw.min() < 0 or raw.max() > maxval:
        raise FormatError("samples out of range for declared maxval")
    dtype = np.dtype(">u2") if maxval == 65535 else np.dtype("u1")
    header = f"P5\n{raw.shape[1]} {raw.shape[0]}\n{maxval}\n".encode("ascii")
    Path(path).write_bytes(header + raw.astype(dtype).tobytes())


def write_pfm(path: str | Path, values: np.ndarray) -> None:
    values = np.asarray(values, dtype="<f4")
    if values.ndim != 2:
        raise FormatError("PFM payload must be 2-D")
    header = f"Pf\n{values.shape[1]} {values.shape[0]}\n-1.0\n".encode("ascii")
    Path(path).write_bytes(header + np.flipud(values).tobytes())


def write_csv(path: str | Path, values: np.ndarray) -> None:
    values = np.asarray(values, dtype=np.float64)
    lines = [",".join(repr(float(v)) for v in row) for row in values]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def quantize_disparity(dmap: DisparityMap) -> tuple[np.ndarray, float, float, bool]:
    """Quantize a map to 16-bit samples; returns (raw, offset, scale, zero_invalid).

    When the map carries invalid pixels, raw value 0 is reserved as their
    sentinel and valid samples use [1, 65535]. Reconstruction error is at
    most one quantization step.
    """
    v = dmap.values[dmap.valid]
    lo, hi = float(v.min()), float(v.max())
    has_invalid = not dmap.valid.all()
    levels = 65534 if has_invalid else 65535
    scale = (hi - lo) / levels if hi > lo else 1.0
    offset = lo - scale if has_invalid else lo
    raw = np.zeros(dmap.values.shape, dtype=np.uint16)
    base = 1 if has_invalid else 0
    q = np.floor((dmap.values[dmap.valid] - lo) / scale + 0.5) + base
    raw[dmap.valid] = np.clip(q, base, 65535).astype(np.uint16)
    return raw, offset, scale, has_invalid


def save_disparity(dmap: DisparityMap, path: str | Path) -> Path:
    """Write a map as 16-bit PGM plus a JSON sidecar; returns the sidecar path."""
    path = Path(path)
    raw, offset, scale, zero_invalid = quantize_disparity(dmap)
    write_pgm(path, raw, maxval=65535)
    sidecar = path.with_suffix(".json")
    sidecar.write_text(
        json.dumps(
            {
                "schema_version": SIDECAR_SCHEMA_VERSION,
                "format": "pgm16",
                "offset": offset,
                "scale": scale,
                "zero_invalid": zero_invalid,
            },
            sort_keys=True,
        )
        + "\n",
        encoding="ascii",
    )
    return sidecar


def load_scene_file(path: str | Path) -> DisparityMap:
    """Load a PGM scene written by :func:`save_disparity` via its sidecar."""
    path = Path(path)
    sidecar = path.with_suffix(".json")
    try:
        meta = json.loads(sidecar.read_text(encoding="ascii"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"bad sidecar {sidecar}: {exc}") from exc
    if meta.get("schema_version") != SIDECAR_SCHEMA_VERSION:
        raise FormatError(f"unsupported sidecar schema in {sidecar}")
    return load_disparity(
        path,
        meta.get("format", "pgm16"),
        offset=float(meta["offset"]),
        scale=float(meta["scale"]),
        zero_invalid=bool(meta.get("zero_invalid", False)),
    )
