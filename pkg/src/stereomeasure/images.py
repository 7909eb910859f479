"""Raster I/O: grayscale images, disparity maps, and the PFM format.

Grayscale images are plain uint8 numpy arrays of shape (height, width).
RGB inputs are collapsed with the standard luma weights
round(0.299 R + 0.587 G + 0.114 B).

Disparity maps are float32 rasters where NaN marks invalid pixels; zero is a
legal (if degenerate) disparity and is never used as a sentinel.

PFM files follow the Middlebury convention: "Pf" header, ASCII dimensions,
a scale line whose sign encodes endianness, and bottom-to-top float32 rows.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DimensionMismatch, IoFailure, MalformedFile, MalformedPfm

INVALID = np.float32(np.nan)

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def to_gray(arr: np.ndarray) -> np.ndarray:
    """Collapse an image array to 8-bit grayscale."""
    if arr.ndim == 2:
        return arr.astype(np.uint8, copy=False)
    if arr.ndim == 3 and arr.shape[2] in (3, 4):
        rgb = arr[..., :3].astype(np.float64)
        luma = rgb @ np.array(LUMA_WEIGHTS)
        return np.clip(np.round(luma), 0, 255).astype(np.uint8)
    raise MalformedFile(f"unsupported image shape {arr.shape}")


def load_gray(path: str | Path) -> np.ndarray:
    """Load a PNG or PGM image as a (height, width) uint8 array."""
    try:
        with Image.open(path) as img:
            arr = np.asarray(img)
    except OSError as exc:
        raise MalformedFile(f"cannot read image {path}: {exc}") from exc
    gray = to_gray(arr)
    if gray.shape[0] < 2 or gray.shape[1] < 2:
        raise MalformedFile("image must be at least 2x2")
    return gray


def decode_gray(data: bytes) -> np.ndarray:
    """Decode in-memory PNG/PGM bytes to grayscale."""
    import io

    try:
        with Image.open(io.BytesIO(data)) as img:
            arr = np.asarray(img)
    except OSError as exc:
        raise MalformedFile(f"cannot decode image: {exc}") from exc
    gray = to_gray(arr)
    if gray.shape[0] < 2 or gray.shape[1] < 2:
        raise MalformedFile("image must be at least 2x2")
    return gray


def save_gray(img: np.ndarray, path: str | Path) -> None:
    try:
        Image.fromarray(np.asarray(img, dtype=np.uint8), mode="L").save(path)
    except OSError as exc:
        raise IoFailure(f"cannot write image {path}: {exc}") from exc


@dataclass
class DisparityMap:
    """Per-pixel horizontal disparity (px) with NaN as the invalid marker."""

    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        if self.values.ndim != 2:
            raise MalformedFile("disparity map must be 2-D")

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def valid_mask(self) -> np.ndarray:
        return np.isfinite(self.values)

    def valid_count(self) -> int:
        return int(self.valid_mask.sum())

    def at(self, u: int, v: int) -> float:
        """Disparity at an integer pixel; NaN when invalid or out of bounds."""
        if not (0 <= u < self.width and 0 <= v < self.height):
            return float("nan")
        return float(self.values[v, u])

    def copy(self) -> "DisparityMap":
        return DisparityMap(self.values.copy())


def read_pfm(path: str | Path) -> np.ndarray:
    """Read a grayscale PFM file into a float32 (height, width) array."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise MalformedPfm(f"cannot read {path}: {exc}") from exc
    return decode_pfm(data)


def decode_pfm(data: bytes) -> np.ndarray:
    header_match = re.match(rb"^(P[fF])\s+(\d+)\s+(\d+)\s+([-+0-9.eE]+)\s", data)
    if header_match is None:
        raise MalformedPfm("bad PFM header")
    kind, width_s, height_s, scale_s = header_match.groups()
    if kind != b"Pf":
        raise MalformedPfm("only grayscale 'Pf' files are supported")
    width, height = int(width_s), int(height_s)
    try:
        scale = float(scale_s)
    except ValueError as exc:
        raise MalformedPfm("bad scale line") from exc
    if scale == 0:
        raise MalformedPfm("scale must be nonzero")
    offset = header_match.end()
    count = width * height
    expected = count * 4
    payload = data[offset : offset + expected]
    if len(payload) != expected:
        raise MalformedPfm(
            f"truncated payload: expected {expected} bytes, got {len(payload)}"
        )
    endi = "<" if scale < 0 else ">"
    flat = np.frombuffer(payload, dtype=f"{endi}f4", count=count)
    rows = flat.reshape(height, width)
    # stored bottom-to-top
    return np.ascontiguousarray(rows[::-1]).astype(np.float32)


def write_pfm(values: np.ndarray, path: str | Path) -> None:
    """Write a float32 array as a little-endian grayscale PFM file."""
    arr = np.asarray(values, dtype="<f4")
    if arr.ndim != 2:
        raise IoFailure("PFM payload must be 2-D")
    height, width = arr.shape
    header = f"Pf\n{width} {height}\n-1.0\n".encode("ascii")
    body = np.ascontiguousarray(arr[::-1]).tobytes()
    try:
        Path(path).write_bytes(header + body)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def import_disparity(path: str | Path, expected_shape: tuple[int, int]) -> DisparityMap:
    """Load an externally estimated disparity map from a PFM file.

    ``expected_shape`` is (height, width) of the session's left image.
    Non-finite and non-positive entries are marked invalid.
    """
    values = read_pfm(path)
    if values.shape != tuple(expected_shape):
        raise DimensionMismatch(
            f"disparity {values.shape[1]}x{values.shape[0]} does not match "
            f"session {expected_shape[1]}x{expected_shape[0]}"
        )
    cleaned = values.copy()
    bad = ~np.isfinite(cleaned) | (cleaned <= 0)
    cleaned[bad] = INVALID
    return DisparityMap(cleaned)
