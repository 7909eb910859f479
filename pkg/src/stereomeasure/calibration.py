"""Camera model for a rectified stereo rig.

All metric quantities are millimetres. The rig is assumed rectified with
identical principal points in both views, which gives the classic
reprojection relations

    Z = fx * baseline / d
    X = (u - cx) * baseline / d
    Y = (v - cy) * (fx / fy) * baseline / d

for a pixel (u, v) with disparity d > 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    InvalidDisparity,
    MalformedFile,
    MissingField,
    NonPositiveDepth,
    NonPositiveValue,
    UnknownField,
)

CALIBRATION_KEYS = ("fx", "fy", "cx", "cy", "baseline_mm", "width", "height")


@dataclass(frozen=True)
class PixelPoint:
    """Image position in pixels; fractional coordinates are allowed."""

    u: float
    v: float

    def rounded(self) -> tuple[int, int]:
        return int(round(self.u)), int(round(self.v))


@dataclass(frozen=True)
class WorldPoint:
    """Metric position (mm) in the left-camera frame."""

    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)


@dataclass(frozen=True)
class StereoRig:
    fx: float
    fy: float
    cx: float
    cy: float
    baseline: float  # mm
    width: int
    height: int

    def __post_init__(self):
        for name in ("fx", "fy", "baseline"):
            if not getattr(self, name) > 0:
                raise NonPositiveValue(name)
        if self.width < 2 or self.height < 2:
            raise MalformedFile("image dimensions must be at least 2x2")
        if not (0 <= self.cx < self.width):
            raise MalformedFile("cx outside image")
        if not (0 <= self.cy < self.height):
            raise MalformedFile("cy outside image")

    def contains(self, p: PixelPoint) -> bool:
        return 0 <= p.u < self.width and 0 <= p.v < self.height


@dataclass(frozen=True)
class ReprojectionMatrix:
    """4x4 matrix mapping homogeneous (u, v, d, 1) to homogeneous world mm."""

    q: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=np.float64))
        if self.q.shape != (4, 4):
            raise MalformedFile("Q must be 4x4")


def load_calibration(path: str | Path) -> StereoRig:
    """Parse a calibration JSON file into a StereoRig.

    The file must be a JSON object with exactly the numeric keys
    fx, fy, cx, cy, baseline_mm, width, height. Unknown keys are rejected.
    """
    try:
        raw = Path(path).read_text()
    except OSError as exc:
        raise MalformedFile(f"cannot read calibration file: {exc}") from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise MalformedFile(f"calibration is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise MalformedFile("calibration must be a JSON object")
    return parse_calibration(data)


def parse_calibration(data: dict) -> StereoRig:
    for key in CALIBRATION_KEYS:
        if key not in data:
            raise MissingField(key)
    for key in data:
        if key not in CALIBRATION_KEYS:
            raise UnknownField(key)
    values = {}
    for key in CALIBRATION_KEYS:
        value = data[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise MalformedFile(f"field '{key}' must be a number")
        if not math.isfinite(value):
            raise MalformedFile(f"field '{key}' must be finite")
        values[key] = float(value)
    for key in ("fx", "fy", "baseline_mm", "width", "height"):
        if values[key] <= 0:
            raise NonPositiveValue(key)
    if values["width"] != int(values["width"]) or values["height"] != int(values["height"]):
        raise MalformedFile("width and height must be integers")
    return StereoRig(
        fx=values["fx"],
        fy=values["fy"],
        cx=values["cx"],
        cy=values["cy"],
        baseline=values["baseline_mm"],
        width=int(values["width"]),
        height=int(values["height"]),
    )


def save_calibration(rig: StereoRig, path: str | Path) -> None:
    payload = {
        "fx": rig.fx,
        "fy": rig.fy,
        "cx": rig.cx,
        "cy": rig.cy,
        "baseline_mm": rig.baseline,
        "width": rig.width,
        "height": rig.height,
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def build_q(rig: StereoRig) -> ReprojectionMatrix:
    """Derive the 4x4 reprojection matrix from the rig parameters.

    Applying q to (u, v, d, 1) and dehomogenizing yields the world point
    given by the module-level relations. Anisotropic focal lengths are
    handled through the fx/fy ratio on the Y row.
    """
    r = rig.fx / rig.fy
    q = np.array(
        [
            [1.0, 0.0, 0.0, -rig.cx],
            [0.0, r, 0.0, -rig.cy * r],
            [0.0, 0.0, 0.0, rig.fx],
            [0.0, 0.0, 1.0 / rig.baseline, 0.0],
        ],
        dtype=np.float64,
    )
    return ReprojectionMatrix(q)


def reproject_pixel(q: ReprojectionMatrix, p: PixelPoint, d: float) -> WorldPoint:
    """Map a pixel plus disparity to world coordinates (mm)."""
    if not (isinstance(d, (int, float)) and math.isfinite(d)) or d <= 0:
        raise InvalidDisparity(f"disparity must be finite and > 0, got {d!r}")
    homog = q.q @ np.array([p.u, p.v, float(d), 1.0])
    w = homog[3]
    return WorldPoint(homog[0] / w, homog[1] / w, homog[2] / w)


def reproject_pixels(q: ReprojectionMatrix, u, v, d) -> np.ndarray:
    """Vectorized reprojection: arrays of (u, v, d) to an (n, 3) mm array.

    Caller guarantees d > 0 and finite; no per-element validation happens here.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    stacked = np.stack([u, v, d, np.ones_like(u)], axis=-1)
    homog = stacked @ q.q.T
    return homog[..., :3] / homog[..., 3:4]


def project_point(rig: StereoRig, w: WorldPoint) -> tuple[PixelPoint, float]:
    """Inverse map: world point to (pixel, disparity).

    The result may fall outside the image bounds; clipping is the caller's
    concern.
    """
    if w.z <= 0:
        raise NonPositiveDepth(f"z must be > 0, got {w.z}")
    u = rig.cx + rig.fx * w.x / w.z
    v = rig.cy + rig.fy * w.y / w.z
    d = rig.fx * rig.baseline / w.z
    return PixelPoint(u, v), d
