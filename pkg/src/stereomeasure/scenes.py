"""Synthetic stereo scenes with analytic ground truth.

Every scene is a height profile z = S(x) extruded along y and viewed by a
rectified pinhole pair, so depth depends only on the image column. Both
views sample one procedural world-anchored texture, which makes the pair
geometrically exact: the true disparity at any pixel is fx*B/Z with Z the
analytic ray-surface intersection.

Marker pairs are anchored to the surface. By default they are snapped to
integer pixels and then re-anchored by back-projecting the stored float32
disparity, so a pipeline fed the ground-truth disparity map reproduces the
marker world positions to floating-point precision. On an extruded surface
the on-surface ground truth between two anchored markers unrolls to
sqrt(profile_arc^2 + dy^2).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .calibration import (
    PixelPoint,
    StereoRig,
    build_q,
    parse_calibration,
    project_point,
    reproject_pixel,
    WorldPoint,
)
from .errors import MalformedFile, MarkerOutOfView, MissingField, UnsupportedShape
from .images import DisparityMap
from .measure import _adaptive_simpson

SCENE_KINDS = ("plane", "wave", "curve", "triangle")

DEFAULT_RIG = StereoRig(
    fx=700.0, fy=700.0, cx=212.0, cy=120.0, baseline=50.0, width=424, height=240
)


@dataclass(frozen=True)
class MarkerPair:
    """Surface-anchored pair given by world (x, y) mm; z comes from the
    profile."""

    a: tuple[float, float]
    b: tuple[float, float]
    label: str = ""


@dataclass(frozen=True)
class TextureParams:
    amplitude: float = 1.0  # 0 renders a textureless (constant) surface
    cell_mm: float = 6.0
    octaves: int = 3


@dataclass(frozen=True)
class SceneSpec:
    kind: str
    params: dict
    marker_pairs: tuple[MarkerPair, ...]
    texture_seed: int = 0
    texture: TextureParams = TextureParams()
    rig: StereoRig = DEFAULT_RIG
    snap_markers: bool = True
    label: str = ""

    def __post_init__(self):
        if self.kind not in SCENE_KINDS:
            raise UnsupportedShape(f"unknown scene kind {self.kind!r}")
        if not self.label:
            object.__setattr__(self, "label", self.kind)


@dataclass(frozen=True)
class ResolvedMarker:
    pixel: PixelPoint
    world: WorldPoint
    label: str


@dataclass
class Scene:
    spec: SceneSpec
    left: np.ndarray
    right: np.ndarray
    gt_disp: DisparityMap
    markers: list[tuple[ResolvedMarker, ResolvedMarker]]
    gt_direct_mm: list[float]
    gt_surface_mm: list[float]


# --- height profiles ---------------------------------------------------------


class _Profile:
    """1-D height profile z = S(x); x and z in mm."""

    def depth(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def solve_ray(self, k: np.ndarray, x_offset: float) -> np.ndarray:
        """Solve z = S(x_offset + k z) for each ray slope k = (u-cx)/fx."""
        raise NotImplementedError

    def arc(self, x0: float, x1: float) -> float:
        """Profile arc length between two x coordinates."""
        raise NotImplementedError


class _PlaneProfile(_Profile):
    def __init__(self, depth_mm: float, tilt_rad: float = 0.0):
        if abs(tilt_rad) >= math.pi / 2:
            raise MalformedFile("plane tilt must be within (-pi/2, pi/2)")
        self.z0 = depth_mm
        self.m = math.tan(tilt_rad)

    def depth(self, x):
        return self.z0 + self.m * np.asarray(x, dtype=np.float64)

    def solve_ray(self, k, x_offset):
        k = np.asarray(k, dtype=np.float64)
        denom = 1.0 - self.m * k
        if np.any(denom <= 0):
            raise MalformedFile("plane tilt too steep for the field of view")
        return (self.z0 + self.m * x_offset) / denom

    def arc(self, x0, x1):
        return abs(x1 - x0) * math.sqrt(1.0 + self.m * self.m)


class _WaveProfile(_Profile):
    def __init__(self, depth_mm: float, amplitude_mm: float, wavelength_mm: float):
        if wavelength_mm <= 0:
            raise MalformedFile("wavelength must be positive")
        self.z0 = depth_mm
        self.amp = amplitude_mm
        self.freq = 2.0 * math.pi / wavelength_mm

    def depth(self, x):
        return self.z0 + self.amp * np.sin(self.freq * np.asarray(x, dtype=np.float64))

    def solve_ray(self, k, x_offset):
        k = np.asarray(k, dtype=np.float64)
        # contractive fixed point; |amp * freq * k| < 1 over the view
        z = np.full_like(k, self.z0)
        for _ in range(200):
            z_next = self.z0 + self.amp * np.sin(self.freq * (x_offset + k * z))
            if np.max(np.abs(z_next - z)) < 1e-12:
                z = z_next
                break
            z = z_next
        return z

    def _slope(self, x):
        return self.amp * self.freq * np.cos(self.freq * x)

    def arc(self, x0, x1):
        lo, hi = min(x0, x1), max(x0, x1)
        if lo == hi:
            return 0.0

        def speed(x):
            s = self._slope(np.asarray(x))
            return float(np.sqrt(1.0 + s * s))

        return _adaptive_simpson(speed, lo, hi, 1e-9 * (hi - lo))


class _CurveProfile(_Profile):
    """Convex cylinder cap (axis along y) continued by its tangent planes."""

    def __init__(self, depth_mm: float, radius_mm: float, span_rad: float):
        if radius_mm <= 0 or not (0 < span_rad < math.pi):
            raise MalformedFile("curve needs radius > 0 and span in (0, pi)")
        self.r = radius_mm
        self.zc = depth_mm + radius_mm  # apex sits at depth_mm
        self.x_edge = radius_mm * math.sin(span_rad / 2.0)
        self.z_edge = self.zc - math.sqrt(radius_mm**2 - self.x_edge**2)
        self.m_edge = self.x_edge / math.sqrt(radius_mm**2 - self.x_edge**2)

    def depth(self, x):
        x = np.asarray(x, dtype=np.float64)
        ax = np.abs(x)
        inside = ax <= self.x_edge
        z = np.where(
            inside,
            self.zc - np.sqrt(np.maximum(self.r**2 - x**2, 0.0)),
            self.z_edge + self.m_edge * (ax - self.x_edge),
        )
        return z

    def solve_ray(self, k, x_offset):
        k = np.asarray(k, dtype=np.float64)
        # cylinder branch
        a = 1.0 + k * k
        b = self.zc - x_offset * k
        c = self.zc**2 - self.r**2 + x_offset**2
        disc = b * b - a * c
        safe = disc >= 0
        z_cyl = np.where(safe, (b - np.sqrt(np.maximum(disc, 0.0))) / a, np.inf)
        x_cyl = x_offset + k * z_cyl
        cyl_ok = safe & (np.abs(x_cyl) <= self.x_edge) & (z_cyl > 0)
        # tangent branches: z = z_edge + m_edge * (+-x - x_edge)
        z_tan_r = (self.z_edge + self.m_edge * (x_offset - self.x_edge)) / (
            1.0 - self.m_edge * k
        )
        z_tan_l = (self.z_edge + self.m_edge * (-x_offset - self.x_edge)) / (
            1.0 + self.m_edge * k
        )
        x_r = x_offset + k * z_tan_r
        x_l = x_offset + k * z_tan_l
        right_ok = (x_r >= self.x_edge) & (z_tan_r > 0)
        z = np.where(cyl_ok, z_cyl, np.where(right_ok, z_tan_r, z_tan_l))
        bad = ~cyl_ok & ~right_ok & ~((x_l <= -self.x_edge) & (z_tan_l > 0))
        if np.any(bad):
            raise MalformedFile("curve does not cover the field of view")
        return z

    def _arc_from_apex(self, x: float) -> float:
        ax = abs(x)
        if ax <= self.x_edge:
            s = self.r * math.asin(ax / self.r)
        else:
            s = self.r * math.asin(self.x_edge / self.r) + (
                ax - self.x_edge
            ) * math.sqrt(1.0 + self.m_edge**2)
        return math.copysign(s, x)

    def arc(self, x0, x1):
        return abs(self._arc_from_apex(x1) - self._arc_from_apex(x0))


class _TriangleProfile(_Profile):
    """Ridge pointing toward the camera, flanked by a flat plane."""

    def __init__(self, depth_mm: float, height_mm: float, base_mm: float):
        if height_mm <= 0 or base_mm <= 0:
            raise MalformedFile("triangle needs positive height and base")
        self.z_flat = depth_mm + height_mm  # apex sits at depth_mm
        self.h = height_mm
        self.half = base_mm / 2.0
        self.m = height_mm / self.half

    def depth(self, x):
        x = np.asarray(x, dtype=np.float64)
        ax = np.abs(x)
        return np.where(
            ax <= self.half, self.z_flat - self.h + self.m * ax, self.z_flat
        )

    def solve_ray(self, k, x_offset):
        k = np.asarray(k, dtype=np.float64)
        z_apex = self.z_flat - self.h
        candidates = []
        # right flank: z = z_apex + m x, 0 <= x <= half
        denom_r = 1.0 - self.m * k
        z_r = np.where(denom_r > 0, (z_apex + self.m * x_offset) / denom_r, np.inf)
        x_r = x_offset + k * z_r
        ok_r = (z_r > 0) & (x_r >= 0) & (x_r <= self.half)
        candidates.append(np.where(ok_r, z_r, np.inf))
        # left flank: z = z_apex - m x, -half <= x <= 0
        denom_l = 1.0 + self.m * k
        z_l = np.where(denom_l > 0, (z_apex - self.m * x_offset) / denom_l, np.inf)
        x_l = x_offset + k * z_l
        ok_l = (z_l > 0) & (x_l <= 0) & (x_l >= -self.half)
        candidates.append(np.where(ok_l, z_l, np.inf))
        # flat plane beyond the base
        x_f = x_offset + k * self.z_flat
        ok_f = np.abs(x_f) >= self.half
        candidates.append(np.where(ok_f, self.z_flat, np.inf))
        z = np.minimum.reduce(candidates)
        if np.any(~np.isfinite(z)):
            raise MalformedFile("triangle does not cover the field of view")
        return z

    def _arc_from_apex(self, x: float) -> float:
        ax = abs(x)
        sec = math.sqrt(1.0 + self.m**2)
        if ax <= self.half:
            s = ax * sec
        else:
            s = self.half * sec + (ax - self.half)
        return math.copysign(s, x)

    def arc(self, x0, x1):
        return abs(self._arc_from_apex(x1) - self._arc_from_apex(x0))


def profile_for(spec: SceneSpec) -> _Profile:
    p = dict(spec.params)
    try:
        if spec.kind == "plane":
            return _PlaneProfile(p.pop("depth_mm"), p.pop("tilt_rad", 0.0))
        if spec.kind == "wave":
            return _WaveProfile(
                p.pop("depth_mm"), p.pop("amplitude_mm"), p.pop("wavelength_mm")
            )
        if spec.kind == "curve":
            return _CurveProfile(
                p.pop("depth_mm"), p.pop("radius_mm"), p.pop("span_rad")
            )
        if spec.kind == "triangle":
            return _TriangleProfile(
                p.pop("depth_mm"), p.pop("height_mm"), p.pop("base_mm")
            )
    except KeyError as exc:
        raise MissingField(f"params.{exc.args[0]}") from exc
    raise UnsupportedShape(spec.kind)


# --- texture ------------------------------------------------------------------


class _ValueNoise:
    """Seeded band-limited value noise over the world (x, y) plane."""

    def __init__(self, seed: int, cell_mm: float, octaves: int, bounds):
        (x_min, x_max), (y_min, y_max) = bounds
        self.cell = cell_mm
        self.origin = (x_min - 2 * cell_mm, y_min - 2 * cell_mm)
        rng = np.random.default_rng(seed)
        self.layers = []
        weight = 1.0
        cell = cell_mm
        for _ in range(max(1, octaves)):
            nx = int(math.ceil((x_max - self.origin[0]) / cell)) + 3
            ny = int(math.ceil((y_max - self.origin[1]) / cell)) + 3
            self.layers.append((cell, weight, rng.random((ny, nx))))
            cell /= 2.0
            weight /= 2.0
        self.norm = sum(w for _, w, _ in self.layers)

    def __call__(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        total = np.zeros(np.broadcast(x, y).shape, dtype=np.float64)
        for cell, weight, lattice in self.layers:
            gx = (x - self.origin[0]) / cell
            gy = (y - self.origin[1]) / cell
            ix = np.clip(gx.astype(np.int64), 0, lattice.shape[1] - 2)
            iy = np.clip(gy.astype(np.int64), 0, lattice.shape[0] - 2)
            fx = gx - ix
            fy = gy - iy
            # smoothstep keeps the gradient continuous across cell borders
            sx = fx * fx * (3.0 - 2.0 * fx)
            sy = fy * fy * (3.0 - 2.0 * fy)
            v00 = lattice[iy, ix]
            v01 = lattice[iy, ix + 1]
            v10 = lattice[iy + 1, ix]
            v11 = lattice[iy + 1, ix + 1]
            top = v00 + (v01 - v00) * sx
            bot = v10 + (v11 - v10) * sx
            total += weight * (top + (bot - top) * sy)
        return total / self.norm


# --- scene generation -----------------------------------------------------------


def generate_scene(spec: SceneSpec) -> Scene:
    """Render the stereo pair, the exact disparity map, and resolved markers."""
    rig = spec.rig
    profile = profile_for(spec)
    w, h = rig.width, rig.height

    us = np.arange(w, dtype=np.float64)
    vs = np.arange(h, dtype=np.float64)
    k = (us - rig.cx) / rig.fx

    z_left = profile.solve_ray(k, x_offset=0.0)  # (w,)
    if np.any(z_left <= 0):
        raise MalformedFile("surface crosses the camera plane")
    gt = (rig.fx * rig.baseline / z_left).astype(np.float32)
    gt_disp = DisparityMap(np.tile(gt, (h, 1)))

    x_left = k * z_left  # (w,)
    y_scale = (vs - rig.cy) / rig.fy  # (h,)
    xs_l = np.broadcast_to(x_left, (h, w))
    ys_l = y_scale[:, None] * z_left[None, :]

    z_right = profile.solve_ray(k, x_offset=rig.baseline)
    x_right = rig.baseline + k * z_right
    xs_r = np.broadcast_to(x_right, (h, w))
    ys_r = y_scale[:, None] * z_right[None, :]

    x_all = (
        min(x_left.min(), x_right.min()),
        max(x_left.max(), x_right.max()),
    )
    y_all = (
        min(ys_l.min(), ys_r.min()),
        max(ys_l.max(), ys_r.max()),
    )
    noise = _ValueNoise(
        spec.texture_seed, spec.texture.cell_mm, spec.texture.octaves, (x_all, y_all)
    )

    def shade(xs, ys):
        base = 128.0 + spec.texture.amplitude * 220.0 * (noise(xs, ys) - 0.5)
        return np.clip(np.round(base), 0, 255).astype(np.uint8)

    left = shade(xs_l, ys_l)
    right = shade(xs_r, ys_r)

    markers: list[tuple[ResolvedMarker, ResolvedMarker]] = []
    gt_direct: list[float] = []
    gt_surface: list[float] = []
    q = build_q(rig)
    for pair in spec.marker_pairs:
        resolved = []
        for (mx, my), which in ((pair.a, "a"), (pair.b, "b")):
            mz = float(profile.depth(np.array([mx]))[0])
            pixel, disp = project_point(rig, WorldPoint(mx, my, mz))
            if spec.snap_markers:
                ui, vi = pixel.rounded()
                _check_in_view(rig, ui, vi, float(gt[ui]) if 0 <= ui < w else 0.0,
                               pair.label, which)
                d32 = float(gt[ui])
                world = reproject_pixel(q, PixelPoint(float(ui), float(vi)), d32)
                resolved.append(
                    ResolvedMarker(PixelPoint(float(ui), float(vi)), world, pair.label)
                )
            else:
                _check_in_view(rig, pixel.u, pixel.v, disp, pair.label, which)
                resolved.append(
                    ResolvedMarker(pixel, WorldPoint(mx, my, mz), pair.label)
                )
        ma, mb = resolved
        markers.append((ma, mb))
        gt_direct.append(
            float(np.linalg.norm(ma.world.as_array() - mb.world.as_array()))
        )
        arc = profile.arc(ma.world.x, mb.world.x)
        gt_surface.append(math.hypot(arc, mb.world.y - ma.world.y))
    return Scene(
        spec=spec,
        left=left,
        right=right,
        gt_disp=gt_disp,
        markers=markers,
        gt_direct_mm=gt_direct,
        gt_surface_mm=gt_surface,
    )


def _check_in_view(rig: StereoRig, u, v, disp, label: str, which: str) -> None:
    if not (0 <= u < rig.width and 0 <= v < rig.height):
        raise MarkerOutOfView(
            f"marker {which} of pair '{label}' projects outside the left view"
        )
    if not (0 <= u - disp < rig.width):
        raise MarkerOutOfView(
            f"marker {which} of pair '{label}' projects outside the right view"
        )


def oracle_surface_length(spec: SceneSpec, a: WorldPoint, b: WorldPoint) -> float:
    """Analytic on-surface distance between two surface-anchored points.

    The surface is an extrusion along y, so it unrolls isometrically:
    the geodesic is the hypotenuse of the profile arc and the y offset.
    """
    profile = profile_for(spec)
    arc = profile.arc(a.x, b.x)
    return math.hypot(arc, b.y - a.y)


# --- built-in scene presets ---------------------------------------------------


def preset_scene(name: str, texture_seed: int = 0, rig: StereoRig = DEFAULT_RIG,
                 texture: TextureParams = TextureParams()) -> SceneSpec:
    """The stock evaluation scenes; marker rows sit on the horizontal
    midline and pair labels carry the nominal distance."""
    if name == "plane":
        pairs = tuple(
            MarkerPair(a=(-d / 2.0, 0.0), b=(d / 2.0, 0.0), label=f"{d}mm")
            for d in (40, 80, 120)
        )
        return SceneSpec(
            kind="plane",
            params={"depth_mm": 500.0, "tilt_rad": 0.0},
            marker_pairs=pairs,
            texture_seed=texture_seed,
            texture=texture,
            rig=rig,
            label="plane",
        )
    if name == "wave":
        # one full period between the markers
        lam = 70.0
        return SceneSpec(
            kind="wave",
            params={"depth_mm": 500.0, "amplitude_mm": 8.15, "wavelength_mm": lam},
            marker_pairs=(
                MarkerPair(a=(-lam / 2.0, 0.0), b=(lam / 2.0, 0.0), label="wave"),
            ),
            texture_seed=texture_seed,
            texture=texture,
            rig=rig,
            label="wave",
        )
    if name == "curve":
        # arc length = radius * span between the band-edge markers
        radius, span = 50.0, 1.3725
        xe = radius * math.sin(span / 2.0)
        return SceneSpec(
            kind="curve",
            params={"depth_mm": 500.0, "radius_mm": radius, "span_rad": span},
            marker_pairs=(MarkerPair(a=(-xe, 0.0), b=(xe, 0.0), label="curve"),),
            texture_seed=texture_seed,
            texture=texture,
            rig=rig,
            label="curve",
        )
    if name == "triangle":
        # two flank segments of 32.5 mm each
        return SceneSpec(
            kind="triangle",
            params={"depth_mm": 500.0, "height_mm": 12.5, "base_mm": 60.0},
            marker_pairs=(MarkerPair(a=(-30.0, 0.0), b=(30.0, 0.0), label="triangle"),),
            texture_seed=texture_seed,
            texture=texture,
            rig=rig,
            label="triangle",
        )
    raise UnsupportedShape(f"unknown preset {name!r}")


# --- JSON scene specs ---------------------------------------------------------


def spec_from_json(data: dict) -> SceneSpec:
    if "preset" in data:
        extra = {k: v for k, v in data.items() if k != "preset"}
        spec = preset_scene(data["preset"])
        if "texture_seed" in extra:
            spec = SceneSpec(
                kind=spec.kind,
                params=spec.params,
                marker_pairs=spec.marker_pairs,
                texture_seed=int(extra["texture_seed"]),
                texture=spec.texture,
                rig=spec.rig,
                snap_markers=spec.snap_markers,
                label=spec.label,
            )
        return spec
    for key in ("kind", "params", "marker_pairs"):
        if key not in data:
            raise MissingField(key)
    rig = parse_calibration(data["rig"]) if "rig" in data else DEFAULT_RIG
    texture = TextureParams(**data.get("texture", {}))
    pairs = tuple(
        MarkerPair(
            a=tuple(p["a"]), b=tuple(p["b"]), label=p.get("label", f"pair{i}")
        )
        for i, p in enumerate(data["marker_pairs"])
    )
    return SceneSpec(
        kind=data["kind"],
        params=dict(data["params"]),
        marker_pairs=pairs,
        texture_seed=int(data.get("texture_seed", 0)),
        texture=texture,
        rig=rig,
        snap_markers=bool(data.get("snap_markers", True)),
        label=data.get("label", data["kind"]),
    )


def load_scene_spec(path: str | Path) -> SceneSpec:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise MalformedFile(f"cannot read scene spec: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedFile(f"scene spec is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise MalformedFile("scene spec must be a JSON object")
    return spec_from_json(data)


def markers_json(scene: Scene) -> list[dict]:
    out = []
    for (ma, mb), direct, surface in zip(
        scene.markers, scene.gt_direct_mm, scene.gt_surface_mm
    ):
        out.append(
            {
                "label": ma.label,
                "pixel_a": [ma.pixel.u, ma.pixel.v],
                "pixel_b": [mb.pixel.u, mb.pixel.v],
                "world_a": [ma.world.x, ma.world.y, ma.world.z],
                "world_b": [mb.world.x, mb.world.y, mb.world.z],
                "gt_direct_mm": direct,
                "gt_surface_mm": surface,
            }
        )
    return out
