"""Distance measurement between two selected pixels.

Two outputs per pair: the direct (chord) distance between the resolved
world points, and the on-surface distance along the mesh graph, reported
both as the raw Dijkstra path length and as the arc length of a smoothing
spline fitted through the path. The spline exists to undo the grid
staircase: the graph path can only move along mesh edges, which
overestimates distances that run diagonally across the pixel lattice.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .calibration import PixelPoint, ReprojectionMatrix, reproject_pixel
from .errors import (
    DegeneratePath,
    InvalidState,
    NoVertexInRadius,
    OutOfBounds,
    Unreachable,
)
from .images import DisparityMap
from .surface import SurfaceGraph, SurfaceMesh


@dataclass(frozen=True)
class SplineParams:
    downsample_stride: int = 3
    arclen_rel_tol: float = 1e-6

    def __post_init__(self):
        if self.downsample_stride < 1:
            raise ValueError("stride must be >= 1")
        if not self.arclen_rel_tol > 0:
            raise ValueError("tolerance must be > 0")


@dataclass
class MeasurementResult:
    direct_mm: float
    surface_basic_mm: float | None = None
    surface_spline_mm: float | None = None
    path: np.ndarray | None = field(default=None, repr=False)  # (n, 3) mm
    path_pixels: np.ndarray | None = field(default=None, repr=False)  # (n, 2)

    def to_json(self) -> dict:
        out: dict = {"direct_mm": self.direct_mm}
        if self.surface_basic_mm is not None:
            out["surface_basic_mm"] = self.surface_basic_mm
        if self.surface_spline_mm is not None:
            out["surface_spline_mm"] = self.surface_spline_mm
        if self.path_pixels is not None:
            out["path_pixels"] = [[int(u), int(v)] for u, v in self.path_pixels]
        return out


@dataclass
class MeasurementContext:
    """Everything a measurement needs; mesh/graph may be absent for
    direct-only sessions."""

    q: ReprojectionMatrix
    disp: DisparityMap
    mesh: SurfaceMesh | None = None
    graph: SurfaceGraph | None = None


def direct_distance(a, b) -> float:
    """Euclidean distance in mm between two world points."""
    a = np.asarray(a, dtype=np.float64) if not hasattr(a, "as_array") else a.as_array()
    b = np.asarray(b, dtype=np.float64) if not hasattr(b, "as_array") else b.as_array()
    return float(np.linalg.norm(a - b))


def _nearest_in_index(
    pixel_index: np.ndarray, p: PixelPoint, search_radius: float
) -> tuple[int, int] | None:
    """Nearest indexed pixel to the fractional point p, Euclidean pixel
    metric, ties by smaller row then smaller column."""
    h, w = pixel_index.shape
    r = int(math.ceil(search_radius)) + 1
    u0, v0 = int(round(p.u)), int(round(p.v))
    lo_u, hi_u = max(0, u0 - r), min(w, u0 + r + 1)
    lo_v, hi_v = max(0, v0 - r), min(h, v0 + r + 1)
    window = pixel_index[lo_v:hi_v, lo_u:hi_u]
    vs, us = np.nonzero(window >= 0)
    if len(vs) == 0:
        return None
    us = us + lo_u
    vs = vs + lo_v
    d2 = (us - p.u) ** 2 + (vs - p.v) ** 2
    within = d2 <= search_radius**2 + 1e-12
    if not within.any():
        return None
    us, vs, d2 = us[within], vs[within], d2[within]
    order = np.lexsort((us, vs, d2))
    best = order[0]
    return int(us[best]), int(vs[best])


def nearest_vertex(
    mesh: SurfaceMesh, p: PixelPoint, search_radius: float = 5.0
) -> int:
    """Vertex owning pixel round(p), else the vertex whose source pixel is
    nearest to p within ``search_radius`` px."""
    hit = _nearest_in_index(mesh.pixel_index, p, search_radius)
    if hit is None:
        raise NoVertexInRadius(
            f"no mesh vertex within {search_radius} px of ({p.u}, {p.v})"
        )
    u, v = hit
    return int(mesh.pixel_index[v, u])


def nearest_valid_pixel(
    disp: DisparityMap, p: PixelPoint, search_radius: float = 5.0
) -> tuple[int, int]:
    """Disparity-grid analog of nearest_vertex for mesh-free sessions.

    Mesh vertices are exactly the valid disparity pixels, so both lookups
    resolve a point to the same pixel.
    """
    index = np.where(disp.valid_mask, 0, -1).astype(np.int64)
    hit = _nearest_in_index(index, p, search_radius)
    if hit is None:
        raise NoVertexInRadius(
            f"no valid disparity within {search_radius} px of ({p.u}, {p.v})"
        )
    return hit


def geodesic_path(
    graph: SurfaceGraph, va: int, vb: int
) -> tuple[list[int], float]:
    """Dijkstra shortest path between two vertices.

    Deterministic: the heap orders ties by vertex id, and among equal-length
    routes into a vertex the smaller predecessor id wins.
    """
    n = graph.n_vertices
    if not (0 <= va < n and 0 <= vb < n):
        raise OutOfBounds(f"vertex ids must be in [0, {n})")
    if va == vb:
        return [va], 0.0

    indptr, nbr, wgt = graph.adjacency()
    dist = np.full(n, np.inf)
    pred = np.full(n, -1, dtype=np.int64)
    done = np.zeros(n, dtype=bool)
    dist[va] = 0.0
    heap: list[tuple[float, int]] = [(0.0, va)]
    while heap:
        d_u, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        if u == vb:
            break
        lo, hi = indptr[u], indptr[u + 1]
        vs = nbr[lo:hi]
        nds = d_u + wgt[lo:hi]
        cur = dist[vs]
        better = nds < cur
        for v, nd in zip(vs[better].tolist(), nds[better].tolist()):
            dist[v] = nd
            pred[v] = u
            heapq.heappush(heap, (nd, v))
        tie = (~better) & (nds == cur) & (~done[vs]) & (u < pred[vs])
        if tie.any():
            pred[vs[tie]] = u
    if not done[vb]:
        raise Unreachable(f"vertices {va} and {vb} lie in different components")

    path = [vb]
    while path[-1] != va:
        path.append(int(pred[path[-1]]))
    path.reverse()
    return path, float(dist[vb])


# --- centripetal Catmull-Rom arc length -------------------------------------


def _catmull_rom_point_and_speed(p, t, s: float):
    """Position and parametric speed of the non-uniform Catmull-Rom segment
    between p[1] and p[2] at parameter s in [t[1], t[2]].

    Uses the pyramid (Barry-Goldman) evaluation and its exact derivative.
    """
    p0, p1, p2, p3 = p
    t0, t1, t2, t3 = t

    a1 = ((t1 - s) * p0 + (s - t0) * p1) / (t1 - t0)
    a2 = ((t2 - s) * p1 + (s - t1) * p2) / (t2 - t1)
    a3 = ((t3 - s) * p2 + (s - t2) * p3) / (t3 - t2)
    da1 = (p1 - p0) / (t1 - t0)
    da2 = (p2 - p1) / (t2 - t1)
    da3 = (p3 - p2) / (t3 - t2)

    b1 = ((t2 - s) * a1 + (s - t0) * a2) / (t2 - t0)
    b2 = ((t3 - s) * a2 + (s - t1) * a3) / (t3 - t1)
    db1 = (a2 - a1 + (t2 - s) * da1 + (s - t0) * da2) / (t2 - t0)
    db2 = (a3 - a2 + (t3 - s) * da2 + (s - t1) * da3) / (t3 - t1)

    c = ((t2 - s) * b1 + (s - t1) * b2) / (t2 - t1)
    dc = (b2 - b1 + (t2 - s) * db1 + (s - t1) * db2) / (t2 - t1)
    return c, float(np.linalg.norm(dc))


def _adaptive_simpson(f, a: float, b: float, eps: float) -> float:
    fa, fm, fb = f(a), f((a + b) / 2), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return _simpson_recurse(f, a, b, fa, fm, fb, whole, eps, depth=40)


def _simpson_recurse(f, a, b, fa, fm, fb, whole, eps, depth):
    m = (a + b) / 2.0
    lm, rm = (a + m) / 2.0, (m + b) / 2.0
    flm, frm = f(lm), f(rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    delta = left + right - whole
    if depth <= 0 or abs(delta) <= 15.0 * eps:
        return left + right + delta / 15.0
    return _simpson_recurse(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1) + \
        _simpson_recurse(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)


def _downsample(points: np.ndarray, stride: int) -> np.ndarray:
    kept = points[::stride]
    if (len(points) - 1) % stride != 0:
        kept = np.vstack([kept, points[-1]])
    return kept


def spline_length(path, params: SplineParams | None = None) -> float:
    """Arc length of a centripetal Catmull-Rom spline through the
    stride-downsampled path (endpoints always kept, endpoint tangents from
    reflected phantom points). Integration by adaptive Simpson to the
    configured relative tolerance.
    """
    params = params or SplineParams()
    pts = np.asarray(path, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise DegeneratePath("need at least 2 path points")
    # collapse consecutive duplicates; they carry no length and break the
    # centripetal parameterization
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = np.linalg.norm(np.diff(pts, axis=0), axis=1) > 0
    pts = pts[keep]
    if len(pts) < 2:
        raise DegeneratePath("fewer than 2 distinct path points")
    if len(pts) == 2:
        return float(np.linalg.norm(pts[1] - pts[0]))

    pts = _downsample(pts, params.downsample_stride)
    if len(pts) == 2:
        return float(np.linalg.norm(pts[1] - pts[0]))

    # phantom endpoints by reflection fix the boundary tangents
    first = 2.0 * pts[0] - pts[1]
    last = 2.0 * pts[-1] - pts[-2]
    ctrl = np.vstack([first, pts, last])

    seg = np.linalg.norm(np.diff(ctrl, axis=0), axis=1)
    knots = np.concatenate([[0.0], np.cumsum(np.sqrt(seg))])

    total = 0.0
    for i in range(1, len(ctrl) - 2):
        p = ctrl[i - 1 : i + 3]
        t = knots[i - 1 : i + 3]

        def speed(s, p=p, t=t):
            return _catmull_rom_point_and_speed(p, t, s)[1]

        chord = float(np.linalg.norm(p[2] - p[1]))
        eps = params.arclen_rel_tol * max(chord, 1e-12)
        total += _adaptive_simpson(speed, float(t[1]), float(t[2]), eps)
    return total


def measure_pair(
    ctx: MeasurementContext,
    pa: PixelPoint,
    pb: PixelPoint,
    mode: str = "both",
    spline_params: SplineParams | None = None,
    search_radius: float = 5.0,
) -> MeasurementResult:
    """Run the requested measurement between two left-image pixels.

    Selections resolve to the nearest valid surface point within
    ``search_radius`` px. Surface modes require a built mesh and graph.
    """
    if mode not in ("direct", "surface", "both"):
        raise ValueError(f"unknown mode {mode!r}")
    h, w = ctx.disp.values.shape
    for name, p in (("point_a", pa), ("point_b", pb)):
        if not (0 <= p.u < w and 0 <= p.v < h):
            raise OutOfBounds(f"{name} ({p.u}, {p.v}) outside {w}x{h} image")

    want_surface = mode in ("surface", "both")
    if want_surface and (ctx.mesh is None or ctx.graph is None):
        raise InvalidState("surface measurement requested but no mesh built")

    if ctx.mesh is not None:
        va = nearest_vertex(ctx.mesh, pa, search_radius)
        vb = nearest_vertex(ctx.mesh, pb, search_radius)
        wa = ctx.mesh.vertices[va]
        wb = ctx.mesh.vertices[vb]
    else:
        ua, va_px = nearest_valid_pixel(ctx.disp, pa, search_radius)
        ub, vb_px = nearest_valid_pixel(ctx.disp, pb, search_radius)
        wa = reproject_pixel(
            ctx.q, PixelPoint(ua, va_px), ctx.disp.at(ua, va_px)
        ).as_array()
        wb = reproject_pixel(
            ctx.q, PixelPoint(ub, vb_px), ctx.disp.at(ub, vb_px)
        ).as_array()

    result = MeasurementResult(direct_mm=float(np.linalg.norm(wa - wb)))
    if want_surface:
        ids, basic = geodesic_path(ctx.graph, va, vb)
        world_path = ctx.mesh.vertices[ids]
        result.surface_basic_mm = basic
        if len(ids) < 2:
            result.surface_spline_mm = 0.0
        else:
            result.surface_spline_mm = spline_length(world_path, spline_params)
        result.path = world_path
        result.path_pixels = ctx.mesh.vertex_pixels[ids]
    return result
