"""From disparity raster to metric surface: point cloud, triangle mesh, graph.

The disparity grid is an organized point cloud, so triangulation works
directly on 2x2 pixel quads instead of reconstructing connectivity from
scattered points. Triangles never span depth discontinuities: any triangle
edge whose endpoint disparities differ by more than ``jump_threshold`` pixels
is dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .calibration import ReprojectionMatrix, reproject_pixels
from .errors import EmptyCloud, EmptyMesh, IoFailure, MalformedFile
from .images import DisparityMap


@dataclass
class PointCloud:
    """Valid-pixel reprojection: points in mm plus the pixel->point index."""

    points: np.ndarray = field(repr=False)  # (n, 3) float64, mm
    pixels: np.ndarray = field(repr=False)  # (n, 2) int64, (u, v)
    pixel_index: np.ndarray = field(repr=False)  # (h, w) int64, -1 = none

    def __len__(self) -> int:
        return len(self.points)


@dataclass
class SurfaceMesh:
    vertices: np.ndarray = field(repr=False)  # (n, 3) float64, mm
    faces: np.ndarray = field(repr=False)  # (f, 3) int64
    vertex_pixels: np.ndarray = field(repr=False)  # (n, 2) int64, (u, v)
    pixel_index: np.ndarray = field(repr=False)  # (h, w) int64, -1 = none

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)


@dataclass
class SurfaceGraph:
    """Undirected weighted graph over mesh vertices; edge iff a shared face."""

    n_vertices: int
    edges: np.ndarray = field(repr=False)  # (e, 2) int64, i < j
    weights: np.ndarray = field(repr=False)  # (e,) float64, mm
    _csr: tuple | None = field(default=None, repr=False, compare=False)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def adjacency(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """CSR-style (indptr, neighbor, weight) arrays for traversal."""
        if self._csr is None:
            src = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
            dst = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
            wgt = np.concatenate([self.weights, self.weights])
            order = np.lexsort((dst, src))
            src, dst, wgt = src[order], dst[order], wgt[order]
            indptr = np.zeros(self.n_vertices + 1, dtype=np.int64)
            np.add.at(indptr, src + 1, 1)
            np.cumsum(indptr, out=indptr)
            object.__setattr__(self, "_csr", (indptr, dst, wgt))
        return self._csr


def reproject_map(
    disp: DisparityMap,
    q: ReprojectionMatrix,
    depth_range: tuple[float, float] | None = None,
) -> PointCloud:
    """Reproject every valid pixel into the left-camera frame (mm).

    Pixels whose depth falls outside ``depth_range`` (inclusive, mm) are
    dropped along with invalid ones.
    """
    values = disp.values
    h, w = values.shape
    valid = np.isfinite(values) & (values > 0)
    vs, us = np.nonzero(valid)
    if len(vs) == 0:
        raise EmptyCloud("no valid disparity pixels to reproject")
    points = reproject_pixels(q, us.astype(np.float64), vs.astype(np.float64),
                              values[vs, us].astype(np.float64))
    if depth_range is not None:
        z_min, z_max = depth_range
        keep = (points[:, 2] >= z_min) & (points[:, 2] <= z_max)
        points, us, vs = points[keep], us[keep], vs[keep]
        if len(points) == 0:
            raise EmptyCloud(
                f"no pixel depth inside [{z_min}, {z_max}] mm"
            )
    pixel_index = np.full((h, w), -1, dtype=np.int64)
    pixel_index[vs, us] = np.arange(len(points))
    pixels = np.stack([us, vs], axis=1).astype(np.int64)
    return PointCloud(points=points, pixels=pixels, pixel_index=pixel_index)


def triangulate_grid(
    cloud: PointCloud, disp: DisparityMap, jump_threshold: float = 1.0
) -> SurfaceMesh:
    """Triangulate the organized cloud over the pixel grid.

    Each 2x2 quad contributes up to two triangles. A triangle is emitted
    only when all three of its edges connect valid pixels whose disparities
    differ by at most ``jump_threshold`` px. When only three corners of a
    quad survive that test, the single triangle they span is emitted,
    whichever corner is the bad one.
    """
    h, w = disp.values.shape
    if cloud.pixel_index.shape != (h, w):
        raise MalformedFile("cloud does not belong to this disparity map")
    idx = cloud.pixel_index
    d = disp.values.astype(np.float64)

    # quad corners: a=(u,v) b=(u+1,v) c=(u,v+1) dd=(u+1,v+1)
    ia, ib = idx[:-1, :-1], idx[:-1, 1:]
    ic, id_ = idx[1:, :-1], idx[1:, 1:]
    da, db = d[:-1, :-1], d[:-1, 1:]
    dc, dd = d[1:, :-1], d[1:, 1:]

    def edge_ok(i1, i2, d1, d2):
        with np.errstate(invalid="ignore"):
            return (i1 >= 0) & (i2 >= 0) & (np.abs(d1 - d2) <= jump_threshold)

    ok_ab = edge_ok(ia, ib, da, db)
    ok_ac = edge_ok(ia, ic, da, dc)
    ok_bc = edge_ok(ib, ic, db, dc)
    ok_bd = edge_ok(ib, id_, db, dd)
    ok_cd = edge_ok(ic, id_, dc, dd)
    ok_ad = edge_ok(ia, id_, da, dd)

    t_abc = ok_ab & ok_bc & ok_ac
    t_bdc = ok_bd & ok_cd & ok_bc
    t_abd = ok_ab & ok_bd & ok_ad
    t_adc = ok_ad & ok_cd & ok_ac

    both_default = t_abc & t_bdc
    both_flipped = ~both_default & t_abd & t_adc
    single = ~both_default & ~both_flipped

    e_abc = both_default | (single & t_abc)
    e_bdc = both_default | (single & ~t_abc & t_bdc)
    e_abd = both_flipped | (single & ~t_abc & ~t_bdc & t_abd)
    e_adc = both_flipped | (single & ~t_abc & ~t_bdc & ~t_abd & t_adc)

    faces = []
    for mask, tri in (
        (e_abc, (ia, ib, ic)),
        (e_bdc, (ib, id_, ic)),
        (e_abd, (ia, ib, id_)),
        (e_adc, (ia, id_, ic)),
    ):
        if mask.any():
            faces.append(np.stack([t[mask] for t in tri], axis=1))
    if not faces:
        raise EmptyMesh("no triangle survives the validity and jump tests")
    face_arr = np.concatenate(faces).astype(np.int64)
    # row-major quad order regardless of which emission bucket produced them
    order = np.lexsort((face_arr[:, 2], face_arr[:, 1], face_arr[:, 0]))
    face_arr = face_arr[order]
    return SurfaceMesh(
        vertices=cloud.points,
        faces=face_arr,
        vertex_pixels=cloud.pixels,
        pixel_index=cloud.pixel_index,
    )


def mesh_to_graph(mesh: SurfaceMesh) -> SurfaceGraph:
    """One undirected edge per unique face edge, weighted by Euclid mm."""
    f = mesh.faces
    raw = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [0, 2]]])
    raw.sort(axis=1)
    edges = np.unique(raw, axis=0)
    delta = mesh.vertices[edges[:, 0]] - mesh.vertices[edges[:, 1]]
    weights = np.linalg.norm(delta, axis=1)
    return SurfaceGraph(n_vertices=mesh.n_vertices, edges=edges, weights=weights)


def export_mesh(mesh: SurfaceMesh, path: str | Path) -> None:
    """Write a Wavefront OBJ (mm coordinates, 6 decimal places)."""
    if mesh.n_faces == 0:
        raise EmptyMesh("refusing to export a mesh with no faces")
    lines = []
    for x, y, z in mesh.vertices:
        lines.append(f"v {x:.6f} {y:.6f} {z:.6f}")
    for i, j, k in mesh.faces + 1:
        lines.append(f"f {i} {j} {k}")
    try:
        Path(path).write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_obj(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Parse v/f lines of an OBJ file (triangles only)."""
    vertices, faces = [], []
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    for line in text.splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            vertices.append([float(p) for p in parts[1:4]])
        elif parts[0] == "f":
            faces.append([int(p.split("/")[0]) - 1 for p in parts[1:4]])
    return np.asarray(vertices, dtype=np.float64), np.asarray(faces, dtype=np.int64)


def export_xyz(cloud: PointCloud, path: str | Path) -> None:
    """ASCII XYZ dump, one 'x y z' mm triple per line."""
    lines = [f"{x:.6f} {y:.6f} {z:.6f}" for x, y, z in cloud.points]
    try:
        Path(path).write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
