"""Metric measurement on rectified stereo imagery.

Pipeline: disparity (semi-global matching or imported) -> point cloud ->
grid-triangulated surface mesh -> direct and on-surface distances, with
click-based and instrument-mask point selection, plus a synthetic
evaluation harness with analytic ground truth.
"""

from .calibration import (
    PixelPoint,
    ReprojectionMatrix,
    StereoRig,
    WorldPoint,
    build_q,
    load_calibration,
    project_point,
    reproject_pixel,
)
from .errors import StereoMeasureError
from .images import DisparityMap, import_disparity, load_gray, read_pfm, write_pfm
from .measure import (
    MeasurementContext,
    MeasurementResult,
    SplineParams,
    direct_distance,
    geodesic_path,
    measure_pair,
    nearest_vertex,
    spline_length,
)
from .scenes import (
    MarkerPair,
    SceneSpec,
    TextureParams,
    generate_scene,
    oracle_surface_length,
    preset_scene,
)
from .evaluate import EvalConfig, EvalReport, format_report, run_eval
from .sgm import SgmParams, estimate_disparity
from .surface import (
    PointCloud,
    SurfaceGraph,
    SurfaceMesh,
    export_mesh,
    mesh_to_graph,
    reproject_map,
    triangulate_grid,
)
from .tools import centroid, import_masks, online_select, split_instances, tooltip

__version__ = "0.1.0"

__all__ = [
    "DisparityMap",
    "EvalConfig",
    "EvalReport",
    "MarkerPair",
    "MeasurementContext",
    "MeasurementResult",
    "PixelPoint",
    "PointCloud",
    "ReprojectionMatrix",
    "SceneSpec",
    "SgmParams",
    "SplineParams",
    "StereoMeasureError",
    "StereoRig",
    "SurfaceGraph",
    "SurfaceMesh",
    "TextureParams",
    "WorldPoint",
    "build_q",
    "centroid",
    "direct_distance",
    "estimate_disparity",
    "export_mesh",
    "format_report",
    "generate_scene",
    "geodesic_path",
    "import_disparity",
    "import_masks",
    "load_calibration",
    "load_gray",
    "measure_pair",
    "mesh_to_graph",
    "nearest_vertex",
    "online_select",
    "oracle_surface_length",
    "preset_scene",
    "project_point",
    "read_pfm",
    "reproject_map",
    "reproject_pixel",
    "run_eval",
    "spline_length",
    "split_instances",
    "tooltip",
    "triangulate_grid",
    "write_pfm",
]
