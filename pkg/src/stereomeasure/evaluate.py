"""Benchmark harness: run the pipeline over synthetic scenes and score it.

For every (scene, estimator, trial) the harness measures each marker pair
in direct and on-surface mode, perturbing the selected pixels by a uniform
jitter that models human clicking (0 = exact selection). Signed errors
against the scene ground truth aggregate into MAE, the standard deviation
of the signed error, and the maximum absolute error per table cell.

Failed trials (any pipeline error) are excluded from the statistics and
counted separately.
"""

from __future__ import annotations

import csv
import io
import json
import math
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .calibration import PixelPoint, build_q
from .errors import MalformedFile, MissingField, StereoMeasureError
from .images import write_pfm, import_disparity
from .measure import MeasurementContext, SplineParams, measure_pair
from .scenes import Scene, SceneSpec, generate_scene, load_scene_spec, spec_from_json
from .sgm import SgmParams, estimate_disparity
from .surface import mesh_to_graph, reproject_map, triangulate_grid

ESTIMATORS = ("ground_truth", "sgm", "imported")
MODES = ("direct", "surface_basic", "surface_spline")

CSV_COLUMNS = ("scene", "estimator", "mode", "trial", "gt_mm", "measured_mm",
               "error_mm", "status")


@dataclass(frozen=True)
class EvalConfig:
    scenes: tuple[SceneSpec, ...]
    estimators: tuple[str, ...] = ("ground_truth",)
    trials: int = 1
    selection_jitter_px: float = 0.0
    seed: int = 0
    vary_texture: bool = False
    sgm: SgmParams = SgmParams()
    jump_threshold: float = 1.0
    search_radius: float = 5.0
    spline: SplineParams = SplineParams()

    def __post_init__(self):
        if self.trials < 1:
            raise MalformedFile("trials must be >= 1")
        for estimator in self.estimators:
            if estimator not in ESTIMATORS:
                raise MalformedFile(f"unknown estimator {estimator!r}")


@dataclass
class EvalCell:
    errors: list[float] = field(default_factory=list)
    n_failed: int = 0

    @property
    def n(self) -> int:
        return len(self.errors)

    @property
    def mae(self) -> float:
        return float(np.mean(np.abs(self.errors))) if self.errors else math.nan

    @property
    def std(self) -> float:
        if len(self.errors) >= 2:
            return float(np.std(self.errors, ddof=1))
        return 0.0 if self.errors else math.nan

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.errors))) if self.errors else math.nan


@dataclass
class EvalReport:
    cells: dict[tuple[str, str, str], EvalCell]  # (measurement, estimator, mode)
    rows: list[dict]
    measurements: list[str]
    estimators: list[str]


def load_eval_config(path: str | Path) -> EvalConfig:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise MalformedFile(f"cannot read eval config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedFile(f"eval config is not valid JSON: {exc}") from exc
    return config_from_json(data, base_dir=Path(path).parent)


def config_from_json(data: dict, base_dir: Path | None = None) -> EvalConfig:
    if "scenes" not in data:
        raise MissingField("scenes")
    scenes = []
    for entry in data["scenes"]:
        if isinstance(entry, str):
            path = Path(entry)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            scenes.append(load_scene_spec(path))
        else:
            scenes.append(spec_from_json(entry))
    sgm = SgmParams(**data.get("sgm", {}))
    spline = SplineParams(**data.get("spline", {}))
    return EvalConfig(
        scenes=tuple(scenes),
        estimators=tuple(data.get("estimators", ["ground_truth"])),
        trials=int(data.get("trials", 1)),
        selection_jitter_px=float(data.get("selection_jitter_px", 0.0)),
        seed=int(data.get("seed", 0)),
        vary_texture=bool(data.get("vary_texture", False)),
        sgm=sgm,
        jump_threshold=float(data.get("jump_threshold", 1.0)),
        search_radius=float(data.get("search_radius", 5.0)),
        spline=spline,
    )


def _build_context(scene: Scene, estimator: str, config: EvalConfig,
                   workdir: Path) -> MeasurementContext:
    if estimator == "ground_truth":
        disp = scene.gt_disp
    elif estimator == "imported":
        pfm = workdir / f"{scene.spec.label}-{scene.spec.texture_seed}.pfm"
        write_pfm(scene.gt_disp.values, pfm)
        disp = import_disparity(pfm, scene.gt_disp.values.shape)
    elif estimator == "sgm":
        disp = estimate_disparity(scene.left, scene.right, config.sgm)
    else:
        raise MalformedFile(f"unknown estimator {estimator!r}")
    q = build_q(scene.spec.rig)
    cloud = reproject_map(disp, q)
    mesh = triangulate_grid(cloud, disp, config.jump_threshold)
    graph = mesh_to_graph(mesh)
    return MeasurementContext(q=q, disp=disp, mesh=mesh, graph=graph)


def run_eval(config: EvalConfig, threads: int = 1) -> EvalReport:
    """Execute the benchmark and aggregate per-cell statistics.

    Scene rendering and disparity estimation are shared across trials that
    use the same texture instance; those heavy steps may run on a thread
    pool. Rows come out in a fixed order regardless of the schedule.
    """
    scene_cache: dict[tuple[int, int], Scene] = {}
    jobs: list[tuple[int, str, int]] = []  # (scene_i, estimator, texture_seed)
    seen = set()
    for scene_i, spec in enumerate(config.scenes):
        for estimator in config.estimators:
            for trial in range(config.trials):
                seed = spec.texture_seed + (trial if config.vary_texture else 0)
                key = (scene_i, estimator, seed)
                if key not in seen:
                    seen.add(key)
                    jobs.append(key)
                if (scene_i, seed) not in scene_cache:
                    spec_t = spec if seed == spec.texture_seed else _reseed(spec, seed)
                    scene_cache[(scene_i, seed)] = generate_scene(spec_t)

    contexts: dict[tuple[int, str, int], MeasurementContext | StereoMeasureError] = {}
    with tempfile.TemporaryDirectory(prefix="stereomeasure-eval-") as tmp:
        workdir = Path(tmp)

        def build(key):
            scene_i, estimator, seed = key
            try:
                return key, _build_context(
                    scene_cache[(scene_i, seed)], estimator, config, workdir
                )
            except StereoMeasureError as exc:
                return key, exc

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                for key, ctx in pool.map(build, jobs):
                    contexts[key] = ctx
        else:
            for key in jobs:
                contexts[key] = build(key)[1]

    cells: dict[tuple[str, str, str], EvalCell] = {}
    rows: list[dict] = []
    measurements: list[str] = []
    for scene_i, spec in enumerate(config.scenes):
        for pair_i in range(len(spec.marker_pairs)):
            label = _measurement_label(spec, pair_i)
            if label not in measurements:
                measurements.append(label)

    for scene_i, spec in enumerate(config.scenes):
        for est_i, estimator in enumerate(config.estimators):
            for trial in range(config.trials):
                seed = spec.texture_seed + (trial if config.vary_texture else 0)
                scene = scene_cache[(scene_i, seed)]
                ctx = contexts[(scene_i, estimator, seed)]
                rng = np.random.default_rng(
                    [config.seed, scene_i, est_i, trial]
                )
                for pair_i, (ma, mb) in enumerate(scene.markers):
                    label = _measurement_label(spec, pair_i)
                    gt = {
                        "direct": scene.gt_direct_mm[pair_i],
                        "surface_basic": scene.gt_surface_mm[pair_i],
                        "surface_spline": scene.gt_surface_mm[pair_i],
                    }
                    jitter = config.selection_jitter_px
                    offsets = rng.uniform(-jitter, jitter, size=4) if jitter > 0 \
                        else np.zeros(4)
                    pa = _jittered(ma.pixel, offsets[0], offsets[1], spec)
                    pb = _jittered(mb.pixel, offsets[2], offsets[3], spec)
                    if isinstance(ctx, StereoMeasureError):
                        status, values = ctx.code, None
                    else:
                        try:
                            result = measure_pair(
                                ctx, pa, pb, mode="both",
                                spline_params=config.spline,
                                search_radius=config.search_radius,
                            )
                            status = "ok"
                            values = {
                                "direct": result.direct_mm,
                                "surface_basic": result.surface_basic_mm,
                                "surface_spline": result.surface_spline_mm,
                            }
                        except StereoMeasureError as exc:
                            status, values = exc.code, None
                    for mode in MODES:
                        cell = cells.setdefault(
                            (label, estimator, mode), EvalCell()
                        )
                        if values is None or values[mode] is None:
                            cell.n_failed += 1
                            rows.append({
                                "scene": label, "estimator": estimator,
                                "mode": mode, "trial": trial,
                                "gt_mm": gt[mode], "measured_mm": None,
                                "error_mm": None, "status": status,
                            })
                        else:
                            err = values[mode] - gt[mode]
                            cell.errors.append(err)
                            rows.append({
                                "scene": label, "estimator": estimator,
                                "mode": mode, "trial": trial,
                                "gt_mm": gt[mode], "measured_mm": values[mode],
                                "error_mm": err, "status": "ok",
                            })
    return EvalReport(
        cells=cells,
        rows=rows,
        measurements=measurements,
        estimators=list(config.estimators),
    )


def _reseed(spec: SceneSpec, seed: int) -> SceneSpec:
    return SceneSpec(
        kind=spec.kind,
        params=spec.params,
        marker_pairs=spec.marker_pairs,
        texture_seed=seed,
        texture=spec.texture,
        rig=spec.rig,
        snap_markers=spec.snap_markers,
        label=spec.label,
    )


def _measurement_label(spec: SceneSpec, pair_i: int) -> str:
    pair = spec.marker_pairs[pair_i]
    if pair.label and pair.label != spec.label:
        return f"{spec.label}[{pair.label}]"
    return spec.label


def _jittered(p: PixelPoint, du: float, dv: float, spec: SceneSpec) -> PixelPoint:
    u = min(max(p.u + du, 0.0), spec.rig.width - 1.0)
    v = min(max(p.v + dv, 0.0), spec.rig.height - 1.0)
    return PixelPoint(u, v)


def write_csv(report: EvalReport, path: str | Path) -> None:
    Path(path).write_text(render_csv(report))


def render_csv(report: EvalReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in report.rows:
        writer.writerow([
            row["scene"], row["estimator"], row["mode"], row["trial"],
            _fmt(row["gt_mm"]), _fmt(row["measured_mm"]),
            _fmt(row["error_mm"]), row["status"],
        ])
    return buf.getvalue()


def _fmt(value) -> str:
    return "" if value is None else f"{value:.6f}"


def format_report(report: EvalReport) -> str:
    """Two human-readable tables: direct distances per estimator, then
    on-surface basic vs spline per estimator."""
    lines = []
    lines.append("Direct measurements (mm)")
    header = ["Measurement"]
    for est in report.estimators:
        header += [f"{est} MAE±STD", f"{est} max"]
    table = [header]
    for m in report.measurements:
        row = [m]
        for est in report.estimators:
            cell = report.cells.get((m, est, "direct"))
            row += _cell_text(cell)
        table.append(row)
    lines += _layout(table)
    lines.append("")
    lines.append("On-surface measurements (mm)")
    header = ["Measurement"]
    for est in report.estimators:
        header += [
            f"{est} basic MAE±STD", f"{est} basic max",
            f"{est} spline MAE±STD", f"{est} spline max",
        ]
    table = [header]
    for m in report.measurements:
        row = [m]
        for est in report.estimators:
            row += _cell_text(report.cells.get((m, est, "surface_basic")))
            row += _cell_text(report.cells.get((m, est, "surface_spline")))
        table.append(row)
    lines += _layout(table)
    return "\n".join(lines)


def _cell_text(cell: EvalCell | None) -> list[str]:
    if cell is None or cell.n == 0:
        failed = f" ({cell.n_failed} failed)" if cell and cell.n_failed else ""
        return [f"-{failed}", "-"]
    text = f"{cell.mae:.2f}±{cell.std:.2f}"
    if cell.n_failed:
        text += f" ({cell.n_failed} failed)"
    return [text, f"{cell.max_abs:.2f}"]


def _layout(table: list[list[str]]) -> list[str]:
    widths = [max(len(row[i]) for row in table) for i in range(len(table[0]))]
    out = []
    for r, row in enumerate(table):
        out.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)))
        if r == 0:
            out.append("  ".join("-" * w for w in widths))
    return out
