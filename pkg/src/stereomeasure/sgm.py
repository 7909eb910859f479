"""Semi-global stereo matching with a census/Hamming cost.

Pipeline: census transform -> per-disparity Hamming cost volume -> dynamic
programming aggregation along 4 or 8 scanline directions -> winner-take-all
with uniqueness test and parabolic subpixel refinement -> left/right
consistency check.

Costs are small integers throughout: the census descriptor has at most 64
bits, so uint8 holds a matching cost and int32 the aggregated sums.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, WindowTooLarge
from .images import INVALID, DisparityMap

_BIG = np.int32(1 << 28)

# aggregation direction sets as (du, dv) steps in image coordinates
DIRECTIONS_4 = ((1, 0), (-1, 0), (0, 1), (0, -1))
DIRECTIONS_8 = DIRECTIONS_4 + ((1, 1), (-1, -1), (1, -1), (-1, 1))


@dataclass(frozen=True)
class SgmParams:
    max_disparity: int = 128
    census_window: tuple[int, int] = (5, 5)  # (height, width), both odd
    p1: int = 6
    p2: int = 96
    num_paths: int = 8
    uniqueness_ratio: float = 0.95
    lr_threshold: float = 1.0

    def __post_init__(self):
        if self.max_disparity < 1:
            raise ValueError("max_disparity must be >= 1")
        if not (0 < self.p1 < self.p2):
            raise ValueError("penalties must satisfy 0 < p1 < p2")
        wh, ww = self.census_window
        if wh < 3 or ww < 3 or wh % 2 == 0 or ww % 2 == 0:
            raise ValueError("census window dims must be odd and >= 3")
        if self.num_paths not in (4, 8):
            raise ValueError("num_paths must be 4 or 8")

    @property
    def directions(self) -> tuple[tuple[int, int], ...]:
        return DIRECTIONS_8 if self.num_paths == 8 else DIRECTIONS_4

    @property
    def census_bits(self) -> int:
        wh, ww = self.census_window
        return wh * ww - 1


def census_transform(img: np.ndarray, window: tuple[int, int] = (5, 5)) -> np.ndarray:
    """Per-pixel census descriptor: one bit per neighbor, set iff the
    neighbor is darker than the center. Border pixels use edge-clamped
    neighborhoods. Returns a uint64 (height, width) array.
    """
    img = np.asarray(img)
    if img.ndim != 2:
        raise DimensionMismatch("census expects a 2-D grayscale image")
    h, w = img.shape
    wh, ww = window
    if wh > h or ww > w:
        raise WindowTooLarge(f"window {window} exceeds image {h}x{w}")
    if wh * ww - 1 > 64:
        raise WindowTooLarge("census descriptor limited to 64 bits")
    ry, rx = wh // 2, ww // 2
    padded = np.pad(img, ((ry, ry), (rx, rx)), mode="edge")
    center = img
    desc = np.zeros((h, w), dtype=np.uint64)
    for dy in range(wh):
        for dx in range(ww):
            if dy == ry and dx == rx:
                continue
            neighbor = padded[dy : dy + h, dx : dx + w]
            desc = (desc << np.uint64(1)) | (neighbor < center).astype(np.uint64)
    return desc


def matching_cost_volume(
    left: np.ndarray, right: np.ndarray, params: SgmParams
) -> np.ndarray:
    """Hamming-distance cost volume of shape (height, width, max_disparity).

    cost[v, u, d] compares the left descriptor at (u, v) with the right
    descriptor at (u - d, v); columns with u - d < 0 get the maximum cost.
    """
    left = np.asarray(left)
    right = np.asarray(right)
    if left.shape != right.shape:
        raise DimensionMismatch(
            f"left {left.shape} and right {right.shape} differ"
        )
    left_desc = census_transform(left, params.census_window)
    right_desc = census_transform(right, params.census_window)
    return _hamming_volume(left_desc, right_desc, params)


def _hamming_volume(
    left_desc: np.ndarray, right_desc: np.ndarray, params: SgmParams
) -> np.ndarray:
    h, w = left_desc.shape
    d_max = params.max_disparity
    max_cost = np.uint8(params.census_bits)
    volume = np.full((h, w, d_max), max_cost, dtype=np.uint8)
    for d in range(min(d_max, w)):
        xor = left_desc[:, d:] ^ right_desc[:, : w - d]
        volume[:, d:, d] = np.bitwise_count(xor).astype(np.uint8)
    return volume


def _relax(prev: np.ndarray, cost: np.ndarray, p1: int, p2: int) -> np.ndarray:
    """One step of the scanline recurrence for a batch of pixels.

    prev and cost have shape (n, d). Returns
    cost + min(prev[d], prev[d+-1]+p1, min_k prev[k]+p2) - min_k prev[k].
    """
    min_prev = prev.min(axis=1, keepdims=True)
    best = np.minimum(prev, min_prev + np.int32(p2))
    shifted = prev + np.int32(p1)
    np.minimum(best[:, 1:], shifted[:, :-1], out=best[:, 1:])
    np.minimum(best[:, :-1], shifted[:, 1:], out=best[:, :-1])
    return cost + best - min_prev


def aggregate_single_direction(
    volume: np.ndarray, du: int, dv: int, p1: int, p2: int
) -> np.ndarray:
    """Scanline DP along one direction. Path starts (no predecessor inside
    the image) cost exactly the raw matching cost.
    """
    h, w, d = volume.shape
    cost = volume.astype(np.int32)
    out = np.empty_like(cost)
    if dv == 0:
        # horizontal: sweep columns, all rows at once
        cols = range(w) if du > 0 else range(w - 1, -1, -1)
        prev = None
        for u in cols:
            if prev is None:
                out[:, u] = cost[:, u]
            else:
                out[:, u] = _relax(prev, cost[:, u], p1, p2)
            prev = out[:, u]
        return out
    # vertical or diagonal: sweep rows, shifting columns for diagonals
    rows = range(h) if dv > 0 else range(h - 1, -1, -1)
    prev = None
    for v in rows:
        if prev is None:
            out[v] = cost[v]
        else:
            if du == 0:
                pred = prev
                fresh = None
            elif du > 0:
                # predecessor is one column to the left
                pred = np.empty_like(prev)
                pred[1:] = prev[:-1]
                pred[0] = _BIG
                fresh = 0
            else:
                pred = np.empty_like(prev)
                pred[:-1] = prev[1:]
                pred[-1] = _BIG
                fresh = w - 1
            out[v] = _relax(pred, cost[v], p1, p2)
            if fresh is not None:
                out[v, fresh] = cost[v, fresh]
        prev = out[v]
    return out


def aggregate_costs(volume: np.ndarray, params: SgmParams) -> np.ndarray:
    """Sum of the scanline DP over all configured directions (int32)."""
    total = np.zeros(volume.shape, dtype=np.int32)
    for du, dv in params.directions:
        total += aggregate_single_direction(volume, du, dv, params.p1, params.p2)
    return total


def select_disparity(aggregated: np.ndarray, params: SgmParams) -> DisparityMap:
    """Winner-take-all with uniqueness rejection and parabolic subpixel fit.

    A pixel is kept only when the best cost beats the runner-up outside the
    immediate neighborhood {d*-1, d*, d*+1} by the uniqueness ratio. Subpixel
    refinement is skipped at the first/last disparity plane.
    """
    h, w, d_max = aggregated.shape
    d_star = np.argmin(aggregated, axis=2)
    best = np.take_along_axis(aggregated, d_star[..., None], axis=2)[..., 0]

    second = _runner_up_outside_neighborhood(aggregated, d_star)
    valid = best.astype(np.float64) < params.uniqueness_ratio * second

    disp = d_star.astype(np.float32)
    interior = (d_star > 0) & (d_star < d_max - 1)
    if interior.any():
        vi, ui = np.nonzero(interior)
        ds = d_star[vi, ui]
        c0 = aggregated[vi, ui, ds].astype(np.float64)
        cm = aggregated[vi, ui, ds - 1].astype(np.float64)
        cp = aggregated[vi, ui, ds + 1].astype(np.float64)
        denom = cm - 2.0 * c0 + cp
        offset = np.zeros_like(denom)
        nz = denom > 0
        offset[nz] = (cm[nz] - cp[nz]) / (2.0 * denom[nz])
        np.clip(offset, -0.5, 0.5, out=offset)
        disp[vi, ui] += offset.astype(np.float32)

    disp[~valid] = INVALID
    disp[disp <= 0] = INVALID
    return DisparityMap(disp)


def _runner_up_outside_neighborhood(
    aggregated: np.ndarray, d_star: np.ndarray
) -> np.ndarray:
    """Smallest cost over disparities not in {d*-1, d*, d*+1}, per pixel."""
    h, w, d_max = aggregated.shape
    if d_max <= 4:
        masked = aggregated.astype(np.int32, copy=True)
        planes = np.arange(d_max)[None, None, :]
        near = np.abs(planes - d_star[..., None]) <= 1
        masked[near] = _BIG
        second = masked.min(axis=2).astype(np.float64)
        second[second >= _BIG] = np.inf
        return second
    # the runner-up is always among the 4 globally smallest costs: at most
    # three of them can fall in the excluded neighborhood
    idx4 = np.argpartition(aggregated, 3, axis=2)[..., :4]
    val4 = np.take_along_axis(aggregated, idx4, axis=2).astype(np.float64)
    excluded = np.abs(idx4 - d_star[..., None]) <= 1
    val4[excluded] = np.inf
    return val4.min(axis=2)


def lr_consistency_check(
    left_disp: DisparityMap, right_disp: DisparityMap, threshold: float
) -> DisparityMap:
    """Reject occlusions and mismatches by cross-checking both views.

    A left pixel survives iff its right-view correspondence carries a
    disparity within ``threshold`` px of its own.
    """
    if left_disp.values.shape != right_disp.values.shape:
        raise DimensionMismatch("disparity maps differ in size")
    h, w = left_disp.values.shape
    dl = left_disp.values
    out = np.full((h, w), INVALID, dtype=np.float32)

    valid = np.isfinite(dl)
    vi, ui = np.nonzero(valid)
    ur = ui - np.round(dl[vi, ui]).astype(np.int64)
    in_range = (ur >= 0) & (ur < w)
    vi, ui, ur = vi[in_range], ui[in_range], ur[in_range]
    dr = right_disp.values[vi, ur]
    keep = np.isfinite(dr) & (np.abs(dl[vi, ui] - dr) <= threshold)
    out[vi[keep], ui[keep]] = dl[vi[keep], ui[keep]]
    return DisparityMap(out)


def estimate_disparity(
    left: np.ndarray, right: np.ndarray, params: SgmParams | None = None
) -> DisparityMap:
    """Full semi-global matcher for a rectified pair, left image reference.

    The right-view disparity used by the consistency check comes from a
    second full pass with the images swapped and mirrored.
    """
    params = params or SgmParams()
    left = np.asarray(left)
    right = np.asarray(right)
    if left.shape != right.shape:
        raise DimensionMismatch(
            f"left {left.shape} and right {right.shape} differ"
        )

    left_disp = _single_pass(left, right, params)
    # mirrored pass computes the right-reference disparity
    mirrored = _single_pass(right[:, ::-1], left[:, ::-1], params)
    right_disp = DisparityMap(mirrored.values[:, ::-1].copy())
    return lr_consistency_check(left_disp, right_disp, params.lr_threshold)


def _single_pass(
    reference: np.ndarray, match: np.ndarray, params: SgmParams
) -> DisparityMap:
    volume = matching_cost_volume(reference, match, params)
    aggregated = aggregate_costs(volume, params)
    return select_disparity(aggregated, params)
