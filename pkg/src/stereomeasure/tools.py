"""Instrument-mask point selection.

Online selection turns one or two binary tool masks into the measurement
pixel pair: per mask, the set pixel farthest from the mask centroid is taken
as the instrument tip. The farthest-point rule can latch onto the shaft end
when the shaft dominates the mask, so the debug payload always exposes the
centroid and both extremal candidates instead of silently correcting.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy import ndimage

from .calibration import PixelPoint
from .errors import DimensionMismatch, EmptyMask, InsufficientInstances
from .images import load_gray

# 4-connectivity for instance splitting
_STRUCTURE = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


def mask_from_array(arr: np.ndarray) -> np.ndarray:
    """Binary occupancy from any numeric array; nonzero means tool."""
    bits = np.asarray(arr) != 0
    if bits.ndim != 2:
        raise DimensionMismatch("mask must be 2-D")
    return bits


def import_masks(
    paths: list[str | Path], expected_shape: tuple[int, int] | None = None
) -> list[np.ndarray]:
    """Load 8-bit grayscale PNG masks; any nonzero pixel counts as tool."""
    masks = []
    for path in paths:
        bits = mask_from_array(load_gray(path))
        if expected_shape is not None and bits.shape != tuple(expected_shape):
            raise DimensionMismatch(
                f"mask {path} is {bits.shape[1]}x{bits.shape[0]}, session "
                f"expects {expected_shape[1]}x{expected_shape[0]}"
            )
        if not bits.any():
            raise EmptyMask(f"mask {path} has no set pixel")
        masks.append(bits)
    return masks


def centroid(mask: np.ndarray) -> tuple[float, float]:
    """Center of mass (u, v) of the set pixels."""
    vs, us = np.nonzero(mask)
    if len(vs) == 0:
        raise EmptyMask("cannot take the centroid of an empty mask")
    return float(us.mean()), float(vs.mean())


def tooltip(mask: np.ndarray) -> PixelPoint:
    """Set pixel farthest from the centroid; ties by smaller row, then
    smaller column."""
    vs, us = np.nonzero(mask)
    if len(vs) == 0:
        raise EmptyMask("cannot extract a tooltip from an empty mask")
    cu, cv = centroid(mask)
    d2 = (us - cu) ** 2 + (vs - cv) ** 2
    order = np.lexsort((us, vs, -d2))
    best = order[0]
    return PixelPoint(int(us[best]), int(vs[best]))


def split_instances(mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split a combined mask into the two largest 4-connected components.

    The component with the smaller centroid column becomes the first mask;
    size ties break by smaller centroid column, then row.
    """
    labels, count = ndimage.label(mask, structure=_STRUCTURE)
    if count < 2:
        raise InsufficientInstances(
            f"need at least 2 connected components, found {count}"
        )
    comps = []
    for lab in range(1, count + 1):
        bits = labels == lab
        cu, cv = centroid(bits)
        comps.append((int(bits.sum()), cu, cv, bits))
    comps.sort(key=lambda c: (-c[0], c[1], c[2]))
    chosen = comps[:2]
    chosen.sort(key=lambda c: (c[1], c[2]))
    return chosen[0][3], chosen[1][3]


def online_select(
    masks: list[np.ndarray],
) -> tuple[PixelPoint, PixelPoint]:
    """Tooltip pair from one combined mask or two per-instrument masks.

    The pair ordering is content-based: the mask with the leftmost centroid
    supplies the first point regardless of input order.
    """
    if len(masks) == 1:
        mask_a, mask_b = split_instances(masks[0])
    elif len(masks) == 2:
        for m in masks:
            if not m.any():
                raise EmptyMask("online selection received an empty mask")
        if masks[0].shape != masks[1].shape:
            raise DimensionMismatch("masks differ in size")
        mask_a, mask_b = masks
        if centroid(mask_a)[0] > centroid(mask_b)[0]:
            mask_a, mask_b = mask_b, mask_a
    else:
        raise InsufficientInstances(
            f"online selection needs 1 or 2 masks, got {len(masks)}"
        )
    return tooltip(mask_a), tooltip(mask_b)


def selection_debug(mask: np.ndarray) -> dict:
    """Centroid, tooltip, and both extremal candidates for one mask.

    The second candidate is the set pixel farthest from the tooltip: when
    the heuristic picked the shaft end, this is usually the actual tip.
    """
    tip = tooltip(mask)
    cu, cv = centroid(mask)
    vs, us = np.nonzero(mask)
    d2 = (us - tip.u) ** 2 + (vs - tip.v) ** 2
    order = np.lexsort((us, vs, -d2))
    far = order[0]
    return {
        "centroid": [cu, cv],
        "tooltip": [tip.u, tip.v],
        "candidates": [[tip.u, tip.v], [int(us[far]), int(vs[far])]],
    }
