#!/usr/bin/env python
"""
Boundary diagnostics for labelled parameter maps.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from src.utils.errors import DomainError, FitError

logger = logging.getLogger(__name__)

SATURATION_FRACTION = 0.5


def _codes(grid) -> np.ndarray:
    codes = getattr(grid, "codes", grid)
    codes = np.asarray(codes)
    if codes.ndim != 2:
        raise DomainError(f"label grid must be two-dimensional, got shape {codes.shape}")
    return codes


def boundary_cells(grid) -> np.ndarray:
    """
    Mark cells with at least one 4-neighbour carrying a different label.

    Args:
        grid: OutcomeMap or 2-D label array

    Returns:
        np.ndarray: Boolean mask of boundary cells
    """
    codes = _codes(grid)
    mask = np.zeros(codes.shape, dtype=bool)
    vertical = codes[1:, :] != codes[:-1, :]
    horizontal = codes[:, 1:] != codes[:, :-1]
    mask[1:, :] |= vertical
    mask[:-1, :] |= vertical
    mask[:, 1:] |= horizontal
    mask[:, :-1] |= horizontal
    return mask


def boundary_density(grid) -> float:
    """Fraction of cells on a label boundary."""
    mask = boundary_cells(grid)
    return float(mask.mean()) if mask.size else 0.0


@dataclass(frozen=True)
class BoxCountResult:
    """Box counts of boundary cells and the fitted log-log slope."""

    scales: List[int]
    counts: List[int]
    dimension: float
    fit_r2: float
    intercept: float
    boundary_fraction: float
    min_r2: float = 0.98
    meta: dict = field(default_factory=dict)

    @property
    def saturated(self) -> bool:
        return self.boundary_fraction > SATURATION_FRACTION

    @property
    def low_r2(self) -> bool:
        """True when the fit is poor or the boundary fills the map."""
        return self.fit_r2 < self.min_r2 or self.saturated

    def summary(self) -> dict:
        return {
            "scales": self.scales,
            "counts": self.counts,
            "dimension": self.dimension,
            "fit_r2": self.fit_r2,
            "boundary_fraction": self.boundary_fraction,
            "saturated": self.saturated,
            "low_r2": self.low_r2,
        }


def _default_scales(shape, base: int = 2) -> List[int]:
    largest = min(shape) // 4
    scales = []
    size = 1
    while size <= largest:
        scales.append(size)
        size *= base
    return scales[::-1]


def _count_boxes(mask: np.ndarray, size: int) -> int:
    rows = -(-mask.shape[0] // size)
    cols = -(-mask.shape[1] // size)
    padded = np.zeros((rows * size, cols * size), dtype=bool)
    padded[: mask.shape[0], : mask.shape[1]] = mask
    blocks = padded.reshape(rows, size, cols, size).any(axis=(1, 3))
    return int(blocks.sum())


def _linear_fit(x: np.ndarray, y: np.ndarray):
    slope, intercept = np.polyfit(x, y, 1)
    predicted = slope * x + intercept
    total = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum((y - predicted) ** 2)) / total if total > 0 else 1.0
    return float(slope), float(intercept), r2


def boundary_box_dimension(
    grid, scales: Optional[Sequence[int]] = None, min_r2: float = 0.98, base: int = 2
) -> BoxCountResult:
    """
    Box-counting dimension of the label boundary.

    A boundary that is self-similar under a scale ratio b is measured best with box
    sizes that are powers of b; other ratios alias against the construction.

    Args:
        grid: OutcomeMap or 2-D label array
        scales: Box sizes in cells (default powers of ``base`` up to a quarter of the map)
        min_r2: Fits below this r^2 are flagged
        base: Ratio between successive default box sizes

    Returns:
        BoxCountResult: Counts per scale and the fitted slope of log N against log(1/size)

    Raises:
        DomainError: If the map is smaller than four times the largest scale
        FitError: If fewer than three scales hold boundary boxes
    """
    codes = _codes(grid)
    mask = boundary_cells(codes)
    if base < 2:
        raise DomainError(f"box size ratio must be an integer of at least 2, got {base}")
    sizes = sorted(
        {int(s) for s in (scales or _default_scales(codes.shape, base))}, reverse=True
    )
    if not sizes or sizes[-1] < 1:
        raise DomainError(f"box sizes must be positive integers, got {scales}")
    if min(codes.shape) < 4 * sizes[0]:
        raise DomainError(
            f"map of shape {codes.shape} is too small for box size {sizes[0]} "
            f"(needs at least {4 * sizes[0]} cells per side)"
        )
    counts = [_count_boxes(mask, size) for size in sizes]
    usable = [(s, c) for s, c in zip(sizes, counts) if c > 0]
    if len(usable) < 3:
        raise FitError(f"only {len(usable)} box sizes contain boundary cells; need 3")

    x = np.log([1.0 / s for s, _ in usable])
    y = np.log([float(c) for _, c in usable])
    slope, intercept, r2 = _linear_fit(x, y)
    result = BoxCountResult(
        scales=sizes,
        counts=counts,
        dimension=slope,
        fit_r2=r2,
        intercept=intercept,
        boundary_fraction=float(mask.mean()),
        min_r2=min_r2,
        meta={} if scales else {"base": base},
    )
    if result.low_r2:
        logger.warning(
            f"Box-count fit flagged: dimension {slope:.3f}, r2 {r2:.4f}, "
            f"boundary fraction {result.boundary_fraction:.3f}"
        )
    else:
        logger.info(f"Box-count dimension {slope:.4f} (r2 {r2:.4f})")
    return result


def boundary_scaling(grids: Sequence, resolutions: Optional[Sequence[int]] = None) -> float:
    """
    Log-log slope of boundary-cell count against linear resolution.

    Smooth boundaries give a slope near 1, fractal ones a larger slope.

    Args:
        grids: Maps of the same parameter window at increasing resolution
        resolutions: Linear resolutions (default: number of columns of each grid)

    Returns:
        float: Fitted slope

    Raises:
        FitError: With fewer than two grids or no boundary
    """
    if len(grids) < 2:
        raise FitError("boundary scaling needs at least two resolutions")
    n = resolutions or [_codes(g).shape[1] for g in grids]
    counts = [int(boundary_cells(g).sum()) for g in grids]
    if min(counts) == 0:
        raise FitError("a map without boundary cells cannot be scaled")
    slope, _, _ = _linear_fit(np.log(np.asarray(n, dtype=float)), np.log(np.asarray(counts, float)))
    return slope


def cantor_grid(
    level: int, rows: Optional[int] = None, margin: Optional[int] = None
) -> np.ndarray:
    """
    Columns labelled by membership of the middle-third Cantor set.

    The boundary is the set of Cantor interval ends times a segment, of dimension
    1 + log 2 / log 3. Used to calibrate boundary_box_dimension.

    Args:
        level: Construction depth; the set spans 3**level columns
        rows: Number of rows (default 3**level)
        margin: Gap columns added on each side (default 3**(level - 2)). The margin gives
            the two outermost interval ends a neighbour to differ from and keeps boxes of
            size up to 3**(level - 2) aligned with the construction.

    Returns:
        np.ndarray: int8 label grid, 1 on the set and 0 elsewhere
    """
    if level < 0:
        raise DomainError(f"Cantor level must be non-negative, got {level}")
    width = 3**level
    keep = np.ones(width, dtype=bool)
    step = width
    while step > 1:
        third = step // 3
        for start in range(0, width, step):
            keep[start + third : start + 2 * third] = False
        step = third
    pad = 3 ** max(level - 2, 0) if margin is None else margin
    if pad < 0:
        raise DomainError(f"margin must be non-negative, got {pad}")
    row = np.concatenate([np.zeros(pad, dtype=bool), keep, np.zeros(pad, dtype=bool)])
    return np.tile(row.astype(np.int8), (rows or width, 1))
