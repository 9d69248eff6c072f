#!/usr/bin/env python
"""
Outcome maps over collision energy and initial transverse offset.

Each cell runs one classified trajectory. Cells are independent and are evaluated
in a process pool with results placed by cell index, so maps are identical for
any worker count.
"""

import logging
from dataclasses import asdict, dataclass, field
from multiprocessing import Pool
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from src.chaos.fractal import boundary_density
from src.scattering.geodesic import (
    OUTCOME_LABELS,
    IntegrationOptions,
    initial_state,
    integrate,
)
from src.scattering.surfaces import PotentialSurface
from src.scattering.system import MomentumField
from src.utils.errors import DomainError, ThreeBodyError

logger = logging.getLogger(__name__)

GRAY_LEVELS = {"reflect": 0, "rearrange": 255, "dissociate": 64, "trapped": 128, "failed": 32}
FAILED = OUTCOME_LABELS.index("failed")

Resolution = Union[int, Tuple[int, int]]


@dataclass(eq=False)
class OutcomeMap:
    """
    Outcome labels on an (E_k, x2_0) grid.

    ``codes[i, j]`` indexes OUTCOME_LABELS for offset ``x2_axis[i]`` and energy
    ``e_axis[j]``.
    """

    e_axis: np.ndarray
    x2_axis: np.ndarray
    codes: np.ndarray
    resonant: np.ndarray
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.codes.shape

    @property
    def labels(self) -> np.ndarray:
        return np.array(OUTCOME_LABELS, dtype=object)[self.codes]

    @property
    def e_range(self) -> Tuple[float, float]:
        return float(self.e_axis[0]), float(self.e_axis[-1])

    @property
    def x2_range(self) -> Tuple[float, float]:
        return float(self.x2_axis[0]), float(self.x2_axis[-1])

    def counts(self) -> Dict[str, int]:
        return {label: int(np.sum(self.codes == i)) for i, label in enumerate(OUTCOME_LABELS)}

    def to_image(self) -> np.ndarray:
        """8-bit gray image, one pixel per cell, rows following x2_axis."""
        lut = np.array([GRAY_LEVELS[label] for label in OUTCOME_LABELS], dtype=np.uint8)
        return lut[self.codes]

    def to_frame(self) -> pd.DataFrame:
        e, x2 = np.meshgrid(self.e_axis, self.x2_axis)
        return pd.DataFrame(
            {
                "energy": e.ravel(),
                "x2_0": x2.ravel(),
                "label": self.labels.ravel(),
                "resonant": self.resonant.ravel(),
            }
        )

    def sidecar(self) -> Dict[str, Any]:
        """JSON-ready description of axes, gray levels and run metadata."""
        return {
            "e_axis": self.e_axis.tolist(),
            "x2_axis": self.x2_axis.tolist(),
            "shape": list(self.shape),
            "gray_levels": GRAY_LEVELS,
            "counts": self.counts(),
            "boundary_density": boundary_density(self.codes),
            "metadata": self.metadata,
        }


_WORKER: Dict[str, Any] = {}


def _init_worker(surface: PotentialSurface, opts: IntegrationOptions, radius: Optional[float]):
    _WORKER.update({"surface": surface, "opts": opts, "radius": radius})


def _run_cell(task: Tuple[int, float, float]) -> Tuple[int, int, bool]:
    index, energy, x2_0 = task
    surface = _WORKER["surface"]
    momentum_field = MomentumField(surface, energy, surface.mu0)
    try:
        ic = initial_state(momentum_field, x2_0, _WORKER["radius"])
        traj = integrate(momentum_field, ic, _WORKER["opts"])
    except ThreeBodyError as e:
        logger.debug(f"Cell {index} (E={energy:.6g}, x2={x2_0:.6g}) failed: {e}")
        return index, FAILED, False
    outcome = traj.outcome
    return index, OUTCOME_LABELS.index(outcome.label), bool(outcome.resonance_flag)


def _resolution(resolution: Resolution) -> Tuple[int, int]:
    n_e, n_x2 = (resolution, resolution) if isinstance(resolution, int) else resolution
    if n_e < 1 or n_x2 < 1:
        raise DomainError(f"map resolution must be positive, got {resolution}")
    return int(n_e), int(n_x2)


def _check_ranges(surface: PotentialSurface, e_range, x2_range) -> None:
    if e_range[0] > e_range[1] or x2_range[0] > x2_range[1]:
        raise DomainError(f"map ranges must be ordered, got {e_range} and {x2_range}")
    if e_range[0] <= 0:
        raise DomainError(f"collision energies must be positive, got {e_range}")


def outcome_map(
    surface: PotentialSurface,
    e_range: Tuple[float, float],
    x2_range: Tuple[float, float],
    resolution: Resolution,
    opts: Optional[IntegrationOptions] = None,
    threads: int = 1,
    radius: Optional[float] = None,
    progress: bool = False,
    metadata: Optional[Dict[str, Any]] = None,
) -> OutcomeMap:
    """
    Classify one trajectory per grid cell.

    Args:
        surface: The potential surface
        e_range: (min, max) collision energy in eV
        x2_range: (min, max) initial transverse offset
        resolution: Cells per axis, or (n_energy, n_x2)
        opts: Integration options shared by all cells
        threads: Worker processes
        radius: Start distance along the (in) channel (asymptotic radius by default)
        progress: Show a progress bar
        metadata: Extra entries recorded on the map

    Returns:
        OutcomeMap: Complete grid; failed cells carry the "failed" label
    """
    opts = opts or IntegrationOptions()
    _check_ranges(surface, e_range, x2_range)
    n_e, n_x2 = _resolution(resolution)
    e_axis = np.linspace(e_range[0], e_range[1], n_e)
    x2_axis = np.linspace(x2_range[0], x2_range[1], n_x2)
    tasks = [
        (i * n_e + j, float(e_axis[j]), float(x2_axis[i]))
        for i in range(n_x2)
        for j in range(n_e)
    ]
    codes = np.full(n_x2 * n_e, -1, dtype=np.int8)
    resonant = np.zeros(n_x2 * n_e, dtype=bool)

    logger.info(f"Computing {n_e}x{n_x2} outcome map on {threads} worker(s)")
    bar = tqdm(total=len(tasks), desc="Outcome map", disable=not progress)
    if threads <= 1:
        _init_worker(surface, opts, radius)
        results = map(_run_cell, tasks)
        for index, code, flag in results:
            codes[index], resonant[index] = code, flag
            bar.update()
    else:
        chunk = max(1, len(tasks) // (threads * 8))
        with Pool(threads, initializer=_init_worker, initargs=(surface, opts, radius)) as pool:
            for index, code, flag in pool.imap_unordered(_run_cell, tasks, chunksize=chunk):
                codes[index], resonant[index] = code, flag
                bar.update()
    bar.close()

    info = {
        "surface": surface.name,
        "e_range": list(e_range),
        "x2_range": list(x2_range),
        "resolution": [n_e, n_x2],
        "radius": radius,
        "options": asdict(opts),
    }
    info.update(metadata or {})
    shape = (n_x2, n_e)
    result = OutcomeMap(e_axis, x2_axis, codes.reshape(shape), resonant.reshape(shape), info)
    logger.info(f"Outcome map done: {result.counts()}")
    return result


def zoom_window(
    parent: OutcomeMap, center: Tuple[float, float], factor: float
) -> Tuple[Tuple[float, float], Tuple[float, float]]:
    """
    Sub-window of ``parent`` shrunk by ``factor`` around ``center`` = (E, x2).

    The window is shifted to stay inside the parent map.

    Raises:
        DomainError: If factor < 2 or the center lies outside the parent map
    """
    if factor < 2:
        raise DomainError(f"zoom factor must be at least 2, got {factor}")
    (e_lo, e_hi), (x_lo, x_hi) = parent.e_range, parent.x2_range
    e_c, x_c = center
    if not (e_lo <= e_c <= e_hi and x_lo <= x_c <= x_hi):
        raise DomainError(f"zoom center {center} lies outside the parent map")

    def window(lo: float, hi: float, c: float) -> Tuple[float, float]:
        half = 0.5 * (hi - lo) / factor
        start = min(max(c - half, lo), hi - 2.0 * half)
        return start, start + 2.0 * half

    return window(e_lo, e_hi, e_c), window(x_lo, x_hi, x_c)


def self_similarity_zoom(
    parent: OutcomeMap,
    surface: PotentialSurface,
    center: Tuple[float, float],
    factor: float,
    opts: Optional[IntegrationOptions] = None,
    threads: int = 1,
    progress: bool = False,
) -> OutcomeMap:
    """
    Recompute a zoomed sub-region of a map at the parent's resolution.

    Args:
        parent: The parent map
        surface: Surface the parent was computed on
        center: (E, x2) center of the zoom
        factor: Linear magnification, at least 2
        opts: Integration options (default: those recorded on the parent)
        threads: Worker processes
        progress: Show a progress bar

    Returns:
        OutcomeMap: The recomputed sub-map
    """
    e_range, x2_range = zoom_window(parent, center, factor)
    if opts is None:
        recorded = parent.metadata.get("options")
        opts = IntegrationOptions(**recorded) if recorded else IntegrationOptions()
    n_x2, n_e = parent.shape
    child = outcome_map(
        surface,
        e_range,
        x2_range,
        (n_e, n_x2),
        opts,
        threads=threads,
        radius=parent.metadata.get("radius"),
        progress=progress,
        metadata={"zoom_center": list(center), "zoom_factor": factor},
    )
    logger.info(
        f"Zoom x{factor}: boundary density {boundary_density(child.codes):.4f} "
        f"(parent {boundary_density(parent.codes):.4f})"
    )
    return child


def map_family(
    surface: PotentialSurface,
    e_range: Tuple[float, float],
    x2_range: Tuple[float, float],
    resolutions: List[int],
    opts: Optional[IntegrationOptions] = None,
    threads: int = 1,
) -> List[OutcomeMap]:
    """Same window at several resolutions, for boundary_scaling."""
    return [outcome_map(surface, e_range, x2_range, n, opts, threads) for n in resolutions]
