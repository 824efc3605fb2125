"""Far traversability map: log-odds hazard belief fused from thresholded detections."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logit

from .errors import DomainError, ValidationError

log = logging.getLogger(__name__)


@dataclass(eq=False)
class FarTraversabilityMap:
    cells: np.ndarray
    origin: tuple[float, float] = (0.0, 0.0)
    cell_size: float = 0.5
    hazard_prob_threshold: float = 0.7
    l_min: float = -4.0
    l_max: float = 4.0
    ignored_updates: int = field(default=0, compare=False)

    def __post_init__(self):
        if not self.cell_size > 0:
            raise ValidationError("cell_size", "must be > 0")
        if not 0.0 < self.hazard_prob_threshold < 1.0:
            raise ValidationError("hazard_prob_threshold", "must lie strictly between 0 and 1")
        if not self.l_min < 0.0 < self.l_max:
            raise ValidationError("l_min", "clamp bounds must satisfy l_min < 0 < l_max")
        self.cells = np.clip(np.asarray(self.cells, dtype=float), self.l_min, self.l_max)

    @classmethod
    def empty(cls, shape: tuple[int, int], cell_size: float = 0.5, origin=(0.0, 0.0), **kw) -> FarTraversabilityMap:
        return cls(np.zeros(shape), (float(origin[0]), float(origin[1])), cell_size, **kw)

    @classmethod
    def for_terrain(cls, world, **kw) -> FarTraversabilityMap:
        return cls.empty(world.shape, world.cell_size, **kw)

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape

    def probability(self) -> np.ndarray:
        return expit(self.cells)

    def cell_of(self, position) -> tuple[int, int] | None:
        """(row, col) of the cell containing a world position, or None outside."""
        ix = math.floor((position[0] - self.origin[0]) / self.cell_size)
        iy = math.floor((position[1] - self.origin[1]) / self.cell_size)
        ny, nx = self.cells.shape
        if 0 <= ix < nx and 0 <= iy < ny:
            return iy, ix
        return None

    def cell_center(self, cell: tuple[int, int]) -> np.ndarray:
        iy, ix = cell
        return np.array([self.origin[0] + (ix + 0.5) * self.cell_size,
                         self.origin[1] + (iy + 0.5) * self.cell_size])

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        ny, nx = self.cells.shape
        return np.meshgrid(self.origin[0] + (np.arange(nx) + 0.5) * self.cell_size,
                           self.origin[1] + (np.arange(ny) + 0.5) * self.cell_size)

    def hazard_mask(self) -> np.ndarray:
        # compare in log-odds space; expit is monotone
        return self.cells >= float(logit(self.hazard_prob_threshold))

    def to_csv(self, path) -> None:
        np.savetxt(path, self.probability(), delimiter=",", fmt="%.6f")


def to_log_odds(p):
    return logit(p)


def to_probability(l):
    return expit(l)


def fuse_detection(tmap: FarTraversabilityMap, world_position, p_hit: float,
                   radius: float = 0.0) -> FarTraversabilityMap:
    """Add ``logit(p_hit)`` to the containing cell and every cell centred within ``radius``."""
    if not 0.0 < p_hit < 1.0:
        raise DomainError("p_hit must lie strictly between 0 and 1")
    home = tmap.cell_of(world_position)
    if home is None:
        tmap.ignored_updates += 1
        log.warning("detection at (%.2f, %.2f) outside the traversability map; ignored",
                    world_position[0], world_position[1])
        return tmap
    mask = np.zeros(tmap.cells.shape, dtype=bool)
    mask[home] = True
    if radius > 0:
        cs = tmap.cell_size
        ny, nx = tmap.cells.shape
        px, py = float(world_position[0]), float(world_position[1])
        reach = int(math.ceil(radius / cs)) + 1
        y0, y1 = max(home[0] - reach, 0), min(home[0] + reach + 1, ny)
        x0, x1 = max(home[1] - reach, 0), min(home[1] + reach + 1, nx)
        xs = tmap.origin[0] + (np.arange(x0, x1) + 0.5) * cs
        ys = tmap.origin[1] + (np.arange(y0, y1) + 0.5) * cs
        gx, gy = np.meshgrid(xs, ys)
        mask[y0:y1, x0:x1] |= (gx - px) ** 2 + (gy - py) ** 2 <= radius * radius
    tmap.cells[mask] = np.clip(tmap.cells[mask] + float(logit(p_hit)), tmap.l_min, tmap.l_max)
    return tmap


def decay(tmap: FarTraversabilityMap, dt: float, rate: float) -> FarTraversabilityMap:
    """Relax every cell toward zero log-odds by ``rate * dt`` without crossing zero."""
    if rate < 0 or dt < 0:
        raise DomainError("rate and dt must be >= 0")
    step = rate * dt
    if step > 0:
        c = tmap.cells
        tmap.cells = np.sign(c) * np.maximum(np.abs(c) - step, 0.0)
    return tmap


def corridor_hits(tmap: FarTraversabilityMap, path, half_width: float) -> tuple[np.ndarray, np.ndarray]:
    """Samples every ``cell_size`` along ``path`` and whether each sees a hazard cell.

    A sample is hit when some hazardous cell centre lies within ``half_width``.
    """
    s, pts = path.sample(tmap.cell_size)
    hits = np.zeros(len(s), dtype=bool)
    hazard = tmap.hazard_mask()
    if not hazard.any():
        return s, hits
    cy, cx = np.nonzero(hazard)
    hx = tmap.origin[0] + (cx + 0.5) * tmap.cell_size
    hy = tmap.origin[1] + (cy + 0.5) * tmap.cell_size
    # prune hazard cells that cannot reach any sample
    lo = pts.min(axis=0) - half_width
    hi = pts.max(axis=0) + half_width
    keep = (hx >= lo[0]) & (hx <= hi[0]) & (hy >= lo[1]) & (hy <= hi[1])
    if not keep.any():
        return s, hits
    hx, hy = hx[keep], hy[keep]
    r2 = half_width * half_width
    chunk = 512
    for start in range(0, len(s), chunk):
        p = pts[start:start + chunk]
        d2 = (p[:, 0, None] - hx[None, :]) ** 2 + (p[:, 1, None] - hy[None, :]) ** 2
        hits[start:start + chunk] = (d2 <= r2).any(axis=1)
    return s, hits


def query_corridor(tmap: FarTraversabilityMap, path, half_width: float) -> float | None:
    """Arc length to the first hazardous cell within ``half_width`` of the path, or None."""
    s, hits = corridor_hits(tmap, path, half_width)
    idx = np.flatnonzero(hits)
    return float(s[idx[0]]) if len(idx) else None
