"""Procedural labelled terrain: fractal heightmap, analytic hazards, ground classes."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path as FsPath

import numpy as np

from .errors import BoundsError, ValidationError


class Label(enum.IntEnum):
    SAFE = 0
    CRATER = 1
    BOULDER = 2
    SHADOW = 3
    SLOPE = 4

    @property
    def title(self) -> str:
        return self.name.capitalize()


class HazardKind(str, enum.Enum):
    BOULDER = "Boulder"
    CRATER = "Crater"
    DUNE = "Dune"


@dataclass(frozen=True)
class TerrainParams:
    size_cells: int | tuple[int, int] = 64
    cell_size: float = 0.5
    roughness: float = 0.5
    amplitude: float = 1.0
    rock_density: float = 0.0
    crater_density: float = 0.0
    sun_azimuth: float = 135.0
    sun_elevation: float = 45.0
    slope_threshold: float = 15.0
    seed: int = 0

    def __post_init__(self):
        size = self.size_cells
        if isinstance(size, list):
            size = tuple(size)
            object.__setattr__(self, "size_cells", size)
        dims = (size,) if isinstance(size, int) else size
        if len(dims) not in (1, 2) or any(not isinstance(d, (int, np.integer)) or d < 8 for d in dims):
            raise ValidationError("size_cells", "must be an integer >= 8 (or a pair of them)")
        if not self.cell_size > 0:
            raise ValidationError("cell_size", "must be > 0")
        if not 0.0 <= self.roughness <= 1.0:
            raise ValidationError("roughness", "must lie in [0, 1]")
        if self.amplitude < 0:
            raise ValidationError("amplitude", "must be >= 0")
        if self.rock_density < 0:
            raise ValidationError("rock_density", "must be >= 0")
        if self.crater_density < 0:
            raise ValidationError("crater_density", "must be >= 0")
        if not 0.0 <= self.sun_elevation <= 90.0:
            raise ValidationError("sun_elevation", "must lie in [0, 90] degrees")
        if not self.slope_threshold > 0:
            raise ValidationError("slope_threshold", "must be > 0")

    @property
    def shape(self) -> tuple[int, int]:
        """(rows, cols) = (ny, nx)."""
        if isinstance(self.size_cells, tuple):
            nx, ny = self.size_cells
            return int(ny), int(nx)
        return int(self.size_cells), int(self.size_cells)

    @property
    def extent(self) -> tuple[float, float]:
        ny, nx = self.shape
        return nx * self.cell_size, ny * self.cell_size


@dataclass(frozen=True)
class HazardSpec:
    center: tuple[float, float]
    radius: float
    height: float
    kind: HazardKind = HazardKind.BOULDER

    def __post_init__(self):
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "kind", HazardKind(self.kind))
        if not self.radius > 0:
            raise ValidationError("radius", "must be > 0")
        if self.kind is HazardKind.BOULDER and not self.height > 0:
            raise ValidationError("height", "boulder height must be > 0")
        if self.kind is HazardKind.CRATER and not self.height < 0:
            raise ValidationError("height", "crater height must be < 0 (a depth)")

    @property
    def is_obstacle(self) -> bool:
        return self.kind is not HazardKind.DUNE

    def contains(self, x: float, y: float) -> bool:
        return math.hypot(x - self.center[0], y - self.center[1]) < self.radius


@dataclass(frozen=True, eq=False)
class TerrainGrid:
    heights: np.ndarray
    labels: np.ndarray
    hazards: tuple[HazardSpec, ...]
    params: TerrainParams

    def __post_init__(self):
        if self.heights.shape != self.labels.shape:
            raise ValueError("heights and labels must share dimensions")

    @property
    def cell_size(self) -> float:
        return self.params.cell_size

    @property
    def shape(self) -> tuple[int, int]:
        return self.heights.shape

    @property
    def extent(self) -> tuple[float, float]:
        ny, nx = self.heights.shape
        return nx * self.cell_size, ny * self.cell_size

    def in_bounds(self, x: float, y: float) -> bool:
        w, h = self.extent
        return 0.0 <= x <= w and 0.0 <= y <= h

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        ny, nx = self.heights.shape
        cs = self.cell_size
        return np.meshgrid((np.arange(nx) + 0.5) * cs, (np.arange(ny) + 0.5) * cs)

    @cached_property
    def gradient(self) -> tuple[np.ndarray, np.ndarray]:
        """(dh/dx, dh/dy) per cell by central differences."""
        gy, gx = np.gradient(self.heights, self.cell_size)
        return gx, gy

    def obstacles(self) -> list[HazardSpec]:
        return [h for h in self.hazards if h.is_obstacle]

    def export_csv(self, heights_path, labels_path) -> None:
        np.savetxt(heights_path, self.heights, delimiter=",", fmt="%.6f")
        with open(labels_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            for row in self.labels:
                writer.writerow(Label(v).title for v in row)


def midpoint_displacement(shape: tuple[int, int], roughness: float, rng: np.random.Generator) -> np.ndarray:
    """Diamond-square heightmap cropped to ``shape``; unscaled, arbitrary units.

    Displacement amplitude is multiplied by ``roughness`` at each halving of the
    step, so roughness acts as the fractal persistence.
    """
    need = max(shape) - 1
    k = max(int(math.ceil(math.log2(max(need, 1)))), 1)
    n = 2**k + 1
    h = np.zeros((n, n))
    h[:: n - 1, :: n - 1] = rng.normal(0.0, 1.0, (2, 2))
    step, scale = n - 1, roughness
    while step > 1:
        half = step // 2
        corners = (h[0:-1:step, 0:-1:step] + h[step::step, 0:-1:step]
                   + h[0:-1:step, step::step] + h[step::step, step::step])
        h[half::step, half::step] = corners / 4.0 + rng.normal(0.0, scale, corners.shape)

        padded = np.pad(h, half, constant_values=np.nan)
        for r0, c0 in ((0, half), (half, 0)):
            rows = np.arange(r0, n, step)
            cols = np.arange(c0, n, step)
            rr, cc = np.meshgrid(rows + half, cols + half, indexing="ij")
            nbrs = np.stack([padded[rr - half, cc], padded[rr + half, cc],
                             padded[rr, cc - half], padded[rr, cc + half]])
            mean = np.nanmean(nbrs, axis=0)
            h[np.ix_(rows, cols)] = mean + rng.normal(0.0, scale, mean.shape)
        step, scale = half, scale * roughness
    return h[: shape[0], : shape[1]]


def hazard_profile(hazard: HazardSpec, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Radially smooth bump (or pit) with zero slope at the footprint edge."""
    r2 = ((xs - hazard.center[0]) ** 2 + (ys - hazard.center[1]) ** 2) / hazard.radius**2
    return np.where(r2 < 1.0, hazard.height * (1.0 - r2) ** 2, 0.0)


def sample_hazards(params: TerrainParams, rng: np.random.Generator) -> list[HazardSpec]:
    """Poisson hazard field at the configured per-100 m^2 densities."""
    w, h = params.extent
    area_units = w * h / 100.0
    hazards = []
    for _ in range(rng.poisson(params.rock_density * area_units)):
        x, y = rng.uniform(0.0, w), rng.uniform(0.0, h)
        radius = rng.uniform(0.3, 1.0)
        hazards.append(HazardSpec((x, y), radius, radius * rng.uniform(0.5, 1.0), HazardKind.BOULDER))
    for _ in range(rng.poisson(params.crater_density * area_units)):
        x, y = rng.uniform(0.0, w), rng.uniform(0.0, h)
        radius = rng.uniform(0.75, 2.5)
        hazards.append(HazardSpec((x, y), radius, -0.3 * radius, HazardKind.CRATER))
    return hazards


def bilinear(field: np.ndarray, fx, fy):
    """Interpolate ``field`` at fractional (col, row) indices inside the grid."""
    ny, nx = field.shape
    fx = np.asarray(fx, dtype=float)
    fy = np.asarray(fy, dtype=float)
    x0 = np.clip(np.floor(fx).astype(int), 0, max(nx - 2, 0))
    y0 = np.clip(np.floor(fy).astype(int), 0, max(ny - 2, 0))
    tx = fx - x0
    ty = fy - y0
    x1 = np.minimum(x0 + 1, nx - 1)
    y1 = np.minimum(y0 + 1, ny - 1)
    top = field[y0, x0] * (1 - tx) + field[y0, x1] * tx
    bot = field[y1, x0] * (1 - tx) + field[y1, x1] * tx
    return top * (1 - ty) + bot * ty


def sun_direction(azimuth_deg: float) -> tuple[float, float]:
    """Unit (x, y) vector toward the sun; azimuth is clockwise from +y (north)."""
    az = math.radians(azimuth_deg)
    return math.sin(az), math.cos(az)


def shadow_mask(heights: np.ndarray, cell_size: float, azimuth: float, elevation: float) -> np.ndarray:
    """Cells whose sun-ward ray is blocked by the heightmap.

    Rays are marched one cell length at a time from every cell centre toward
    the sun; a cell is shadowed if any sample rises above the sun line.
    """
    ny, nx = heights.shape
    shadow = np.zeros(heights.shape, dtype=bool)
    if elevation >= 90.0:
        return shadow
    relief = float(heights.max() - heights.min())
    if relief <= 0.0:
        return shadow
    dx, dy = sun_direction(azimuth)
    rise = math.tan(math.radians(elevation))
    rows, cols = np.mgrid[0:ny, 0:nx]
    fx0 = cols.ravel().astype(float)
    fy0 = rows.ravel().astype(float)
    h0 = heights.ravel()
    blocked = np.zeros(h0.shape, dtype=bool)
    max_steps = int(math.ceil(math.hypot(nx, ny))) + 1
    for k in range(1, max_steps + 1):
        if rise * k * cell_size > relief:
            break
        fx = fx0 + k * dx
        fy = fy0 + k * dy
        inside = (fx >= 0) & (fx <= nx - 1) & (fy >= 0) & (fy <= ny - 1)
        if not inside.any():
            break
        hs = bilinear(heights, np.where(inside, fx, 0.0), np.where(inside, fy, 0.0))
        blocked |= inside & (hs > h0 + rise * k * cell_size + 1e-9)
    shadow[:] = blocked.reshape(heights.shape)
    return shadow


def slope_degrees(heights: np.ndarray, cell_size: float) -> np.ndarray:
    gy, gx = np.gradient(heights, cell_size)
    return np.degrees(np.arctan(np.hypot(gx, gy)))


def classify_cells(heights: np.ndarray, hazards, params: TerrainParams) -> np.ndarray:
    """Per-cell ground class with priority Boulder > Crater > Shadow > Slope > Safe."""
    ny, nx = heights.shape
    cs = params.cell_size
    labels = np.full(heights.shape, Label.SAFE, dtype=np.int8)
    if ny >= 2 and nx >= 2:
        labels[slope_degrees(heights, cs) > params.slope_threshold] = Label.SLOPE
    labels[shadow_mask(heights, cs, params.sun_azimuth, params.sun_elevation)] = Label.SHADOW
    xs, ys = np.meshgrid((np.arange(nx) + 0.5) * cs, (np.arange(ny) + 0.5) * cs)
    for kind, label in ((HazardKind.CRATER, Label.CRATER), (HazardKind.BOULDER, Label.BOULDER)):
        for hz in hazards:
            if hz.kind is kind:
                inside = (xs - hz.center[0]) ** 2 + (ys - hz.center[1]) ** 2 <= hz.radius**2
                labels[inside] = label
    return labels


def generate_terrain(params: TerrainParams, extra_hazards=()) -> TerrainGrid:
    """Deterministic labelled terrain for ``params`` plus any explicitly placed hazards."""
    height_rng, hazard_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(params.seed).spawn(2))
    shape = params.shape
    heights = np.zeros(shape)
    if params.amplitude > 0:
        raw = midpoint_displacement(shape, params.roughness, height_rng)
        span = float(raw.max() - raw.min())
        if span > 0:
            heights = (raw - raw.min()) / span * params.amplitude
    hazards = sample_hazards(params, hazard_rng) + [HazardSpec(**h) if isinstance(h, dict) else h for h in extra_hazards]
    ny, nx = shape
    cs = params.cell_size
    xs, ys = np.meshgrid((np.arange(nx) + 0.5) * cs, (np.arange(ny) + 0.5) * cs)
    for hz in hazards:
        heights = heights + hazard_profile(hz, xs, ys)
    heights.setflags(write=False)
    labels = classify_cells(heights, hazards, params)
    labels.setflags(write=False)
    return TerrainGrid(heights, labels, tuple(hazards), params)


def slope_at(grid: TerrainGrid, x: float, y: float) -> float:
    """Slope in degrees at a world position, bilinear between cell gradients."""
    if not grid.in_bounds(x, y):
        raise BoundsError(f"position ({x}, {y}) outside terrain extent {grid.extent}")
    ny, nx = grid.shape
    cs = grid.cell_size
    fx = min(max(x / cs - 0.5, 0.0), nx - 1)
    fy = min(max(y / cs - 0.5, 0.0), ny - 1)
    gx, gy = grid.gradient
    return math.degrees(math.atan(math.hypot(float(bilinear(gx, fx, fy)), float(bilinear(gy, fx, fy)))))


def export_terrain(grid: TerrainGrid, directory) -> tuple[FsPath, FsPath]:
    directory = FsPath(directory)
    directory.mkdir(parents=True, exist_ok=True)
    hp, lp = directory / "heights.csv", directory / "labels.csv"
    grid.export_csv(hp, lp)
    return hp, lp
