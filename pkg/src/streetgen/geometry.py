"""Core vector/raster geometry primitives shared across the pipeline.

Coordinate conventions used everywhere in this package:

* Map coordinates are metric (x east, y north). ``MapFrame.origin`` is the
  map coordinate of the *bottom-left* corner of the raster.
* Raster indices are (row, col) with row 0 at the *top* (north edge), so
  row increases southward while y increases northward.
* A pixel (r, c) covers the half-open map square
  ``[ox + c*res, ox + (c+1)*res) x [oy + (h-1-r)*res, oy + (h-r)*res)``
  and its center sits at ``(ox + (c+0.5)*res, oy + (h-1-r+0.5)*res)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class RoadClass(str, enum.Enum):
    """Street hierarchy levels, highest capacity first."""

    MOTORWAY = "motorway"
    PRIMARY = "primary"
    SECONDARY = "secondary"
    TERTIARY = "tertiary"
    RESIDENTIAL = "residential"


#: Raster intensity per hierarchy level. Monotone in rank so the grayscale
#: street channel preserves the ordering (max wins where lines overlap).
HIERARCHY_INTENSITY: dict[RoadClass, float] = {
    RoadClass.MOTORWAY: 1.0,
    RoadClass.PRIMARY: 0.85,
    RoadClass.SECONDARY: 0.7,
    RoadClass.TERTIARY: 0.55,
    RoadClass.RESIDENTIAL: 0.4,
}


class PatternType(enum.IntEnum):
    """Street-pattern annotation labels; UNLABELED is the raster background."""

    UNLABELED = 0
    LINEAR_DEVELOPMENT = 1
    GATED_COMPOUND = 2
    MEDIEVAL = 3
    IRREGULAR_GRID = 4
    ORTHOGONAL_GRID = 5


#: Display colors for pattern annotations (single source of truth; the
#: inference service exposes this through /meta and the UI reads it there).
PATTERN_LEGEND: dict[str, str] = {
    "linear_development": "#00ff00",  # green
    "gated_compound": "#ffff00",      # yellow
    "medieval": "#ff00ff",            # magenta
    "irregular_grid": "#ff0000",      # red
    "orthogonal_grid": "#ffa500",     # orange
}

#: Number of labeled pattern types (excludes UNLABELED); used to normalize
#: the annotation channel into [0, 1] for network input.
PATTERN_CODE_SPAN = max(int(p) for p in PatternType)


def pattern_code_table() -> dict[str, int]:
    return {p.name.lower(): int(p) for p in PatternType}


@dataclass(frozen=True)
class StreetSegment:
    """A street polyline with a hierarchy class.

    ``polyline`` holds at least two map-coordinate vertices and no two
    consecutive vertices may coincide.
    """

    polyline: tuple[tuple[float, float], ...]
    road_class: RoadClass

    def __post_init__(self):
        pts = tuple((float(x), float(y)) for x, y in self.polyline)
        object.__setattr__(self, "polyline", pts)
        object.__setattr__(self, "road_class", RoadClass(self.road_class))
        if len(pts) < 2:
            raise ValueError(
                f"street segment needs >= 2 vertices, got {len(pts)}: {pts!r}"
            )
        for a, b in zip(pts, pts[1:]):
            if a == b:
                raise ValueError(
                    f"street segment has repeated consecutive vertex {a!r}"
                )

    @property
    def intensity(self) -> float:
        return HIERARCHY_INTENSITY[self.road_class]

    def vertex_array(self) -> np.ndarray:
        return np.asarray(self.polyline, dtype=np.float64)


@dataclass(frozen=True)
class MapFrame:
    """Georeferencing of a raster: bottom-left origin, square pixels."""

    origin: tuple[float, float]
    resolution: float
    width: int
    height: int

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError(f"resolution must be > 0, got {self.resolution}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError(
                f"frame must be non-empty, got {self.width}x{self.height}"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def extent_m(self) -> tuple[float, float]:
        """(east-west, north-south) extent in meters."""
        return (self.width * self.resolution, self.height * self.resolution)

    def to_pixel_continuous(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        """Map coords -> continuous (row, col); integer part is the pixel."""
        fx = (np.asarray(x, dtype=np.float64) - self.origin[0]) / self.resolution
        fy = (np.asarray(y, dtype=np.float64) - self.origin[1]) / self.resolution
        return self.height - fy, fx

    def to_pixel(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        """Map coords -> containing (row, col), clipped to the frame.

        Cells are half-open toward increasing map coordinates, so a point
        on a shared boundary belongs to the eastern/northern pixel.
        """
        fx = (np.asarray(x, dtype=np.float64) - self.origin[0]) / self.resolution
        fy = (np.asarray(y, dtype=np.float64) - self.origin[1]) / self.resolution
        c = np.clip(np.floor(fx), 0, self.width - 1).astype(np.int64)
        r = np.clip(self.height - 1 - np.floor(fy), 0, self.height - 1).astype(np.int64)
        return r, c

    def pixel_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid of pixel-center map coordinates, shaped (H, W)."""
        xs = self.origin[0] + (np.arange(self.width) + 0.5) * self.resolution
        ys = self.origin[1] + (self.height - 1 - np.arange(self.height) + 0.5) * self.resolution
        return np.meshgrid(xs, ys)


@dataclass(frozen=True)
class Polygon2D:
    """Simple polygon in map coordinates (implicitly closed)."""

    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self):
        pts = tuple((float(x), float(y)) for x, y in self.vertices)
        if pts and pts[0] == pts[-1] and len(pts) > 1:
            pts = pts[:-1]
        object.__setattr__(self, "vertices", pts)
        if len(pts) < 3:
            raise ValueError(
                f"polygon needs >= 3 distinct vertices, got {len(pts)}"
            )

    def vertex_array(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=np.float64)

    def contains(self, x, y) -> np.ndarray:
        """Vectorized even-odd point-in-polygon test."""
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        verts = self.vertex_array()
        inside = np.zeros(x.shape, dtype=bool)
        n = len(verts)
        for i in range(n):
            x1, y1 = verts[i]
            x2, y2 = verts[(i + 1) % n]
            crosses = (y1 > y) != (y2 > y)
            with np.errstate(divide="ignore", invalid="ignore"):
                xi = (x2 - x1) * (y - y1) / (y2 - y1) + x1
            inside ^= crosses & (x < xi)
        return inside

    def bounds(self) -> tuple[float, float, float, float]:
        v = self.vertex_array()
        return (v[:, 0].min(), v[:, 1].min(), v[:, 0].max(), v[:, 1].max())


def as_polygon(poly) -> Polygon2D:
    if isinstance(poly, Polygon2D):
        return poly
    return Polygon2D(tuple(poly))


def elementary_segments(
    segments: Iterable[StreetSegment],
) -> list[tuple[tuple[float, float], tuple[float, float], RoadClass]]:
    """Decompose polylines into (start, end, class) two-point pieces."""
    out = []
    for seg in segments:
        pts = seg.polyline
        for a, b in zip(pts, pts[1:]):
            out.append((a, b, seg.road_class))
    return out
