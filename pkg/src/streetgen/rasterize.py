"""Vector-to-raster ingestion: street, aspect, and pattern channels.

Builds the aligned multi-channel city map the sampler crops patches from:
a grayscale hierarchy-encoded street channel, elevation, aspect of slope
(downslope compass direction), and a pattern-type annotation channel.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage

from .geometry import (
    HIERARCHY_INTENSITY,
    MapFrame,
    PatternType,
    Polygon2D,
    RoadClass,
    StreetSegment,
    as_polygon,
)

#: Extra line thickness per hierarchy class, as a Chebyshev dilation radius
#: in pixels. Applied by the ingest pipeline (not by ``rasterize_streets``
#: itself, whose default output is 1-px lines) so that road classes stay
#: visually and numerically distinguishable at 2 m/px.
DEFAULT_CLASS_DILATION: dict[RoadClass, int] = {
    RoadClass.MOTORWAY: 2,
    RoadClass.PRIMARY: 1,
    RoadClass.SECONDARY: 1,
    RoadClass.TERTIARY: 1,
    RoadClass.RESIDENTIAL: 1,
}

#: Gradient magnitudes below this count as flat ground (aspect sentinel -1).
FLAT_TOLERANCE = 1e-9

ASPECT_FLAT = -1.0


def trace_line_pixels(
    frame: MapFrame, start: tuple[float, float], end: tuple[float, float]
) -> tuple[np.ndarray, np.ndarray]:
    """Pixels crossed by a segment, traced at half-pixel sampling steps.

    Sampling points denser than half a pixel guarantee an 8-connected pixel
    chain; each sample marks the pixel containing it.
    """
    (x0, y0), (x1, y1) = start, end
    fr0, fc0 = frame.to_pixel_continuous(x0, y0)
    fr1, fc1 = frame.to_pixel_continuous(x1, y1)
    span = max(abs(fr1 - fr0), abs(fc1 - fc0))
    n = int(np.ceil(2.0 * span)) + 1
    # sample interval midpoints so cell-corner crossings never double-mark,
    # then add the exact endpoints
    t = np.concatenate([[0.0], (np.arange(n) + 0.5) / n, [1.0]])
    xs = x0 + (x1 - x0) * t
    ys = y0 + (y1 - y0) * t
    rows, cols = frame.to_pixel(xs, ys)
    # keep only samples that actually fall inside the frame before clipping
    fr, fc = frame.to_pixel_continuous(xs, ys)
    ok = (fr >= 0) & (fr <= frame.height) & (fc >= 0) & (fc <= frame.width)
    return rows[ok], cols[ok]


def rasterize_streets(
    segments: Sequence[StreetSegment],
    frame: MapFrame,
    dilation: dict[RoadClass, int] | None = None,
    binary: bool = False,
) -> np.ndarray:
    """Render street segments into a [0, 1] grayscale channel.

    Pixel intensity encodes the hierarchy class (``HIERARCHY_INTENSITY``);
    where classes overlap the higher class wins. ``dilation`` optionally
    thickens lines per class with a square structuring element of the given
    radius; ``binary=True`` collapses all intensities to 1.0.
    """
    if not isinstance(frame, MapFrame):
        raise TypeError("frame must be a MapFrame")
    for i, seg in enumerate(segments):
        if not isinstance(seg, StreetSegment):
            raise TypeError(f"segment {i} is not a StreetSegment: {seg!r}")

    channel = np.zeros(frame.shape, dtype=np.float32)
    # paint in ascending intensity; np.maximum makes the order irrelevant
    by_class: dict[RoadClass, list[StreetSegment]] = {}
    for seg in segments:
        by_class.setdefault(seg.road_class, []).append(seg)

    for road_class in sorted(by_class, key=lambda c: HIERARCHY_INTENSITY[c]):
        hit = np.zeros(frame.shape, dtype=bool)
        for seg in by_class[road_class]:
            pts = seg.polyline
            for a, b in zip(pts, pts[1:]):
                rows, cols = trace_line_pixels(frame, a, b)
                hit[rows, cols] = True
        radius = (dilation or {}).get(road_class, 0)
        if radius > 0 and hit.any():
            size = 2 * int(radius) + 1
            hit = ndimage.binary_dilation(hit, structure=np.ones((size, size), bool))
        value = 1.0 if binary else HIERARCHY_INTENSITY[road_class]
        np.maximum(channel, np.where(hit, np.float32(value), 0.0), out=channel)
    return channel


def compute_aspect(elevation: np.ndarray, resolution: float) -> np.ndarray:
    """Downslope compass direction per pixel, degrees in [0, 360).

    North is 0, east 90 (clockwise compass). Uses central differences in
    the interior and one-sided differences at the borders. Pixels whose
    gradient magnitude falls below ``FLAT_TOLERANCE`` get the flat
    sentinel -1.
    """
    elevation = np.asarray(elevation, dtype=np.float64)
    if elevation.ndim != 2 or min(elevation.shape) < 2:
        raise ValueError(
            f"elevation must be at least 2x2 pixels, got shape {elevation.shape}"
        )
    if not np.isfinite(elevation).all():
        raise ValueError("elevation contains non-finite values")
    if resolution <= 0:
        raise ValueError(f"resolution must be > 0, got {resolution}")

    d_row, d_col = np.gradient(elevation, resolution)
    dz_east = d_col
    dz_north = -d_row  # row index grows southward
    desc_east = -dz_east
    desc_north = -dz_north
    magnitude = np.hypot(dz_east, dz_north)
    aspect = np.degrees(np.arctan2(desc_east, desc_north)) % 360.0
    aspect[magnitude < FLAT_TOLERANCE] = ASPECT_FLAT
    return aspect.astype(np.float32)


def rasterize_pattern_annotation(
    polygons: Sequence[tuple[Polygon2D | Sequence, PatternType]],
    frame: MapFrame,
) -> np.ndarray:
    """Fill labeled polygons into a pattern-code channel (uint8).

    Pixels are labeled when their center lies inside the polygon; later
    polygons overwrite earlier ones; uncovered pixels stay UNLABELED.
    """
    channel = np.full(frame.shape, int(PatternType.UNLABELED), dtype=np.uint8)
    if not polygons:
        return channel
    cx, cy = frame.pixel_centers()
    for idx, (poly, ptype) in enumerate(polygons):
        try:
            poly = as_polygon(poly)
        except ValueError as exc:
            raise ValueError(f"pattern polygon {idx} is degenerate: {exc}") from exc
        ptype = PatternType(ptype)
        # restrict the PIP test to the polygon's bounding box
        x0, y0, x1, y1 = poly.bounds()
        box = (cx >= x0) & (cx <= x1) & (cy >= y0) & (cy <= y1)
        if not box.any():
            continue
        inside = np.zeros(frame.shape, dtype=bool)
        inside[box] = poly.contains(cx[box], cy[box])
        channel[inside] = int(ptype)
    return channel


@dataclass
class MultiChannelMap:
    """Aligned named raster channels over one georeferenced frame.

    Core channels are ``streets`` ([0,1] float), ``elevation`` (meters),
    ``aspect`` (degrees, -1 flat) and ``pattern`` (PatternType codes).
    An optional ``junctions`` channel (binary) carries street-network
    junction nodes extracted at ingest time.
    """

    frame: MapFrame
    channels: dict[str, np.ndarray] = field(default_factory=dict)

    CORE_CHANNELS = ("streets", "elevation", "aspect", "pattern")

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name, arr in self.channels.items():
            if arr.shape != self.frame.shape:
                raise ValueError(
                    f"channel '{name}' has shape {arr.shape}, frame is "
                    f"{self.frame.shape}"
                )
        streets = self.channels.get("streets")
        if streets is not None:
            if streets.min() < 0 or streets.max() > 1:
                raise ValueError("streets channel values must lie in [0, 1]")
        aspect = self.channels.get("aspect")
        if aspect is not None:
            ok = (aspect == ASPECT_FLAT) | ((aspect >= 0) & (aspect < 360))
            if not ok.all():
                raise ValueError("aspect values must be -1 or in [0, 360)")
        pattern = self.channels.get("pattern")
        if pattern is not None:
            codes = {int(p) for p in PatternType}
            bad = set(np.unique(pattern)) - codes
            if bad:
                raise ValueError(f"pattern channel holds invalid codes {sorted(bad)}")

    def __getitem__(self, name: str) -> np.ndarray:
        return self.channels[name]

    def __contains__(self, name: str) -> bool:
        return name in self.channels

    @property
    def shape(self) -> tuple[int, int]:
        return self.frame.shape

    def save(self, path) -> None:
        from . import storage

        storage.save_map(path, self)

    @classmethod
    def load(cls, path) -> "MultiChannelMap":
        from . import storage

        return storage.load_map(path)


def assemble_map(
    streets: np.ndarray,
    elevation: np.ndarray,
    aspect: np.ndarray,
    pattern: np.ndarray,
    frame: MapFrame,
    junctions: np.ndarray | None = None,
) -> MultiChannelMap:
    """Stack the per-channel rasters into a validated MultiChannelMap."""
    named = {
        "streets": np.asarray(streets, dtype=np.float32),
        "elevation": np.asarray(elevation, dtype=np.float32),
        "aspect": np.asarray(aspect, dtype=np.float32),
        "pattern": np.asarray(pattern, dtype=np.uint8),
    }
    if junctions is not None:
        named["junctions"] = np.asarray(junctions, dtype=np.uint8)
    shapes = {name: arr.shape for name, arr in named.items()}
    mismatched = {n: s for n, s in shapes.items() if s != frame.shape}
    if mismatched:
        raise ValueError(
            "channel dimensions do not match the frame "
            f"{frame.shape}: " + ", ".join(f"{n}={s}" for n, s in mismatched.items())
        )
    return MultiChannelMap(frame=frame, channels=named)
