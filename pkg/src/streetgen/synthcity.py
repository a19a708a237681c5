"""Procedural synthetic city maps for desk-scale training and evaluation.

Each district polygon carries one street-pattern archetype; the generator
emits vector streets, labeled pattern polygons, and a synthetic terrain so
the full ingest -> sample -> train -> evaluate loop can run without any
real-city corpus.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .geometry import MapFrame, PatternType, Polygon2D, RoadClass, StreetSegment

#: Block-size range (meters) the district helper draws from; several blocks
#: then fit inside one sampled patch.
DEFAULT_BLOCK_RANGE = (80.0, 120.0)


@dataclass(frozen=True)
class Hill:
    center: tuple[float, float]
    amplitude: float
    sigma: float


@dataclass(frozen=True)
class District:
    polygon: Polygon2D
    pattern: PatternType
    block_size: float = 100.0
    orientation_deg: float = 0.0
    irregularity: float = 0.0

    def __post_init__(self):
        if self.block_size <= 0:
            raise ValueError(f"block_size must be > 0, got {self.block_size}")
        if not 0.0 <= self.irregularity <= 1.0:
            raise ValueError(
                f"irregularity must lie in [0, 1], got {self.irregularity}"
            )


@dataclass(frozen=True)
class SynthSpec:
    extent: tuple[float, float]
    districts: tuple[District, ...]
    hills: tuple[Hill, ...] | None = None
    rng_seed: int = 0
    emit_district_boundaries: bool = True

    def __post_init__(self):
        if not self.districts:
            raise ValueError("district list must not be empty")
        w, h = self.extent
        if w <= 0 or h <= 0:
            raise ValueError(f"extent must be positive, got {self.extent}")
        max_block = max(d.block_size for d in self.districts)
        covered = sum(_polygon_area(d.polygon) for d in self.districts)
        if covered < w * h - max_block**2:
            raise ValueError(
                "districts leave a gap larger than one block: covered "
                f"{covered:.0f} of {w * h:.0f} m^2"
            )

    def to_json(self) -> dict:
        return {
            "extent": list(self.extent),
            "rng_seed": self.rng_seed,
            "emit_district_boundaries": self.emit_district_boundaries,
            "hills": None
            if self.hills is None
            else [
                {"center": list(h.center), "amplitude": h.amplitude, "sigma": h.sigma}
                for h in self.hills
            ],
            "districts": [
                {
                    "polygon": [list(p) for p in d.polygon.vertices],
                    "pattern": d.pattern.name.lower(),
                    "block_size": d.block_size,
                    "orientation_deg": d.orientation_deg,
                    "irregularity": d.irregularity,
                }
                for d in self.districts
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "SynthSpec":
        hills = doc.get("hills")
        return cls(
            extent=tuple(doc["extent"]),
            rng_seed=doc.get("rng_seed", 0),
            emit_district_boundaries=doc.get("emit_district_boundaries", True),
            hills=None
            if hills is None
            else tuple(
                Hill(tuple(h["center"]), h["amplitude"], h["sigma"]) for h in hills
            ),
            districts=tuple(
                District(
                    polygon=Polygon2D(tuple(tuple(p) for p in d["polygon"])),
                    pattern=PatternType[d["pattern"].upper()],
                    block_size=d.get("block_size", 100.0),
                    orientation_deg=d.get("orientation_deg", 0.0),
                    irregularity=d.get("irregularity", 0.0),
                )
                for d in doc["districts"]
            ),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1))

    @classmethod
    def load(cls, path) -> "SynthSpec":
        return cls.from_json(json.loads(Path(path).read_text()))


def _polygon_area(poly: Polygon2D) -> float:
    v = poly.vertex_array()
    x, y = v[:, 0], v[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def grid_districts(
    extent: tuple[float, float],
    rows: int,
    cols: int,
    patterns: Sequence[PatternType],
    rng_seed: int = 0,
    block_range: tuple[float, float] = DEFAULT_BLOCK_RANGE,
) -> tuple[District, ...]:
    """Tile the extent with a rows x cols rectangle grid of districts.

    Pattern types cycle through ``patterns``; block size and orientation
    are drawn per district from the seed.
    """
    w, h = extent
    rng = np.random.default_rng(rng_seed)
    districts = []
    for j in range(rows):
        for i in range(cols):
            x0, x1 = w * i / cols, w * (i + 1) / cols
            y0, y1 = h * j / rows, h * (j + 1) / rows
            poly = Polygon2D(((x0, y0), (x1, y0), (x1, y1), (x0, y1)))
            pattern = PatternType(patterns[(j * cols + i) % len(patterns)])
            districts.append(
                District(
                    polygon=poly,
                    pattern=pattern,
                    block_size=float(rng.uniform(*block_range)),
                    orientation_deg=float(rng.uniform(0, 90)),
                    irregularity=float(rng.uniform(0.3, 0.8)),
                )
            )
    return tuple(districts)


# ---------------------------------------------------------------------------
# District street generators
# ---------------------------------------------------------------------------


def _rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def _clip_polyline(points: np.ndarray, polygon: Polygon2D, road_class: RoadClass):
    """Intersect a polyline with a district polygon; emit kept pieces."""
    from shapely.geometry import LineString
    from shapely.geometry import Polygon as ShapelyPolygon
    from shapely.ops import linemerge

    if len(points) < 2:
        return
    line = LineString(points)
    poly = ShapelyPolygon(polygon.vertices)
    clipped = line.intersection(poly)
    if clipped.is_empty:
        return
    if clipped.geom_type != "LineString":
        parts = [g for g in getattr(clipped, "geoms", []) if g.geom_type == "LineString"]
        if not parts:
            return
        clipped = linemerge(parts)  # undo overlay noding of collinear pieces
    pieces = [clipped] if clipped.geom_type == "LineString" else [
        g for g in getattr(clipped, "geoms", []) if g.geom_type == "LineString"
    ]
    for piece in pieces:
        coords = []
        for x, y in piece.coords:
            if not coords or (x, y) != coords[-1]:
                coords.append((x, y))
        if len(coords) >= 2:
            yield StreetSegment(tuple(coords), road_class)


def _grid_streets(district: District, rng: np.random.Generator, irregularity: float):
    b = district.block_size
    theta = math.radians(district.orientation_deg)
    rot = _rotation(theta)
    verts = district.polygon.vertex_array()
    centroid = verts.mean(axis=0)
    local = (verts - centroid) @ rot  # rotate by -theta
    x0, y0 = local.min(axis=0)
    x1, y1 = local.max(axis=0)
    xs = np.arange(math.floor(x0 / b), math.ceil(x1 / b) + 1) * b
    ys = np.arange(math.floor(y0 / b), math.ceil(y1 / b) + 1) * b
    gx, gy = np.meshgrid(xs, ys)
    nodes = np.stack([gx, gy], axis=-1)
    jitter = rng.uniform(-1.0, 1.0, size=nodes.shape) * (irregularity * b / 3.0)
    nodes = nodes + jitter
    world = nodes @ rot.T + centroid

    segments = []
    for j in range(world.shape[0]):  # lattice rows
        segments.extend(
            _clip_polyline(world[j], district.polygon, RoadClass.RESIDENTIAL)
        )
    for i in range(world.shape[1]):  # lattice columns
        segments.extend(
            _clip_polyline(world[:, i], district.polygon, RoadClass.RESIDENTIAL)
        )
    return segments


def _linear_streets(district: District, rng: np.random.Generator):
    b = district.block_size
    theta = math.radians(district.orientation_deg)
    direction = np.array([math.cos(theta), math.sin(theta)])
    normal = np.array([-direction[1], direction[0]])
    verts = district.polygon.vertex_array()
    centroid = verts.mean(axis=0)
    reach = float(np.abs((verts - centroid) @ direction).max()) + b

    segments = list(
        _clip_polyline(
            np.array([centroid - reach * direction, centroid + reach * direction]),
            district.polygon,
            RoadClass.TERTIARY,
        )
    )
    if not segments:
        return segments
    spine = max(segments, key=lambda s: len(s.polyline))
    p0 = np.asarray(spine.polyline[0])
    p1 = np.asarray(spine.polyline[-1])
    length = float(np.linalg.norm(p1 - p0))
    n_stubs = max(int(length / (b * 0.5)), 1)
    unit = (p1 - p0) / max(length, 1e-9)
    for k in range(1, n_stubs):
        at = p0 + unit * (k * length / n_stubs)
        side = 1.0 if k % 2 == 0 else -1.0
        stub_len = b * float(rng.uniform(0.6, 1.0))
        segments.extend(
            _clip_polyline(
                np.array([at, at + side * stub_len * normal]),
                district.polygon,
                RoadClass.RESIDENTIAL,
            )
        )
    return segments


def _medieval_streets(district: District, rng: np.random.Generator):
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import minimum_spanning_tree
    from scipy.spatial import Delaunay

    b = district.block_size
    spacing = b * 0.66
    x0, y0, x1, y1 = district.polygon.bounds()
    xs = np.arange(x0 + spacing / 2, x1, spacing)
    ys = np.arange(y0 + spacing / 2, y1, spacing)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.stack([gx.ravel(), gy.ravel()], axis=-1)
    pts = pts + rng.uniform(-0.4, 0.4, size=pts.shape) * spacing
    inside = district.polygon.contains(pts[:, 0], pts[:, 1])
    pts = pts[inside]
    if len(pts) < 3:
        return []

    tri = Delaunay(pts)
    edges = set()
    for simplex in tri.simplices:
        for a, c in ((0, 1), (1, 2), (0, 2)):
            i, j = int(simplex[a]), int(simplex[c])
            edges.add((min(i, j), max(i, j)))
    edges = sorted(edges)
    lengths = np.array([np.linalg.norm(pts[i] - pts[j]) for i, j in edges])

    n = len(pts)
    graph = coo_matrix(
        (lengths, ([e[0] for e in edges], [e[1] for e in edges])), shape=(n, n)
    )
    mst = minimum_spanning_tree(graph).tocoo()
    keep = {(min(i, j), max(i, j)) for i, j in zip(mst.row.tolist(), mst.col.tolist())}
    median_len = float(np.median(lengths))
    for (i, j), length in zip(edges, lengths):
        if (i, j) in keep:
            continue
        if length < 1.5 * median_len and rng.random() < 0.45:
            keep.add((i, j))

    segments = []
    for i, j in sorted(keep):
        mid = (pts[i] + pts[j]) / 2
        if not bool(district.polygon.contains(mid[0], mid[1])):
            continue
        segments.append(
            StreetSegment((tuple(pts[i]), tuple(pts[j])), RoadClass.RESIDENTIAL)
        )
    # tie the tangle to the district edge so it joins the arterials
    segments.append(_boundary_connector(pts, district))
    return segments


def _boundary_connector(pts: np.ndarray, district: District) -> StreetSegment:
    from shapely.geometry import Point
    from shapely.geometry import Polygon as ShapelyPolygon

    ring = ShapelyPolygon(district.polygon.vertices).exterior
    dists = [ring.distance(Point(p)) for p in pts]
    best = int(np.argmin(dists))
    anchor = ring.interpolate(ring.project(Point(pts[best])))
    return StreetSegment(
        (tuple(pts[best]), (anchor.x, anchor.y)), RoadClass.RESIDENTIAL
    )


def _gated_streets(district: District, rng: np.random.Generator):
    b = district.block_size
    x0, y0, x1, y1 = district.polygon.bounds()
    w, h = x1 - x0, y1 - y0
    inset = min(b / 2, w / 5, h / 5)
    lx0, ly0, lx1, ly1 = x0 + inset, y0 + inset, x1 - inset, y1 - inset
    loop = StreetSegment(
        ((lx0, ly0), (lx1, ly0), (lx1, ly1), (lx0, ly1), (lx0, ly0)),
        RoadClass.RESIDENTIAL,
    )
    segments = [loop]

    # internal cul-de-sacs hanging off the loop, dead-ended
    n_stubs = int(rng.integers(2, 5))
    sides = [
        ((lx0, ly0), (lx1, ly0), (0.0, 1.0)),
        ((lx1, ly0), (lx1, ly1), (-1.0, 0.0)),
        ((lx1, ly1), (lx0, ly1), (0.0, -1.0)),
        ((lx0, ly1), (lx0, ly0), (1.0, 0.0)),
    ]
    stub_len = min(inset, (min(w, h) - 2 * inset) / 2 - 1.0, b / 2) * 0.8
    for _ in range(n_stubs):
        (ax, ay), (bx, by), (nx, ny) = sides[int(rng.integers(0, 4))]
        t = float(rng.uniform(0.25, 0.75))
        px, py = ax + (bx - ax) * t, ay + (by - ay) * t
        if stub_len > 1.0:
            segments.append(
                StreetSegment(
                    ((px, py), (px + nx * stub_len, py + ny * stub_len)),
                    RoadClass.RESIDENTIAL,
                )
            )

    # the single entrance: from the loop straight out to the district edge
    side_idx = int(rng.integers(0, 4))
    (ax, ay), (bx, by), (nx, ny) = sides[side_idx]
    t = float(rng.uniform(0.35, 0.65))
    px, py = ax + (bx - ax) * t, ay + (by - ay) * t
    segments.append(
        StreetSegment(
            ((px, py), (px - nx * inset, py - ny * inset)), RoadClass.TERTIARY
        )
    )
    return segments


_GENERATORS = {
    PatternType.ORTHOGONAL_GRID: lambda d, rng: _grid_streets(d, rng, 0.0),
    PatternType.IRREGULAR_GRID: lambda d, rng: _grid_streets(d, rng, d.irregularity),
    PatternType.LINEAR_DEVELOPMENT: _linear_streets,
    PatternType.MEDIEVAL: _medieval_streets,
    PatternType.GATED_COMPOUND: _gated_streets,
}


def _district_boundaries(districts: Sequence[District]) -> list[StreetSegment]:
    """District edges as arterial streets, shared edges deduplicated."""
    seen: set[tuple] = set()
    segments = []
    for d in districts:
        verts = d.polygon.vertices
        for a, b in zip(verts, verts[1:] + (verts[0],)):
            key = tuple(sorted((a, b)))
            if key in seen:
                continue
            seen.add(key)
            segments.append(StreetSegment((a, b), RoadClass.SECONDARY))
    return segments


def synth_elevation(
    spec: SynthSpec, frame: MapFrame, hills: Sequence[Hill] | None = None
) -> np.ndarray:
    """Sum-of-Gaussian-hills terrain sampled at pixel centers."""
    if hills is None:
        hills = spec.hills
    if hills is None:
        rng = np.random.default_rng(np.random.SeedSequence([spec.rng_seed, 7]))
        w, h = spec.extent
        hills = tuple(
            Hill(
                center=(float(rng.uniform(0, w)), float(rng.uniform(0, h))),
                amplitude=float(rng.uniform(15, 60)),
                sigma=float(rng.uniform(0.15, 0.35)) * min(w, h),
            )
            for _ in range(int(rng.integers(2, 5)))
        )
    cx, cy = frame.pixel_centers()
    elev = np.zeros(frame.shape, dtype=np.float64)
    for hill in hills:
        d2 = (cx - hill.center[0]) ** 2 + (cy - hill.center[1]) ** 2
        elev += hill.amplitude * np.exp(-d2 / (2 * hill.sigma**2))
    return elev.astype(np.float32)


def synth_map(spec: SynthSpec, resolution: float = 2.0):
    """Generate (street segments, pattern polygons, elevation channel).

    Deterministic given ``spec.rng_seed``: each district consumes its own
    spawned RNG stream, so adding a district never reshuffles the others.
    """
    w, h = spec.extent
    frame = MapFrame(
        origin=(0.0, 0.0),
        resolution=resolution,
        width=int(round(w / resolution)),
        height=int(round(h / resolution)),
    )
    segments: list[StreetSegment] = []
    polygons: list[tuple[Polygon2D, PatternType]] = []
    seeds = np.random.SeedSequence(spec.rng_seed).spawn(len(spec.districts))
    for district, seq in zip(spec.districts, seeds):
        rng = np.random.default_rng(seq)
        generator = _GENERATORS.get(district.pattern)
        if generator is not None:
            segments.extend(generator(district, rng))
        if district.pattern != PatternType.UNLABELED:
            polygons.append((district.polygon, district.pattern))
    if spec.emit_district_boundaries:
        segments.extend(_district_boundaries(spec.districts))
    elevation = synth_elevation(spec, frame)
    return segments, polygons, elevation


def synthesize_city_map(
    spec: SynthSpec,
    resolution: float = 2.0,
    binary_streets: bool = False,
    dilation: dict[RoadClass, int] | None = None,
):
    """Full desk-scale ingest: synth vectors -> assembled MultiChannelMap."""
    from .rasterize import assemble_map, compute_aspect, rasterize_pattern_annotation, rasterize_streets
    from .sampling import extract_junctions, render_junctions

    w, h = spec.extent
    frame = MapFrame(
        origin=(0.0, 0.0),
        resolution=resolution,
        width=int(round(w / resolution)),
        height=int(round(h / resolution)),
    )
    segments, polygons, elevation = synth_map(spec, resolution)
    streets = rasterize_streets(segments, frame, dilation=dilation, binary=binary_streets)
    aspect = compute_aspect(elevation, resolution)
    pattern = rasterize_pattern_annotation(polygons, frame)
    junctions = extract_junctions(segments=segments, frame=frame)
    junction_channel = render_junctions(junctions.points, frame.shape, dilate=False)
    return assemble_map(
        streets, elevation, aspect, pattern, frame, junctions=junction_channel
    )
