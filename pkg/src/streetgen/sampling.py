"""Patch sampling: crops, masks, noise, junction guidance, dataset build.

Turns a MultiChannelMap into model-ready records. Every operation here is
a pure function of its inputs and an integer seed, so a dataset built
twice from the same map and seed is byte-identical on disk.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .geometry import MapFrame, PatternType, StreetSegment
from .rasterize import MultiChannelMap

DEFAULT_PATCH_SIZE = 256
DEFAULT_AREA_RANGE = (0.1, 0.7)
AREA_TOLERANCE = 0.02

#: Margin (px) kept free of generation-region rectangles, and the smallest
#: rectangle side the mask generator will draw.
MASK_MARGIN = 4
MASK_MIN_SIDE = 4
MASK_MAX_RECTS = 3

#: Retention policies mirroring the experiment matrix: junctions kept inside
#: the generation region either at a random per-sample fraction or fixed.
RETENTION_POLICIES = {
    "random": ("random", 0.1, 0.9),
    "30": ("fixed", 0.3),
    "60": ("fixed", 0.6),
    "90": ("fixed", 0.9),
}


class MaskInfeasibleError(RuntimeError):
    """Raised when no rectangle union can reach the requested area range."""


@dataclass(frozen=True)
class Mask:
    """Binary generation-region mask: 1 = generate here, 0 = context."""

    grid: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=np.uint8)
        object.__setattr__(self, "grid", grid)
        values = np.unique(grid)
        if not set(values.tolist()) <= {0, 1}:
            raise ValueError(f"mask values must be 0/1, got {values}")
        frac = float(grid.mean())
        if not 0.0 < frac < 1.0:
            raise ValueError(
                f"generation-region fraction must lie in (0, 1), got {frac}"
            )

    @property
    def area_fraction(self) -> float:
        return float(self.grid.mean())

    @property
    def context_coverage(self) -> float:
        return 1.0 - self.area_fraction

    @property
    def size(self) -> tuple[int, int]:
        return self.grid.shape


def _grid_of(mask) -> np.ndarray:
    """Accept a Mask or a raw 0/1 array (for degenerate edge cases)."""
    return mask.grid if isinstance(mask, Mask) else np.asarray(mask, dtype=np.uint8)


@dataclass(frozen=True)
class JunctionSet:
    """Street-network junction nodes as (row, col) pixel coordinates."""

    points: tuple[tuple[int, int], ...]
    source: str = "extracted"

    def __post_init__(self):
        pts = tuple(sorted((int(r), int(c)) for r, c in self.points))
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    def within(self, shape: tuple[int, int]) -> "JunctionSet":
        h, w = shape
        return JunctionSet(
            tuple(p for p in self.points if 0 <= p[0] < h and 0 <= p[1] < w),
            source=self.source,
        )


@dataclass
class PatchSample:
    """One training/test record.

    ``context_streets`` is the street channel with the generation region
    zeroed; ``ground_truth_streets`` is the full street channel. Guidance
    channels live only inside the generation region.
    """

    context_streets: np.ndarray
    elevation: np.ndarray
    aspect: np.ndarray
    mask: Mask
    noise: np.ndarray
    junction_channel: np.ndarray
    pattern_guidance: np.ndarray
    ground_truth_streets: np.ndarray
    origin: tuple[int, int]
    model_level: int
    retention_fraction: float = 0.0
    junction_points: tuple[tuple[int, int], ...] = ()
    seed: int = 0

    def validate(self) -> None:
        m = self.mask.grid
        shape = m.shape
        for name in (
            "context_streets",
            "elevation",
            "aspect",
            "noise",
            "junction_channel",
            "pattern_guidance",
            "ground_truth_streets",
        ):
            arr = getattr(self, name)
            if arr.shape != shape:
                raise ValueError(f"channel '{name}' shape {arr.shape} != mask {shape}")
        if np.any(self.context_streets * m != 0):
            raise ValueError("context streets leak into the generation region")
        if np.any(self.noise * (1 - m) != 0):
            raise ValueError("noise leaks outside the generation region")
        if np.any(self.junction_channel * (1 - m) != 0):
            raise ValueError("junction guidance leaks outside the generation region")
        if np.any(self.pattern_guidance * (1 - m) != 0):
            raise ValueError("pattern guidance leaks outside the generation region")

    @property
    def context_coverage(self) -> float:
        return self.mask.context_coverage


# ---------------------------------------------------------------------------
# Mask generation
# ---------------------------------------------------------------------------


def generate_mask(
    size: int,
    rng_seed: int,
    area_range: tuple[float, float] = DEFAULT_AREA_RANGE,
    max_rects: int = MASK_MAX_RECTS,
    margin: int = MASK_MARGIN,
    max_tries: int = 400,
) -> Mask:
    """Union of 1..max_rects random axis-aligned rectangles.

    The achieved generation-region fraction lands within
    ``area_range`` widened by AREA_TOLERANCE on both sides; draws are
    retried until that holds or ``max_tries`` is exhausted.
    """
    lo, hi = area_range
    if not (0.0 < lo <= hi < 1.0):
        raise ValueError(f"area_range must satisfy 0 < lo <= hi < 1, got {area_range}")
    usable = size - 2 * margin
    if usable < MASK_MIN_SIDE:
        raise MaskInfeasibleError(f"mask size {size} leaves no room inside margin {margin}")

    rng = np.random.default_rng(rng_seed)
    for _ in range(max_tries):
        target = rng.uniform(lo, hi)
        k = int(rng.integers(1, max_rects + 1))
        weights = rng.dirichlet(np.ones(k))
        grid = np.zeros((size, size), dtype=np.uint8)
        for w in weights:
            area_px = max(target * w * size * size, MASK_MIN_SIDE**2)
            ratio = np.exp(rng.uniform(np.log(0.4), np.log(2.5)))
            h = int(round(np.sqrt(area_px * ratio)))
            wpx = int(round(np.sqrt(area_px / ratio)))
            h = min(max(h, MASK_MIN_SIDE), usable)
            wpx = min(max(wpx, MASK_MIN_SIDE), usable)
            r0 = int(rng.integers(margin, size - margin - h + 1))
            c0 = int(rng.integers(margin, size - margin - wpx + 1))
            grid[r0 : r0 + h, c0 : c0 + wpx] = 1
        frac = grid.mean()
        if lo - AREA_TOLERANCE <= frac <= hi + AREA_TOLERANCE and 0.0 < frac < 1.0:
            return Mask(grid)
    raise MaskInfeasibleError(
        f"no rectangle union reached area range {area_range} within "
        f"{max_tries} tries (size {size}, margin {margin})"
    )


# ---------------------------------------------------------------------------
# Patch origins
# ---------------------------------------------------------------------------


def max_distinct_origins(map_shape: tuple[int, int], size: int) -> int:
    h, w = map_shape
    if size > h or size > w:
        return 0
    return (h - size + 1) * (w - size + 1)


def crop_origins(
    map_shape: tuple[int, int], n: int, size: int, rng_seed: int
) -> list[tuple[int, int]]:
    """n pairwise-distinct top-left patch origins, deterministic by seed."""
    total = max_distinct_origins(map_shape, size)
    if total == 0:
        raise ValueError(f"patch size {size} exceeds map dimensions {map_shape}")
    if n > total:
        raise ValueError(
            f"requested {n} unrepeated patches but the map only admits "
            f"{total} distinct origins"
        )
    h, w = map_shape
    cols = w - size + 1
    rng = np.random.default_rng(rng_seed)
    if total <= 4 * n or total <= 1_000_000:
        flat = rng.permutation(total)[:n]
    else:
        seen: set[int] = set()
        picks: list[int] = []
        while len(picks) < n:
            batch = rng.integers(0, total, size=2 * (n - len(picks)))
            for v in batch.tolist():
                if v not in seen:
                    seen.add(v)
                    picks.append(v)
                    if len(picks) == n:
                        break
        flat = np.asarray(picks)
    return [(int(v // cols), int(v % cols)) for v in flat]


# ---------------------------------------------------------------------------
# Junction extraction and rendering
# ---------------------------------------------------------------------------


def extract_junctions(
    segments: Sequence[StreetSegment] | None = None,
    frame: MapFrame | None = None,
    streets: np.ndarray | None = None,
    snap_px: float = 1.0,
) -> JunctionSet:
    """Street-network nodes of degree >= 3, in pixel coordinates.

    Vector mode (preferred): the segments are noded at mutual crossings,
    split-segment endpoints are snapped to the pixel grid, and nodes where
    three or more endpoints meet become junctions. Raster fallback: street
    pixels are skeletonized and skeleton pixels with >= 3 skeleton
    neighbors become junctions.
    """
    if segments is not None:
        if frame is None:
            raise ValueError("vector junction extraction needs a frame")
        return _extract_junctions_vector(segments, frame, snap_px)
    if streets is not None:
        return _extract_junctions_raster(streets)
    raise ValueError("pass either segments+frame or a streets raster")


def _extract_junctions_vector(
    segments: Sequence[StreetSegment], frame: MapFrame, snap_px: float
) -> JunctionSet:
    from shapely.geometry import MultiLineString
    from shapely.ops import unary_union

    lines = []
    for seg in segments:
        lines.append(tuple(seg.polyline))
    if not lines:
        return JunctionSet(())
    noded = unary_union(MultiLineString(lines))
    if noded.is_empty:
        return JunctionSet(())
    if noded.geom_type == "LineString":
        parts = [noded]
    else:
        parts = [g for g in noded.geoms if g.geom_type == "LineString"]

    counts: dict[tuple[int, int], int] = {}
    for line in parts:
        coords = list(line.coords)
        for x, y in (coords[0], coords[-1]):
            fr, fc = frame.to_pixel_continuous(x, y)
            if not (-snap_px <= float(fr) <= frame.height + snap_px):
                continue
            if not (-snap_px <= float(fc) <= frame.width + snap_px):
                continue
            r, c = frame.to_pixel(x, y)
            counts[(int(r), int(c))] = counts.get((int(r), int(c)), 0) + 1
    points = [node for node, degree in counts.items() if degree >= 3]
    return JunctionSet(tuple(points), source="extracted")


def _extract_junctions_raster(streets: np.ndarray) -> JunctionSet:
    from skimage.morphology import skeletonize

    street_mask = np.asarray(streets) > 0
    if not street_mask.any():
        return JunctionSet(())
    skel = skeletonize(street_mask)
    padded = np.pad(skel, 1).astype(np.uint8)
    neighbors = np.zeros_like(padded, dtype=np.int16)
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr == 0 and dc == 0:
                continue
            neighbors += np.roll(np.roll(padded, dr, axis=0), dc, axis=1)
    deg = neighbors[1:-1, 1:-1]
    rows, cols = np.nonzero(skel & (deg >= 3))
    return JunctionSet(tuple(zip(rows.tolist(), cols.tolist())), source="extracted")


def render_junctions(
    points: Iterable[tuple[int, int]],
    shape: tuple[int, int],
    mask=None,
    dilate: bool = True,
) -> np.ndarray:
    """Render junction nodes as white dots (3x3 when dilated).

    When a mask is given, output pixels are clipped to the generation
    region so that guidance never leaks into the context.
    """
    channel = np.zeros(shape, dtype=np.uint8)
    h, w = shape
    for r, c in points:
        if not (0 <= r < h and 0 <= c < w):
            continue
        if dilate:
            channel[max(r - 1, 0) : r + 2, max(c - 1, 0) : c + 2] = 1
        else:
            channel[r, c] = 1
    if mask is not None:
        channel &= _grid_of(mask)
    return channel


def retain_junctions(
    junctions: JunctionSet,
    mask,
    fraction: float,
    rng_seed: int,
    dilate: bool = True,
) -> np.ndarray:
    """Keep a random fraction of in-mask junctions and render them.

    The count is round-half-up of ``fraction * |in-mask junctions|``;
    junctions outside the generation region are never rendered.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"retention fraction must lie in [0, 1], got {fraction}")
    grid = _grid_of(mask)
    h, w = grid.shape
    inside = [
        (r, c)
        for r, c in junctions.points
        if 0 <= r < h and 0 <= c < w and grid[r, c] == 1
    ]
    keep = int(np.floor(fraction * len(inside) + 0.5))
    rng = np.random.default_rng(rng_seed)
    chosen_idx = rng.choice(len(inside), size=keep, replace=False) if keep else []
    chosen = [inside[i] for i in sorted(int(i) for i in np.atleast_1d(chosen_idx))]
    return render_junctions(chosen, grid.shape, mask=mask, dilate=dilate)


def make_noise_channel(mask, rng_seed: int) -> np.ndarray:
    """i.i.d. uniform[0,1) noise inside the generation region, 0 outside."""
    grid = _grid_of(mask)
    rng = np.random.default_rng(rng_seed)
    noise = rng.random(grid.shape, dtype=np.float64).astype(np.float32)
    return noise * grid


# ---------------------------------------------------------------------------
# Sample assembly
# ---------------------------------------------------------------------------


def _junctions_from_channel(channel: np.ndarray) -> JunctionSet:
    rows, cols = np.nonzero(channel)
    return JunctionSet(tuple(zip(rows.tolist(), cols.tolist())))


def build_sample(
    mc_map: MultiChannelMap,
    origin: tuple[int, int],
    mask: Mask,
    retention_fraction: float,
    model_level: int,
    rng_seed: int,
) -> PatchSample:
    """Assemble one PatchSample at a patch origin.

    Junction guidance comes from the map's ``junctions`` channel when
    present, otherwise from raster extraction on the ground-truth street
    patch. Model level 1 zeroes both guidance channels; level 2 zeroes the
    pattern channel.
    """
    if model_level not in (1, 2, 3):
        raise ValueError(f"model_level must be 1, 2 or 3, got {model_level}")
    size_r, size_c = mask.grid.shape
    h, w = mc_map.shape
    r0, c0 = origin
    if not (0 <= r0 <= h - size_r and 0 <= c0 <= w - size_c):
        raise ValueError(
            f"origin {origin} with patch size {mask.grid.shape} exceeds map "
            f"bounds {(h, w)}"
        )

    def crop(name: str) -> np.ndarray:
        return mc_map[name][r0 : r0 + size_r, c0 : c0 + size_c].copy()

    seeds = np.random.SeedSequence(rng_seed).spawn(2)
    noise_seed, retention_seed = (s.generate_state(1)[0] for s in seeds)

    gt = crop("streets").astype(np.float32)
    context = gt * (1 - mask.grid)
    noise = make_noise_channel(mask, int(noise_seed))

    if "junctions" in mc_map:
        junctions = _junctions_from_channel(crop("junctions"))
    else:
        junctions = _extract_junctions_raster(gt)

    if model_level >= 2:
        junction_channel = retain_junctions(
            junctions, mask, retention_fraction, int(retention_seed)
        )
    else:
        junction_channel = np.zeros(mask.grid.shape, dtype=np.uint8)

    if model_level == 3:
        pattern_guidance = (crop("pattern") * mask.grid).astype(np.uint8)
    else:
        pattern_guidance = np.zeros(mask.grid.shape, dtype=np.uint8)

    sample = PatchSample(
        context_streets=context,
        elevation=crop("elevation").astype(np.float32),
        aspect=crop("aspect").astype(np.float32),
        mask=mask,
        noise=noise,
        junction_channel=junction_channel,
        pattern_guidance=pattern_guidance,
        ground_truth_streets=gt,
        origin=(r0, c0),
        model_level=model_level,
        retention_fraction=retention_fraction,
        junction_points=junctions.points,
        seed=rng_seed,
    )
    sample.validate()
    return sample


def _sample_plan(
    mc_map: MultiChannelMap,
    n: int,
    size: int,
    rng_seed: int,
    area_range: tuple[float, float],
    retention_policy: str,
):
    """Yield (origin, mask, retention fraction, sample seed) per record."""
    origins = crop_origins(mc_map.shape, n, size, rng_seed)
    for origin, seq in zip(origins, np.random.SeedSequence(rng_seed).spawn(n)):
        mask_seed, sample_seed, policy_seed = (
            int(s.generate_state(1)[0]) for s in seq.spawn(3)
        )
        mask = generate_mask(size, mask_seed, area_range)
        fraction = _retention_fraction(retention_policy, policy_seed)
        yield origin, mask, fraction, sample_seed


def crop_patches(
    mc_map: MultiChannelMap,
    n: int,
    size: int,
    rng_seed: int,
    model_level: int = 1,
    area_range: tuple[float, float] = DEFAULT_AREA_RANGE,
    retention_policy: str = "random",
) -> list[PatchSample]:
    """n unrepeated random patches, fully sampled (masks, noise, guidance)."""
    return [
        build_sample(mc_map, origin, mask, fraction, model_level, seed)
        for origin, mask, fraction, seed in _sample_plan(
            mc_map, n, size, rng_seed, area_range, retention_policy
        )
    ]


def _retention_fraction(policy: str, rng_seed: int) -> float:
    if policy not in RETENTION_POLICIES:
        raise ValueError(
            f"unknown retention policy {policy!r}; choose from "
            f"{sorted(RETENTION_POLICIES)}"
        )
    spec = RETENTION_POLICIES[policy]
    if spec[0] == "fixed":
        return spec[1]
    lo, hi = spec[1], spec[2]
    return float(np.random.default_rng(rng_seed).uniform(lo, hi))


# ---------------------------------------------------------------------------
# Dataset persistence
# ---------------------------------------------------------------------------


def save_record(path, sample: PatchSample) -> None:
    from . import storage

    channels = {
        "context_streets": sample.context_streets,
        "elevation": sample.elevation,
        "aspect": sample.aspect,
        "mask": sample.mask.grid,
        "noise": sample.noise,
        "junctions": sample.junction_channel,
        "pattern_guidance": sample.pattern_guidance,
        "ground_truth_streets": sample.ground_truth_streets,
    }
    meta = {
        "format": storage.RECORD_FORMAT,
        "version": storage.FORMAT_VERSION,
        "origin": list(sample.origin),
        "model_level": sample.model_level,
        "retention_fraction": sample.retention_fraction,
        "junction_points": [list(p) for p in sample.junction_points],
        "seed": sample.seed,
    }
    storage.save_channel_archive(path, channels, meta)


def load_record(path) -> PatchSample:
    from . import storage

    channels, meta = storage.load_channel_archive(path)
    if meta.get("format") != storage.RECORD_FORMAT:
        raise ValueError(f"{path} is not a {storage.RECORD_FORMAT} archive")
    sample = PatchSample(
        context_streets=channels["context_streets"],
        elevation=channels["elevation"],
        aspect=channels["aspect"],
        mask=Mask(channels["mask"]),
        noise=channels["noise"],
        junction_channel=channels["junctions"],
        pattern_guidance=channels["pattern_guidance"],
        ground_truth_streets=channels["ground_truth_streets"],
        origin=tuple(meta["origin"]),
        model_level=meta["model_level"],
        retention_fraction=meta["retention_fraction"],
        junction_points=tuple(tuple(p) for p in meta["junction_points"]),
        seed=meta["seed"],
    )
    return sample


def build_dataset(
    mc_map: MultiChannelMap,
    out_dir,
    n: int,
    size: int,
    rng_seed: int,
    model_level: int,
    area_range: tuple[float, float] = DEFAULT_AREA_RANGE,
    retention_policy: str = "random",
    map_path=None,
) -> Path:
    """Sample n records to ``out_dir/records/`` plus a manifest.json."""
    from . import storage

    out_dir = Path(out_dir)
    records_dir = out_dir / "records"
    records_dir.mkdir(parents=True, exist_ok=True)

    record_entries = []
    plan = _sample_plan(mc_map, n, size, rng_seed, area_range, retention_policy)
    for i, (origin, mask, fraction, sample_seed) in enumerate(plan):
        sample = build_sample(mc_map, origin, mask, fraction, model_level, sample_seed)
        rel = f"records/{i:06d}.sgrec"
        save_record(out_dir / rel, sample)
        record_entries.append(
            {
                "path": rel,
                "origin": list(origin),
                "context_coverage": sample.context_coverage,
                "retention_fraction": fraction,
            }
        )

    manifest = {
        "format": storage.DATASET_FORMAT,
        "version": storage.FORMAT_VERSION,
        "map_source_hash": storage.file_sha256(map_path) if map_path else None,
        "seed": rng_seed,
        "size": size,
        "count": n,
        "model_level": model_level,
        "area_range": list(area_range),
        "retention_policy": retention_policy,
        "records": record_entries,
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=1, sort_keys=True)
    )
    return out_dir


class Dataset:
    """Lazy reader over a dataset directory written by ``build_dataset``."""

    def __init__(self, root):
        self.root = Path(root)
        manifest_path = self.root / "manifest.json"
        if not manifest_path.exists():
            raise FileNotFoundError(f"no manifest.json under {self.root}")
        self.manifest = json.loads(manifest_path.read_text())
        self.model_level = self.manifest["model_level"]
        self.size = self.manifest["size"]

    def __len__(self) -> int:
        return self.manifest["count"]

    def __getitem__(self, i: int) -> PatchSample:
        entry = self.manifest["records"][i]
        return load_record(self.root / entry["path"])

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]
