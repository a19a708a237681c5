import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from streetgen.geometry import MapFrame, PatternType, RoadClass, StreetSegment
from streetgen.sampling import (
    Dataset,
    JunctionSet,
    Mask,
    MaskInfeasibleError,
    build_dataset,
    build_sample,
    crop_origins,
    crop_patches,
    extract_junctions,
    generate_mask,
    load_record,
    make_noise_channel,
    max_distinct_origins,
    render_junctions,
    retain_junctions,
    save_record,
)


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------


def brute_force_grid_crossings(verticals, horizontals):
    """Pairwise intersection points of axis-aligned full-span lines."""
    points = set()
    for x in verticals:
        for y in horizontals:
            points.add((x, y))
    return points


# ---------------------------------------------------------------------------
# Mask generation
# ---------------------------------------------------------------------------


def test_mask_deterministic_and_in_range():
    for seed in range(20):
        mask = generate_mask(64, seed)
        again = generate_mask(64, seed)
        assert np.array_equal(mask.grid, again.grid)
        assert set(np.unique(mask.grid)) <= {0, 1}
        assert 0.1 - 0.02 <= mask.area_fraction <= 0.7 + 0.02


def test_mask_narrow_target_range():
    mask = generate_mask(128, 3, area_range=(0.30, 0.34))
    assert 0.28 <= mask.area_fraction <= 0.36


def test_mask_infeasible_area_range_errors():
    with pytest.raises(MaskInfeasibleError, match="tries"):
        generate_mask(64, 0, area_range=(0.95, 0.99))


def test_mask_monte_carlo_coverage_span():
    # context coverage = 1 - fraction must sweep the analysis axis
    coverages = []
    for seed in range(10_000):
        mask = generate_mask(64, seed)
        coverages.append(mask.context_coverage)
    coverages = np.asarray(coverages)
    assert coverages.min() <= 0.33
    assert coverages.max() >= 0.87
    assert np.all(coverages >= 0.28) and np.all(coverages <= 0.92)


def test_mask_invariant_rejects_degenerate_grids():
    with pytest.raises(ValueError, match=r"\(0, 1\)"):
        Mask(np.zeros((8, 8), dtype=np.uint8))
    with pytest.raises(ValueError, match=r"\(0, 1\)"):
        Mask(np.ones((8, 8), dtype=np.uint8))
    with pytest.raises(ValueError, match="0/1"):
        Mask(np.full((8, 8), 3, dtype=np.uint8))


# ---------------------------------------------------------------------------
# Patch origins
# ---------------------------------------------------------------------------


def test_crop_origins_distinct_and_deterministic():
    origins = crop_origins((80, 90), 500, 16, rng_seed=5)
    assert len(set(origins)) == 500
    assert origins == crop_origins((80, 90), 500, 16, rng_seed=5)
    for r, c in origins:
        assert 0 <= r <= 80 - 16 and 0 <= c <= 90 - 16


def test_crop_origins_exact_fit_single_patch():
    assert max_distinct_origins((256, 256), 256) == 1
    assert crop_origins((256, 256), 1, 256, rng_seed=0) == [(0, 0)]


def test_crop_origins_pigeonhole_error_reports_maximum():
    with pytest.raises(ValueError, match="1 distinct origins"):
        crop_origins((256, 256), 2, 256, rng_seed=0)
    with pytest.raises(ValueError, match="exceeds map dimensions"):
        crop_origins((100, 100), 1, 128, rng_seed=0)


def test_city_scale_origin_budget_fits_published_corpus():
    # a 3000x5000 px map admits far more than 46,856 unrepeated 256-patches
    assert max_distinct_origins((3000, 5000), 256) >= 46_856


# ---------------------------------------------------------------------------
# Junction extraction
# ---------------------------------------------------------------------------


def frame_of(size):
    return MapFrame(origin=(0.0, 0.0), resolution=1.0, width=size, height=size)


def test_two_segments_sharing_endpoint_is_not_a_junction():
    frame = frame_of(20)
    segments = [
        StreetSegment(((2.0, 2.0), (10.0, 10.0)), RoadClass.RESIDENTIAL),
        StreetSegment(((10.0, 10.0), (18.0, 2.0)), RoadClass.RESIDENTIAL),
    ]
    assert len(extract_junctions(segments=segments, frame=frame)) == 0


def test_plus_crossing_split_at_center_is_one_junction():
    frame = frame_of(21)
    center = (10.5, 10.5)
    segments = [
        StreetSegment(((10.5, 0.5), center), RoadClass.RESIDENTIAL),
        StreetSegment((center, (10.5, 20.5)), RoadClass.RESIDENTIAL),
        StreetSegment(((0.5, 10.5), center), RoadClass.RESIDENTIAL),
        StreetSegment((center, (20.5, 10.5)), RoadClass.RESIDENTIAL),
    ]
    junctions = extract_junctions(segments=segments, frame=frame)
    r, c = frame.to_pixel(*center)
    assert junctions.points == ((int(r), int(c)),)


def test_unsplit_crossing_is_noded_into_a_junction():
    frame = frame_of(21)
    segments = [
        StreetSegment(((10.5, 0.5), (10.5, 20.5)), RoadClass.RESIDENTIAL),
        StreetSegment(((0.5, 10.5), (20.5, 10.5)), RoadClass.RESIDENTIAL),
    ]
    junctions = extract_junctions(segments=segments, frame=frame)
    assert len(junctions) == 1


def test_grid_of_blocks_interior_junctions_match_crossing_oracle():
    # 4x4 blocks between the patch borders: 3 + 3 interior full-span lines
    frame = frame_of(100)
    verticals = [20.5, 40.5, 60.5]
    horizontals = [20.5, 40.5, 60.5]
    segments = [
        StreetSegment(((x, 0.5), (x, 99.5)), RoadClass.RESIDENTIAL) for x in verticals
    ] + [
        StreetSegment(((0.5, y), (99.5, y)), RoadClass.RESIDENTIAL) for y in horizontals
    ]
    junctions = extract_junctions(segments=segments, frame=frame)
    expected = {
        tuple(int(v) for v in frame.to_pixel(x, y))
        for x, y in brute_force_grid_crossings(verticals, horizontals)
    }
    assert len(junctions) == 9
    assert set(junctions.points) == expected


def test_raster_fallback_finds_plus_junction():
    streets = np.zeros((15, 15), dtype=np.float32)
    streets[7, 2:13] = 1.0
    streets[2:13, 7] = 1.0
    junctions = extract_junctions(streets=streets)
    assert (7, 7) in junctions.points


def test_extracted_junctions_lie_on_street_pixels(small_map):
    streets = small_map["streets"]
    junction_channel = small_map["junctions"]
    rows, cols = np.nonzero(junction_channel)
    on_street = streets[rows, cols] > 0
    assert on_street.mean() > 0.99  # boundary-of-frame corner cases aside
    assert len(rows) > 10


# ---------------------------------------------------------------------------
# Junction retention and rendering
# ---------------------------------------------------------------------------


def spread_junctions(n, step=5, offset=2):
    return JunctionSet(tuple((offset + step * i, offset + step * i) for i in range(n)))


def test_retention_fraction_one_keeps_all_and_zero_keeps_none():
    grid = np.zeros((64, 64), dtype=np.uint8)
    grid[:40, :40] = 1
    mask = Mask(grid)
    junctions = spread_junctions(7)
    every = retain_junctions(junctions, mask, 1.0, rng_seed=0, dilate=False)
    assert every.sum() == 7
    none = retain_junctions(junctions, mask, 0.0, rng_seed=0, dilate=False)
    assert none.sum() == 0


def test_retention_rounding_rule_keeps_six_of_ten():
    grid = np.zeros((64, 64), dtype=np.uint8)
    grid[:60, :60] = 1
    mask = Mask(grid)
    junctions = spread_junctions(10)
    rendered = retain_junctions(junctions, mask, 0.6, rng_seed=1, dilate=False)
    assert rendered.sum() == 6


def test_out_of_mask_junctions_never_rendered():
    grid = np.zeros((64, 64), dtype=np.uint8)
    grid[:20, :20] = 1
    mask = Mask(grid)
    junctions = JunctionSet(((5, 5), (50, 50), (10, 12)))
    rendered = retain_junctions(junctions, mask, 1.0, rng_seed=0, dilate=False)
    assert rendered[50, 50] == 0
    assert rendered.sum() == 2


def test_dilated_junctions_clip_to_mask():
    grid = np.zeros((32, 32), dtype=np.uint8)
    grid[10:20, 10:20] = 1
    mask = Mask(grid)
    rendered = render_junctions([(10, 10)], grid.shape, mask=mask, dilate=True)
    assert rendered.sum() == 4  # 3x3 block clipped to the mask corner
    assert np.all(rendered * (1 - grid) == 0)


def test_retention_deterministic_and_unbiased_subset():
    grid = np.zeros((64, 64), dtype=np.uint8)
    grid[:60, :60] = 1
    mask = Mask(grid)
    junctions = spread_junctions(10)
    a = retain_junctions(junctions, mask, 0.5, rng_seed=9, dilate=False)
    b = retain_junctions(junctions, mask, 0.5, rng_seed=9, dilate=False)
    assert np.array_equal(a, b)
    c = retain_junctions(junctions, mask, 0.5, rng_seed=10, dilate=False)
    assert a.sum() == c.sum() == 5


# ---------------------------------------------------------------------------
# Noise channel
# ---------------------------------------------------------------------------


def test_noise_zero_outside_and_reproducible():
    mask = generate_mask(64, 2)
    noise = make_noise_channel(mask, 7)
    assert np.array_equal(noise, make_noise_channel(mask, 7))
    assert np.all(noise[mask.grid == 0] == 0)
    assert noise.max() < 1.0 and noise.min() >= 0.0


def test_noise_all_zero_mask_gives_zero_channel():
    noise = make_noise_channel(np.zeros((32, 32), dtype=np.uint8), 1)
    assert np.all(noise == 0)


def test_noise_large_mask_mean_near_half():
    grid = np.ones((1000, 1000), dtype=np.uint8)
    noise = make_noise_channel(grid, 123)
    assert abs(noise.mean() - 0.5) < 0.005


# ---------------------------------------------------------------------------
# Sample assembly
# ---------------------------------------------------------------------------


def test_model_level_gating(small_map):
    mask = generate_mask(64, 11)
    s1 = build_sample(small_map, (50, 50), mask, 0.6, 1, 42)
    assert np.all(s1.junction_channel == 0) and np.all(s1.pattern_guidance == 0)
    s2 = build_sample(small_map, (50, 50), mask, 0.6, 2, 42)
    assert np.all(s2.pattern_guidance == 0)
    s3 = build_sample(small_map, (50, 50), mask, 0.6, 3, 42)
    assert s3.pattern_guidance.sum() > 0


def test_pattern_guidance_is_mask_intersection(small_map):
    mask = generate_mask(64, 13)
    origin = (30, 30)
    sample = build_sample(small_map, origin, mask, 0.5, 3, 1)
    patch = small_map["pattern"][30:94, 30:94]
    expected = patch * mask.grid
    assert np.array_equal(sample.pattern_guidance, expected)


def test_masking_identity_all_levels(small_map):
    for level in (1, 2, 3):
        for seed in range(10):
            mask = generate_mask(64, seed + 100)
            sample = build_sample(small_map, (seed, seed * 3), mask, 0.5, level, seed)
            sample.validate()
            assert np.all(sample.context_streets * mask.grid == 0)
            assert np.all(sample.noise * (1 - mask.grid) == 0)


def test_origin_out_of_bounds_errors(small_map):
    mask = generate_mask(64, 1)
    with pytest.raises(ValueError, match="exceeds map bounds"):
        build_sample(small_map, (390, 0), mask, 0.5, 1, 0)


def test_crop_patches_distinct_origins(small_map):
    samples = crop_patches(small_map, 25, 64, rng_seed=8, model_level=2)
    assert len({s.origin for s in samples}) == 25
    for sample in samples:
        sample.validate()


@settings(max_examples=25, deadline=None)
@given(
    seed=st.integers(0, 10_000),
    level=st.sampled_from([1, 2, 3]),
    fraction=st.floats(0.0, 1.0),
)
def test_sample_invariants_property(seed, level, fraction, small_map):
    mask = generate_mask(64, seed)
    rng = np.random.default_rng(seed)
    origin = (int(rng.integers(0, 336)), int(rng.integers(0, 336)))
    sample = build_sample(small_map, origin, mask, fraction, level, seed)
    sample.validate()
    assert sample.context_coverage == pytest.approx(1 - mask.area_fraction)


# ---------------------------------------------------------------------------
# Dataset persistence
# ---------------------------------------------------------------------------


def test_record_roundtrip(tmp_path, small_map):
    sample = build_sample(small_map, (20, 40), generate_mask(64, 3), 0.7, 3, 5)
    path = tmp_path / "r.sgrec"
    save_record(path, sample)
    loaded = load_record(path)
    for name in (
        "context_streets",
        "elevation",
        "aspect",
        "noise",
        "junction_channel",
        "pattern_guidance",
        "ground_truth_streets",
    ):
        assert np.array_equal(getattr(loaded, name), getattr(sample, name)), name
    assert np.array_equal(loaded.mask.grid, sample.mask.grid)
    assert loaded.origin == sample.origin
    assert loaded.junction_points == sample.junction_points
    assert loaded.retention_fraction == sample.retention_fraction


def test_dataset_build_is_byte_reproducible(tmp_path, small_map):
    a = build_dataset(small_map, tmp_path / "a", n=6, size=64, rng_seed=4, model_level=2)
    b = build_dataset(small_map, tmp_path / "b", n=6, size=64, rng_seed=4, model_level=2)
    manifest_a = (a / "manifest.json").read_text()
    manifest_b = (b / "manifest.json").read_text()
    assert manifest_a == manifest_b
    for rec in json.loads(manifest_a)["records"]:
        assert (a / rec["path"]).read_bytes() == (b / rec["path"]).read_bytes()


def test_dataset_loader_and_manifest_fields(tmp_path, small_map):
    root = build_dataset(
        small_map,
        tmp_path / "ds",
        n=5,
        size=64,
        rng_seed=9,
        model_level=3,
        retention_policy="60",
    )
    ds = Dataset(root)
    assert len(ds) == 5
    manifest = ds.manifest
    for key in ("map_source_hash", "seed", "size", "count", "model_level", "retention_policy"):
        assert key in manifest
    assert manifest["retention_policy"] == "60"
    sample = ds[0]
    sample.validate()
    assert sample.retention_fraction == 0.6
    assert sample.model_level == 3


def test_unknown_retention_policy_errors(tmp_path, small_map):
    with pytest.raises(ValueError, match="retention policy"):
        build_dataset(
            small_map, tmp_path / "x", n=2, size=64, rng_seed=0,
            model_level=2, retention_policy="55",
        )
