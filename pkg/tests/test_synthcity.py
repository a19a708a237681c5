import numpy as np
import pytest

from streetgen.geometry import MapFrame, PatternType, Polygon2D, RoadClass
from streetgen.rasterize import rasterize_streets
from streetgen.synthcity import (
    District,
    Hill,
    SynthSpec,
    grid_districts,
    synth_elevation,
    synth_map,
    synthesize_city_map,
)


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------


def boundary_crossing_count(segments, polygon: Polygon2D) -> int:
    """Segments leaving the district: one endpoint strictly inside, the
    other on or beyond the boundary."""
    from shapely.geometry import Point
    from shapely.geometry import Polygon as ShapelyPolygon

    poly = ShapelyPolygon(polygon.vertices)
    crossings = 0
    for seg in segments:
        for a, b in zip(seg.polyline, seg.polyline[1:]):
            inside_a = poly.contains(Point(a))  # strict interior
            inside_b = poly.contains(Point(b))
            if inside_a != inside_b:
                crossings += 1
    return crossings


def square_district(pattern, size=1000.0, **kwargs):
    poly = Polygon2D(((0.0, 0.0), (size, 0.0), (size, size), (0.0, size)))
    return District(polygon=poly, pattern=pattern, **kwargs)


def single_district_spec(pattern, size=1000.0, seed=0, **kwargs):
    return SynthSpec(
        extent=(size, size),
        districts=(square_district(pattern, size, **kwargs),),
        rng_seed=seed,
        emit_district_boundaries=False,
    )


# ---------------------------------------------------------------------------
# Grid generators
# ---------------------------------------------------------------------------


def test_orthogonal_grid_line_counts_analytic():
    # 1x1 km district, 100 m blocks, orientation 0: lines at 0,100,...,1000
    spec = single_district_spec(
        PatternType.ORTHOGONAL_GRID, block_size=100.0, orientation_deg=0.0
    )
    segments, _, _ = synth_map(spec)
    verticals = [
        s for s in segments
        if len({round(x, 6) for x, _ in s.polyline}) == 1
    ]
    horizontals = [
        s for s in segments
        if len({round(y, 6) for _, y in s.polyline}) == 1
    ]
    assert len(verticals) == 11
    assert len(horizontals) == 11
    assert len(segments) == 22


def test_zero_irregularity_equals_orthogonal():
    ortho = single_district_spec(
        PatternType.ORTHOGONAL_GRID, block_size=90.0, orientation_deg=20.0,
        irregularity=0.7,  # ignored by the orthogonal generator
    )
    irregular = single_district_spec(
        PatternType.IRREGULAR_GRID, block_size=90.0, orientation_deg=20.0,
        irregularity=0.0,
    )
    seg_a, _, _ = synth_map(ortho)
    seg_b, _, _ = synth_map(irregular)
    assert len(seg_a) == len(seg_b)
    for a, b in zip(seg_a, seg_b):
        assert a.road_class == b.road_class
        assert np.allclose(a.vertex_array(), b.vertex_array())


def test_irregularity_moves_vertices():
    base = single_district_spec(
        PatternType.IRREGULAR_GRID, block_size=90.0, irregularity=0.0
    )
    bent = single_district_spec(
        PatternType.IRREGULAR_GRID, block_size=90.0, irregularity=0.8
    )
    seg_a, _, _ = synth_map(base)
    seg_b, _, _ = synth_map(bent)
    flat_a = np.concatenate([s.vertex_array() for s in seg_a])
    flat_b = np.concatenate([s.vertex_array() for s in seg_b])
    assert flat_a.shape != flat_b.shape or not np.allclose(flat_a, flat_b)


def test_gated_compound_single_entrance():
    for seed in range(6):
        spec = single_district_spec(PatternType.GATED_COMPOUND, size=400.0, seed=seed,
                                    block_size=100.0)
        segments, _, _ = synth_map(spec)
        crossings = boundary_crossing_count(segments, spec.districts[0].polygon)
        assert crossings == 1, f"seed {seed}: {crossings} boundary crossings"


def test_linear_development_has_spine_and_stubs():
    spec = single_district_spec(
        PatternType.LINEAR_DEVELOPMENT, size=600.0, block_size=80.0,
        orientation_deg=30.0,
    )
    segments, _, _ = synth_map(spec)
    classes = {s.road_class for s in segments}
    assert RoadClass.TERTIARY in classes  # the spine
    assert RoadClass.RESIDENTIAL in classes  # the stubs
    assert len(segments) > 5


def test_medieval_is_tangled_but_connected_to_boundary():
    spec = single_district_spec(PatternType.MEDIEVAL, size=500.0, block_size=90.0)
    segments, _, _ = synth_map(spec)
    assert len(segments) > 10
    # at least one vertex must sit on the district boundary
    on_boundary = 0
    for seg in segments:
        for x, y in seg.polyline:
            if min(x, y) < 1e-6 or max(x, y) > 500.0 - 1e-6:
                on_boundary += 1
    assert on_boundary >= 1


# ---------------------------------------------------------------------------
# Whole-map properties
# ---------------------------------------------------------------------------


def mixed_spec(seed=3):
    return SynthSpec(
        extent=(800.0, 800.0),
        districts=grid_districts(
            (800.0, 800.0),
            2,
            2,
            [
                PatternType.ORTHOGONAL_GRID,
                PatternType.MEDIEVAL,
                PatternType.GATED_COMPOUND,
                PatternType.LINEAR_DEVELOPMENT,
            ],
            rng_seed=seed,
            block_range=(60.0, 90.0),
        ),
        rng_seed=seed,
    )


def test_street_network_is_one_connected_component():
    from scipy import ndimage

    spec = mixed_spec()
    frame = MapFrame(origin=(0.0, 0.0), resolution=2.0, width=400, height=400)
    segments, _, _ = synth_map(spec)
    streets = rasterize_streets(segments, frame)
    labels, n = ndimage.label(streets > 0, structure=np.ones((3, 3)))
    assert n == 1


def test_pattern_polygons_match_districts_one_to_one():
    spec = mixed_spec()
    _, polygons, _ = synth_map(spec)
    assert len(polygons) == len(spec.districts)
    for (poly, ptype), district in zip(polygons, spec.districts):
        assert poly is district.polygon
        assert ptype == district.pattern


def test_determinism_under_fixed_seed():
    a_seg, a_poly, a_elev = synth_map(mixed_spec(9))
    b_seg, b_poly, b_elev = synth_map(mixed_spec(9))
    assert len(a_seg) == len(b_seg)
    for a, b in zip(a_seg, b_seg):
        assert a == b
    assert np.array_equal(a_elev, b_elev)


def test_different_seed_changes_layout():
    a_seg, _, _ = synth_map(mixed_spec(1))
    b_seg, _, _ = synth_map(mixed_spec(2))
    assert a_seg != b_seg


def test_empty_district_list_rejected():
    with pytest.raises(ValueError, match="must not be empty"):
        SynthSpec(extent=(100.0, 100.0), districts=())


def test_gap_validation():
    tiny = District(
        polygon=Polygon2D(((0.0, 0.0), (100.0, 0.0), (100.0, 100.0), (0.0, 100.0))),
        pattern=PatternType.ORTHOGONAL_GRID,
        block_size=50.0,
    )
    with pytest.raises(ValueError, match="gap larger than one block"):
        SynthSpec(extent=(1000.0, 1000.0), districts=(tiny,))


def test_spec_json_roundtrip(tmp_path):
    spec = mixed_spec(4)
    path = tmp_path / "spec.json"
    spec.save(path)
    loaded = SynthSpec.load(path)
    assert loaded == spec


def test_elevation_hills_shape_and_determinism():
    spec = mixed_spec(5)
    frame = MapFrame(origin=(0.0, 0.0), resolution=2.0, width=400, height=400)
    a = synth_elevation(spec, frame)
    b = synth_elevation(spec, frame)
    assert a.shape == frame.shape
    assert np.array_equal(a, b)
    assert a.max() > 5.0  # the hills exist
    explicit = synth_elevation(
        spec, frame, hills=(Hill(center=(400.0, 400.0), amplitude=30.0, sigma=200.0),)
    )
    center_val = explicit[200, 200]
    assert abs(center_val - 30.0) < 1.0


def test_synthesize_city_map_channels(binary_map):
    assert set(binary_map.channels) >= {"streets", "elevation", "aspect", "pattern", "junctions"}
    assert set(np.unique(binary_map["streets"])) <= {0.0, 1.0}
    assert (binary_map["pattern"] > 0).mean() > 0.5
    assert binary_map["junctions"].sum() > 20
