import numpy as np
import pytest

from streetgen.geometry import MapFrame, PatternType
from streetgen.synthcity import SynthSpec, grid_districts, synthesize_city_map


@pytest.fixture(scope="session")
def small_map():
    """A 400x400 px mixed synthetic map shared by sampler/eval tests."""
    spec = SynthSpec(
        extent=(800.0, 800.0),
        districts=grid_districts(
            (800.0, 800.0),
            2,
            2,
            [
                PatternType.ORTHOGONAL_GRID,
                PatternType.IRREGULAR_GRID,
                PatternType.MEDIEVAL,
                PatternType.GATED_COMPOUND,
            ],
            rng_seed=3,
            block_range=(60.0, 90.0),
        ),
        rng_seed=3,
    )
    return synthesize_city_map(spec, resolution=2.0)


@pytest.fixture(scope="session")
def binary_map():
    """Binary-street variant used by training-oriented tests."""
    spec = SynthSpec(
        extent=(600.0, 600.0),
        districts=grid_districts(
            (600.0, 600.0),
            2,
            2,
            [PatternType.ORTHOGONAL_GRID, PatternType.IRREGULAR_GRID],
            rng_seed=5,
            block_range=(48.0, 72.0),
        ),
        rng_seed=5,
    )
    return synthesize_city_map(spec, resolution=2.0, binary_streets=True)
