"""Context-aware street-network infill toolkit.

Pipeline: vector/DEM ingestion into multi-channel raster maps, patch
sampling with masks and planning-guidance channels, a conditional
adversarial inpainting model, training and evaluation harnesses, and an
interactive HTTP generation service.
"""

from .geometry import (
    HIERARCHY_INTENSITY,
    PATTERN_LEGEND,
    MapFrame,
    PatternType,
    Polygon2D,
    RoadClass,
    StreetSegment,
)
from .rasterize import (
    MultiChannelMap,
    assemble_map,
    compute_aspect,
    rasterize_pattern_annotation,
    rasterize_streets,
)
from .sampling import (
    Dataset,
    JunctionSet,
    Mask,
    PatchSample,
    build_dataset,
    build_sample,
    crop_origins,
    crop_patches,
    extract_junctions,
    generate_mask,
    make_noise_channel,
    retain_junctions,
)
from .synthcity import District, Hill, SynthSpec, grid_districts, synth_map, synthesize_city_map
from .networks import (
    DiscriminatorSpec,
    GeneratorSpec,
    composite,
    default_discriminator_spec,
    default_generator_spec,
    discriminator_forward,
    generator_forward,
    spectral_normalize,
)
from .training import (
    LossConfig,
    TrainConfig,
    adam_step,
    adversarial_terms,
    combined_generator_objective,
    init_adam,
    mse_loss,
    train,
)
from .evaluation import (
    EvalReport,
    SampleResult,
    context_coverage,
    coverage_histogram,
    l1_error,
    l2_error,
    run_experiment,
)

__version__ = "0.1.0"
