"""Command-line umbrella: ingest, synth, sample, train, eval, serve."""

from __future__ import annotations

import json
from pathlib import Path

import click

from . import storage
from .geometry import MapFrame, PatternType
from .rasterize import (
    DEFAULT_CLASS_DILATION,
    assemble_map,
    compute_aspect,
    rasterize_pattern_annotation,
    rasterize_streets,
)


@click.group()
def main():
    """Street-network infill toolkit."""


@main.command()
@click.option("--streets", "streets_path", required=True, type=click.Path(exists=True), help="GeoJSON LineStrings with a 'highway' property")
@click.option("--dem", "dem_path", required=True, type=click.Path(exists=True), help="16-bit PNG or channel archive with an 'elevation' channel")
@click.option("--patterns", "patterns_path", type=click.Path(exists=True), help="GeoJSON Polygons with a 'pattern' property")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--origin", nargs=2, type=float, default=(0.0, 0.0), show_default=True, help="map coordinates of the bottom-left corner")
@click.option("--resolution", type=float, default=2.0, show_default=True, help="meters per pixel")
@click.option("--dem-scale", type=float, default=1.0, show_default=True)
@click.option("--dem-offset", type=float, default=0.0, show_default=True)
@click.option("--binary/--grayscale", "binary", default=False, show_default=True, help="collapse the hierarchy encoding to a binary street channel")
@click.option("--dilate/--no-dilate", "dilate", default=True, show_default=True, help="thicken street lines per hierarchy class")
def ingest(streets_path, dem_path, patterns_path, out_path, origin, resolution, dem_scale, dem_offset, binary, dilate):
    """Rasterize vector streets + DEM + annotations into a map archive."""
    elevation = storage.load_dem(dem_path, scale=dem_scale, offset=dem_offset)
    frame = MapFrame(
        origin=tuple(origin),
        resolution=resolution,
        width=elevation.shape[1],
        height=elevation.shape[0],
    )
    segments = storage.streets_from_geojson(storage.read_geojson(streets_path))
    polygons = (
        storage.patterns_from_geojson(storage.read_geojson(patterns_path))
        if patterns_path
        else []
    )
    streets = rasterize_streets(
        segments,
        frame,
        dilation=DEFAULT_CLASS_DILATION if dilate else None,
        binary=binary,
    )
    aspect = compute_aspect(elevation, resolution)
    pattern = rasterize_pattern_annotation(polygons, frame)

    from .sampling import extract_junctions, render_junctions

    junctions = extract_junctions(segments=segments, frame=frame)
    junction_channel = render_junctions(junctions.points, frame.shape, dilate=False)
    mc_map = assemble_map(
        streets, elevation, aspect, pattern, frame, junctions=junction_channel
    )
    mc_map.save(out_path)
    click.echo(
        f"wrote {out_path}: {frame.width}x{frame.height}px at {resolution} m/px, "
        f"{len(segments)} street segments, {len(junctions)} junctions"
    )


@main.command()
@click.option("--spec", "spec_path", type=click.Path(exists=True), help="SynthSpec JSON")
@click.option("--preset", type=click.Choice(["grids", "mixed"]), help="generate a built-in spec instead of --spec")
@click.option("--extent", nargs=2, type=float, default=(2000.0, 2000.0), show_default=True, help="preset extent in meters")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--resolution", type=float, default=2.0, show_default=True)
def synth(spec_path, preset, extent, seed, out_dir, resolution):
    """Generate a synthetic city: GeoJSON streets/patterns + DEM archive."""
    from . import synthcity
    from .synthcity import SynthSpec, grid_districts, synth_map

    if (spec_path is None) == (preset is None):
        raise click.UsageError("pass exactly one of --spec or --preset")
    if spec_path:
        spec = SynthSpec.load(spec_path)
    else:
        patterns = {
            "grids": [PatternType.ORTHOGONAL_GRID, PatternType.IRREGULAR_GRID],
            "mixed": [
                PatternType.ORTHOGONAL_GRID,
                PatternType.IRREGULAR_GRID,
                PatternType.MEDIEVAL,
                PatternType.LINEAR_DEVELOPMENT,
                PatternType.GATED_COMPOUND,
            ],
        }[preset]
        spec = SynthSpec(
            extent=tuple(extent),
            districts=grid_districts(tuple(extent), 3, 3, patterns, rng_seed=seed),
            rng_seed=seed,
        )
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    segments, polygons, elevation = synth_map(spec, resolution)
    storage.write_geojson(out_dir / "streets.geojson", storage.streets_to_geojson(segments))
    storage.write_geojson(out_dir / "patterns.geojson", storage.patterns_to_geojson(polygons))
    storage.save_channel_archive(
        out_dir / "dem.sgmap",
        {"elevation": elevation},
        {
            "format": storage.MAP_FORMAT,
            "version": storage.FORMAT_VERSION,
            "origin": [0.0, 0.0],
            "resolution": resolution,
            "width": elevation.shape[1],
            "height": elevation.shape[0],
            "hierarchy_intensity": {},
            "pattern_codes": {},
        },
    )
    spec.save(out_dir / "synth_spec.json")
    click.echo(
        f"wrote {out_dir}: {len(segments)} street segments, "
        f"{len(polygons)} pattern polygons, DEM {elevation.shape[1]}x{elevation.shape[0]}px"
    )


@main.command()
@click.option("--map", "map_path", required=True, type=click.Path(exists=True))
@click.option("--n", "count", required=True, type=int)
@click.option("--size", type=int, default=256, show_default=True)
@click.option("--model-level", type=click.IntRange(1, 3), default=3, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--area-range", nargs=2, type=float, default=(0.1, 0.7), show_default=True)
@click.option("--retention", type=click.Choice(["random", "30", "60", "90"]), default="random", show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
def sample(map_path, count, size, model_level, seed, area_range, retention, out_dir):
    """Crop unrepeated patches into a training/testing dataset."""
    from .rasterize import MultiChannelMap
    from .sampling import build_dataset

    mc_map = MultiChannelMap.load(map_path)
    build_dataset(
        mc_map,
        out_dir,
        n=count,
        size=size,
        rng_seed=seed,
        model_level=model_level,
        area_range=tuple(area_range),
        retention_policy=retention,
        map_path=map_path,
    )
    click.echo(f"wrote {count} records to {out_dir}")


@main.command()
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(exists=True))
@click.option("--model-level", type=click.IntRange(1, 3), required=True)
@click.option("--epochs", type=int, default=1, show_default=True)
@click.option("--iterations", type=int, default=None, help="overrides --epochs when set")
@click.option("--batch", "batch_size", type=int, default=8, show_default=True)
@click.option("--alpha", type=float, default=0.01, show_default=True)
@click.option("--lr", type=float, default=2e-4, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--base-channels", type=int, default=64, show_default=True, help="generator width; the full-scale table uses 64")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--reference-mode/--fast-mode", default=False, show_default=True, help="single-threaded bit-reproducible training")
def train(dataset_dir, model_level, epochs, iterations, batch_size, alpha, lr, seed, base_channels, out_dir, reference_mode):
    """Adversarial training over a sampled dataset."""
    from .networks import default_discriminator_spec, default_generator_spec
    from .sampling import Dataset
    from .training import LossConfig, TrainConfig, train as run_train

    dataset = Dataset(dataset_dir)
    mid = (2, 4, 8, 16) if dataset.size >= 128 else (2, 4)
    gen_spec = default_generator_spec(model_level, base=base_channels, mid_dilations=mid)
    disc_spec = default_discriminator_spec(
        input_size=dataset.size, base=base_channels, neck_channels=base_channels * 4
    )
    result = run_train(
        dataset,
        model_level,
        gen_spec,
        disc_spec,
        LossConfig(alpha=alpha),
        TrainConfig(
            epochs=epochs,
            iterations=iterations,
            batch_size=batch_size,
            seed=seed,
            lr=lr,
            reference_mode=reference_mode,
        ),
        out_dir,
    )
    click.echo(
        f"trained {len(result.history)} iterations; final checkpoint "
        f"{result.checkpoints[-1]}; history at {result.history_csv}"
    )


@main.command(name="eval")
@click.option("--checkpoint", "checkpoint_path", required=True, type=click.Path(exists=True))
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(exists=True))
@click.option("--retention", type=click.Choice(["random", "30", "60", "90"]), default="random", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--binarize/--raw", default=False, show_default=True)
@click.option("--out", "out_prefix", required=True, type=click.Path())
@click.option("--figure/--no-figure", default=False, show_default=True, help="also render the coverage-vs-error histogram PNG")
def eval_cmd(checkpoint_path, dataset_dir, retention, seed, binarize, out_prefix, figure):
    """Compute mean l1/l2 errors and the coverage analysis for a checkpoint."""
    from .evaluation import render_coverage_figure, run_experiment
    from .sampling import Dataset

    report = run_experiment(
        checkpoint_path,
        Dataset(dataset_dir),
        retention_policy=retention,
        rng_seed=seed,
        binarize=binarize,
    )
    json_path = report.save(out_prefix)
    if figure:
        render_coverage_figure(report, Path(out_prefix).with_suffix(".png"))
    click.echo(
        f"{report.label}: mean l1 {100 * report.mean_l1:.2f}%, "
        f"mean l2 {100 * report.mean_l2:.2f}% over {len(report.results)} samples "
        f"-> {json_path}"
    )


@main.command()
@click.option("--checkpoint", "checkpoint_path", required=True, type=click.Path(exists=True))
@click.option("--port", type=int, default=8080, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--map", "map_path", type=click.Path(exists=True), help="optional map archive enabling map_ref requests")
@click.option("--ui-dir", type=click.Path(exists=True), help="serve a built studio UI from /ui")
def serve(checkpoint_path, port, host, map_path, ui_dir):
    """Run the interactive generation service."""
    from .service import serve as run_serve

    run_serve(checkpoint_path, port=port, host=host, map_path=map_path, ui_dir=ui_dir)


if __name__ == "__main__":
    main()
