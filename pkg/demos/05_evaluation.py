"""Evaluate a trained checkpoint: mean l1/l2 errors and coverage analysis.

Reuses the artifacts from demos/04_toy_training.py (run that first), adds
a held-out test corpus from a different synthetic city, compares junction
retention levels, and renders the coverage-vs-error histogram.

Run: python demos/05_evaluation.py [training_out_dir]
"""

import sys
from pathlib import Path

from streetgen import (
    Dataset,
    PatternType,
    SynthSpec,
    build_dataset,
    grid_districts,
    run_experiment,
    synthesize_city_map,
)
from streetgen.evaluation import render_coverage_figure

train_out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/04_toy_training")
checkpoints = sorted((train_out / "run").glob("ckpt_iter*.sgckpt"))
if not checkpoints:
    sys.exit("no checkpoints found; run demos/04_toy_training.py first")
checkpoint = checkpoints[-1]
out_dir = Path("demo_out/05_evaluation")
out_dir.mkdir(parents=True, exist_ok=True)

spec = SynthSpec(
    extent=(1600.0, 1600.0),
    districts=grid_districts(
        (1600.0, 1600.0),
        3,
        3,
        [PatternType.ORTHOGONAL_GRID, PatternType.IRREGULAR_GRID],
        rng_seed=12,
        block_range=(48.0, 72.0),
    ),
    rng_seed=12,
)
test_city = synthesize_city_map(spec, resolution=2.0, binary_streets=True)
test_dir = out_dir / "test_dataset"
if not (test_dir / "manifest.json").exists():
    build_dataset(test_city, test_dir, n=160, size=64, rng_seed=202, model_level=2)
test_dataset = Dataset(test_dir)

print(f"checkpoint: {checkpoint.name}")
for policy in ("random", "30", "60", "90"):
    report = run_experiment(checkpoint, test_dataset, retention_policy=policy, rng_seed=0)
    print(
        f"retention {policy:>6}: mean l1 {100 * report.mean_l1:5.2f}%  "
        f"mean l2 {100 * report.mean_l2:5.2f}%  ({len(report.results)} samples)"
    )
    if policy == "random":
        report.save(out_dir / "report_random")
        render_coverage_figure(report, out_dir / "coverage_vs_error.png")

print(f"wrote {out_dir}/report_random.json and coverage_vs_error.png")
