"""Train a small model on a synthetic corpus and plot the loss history.

Desk-scale stand-in for the full training protocol: same loop (one
discriminator update then one generator update per iteration, masked MSE
+ alpha-weighted adversarial term, Adam), smaller widths and patch size.

Run: python demos/04_toy_training.py [out_dir] [iterations]
Defaults train 300 iterations (~1-2 min on CPU); pass more for a better
model, e.g. 2000 for the acceptance-style run.
"""

import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from streetgen import (
    Dataset,
    LossConfig,
    PatternType,
    SynthSpec,
    TrainConfig,
    build_dataset,
    default_discriminator_spec,
    default_generator_spec,
    grid_districts,
    synthesize_city_map,
    train,
)

out_dir = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/04_toy_training")
iterations = int(sys.argv[2]) if len(sys.argv) > 2 else 300
out_dir.mkdir(parents=True, exist_ok=True)

spec = SynthSpec(
    extent=(1600.0, 1600.0),
    districts=grid_districts(
        (1600.0, 1600.0),
        3,
        3,
        [PatternType.ORTHOGONAL_GRID, PatternType.IRREGULAR_GRID],
        rng_seed=11,
        block_range=(48.0, 72.0),
    ),
    rng_seed=11,
)
city = synthesize_city_map(spec, resolution=2.0, binary_streets=True)

dataset_dir = out_dir / "dataset"
if not (dataset_dir / "manifest.json").exists():
    build_dataset(city, dataset_dir, n=512, size=64, rng_seed=101, model_level=2)
dataset = Dataset(dataset_dir)
print(f"dataset: {len(dataset)} records of {dataset.size}x{dataset.size} px")

gen_spec = default_generator_spec(2, base=16, mid_dilations=(2, 4))
disc_spec = default_discriminator_spec(input_size=64, base=16, neck_channels=64)
result = train(
    dataset,
    model_level=2,
    gen_spec=gen_spec,
    disc_spec=disc_spec,
    loss_config=LossConfig(alpha=0.005),
    config=TrainConfig(iterations=iterations, batch_size=8, seed=7, lr=3e-4,
                       checkpoint_every=500),
    out_dir=out_dir / "run",
)
print(f"trained {len(result.history)} iterations")
print(f"checkpoints: {[p.name for p in result.checkpoints]}")
print(f"history: {result.history_csv}")

its = [row["iteration"] for row in result.history]
fig, axes = plt.subplots(1, 3, figsize=(14, 4))
for ax, key in zip(axes, ("mse", "g_adv", "d_loss")):
    ax.plot(its, [row[key] for row in result.history], lw=0.8)
    ax.set_title(key)
    ax.set_xlabel("iteration")
fig.tight_layout()
fig.savefig(out_dir / "losses.png", dpi=110)
print(f"wrote {out_dir}/losses.png")
