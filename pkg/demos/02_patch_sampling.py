"""Sample training records from a map: masks, noise, junction retention.

Shows one record per model level and the masking invariants that every
record satisfies (context zeroed inside the generation region, noise and
guidance confined to it).

Run: python demos/02_patch_sampling.py [out_dir]
"""

import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from streetgen import (
    PatternType,
    SynthSpec,
    build_sample,
    generate_mask,
    grid_districts,
    synthesize_city_map,
)

out_dir = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/02_patch_sampling")
out_dir.mkdir(parents=True, exist_ok=True)

spec = SynthSpec(
    extent=(1200.0, 1200.0),
    districts=grid_districts(
        (1200.0, 1200.0),
        2,
        2,
        [PatternType.ORTHOGONAL_GRID, PatternType.MEDIEVAL],
        rng_seed=3,
        block_range=(70.0, 100.0),
    ),
    rng_seed=3,
)
city = synthesize_city_map(spec, resolution=2.0)

mask = generate_mask(128, rng_seed=5)
print(f"mask area fraction {mask.area_fraction:.2f} -> context coverage {mask.context_coverage:.2f}")

fig, axes = plt.subplots(3, 5, figsize=(16, 10))
for row, level in enumerate((1, 2, 3)):
    sample = build_sample(city, (180, 200), mask, retention_fraction=0.6,
                          model_level=level, rng_seed=11)
    assert np.all(sample.context_streets * mask.grid == 0)
    assert np.all(sample.noise * (1 - mask.grid) == 0)
    panels = [
        ("context streets", sample.context_streets, "gray"),
        ("mask", sample.mask.grid, "Blues"),
        ("noise", sample.noise, "viridis"),
        ("junction guidance", sample.junction_channel, "magma"),
        ("pattern guidance", sample.pattern_guidance, "tab10"),
    ]
    for col, (title, channel, cmap) in enumerate(panels):
        ax = axes[row, col]
        ax.imshow(channel, cmap=cmap)
        ax.set_ylabel(f"model {level}" if col == 0 else "")
        if row == 0:
            ax.set_title(title)
        ax.set_xticks([]), ax.set_yticks([])
    kept = int((sample.junction_channel > 0).sum())
    print(f"model {level}: junction px {kept}, pattern px {int((sample.pattern_guidance > 0).sum())}")

fig.tight_layout()
fig.savefig(out_dir / "levels.png", dpi=110)
print(f"wrote {out_dir}/levels.png")
