"""Drive the generation service in-process: place junctions, get proposals.

Spins the FastAPI app up with a test client (no network), issues two
requests that differ only in one junction node, and saves both composites
side by side so the guidance effect is visible.

Run: python demos/06_interactive_service.py [training_out_dir]
"""

import sys
import time
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
from fastapi.testclient import TestClient

from streetgen import PatternType, SynthSpec, grid_districts, synthesize_city_map
from streetgen.service import create_app, decode_png16, encode_png16, encode_png8

train_out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/04_toy_training")
checkpoints = sorted((train_out / "run").glob("ckpt_iter*.sgckpt"))
if not checkpoints:
    sys.exit("no checkpoints found; run demos/04_toy_training.py first")
out_dir = Path("demo_out/06_interactive_service")
out_dir.mkdir(parents=True, exist_ok=True)

client = TestClient(create_app(checkpoints[-1]))
print("health:", client.get("/health").json())
meta = client.get("/meta").json()
print("pattern legend:", meta["pattern_legend"])

spec = SynthSpec(
    extent=(1600.0, 1600.0),
    districts=grid_districts(
        (1600.0, 1600.0), 3, 3,
        [PatternType.ORTHOGONAL_GRID, PatternType.IRREGULAR_GRID],
        rng_seed=12, block_range=(48.0, 72.0),
    ),
    rng_seed=12,
)
city = synthesize_city_map(spec, resolution=2.0, binary_streets=True)
size, r0, c0 = 64, 120, 200
streets = city["streets"][r0 : r0 + size, c0 : c0 + size]
elevation = city["elevation"][r0 : r0 + size, c0 : c0 + size]
aspect = city["aspect"][r0 : r0 + size, c0 : c0 + size]
mask = np.zeros((size, size), dtype=np.uint8)
mask[16:52, 12:56] = 1
elo, ehi = float(elevation.min()), float(elevation.max()) + 1.0


def request_with(junctions):
    return {
        "mask": encode_png8(mask * 255),
        "context": {
            "streets": encode_png16(streets),
            "elevation": {"png": encode_png16(elevation, elo, ehi), "lo": elo, "hi": ehi},
            "aspect": {"png": encode_png16(aspect, -1.0, 360.0), "lo": -1.0, "hi": 360.0},
        },
        "junctions": junctions,
        "pattern_strokes": [],
        "seed": 5,
    }


proposals = {}
for label, junctions in (("junction at (30, 24)", [[30, 24]]), ("junction at (30, 48)", [[30, 48]])):
    started = time.perf_counter()
    body = client.post("/generate", json=request_with(junctions)).json()
    elapsed = time.perf_counter() - started
    proposals[label] = decode_png16(body["composite"])
    print(f"{label}: server {body['elapsed_ms']:.0f} ms, round trip {elapsed * 1000:.0f} ms")

fig, axes = plt.subplots(1, 3, figsize=(12, 4.2))
axes[0].imshow(streets, cmap="gray")
axes[0].contour(mask, levels=[0.5], colors="deepskyblue", linewidths=0.8)
axes[0].set_title("context + generation region")
for ax, (label, composite) in zip(axes[1:], proposals.items()):
    ax.imshow(composite, cmap="gray")
    ax.set_title(label, fontsize=9)
for ax in axes:
    ax.axis("off")
fig.tight_layout()
fig.savefig(out_dir / "proposals.png", dpi=110)
print(f"wrote {out_dir}/proposals.png")
