"""Tour of the model pieces: losses, Adam, spectral norm, forward shapes.

Everything here is a pure computation with hand-checkable numbers, so it
doubles as a playground for the pieces the trainer assembles.

Run: python demos/03_losses_and_networks.py
"""

import math

import numpy as np
import torch

from streetgen import (
    adam_step,
    adversarial_terms,
    combined_generator_objective,
    default_discriminator_spec,
    default_generator_spec,
    init_adam,
    mse_loss,
    spectral_normalize,
)
from streetgen.networks import init_discriminator, init_generator, receptive_field

# --- masked reconstruction loss -------------------------------------------
gen = np.full((2, 2), 0.75)
gt = np.full((2, 2), 0.25)
ones = np.ones((2, 2))
print(f"masked MSE (per pixel):   {float(mse_loss(gen, gt, ones)):.4f}  (expect 0.25)")
print(f"masked MSE (unnormalized): {float(mse_loss(gen, gt, ones, 'unnormalized')):.4f}  (expect 1.00)")

# --- adversarial terms ------------------------------------------------------
d_loss, g_adv = adversarial_terms(0.5, 0.5)
print(f"d_loss at (0.5, 0.5): {float(d_loss):.6f}  (expect 2 ln 2 = {2 * math.log(2):.6f})")
print(f"combined objective:   {combined_generator_objective(0.04, float(g_adv), 0.01):.6f}")

# --- Adam first step ---------------------------------------------------------
params = {"w": torch.tensor([1.0], dtype=torch.float64)}
state = init_adam(params, lr=0.001)
adam_step(params, {"w": torch.tensor([1.0], dtype=torch.float64)}, state)
print(f"Adam t=1 update: {1.0 - float(params['w']):.9f}  (expect ~0.001)")

# --- spectral normalization --------------------------------------------------
w = np.diag([2.0, 1.0])
psn = None
for _ in range(100):
    w_norm, psn = spectral_normalize(np.diag([2.0, 1.0]), psn)
print(f"spectral norm of diag(2,1) after 100 iters:\n{np.round(w_norm, 4)}")

# --- network shapes ----------------------------------------------------------
for level in (1, 2, 3):
    spec = default_generator_spec(level)
    g = init_generator(spec, seed=0).eval()
    with torch.no_grad():
        out = g(torch.rand(1, spec.input_channels, 256, 256))
    shapes = dict(g.trace_shapes(256))
    bottleneck = shapes[f"encoder.{len(spec.encoder) - 1}"]
    print(
        f"model {level}: input {spec.input_channels}ch -> output {tuple(out.shape[1:])}, "
        f"bottleneck {bottleneck}, receptive field {receptive_field(spec)} px"
    )

disc = init_discriminator(default_discriminator_spec(input_size=64), seed=1).eval()
with torch.no_grad():
    prob = disc(torch.rand(1, 1, 64, 64), torch.rand(1, 6, 64, 64))
print(f"discriminator: {len(disc.body)} spectral-norm blocks -> p(real) = {float(prob):.3f}")
