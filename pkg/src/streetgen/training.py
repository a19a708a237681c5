"""Losses, Adam optimizer, and the alternating adversarial training loop.

The generation loss is a masked mean-squared error over the generation
region; the adversarial loss is the standard min-max objective on the
conditional discriminator, weighted by ``alpha`` in the combined
generator objective. Each iteration runs one discriminator update
followed by one generator update.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import torch

from . import storage
from .networks import (
    Discriminator,
    DiscriminatorSpec,
    Generator,
    GeneratorSpec,
    composite,
    condition_stack,
    init_discriminator,
    init_generator,
    input_stack,
    model_level_channels,
    params_to_arrays,
)
from .sampling import Dataset, PatchSample

PROB_EPS = 1e-7

MSE_NORMALIZATIONS = ("per_pixel", "unnormalized")


@dataclass(frozen=True)
class LossConfig:
    alpha: float = 0.01
    mse_normalization: str = "per_pixel"
    saturating_generator: bool = False
    masked_real: bool = False

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.mse_normalization not in MSE_NORMALIZATIONS:
            raise ValueError(
                f"mse_normalization must be one of {MSE_NORMALIZATIONS}, "
                f"got {self.mse_normalization!r}"
            )


def mse_loss(generated, ground_truth, mask, normalization: str = "per_pixel"):
    """Squared error over generation-region pixels.

    ``per_pixel`` divides by the number of masked pixels (at least 1);
    ``unnormalized`` keeps the raw squared Euclidean norm of the masked
    difference.
    """
    if normalization not in MSE_NORMALIZATIONS:
        raise ValueError(f"unknown mse normalization {normalization!r}")
    gen = generated if torch.is_tensor(generated) else torch.as_tensor(
        np.asarray(generated, dtype=np.float64)
    )
    gt = ground_truth if torch.is_tensor(ground_truth) else torch.as_tensor(
        np.asarray(ground_truth), dtype=gen.dtype
    )
    m = mask.to(gen.dtype) if torch.is_tensor(mask) else torch.as_tensor(
        np.asarray(mask), dtype=gen.dtype
    )
    if gen.shape != gt.shape:
        raise ValueError(
            f"generated shape {tuple(gen.shape)} != ground truth {tuple(gt.shape)}"
        )
    m = torch.broadcast_to(m, gen.shape)
    masked = (gen - gt) * m
    total = (masked * masked).sum()
    if normalization == "unnormalized":
        return total
    count = m.sum().clamp_min(1.0)
    return total / count


def generator_adversarial_term(d_fake, saturating: bool = False):
    """Generator-side adversarial loss from fake probabilities.

    Defaults to the non-saturating -log d_fake; the literal saturating
    log(1 - d_fake) form sits behind the flag.
    """
    f = d_fake if torch.is_tensor(d_fake) else torch.as_tensor(d_fake, dtype=torch.float64)
    f = f.clamp(PROB_EPS, 1 - PROB_EPS)
    if saturating:
        return torch.log1p(-f).mean()
    return -torch.log(f).mean()


def adversarial_terms(d_real, d_fake, saturating: bool = False):
    """(discriminator loss, generator adversarial loss) from probabilities.

    The discriminator maximizes log d_real + log(1 - d_fake); its loss is
    the negation. Probabilities are clamped away from {0, 1} before logs.
    """
    r = d_real if torch.is_tensor(d_real) else torch.as_tensor(d_real, dtype=torch.float64)
    f = d_fake if torch.is_tensor(d_fake) else torch.as_tensor(d_fake, dtype=torch.float64)
    r = r.clamp(PROB_EPS, 1 - PROB_EPS)
    f = f.clamp(PROB_EPS, 1 - PROB_EPS)
    d_loss = -(torch.log(r).mean() + torch.log1p(-f).mean())
    return d_loss, generator_adversarial_term(f, saturating)


def combined_generator_objective(mse, g_adv, alpha: float):
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    return mse + alpha * g_adv


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------


@dataclass
class AdamState:
    m: dict[str, torch.Tensor]
    v: dict[str, torch.Tensor]
    t: int = 0
    lr: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_adam(
    params: dict[str, torch.Tensor],
    lr: float = 2e-4,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> AdamState:
    return AdamState(
        m={k: torch.zeros_like(p) for k, p in params.items()},
        v={k: torch.zeros_like(p) for k, p in params.items()},
        t=0,
        lr=lr,
        beta1=beta1,
        beta2=beta2,
        eps=eps,
    )


def adam_step(
    params: dict[str, torch.Tensor],
    grads: dict[str, torch.Tensor],
    state: AdamState,
) -> tuple[dict[str, torch.Tensor], AdamState]:
    """One bias-corrected Adam update, applied in place.

    Matches the reference recurrence: m and v are exponential moving
    averages of the gradient and its square, bias-corrected by 1 - beta^t,
    and the step is lr * m_hat / (sqrt(v_hat) + eps).
    """
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    with torch.no_grad():
        for name, p in params.items():
            g = grads.get(name)
            if g is None:
                continue
            if not torch.isfinite(g).all():
                raise FloatingPointError(
                    f"non-finite gradient for parameter '{name}'"
                )
            if g.shape != p.shape:
                raise ValueError(
                    f"gradient shape {tuple(g.shape)} != parameter "
                    f"{tuple(p.shape)} for '{name}'"
                )
            m = state.m[name]
            v = state.v[name]
            m.mul_(b1).add_(g, alpha=1 - b1)
            v.mul_(b2).addcmul_(g, g, value=1 - b2)
            m_hat = m / (1 - b1**state.t)
            v_hat = v / (1 - b2**state.t)
            p.add_(-state.lr * m_hat / (v_hat.sqrt() + state.eps))
    return params, state


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


@dataclass
class TrainConfig:
    epochs: int = 1
    iterations: int | None = None  # overrides epochs when set
    batch_size: int = 8
    seed: int = 0
    lr: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    checkpoint_every: int = 500
    reference_mode: bool = False


@dataclass
class TrainResult:
    checkpoints: list[Path]
    history: list[dict]
    history_csv: Path
    init_checkpoint: Path


def iterations_per_epoch(n_samples: int, batch_size: int) -> int:
    """Full batches per pass over the data (trailing partial batch dropped)."""
    if batch_size <= 0:
        raise ValueError(f"batch size must be positive, got {batch_size}")
    return n_samples // batch_size


class _TensorDataset:
    """Dataset records preloaded as stacked training tensors."""

    def __init__(self, dataset: Iterable[PatchSample], model_level: int):
        xs, conds, gts, masks = [], [], [], []
        for sample in dataset:
            if sample.model_level < model_level:
                raise ValueError(
                    f"sample built for model level {sample.model_level} lacks "
                    f"guidance channels for training level {model_level}"
                )
            xs.append(input_stack(sample, model_level=model_level))
            conds.append(condition_stack(sample))
            gts.append(sample.ground_truth_streets[None].astype(np.float32))
            masks.append(sample.mask.grid[None].astype(np.float32))
        self.x = torch.from_numpy(np.stack(xs))
        self.cond = torch.from_numpy(np.stack(conds))
        self.gt = torch.from_numpy(np.stack(gts))
        self.mask = torch.from_numpy(np.stack(masks))

    def __len__(self) -> int:
        return self.x.shape[0]


def _named_params(module: torch.nn.Module) -> dict[str, torch.Tensor]:
    return dict(module.named_parameters())


def _grads(module: torch.nn.Module) -> dict[str, torch.Tensor]:
    return {
        name: p.grad for name, p in module.named_parameters() if p.grad is not None
    }


def _save_checkpoint(
    path: Path,
    generator: Generator,
    discriminator: Discriminator,
    model_level: int,
    config: TrainConfig,
    loss_config: LossConfig,
    iteration: int,
    epoch: int,
) -> Path:
    storage.save_checkpoint(
        path,
        params={
            "generator": params_to_arrays(generator),
            "discriminator": params_to_arrays(discriminator),
        },
        specs={
            "generator": generator.spec.to_json(),
            "discriminator": discriminator.spec.to_json(),
        },
        meta={
            "model_level": model_level,
            "seed": config.seed,
            "iteration": iteration,
            "epoch": epoch,
            "batch_size": config.batch_size,
            "alpha": loss_config.alpha,
            "mse_normalization": loss_config.mse_normalization,
        },
    )
    return path


def train(
    dataset,
    model_level: int,
    gen_spec: GeneratorSpec,
    disc_spec: DiscriminatorSpec,
    loss_config: LossConfig,
    config: TrainConfig,
    out_dir,
) -> TrainResult:
    """Alternating min-max training; deterministic given ``config.seed``.

    Per iteration: the discriminator is updated on (real street image,
    fake composite) conditioned on context+mask+guidance, then the
    generator is updated on the combined masked-MSE + alpha * adversarial
    objective. Checkpoints are written every ``checkpoint_every``
    iterations, at each epoch end, and before the first iteration (the
    untrained baseline).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    expected_channels, _ = model_level_channels(model_level)
    if gen_spec.input_channels != expected_channels:
        raise ValueError(
            f"generator spec expects {gen_spec.input_channels} input channels "
            f"but model level {model_level} supplies {expected_channels}"
        )
    ds_level = getattr(dataset, "model_level", model_level)
    if ds_level < model_level:
        raise ValueError(
            f"dataset was built for model level {ds_level}, cannot train "
            f"level {model_level} from it"
        )

    prior_threads = torch.get_num_threads()
    if config.reference_mode:
        torch.set_num_threads(1)
    try:
        return _train_inner(
            dataset, model_level, gen_spec, disc_spec, loss_config, config, out_dir
        )
    finally:
        torch.set_num_threads(prior_threads)


def _train_inner(
    dataset, model_level, gen_spec, disc_spec, loss_config, config, out_dir
) -> TrainResult:
    data = _TensorDataset(dataset, model_level)
    if disc_spec.input_size != data.x.shape[-1]:
        raise ValueError(
            f"discriminator expects {disc_spec.input_size}px inputs, dataset "
            f"patches are {data.x.shape[-1]}px"
        )

    torch.manual_seed(config.seed)
    generator = init_generator(gen_spec, seed=config.seed)
    discriminator = init_discriminator(disc_spec, seed=config.seed + 1)
    generator.train()
    discriminator.train()

    g_params = _named_params(generator)
    d_params = _named_params(discriminator)
    opt_kwargs = dict(
        lr=config.lr, beta1=config.beta1, beta2=config.beta2, eps=config.eps
    )
    g_state = init_adam(g_params, **opt_kwargs)
    d_state = init_adam(d_params, **opt_kwargs)

    rng = np.random.default_rng(config.seed)
    per_epoch = iterations_per_epoch(len(data), config.batch_size)
    if per_epoch == 0:
        raise ValueError(
            f"dataset of {len(data)} samples cannot fill one batch of "
            f"{config.batch_size}"
        )
    total_iterations = (
        config.iterations if config.iterations is not None else config.epochs * per_epoch
    )

    checkpoints: list[Path] = []
    history: list[dict] = []
    init_path = _save_checkpoint(
        out_dir / "ckpt_init.sgckpt",
        generator,
        discriminator,
        model_level,
        config,
        loss_config,
        iteration=0,
        epoch=0,
    )

    iteration = 0
    epoch = 0
    last_saved = -1

    def save_now() -> None:
        nonlocal last_saved
        if iteration == last_saved:
            return
        checkpoints.append(
            _save_checkpoint(
                out_dir / f"ckpt_iter{iteration:06d}.sgckpt",
                generator,
                discriminator,
                model_level,
                config,
                loss_config,
                iteration,
                epoch,
            )
        )
        last_saved = iteration

    while iteration < total_iterations:
        epoch += 1
        order = rng.permutation(len(data))
        for b in range(per_epoch):
            if iteration >= total_iterations:
                break
            idx = torch.as_tensor(order[b * config.batch_size : (b + 1) * config.batch_size])
            x = data.x[idx]
            cond = data.cond[idx]
            gt = data.gt[idx]
            mask = data.mask[idx]

            # --- discriminator update (generator frozen) ---
            g_out = generator(x)
            fake = composite(g_out, gt * (1 - mask), mask)
            real = mask * gt if loss_config.masked_real else gt
            d_real = discriminator(real, cond)
            d_fake = discriminator(fake.detach(), cond)
            d_loss, _ = adversarial_terms(d_real, d_fake)
            discriminator.zero_grad(set_to_none=True)
            d_loss.backward()
            adam_step(d_params, _grads(discriminator), d_state)

            # --- generator update against the refreshed discriminator ---
            d_fake_g = discriminator(fake, cond)
            g_adv = generator_adversarial_term(
                d_fake_g, loss_config.saturating_generator
            )
            mse = mse_loss(g_out, gt, mask, loss_config.mse_normalization)
            total = combined_generator_objective(mse, g_adv, loss_config.alpha)
            generator.zero_grad(set_to_none=True)
            discriminator.zero_grad(set_to_none=True)
            total.backward()
            adam_step(g_params, _grads(generator), g_state)

            iteration += 1
            history.append(
                {
                    "iteration": iteration,
                    "mse": float(mse.detach()),
                    "g_adv": float(g_adv.detach()),
                    "d_loss": float(d_loss.detach()),
                }
            )
            if iteration % config.checkpoint_every == 0:
                save_now()
        save_now()  # epoch end (and run end)

    history_csv = out_dir / "history.csv"
    with open(history_csv, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["iteration", "mse", "g_adv", "d_loss"])
        writer.writeheader()
        for row in history:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})

    return TrainResult(
        checkpoints=checkpoints,
        history=history,
        history_csv=history_csv,
        init_checkpoint=init_path,
    )
