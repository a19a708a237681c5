"""Inpainting generator and conditional discriminator.

The generator is a fully convolutional encoder / dilated-mid / decoder
stack (strided convolutions only, no pooling) that maps the multi-channel
patch input to a single street channel in [0, 1]. The decoder re-ingests
the planning-guidance channels at every stage, area-averaged down to the
stage resolution. The discriminator scores a full-extent street image
conditioned on context, mask, and guidance through 11 spectrally
normalized convolution blocks, a dense neck, and a sigmoid head.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .geometry import PATTERN_CODE_SPAN
from .sampling import PatchSample

GENERATOR_BASE_CHANNELS = 64
DISCRIMINATOR_BASE_CHANNELS = 64
MID_DILATIONS = (2, 4, 8, 16)

#: Channels shown to the discriminator as the condition, in stack order.
CONDITION_CHANNELS = (
    "context_streets",
    "elevation",
    "aspect",
    "mask",
    "junctions",
    "pattern_guidance",
)


# ---------------------------------------------------------------------------
# Architecture descriptions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConvLayer:
    kind: str  # "conv" | "deconv"
    out_channels: int
    kernel: int
    stride: int = 1
    dilation: int = 1

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "out_channels": self.out_channels,
            "kernel": self.kernel,
            "stride": self.stride,
            "dilation": self.dilation,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ConvLayer":
        return cls(**doc)


@dataclass(frozen=True)
class GeneratorSpec:
    input_channels: int
    guidance_channels: int
    encoder: tuple[ConvLayer, ...]
    mid: tuple[ConvLayer, ...]
    decoder: tuple[ConvLayer, ...]
    #: per-layer normalization in the body ("batch" or "none"); the output
    #: head is never normalized. Keeps activation scales stable so the
    #: sigmoid head cannot saturate into a zero-gradient regime.
    norm: str = "batch"

    def __post_init__(self):
        if self.guidance_channels >= self.input_channels:
            raise ValueError("guidance channels must be a strict subset of the input")
        if self.decoder[-1].out_channels != 1:
            raise ValueError("generator must end in a single-channel head")
        if self.norm not in ("batch", "none"):
            raise ValueError(f"unknown generator norm {self.norm!r}")

    @property
    def encoder_stride_product(self) -> int:
        product = 1
        for layer in self.encoder:
            product *= layer.stride
        return product

    def to_json(self) -> dict:
        return {
            "input_channels": self.input_channels,
            "guidance_channels": self.guidance_channels,
            "norm": self.norm,
            "encoder": [l.to_json() for l in self.encoder],
            "mid": [l.to_json() for l in self.mid],
            "decoder": [l.to_json() for l in self.decoder],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "GeneratorSpec":
        return cls(
            input_channels=doc["input_channels"],
            guidance_channels=doc["guidance_channels"],
            norm=doc.get("norm", "batch"),
            encoder=tuple(ConvLayer.from_json(l) for l in doc["encoder"]),
            mid=tuple(ConvLayer.from_json(l) for l in doc["mid"]),
            decoder=tuple(ConvLayer.from_json(l) for l in doc["decoder"]),
        )


@dataclass(frozen=True)
class DiscriminatorSpec:
    input_channels: int = 7
    input_size: int = 256
    body_channels: tuple[int, ...] = ()
    body_strides: tuple[int, ...] = ()
    kernel: int = 3
    neck_channels: int = 256
    leaky_slope: float = 0.2

    def __post_init__(self):
        if len(self.body_channels) != len(self.body_strides):
            raise ValueError("body channels and strides must align")
        if len(self.body_channels) != 11:
            raise ValueError(
                f"discriminator body must have exactly 11 blocks, got "
                f"{len(self.body_channels)}"
            )
        stride_product = int(np.prod(self.body_strides))
        if self.input_size % stride_product != 0:
            raise ValueError("input size must be divisible by the stride product")

    @property
    def neck_spatial(self) -> int:
        return self.input_size // int(np.prod(self.body_strides))

    def to_json(self) -> dict:
        return {
            "input_channels": self.input_channels,
            "input_size": self.input_size,
            "body_channels": list(self.body_channels),
            "body_strides": list(self.body_strides),
            "kernel": self.kernel,
            "neck_channels": self.neck_channels,
            "leaky_slope": self.leaky_slope,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "DiscriminatorSpec":
        doc = dict(doc)
        doc["body_channels"] = tuple(doc["body_channels"])
        doc["body_strides"] = tuple(doc["body_strides"])
        return cls(**doc)


def model_level_channels(model_level: int) -> tuple[int, int]:
    """(input channels, guidance channels) for a model level."""
    if model_level not in (1, 2, 3):
        raise ValueError(f"model_level must be 1, 2 or 3, got {model_level}")
    return 4 + model_level, model_level - 1


def default_generator_spec(
    model_level: int,
    base: int = GENERATOR_BASE_CHANNELS,
    mid_dilations: Sequence[int] = MID_DILATIONS,
) -> GeneratorSpec:
    input_channels, guidance = model_level_channels(model_level)
    return GeneratorSpec(
        input_channels=input_channels,
        guidance_channels=guidance,
        encoder=(
            ConvLayer("conv", base, 5, 1),
            ConvLayer("conv", base * 2, 3, 2),
            ConvLayer("conv", base * 2, 3, 1),
            ConvLayer("conv", base * 4, 3, 2),
        ),
        mid=tuple(ConvLayer("conv", base * 4, 3, 1, d) for d in mid_dilations),
        decoder=(
            ConvLayer("conv", base * 4, 3, 1),
            ConvLayer("deconv", base * 2, 4, 2),
            ConvLayer("conv", base * 2, 3, 1),
            ConvLayer("deconv", base, 4, 2),
            ConvLayer("conv", max(base // 2, 4), 3, 1),
            ConvLayer("conv", 1, 3, 1),
        ),
    )


def default_discriminator_spec(
    input_size: int = 256, base: int = DISCRIMINATOR_BASE_CHANNELS, neck_channels: int = 256
) -> DiscriminatorSpec:
    cap = base * 4
    channels = tuple(min(base * 2 ** (i // 2), cap) for i in range(11))
    strides = (2, 1, 2, 1, 2, 1, 2, 1, 2, 1, 1)
    return DiscriminatorSpec(
        input_channels=7,
        input_size=input_size,
        body_channels=channels,
        body_strides=strides,
        neck_channels=neck_channels,
    )


def receptive_field(spec: GeneratorSpec) -> int:
    """Receptive field (pixels) of one mid-block output unit."""
    rf, jump = 1, 1
    for layer in tuple(spec.encoder) + tuple(spec.mid):
        rf += (layer.kernel - 1) * layer.dilation * jump
        jump *= layer.stride
    return rf


# ---------------------------------------------------------------------------
# Spectral normalization (power iteration)
# ---------------------------------------------------------------------------


@dataclass
class PowerIterState:
    u: np.ndarray
    v: np.ndarray
    zero_weight: bool = False


def _sigma(weight_mat: torch.Tensor, u: torch.Tensor, v: torch.Tensor) -> torch.Tensor:
    return torch.dot(u, torch.mv(weight_mat, v))


def spectral_normalize(
    weight, state: PowerIterState | None = None, eps: float = 1e-12
):
    """One power-iteration step; returns (weight / sigma_estimate, state).

    The weight is viewed as a (out_features x rest) matrix. A zero weight
    is returned unchanged with ``state.zero_weight`` set.
    """
    is_numpy = isinstance(weight, np.ndarray)
    w = torch.as_tensor(np.asarray(weight) if is_numpy else weight)
    mat = w.reshape(w.shape[0], -1)
    out_dim, rest = mat.shape

    if state is None:
        rng = np.random.default_rng(out_dim * 7919 + rest)
        u = torch.as_tensor(rng.standard_normal(out_dim), dtype=mat.dtype)
        v = torch.as_tensor(rng.standard_normal(rest), dtype=mat.dtype)
        u = u / torch.linalg.norm(u).clamp_min(eps)
        v = v / torch.linalg.norm(v).clamp_min(eps)
    else:
        u = torch.as_tensor(state.u, dtype=mat.dtype)
        v = torch.as_tensor(state.v, dtype=mat.dtype)

    if torch.count_nonzero(mat) == 0:
        new_state = PowerIterState(u.numpy().copy(), v.numpy().copy(), zero_weight=True)
        return (weight if is_numpy else w), new_state

    with torch.no_grad():
        v = torch.mv(mat.t(), u)
        v = v / torch.linalg.norm(v).clamp_min(eps)
        u = torch.mv(mat, v)
        u = u / torch.linalg.norm(u).clamp_min(eps)
    sigma = _sigma(mat, u, v)
    normalized = w / sigma
    new_state = PowerIterState(u.numpy().copy(), v.numpy().copy())
    if is_numpy:
        return normalized.numpy(), new_state
    return normalized, new_state


class SNConv2d(nn.Module):
    """Conv2d whose weight is divided by a power-iteration spectral norm.

    The power-iteration vectors are module buffers: they evolve one step
    per training-mode forward and are frozen in eval mode, which keeps
    inference pure and finite-difference friendly.
    """

    def __init__(self, in_channels, out_channels, kernel, stride, padding):
        super().__init__()
        self.stride = stride
        self.padding = padding
        self.weight = nn.Parameter(
            torch.empty(out_channels, in_channels, kernel, kernel)
        )
        self.bias = nn.Parameter(torch.zeros(out_channels))
        nn.init.kaiming_uniform_(self.weight, a=math.sqrt(5))
        fan_in = in_channels * kernel * kernel
        bound = 1 / math.sqrt(fan_in)
        nn.init.uniform_(self.bias, -bound, bound)
        rest = in_channels * kernel * kernel
        self.register_buffer("sn_u", F.normalize(torch.randn(out_channels), dim=0))
        self.register_buffer("sn_v", F.normalize(torch.randn(rest), dim=0))
        # warm up the power iteration so the first (possibly eval-mode)
        # forward already divides by a sane sigma estimate
        with torch.no_grad():
            mat = self.weight.reshape(out_channels, -1)
            for _ in range(3):
                self.sn_v.copy_(F.normalize(torch.mv(mat.t(), self.sn_u), dim=0, eps=1e-12))
                self.sn_u.copy_(F.normalize(torch.mv(mat, self.sn_v), dim=0, eps=1e-12))

    def normalized_weight(self) -> torch.Tensor:
        mat = self.weight.reshape(self.weight.shape[0], -1)
        if self.training:
            with torch.no_grad():
                v = F.normalize(torch.mv(mat.t(), self.sn_u), dim=0, eps=1e-12)
                u = F.normalize(torch.mv(mat, v), dim=0, eps=1e-12)
                self.sn_u.copy_(u)
                self.sn_v.copy_(v)
        # clones keep the buffers out of the autograd graph, so later
        # power-iteration updates cannot invalidate an earlier backward
        sigma = _sigma(mat, self.sn_u.clone(), self.sn_v.clone())
        if float(sigma.detach().abs()) < 1e-20:
            return self.weight
        return self.weight / sigma

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return F.conv2d(
            x, self.normalized_weight(), self.bias, self.stride, self.padding
        )


# ---------------------------------------------------------------------------
# Modules
# ---------------------------------------------------------------------------


def _make_layer(layer: ConvLayer, in_channels: int) -> nn.Module:
    if layer.kind == "conv":
        padding = layer.dilation * (layer.kernel - 1) // 2
        return nn.Conv2d(
            in_channels,
            layer.out_channels,
            layer.kernel,
            stride=layer.stride,
            padding=padding,
            dilation=layer.dilation,
        )
    if layer.kind == "deconv":
        return nn.ConvTranspose2d(
            in_channels,
            layer.out_channels,
            layer.kernel,
            stride=layer.stride,
            padding=(layer.kernel - layer.stride) // 2,
        )
    raise ValueError(f"unknown layer kind {layer.kind!r}")


class Generator(nn.Module):
    def __init__(self, spec: GeneratorSpec):
        super().__init__()
        self.spec = spec

        def block(layer: ConvLayer, in_ch: int, normed: bool) -> nn.Module:
            conv = _make_layer(layer, in_ch)
            if normed and spec.norm == "batch":
                return nn.Sequential(conv, nn.BatchNorm2d(layer.out_channels))
            return conv

        layers = []
        in_ch = spec.input_channels
        for layer in spec.encoder:
            layers.append(block(layer, in_ch, normed=True))
            in_ch = layer.out_channels
        self.encoder = nn.ModuleList(layers)
        layers = []
        for layer in spec.mid:
            layers.append(block(layer, in_ch, normed=True))
            in_ch = layer.out_channels
        self.mid = nn.ModuleList(layers)
        layers = []
        for i, layer in enumerate(spec.decoder):
            is_head = i == len(spec.decoder) - 1
            layers.append(block(layer, in_ch + spec.guidance_channels, normed=not is_head))
            in_ch = layer.out_channels
        self.decoder = nn.ModuleList(layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        spec = self.spec
        if x.ndim != 4 or x.shape[1] != spec.input_channels:
            raise ValueError(
                f"generator expects input of shape (B, {spec.input_channels}, H, W), "
                f"got {tuple(x.shape)}"
            )
        guidance = (
            x[:, spec.input_channels - spec.guidance_channels :]
            if spec.guidance_channels
            else None
        )
        h = x
        for conv in self.encoder:
            h = F.relu(conv(h))
        for conv in self.mid:
            h = F.relu(conv(h))
        last = len(self.decoder) - 1
        for i, layer in enumerate(self.decoder):
            if guidance is not None:
                pooled = F.adaptive_avg_pool2d(guidance, h.shape[-2:])
                h = torch.cat([h, pooled], dim=1)
            h = layer(h)
            h = torch.sigmoid(h) if i == last else F.relu(h)
        return h

    def trace_shapes(self, size: int) -> list[tuple[str, tuple[int, int, int]]]:
        """Layer-by-layer output shapes for a square input of ``size`` px."""
        self.eval()
        shapes = []
        with torch.no_grad():
            x = torch.zeros(
                1,
                self.spec.input_channels,
                size,
                size,
                dtype=next(self.parameters()).dtype,
            )
            guidance = (
                x[:, self.spec.input_channels - self.spec.guidance_channels :]
                if self.spec.guidance_channels
                else None
            )
            h = x
            for i, conv in enumerate(self.encoder):
                h = F.relu(conv(h))
                shapes.append((f"encoder.{i}", tuple(h.shape[1:])))
            for i, conv in enumerate(self.mid):
                h = F.relu(conv(h))
                shapes.append((f"mid.{i}", tuple(h.shape[1:])))
            for i, layer in enumerate(self.decoder):
                if guidance is not None:
                    h = torch.cat(
                        [h, F.adaptive_avg_pool2d(guidance, h.shape[-2:])], dim=1
                    )
                h = layer(h)
                shapes.append((f"decoder.{i}", tuple(h.shape[1:])))
        return shapes


class Discriminator(nn.Module):
    def __init__(self, spec: DiscriminatorSpec):
        super().__init__()
        self.spec = spec
        blocks = []
        in_ch = spec.input_channels
        padding = (spec.kernel - 1) // 2
        for out_ch, stride in zip(spec.body_channels, spec.body_strides):
            blocks.append(SNConv2d(in_ch, out_ch, spec.kernel, stride, padding))
            in_ch = out_ch
        self.body = nn.ModuleList(blocks)
        s = spec.neck_spatial
        self.neck = nn.Linear(in_ch * s * s, spec.neck_channels * s * s)
        self.head = nn.Linear(spec.neck_channels * s * s, 1)

    def forward(self, street_image: torch.Tensor, condition: torch.Tensor) -> torch.Tensor:
        spec = self.spec
        x = torch.cat([street_image, condition], dim=1)
        if x.shape[1] != spec.input_channels:
            raise ValueError(
                f"discriminator expects {spec.input_channels} stacked channels "
                f"(street image + condition), got {x.shape[1]}"
            )
        if x.shape[-2] != spec.input_size or x.shape[-1] != spec.input_size:
            raise ValueError(
                f"discriminator expects {spec.input_size}x{spec.input_size} inputs, "
                f"got {tuple(x.shape[-2:])}"
            )
        h = x
        for block in self.body:
            h = F.leaky_relu(block(h), spec.leaky_slope)
        h = h.flatten(1)
        h = F.leaky_relu(self.neck(h), spec.leaky_slope)
        return torch.sigmoid(self.head(h)).squeeze(-1)


# ---------------------------------------------------------------------------
# Parameter sets and functional entry points
# ---------------------------------------------------------------------------


def init_generator(spec: GeneratorSpec, seed: int = 0) -> Generator:
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        return Generator(spec)


def init_discriminator(spec: DiscriminatorSpec, seed: int = 0) -> Discriminator:
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        return Discriminator(spec)


def params_to_arrays(module: nn.Module) -> dict[str, np.ndarray]:
    """Snapshot of all parameters and buffers (power-iteration state included)."""
    return {
        name: tensor.detach().cpu().numpy().copy()
        for name, tensor in module.state_dict().items()
    }


def load_param_arrays(module: nn.Module, params: dict[str, np.ndarray]) -> nn.Module:
    state = {}
    for name, arr in params.items():
        if not np.isfinite(arr).all():
            raise ValueError(f"parameter '{name}' holds non-finite values")
        state[name] = torch.as_tensor(arr)
    module.load_state_dict(state)
    return module


def generator_forward(
    spec: GeneratorSpec, params: dict[str, np.ndarray], inputs: np.ndarray
) -> np.ndarray:
    """Pure forward pass over a parameter set; accepts (C,H,W) or (B,C,H,W)."""
    module = load_param_arrays(Generator(spec), params).eval()
    x = torch.as_tensor(np.asarray(inputs, dtype=np.float32))
    squeeze = x.ndim == 3
    if squeeze:
        x = x[None]
    with torch.no_grad():
        out = module(x)
    out = out.numpy()
    return out[0] if squeeze else out


def discriminator_forward(
    spec: DiscriminatorSpec,
    params: dict[str, np.ndarray],
    street_image: np.ndarray,
    condition: np.ndarray,
) -> np.ndarray:
    module = load_param_arrays(Discriminator(spec), params).eval()
    img = torch.as_tensor(np.asarray(street_image, dtype=np.float32))
    cond = torch.as_tensor(np.asarray(condition, dtype=np.float32))
    squeeze = img.ndim == 3
    if squeeze:
        img, cond = img[None], cond[None]
    with torch.no_grad():
        out = module(img, cond)
    out = out.numpy()
    return float(out[0]) if squeeze else out


def composite(generated, context_streets, mask):
    """Generated pixels inside the mask, context pixels outside."""
    if isinstance(generated, torch.Tensor):
        m = torch.as_tensor(mask, dtype=generated.dtype, device=generated.device)
        ctx = torch.as_tensor(
            context_streets, dtype=generated.dtype, device=generated.device
        )
        while m.ndim < generated.ndim:
            m = m[None]
        while ctx.ndim < generated.ndim:
            ctx = ctx[None]
        return m * generated + (1 - m) * ctx
    generated = np.asarray(generated)
    m = np.asarray(mask, dtype=generated.dtype)
    ctx = np.asarray(context_streets, dtype=generated.dtype)
    return m * generated + (1 - m) * ctx


# ---------------------------------------------------------------------------
# Channel stacks
# ---------------------------------------------------------------------------


def normalize_elevation(elevation: np.ndarray) -> np.ndarray:
    """Per-patch min-max normalization to [0, 1]; flat patches become 0."""
    elevation = np.asarray(elevation, dtype=np.float32)
    lo, hi = float(elevation.min()), float(elevation.max())
    if hi - lo < 1e-12:
        return np.zeros_like(elevation)
    return (elevation - lo) / (hi - lo)


def normalize_aspect(aspect: np.ndarray) -> np.ndarray:
    """Map aspect degrees to [0, 1); the flat sentinel -1 maps to exactly 0."""
    return ((np.asarray(aspect, dtype=np.float32) + 1.0) / 361.0).astype(np.float32)


def normalize_pattern(codes: np.ndarray) -> np.ndarray:
    return (np.asarray(codes, dtype=np.float32) / PATTERN_CODE_SPAN).astype(np.float32)


def input_stack(
    sample: PatchSample,
    model_level: int | None = None,
    junction_channel: np.ndarray | None = None,
) -> np.ndarray:
    """Generator input: fundamental context + mask + noise (+ guidance)."""
    level = sample.model_level if model_level is None else model_level
    junctions = (
        sample.junction_channel if junction_channel is None else junction_channel
    )
    channels = [
        sample.context_streets,
        normalize_elevation(sample.elevation),
        normalize_aspect(sample.aspect),
        sample.mask.grid,
        sample.noise,
    ]
    if level >= 2:
        channels.append(junctions)
    if level == 3:
        channels.append(normalize_pattern(sample.pattern_guidance))
    return np.stack([np.asarray(c, dtype=np.float32) for c in channels])


def condition_stack(
    sample: PatchSample, junction_channel: np.ndarray | None = None
) -> np.ndarray:
    """Discriminator condition: always 6 channels; absent guidance is zero."""
    junctions = (
        sample.junction_channel if junction_channel is None else junction_channel
    )
    channels = [
        sample.context_streets,
        normalize_elevation(sample.elevation),
        normalize_aspect(sample.aspect),
        sample.mask.grid,
        junctions,
        normalize_pattern(sample.pattern_guidance),
    ]
    return np.stack([np.asarray(c, dtype=np.float32) for c in channels])
