import numpy as np
import pytest
import torch

from streetgen.networks import (
    CONDITION_CHANNELS,
    ConvLayer,
    Discriminator,
    DiscriminatorSpec,
    Generator,
    GeneratorSpec,
    PowerIterState,
    SNConv2d,
    composite,
    condition_stack,
    default_discriminator_spec,
    default_generator_spec,
    discriminator_forward,
    generator_forward,
    init_discriminator,
    init_generator,
    input_stack,
    load_param_arrays,
    model_level_channels,
    normalize_aspect,
    normalize_elevation,
    params_to_arrays,
    receptive_field,
    spectral_normalize,
)
from streetgen.sampling import build_sample, generate_mask


def toy_gen_spec(level, base=8):
    return default_generator_spec(level, base=base, mid_dilations=(2, 4))


def toy_disc_spec(size=64, base=8):
    return default_discriminator_spec(input_size=size, base=base, neck_channels=base)


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------


def composite_loop_oracle(generated, context, mask):
    out = np.empty_like(generated, dtype=np.float64)
    for r in range(generated.shape[0]):
        for c in range(generated.shape[1]):
            out[r, c] = generated[r, c] if mask[r, c] == 1 else context[r, c]
    return out


def svd_sigma_max(weight):
    mat = np.asarray(weight, dtype=np.float64).reshape(weight.shape[0], -1)
    return float(np.linalg.svd(mat, compute_uv=False)[0])


# ---------------------------------------------------------------------------
# Generator contract
# ---------------------------------------------------------------------------


def test_level_channel_mapping():
    assert model_level_channels(1) == (5, 0)
    assert model_level_channels(2) == (6, 1)
    assert model_level_channels(3) == (7, 2)
    with pytest.raises(ValueError):
        model_level_channels(4)


@pytest.mark.parametrize("level", [1, 2, 3])
def test_generator_shapes_and_range(level):
    spec = toy_gen_spec(level)
    gen = init_generator(spec, seed=level)
    x = torch.rand(2, spec.input_channels, 64, 64)
    out = gen(x)
    assert out.shape == (2, 1, 64, 64)
    assert out.min() >= 0.0 and out.max() <= 1.0


def test_generator_bottleneck_is_quarter_resolution():
    spec = toy_gen_spec(3)
    gen = init_generator(spec, seed=0)
    shapes = dict(gen.trace_shapes(64))
    assert shapes[f"encoder.{len(spec.encoder) - 1}"][-1] == 16
    assert spec.encoder_stride_product == 4
    assert shapes[f"decoder.{len(spec.decoder) - 1}"] == (1, 64, 64)


def test_generator_deterministic():
    spec = toy_gen_spec(2)
    gen = init_generator(spec, seed=4).eval()
    x = torch.rand(1, spec.input_channels, 64, 64)
    with torch.no_grad():
        assert torch.equal(gen(x), gen(x))


def test_generator_channel_mismatch_names_counts():
    gen = init_generator(toy_gen_spec(1), seed=0)
    with pytest.raises(ValueError, match=r"\(B, 5, H, W\).*got.*7"):
        gen(torch.rand(1, 7, 64, 64))


def test_generator_batch_matches_loop():
    spec = toy_gen_spec(1)
    gen = init_generator(spec, seed=2).eval()
    x = torch.rand(6, spec.input_channels, 32, 32)
    with torch.no_grad():
        batched = gen(x)
        singles = torch.cat([gen(x[i : i + 1]) for i in range(6)])
    assert torch.allclose(batched, singles, atol=1e-6)


def test_generator_functional_forward_matches_module():
    spec = toy_gen_spec(2)
    module = init_generator(spec, seed=7).eval()
    params = params_to_arrays(module)
    x = np.random.default_rng(0).random((spec.input_channels, 64, 64)).astype(np.float32)
    out_fn = generator_forward(spec, params, x)
    with torch.no_grad():
        out_mod = module(torch.from_numpy(x)[None]).numpy()[0]
    assert np.array_equal(out_fn, out_mod)


def test_init_is_seed_deterministic():
    spec = toy_gen_spec(1)
    a = params_to_arrays(init_generator(spec, seed=5))
    b = params_to_arrays(init_generator(spec, seed=5))
    c = params_to_arrays(init_generator(spec, seed=6))
    assert all(np.array_equal(a[k], b[k]) for k in a)
    assert any(not np.array_equal(a[k], c[k]) for k in a)


def test_guidance_sensitivity_level3(small_map):
    spec = toy_gen_spec(3)
    gen = init_generator(spec, seed=1).eval()
    mask = generate_mask(64, 21)
    sample = build_sample(small_map, (40, 40), mask, 0.5, 3, 2)
    x = torch.from_numpy(input_stack(sample)[None])
    altered = x.clone()
    altered[0, 6] = torch.where(
        torch.from_numpy(mask.grid) > 0, 1.0 - altered[0, 6], altered[0, 6]
    )
    with torch.no_grad():
        delta = (gen(x) - gen(altered)).numpy()
    assert np.abs(delta).max() > 0


def test_receptive_field_default_covers_mask():
    spec = default_generator_spec(1)
    assert receptive_field(spec) == 255  # hand-traced through the layer table
    # the largest default generation region leaves a 4 px margin
    assert receptive_field(spec) >= 256 - 2 * 4


def test_generator_spec_json_roundtrip():
    spec = default_generator_spec(3)
    again = GeneratorSpec.from_json(spec.to_json())
    assert again == spec


# ---------------------------------------------------------------------------
# Composite
# ---------------------------------------------------------------------------


def test_composite_trivial_masks():
    gen = np.random.default_rng(0).random((16, 16))
    ctx = np.random.default_rng(1).random((16, 16))
    assert np.array_equal(composite(gen, ctx, np.ones((16, 16))), gen)
    assert np.array_equal(composite(gen, ctx, np.zeros((16, 16))), ctx)


def test_composite_checkerboard_matches_pixel_oracle():
    rng = np.random.default_rng(2)
    gen = rng.random((12, 12))
    ctx = rng.random((12, 12))
    mask = np.indices((12, 12)).sum(axis=0) % 2
    got = composite(gen, ctx, mask)
    assert np.allclose(got, composite_loop_oracle(gen, ctx, mask))


def test_composite_torch_batch():
    gen = torch.rand(3, 1, 8, 8)
    ctx = torch.rand(8, 8)
    mask = (torch.rand(8, 8) > 0.5).float()
    out = composite(gen, ctx, mask)
    assert out.shape == gen.shape
    assert torch.allclose(out[1, 0][mask > 0], gen[1, 0][mask > 0])
    assert torch.allclose(out[1, 0][mask == 0], ctx[mask == 0].to(out.dtype))


# ---------------------------------------------------------------------------
# Discriminator contract
# ---------------------------------------------------------------------------


def test_discriminator_has_eleven_blocks_and_unit_output():
    spec = toy_disc_spec()
    disc = init_discriminator(spec, seed=0)
    assert len(disc.body) == 11
    assert all(isinstance(b, SNConv2d) for b in disc.body)
    img = torch.rand(2, 1, 64, 64)
    cond = torch.rand(2, 6, 64, 64)
    out = disc(img, cond)
    assert out.shape == (2,)
    assert torch.all((out > 0) & (out < 1))


def test_discriminator_spec_requires_eleven_blocks():
    with pytest.raises(ValueError, match="11 blocks"):
        DiscriminatorSpec(body_channels=(8, 8), body_strides=(1, 2), input_size=64)


def test_discriminator_zeroed_head_outputs_half():
    spec = toy_disc_spec()
    disc = init_discriminator(spec, seed=0)
    with torch.no_grad():
        disc.head.weight.zero_()
        disc.head.bias.zero_()
    with torch.no_grad():
        out = disc(torch.rand(1, 1, 64, 64), torch.rand(1, 6, 64, 64))
    assert float(out) == pytest.approx(0.5, abs=0)


def test_discriminator_batch_matches_loop():
    spec = toy_disc_spec()
    disc = init_discriminator(spec, seed=3).eval()
    img = torch.rand(8, 1, 64, 64)
    cond = torch.rand(8, 6, 64, 64)
    with torch.no_grad():
        batched = disc(img, cond)
        singles = torch.stack(
            [disc(img[i : i + 1], cond[i : i + 1])[0] for i in range(8)]
        )
    assert torch.allclose(batched, singles, atol=1e-6)


def test_discriminator_shape_errors():
    disc = init_discriminator(toy_disc_spec(), seed=0)
    with pytest.raises(ValueError, match="7 stacked channels"):
        disc(torch.rand(1, 2, 64, 64), torch.rand(1, 6, 64, 64))
    with pytest.raises(ValueError, match="64x64"):
        disc(torch.rand(1, 1, 32, 32), torch.rand(1, 6, 32, 32))


def test_discriminator_functional_forward():
    spec = toy_disc_spec()
    module = init_discriminator(spec, seed=9).eval()
    params = params_to_arrays(module)
    img = np.random.default_rng(0).random((1, 64, 64)).astype(np.float32)
    cond = np.random.default_rng(1).random((6, 64, 64)).astype(np.float32)
    prob = discriminator_forward(spec, params, img, cond)
    assert 0.0 < prob < 1.0


# ---------------------------------------------------------------------------
# Spectral normalization
# ---------------------------------------------------------------------------


def test_spectral_normalize_identity_unchanged():
    eye = np.eye(6)
    normalized, state = spectral_normalize(eye)
    for _ in range(20):
        normalized, state = spectral_normalize(eye, state)
    assert np.allclose(normalized, eye, atol=1e-6)


def test_spectral_normalize_diagonal_converges_to_exact():
    w = np.diag([2.0, 1.0])
    state = None
    for _ in range(200):
        normalized, state = spectral_normalize(w, state)
    assert np.allclose(normalized, np.diag([1.0, 0.5]), atol=1e-6)


def test_spectral_normalize_random_matrix_vs_svd():
    rng = np.random.default_rng(8)
    w = rng.standard_normal((64, 64))
    state = None
    for _ in range(50):
        normalized, state = spectral_normalize(w, state)
    assert 0.95 <= svd_sigma_max(normalized) <= 1.05


def test_spectral_normalize_zero_weight_warns():
    w = np.zeros((4, 4))
    normalized, state = spectral_normalize(w)
    assert state.zero_weight
    assert np.array_equal(normalized, w)


def test_snconv_weights_normalized_after_training_steps():
    conv = SNConv2d(3, 8, 3, 1, 1)
    conv.train()
    x = torch.rand(2, 3, 16, 16)
    for _ in range(50):
        conv(x)
    normalized = conv.normalized_weight().detach().numpy()
    assert 0.95 <= svd_sigma_max(normalized) <= 1.05


def test_snconv_eval_mode_is_pure():
    conv = SNConv2d(3, 4, 3, 1, 1).eval()
    u_before = conv.sn_u.clone()
    x = torch.rand(1, 3, 8, 8)
    a = conv(x)
    b = conv(x)
    assert torch.equal(a, b)
    assert torch.equal(conv.sn_u, u_before)


# ---------------------------------------------------------------------------
# Channel stacks
# ---------------------------------------------------------------------------


def test_input_and_condition_stack_shapes(small_map):
    mask = generate_mask(64, 31)
    sample = build_sample(small_map, (10, 10), mask, 0.5, 3, 3)
    for level, channels in ((1, 5), (2, 6), (3, 7)):
        stack = input_stack(sample, model_level=level)
        assert stack.shape == (channels, 64, 64)
        assert stack.dtype == np.float32
        assert stack.min() >= 0.0 and stack.max() <= 1.0
    cond = condition_stack(sample)
    assert cond.shape == (len(CONDITION_CHANNELS), 64, 64)


def test_normalizers():
    assert np.all(normalize_elevation(np.full((4, 4), 123.0)) == 0)
    ramp = normalize_elevation(np.arange(16.0).reshape(4, 4))
    assert ramp.min() == 0.0 and ramp.max() == 1.0
    aspect = np.array([[-1.0, 0.0], [180.0, 359.0]])
    na = normalize_aspect(aspect)
    assert na[0, 0] == 0.0
    assert 0.0 < na[0, 1] < na[1, 0] < na[1, 1] < 1.0


def test_checkpoint_roundtrip_preserves_forward(tmp_path, small_map):
    from streetgen import storage

    spec = toy_gen_spec(2)
    module = init_generator(spec, seed=11).eval()
    params = params_to_arrays(module)
    path = tmp_path / "g.sgckpt"
    storage.save_checkpoint(
        path, {"generator": params}, {"generator": spec.to_json()}, {"model_level": 2}
    )
    loaded_params, loaded_specs, _ = storage.load_checkpoint(path)
    spec2 = GeneratorSpec.from_json(loaded_specs["generator"])
    x = np.random.default_rng(1).random((6, 64, 64)).astype(np.float32)
    assert np.array_equal(
        generator_forward(spec, params, x), generator_forward(spec2, loaded_params["generator"], x)
    )
