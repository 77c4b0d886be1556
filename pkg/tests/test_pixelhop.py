import numpy as np
import pytest

from satdetect.errors import ShapeError
from satdetect.image_io import Block
from satdetect.pixelhop import (
    apply,
    channel_features,
    extract_patches,
    patch_matrix,
    response_extent,
)
from satdetect.saab import HOP_CONFIGS, PatchConfig, fit_saab, transform


def make_block(rng=None, value=None):
    if value is not None:
        pixels = np.full((16, 16, 3), value)
    else:
        pixels = rng.uniform(0, 1, (16, 16, 3))
    return Block(pixels=pixels)


def fitted_bank(hop, rng):
    cfg = HOP_CONFIGS[hop]
    return fit_saab(rng.standard_normal((300, cfg.patch_dim)), cfg)


@pytest.mark.parametrize(
    "hop,n_patches,dim", [("A", 225, 12), ("B", 196, 27), ("C", 169, 48)]
)
def test_patch_counts(hop, n_patches, dim, rng):
    patches = extract_patches(make_block(rng), HOP_CONFIGS[hop])
    assert patches.shape == (n_patches, dim)


def test_constant_block_patches():
    patches = extract_patches(make_block(value=0.6), HOP_CONFIGS["B"])
    assert np.all(patches == 0.6)


def test_patch_flattening_order(rng):
    block = make_block(rng)
    patches = extract_patches(block, HOP_CONFIGS["B"])
    # window at (i, j) flattened in (row, col, channel) order
    i, j = 4, 7
    expected = block.pixels[i : i + 3, j : j + 3, :].reshape(-1)
    assert np.array_equal(patches[i * 14 + j], expected)


def test_apply_shape(rng):
    tensor = apply(make_block(rng), fitted_bank("B", rng))
    assert tensor.values.shape == (14, 14, 27)


def test_constant_block_dc_only(rng):
    bank = fitted_bank("B", rng)
    tensor = apply(make_block(value=0.5), bank)
    assert np.allclose(tensor.values[:, :, 0], 0.5 * np.sqrt(27))
    assert np.abs(tensor.values[:, :, 1:]).max() <= 1e-9


def test_apply_matches_per_patch_transform(rng):
    bank = fitted_bank("A", rng)
    block = make_block(rng)
    tensor = apply(block, bank)
    patches = extract_patches(block, bank.config)
    for i in range(15):
        for j in range(15):
            oracle = transform(patches[i * 15 + j], bank)
            assert np.allclose(tensor.values[i, j], oracle, atol=1e-9)


def test_channel_features_layout(rng):
    bank = fitted_bank("B", rng)
    tensor = apply(make_block(rng), bank)
    for ch in (0, 13, 26):
        feats = channel_features(tensor, ch)
        assert feats.shape == (196,)
        for i in range(14):
            for j in range(14):
                assert feats[i * 14 + j] == tensor.values[i, j, ch]


def test_channel_features_out_of_range(rng):
    tensor = apply(make_block(rng), fitted_bank("B", rng))
    with pytest.raises(IndexError):
        channel_features(tensor, 27)


def test_parseval_over_block(rng):
    bank = fitted_bank("B", rng)
    block = make_block(rng)
    tensor = apply(block, bank)
    patches = extract_patches(block, bank.config)
    total = sum(
        (channel_features(tensor, ch) ** 2).sum() for ch in range(27)
    )
    assert total == pytest.approx((patches**2).sum(), rel=1e-9)


def test_translation_covariance(rng):
    bank = fitted_bank("B", rng)
    pixels = rng.uniform(0, 1, (16, 16, 3))
    shifted = np.roll(pixels, 1, axis=1)
    t0 = apply(Block(pixels=pixels), bank)
    t1 = apply(Block(pixels=shifted), bank)
    # responses shift by one column on the overlapping region
    assert np.allclose(t1.values[:, 1:], t0.values[:, :-1], atol=1e-12)


def test_batched_patch_matrix_matches_single(rng):
    blocks = rng.uniform(0, 1, (5, 16, 16, 3))
    cfg = HOP_CONFIGS["C"]
    batch = patch_matrix(blocks, cfg)
    assert batch.shape == (5, 169, 48)
    for i in range(5):
        assert np.array_equal(batch[i], patch_matrix(blocks[i], cfg))


def test_bad_block_shape(rng):
    cfg = HOP_CONFIGS["A"]
    with pytest.raises(ShapeError):
        patch_matrix(rng.uniform(0, 1, (8, 8, 3)), cfg)


def test_response_extent():
    assert response_extent(PatchConfig(2)) == 15
    assert response_extent(PatchConfig(3)) == 14
    assert response_extent(PatchConfig(4)) == 13
