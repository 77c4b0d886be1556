import numpy as np
import pytest

from satdetect.errors import DegenerateInputWarning, InsufficientData, ShapeError
from satdetect.saab import (
    HOP_CONFIGS,
    PatchConfig,
    energy_percentages,
    fit_saab,
    transform,
    transform_batch,
)


def brute_force_ac_eigs(patches):
    """Independent oracle: explicit per-patch centering, outer-product
    accumulation and a full eigendecomposition."""
    n, L = patches.shape
    centered = np.empty_like(patches)
    for i in range(n):
        centered[i] = patches[i] - patches[i].mean()
    m = np.zeros((L, L))
    for i in range(n):
        m += np.outer(centered[i], centered[i])
    m /= n
    vals, vecs = np.linalg.eigh(m)
    order = np.argsort(-vals)
    vals, vecs = vals[order], vecs[:, order]
    # drop the structural zero along the constant direction: keep top L-1
    return vals[: L - 1], vecs[:, : L - 1].T


@pytest.mark.parametrize("hop", ["A", "B", "C"])
def test_ac_kernels_match_brute_force(hop, rng):
    cfg = HOP_CONFIGS[hop]
    L = cfg.patch_dim
    patches = rng.standard_normal((500, L))
    bank = fit_saab(patches, cfg)
    vals, vecs = brute_force_ac_eigs(patches)
    for k in range(L - 1):
        dot = abs(np.dot(bank.kernels[k + 1], vecs[k]))
        assert dot >= 1 - 1e-8, f"channel {k + 1}: |dot|={dot}"
    # eigenvalues: mean squared AC coefficients of the fit equal the oracle's
    coeffs = transform_batch(patches - patches.mean(axis=1, keepdims=True), bank)
    fit_vals = (coeffs[:, 1:] ** 2).mean(axis=0)
    assert np.allclose(fit_vals, vals, rtol=1e-8)


@pytest.mark.parametrize("hop", ["A", "B", "C"])
def test_orthonormality(hop, rng):
    cfg = HOP_CONFIGS[hop]
    bank = fit_saab(rng.standard_normal((300, cfg.patch_dim)), cfg)
    gram = bank.kernels @ bank.kernels.T
    assert np.abs(gram - np.eye(cfg.patch_dim)).max() <= 1e-6


def test_dc_kernel_is_constant(rng):
    bank = fit_saab(rng.standard_normal((100, 27)), PatchConfig(3))
    assert np.allclose(bank.kernels[0], 1 / np.sqrt(27))


def test_eigenvalues_non_increasing(rng):
    bank = fit_saab(rng.standard_normal((400, 48)) * np.arange(1, 49), PatchConfig(4))
    coeffs = transform_batch(
        rng.standard_normal((1, 48)), bank
    )  # just to touch the API
    energies = bank.energies[1:]
    # energies of AC channels are proportional to eigenvalues: sorted
    assert np.all(np.diff(energies) <= 1e-12)


def test_constant_patches_degenerate(rng):
    patches = np.full((64, 12), 0.7)
    with pytest.warns(DegenerateInputWarning):
        bank = fit_saab(patches, PatchConfig(2))
    assert bank.energies[0] == pytest.approx(1.0)
    assert np.allclose(bank.energies[1:], 0.0)
    assert len(bank.zero_channels) == 11
    # bank stays orthonormal despite the degenerate completion
    assert np.abs(bank.kernels @ bank.kernels.T - np.eye(12)).max() <= 1e-6


def test_insufficient_data():
    with pytest.raises(InsufficientData):
        fit_saab(np.zeros((11, 12)), PatchConfig(2))


def test_transform_constant_patch(rng):
    bank = fit_saab(rng.standard_normal((200, 27)), PatchConfig(3))
    c = transform(np.full(27, 0.3), bank)
    assert c[0] == pytest.approx(0.3 * np.sqrt(27))
    assert np.abs(c[1:]).max() <= 1e-9


def test_parseval_1000_patches(rng):
    bank = fit_saab(rng.standard_normal((200, 27)), PatchConfig(3))
    X = rng.standard_normal((1000, 27))
    C = transform_batch(X, bank)
    assert np.allclose(
        (C**2).sum(axis=1), (X**2).sum(axis=1), rtol=1e-6, atol=0
    )


def test_transform_matches_naive_dot_loop(rng):
    bank = fit_saab(rng.standard_normal((100, 12)), PatchConfig(2))
    x = rng.standard_normal(12)
    c = transform(x, bank)
    naive = np.array([sum(bank.kernels[k][j] * x[j] for j in range(12)) for k in range(12)])
    assert np.allclose(c, naive, atol=1e-12)


def test_transform_shape_error(rng):
    bank = fit_saab(rng.standard_normal((100, 12)), PatchConfig(2))
    with pytest.raises(ShapeError):
        transform(np.zeros(13), bank)


def test_shift_covariance(rng):
    bank = fit_saab(rng.standard_normal((300, 27)), PatchConfig(3))
    x = rng.standard_normal(27)
    beta = 0.77
    c0 = transform(x, bank)
    c1 = transform(x + beta, bank)
    assert c1[0] - c0[0] == pytest.approx(beta * np.sqrt(27))
    assert np.allclose(c1[1:], c0[1:], atol=1e-12)


def test_deterministic_fit(rng):
    patches = rng.standard_normal((500, 27))
    a = fit_saab(patches, PatchConfig(3))
    b = fit_saab(patches.copy(), PatchConfig(3))
    assert np.array_equal(a.kernels, b.kernels)
    assert np.array_equal(a.energies, b.energies)


def test_sign_convention(rng):
    bank = fit_saab(rng.standard_normal((300, 27)), PatchConfig(3))
    for row in bank.kernels:
        assert row[np.argmax(np.abs(row))] > 0


def test_energy_percentages(rng):
    bank = fit_saab(rng.standard_normal((300, 27)), PatchConfig(3))
    e = energy_percentages(bank)
    assert np.all(e >= 0)
    assert e.sum() == pytest.approx(1.0, abs=1e-9)


def test_white_noise_dc_fraction(rng):
    # isotropy: every channel carries ~1/12 of the energy
    patches = rng.standard_normal((200_000, 12))
    bank = fit_saab(patches, PatchConfig(2))
    assert bank.energies[0] == pytest.approx(1 / 12, rel=0.2)
