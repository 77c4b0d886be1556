"""One-stage data-driven orthonormal filter bank.

The bank has a fixed constant (DC) kernel plus PCA kernels fitted to the
mean-removed (AC) component of training patches, ordered by descending
second moment. Transforming a patch is a single matrix-vector product.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputWarning, InsufficientData, ShapeError

_ZERO_EIGENVALUE_TOL = 1e-12  # relative to the largest AC eigenvalue


@dataclass(frozen=True)
class PatchConfig:
    size: int              # square spatial extent of the patch
    channels: int = 3

    @property
    def patch_dim(self) -> int:
        return self.size * self.size * self.channels


# The three patch geometries used throughout: 2x2x3, 3x3x3, 4x4x3.
HOP_CONFIGS = {
    "A": PatchConfig(2),
    "B": PatchConfig(3),
    "C": PatchConfig(4),
}


@dataclass
class SaabFilterBank:
    kernels: np.ndarray    # (L, L); row 0 is DC, rows 1.. are AC by energy
    energies: np.ndarray   # (L,) mean squared coefficient fractions, sum 1
    config: PatchConfig
    ac_mean_norm: float = 0.0      # residual ensemble-mean norm of AC parts
    zero_channels: tuple[int, ...] = ()  # channels with no training energy

    @property
    def n_channels(self) -> int:
        return self.kernels.shape[0]


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each row so its largest-magnitude entry is positive."""
    out = vectors.copy()
    for i in range(out.shape[0]):
        j = int(np.argmax(np.abs(out[i])))
        if out[i, j] < 0:
            out[i] = -out[i]
    return out


def fit_saab(patches: np.ndarray, config: PatchConfig) -> SaabFilterBank:
    """Fit the filter bank to an N x L matrix of patch vectors.

    The AC kernels are eigenvectors of the second-moment matrix of the
    per-patch mean-removed signals, restricted to the orthogonal
    complement of the constant direction and sorted by descending
    eigenvalue with a deterministic sign convention.
    """
    patches = np.asarray(patches, dtype=np.float64)
    L = config.patch_dim
    if patches.ndim != 2 or patches.shape[1] != L:
        raise ShapeError(f"expected (N, {L}) patches, got {patches.shape}")
    n = patches.shape[0]
    if n < L:
        raise InsufficientData(f"need at least {L} patches, got {n}")
    if not np.all(np.isfinite(patches)):
        raise ShapeError("patches contain non-finite values")

    dc = np.full(L, 1.0 / np.sqrt(L))

    # Raw second moment, accumulated in fixed-size chunks for memory.
    second = np.zeros((L, L))
    total = np.zeros(L)
    chunk = 1 << 17
    for i in range(0, n, chunk):
        part = patches[i : i + chunk]
        second += part.T @ part
        total += part.sum(axis=0)
    second /= n
    mean = total / n

    # AC second moment: project out the constant direction on both sides.
    proj = np.eye(L) - np.outer(dc, dc)
    ac_second = proj @ second @ proj
    ac_mean = proj @ mean

    # Eigendecompose within an explicit orthonormal basis of the complement
    # so the DC direction cannot leak back in numerically.
    basis = np.linalg.qr(np.column_stack([dc, np.eye(L)]))[0][:, 1:L]
    reduced = basis.T @ ac_second @ basis
    reduced = (reduced + reduced.T) / 2.0
    eigvals, eigvecs = np.linalg.eigh(reduced)
    order = np.argsort(-eigvals, kind="stable")
    eigvals = eigvals[order]
    ac_kernels = _fix_signs((basis @ eigvecs[:, order]).T)

    top = max(float(eigvals[0]), 0.0)
    zero = tuple(
        int(i) + 1
        for i in range(L - 1)
        if eigvals[i] <= _ZERO_EIGENVALUE_TOL * max(top, 1.0)
    )
    if zero:
        warnings.warn(
            f"AC statistics rank-deficient: {len(zero)} zero-energy channels",
            DegenerateInputWarning,
        )

    kernels = np.vstack([dc, ac_kernels])
    raw_energy = np.einsum("ij,jk,ik->i", kernels, second, kernels)
    raw_energy = np.maximum(raw_energy, 0.0)
    s = raw_energy.sum()
    if s > 0:
        energies = raw_energy / s
    else:
        energies = np.zeros(L)
        energies[0] = 1.0

    return SaabFilterBank(
        kernels=kernels,
        energies=energies,
        config=config,
        ac_mean_norm=float(np.linalg.norm(ac_mean)),
        zero_channels=zero,
    )


def transform(patch: np.ndarray, bank: SaabFilterBank) -> np.ndarray:
    """Map a length-L patch vector to its L spectral coefficients."""
    patch = np.asarray(patch, dtype=np.float64)
    L = bank.config.patch_dim
    if patch.shape != (L,):
        raise ShapeError(f"expected length-{L} patch, got shape {patch.shape}")
    return bank.kernels @ patch


def transform_batch(patches: np.ndarray, bank: SaabFilterBank) -> np.ndarray:
    """Transform an (N, L) patch matrix to (N, L) coefficients."""
    patches = np.asarray(patches, dtype=np.float64)
    L = bank.config.patch_dim
    if patches.ndim != 2 or patches.shape[1] != L:
        raise ShapeError(f"expected (N, {L}) patches, got {patches.shape}")
    return patches @ bank.kernels.T


def energy_percentages(bank: SaabFilterBank) -> np.ndarray:
    """Per-channel energy fractions (channel 0 is DC)."""
    return bank.energies.copy()
