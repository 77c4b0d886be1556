"""Sliding-window application of a filter bank over 16x16 blocks.

Every s x s x 3 window (stride 1, no padding) is flattened in
(row, col, channel) order and transformed, giving a joint
spatial/spectral response tensor of shape (17-s, 17-s, L) per block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigMismatch, ShapeError
from .image_io import BLOCK_SIZE, Block
from .saab import PatchConfig, SaabFilterBank


@dataclass
class ResponseTensor:
    values: np.ndarray  # (H, W, L)
    config: PatchConfig


def response_extent(config: PatchConfig) -> int:
    """Spatial side length of the response grid for a 16x16 block."""
    return BLOCK_SIZE + 1 - config.size


def patch_matrix(pixels: np.ndarray, config: PatchConfig) -> np.ndarray:
    """All stride-1 windows of (..., h, w, 3) pixels as a patch matrix.

    Accepts a single block (16, 16, 3) or a batch (B, 16, 16, 3); returns
    (n_windows, L) or (B, n_windows, L) with row-major window order.
    """
    s = config.size
    batched = pixels.ndim == 4
    if not batched:
        pixels = pixels[None]
    if pixels.shape[1:] != (BLOCK_SIZE, BLOCK_SIZE, config.channels):
        raise ShapeError(
            f"expected blocks of shape (16, 16, {config.channels}), "
            f"got {pixels.shape[1:]}"
        )
    win = sliding_window_view(pixels, (s, s, config.channels), axis=(1, 2, 3))
    n = response_extent(config)
    out = win.reshape(pixels.shape[0], n * n, config.patch_dim)
    out = np.ascontiguousarray(out)
    return out if batched else out[0]


def extract_patches(block: Block, config: PatchConfig) -> np.ndarray:
    """The (17-s)^2 x L patch matrix of one block."""
    return patch_matrix(np.asarray(block.pixels, dtype=np.float64), config)


def apply(block: Block, bank: SaabFilterBank) -> ResponseTensor:
    """Transform every window of a block; returns the (H, W, L) tensor."""
    patches = extract_patches(block, bank.config)
    n = response_extent(bank.config)
    if bank.kernels.shape[1] != bank.config.patch_dim:
        raise ConfigMismatch("filter bank kernels do not match its patch config")
    values = (patches @ bank.kernels.T).reshape(n, n, bank.config.patch_dim)
    return ResponseTensor(values=values, config=bank.config)


def channel_features(tensor: ResponseTensor, channel: int) -> np.ndarray:
    """Row-major flattening of one channel's spatial response plane."""
    L = tensor.values.shape[2]
    if not 0 <= channel < L:
        raise IndexError(f"channel {channel} outside 0..{L - 1}")
    return tensor.values[:, :, channel].reshape(-1).copy()
