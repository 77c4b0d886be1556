"""Spatial real/fake probability maps from overlapping block scores."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from PIL import Image
from scipy.ndimage import distance_transform_edt

from .detector import DetectorModel, score_windows
from .errors import IoError, MissingChannel, ShapeError
from .image_io import BLOCK_SIZE, Tile

DEFAULT_STRIDE = 4


@dataclass
class HeatMap:
    scores: np.ndarray  # (H, W) in [0, 1], pixel resolution of the tile
    stride: int
    channel: tuple[str, int] | None = None


def _accumulate(
    tile: Tile, window_scores: np.ndarray, positions: list[tuple[int, int]]
) -> np.ndarray:
    h, w = tile.pixels.shape[:2]
    sums = np.zeros((h, w))
    counts = np.zeros((h, w))
    for score, (r, c) in zip(window_scores, positions):
        sums[r : r + BLOCK_SIZE, c : c + BLOCK_SIZE] += score
        counts[r : r + BLOCK_SIZE, c : c + BLOCK_SIZE] += 1
    covered = counts > 0
    out = np.zeros((h, w))
    out[covered] = sums[covered] / counts[covered]
    if not covered.all():
        # pixels outside every window take the nearest covered value
        idx = distance_transform_edt(
            ~covered, return_distances=False, return_indices=True
        )
        out = out[tuple(idx)]
    return out


def _window_batch(tile: Tile, stride: int):
    if not 1 <= stride <= BLOCK_SIZE:
        raise ShapeError(f"stride {stride} outside 1..{BLOCK_SIZE}")
    h, w = tile.pixels.shape[:2]
    if h < BLOCK_SIZE or w < BLOCK_SIZE:
        raise ShapeError("tile smaller than one block")
    win = sliding_window_view(
        tile.pixels, (BLOCK_SIZE, BLOCK_SIZE, 3), axis=(0, 1, 2)
    )[::stride, ::stride, 0]
    positions = [
        (r * stride, c * stride)
        for r in range(win.shape[0])
        for c in range(win.shape[1])
    ]
    batch = np.ascontiguousarray(win).reshape(-1, BLOCK_SIZE, BLOCK_SIZE, 3)
    return batch, positions


def compute_heatmap(
    tile: Tile, model: DetectorModel, stride: int = DEFAULT_STRIDE
) -> HeatMap:
    """Mean selected-channel score of every window, averaged per pixel."""
    batch, positions = _window_batch(tile, stride)
    scores = score_windows(batch, model, model.selected).mean(axis=1)
    return HeatMap(scores=_accumulate(tile, scores, positions), stride=stride)


def channel_heatmap(
    tile: Tile,
    model: DetectorModel,
    hop: str,
    channel: int,
    stride: int = DEFAULT_STRIDE,
) -> HeatMap:
    """Heat map from a single channel's classifier."""
    if (hop, channel) not in model.channel_classifiers:
        raise MissingChannel(
            f"channel {hop}:{channel} was not retained; train with "
            "retain_all_channels for channel-level maps"
        )
    batch, positions = _window_batch(tile, stride)
    scores = score_windows(batch, model, [(hop, channel)])[:, 0]
    return HeatMap(
        scores=_accumulate(tile, scores, positions),
        stride=stride,
        channel=(hop, channel),
    )


def colorize(scores: np.ndarray) -> np.ndarray:
    """Diverging colormap: blue (0.0) -> white (0.5) -> red (1.0)."""
    v = np.clip(scores, 0.0, 1.0)
    low = 2.0 * v           # ramp within [0, 0.5]
    high = 2.0 * v - 1.0    # ramp within [0.5, 1]
    r = np.where(v <= 0.5, 255.0 * low, 255.0)
    g = np.where(v <= 0.5, 255.0 * low, 255.0 * (1.0 - high))
    b = np.where(v <= 0.5, 255.0, 255.0 * (1.0 - high))
    return np.clip(np.round(np.stack([r, g, b], axis=2)), 0, 255).astype(np.uint8)


def render_png(hmap: HeatMap, out_path) -> None:
    """Write the score grid as an 8-bit RGB PNG at tile resolution."""
    try:
        Image.fromarray(colorize(hmap.scores), mode="RGB").save(
            out_path, format="PNG"
        )
    except OSError as exc:
        raise IoError(f"cannot write {out_path}: {exc}") from exc


def save_scores(hmap: HeatMap, out_path) -> None:
    """Side-car JSON with the raw score grid."""
    from . import jsonutil

    jsonutil.dump(
        {
            "stride": hmap.stride,
            "channel": list(hmap.channel) if hmap.channel else None,
            "scores": hmap.scores.tolist(),
        },
        out_path,
    )
