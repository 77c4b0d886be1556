"""Tile loading, block partitioning, perturbations and synthetic data.

A tile is an H x W x 3 image with float values in [0, 1]; H and W must be
multiples of the 16-pixel block size. Blocks are the non-overlapping
16 x 16 x 3 units the detector works on.
"""

from __future__ import annotations

import hashlib
import io
import os
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy.ndimage import gaussian_filter

from .errors import CodecError, DecodeError, IoError, ShapeError

BLOCK_SIZE = 16


class Label(str, Enum):
    REAL = "real"
    FAKE = "fake"
    UNKNOWN = "unknown"


@dataclass
class Tile:
    pixels: np.ndarray  # (H, W, 3) float64 in [0, 1]
    label: Label = Label.UNKNOWN
    id: str = ""

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass
class Block:
    pixels: np.ndarray  # (16, 16, 3)
    tile_id: str = ""
    position: tuple[int, int] = (0, 0)  # (row, col) block indices


class PerturbationKind(str, Enum):
    NONE = "none"
    RESIZE = "resize"
    AWGN = "awgn"
    JPEG = "jpeg"


@dataclass
class PerturbationConfig:
    kind: PerturbationKind = PerturbationKind.NONE
    target_size: int = 0       # resize only
    sigma: float = 0.0         # awgn only
    quality: int = 0           # jpeg only
    seed: int = 0              # awgn only


def _validate_pixels(pixels: np.ndarray) -> None:
    if pixels.ndim != 3 or pixels.shape[2] != 3:
        raise ShapeError(f"expected (H, W, 3) pixels, got shape {pixels.shape}")
    h, w = pixels.shape[:2]
    if h <= 0 or w <= 0 or h % BLOCK_SIZE or w % BLOCK_SIZE:
        raise ShapeError(
            f"tile dimensions {h}x{w} must be positive multiples of {BLOCK_SIZE}"
        )


def load_tile(path: str | os.PathLike, label: Label = Label.UNKNOWN) -> Tile:
    """Load a PNG/JPEG file into a validated Tile scaled to [0, 1]."""
    try:
        with Image.open(path) as img:
            img.load()
            mode = img.mode
            arr = np.asarray(img)
    except (UnidentifiedImageError, OSError) as exc:
        raise DecodeError(f"cannot decode image {path}: {exc}") from exc
    if mode != "RGB":
        raise ShapeError(f"{path}: expected a 3-channel RGB image, got mode {mode}")
    _validate_pixels(arr)
    pixels = arr.astype(np.float64) / 255.0
    return Tile(pixels=pixels, label=label, id=Path(path).stem)


def save_tile(tile: Tile, path: str | os.PathLike) -> None:
    """Write a tile as an 8-bit RGB PNG."""
    arr = np.clip(np.round(tile.pixels * 255.0), 0, 255).astype(np.uint8)
    try:
        Image.fromarray(arr, mode="RGB").save(path, format="PNG")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def block_array(tile: Tile) -> np.ndarray:
    """All blocks of a tile as one (n_blocks, 16, 16, 3) array, row-major."""
    _validate_pixels(tile.pixels)
    h, w = tile.pixels.shape[:2]
    nr, nc = h // BLOCK_SIZE, w // BLOCK_SIZE
    a = tile.pixels.reshape(nr, BLOCK_SIZE, nc, BLOCK_SIZE, 3)
    return np.ascontiguousarray(a.transpose(0, 2, 1, 3, 4)).reshape(
        nr * nc, BLOCK_SIZE, BLOCK_SIZE, 3
    )


def partition_blocks(tile: Tile) -> list[Block]:
    """Split a tile into non-overlapping 16x16x3 blocks in row-major order."""
    h, w = tile.pixels.shape[:2]
    nc = w // BLOCK_SIZE
    arr = block_array(tile)
    return [
        Block(pixels=arr[i], tile_id=tile.id, position=(i // nc, i % nc))
        for i in range(arr.shape[0])
    ]


def assemble_blocks(blocks: list[Block]) -> np.ndarray:
    """Inverse of partition_blocks; used by the reassembly tests."""
    nr = max(b.position[0] for b in blocks) + 1
    nc = max(b.position[1] for b in blocks) + 1
    out = np.zeros((nr * BLOCK_SIZE, nc * BLOCK_SIZE, 3))
    for b in blocks:
        r, c = b.position
        out[
            r * BLOCK_SIZE : (r + 1) * BLOCK_SIZE,
            c * BLOCK_SIZE : (c + 1) * BLOCK_SIZE,
        ] = b.pixels
    return out


def resize(tile: Tile, target: int) -> Tile:
    """Integer-factor box downsampling (each output pixel is a source-box mean)."""
    h, w = tile.pixels.shape[:2]
    if h != w:
        raise ShapeError("resize expects square tiles")
    if target >= h:
        raise ShapeError(f"resize target {target} must be below current size {h}")
    if target <= 0 or target % BLOCK_SIZE:
        raise ShapeError(f"resize target {target} must be a multiple of {BLOCK_SIZE}")
    if h % target:
        raise ShapeError(f"non-integer downscale factor {h}/{target}")
    f = h // target
    a = tile.pixels.reshape(target, f, target, f, 3)
    out = a.mean(axis=(1, 3))
    return Tile(pixels=out, label=tile.label, id=tile.id)


def add_gaussian_noise(tile: Tile, sigma: float, seed: int) -> Tile:
    """Add seeded i.i.d. N(0, sigma^2) per pixel per channel, clamped to [0, 1]."""
    if sigma < 0:
        raise ShapeError("sigma must be non-negative")
    if sigma == 0:
        return Tile(pixels=tile.pixels.copy(), label=tile.label, id=tile.id)
    rng = np.random.default_rng(seed)
    noisy = tile.pixels + rng.normal(0.0, sigma, tile.pixels.shape)
    return Tile(pixels=np.clip(noisy, 0.0, 1.0), label=tile.label, id=tile.id)


def jpeg_roundtrip(tile: Tile, quality: int) -> Tile:
    """Encode to baseline JPEG (4:2:0 chroma) at the given quality, decode back."""
    if not 1 <= quality <= 100:
        raise CodecError(f"quality {quality} outside 1..100")
    arr = np.clip(np.round(tile.pixels * 255.0), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    try:
        Image.fromarray(arr, mode="RGB").save(
            buf, format="JPEG", quality=quality, subsampling=2
        )
        buf.seek(0)
        with Image.open(buf) as img:
            decoded = np.asarray(img.convert("RGB"))
    except OSError as exc:
        raise CodecError(f"JPEG round trip failed: {exc}") from exc
    return Tile(
        pixels=decoded.astype(np.float64) / 255.0, label=tile.label, id=tile.id
    )


def _tile_seed(base_seed: int, tile_id: str) -> int:
    """Per-tile noise seed so AWGN is independent across tiles yet reproducible."""
    digest = hashlib.sha256(f"{base_seed}:{tile_id}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def apply_perturbation(tile: Tile, cfg: PerturbationConfig) -> Tile:
    if cfg.kind == PerturbationKind.NONE:
        return tile
    if cfg.kind == PerturbationKind.RESIZE:
        return resize(tile, cfg.target_size)
    if cfg.kind == PerturbationKind.AWGN:
        return add_gaussian_noise(tile, cfg.sigma, _tile_seed(cfg.seed, tile.id))
    if cfg.kind == PerturbationKind.JPEG:
        return jpeg_roundtrip(tile, cfg.quality)
    raise ValueError(f"unknown perturbation kind {cfg.kind}")


def parse_perturbation_spec(spec: str, seed: int = 0) -> PerturbationConfig:
    """Parse 'none' | 'resize:N' | 'awgn:SIGMA' | 'jpeg:QF' into a config."""
    spec = spec.strip()
    if spec == "none":
        return PerturbationConfig()
    try:
        kind, _, value = spec.partition(":")
        if kind == "resize":
            return PerturbationConfig(
                kind=PerturbationKind.RESIZE, target_size=int(value)
            )
        if kind == "awgn":
            return PerturbationConfig(
                kind=PerturbationKind.AWGN, sigma=float(value), seed=seed
            )
        if kind == "jpeg":
            return PerturbationConfig(kind=PerturbationKind.JPEG, quality=int(value))
    except ValueError as exc:
        raise ValueError(f"bad perturbation spec {spec!r}: {exc}") from exc
    raise ValueError(f"bad perturbation spec {spec!r}")


# --- synthetic dataset -------------------------------------------------------

_BLUR_SIGMA = 2.2        # high-frequency suppression applied to fakes
_PATTERN_AMPLITUDE = 0.05   # faint periodic artifact injected into fakes
_TEXTURE_SIGMA = 0.045   # fine texture noise on the procedural scenes


def _render_scene(rng: np.random.Generator, size: int) -> np.ndarray:
    """Procedural content: smooth color fields plus sharp-edged shapes."""
    coarse = rng.uniform(0.25, 0.75, (size // BLOCK_SIZE, size // BLOCK_SIZE, 3))
    img = np.kron(coarse, np.ones((BLOCK_SIZE, BLOCK_SIZE, 1)))
    img = gaussian_filter(img, sigma=(8.0, 8.0, 0.0), mode="nearest")

    # axis-aligned rectangles with hard edges
    for _ in range(int(rng.integers(6, 12))):
        r0, c0 = rng.integers(0, size - 8, size=2)
        r1 = int(rng.integers(r0 + 4, min(r0 + size // 2, size)))
        c1 = int(rng.integers(c0 + 4, min(c0 + size // 2, size)))
        img[r0:r1, c0:c1] += rng.uniform(-0.35, 0.35, 3)

    # diagonal half-plane edges
    yy, xx = np.mgrid[0:size, 0:size]
    for _ in range(int(rng.integers(2, 5))):
        theta = rng.uniform(0, np.pi)
        offset = rng.uniform(0.2, 0.8) * size
        mask = np.cos(theta) * xx + np.sin(theta) * yy > offset
        img[mask] += rng.uniform(-0.25, 0.25, 3)

    return np.clip(img, 0.03, 0.97)


def _make_real(rng: np.random.Generator, size: int) -> np.ndarray:
    scene = _render_scene(rng, size)
    scene = scene + rng.normal(0.0, _TEXTURE_SIGMA, scene.shape)
    return np.clip(scene, 0.0, 1.0)


def _make_fake(rng: np.random.Generator, size: int) -> np.ndarray:
    scene = _render_scene(rng, size)
    scene = scene + rng.normal(0.0, _TEXTURE_SIGMA, scene.shape)
    blurred = gaussian_filter(scene, sigma=(_BLUR_SIGMA, _BLUR_SIGMA, 0.0))
    yy, xx = np.mgrid[0:size, 0:size]
    period = float(rng.uniform(4.0, 8.0))
    phase_x, phase_y = rng.uniform(0, 2 * np.pi, size=2)
    pattern = _PATTERN_AMPLITUDE * (
        np.sin(2 * np.pi * xx / period + phase_x)
        * np.sin(2 * np.pi * yy / period + phase_y)
    )
    return np.clip(blurred + pattern[:, :, None], 0.0, 1.0)


def synth_dataset(
    n_per_class: int, out_dir: str | os.PathLike, seed: int, size: int = 256
) -> Path:
    """Write a deterministic procedural real/fake dataset under out_dir.

    Real tiles combine smooth fields, sharp edges and fine texture; fake
    tiles are independent draws with high frequencies blurred away and a
    faint periodic pattern injected. Layout: out_dir/real/*.png,
    out_dir/fake/*.png.
    """
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    if size <= 0 or size % BLOCK_SIZE:
        raise ShapeError(f"size {size} must be a multiple of {BLOCK_SIZE}")
    root = Path(out_dir)
    try:
        (root / "real").mkdir(parents=True, exist_ok=True)
        (root / "fake").mkdir(parents=True, exist_ok=True)
        rng = np.random.default_rng(seed)
        for i in range(n_per_class):
            tile = Tile(_make_real(rng, size), Label.REAL, f"real_{i:04d}")
            save_tile(tile, root / "real" / f"{tile.id}.png")
        for i in range(n_per_class):
            tile = Tile(_make_fake(rng, size), Label.FAKE, f"fake_{i:04d}")
            save_tile(tile, root / "fake" / f"{tile.id}.png")
    except OSError as exc:
        raise IoError(f"cannot write dataset under {root}: {exc}") from exc
    return root


def load_dataset(root: str | os.PathLike) -> list[Tile]:
    """Load all tiles from the real/ and fake/ subdirectories of root."""
    root = Path(root)
    tiles: list[Tile] = []
    for sub, label in (("real", Label.REAL), ("fake", Label.FAKE)):
        d = root / sub
        if not d.is_dir():
            continue
        for p in sorted(d.iterdir()):
            if p.suffix.lower() in (".png", ".jpg", ".jpeg"):
                tiles.append(load_tile(p, label))
    return tiles
