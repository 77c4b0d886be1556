"""Training and inference orchestration.

Pipeline: stratified split -> per filter-bank fit and channel-wise
boosted-stump classifiers -> validation-driven channel selection ->
image-level ensemble over concatenated block scores -> metrics and
model-size accounting.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import jsonutil
from .boost import (
    BoostParams,
    StumpEnsemble,
    fit_stumps,
    param_count,
    predict_scores,
)
from .errors import (
    EmptyReport,
    FormatVersionError,
    MissingChannel,
    ShapeError,
    SingleClassError,
)
from .image_io import BLOCK_SIZE, Label, Tile, block_array
from .pixelhop import patch_matrix, response_extent
from .saab import HOP_CONFIGS, SaabFilterBank, PatchConfig, fit_saab

logger = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1

# k values swept for the number of selected channels; None means "all".
DEFAULT_CHANNEL_GRID = (1, 2, 3, 4, 8, None)


@dataclass(frozen=True)
class DetectorConfig:
    hops: tuple[str, ...] = ("B",)
    max_channels_per_hop: int = 48
    channel_grid: tuple = DEFAULT_CHANNEL_GRID
    boost: BoostParams = field(default_factory=BoostParams)
    split: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 0
    retain_all_channels: bool = False

    def __post_init__(self):
        if not self.hops:
            raise ValueError("at least one hop required")
        unknown = set(self.hops) - set(HOP_CONFIGS)
        if unknown:
            raise ValueError(f"unknown hops {sorted(unknown)}")
        if abs(sum(self.split) - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")


@dataclass
class ChannelScore:
    hop: str
    channel: int
    f1_train: float
    f1_val: float
    energy: float


@dataclass
class Metrics:
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int, tn: int) -> "Metrics":
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = (
            2 * precision * recall / (precision + recall)
            if precision + recall
            else 0.0
        )
        return cls(tp, fp, fn, tn, precision, recall, f1)

    @classmethod
    def from_predictions(cls, y_true: np.ndarray, y_pred: np.ndarray) -> "Metrics":
        y_true = np.asarray(y_true, dtype=bool)
        y_pred = np.asarray(y_pred, dtype=bool)
        tp = int(np.sum(y_true & y_pred))
        fp = int(np.sum(~y_true & y_pred))
        fn = int(np.sum(y_true & ~y_pred))
        tn = int(np.sum(~y_true & ~y_pred))
        return cls.from_counts(tp, fp, fn, tn)

    def as_dict(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "tn": self.tn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


@dataclass
class DetectorModel:
    config: DetectorConfig
    tile_size: int
    banks: dict[str, SaabFilterBank]
    channel_classifiers: dict[tuple[str, int], StumpEnsemble]
    selected: list[tuple[str, int]]
    ensemble: StumpEnsemble
    channel_report: list[ChannelScore]
    selection_sweep: list[dict] = field(default_factory=list)

    @property
    def blocks_per_tile(self) -> int:
        return (self.tile_size // BLOCK_SIZE) ** 2


@dataclass
class HopTrainResult:
    hop: str
    bank: SaabFilterBank
    classifiers: dict[int, StumpEnsemble]
    reports: list[ChannelScore]
    # block scores per channel, shape (n_tiles, blocks_per_tile, L)
    train_scores: np.ndarray
    val_scores: np.ndarray


def _tile_labels(tiles: list[Tile]) -> np.ndarray:
    return np.array([t.label == Label.FAKE for t in tiles], dtype=np.float64)


def split_dataset(
    tiles: list[Tile],
    split: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> tuple[list[Tile], list[Tile], list[Tile]]:
    """Seeded, class-stratified partition into train/val/test."""
    real = [t for t in tiles if t.label == Label.REAL]
    fake = [t for t in tiles if t.label == Label.FAKE]
    if not real or not fake:
        raise SingleClassError("dataset must contain both real and fake tiles")
    rng = np.random.default_rng(seed)
    parts: list[list[Tile]] = [[], [], []]
    for cls in (real, fake):
        idx = rng.permutation(len(cls))
        a = round(len(cls) * split[0])
        b = round(len(cls) * (split[0] + split[1]))
        for dest, sel in zip(parts, (idx[:a], idx[a:b], idx[b:])):
            dest.extend(cls[i] for i in sel)
    return parts[0], parts[1], parts[2]


def _check_tile_sizes(tiles: list[Tile]) -> int:
    sizes = {t.pixels.shape[:2] for t in tiles}
    if len(sizes) != 1:
        raise ShapeError(f"tiles have mixed sizes: {sorted(sizes)}")
    h, w = sizes.pop()
    if h != w:
        raise ShapeError("square tiles required")
    return h


def _hop_patches(tiles: list[Tile], cfg: PatchConfig) -> np.ndarray:
    """Stride-1 patches of all blocks: (n_blocks, windows_per_block, L)."""
    size = _check_tile_sizes(tiles)
    bpt = (size // BLOCK_SIZE) ** 2
    wh = response_extent(cfg) ** 2
    out = np.empty((len(tiles) * bpt, wh, cfg.patch_dim))
    for i, tile in enumerate(tiles):
        out[i * bpt : (i + 1) * bpt] = patch_matrix(block_array(tile), cfg)
    return out


def _block_f1(scores: np.ndarray, labels: np.ndarray) -> float:
    return Metrics.from_predictions(labels > 0.5, scores >= 0.5).f1


def train_channelwise(
    train_tiles: list[Tile],
    val_tiles: list[Tile],
    hop: str,
    boost_params: BoostParams,
    threads: int = 1,
) -> HopTrainResult:
    """Fit the hop's filter bank and one stump ensemble per channel.

    Classifiers are fit on training blocks only; validation blocks are
    used solely for the per-channel F1 report.
    """
    cfg = HOP_CONFIGS[hop]
    size = _check_tile_sizes(train_tiles)
    bpt = (size // BLOCK_SIZE) ** 2
    y_train = np.repeat(_tile_labels(train_tiles), bpt)
    y_val = np.repeat(_tile_labels(val_tiles), bpt)

    patches = _hop_patches(train_tiles, cfg)
    bank = fit_saab(patches.reshape(-1, cfg.patch_dim), cfg)
    resp_train = patches.reshape(-1, cfg.patch_dim) @ bank.kernels.T
    resp_train = resp_train.reshape(patches.shape[0], patches.shape[1], -1)
    del patches
    val_patches = _hop_patches(val_tiles, cfg)
    resp_val = val_patches.reshape(-1, cfg.patch_dim) @ bank.kernels.T
    resp_val = resp_val.reshape(val_patches.shape[0], val_patches.shape[1], -1)
    del val_patches

    L = cfg.patch_dim

    def fit_channel(ch: int) -> StumpEnsemble:
        return fit_stumps(
            np.ascontiguousarray(resp_train[:, :, ch]), y_train, boost_params
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            classifiers = dict(enumerate(pool.map(fit_channel, range(L))))
    else:
        classifiers = {ch: fit_channel(ch) for ch in range(L)}

    reports = []
    train_scores = np.empty((len(train_tiles), bpt, L))
    val_scores = np.empty((len(val_tiles), bpt, L))
    for ch in range(L):
        clf = classifiers[ch]
        s_train = predict_scores(clf, np.ascontiguousarray(resp_train[:, :, ch]))
        s_val = predict_scores(clf, np.ascontiguousarray(resp_val[:, :, ch]))
        train_scores[:, :, ch] = s_train.reshape(len(train_tiles), bpt)
        val_scores[:, :, ch] = s_val.reshape(len(val_tiles), bpt)
        reports.append(
            ChannelScore(
                hop=hop,
                channel=ch,
                f1_train=_block_f1(s_train, y_train),
                f1_val=_block_f1(s_val, y_val),
                energy=float(bank.energies[ch]),
            )
        )
        logger.info(
            "hop %s channel %d: train F1 %.4f, val F1 %.4f",
            hop, ch, reports[-1].f1_train, reports[-1].f1_val,
        )
    return HopTrainResult(hop, bank, classifiers, reports, train_scores, val_scores)


def _rank_channels(reports: list[ChannelScore]) -> list[int]:
    """Channel indices by descending validation F1, ties to lower index."""
    return [
        r.channel
        for r in sorted(reports, key=lambda r: (-r.f1_val, r.channel))
    ]


def _assemble_features(
    hop_results: dict[str, HopTrainResult],
    selected: list[tuple[str, int]],
    which: str,
) -> np.ndarray:
    """Image features: per block (row-major), per selected channel in order."""
    planes = [
        getattr(hop_results[hop], which)[:, :, ch] for hop, ch in selected
    ]
    stacked = np.stack(planes, axis=2)  # (n_tiles, bpt, n_sel)
    return stacked.reshape(stacked.shape[0], -1)


@dataclass
class SelectionOutcome:
    selected: list[tuple[str, int]]
    ensemble: StumpEnsemble
    val_f1: float
    sweep: list[dict]


def select_channels(
    hop_results: dict[str, HopTrainResult],
    y_train: np.ndarray,
    y_val: np.ndarray,
    config: DetectorConfig,
) -> SelectionOutcome:
    """Sweep candidate channel counts; keep the best image-level val F1.

    Single hop: top-k channels by validation F1 for each k in the grid.
    Multiple hops: the top one or two channels from every hop. Ties go to
    the smaller candidate set.
    """
    if not hop_results or not any(r.reports for r in hop_results.values()):
        raise EmptyReport("no channel reports to select from")

    ranked = {hop: _rank_channels(res.reports) for hop, res in hop_results.items()}
    candidates: list[list[tuple[str, int]]] = []
    if len(config.hops) == 1:
        hop = config.hops[0]
        n_ch = len(ranked[hop])
        ks = sorted(
            {
                min(n_ch if k is None else k, n_ch, config.max_channels_per_hop)
                for k in config.channel_grid
            }
        )
        for k in ks:
            if k >= 1:
                candidates.append([(hop, ch) for ch in ranked[hop][:k]])
    else:
        for m in (1, 2):
            if m > config.max_channels_per_hop:
                continue
            candidates.append(
                [(hop, ch) for hop in config.hops for ch in ranked[hop][:m]]
            )

    best: SelectionOutcome | None = None
    sweep = []
    for selected in candidates:
        n_ch = len(selected)
        feats_train = _assemble_features(hop_results, selected, "train_scores")
        feats_val = _assemble_features(hop_results, selected, "val_scores")
        params = replace(config.boost, n_trees=config.boost.n_trees * n_ch)
        ensemble = fit_stumps(feats_train, y_train, params)
        val_f1 = _block_f1(predict_scores(ensemble, feats_val), y_val)
        sweep.append(
            {
                "n_channels": n_ch,
                "channels": [[h, c] for h, c in selected],
                "val_f1": val_f1,
            }
        )
        logger.info("selection sweep n_ch=%d: val F1 %.4f", n_ch, val_f1)
        if best is None or val_f1 > best.val_f1:
            best = SelectionOutcome(selected, ensemble, val_f1, sweep)
    assert best is not None
    best.sweep = sweep
    return best


def train(config: DetectorConfig, tiles: list[Tile]) -> DetectorModel:
    """Full training run on labeled tiles; deterministic in (config, tiles)."""
    tile_size = _check_tile_sizes(tiles)
    train_tiles, val_tiles, _ = split_dataset(tiles, config.split, config.seed)
    if not val_tiles:
        raise SingleClassError("validation split is empty")
    threads = int(os.environ.get("SATDETECT_THREADS", "1"))
    hop_results: dict[str, HopTrainResult] = {}
    for hop in config.hops:
        logger.info("training hop %s", hop)
        hop_results[hop] = train_channelwise(
            train_tiles, val_tiles, hop, config.boost, threads
        )
    outcome = select_channels(
        hop_results, _tile_labels(train_tiles), _tile_labels(val_tiles), config
    )
    logger.info(
        "selected %d channels: %s (val F1 %.4f)",
        len(outcome.selected), outcome.selected, outcome.val_f1,
    )
    retained: dict[tuple[str, int], StumpEnsemble] = {}
    for hop, res in hop_results.items():
        for ch, clf in res.classifiers.items():
            if config.retain_all_channels or (hop, ch) in outcome.selected:
                retained[(hop, ch)] = clf
    return DetectorModel(
        config=config,
        tile_size=tile_size,
        banks={hop: hop_results[hop].bank for hop in config.hops},
        channel_classifiers=retained,
        selected=outcome.selected,
        ensemble=outcome.ensemble,
        channel_report=[r for res in hop_results.values() for r in res.reports],
        selection_sweep=outcome.sweep,
    )


def score_windows(
    pixels: np.ndarray,
    model: DetectorModel,
    channels: list[tuple[str, int]],
) -> np.ndarray:
    """Soft channel scores for a (B, 16, 16, 3) batch of windows.

    Shared by image-feature assembly and heat-map scoring so both paths
    agree exactly.
    """
    out = np.empty((pixels.shape[0], len(channels)))
    by_hop: dict[str, list[int]] = {}
    for i, (hop, _) in enumerate(channels):
        by_hop.setdefault(hop, []).append(i)
    for hop, cols in by_hop.items():
        bank = model.banks.get(hop)
        if bank is None:
            raise MissingChannel(f"hop {hop} not in model")
        patches = patch_matrix(pixels, bank.config)
        resp = patches.reshape(-1, bank.config.patch_dim) @ bank.kernels.T
        resp = resp.reshape(pixels.shape[0], patches.shape[1], -1)
        for i in cols:
            _, ch = channels[i]
            clf = model.channel_classifiers.get((hop, ch))
            if clf is None:
                raise MissingChannel(f"channel {hop}:{ch} not retained in model")
            out[:, i] = predict_scores(clf, np.ascontiguousarray(resp[:, :, ch]))
    return out


def image_feature(tile: Tile, model: DetectorModel) -> np.ndarray:
    """Concatenated per-block selected-channel scores, block-major order."""
    if tile.pixels.shape[:2] != (model.tile_size, model.tile_size):
        raise ShapeError(
            f"tile size {tile.pixels.shape[:2]} does not match the "
            f"model's training size {model.tile_size}"
        )
    scores = score_windows(block_array(tile), model, model.selected)
    return scores.reshape(-1)


def predict(tile: Tile, model: DetectorModel) -> tuple[Label, float]:
    """Image-level decision: fake iff the ensemble score is >= 0.5."""
    feat = image_feature(tile, model)
    score = float(predict_scores(model.ensemble, feat.reshape(1, -1))[0])
    return (Label.FAKE if score >= 0.5 else Label.REAL), score


def evaluate(tiles: list[Tile], model: DetectorModel) -> Metrics:
    """Confusion counts and P/R/F1 with fake as the positive class."""
    y_true = [t.label == Label.FAKE for t in tiles]
    y_pred = [predict(t, model)[0] == Label.FAKE for t in tiles]
    return Metrics.from_predictions(np.array(y_true), np.array(y_pred))


def model_size_report(model: DetectorModel) -> dict:
    """Parameter accounting: filters + channel-wise + ensemble classifiers."""
    filter_params = sum(
        model.banks[hop].config.patch_dim for hop in model.config.hops
    )
    channelwise = sum(
        param_count(model.channel_classifiers[key]) for key in model.selected
    )
    ensemble = param_count(model.ensemble)
    per_hop = {
        hop: {
            "selected_channels": sum(1 for h, _ in model.selected if h == hop),
            "filter_params": model.banks[hop].config.patch_dim,
        }
        for hop in model.config.hops
    }
    return {
        "selected_channels": len(model.selected),
        "filter_params": filter_params,
        "channelwise_params": channelwise,
        "ensemble_params": ensemble,
        "total_params": filter_params + channelwise + ensemble,
        "per_hop": per_hop,
    }


# --- model (de)serialization -------------------------------------------------


def _ensemble_to_dict(ens: StumpEnsemble) -> dict:
    return {
        "base_score": ens.base_score,
        "learning_rate": ens.params.learning_rate,
        "lam": ens.params.lam,
        "min_child_weight": ens.params.min_child_weight,
        "n_features": ens.n_features,
        "trees": [
            [int(f), float(t), float(l), float(r)]
            for f, t, l, r in zip(
                ens.features, ens.thresholds, ens.left_values, ens.right_values
            )
        ],
    }


def _ensemble_from_dict(d: dict) -> StumpEnsemble:
    trees = d["trees"]
    params = BoostParams(
        n_trees=max(len(trees), 1),
        learning_rate=d["learning_rate"],
        lam=d["lam"],
        min_child_weight=d["min_child_weight"],
    )
    arr = np.array(trees, dtype=np.float64).reshape(len(trees), 4)
    return StumpEnsemble(
        features=arr[:, 0].astype(np.int64),
        thresholds=arr[:, 1].copy(),
        left_values=arr[:, 2].copy(),
        right_values=arr[:, 3].copy(),
        base_score=float(d["base_score"]),
        params=params,
        n_features=int(d["n_features"]),
    )


def model_to_dict(model: DetectorModel) -> dict:
    cfg = model.config
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "config": {
            "hops": list(cfg.hops),
            "max_channels_per_hop": cfg.max_channels_per_hop,
            "channel_grid": [k for k in cfg.channel_grid],
            "boost": {
                "n_trees": cfg.boost.n_trees,
                "learning_rate": cfg.boost.learning_rate,
                "lam": cfg.boost.lam,
                "min_child_weight": cfg.boost.min_child_weight,
            },
            "split": list(cfg.split),
            "seed": cfg.seed,
            "retain_all_channels": cfg.retain_all_channels,
        },
        "tile_size": model.tile_size,
        "banks": {
            hop: {
                "size": bank.config.size,
                "channels": bank.config.channels,
                "kernels": bank.kernels.tolist(),
                "energies": bank.energies.tolist(),
                "ac_mean_norm": bank.ac_mean_norm,
                "zero_channels": list(bank.zero_channels),
            }
            for hop, bank in model.banks.items()
        },
        "selected": [[hop, ch] for hop, ch in model.selected],
        "channel_classifiers": {
            f"{hop}:{ch}": _ensemble_to_dict(clf)
            for (hop, ch), clf in sorted(model.channel_classifiers.items())
        },
        "ensemble": _ensemble_to_dict(model.ensemble),
        "channel_report": [
            {
                "hop": r.hop,
                "channel": r.channel,
                "f1_train": r.f1_train,
                "f1_val": r.f1_val,
                "energy": r.energy,
            }
            for r in model.channel_report
        ],
        "selection_sweep": model.selection_sweep,
    }


def model_from_dict(data: dict) -> DetectorModel:
    if data.get("format_version") != MODEL_FORMAT_VERSION:
        raise FormatVersionError(
            f"unsupported model format_version {data.get('format_version')!r}"
        )
    c = data["config"]
    config = DetectorConfig(
        hops=tuple(c["hops"]),
        max_channels_per_hop=c["max_channels_per_hop"],
        channel_grid=tuple(c["channel_grid"]),
        boost=BoostParams(**c["boost"]),
        split=tuple(c["split"]),
        seed=c["seed"],
        retain_all_channels=c["retain_all_channels"],
    )
    banks = {
        hop: SaabFilterBank(
            kernels=np.array(b["kernels"], dtype=np.float64),
            energies=np.array(b["energies"], dtype=np.float64),
            config=PatchConfig(b["size"], b["channels"]),
            ac_mean_norm=b["ac_mean_norm"],
            zero_channels=tuple(b["zero_channels"]),
        )
        for hop, b in data["banks"].items()
    }
    classifiers = {}
    for key, d in data["channel_classifiers"].items():
        hop, _, ch = key.partition(":")
        classifiers[(hop, int(ch))] = _ensemble_from_dict(d)
    return DetectorModel(
        config=config,
        tile_size=data["tile_size"],
        banks=banks,
        channel_classifiers=classifiers,
        selected=[(hop, int(ch)) for hop, ch in data["selected"]],
        ensemble=_ensemble_from_dict(data["ensemble"]),
        channel_report=[ChannelScore(**r) for r in data["channel_report"]],
        selection_sweep=data.get("selection_sweep", []),
    )


def save_model(model: DetectorModel, path) -> None:
    jsonutil.dump(model_to_dict(model), path)


def load_model(path) -> DetectorModel:
    import json

    with open(path, "r", encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
