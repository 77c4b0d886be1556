"""Fake satellite-image detection with parallel data-driven filter banks.

16x16 image blocks are transformed by small orthonormal filter banks
(one constant kernel plus PCA kernels over mean-removed patches); each
spectral channel's spatial responses feed a boosted-stump classifier,
the most discriminant channels are kept by validation F1, and block
scores are ensembled into an image-level decision.
"""

__version__ = "0.1.0"

from .boost import BoostParams, Stump, StumpEnsemble, fit_stumps, param_count, predict_score
from .detector import (
    ChannelScore,
    DetectorConfig,
    DetectorModel,
    Metrics,
    evaluate,
    image_feature,
    load_model,
    model_size_report,
    predict,
    save_model,
    split_dataset,
    train,
)
from .heatmap import HeatMap, channel_heatmap, compute_heatmap, render_png
from .image_io import (
    Block,
    Label,
    PerturbationConfig,
    Tile,
    add_gaussian_noise,
    jpeg_roundtrip,
    load_dataset,
    load_tile,
    partition_blocks,
    resize,
    save_tile,
    synth_dataset,
)
from .pixelhop import ResponseTensor, apply, channel_features, extract_patches
from .saab import HOP_CONFIGS, PatchConfig, SaabFilterBank, energy_percentages, fit_saab, transform
