import numpy as np
import pytest

from satdetect.boost import BoostParams
from satdetect.detector import DetectorConfig, split_dataset, train
from satdetect.image_io import load_dataset, synth_dataset


@pytest.fixture(scope="session")
def small_dataset_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("synth") / "data"
    synth_dataset(20, root, seed=11, size=64)
    return root


@pytest.fixture(scope="session")
def small_tiles(small_dataset_dir):
    return load_dataset(small_dataset_dir)


@pytest.fixture(scope="session")
def small_config():
    return DetectorConfig(
        hops=("B",),
        seed=3,
        boost=BoostParams(n_trees=100),
        retain_all_channels=True,
    )


@pytest.fixture(scope="session")
def small_model(small_tiles, small_config):
    return train(small_config, small_tiles)


@pytest.fixture(scope="session")
def small_splits(small_tiles, small_config):
    return split_dataset(small_tiles, small_config.split, small_config.seed)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
