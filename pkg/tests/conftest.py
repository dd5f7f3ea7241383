import numpy as np
import pytest

from sceneaug.benchmark import BENCHMARK_CONFIG, write_benchmark_assets, train_library, train_vocab
from sceneaug.genbackend import ProceduralBackend
from sceneaug.geometry import TopDownConfig
from sceneaug.scene import DemoDataset, synth_demo


@pytest.fixture(scope="session")
def assets_dir(tmp_path_factory):
    path = tmp_path_factory.mktemp("assets")
    write_benchmark_assets(path, BENCHMARK_CONFIG)
    return path


@pytest.fixture(scope="session")
def library(assets_dir):
    return train_library(assets_dir)


@pytest.fixture(scope="session")
def vocab():
    return train_vocab()


@pytest.fixture(scope="session")
def backend():
    return ProceduralBackend()


@pytest.fixture()
def small_config():
    # coarse workspace keeps per-test augmentation cheap
    return TopDownConfig(resolution=200.0)


@pytest.fixture()
def demo(small_config):
    return synth_demo(3, config=small_config)


@pytest.fixture()
def demo_batch(small_config):
    return [synth_demo(100 + i, config=small_config) for i in range(4)]


@pytest.fixture()
def dataset(demo_batch):
    return DemoDataset.build(demo_batch)


def rigid_rotation(rng) -> np.ndarray:
    """Random proper rotation matrix via QR decomposition."""
    m = rng.normal(size=(3, 3))
    q, r = np.linalg.qr(m)
    q = q @ np.diag(np.sign(np.diag(r)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q
