import time

import numpy as np
import pytest

from lhic.models import Autoencoder, ModelConfig
from lhic.synthetic import synthetic_image, write_corpus
from lhic.training import TrainConfig, extract_patches, train

TOY_MODEL = ModelConfig(compact_scale=8, base_filters=8, max_filters=32, dropout_p=0.2, seed=0)
TOY_TRAIN = TrainConfig(epochs=100, batch_size=8, lr=1e-4, patch_size=16, patches_per_image=25, max_steps=200, seed=0)

_ACCEPTANCE_LINES: list[str] = []


def record_acceptance(line: str) -> None:
    _ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_model():
    return Autoencoder(ModelConfig(compact_scale=8, base_filters=4, max_filters=8, seed=3))


@pytest.fixture(scope="session")
def toy_run(tmp_path_factory):
    """The desk-scale training run: 200 Adam steps on 16x16 synthetic patches at s=8."""
    root = tmp_path_factory.mktemp("toy")
    write_corpus(root / "train", 8, 64, 64, seed=1)
    dataset = extract_patches(root / "train", TOY_TRAIN)
    model = Autoencoder(TOY_MODEL)
    t0 = time.perf_counter()
    result = train(model, dataset, TOY_TRAIN, root / "run")
    result.seconds = time.perf_counter() - t0
    return model, result


@pytest.fixture(scope="session")
def heldout_images():
    rng = np.random.default_rng(2024)
    return [synthetic_image(rng, 48, 64) for _ in range(4)]


@pytest.fixture
def corpus(tmp_path):
    """Five synthetic images on disk."""
    write_corpus(tmp_path / "corpus", 5, 40, 56, seed=7)
    return tmp_path / "corpus"
