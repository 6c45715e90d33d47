import os
from pathlib import Path

import numpy as np
import pytest

MNIST_DIR = Path(os.environ.get("DGFEFET_MNIST_DIR", "/root/data/mnist"))
MNIST_FILES = (
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
)


def mnist_available() -> bool:
    return all((MNIST_DIR / f).is_file() for f in MNIST_FILES)


@pytest.fixture(scope="session")
def mnist():
    if not mnist_available():
        pytest.skip(f"MNIST IDX files not found in {MNIST_DIR} (set DGFEFET_MNIST_DIR)")
    from dgfefet.data_io import find_mnist

    return find_mnist(MNIST_DIR)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_mnist(tmp_path):
    """A 40-image IDX pair (4 per class) of random digits, for fast CLI tests."""
    from dgfefet.data_io import write_idx

    r = np.random.default_rng(7)
    labels = np.tile(np.arange(10, dtype=np.uint8), 4)
    images = np.zeros((40, 28, 28), dtype=np.uint8)
    for n, c in enumerate(labels):
        images[n, 2 * c : 2 * c + 8, 4:24] = r.integers(100, 256, size=(8, 20))
    for stem in ("train", "t10k"):
        write_idx(tmp_path / f"{stem}-images-idx3-ubyte", tmp_path / f"{stem}-labels-idx1-ubyte", images, labels)
    return tmp_path


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "VERDICTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
