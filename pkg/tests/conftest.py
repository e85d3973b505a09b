import numpy as np
import pytest

from tbnet.data.dataset import SplitCounts, scan_dataset, split_dataset
from tbnet.data.synthetic import write_synthetic_dataset
from tbnet.engine.tensor import default_dtype, reset_tape

# train 8/8 (6 train + 2 val per class), test 2/2
TINY_COUNTS = SplitCounts(train_per_class=8, val_fraction=0.25, test_tb=2, test_normal=2)


@pytest.fixture(autouse=True)
def isolated_home(tmp_path, monkeypatch):
    """Keep the user config out of ~ and start every test with a fresh tape."""
    monkeypatch.setenv("TBNET_HOME", str(tmp_path / "tbnet-home"))
    monkeypatch.delenv("TBNET_THREADS", raising=False)
    reset_tape()
    yield
    reset_tape()


@pytest.fixture
def float64():
    with default_dtype(np.float64):
        yield


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_dataset(tmp_path):
    """Ten blob (TB) and ten noise (Normal) PNGs at 64x64."""
    return write_synthetic_dataset(tmp_path / "dataset", per_class=10, seed=7)


@pytest.fixture
def tiny_manifest(tiny_dataset):
    return split_dataset(scan_dataset(tiny_dataset), TINY_COUNTS, seed=3)
