import pytest

from spikematch.checkpoint import save_weights
from spikematch.evaluation import train_synthetic


@pytest.fixture(scope="session")
def trained_net():
    """The bundled synthetic network, trained once per test session."""
    return train_synthetic(seed=0)


@pytest.fixture(scope="session")
def checkpoint_path(trained_net, tmp_path_factory):
    path = tmp_path_factory.mktemp("ckpt") / "trained.smw"
    save_weights(path, trained_net.weights)
    return path
