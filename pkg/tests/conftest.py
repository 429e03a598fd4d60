import numpy as np
import pytest

from hwdkit import backbone as bb


def rng32(seed, shape, lo=-1.0, hi=1.0):
    return np.random.default_rng(seed).uniform(lo, hi, shape).astype(np.float32)


@pytest.fixture(scope="session")
def tiny_backbone():
    """Randomly initialized tinynet, no head; enough for feature extraction."""
    spec = bb.tinynet_spec()
    params = bb.init_params(spec, seed=123)
    return spec, params


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """4 styles x 10 images, fast to generate; shared across tests."""
    from hwdkit import corpus

    root = tmp_path_factory.mktemp("smallcorpus")
    manifest = corpus.generate_corpus(4, 10, seed=404, out_dir=root)
    return root, manifest
