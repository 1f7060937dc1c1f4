"""
This file sets up the "globals" we need for our tests
namely, the synthetic datasets most tests share and the bundles written from them.
"""
import logging

import numpy as np
import pytest

from tests.setup import SMALL_SPEC
from zsl.funcs.bundle import save_bundle
from zsl.funcs.synth import GenSpec, sample_dataset
from zsl.models.dataset import Dataset, SplitSpec
from zsl.models.hyperparams import Hyperparams

log = logging.getLogger(__name__)


@pytest.fixture(scope="session")
def small_synthetic():
    """(Dataset, SplitSpec, GroundTruth) of the small hierarchical fixture."""
    return sample_dataset(GenSpec(**SMALL_SPEC))


@pytest.fixture(scope="session")
def small_dataset(small_synthetic):
    return small_synthetic[0]


@pytest.fixture(scope="session")
def small_splits(small_synthetic):
    return small_synthetic[1]


@pytest.fixture(scope="session")
def small_bundle(small_synthetic, tmp_path_factory):
    """The small fixture written out as a bundle directory."""
    path = tmp_path_factory.mktemp("bundles") / "small"
    dataset, splits, _ = small_synthetic
    save_bundle(dataset, splits, str(path))
    log.info(f"Wrote the small bundle to {path}")
    return str(path)


@pytest.fixture(scope="session")
def tiny_synthetic():
    """One meta-class: 3 seen classes and 1 unseen class in 2-d."""
    return sample_dataset(GenSpec(1, 4, 20, 2, 0.1, 10., seed=3))


@pytest.fixture(scope="session")
def line_dataset():
    """
    Four classes with 2-d attributes (0, 1), (1, 1), (2, 1) and (1.1, 1); class 3 is unseen.
    Each class has six rows around (10 * class id, 0).
    """
    rng = np.random.default_rng(11)
    attributes = np.array([[0., 1.], [1., 1.], [2., 1.], [1.1, 1.]])
    labels = np.repeat(np.arange(4), 6)
    features = np.column_stack([10. * labels, np.zeros(labels.size)]) + rng.normal(size=(labels.size, 2))
    return Dataset(features, labels, attributes), SplitSpec([0, 1, 2], [3])


@pytest.fixture()
def hp():
    return Hyperparams(kappa0=0.1, kappa1=10., s=1., K=2)
