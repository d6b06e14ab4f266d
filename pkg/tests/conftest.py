import numpy as np
import pytest

from fnrseg import _backend
from fnrseg.volume import ConfidenceVolume, GridDims, LabelVolume, SamplePair


def make_pair(lesion, background=(), sample_id="x"):
    """1 x 1 x m pair: lesion confidences first, then background ones."""
    values = np.concatenate([np.asarray(lesion, float), np.asarray(background, float)])
    labels = np.r_[np.ones(len(lesion), np.uint8), np.zeros(len(background), np.uint8)]
    dims = GridDims(1, 1, len(values))
    return SamplePair(sample_id, ConfidenceVolume(dims, values), LabelVolume(dims, labels))


def random_pair(rng, dims=(4, 5, 6), p_lesion=0.3, sample_id="r"):
    dims = GridDims(*dims)
    conf = rng.random(dims.size)
    label = (rng.random(dims.size) < p_lesion).astype(np.uint8)
    if label.sum() == 0:
        label[rng.integers(dims.size)] = 1
    return SamplePair(sample_id, ConfidenceVolume(dims, conf), LabelVolume(dims, label))


@pytest.fixture(params=_backend.available())
def each_backend(request):
    with _backend.backend(request.param):
        yield request.param


@pytest.fixture(scope="session")
def synthetic_400():
    """Exchangeable dataset: 400 samples of 32^3, uniform lesion confidences."""
    from fnrseg.metrics import index_samples
    from fnrseg.synthgen import GeneratorConfig, generate

    cfg = GeneratorConfig(dims=(32, 32, 32), n_samples=400, lesion_conf_mode="uniform01", seed=0)
    return index_samples(generate(cfg))
