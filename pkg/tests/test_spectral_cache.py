import numpy as np
import pytest

from hyperlab.schemas import EnsembleSpec
from hyperlab.services import spectral_cache
from hyperlab.services.spectra import sample, svd_data


class CountingSampler:
    def __init__(self):
        self.calls = 0

    def __call__(self, spec, index):
        self.calls += 1
        return sample(spec, index)


def test_encode_decode_preserves_data():
    data = svd_data(sample(EnsembleSpec(N=6, seed=1)), 0.2j)
    back = spectral_cache.decode(spectral_cache.encode(data), 0.2j)
    np.testing.assert_array_equal(back.lambdas, data.lambdas)
    np.testing.assert_array_equal(back.left_vectors, data.left_vectors)
    np.testing.assert_array_equal(back.right_vectors, data.right_vectors)


def test_decode_rejects_garbage():
    with pytest.raises(ValueError):
        spectral_cache.decode(b"short", 0j)
    blob = spectral_cache.encode(svd_data(sample(EnsembleSpec(N=4)), 0.0, vectors=False))
    with pytest.raises(ValueError):
        spectral_cache.decode(b"XXXX" + blob[4:], 0j)
    with pytest.raises(ValueError):
        spectral_cache.decode(blob[:-8], 0j)


def test_cached_svd_hits_second_time(tmp_path):
    spec = EnsembleSpec(N=8, seed=3)
    sampler = CountingSampler()
    first = spectral_cache.cached_svd(spec, 0.1, 2, cache_dir=str(tmp_path), sampler=sampler)
    second = spectral_cache.cached_svd(spec, 0.1, 2, cache_dir=str(tmp_path), sampler=sampler)
    assert sampler.calls == 1
    np.testing.assert_array_equal(first.lambdas, second.lambdas)


def test_cache_without_vectors_is_recomputed_for_vectors(tmp_path):
    spec = EnsembleSpec(N=8, seed=3)
    sampler = CountingSampler()
    spectral_cache.cached_svd(spec, 0.1, 0, cache_dir=str(tmp_path), sampler=sampler)
    data = spectral_cache.cached_svd(spec, 0.1, 0, vectors=True, cache_dir=str(tmp_path), sampler=sampler)
    assert sampler.calls == 2
    assert data.left_vectors is not None


def test_corrupt_entry_is_discarded(tmp_path):
    spec = EnsembleSpec(N=8, seed=4)
    key = spectral_cache.spec_hash(spec)
    path = spectral_cache.cache_path(str(tmp_path), key, 0.0, 1)
    path.parent.mkdir(parents=True)
    path.write_bytes(b"not a cache file")
    data = spectral_cache.cached_svd(spec, 0.0, 1, cache_dir=str(tmp_path))
    np.testing.assert_allclose(data.lambdas, svd_data(sample(spec, 1), 0.0, vectors=False).lambdas)


def test_disabled_cache_computes_directly():
    sampler = CountingSampler()
    spectral_cache.cached_svd(EnsembleSpec(N=4), 0.0, 0, cache_dir="", sampler=sampler)
    spectral_cache.cached_svd(EnsembleSpec(N=4), 0.0, 0, cache_dir="", sampler=sampler)
    assert sampler.calls == 2
