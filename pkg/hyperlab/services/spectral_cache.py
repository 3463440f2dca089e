"""
On-disk cache of SpectralData keyed by (spec hash, z, sample index).

File layout: a 32-byte little-endian header

    magic b"HLSD" | version u32 | N u64 | count u64 | 8 reserved bytes

followed by ``count`` little-endian float64 values: the N singular values,
then (when vectors were stored) Re/Im of the left and right vector matrices.
"""

from __future__ import annotations

import logging
import struct
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from hyperlab.core import config
from hyperlab.schemas import EnsembleSpec
from hyperlab.services.spectra import SpectralData, sample, svd_data
from hyperlab.services.utils import to_hash

LOG = logging.getLogger("hyperlab.cache")

MAGIC = b"HLSD"
VERSION = 1
HEADER = struct.Struct("<4sIQQ8x")


def spec_hash(spec: EnsembleSpec) -> str:
    return to_hash(spec.model_dump_json())


def cache_path(cache_dir: str, key: str, z: complex, index: int) -> Path:
    z = complex(z)
    return Path(cache_dir) / key / f"{to_hash(z.real, z.imag)}_{int(index)}.bin"


def encode(data: SpectralData) -> bytes:
    parts = [data.lambdas.astype("<f8")]
    if data.left_vectors is not None:
        for M in (data.left_vectors, data.right_vectors):
            parts.append(np.ascontiguousarray(M.real).astype("<f8").ravel())
            parts.append(np.ascontiguousarray(M.imag).astype("<f8").ravel())
    body = np.concatenate(parts)
    return HEADER.pack(MAGIC, VERSION, data.N, body.size) + body.tobytes()


def decode(blob: bytes, z: complex) -> SpectralData:
    if len(blob) < HEADER.size:
        raise ValueError("truncated header")
    magic, version, N, count = HEADER.unpack_from(blob)
    if magic != MAGIC or version != VERSION:
        raise ValueError(f"bad header {magic!r} v{version}")
    body = np.frombuffer(blob, dtype="<f8", offset=HEADER.size)
    if body.size != count or count not in (N, N + 4 * N * N):
        raise ValueError(f"expected {count} values for N={N}, found {body.size}")
    lambdas = body[:N].astype(float)
    if count == N:
        return SpectralData(z=complex(z), lambdas=lambdas)
    blocks = body[N:].reshape(4, N, N)
    return SpectralData(
        z=complex(z),
        lambdas=lambdas,
        left_vectors=blocks[0] + 1j * blocks[1],
        right_vectors=blocks[2] + 1j * blocks[3],
    )


def load(cache_dir: str, key: str, z: complex, index: int, vectors: bool) -> Optional[SpectralData]:
    path = cache_path(cache_dir, key, z, index)
    if not path.exists():
        return None
    try:
        data = decode(path.read_bytes(), z)
    except Exception as e:
        LOG.warning("Discarding unreadable cache entry %s: %s", path, e)
        return None
    if vectors and data.left_vectors is None:
        return None
    return data


def store(cache_dir: str, key: str, index: int, data: SpectralData) -> None:
    path = cache_path(cache_dir, key, data.z, index)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        tmp.write_bytes(encode(data))
        tmp.replace(path)
    except Exception as e:
        LOG.error("Failed to write cache entry %s: %s", path, e)


def cached_svd(
    spec: EnsembleSpec,
    z: complex,
    index: int,
    vectors: bool = False,
    cache_dir: Optional[str] = None,
    sampler: Callable[[EnsembleSpec, int], np.ndarray] = sample,
) -> SpectralData:
    """SVD data of sample ``index`` at z, served from HYPERLAB_CACHE when enabled."""
    cache_dir = cache_dir if cache_dir is not None else config.CACHE_DIR
    if not cache_dir:
        return svd_data(sampler(spec, index), z, vectors=vectors)
    key = spec_hash(spec)
    hit = load(cache_dir, key, z, index, vectors)
    if hit is not None:
        return hit
    data = svd_data(sampler(spec, index), z, vectors=vectors)
    store(cache_dir, key, index, data)
    return data
