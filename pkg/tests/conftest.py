"""Shared helpers for building random seeded instances."""

from __future__ import annotations

import numpy as np
import pytest

from uslearn.cluster import Clustering
from uslearn.simgraph import FeatureTensor, ParamMode, ParamSet


def random_feature_tensor(rng: np.random.Generator, n: int, F: int, scale: float = 1.0) -> FeatureTensor:
    raw = rng.random((n, n, F)) * scale
    raw = raw + raw.transpose(1, 0, 2)
    idx = np.arange(n)
    raw[idx, idx, :] = 0.0
    return FeatureTensor(raw)


def random_clustering(rng: np.random.Generator, n: int, K: int) -> Clustering:
    labels = rng.integers(1, K + 1, size=n)
    labels[:K] = np.arange(1, K + 1)  # keep every cluster non-empty
    return Clustering(labels, K)


def random_params(rng: np.random.Generator, mode: ParamMode, K: int, F: int, scale: float = 1.0) -> ParamSet:
    if mode is ParamMode.SHARED:
        return ParamSet(mode, 1, F, rng.random(F) * scale)
    if mode is ParamMode.PAIR:
        v = rng.random((K, K, F)) * scale
        return ParamSet(mode, K, F, 0.5 * (v + v.transpose(1, 0, 2)))
    return ParamSet(mode, K, F, rng.random((K, F)) * scale)


def block_similarity(sizes: list[int], within: float = 1.0, between: float = 0.0) -> np.ndarray:
    """Block-constant matrix: `within` on diagonal blocks, `between` elsewhere."""
    n = sum(sizes)
    s = np.full((n, n), between)
    start = 0
    for size in sizes:
        s[start : start + size, start : start + size] = within
        start += size
    return s


def block_labels(sizes: list[int]) -> Clustering:
    labels = np.concatenate([[k + 1] * size for k, size in enumerate(sizes)])
    return Clustering(labels.astype(int), len(sizes))


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
