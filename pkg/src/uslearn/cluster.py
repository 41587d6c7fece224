"""Spectral clustering black box: eigenvector embedding, multi-restart K-means,
candidate management, and classification error."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import criteria, spectra
from .simgraph import SimilarityMatrix
from .spectra import EigSelection, SpectralDecomp

KMEANS_MAX_ITER = 100


@dataclass(frozen=True)
class Clustering:
    """A partition of {1..n} into K non-empty clusters, labels 1-based."""

    labels: np.ndarray
    K: int

    def __post_init__(self):
        lab = np.ascontiguousarray(np.asarray(self.labels, dtype=int))
        if lab.ndim != 1 or lab.size == 0:
            raise ValueError("labels must be a non-empty 1-D array")
        present = np.unique(lab)
        if present[0] < 1 or present[-1] > self.K:
            raise ValueError(f"labels must lie in 1..{self.K}, got range {present[0]}..{present[-1]}")
        if present.size != self.K:
            missing = sorted(set(range(1, self.K + 1)) - set(present.tolist()))
            raise ValueError(f"every cluster 1..{self.K} must be non-empty; missing {missing}")
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)

    @classmethod
    def from_labels(cls, labels) -> "Clustering":
        """Build from a 1-based label array, inferring K and requiring 1..K contiguity."""
        lab = np.asarray(labels, dtype=int)
        if lab.size == 0:
            raise ValueError("labels must be non-empty")
        return cls(lab, int(lab.max()))

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    def canonical(self) -> np.ndarray:
        """Labels relabeled by order of first appearance; equal iff same partition."""
        out = np.empty_like(self.labels)
        mapping: dict[int, int] = {}
        for idx, lab in enumerate(self.labels):
            if lab not in mapping:
                mapping[int(lab)] = len(mapping) + 1
            out[idx] = mapping[int(lab)]
        return out

    def partition_key(self) -> bytes:
        return self.canonical().tobytes()

    def same_partition(self, other: "Clustering") -> bool:
        return self.n == other.n and self.partition_key() == other.partition_key()


class KMeansResult(NamedTuple):
    clustering: Clustering
    distortion: float


def orthogonal_centers(rows: np.ndarray, K: int, first: int | None = None) -> np.ndarray:
    """Greedy centers: the largest-norm row first (or `first`), then rows
    minimizing the maximum absolute cosine to the centers chosen so far.
    Zero-norm rows count as cosine 0 to everything."""
    norms = np.linalg.norm(rows, axis=1)
    usable = norms > 1e-12
    if first is None:
        first = int(np.argmax(norms))
    chosen = [first]
    unit = np.zeros_like(rows)
    unit[usable] = rows[usable] / norms[usable, None]
    for _ in range(1, K):
        cos = np.abs(unit @ unit[chosen].T).max(axis=1)
        cos[chosen] = np.inf
        chosen.append(int(np.lexsort((-norms, cos))[0]))  # ties go to the larger norm
    return rows[chosen].copy()


def _assign(rows: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d2 = ((rows[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return d2.argmin(axis=1)


def kmeans(
    rows: np.ndarray,
    K: int,
    init: str = "random",
    seed: int | np.random.Generator = 0,
    centers0: np.ndarray | None = None,
) -> KMeansResult:
    """Lloyd iterations until the assignment stops changing (or 100 rounds).

    init is "random" (random partition) or "orthogonal"; an explicit centers0
    overrides it. Emptied clusters are re-seeded at the point farthest from
    the emptied center.
    """
    rows = np.asarray(rows, dtype=float)
    if rows.ndim == 1:
        rows = rows[:, None]
    n = rows.shape[0]
    if K > n:
        raise ValueError(f"K={K} exceeds the number of points n={n}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    if centers0 is not None:
        centers = np.asarray(centers0, dtype=float).copy()
    elif init == "orthogonal":
        centers = orthogonal_centers(rows, K)
    elif init == "random":
        assign = rng.integers(0, K, size=n)
        for k in range(K):  # a random partition can miss clusters; steal points
            if not (assign == k).any():
                assign[rng.integers(0, n)] = k
        centers = np.stack([rows[assign == k].mean(axis=0) for k in range(K)])
    else:
        raise ValueError(f"unknown init {init!r}")

    assign = _assign(rows, centers)
    for _ in range(KMEANS_MAX_ITER):
        for k in range(K):
            mask = assign == k
            if mask.any():
                centers[k] = rows[mask].mean(axis=0)
            else:
                far = int(np.argmax(((rows - centers[k]) ** 2).sum(axis=1)))
                centers[k] = rows[far]
        new_assign = _assign(rows, centers)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign

    for k in range(K):  # final repair pass so the partition is valid
        if not (assign == k).any():
            d2 = ((rows - centers[k]) ** 2).sum(axis=1)
            counts = np.bincount(assign, minlength=K)
            d2[counts[assign] < 2] = -np.inf  # never empty another cluster
            far = int(np.argmax(d2))
            assign[far] = k
            centers[k] = rows[far]
    distortion = float(((rows - centers[assign]) ** 2).sum())
    return KMeansResult(Clustering(assign + 1, K), distortion)


@dataclass(frozen=True)
class Candidate:
    clustering: Clustering
    mncut: float


@dataclass(frozen=True)
class CandidateSet:
    """Deduplicated clusterings sorted by (mncut, canonical labels)."""

    candidates: tuple[Candidate, ...] = field(default=())

    def __len__(self) -> int:
        return len(self.candidates)

    def __iter__(self):
        return iter(self.candidates)

    @property
    def best(self) -> Candidate:
        return self.candidates[0]

    def contains_partition(self, c: Clustering) -> bool:
        key = c.partition_key()
        return any(cand.clustering.partition_key() == key for cand in self.candidates)


def merge_candidates(s: SimilarityMatrix, clusterings: list[Clustering]) -> CandidateSet:
    """Deduplicate by partition, score by mncut on s, sort deterministically."""
    by_key: dict[bytes, Candidate] = {}
    for c in clusterings:
        key = c.partition_key()
        if key not in by_key:
            by_key[key] = Candidate(c, criteria.mncut(s, c))
    ordered = sorted(by_key.values(), key=lambda cand: (cand.mncut, cand.clustering.partition_key()))
    return CandidateSet(tuple(ordered))


def _seed_list(seed) -> list[int]:
    if isinstance(seed, (int, np.integer)):
        return [int(seed)]
    return [int(v) for v in seed]


def cluster_spectral(
    s: SimilarityMatrix,
    K: int,
    selection: EigSelection | None = None,
    restarts: int = 20,
    seed: "int | Sequence[int]" = 0,
    decomp: SpectralDecomp | None = None,
) -> CandidateSet:
    """Embed points by eigenvector rows and cluster with multi-restart K-means.

    Half the restarts use random partitions, half orthogonal centers (the
    first with the canonical largest-norm rule, later ones with a random
    first center). Candidates are deduplicated up to relabeling and scored
    by mncut on s.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    cols = list(selection.indices) if selection is not None else list(range(1, K + 1))
    need = max(cols)
    if decomp is None or decomp.m < need:
        decomp = spectra.decompose(s, min(need + 1, s.n))
    rows = decomp.right[:, [i - 1 for i in cols]]

    base = _seed_list(seed)
    n_random = (restarts + 1) // 2
    found: list[Clustering] = []
    for r in range(restarts):
        rng = np.random.default_rng(base + [r, 0x5EED])
        if r < n_random:
            result = kmeans(rows, K, init="random", seed=rng)
        elif r == n_random:
            result = kmeans(rows, K, init="orthogonal", seed=rng)
        else:
            first = int(rng.integers(0, rows.shape[0]))
            centers = orthogonal_centers(rows, K, first=first)
            result = kmeans(rows, K, seed=rng, centers0=centers)
        found.append(result.clustering)
    return merge_candidates(s, found)


def classification_error(pred: Clustering, truth: Clustering) -> float:
    """Minimum misclassified fraction over relabelings of the predicted clusters,
    solved exactly as an assignment on the confusion matrix."""
    if pred.n != truth.n:
        raise ValueError(f"clusterings cover {pred.n} and {truth.n} points")
    confusion = np.zeros((pred.K, truth.K), dtype=int)
    np.add.at(confusion, (pred.labels - 1, truth.labels - 1), 1)
    rows, cols = linear_sum_assignment(-confusion)
    matched = int(confusion[rows, cols].sum())
    return 1.0 - matched / pred.n
