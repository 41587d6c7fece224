"""Eigendecomposition of the random-walk matrix and eigenvector scoring/selection."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .simgraph import SimilarityMatrix

TIE_TOLERANCE = 1e-8
PC_BANDWIDTH = 0.05
PC_GRID_POINTS = 64


class EigensolverError(RuntimeError):
    """The symmetric eigensolver failed to converge."""


@dataclass(frozen=True)
class SpectralDecomp:
    """Top eigenpairs of P = D^-1 S, descending, with w^k . v^k = 1.

    Computed through the symmetric equivalent N = D^-1/2 S D^-1/2, whose
    orthonormal eigenvectors u give right/left pairs v = D^-1/2 u and
    w = D^1/2 u of P with the same (real) eigenvalues.
    """

    eigenvalues: np.ndarray  # (m,)
    right: np.ndarray        # (n, m), columns v^k
    left: np.ndarray         # (n, m), columns w^k
    pi: np.ndarray           # (n,) stationary weights of the walk

    @property
    def m(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def n(self) -> int:
        return self.right.shape[0]


class EigSelection(NamedTuple):
    """1-based eigenvector indices chosen for clustering, plus the first excluded index."""

    indices: tuple[int, ...]
    i0: int


class EigGradient(NamedTuple):
    """First-order eigenvalue change; flagged when the eigenvalue is nearly degenerate."""

    value: float
    flagged: bool


def decompose(s: SimilarityMatrix, m: int) -> SpectralDecomp:
    """Top-m eigenpairs of the transition matrix built from s."""
    n = s.n
    if not 1 <= m <= n:
        raise ValueError(f"m must be in [1, {n}], got {m}")
    d_isqrt = 1.0 / np.sqrt(s.volumes)
    sym = d_isqrt[:, None] * s.values * d_isqrt[None, :]
    sym = 0.5 * (sym + sym.T)
    try:
        vals, u = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"symmetric eigensolver failed on n={n} matrix: {exc}") from exc
    order = np.argsort(vals)[::-1][:m]
    vals = vals[order]
    u = u[:, order]
    right = d_isqrt[:, None] * u
    left = u / d_isqrt[:, None]
    return SpectralDecomp(vals, right, left, s.pi)


def eigenvalue_gradient(decomp: SpectralDecomp, k: int, dp: np.ndarray) -> EigGradient:
    """d lambda_k = w^k . (dP v^k) for a 1-based eigenvalue index k.

    Only defined almost everywhere: when lambda_k ties a neighbor within
    TIE_TOLERANCE the one-sided value is returned flagged, never an error.
    """
    if not 1 <= k <= decomp.m:
        raise ValueError(f"eigenvalue index {k} out of range 1..{decomp.m}")
    i = k - 1
    gaps = []
    if i > 0:
        gaps.append(abs(decomp.eigenvalues[i] - decomp.eigenvalues[i - 1]))
    if i + 1 < decomp.m:
        gaps.append(abs(decomp.eigenvalues[i] - decomp.eigenvalues[i + 1]))
    flagged = bool(gaps and min(gaps) <= TIE_TOLERANCE)
    value = float(decomp.left[:, i] @ (dp @ decomp.right[:, i]))
    return EigGradient(value, flagged)


def pc_index(
    v: np.ndarray,
    pi: np.ndarray,
    bandwidth: float = PC_BANDWIDTH,
    grid_points: int = PC_GRID_POINTS,
) -> float:
    """Score how far an eigenvector is from piecewise constant; lower is flatter.

    The entries are affinely rescaled to [0, 1], smoothed into a pi-weighted
    Gaussian kernel density on a uniform grid, and the density's normalized
    discrete entropy is returned. Few-valued (cluster-indicator-like) vectors
    concentrate the density and score low.
    """
    v = np.asarray(v, dtype=float)
    pi = np.asarray(pi, dtype=float)
    lo, hi = float(v.min()), float(v.max())
    if hi - lo < 1e-12:
        raise ValueError("pc_index is undefined for a constant eigenvector")
    t = (v - lo) / (hi - lo)
    grid = np.linspace(0.0, 1.0, grid_points)
    z = (grid[:, None] - t[None, :]) / bandwidth
    density = np.exp(-0.5 * z * z) @ (pi / pi.sum())
    density /= density.sum()
    nz = density[density > 0]
    entropy = float(-(nz * np.log(nz)).sum())
    return entropy / np.log(grid_points)


def kprime_for(K: int) -> int:
    """Size of the candidate eigenvector pool the selection draws from."""
    return max(2 * K, 10)


def select_eigenvectors(decomp: SpectralDecomp, K: int, kprime: int | None = None) -> EigSelection:
    """Pick K eigenvector indices out of {1..K'}: index 1 always, then the
    K-1 lowest pc scores (ties to the smaller index). i0 is the smallest
    index in {1..K'+1} left out, so its eigenvalue is always available.
    """
    if kprime is None:
        kprime = kprime_for(K)
    if kprime > decomp.n - 1:
        warnings.warn(
            f"K'={kprime} exceeds n-1={decomp.n - 1}; clamping", RuntimeWarning, stacklevel=2
        )
        kprime = decomp.n - 1
    if not K <= kprime:
        raise ValueError(f"need K={K} <= K'={kprime}")
    if decomp.m < kprime + 1:
        raise ValueError(f"decomposition holds {decomp.m} pairs; K'+1={kprime + 1} required")
    scored = sorted(
        (pc_index(decomp.right[:, i - 1], decomp.pi), i) for i in range(2, kprime + 1)
    )
    chosen = sorted([1] + [i for _, i in scored[: K - 1]])
    selected = set(chosen)
    i0 = next(i for i in range(1, kprime + 2) if i not in selected)
    return EigSelection(tuple(chosen), i0)
