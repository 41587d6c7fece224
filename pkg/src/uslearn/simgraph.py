"""Pairwise-feature similarity matrices, volumes, transitions, and their parameter derivatives."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .cluster import Clustering

# Exponents are clamped here before exponentiation; exp(-700) is still a
# positive double, so clamped entries stay representable instead of flushing
# to zero and producing NaNs downstream.
EXP_CLAMP = 700.0


class DegenerateRowError(ValueError):
    """A similarity row summed to a non-positive volume."""

    def __init__(self, row: int):
        self.row = row
        super().__init__(f"similarity row {row} has non-positive volume; the node is disconnected")


class ParamMode(str, Enum):
    """How the similarity exponent combines parameters and cluster labels."""

    SHARED = "shared"
    CLUSTER_PRODUCT = "cluster_product"
    CLUSTER_SUM = "cluster_sum"
    PAIR = "pair"

    @property
    def needs_labels(self) -> bool:
        return self is not ParamMode.SHARED


@dataclass(frozen=True)
class FeatureTensor:
    """Dense symmetric non-negative pairwise features, zero on the diagonal.

    values[i, j, f] is the f-th dissimilarity feature between points i and j.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, dtype=float))
        if v.ndim != 3 or v.shape[0] != v.shape[1]:
            raise ValueError(f"feature tensor must have shape (n, n, F), got {v.shape}")
        if not np.isfinite(v).all():
            raise ValueError("feature tensor contains non-finite entries")
        if (v < 0).any():
            raise ValueError("feature tensor entries must be non-negative")
        scale = max(float(v.max()), 1.0)
        if not np.allclose(v, v.transpose(1, 0, 2), atol=1e-9 * scale, rtol=0.0):
            raise ValueError("feature tensor must be symmetric in (i, j)")
        diag = v[np.arange(v.shape[0]), np.arange(v.shape[0]), :]
        if np.abs(diag).max(initial=0.0) > 1e-12:
            raise ValueError("feature tensor diagonal (self-features) must be zero")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def F(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class ParamSet:
    """Non-negative similarity parameters in one of four sharing modes.

    Shapes: shared (F,); cluster_product / cluster_sum (K, F);
    pair (K, K, F) symmetric in the two cluster axes.
    """

    mode: ParamMode
    K: int
    F: int
    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, dtype=float))
        expect = self._expected_shape(self.mode, self.K, self.F)
        if v.shape != expect:
            raise ValueError(f"{self.mode.value} parameters must have shape {expect}, got {v.shape}")
        if not np.isfinite(v).all():
            raise ValueError("parameters contain non-finite entries")
        if (v < 0).any():
            raise ValueError("parameters must be non-negative")
        if self.mode is ParamMode.PAIR and not np.allclose(v, v.transpose(1, 0, 2)):
            raise ValueError("pair parameters must be symmetric in the cluster indices")
        object.__setattr__(self, "values", v)

    @staticmethod
    def _expected_shape(mode: ParamMode, K: int, F: int) -> tuple[int, ...]:
        if mode is ParamMode.SHARED:
            return (F,)
        if mode is ParamMode.PAIR:
            return (K, K, F)
        return (K, F)

    @classmethod
    def uniform(cls, mode: ParamMode, K: int, F: int, value: float = 1.0) -> "ParamSet":
        k_eff = 1 if mode is ParamMode.SHARED else K
        shape = cls._expected_shape(mode, k_eff, F)
        return cls(mode, k_eff, F, np.full(shape, float(value)))

    @property
    def n_params(self) -> int:
        if self.mode is ParamMode.PAIR:
            return self.K * (self.K + 1) // 2 * self.F
        return int(np.prod(self.values.shape))

    def pair_index_pairs(self) -> list[tuple[int, int]]:
        """Canonical (a, b), a <= b, 0-based cluster index pairs for pair mode."""
        return [(a, b) for a in range(self.K) for b in range(a, self.K)]

    def to_vector(self) -> np.ndarray:
        """Flatten to the canonical free-parameter vector (pair mode packs a <= b)."""
        if self.mode is ParamMode.PAIR:
            return np.concatenate([self.values[a, b] for a, b in self.pair_index_pairs()])
        return self.values.ravel().copy()

    def replace_vector(self, vec: np.ndarray) -> "ParamSet":
        """New ParamSet with values taken from a canonical flat vector."""
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (self.n_params,):
            raise ValueError(f"expected vector of length {self.n_params}, got {vec.shape}")
        if self.mode is ParamMode.PAIR:
            out = np.empty_like(self.values)
            for idx, (a, b) in enumerate(self.pair_index_pairs()):
                block = vec[idx * self.F : (idx + 1) * self.F]
                out[a, b] = block
                out[b, a] = block
        else:
            out = vec.reshape(self.values.shape)
        return ParamSet(self.mode, self.K, self.F, out)


@dataclass(frozen=True)
class SimilarityMatrix:
    """Symmetric non-negative similarities with per-node volumes."""

    values: np.ndarray
    volumes: np.ndarray = field(init=False)
    total_volume: float = field(init=False)

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, dtype=float))
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"similarity matrix must be square, got {v.shape}")
        if not np.isfinite(v).all():
            raise ValueError("similarity matrix contains non-finite entries")
        if (v < 0).any():
            raise ValueError("similarities must be non-negative")
        scale = max(float(v.max()), 1.0)
        if not np.allclose(v, v.T, atol=1e-9 * scale, rtol=0.0):
            raise ValueError("similarity matrix must be symmetric")
        d = v.sum(axis=1)
        bad = np.flatnonzero(d <= 0.0)
        if bad.size:
            raise DegenerateRowError(int(bad[0]))
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "volumes", d)
        object.__setattr__(self, "total_volume", float(d.sum()))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def pi(self) -> np.ndarray:
        """Stationary weights pi_i = D_i / Vol V of the row-normalized walk."""
        return self.volumes / self.total_volume


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic transition matrix P and its stationary weights."""

    values: np.ndarray
    pi: np.ndarray


def _check_inputs(x: FeatureTensor, labels: "Clustering | None", params: ParamSet) -> np.ndarray | None:
    if params.F != x.F:
        raise ValueError(f"parameter feature count {params.F} != tensor feature count {x.F}")
    if params.mode.needs_labels:
        if labels is None:
            raise ValueError(
                f"mode {params.mode.value!r} is label-dependent: a clustering is required to build S"
            )
        if labels.K != params.K:
            raise ValueError(f"clustering has K={labels.K} but parameters have K={params.K}")
        if len(labels.labels) != x.n:
            raise ValueError(f"clustering covers {len(labels.labels)} points but tensor has n={x.n}")
        return np.asarray(labels.labels, dtype=int) - 1
    return None


def _exponent(x: FeatureTensor, lab0: np.ndarray | None, params: ParamSet) -> np.ndarray:
    """E[i, j] = the mode-specific weighted feature sum; S = exp(-E)."""
    xv = x.values
    if params.mode is ParamMode.SHARED:
        return xv @ params.values
    th = params.values
    if params.mode is ParamMode.CLUSTER_PRODUCT:
        a = th[lab0]  # (n, F)
        return np.einsum("if,jf,ijf->ij", a, a, xv, optimize=True)
    if params.mode is ParamMode.CLUSTER_SUM:
        a = th[lab0]
        rows = np.einsum("if,ijf->ij", a, xv, optimize=True)
        return rows + rows.T
    # pair: theta for the (c(i), c(j)) cluster pair
    pair_theta = th[lab0[:, None], lab0[None, :], :]  # (n, n, F)
    return np.einsum("ijf,ijf->ij", pair_theta, xv, optimize=True)


def build_similarity(x: FeatureTensor, labels: "Clustering | None", params: ParamSet) -> SimilarityMatrix:
    """S_ij = exp(-E_ij) with the exponent selected by the parameter mode.

    Larger features always decrease similarity (parameters are kept >= 0),
    and the zero self-features force a unit diagonal.
    """
    lab0 = _check_inputs(x, labels, params)
    e = np.minimum(_exponent(x, lab0, params), EXP_CLAMP)
    s = np.exp(-e)
    s = 0.5 * (s + s.T)  # scrub einsum round-off so the matrix is exactly symmetric
    return SimilarityMatrix(s)


def transition(s: SimilarityMatrix) -> TransitionMatrix:
    """Row-normalize S into the random-walk matrix P_ij = S_ij / D_i."""
    p = s.values / s.volumes[:, None]
    return TransitionMatrix(p, s.pi)


class GradientEvaluator:
    """Analytic dS/dtheta for every canonical parameter coordinate.

    `coordinate(p)` materializes one (n, n) slice; `contract(G)` computes
    sum_ij G_ij * dS_ij/dtheta_p for all p at once, which is what the
    objective gradient needs.
    """

    def __init__(self, x: FeatureTensor, labels: "Clustering | None", params: ParamSet):
        self._lab0 = _check_inputs(x, labels, params)
        self._x = x
        self._params = params
        e = np.minimum(_exponent(x, self._lab0, params), EXP_CLAMP)
        self._clamped = e >= EXP_CLAMP
        s = np.exp(-e)
        self._s = 0.5 * (s + s.T)
        self.similarity = SimilarityMatrix(self._s)

    @property
    def n_params(self) -> int:
        return self._params.n_params

    def _exponent_derivative(self, p: int) -> np.ndarray:
        """dE_ij/dtheta_p as a dense matrix for one canonical coordinate."""
        params, xv, lab0 = self._params, self._x.values, self._lab0
        if params.mode is ParamMode.SHARED:
            return xv[:, :, p]
        if params.mode is ParamMode.PAIR:
            pair_idx, f = divmod(p, params.F)
            a, b = params.pair_index_pairs()[pair_idx]
            in_a = lab0 == a
            in_b = lab0 == b
            mask = (in_a[:, None] & in_b[None, :]) | (in_b[:, None] & in_a[None, :])
            return mask.astype(float) * xv[:, :, f]
        c, f = divmod(p, params.F)
        ind = (lab0 == c).astype(float)
        if params.mode is ParamMode.CLUSTER_SUM:
            return (ind[:, None] + ind[None, :]) * xv[:, :, f]
        other = params.values[lab0, f]  # theta_f^{c(j)} per point
        return ind[:, None] * other[None, :] * xv[:, :, f] + ind[None, :] * other[:, None] * xv[:, :, f]

    def coordinate(self, p: int) -> np.ndarray:
        """dS/dtheta_p = -S * dE/dtheta_p (zero where the exponent clamp is active)."""
        d = -self._s * self._exponent_derivative(p)
        d[self._clamped] = 0.0
        return d

    def contract(self, g: np.ndarray) -> np.ndarray:
        """Gradient vector with components sum_ij g_ij * dS_ij/dtheta_p.

        Uses T = g * (-S) and the symmetry of x to reduce each mode to
        masked einsum contractions.
        """
        params, xv, lab0 = self._params, self._x.values, self._lab0
        t = g * (-self._s)
        t[self._clamped] = 0.0
        if params.mode is ParamMode.SHARED:
            return np.einsum("ij,ijf->f", t, xv, optimize=True)
        tsym = t + t.T
        K, F = params.K, params.F
        if params.mode is ParamMode.CLUSTER_SUM:
            out = np.empty((K, F))
            for c in range(K):
                rows = lab0 == c
                out[c] = np.einsum("ij,ijf->f", tsym[rows], xv[rows], optimize=True)
            return out.ravel()
        if params.mode is ParamMode.CLUSTER_PRODUCT:
            a = params.values[lab0]  # (n, F)
            out = np.empty((K, F))
            for c in range(K):
                rows = lab0 == c
                out[c] = np.einsum("ij,jf,ijf->f", tsym[rows], a, xv[rows], optimize=True)
            return out.ravel()
        parts = []
        for a_idx, b_idx in params.pair_index_pairs():
            rows = np.flatnonzero(lab0 == a_idx)
            cols = np.flatnonzero(lab0 == b_idx)
            block = np.einsum(
                "ij,ijf->f", tsym[np.ix_(rows, cols)], xv[np.ix_(rows, cols)], optimize=True
            )
            parts.append(0.5 * block if a_idx == b_idx else block)
        return np.concatenate(parts)


def similarity_gradient(x: FeatureTensor, labels: "Clustering | None", params: ParamSet) -> GradientEvaluator:
    """Evaluator for the analytic derivative of build_similarity at these inputs."""
    return GradientEvaluator(x, labels, params)
