"""Clustering-quality functionals (cut, mncut, gap, regularized objectives) and their
analytic gradients with respect to the similarity parameters."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from . import simgraph, spectra
from .simgraph import FeatureTensor, ParamSet, SimilarityMatrix
from .spectra import EigSelection, SpectralDecomp

if TYPE_CHECKING:
    from .cluster import Clustering
    from .learn import TargetSet


@dataclass(frozen=True)
class Objective:
    """A criterion value together with the components it was assembled from.

    gap always reproduces mncut - K + lambda_sum; for the selected-eigenvector
    criterion the eigengap component is lambda_{i_K} - lambda_{i_0} and the
    regularizer enters unsquared.
    """

    value: float
    mncut: float
    lambda_sum: float
    gap: float
    eigengap: float
    alpha: float


def cut(s: SimilarityMatrix, a: Sequence[int], b: Sequence[int]) -> float:
    """Total similarity mass between two node sets (overlap allowed)."""
    a = np.asarray(a, dtype=int)
    b = np.asarray(b, dtype=int)
    for idx in (a, b):
        if idx.size and (idx.min() < 0 or idx.max() >= s.n):
            raise IndexError(f"node index out of range 0..{s.n - 1}")
    return float(s.values[np.ix_(a, b)].sum())


def _cluster_masses(s: SimilarityMatrix, c: "Clustering") -> tuple[np.ndarray, np.ndarray]:
    """Within-cluster mass A_k and cluster volume V_k for every cluster."""
    labels = np.asarray(c.labels)
    if labels.shape[0] != s.n:
        raise ValueError(f"clustering covers {labels.shape[0]} points, matrix has {s.n}")
    within = np.empty(c.K)
    vol = np.empty(c.K)
    for k in range(c.K):
        mask = labels == k + 1
        if not mask.any():
            raise ValueError(f"cluster {k + 1} is empty")
        vol[k] = s.volumes[mask].sum()
        within[k] = s.values[np.ix_(mask, mask)].sum()
    return within, vol


def mncut(s: SimilarityMatrix, c: "Clustering") -> float:
    """Multiway normalized cut: K minus the self-transition mass of each cluster."""
    within, vol = _cluster_masses(s, c)
    return float(c.K - (within / vol).sum())


def gap(s: SimilarityMatrix, c: "Clustering", decomp: SpectralDecomp) -> float:
    """mncut minus its spectral lower bound K - sum of the top-K eigenvalues."""
    if decomp.m < c.K:
        raise ValueError(f"decomposition holds {decomp.m} eigenvalues, need {c.K}")
    return mncut(s, c) - c.K + float(decomp.eigenvalues[: c.K].sum())


def eigengap(decomp: SpectralDecomp, K: int) -> float:
    """lambda_K - lambda_{K+1}."""
    if decomp.m < K + 1:
        raise ValueError(f"decomposition holds {decomp.m} eigenvalues, need {K + 1}")
    return float(decomp.eigenvalues[K - 1] - decomp.eigenvalues[K])


def f_alpha(s: SimilarityMatrix, c: "Clustering", decomp: SpectralDecomp, alpha: float) -> Objective:
    """Regularized criterion: gap minus alpha times the squared eigengap."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    mc = mncut(s, c)
    lam = float(decomp.eigenvalues[: c.K].sum())
    g = mc - c.K + lam
    eg = eigengap(decomp, c.K)
    return Objective(g - alpha * eg * eg, mc, lam, g, eg, alpha)


def f_tilde(
    s: SimilarityMatrix,
    c: "Clustering",
    decomp: SpectralDecomp,
    selection: EigSelection,
    alpha: float,
) -> Objective:
    """Selected-eigenvector criterion; the regularizer lambda_{i_K} - lambda_{i_0}
    is unsquared, and neither term is sign-guaranteed."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    needed = max(max(selection.indices), selection.i0)
    if decomp.m < needed:
        raise ValueError(f"decomposition holds {decomp.m} eigenvalues, selection needs {needed}")
    mc = mncut(s, c)
    lam = float(sum(decomp.eigenvalues[i - 1] for i in selection.indices))
    g = mc - c.K + lam
    reg = float(decomp.eigenvalues[selection.indices[-1] - 1] - decomp.eigenvalues[selection.i0 - 1])
    return Objective(g - alpha * reg, mc, lam, g, reg, alpha)


def mncut_gradient(s: SimilarityMatrix, c: "Clustering") -> np.ndarray:
    """d mncut / d S_uv, entrywise over the full matrix.

    From the quotient rule on A_k / V_k: the (u, v) entry is
    A_{c(u)} / V_{c(u)}^2 - [c(u) = c(v)] / V_{c(u)}; each S entry also moves
    the volume of its own row, which the first term accounts for.
    """
    within, vol = _cluster_masses(s, c)
    lab0 = np.asarray(c.labels) - 1
    row_term = (within / vol**2)[lab0]
    g = np.tile(row_term[:, None], (1, s.n))
    same = lab0[:, None] == lab0[None, :]
    g -= same * (1.0 / vol)[lab0][:, None]
    return g


def eigenvalue_gradient_matrix(decomp: SpectralDecomp, k: int, volumes: np.ndarray) -> np.ndarray:
    """d lambda_k / d S_uv for a 1-based index k, through dP_uv/dS_ul = (delta - P)/D_u.

    Reduces to (w_u / D_u) * (v_v - lambda_k v_u); valid where lambda_k is simple.
    """
    i = k - 1
    v = decomp.right[:, i]
    w = decomp.left[:, i]
    lam = decomp.eigenvalues[i]
    a = w / volumes
    return a[:, None] * v[None, :] - (lam * a * v)[:, None]


@dataclass(frozen=True)
class ObjectiveEval:
    """One evaluation of the (weighted) learning objective at a parameter point."""

    value: float
    objective: Objective
    per_target: tuple[float, ...]
    gradient: np.ndarray | None
    tie_flagged: bool
    similarity: SimilarityMatrix
    decomp: SpectralDecomp


def _tie_flag(decomp: SpectralDecomp, used: Sequence[int]) -> bool:
    vals = decomp.eigenvalues
    for k in used:
        i = k - 1
        if i > 0 and abs(vals[i] - vals[i - 1]) <= spectra.TIE_TOLERANCE:
            return True
        if i + 1 < decomp.m and abs(vals[i] - vals[i + 1]) <= spectra.TIE_TOLERANCE:
            return True
    return False


def evaluate(
    theta: ParamSet,
    targets: "TargetSet",
    x: FeatureTensor,
    alpha: float,
    *,
    use_selection: bool = False,
    selection: EigSelection | None = None,
    with_grad: bool = True,
) -> ObjectiveEval:
    """Weighted objective sum_i w_i f(theta, C_i) and its gradient in theta.

    The similarity matrix is built once, with the incumbent's labels when the
    mode is label-dependent; only the mncut term varies across targets, so the
    eigenvalue terms and their gradients are shared. With use_selection the
    selected-eigenvector criterion is used (selection recomputed here unless
    one is passed in).
    """
    if len(targets.members) == 0:
        raise ValueError("target set is empty")
    weights = np.asarray(targets.weights, dtype=float)
    if abs(weights.sum() - 1.0) > 1e-9 or (weights <= 0).any():
        raise ValueError("target weights must be positive and sum to 1")
    build_labels = targets.incumbent if theta.mode.needs_labels else None
    K = targets.incumbent.K

    evaluator = simgraph.similarity_gradient(x, build_labels, theta) if with_grad else None
    s = evaluator.similarity if with_grad else simgraph.build_similarity(x, build_labels, theta)

    if use_selection and selection is None:
        kp = min(spectra.kprime_for(K), s.n - 1)
        decomp = spectra.decompose(s, min(kp + 2, s.n))
        selection = spectra.select_eigenvectors(decomp, K, kp)
    elif selection is not None:
        use_selection = True
        needed = max(max(selection.indices), selection.i0)
        decomp = spectra.decompose(s, min(needed + 1, s.n))
    else:
        decomp = spectra.decompose(s, min(K + 2, s.n))

    per_target = []
    for member in targets.members:
        if use_selection:
            per_target.append(f_tilde(s, member, decomp, selection, alpha))
        else:
            per_target.append(f_alpha(s, member, decomp, alpha))
    values = np.array([o.value for o in per_target])
    value = float(weights @ values)
    wm = float(weights @ np.array([o.mncut for o in per_target]))
    lead = per_target[targets.incumbent_index]
    combined = Objective(value, wm, lead.lambda_sum, wm - K + lead.lambda_sum, lead.eigengap, alpha)

    if use_selection:
        used = sorted(set(selection.indices) | {selection.i0})
    else:
        used = list(range(1, K + 2))
    flagged = _tie_flag(decomp, used)

    grad = None
    if with_grad:
        g = np.zeros_like(s.values)
        for wgt, member in zip(weights, targets.members):
            g += wgt * mncut_gradient(s, member)
        if use_selection:
            for k in selection.indices:
                g += eigenvalue_gradient_matrix(decomp, k, s.volumes)
            g -= alpha * (
                eigenvalue_gradient_matrix(decomp, selection.indices[-1], s.volumes)
                - eigenvalue_gradient_matrix(decomp, selection.i0, s.volumes)
            )
        else:
            for k in range(1, K + 1):
                g += eigenvalue_gradient_matrix(decomp, k, s.volumes)
            eg = eigengap(decomp, K)
            g -= (2.0 * alpha * eg) * (
                eigenvalue_gradient_matrix(decomp, K, s.volumes)
                - eigenvalue_gradient_matrix(decomp, K + 1, s.volumes)
            )
        grad = evaluator.contract(g)

    return ObjectiveEval(value, combined, tuple(values), grad, flagged, s, decomp)


def weighted_objective(
    theta: ParamSet,
    targets: "TargetSet",
    x: FeatureTensor,
    alpha: float,
    **flags,
) -> tuple[float, np.ndarray]:
    """Value and gradient of the weighted multi-target objective."""
    ev = evaluate(theta, targets, x, alpha, **flags)
    return ev.value, ev.gradient


def grad_f(
    theta: ParamSet,
    targets: "TargetSet",
    x: FeatureTensor,
    alpha: float,
    **flags,
) -> np.ndarray:
    """Gradient of the weighted objective over the canonical parameter vector."""
    return evaluate(theta, targets, x, alpha, **flags).gradient
