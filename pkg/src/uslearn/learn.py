"""Alternating driver: candidate-clustering steps and projected Armijo descent
on the similarity parameters, with a stochastic reclustering schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import cluster as cluster_mod
from . import criteria, simgraph, spectra
from .cluster import Candidate, CandidateSet, Clustering
from .simgraph import FeatureTensor, ParamMode, ParamSet


class NonFiniteObjectiveError(RuntimeError):
    """The objective or its gradient became non-finite; carries the partial result."""

    def __init__(self, message: str, result: "LearnResult | None" = None):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class TargetSet:
    """Weighted target clusterings; the incumbent is the lowest-mncut member."""

    members: tuple[Clustering, ...]
    weights: np.ndarray
    mncuts: np.ndarray
    incumbent_index: int

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if len(self.members) == 0:
            raise ValueError("target set must be non-empty")
        if w.shape != (len(self.members),) or (w <= 0).any() or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be positive and sum to 1")
        if not 0 <= self.incumbent_index < len(self.members):
            raise ValueError("incumbent index out of range")

    @classmethod
    def single(cls, c: Clustering, mncut_value: float) -> "TargetSet":
        return cls((c,), np.array([1.0]), np.array([float(mncut_value)]), 0)

    @property
    def incumbent(self) -> Clustering:
        return self.members[self.incumbent_index]

    def contains_partition(self, c: Clustering) -> bool:
        key = c.partition_key()
        return any(m.partition_key() == key for m in self.members)

    def __len__(self) -> int:
        return len(self.members)


@dataclass
class LearnConfig:
    """Driver settings; every default is documented in the README."""

    K: int
    seed: int
    alpha: float = 0.5
    p_reclust: float = 0.8
    p_reclust_decay: float = 0.5
    p_reclust_floor: float = 0.05
    restarts: int = 20
    max_outer_iters: int = 100
    max_inner_iters: int = 200
    armijo_slope: float = 1e-4
    armijo_backtrack: float = 0.5
    armijo_step0: float = 1.0
    armijo_max_backtracks: int = 30
    grad_tol: float = 1e-6
    f_tol: float = 1e-8
    use_selection: bool = False
    max_targets: int = 6
    probe_restart_fraction: float = 0.25

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if not 0.0 <= self.p_reclust <= 1.0:
            raise ValueError("p_reclust must lie in [0, 1]")
        if self.max_targets < 1:
            raise ValueError("max_targets must be >= 1")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")


@dataclass
class TraceRecord:
    """One outer iteration of the driver."""

    iteration: int
    incumbent_mncut: float
    incumbent_changed: bool
    target_count: int
    eigengap: float
    f_entry: float
    f_exit: float
    accepted_steps: int
    step_sizes: list[float] = field(default_factory=list)
    recluster_probes: int = 0
    stopped_by_probe: bool = False
    s_stop_reason: str = ""
    tie_flagged: bool = False

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "incumbent_mncut": self.incumbent_mncut,
            "incumbent_changed": self.incumbent_changed,
            "target_count": self.target_count,
            "eigengap": self.eigengap,
            "f_entry": self.f_entry,
            "f_exit": self.f_exit,
            "accepted_steps": self.accepted_steps,
            "step_sizes": self.step_sizes,
            "recluster_probes": self.recluster_probes,
            "stopped_by_probe": self.stopped_by_probe,
            "s_stop_reason": self.s_stop_reason,
            "tie_flagged": self.tie_flagged,
        }


@dataclass
class LearnResult:
    theta: ParamSet
    clustering: Clustering
    trace: list[TraceRecord]
    accepted_f: list[tuple[str, float]]
    status: str
    outer_iterations: int
    p_reclust_final: float


def _shared_equivalent(theta: ParamSet) -> ParamSet:
    """Label-independent surrogate used to bootstrap before any clustering exists.

    Maps the parameters through the mode's own same-cluster pairing rule so a
    uniform initialization behaves like its within-cluster exponent.
    """
    if theta.mode is ParamMode.SHARED:
        return theta
    if theta.mode is ParamMode.CLUSTER_PRODUCT:
        vals = theta.values.mean(axis=0) ** 2
    elif theta.mode is ParamMode.CLUSTER_SUM:
        vals = 2.0 * theta.values.mean(axis=0)
    else:
        vals = theta.values.mean(axis=(0, 1))
    return ParamSet(ParamMode.SHARED, 1, theta.F, vals)


def _form_targets(merged: CandidateSet, delta_k: float, cfg: LearnConfig) -> tuple[list[Candidate], float]:
    """Candidate cutoff + truncation; returns the kept members and the cutoff used."""
    cutoff = math.exp((1.0 - delta_k) ** 2)
    best = merged.best.mncut
    kept = []
    for cand in merged:
        if best > 0:
            ratio = cand.mncut / best
        else:
            ratio = 1.0 if cand.mncut == 0 else math.inf
        if ratio < cutoff:
            kept.append(cand)
    if not kept:
        kept = [merged.best]
    return kept[: cfg.max_targets], cutoff


def _weights_for(mncuts: np.ndarray) -> np.ndarray:
    shifted = np.exp(-(mncuts - mncuts.min()))  # same softmax, stable for large mncut
    return shifted / shifted.sum()


def _targets_from(kept: Sequence[Candidate], incumbent_key: bytes | None) -> TargetSet:
    members = tuple(c.clustering for c in kept)
    mncuts = np.array([c.mncut for c in kept])
    idx = 0
    if incumbent_key is not None:
        for i, m in enumerate(members):
            if m.partition_key() == incumbent_key:
                idx = i
                break
    return TargetSet(members, _weights_for(mncuts), mncuts, idx)


def c_step(
    theta: ParamSet,
    prev: TargetSet,
    x: FeatureTensor,
    cfg: LearnConfig,
    seed: Sequence[int],
) -> tuple[TargetSet, bool]:
    """Refresh the target set: cluster at the current parameters, pool with the
    previous targets, apply the eigengap-driven cutoff, reweight, and adopt a
    new incumbent only on a strict mncut improvement."""
    labels = prev.incumbent if theta.mode.needs_labels else None
    s = simgraph.build_similarity(x, labels, theta)
    kp = min(spectra.kprime_for(cfg.K), s.n - 1)
    m = min((kp + 2) if cfg.use_selection else (cfg.K + 2), s.n)
    decomp = spectra.decompose(s, m)
    selection = spectra.select_eigenvectors(decomp, cfg.K, kp) if cfg.use_selection else None

    candidates = cluster_mod.cluster_spectral(
        s, cfg.K, selection=selection, restarts=cfg.restarts, seed=seed, decomp=decomp
    )
    merged = cluster_mod.merge_candidates(s, [c.clustering for c in candidates] + list(prev.members))

    old_key = prev.incumbent.partition_key()
    old_mncut = next(c.mncut for c in merged if c.clustering.partition_key() == old_key)
    best = merged.best
    changed = best.mncut < old_mncut and best.clustering.partition_key() != old_key

    delta_k = criteria.eigengap(decomp, cfg.K)
    kept, _ = _form_targets(merged, delta_k, cfg)
    incumbent_key = best.clustering.partition_key() if changed else old_key
    if not any(c.clustering.partition_key() == incumbent_key for c in kept):
        # the incumbent always survives the cutoff (it is the minimum when unchanged)
        kept = [next(c for c in merged if c.clustering.partition_key() == incumbent_key)] + kept
        kept = kept[: cfg.max_targets]
    return _targets_from(kept, incumbent_key), changed


@dataclass
class SStepResult:
    theta: ParamSet
    f_entry: float
    f_exit: float
    accepted: list[tuple[float, float]]  # (objective value, step size) per accepted update
    inner_iterations: int
    p_reclust: float
    stop_reason: str
    tie_flagged: bool
    recluster_probes: int


def _check_finite(value: float, grad: np.ndarray | None):
    if not math.isfinite(value) or (grad is not None and not np.isfinite(grad).all()):
        raise NonFiniteObjectiveError("objective or gradient became non-finite")


def s_step(
    theta: ParamSet,
    targets: TargetSet,
    x: FeatureTensor,
    cfg: LearnConfig,
    rng: np.random.Generator,
    p_reclust: float,
) -> SStepResult:
    """Projected gradient descent with Armijo backtracking on the weighted
    objective, interrupted by the stochastic reclustering probe.

    Every accepted update strictly decreases the objective; after each one a
    p_reclust draw may trigger a probe clustering at the current parameters.
    A probe that finds an unseen partition ends the step; a quiet probe decays
    p_reclust and descent continues.
    """
    selection = None
    if cfg.use_selection:
        labels = targets.incumbent if theta.mode.needs_labels else None
        s0 = simgraph.build_similarity(x, labels, theta)
        kp = min(spectra.kprime_for(cfg.K), s0.n - 1)
        selection = spectra.select_eigenvectors(spectra.decompose(s0, min(kp + 2, s0.n)), cfg.K, kp)

    def objective(th: ParamSet, with_grad: bool) -> criteria.ObjectiveEval:
        ev = criteria.evaluate(
            th, targets, x, cfg.alpha,
            use_selection=cfg.use_selection, selection=selection, with_grad=with_grad,
        )
        _check_finite(ev.value, ev.gradient)
        return ev

    accepted: list[tuple[float, float]] = []
    probes = 0
    tie_flagged = False
    stop_reason = "max_inner"
    ev = objective(theta, True)
    f_entry = ev.value
    inner = 0
    for inner in range(1, cfg.max_inner_iters + 1):
        tie_flagged = tie_flagged or ev.tie_flagged
        grad = ev.gradient
        if float(np.linalg.norm(grad)) < cfg.grad_tol:
            stop_reason = "gradient"
            break

        vec = theta.to_vector()
        t = cfg.armijo_step0
        trial_theta = None
        trial_ev = None
        for _ in range(cfg.armijo_max_backtracks + 1):
            cand_vec = np.maximum(vec - t * grad, 0.0)
            move = cand_vec - vec
            if not move.any():
                t *= cfg.armijo_backtrack
                continue
            cand = theta.replace_vector(cand_vec)
            cand_ev = objective(cand, False)
            if cand_ev.value < ev.value and cand_ev.value <= ev.value + cfg.armijo_slope * float(grad @ move):
                trial_theta, trial_ev = cand, cand_ev
                break
            t *= cfg.armijo_backtrack
        if trial_theta is None:
            stop_reason = "line_search"
            break

        theta = trial_theta
        accepted.append((trial_ev.value, t))

        if rng.random() < p_reclust:
            probes += 1
            probe_restarts = max(1, round(cfg.restarts * cfg.probe_restart_fraction))
            probe_sel = None
            s_now = trial_ev.similarity
            if cfg.use_selection:
                kp = min(spectra.kprime_for(cfg.K), s_now.n - 1)
                probe_sel = spectra.select_eigenvectors(
                    spectra.decompose(s_now, min(kp + 2, s_now.n)), cfg.K, kp
                )
            probe = cluster_mod.cluster_spectral(
                s_now, cfg.K, selection=probe_sel, restarts=probe_restarts,
                seed=int(rng.integers(2**31)),
            )
            if any(not targets.contains_partition(c.clustering) for c in probe):
                stop_reason = "recluster"
                break
            p_reclust = max(cfg.p_reclust_floor, p_reclust * cfg.p_reclust_decay)

        ev = objective(theta, True)

    f_exit = accepted[-1][0] if accepted else f_entry
    return SStepResult(
        theta, f_entry, f_exit, accepted, inner, p_reclust, stop_reason, tie_flagged, probes
    )


def _bootstrap_targets(
    theta: ParamSet, x: FeatureTensor, cfg: LearnConfig, c0: Clustering | None
) -> TargetSet:
    if c0 is not None:
        labels = c0 if theta.mode.needs_labels else None
        s = simgraph.build_similarity(x, labels, theta)
        return TargetSet.single(c0, criteria.mncut(s, c0))
    s = simgraph.build_similarity(x, None, _shared_equivalent(theta))
    kp = min(spectra.kprime_for(cfg.K), s.n - 1)
    m = min((kp + 2) if cfg.use_selection else (cfg.K + 2), s.n)
    decomp = spectra.decompose(s, m)
    selection = spectra.select_eigenvectors(decomp, cfg.K, kp) if cfg.use_selection else None
    candidates = cluster_mod.cluster_spectral(
        s, cfg.K, selection=selection, restarts=cfg.restarts,
        seed=(cfg.seed, 0, 0xB007), decomp=decomp,
    )
    kept, _ = _form_targets(candidates, criteria.eigengap(decomp, cfg.K), cfg)
    return _targets_from(kept, None)


def run(
    x: FeatureTensor,
    cfg: LearnConfig,
    theta0: ParamSet,
    c0: Clustering | None = None,
) -> LearnResult:
    """Alternate clustering and parameter steps until two consecutive quiet
    iterations (incumbent unchanged and objective improvement below f_tol),
    or until max_outer_iters."""
    if theta0.F != x.F:
        raise ValueError(f"theta has F={theta0.F} but features have F={x.F}")
    if theta0.mode.needs_labels and theta0.K != cfg.K:
        raise ValueError(f"theta has K={theta0.K} but config has K={cfg.K}")

    theta = theta0
    targets = _bootstrap_targets(theta, x, cfg, c0)
    p_reclust = cfg.p_reclust
    trace: list[TraceRecord] = []
    accepted_f: list[tuple[str, float]] = []
    status = "max_iterations"
    quiet_streak = 0
    it = 0

    try:
        for it in range(1, cfg.max_outer_iters + 1):
            targets, changed = c_step(theta, targets, x, cfg, (cfg.seed, it, 1))
            rng = np.random.default_rng([cfg.seed, it, 2])
            sres = s_step(theta, targets, x, cfg, rng, p_reclust)
            theta = sres.theta
            p_reclust = sres.p_reclust

            accepted_f.append(("c", sres.f_entry))
            accepted_f.extend(("s", value) for value, _ in sres.accepted)

            labels = targets.incumbent if theta.mode.needs_labels else None
            s_now = simgraph.build_similarity(x, labels, theta)
            decomp_now = spectra.decompose(s_now, min(cfg.K + 1, s_now.n))
            trace.append(
                TraceRecord(
                    iteration=it,
                    incumbent_mncut=criteria.mncut(s_now, targets.incumbent),
                    incumbent_changed=changed,
                    target_count=len(targets),
                    eigengap=criteria.eigengap(decomp_now, cfg.K) if s_now.n > cfg.K else 0.0,
                    f_entry=sres.f_entry,
                    f_exit=sres.f_exit,
                    accepted_steps=len(sres.accepted),
                    step_sizes=[t for _, t in sres.accepted],
                    recluster_probes=sres.recluster_probes,
                    stopped_by_probe=sres.stop_reason == "recluster",
                    s_stop_reason=sres.stop_reason,
                    tie_flagged=sres.tie_flagged,
                )
            )

            quiet = (not changed) and (sres.f_entry - sres.f_exit) < cfg.f_tol
            quiet_streak = quiet_streak + 1 if quiet else 0
            if quiet_streak >= 2:
                status = "converged"
                break
    except NonFiniteObjectiveError as exc:
        partial = LearnResult(theta, targets.incumbent, trace, accepted_f, "numerical_failure", it, p_reclust)
        raise NonFiniteObjectiveError(str(exc), partial) from exc

    return LearnResult(theta, targets.incumbent, trace, accepted_f, status, it, p_reclust)
