"""Command-line harness: generate benchmarks, cluster, learn, and evaluate,
with reproducible JSON reports and report figures."""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import cluster as cluster_mod
from . import criteria, data, figures, learn, simgraph, spectra
from .data import DataFormatError, GaussianSpec
from .learn import LearnConfig, NonFiniteObjectiveError
from .simgraph import FeatureTensor, ParamMode, ParamSet
from .spectra import EigensolverError

REPORT_VERSION = 1

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

MODE_NAMES = {
    "shared": ParamMode.SHARED,
    "cluster-product": ParamMode.CLUSTER_PRODUCT,
    "cluster-sum": ParamMode.CLUSTER_SUM,
    "pair": ParamMode.PAIR,
}


def _write_report(path: str, payload: dict) -> None:
    payload = dict(payload)
    payload["report_version"] = REPORT_VERSION
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _theta_to_dict(theta: ParamSet) -> dict:
    return {"mode": theta.mode.value, "K": theta.K, "F": theta.F, "values": theta.values.tolist()}


def _theta_from_dict(payload: dict) -> ParamSet:
    mode = ParamMode(payload["mode"])
    return ParamSet(mode, int(payload["K"]), int(payload["F"]), np.asarray(payload["values"], dtype=float))


def save_theta(path: str | Path, theta: ParamSet) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_theta_to_dict(theta), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_theta(path: str | Path) -> ParamSet:
    with open(path, "r", encoding="utf-8") as fh:
        return _theta_from_dict(json.load(fh))


def _load_feature_input(args) -> FeatureTensor:
    if args.features:
        return data.load_features(args.features)
    points = data.load_points_csv(args.points)
    return data.pairwise_features(points)


def _resolve_theta(arg: str, mode: ParamMode, K: int, F: int) -> ParamSet:
    """--theta accepts either a uniform value or a path to a saved theta file."""
    try:
        value = float(arg)
    except ValueError:
        theta = load_theta(arg)
        if theta.mode is not mode:
            raise ValueError(f"theta file has mode {theta.mode.value!r}, command requested {mode.value!r}")
        return theta
    return ParamSet.uniform(mode, K, F, value)


def _default_spec(k: int, counts: tuple[int, ...], d_noise: int, noise_scale: float) -> GaussianSpec:
    if k == 4:
        means, devs = data.DEFAULT_MEANS, data.DEFAULT_DEVS
    else:
        angles = 2.0 * np.pi * np.arange(k) / k
        means = tuple((6.0 * float(np.cos(a)), 6.0 * float(np.sin(a))) for a in angles)
        devs = tuple(0.8 for _ in range(k))
    return GaussianSpec(means=means, devs=devs, counts=counts, d_noise=d_noise, noise_scale=noise_scale)


def _cmd_gen(args: argparse.Namespace) -> int:
    counts = tuple(int(v) for v in args.counts.split(","))
    if len(counts) != args.k:
        raise ValueError(f"--counts lists {len(counts)} clusters but --k is {args.k}")
    spec = _default_spec(args.k, counts, args.noisy_dims, args.noise_scale)
    points = data.gen_gaussians(spec, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data.save_points_csv(out / "points.csv", points)
    data.save_labels(out / "labels.txt", points.labels)
    print(f"wrote {points.n} points of dimension {points.dim} to {out}/points.csv, labels to {out}/labels.txt")
    return EXIT_OK


def _metrics(s, clustering, decomp, alpha: float) -> dict:
    obj = criteria.f_alpha(s, clustering, decomp, alpha)
    return {
        "mncut": obj.mncut,
        "gap": obj.gap,
        "eigengap": obj.eigengap,
        "f": obj.value,
        "lambda_sum": obj.lambda_sum,
    }


def _cmd_cluster(args: argparse.Namespace) -> int:
    start = time.perf_counter()
    x = _load_feature_input(args)
    mode = MODE_NAMES[args.mode]
    theta = _resolve_theta(args.theta, mode, args.k, x.F)
    if theta.F != x.F:
        raise ValueError(f"theta has F={theta.F} but features have F={x.F}")
    labels0 = data.load_labels(args.labels) if args.labels else None
    if mode.needs_labels and labels0 is None:
        raise ValueError(
            "label-dependent similarity needs a clustering before it can build the "
            "similarity matrix; pass --labels with an initial clustering or use --mode shared"
        )
    s = simgraph.build_similarity(x, labels0, theta)
    kp = min(spectra.kprime_for(args.k), s.n - 1)
    decomp = spectra.decompose(s, min((kp + 2) if args.select else (args.k + 2), s.n))
    selection = spectra.select_eigenvectors(decomp, args.k, kp) if args.select else None
    candidates = cluster_mod.cluster_spectral(
        s, args.k, selection=selection, restarts=args.restarts, seed=args.seed, decomp=decomp
    )
    best = candidates.best.clustering

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    data.save_labels(out, best)

    report = {
        "command": "cluster",
        "config": {
            "points": args.points,
            "features": args.features,
            "k": args.k,
            "theta": args.theta,
            "mode": args.mode,
            "restarts": args.restarts,
            "select": bool(args.select),
            "seed": args.seed,
            "labels": args.labels,
        },
        "candidates": len(candidates),
        "final": _metrics(s, best, decomp, 0.0),
        "labels": best.labels.tolist(),
        "files": {"labels": str(out)},
    }
    if selection is not None:
        report["selection"] = {"indices": list(selection.indices), "i0": selection.i0}
    if args.truth:
        truth = data.load_labels(args.truth)
        report["final"]["ce"] = cluster_mod.classification_error(best, truth)
    if args.report:
        if not args.no_figures:
            stem = Path(args.report).with_suffix("")
            figs = [figures.spectrum_figure(decomp.eigenvalues, Path(f"{stem}_spectrum.png"))]
            report["files"]["figures"] = figs
        report["wall_clock_sec"] = time.perf_counter() - start
        _write_report(args.report, report)
    print(f"best mncut {candidates.best.mncut:.6f} over {len(candidates)} candidates; labels -> {out}")
    if "ce" in report["final"]:
        print(f"classification error {report['final']['ce']:.6f}")
    return EXIT_OK


def _cmd_learn(args: argparse.Namespace) -> int:
    start = time.perf_counter()
    x = _load_feature_input(args)
    mode = MODE_NAMES[args.mode]
    if args.theta_file:
        theta0 = load_theta(args.theta_file)
        if theta0.mode is not mode:
            raise ValueError(f"theta file has mode {theta0.mode.value!r}, command requested {mode.value!r}")
    else:
        theta0 = ParamSet.uniform(mode, args.k, x.F, args.theta_init)
    c0 = data.load_labels(args.labels) if args.labels else None

    cfg = LearnConfig(
        K=args.k,
        seed=args.seed,
        alpha=args.alpha,
        p_reclust=args.p_reclust,
        restarts=args.restarts,
        max_outer_iters=args.max_iters,
        use_selection=bool(args.select),
        max_targets=args.max_targets,
    )
    config_echo = {
        "points": args.points,
        "features": args.features,
        "truth": args.truth,
        "labels": args.labels,
        "mode": args.mode,
        "theta_init": args.theta_init,
        "theta_file": args.theta_file,
        **{k: getattr(cfg, k) for k in (
            "K", "seed", "alpha", "p_reclust", "p_reclust_decay", "p_reclust_floor",
            "restarts", "max_outer_iters", "max_inner_iters", "armijo_slope",
            "armijo_backtrack", "armijo_step0", "armijo_max_backtracks", "grad_tol",
            "f_tol", "use_selection", "max_targets", "probe_restart_fraction",
        )},
    }

    status = "error"
    result = None
    try:
        result = learn.run(x, cfg, theta0, c0)
        status = result.status
    except NonFiniteObjectiveError as exc:
        result = exc.result
        status = "numerical_failure"
        if result is None:
            raise

    if args.check_monotone:
        values = [v for _, v in result.accepted_f]
        rises = [b - a for a, b in zip(values, values[1:]) if b - a > 1e-12]
        if rises:
            print(f"monotonicity check FAILED: {len(rises)} increases, worst {max(rises):.3e}", file=sys.stderr)
            return EXIT_NUMERICAL
        print("monotonicity check passed")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    labels_path = out / "labels.txt"
    theta_path = out / "theta.json"
    data.save_labels(labels_path, result.clustering)
    save_theta(theta_path, result.theta)

    labels_for_s = result.clustering if result.theta.mode.needs_labels else None
    s = simgraph.build_similarity(x, labels_for_s, result.theta)
    decomp = spectra.decompose(s, min(cfg.K + 2, s.n))
    final = _metrics(s, result.clustering, decomp, cfg.alpha)
    if args.truth:
        truth = data.load_labels(args.truth)
        final["ce"] = cluster_mod.classification_error(result.clustering, truth)

    report = {
        "command": "learn",
        "config": config_echo,
        "status": status,
        "iterations": result.outer_iterations,
        "p_reclust_final": result.p_reclust_final,
        "trace": [t.to_dict() for t in result.trace],
        "accepted_f": [[phase, value] for phase, value in result.accepted_f],
        "theta": _theta_to_dict(result.theta),
        "labels": result.clustering.labels.tolist(),
        "final": final,
        "files": {"labels": str(labels_path), "theta": str(theta_path)},
    }
    if args.report:
        if not args.no_figures:
            stem = Path(args.report).with_suffix("")
            figs = [
                figures.trace_figure(report["trace"], Path(f"{stem}_trace.png")),
                figures.params_figure(result.theta, Path(f"{stem}_params.png")),
                figures.spectrum_figure(decomp.eigenvalues, Path(f"{stem}_spectrum.png")),
            ]
            report["files"]["figures"] = figs
        report["wall_clock_sec"] = time.perf_counter() - start
        _write_report(args.report, report)

    line = f"status {status} after {result.outer_iterations} iterations; f {final['f']:.6f}, mncut {final['mncut']:.6f}"
    if "ce" in final:
        line += f", ce {final['ce']:.6f}"
    print(line)
    return EXIT_OK if status in ("converged", "max_iterations") else EXIT_NUMERICAL


def _cmd_eval(args: argparse.Namespace) -> int:
    pred = data.load_labels(args.pred)
    truth = data.load_labels(args.truth)
    ce = cluster_mod.classification_error(pred, truth)
    print(f"{ce:.6f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uslearn",
        description="Jointly learn a pairwise similarity function and a spectral clustering.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="Generate a Gaussian-blob benchmark with noise dimensions")
    p_gen.add_argument("--k", type=int, required=True, help="number of clusters")
    p_gen.add_argument("--counts", type=str, required=True, help="comma-separated points per cluster")
    p_gen.add_argument("--noisy-dims", type=int, default=0)
    p_gen.add_argument("--noise-scale", type=float, default=data.DEFAULT_NOISE_SCALE)
    p_gen.add_argument("--seed", type=int, required=True)
    p_gen.add_argument("--out", type=str, required=True, help="output directory")
    p_gen.set_defaults(func=_cmd_gen)

    p_cluster = sub.add_parser("cluster", help="One-shot spectral clustering at fixed parameters")
    src = p_cluster.add_mutually_exclusive_group(required=True)
    src.add_argument("--points", type=str, help="points CSV (pairwise features derived per axis)")
    src.add_argument("--features", type=str, help="feature tensor file")
    p_cluster.add_argument("--k", type=int, required=True)
    p_cluster.add_argument("--theta", type=str, default="1.0", help="uniform value or theta JSON path")
    p_cluster.add_argument("--mode", choices=sorted(MODE_NAMES), default="shared")
    p_cluster.add_argument("--labels", type=str, default="", help="initial clustering (required by label-dependent modes)")
    p_cluster.add_argument("--restarts", type=int, default=20)
    p_cluster.add_argument("--select", dest="select", action="store_true", default=False)
    p_cluster.add_argument("--no-select", dest="select", action="store_false")
    p_cluster.add_argument("--seed", type=int, required=True)
    p_cluster.add_argument("--truth", type=str, default="", help="truth labels for a CE line in the report")
    p_cluster.add_argument("--out", type=str, required=True, help="output labels file")
    p_cluster.add_argument("--report", type=str, default="")
    p_cluster.add_argument("--no-figures", action="store_true")
    p_cluster.set_defaults(func=_cmd_cluster)

    p_learn = sub.add_parser("learn", help="Alternating similarity learning and clustering")
    src = p_learn.add_mutually_exclusive_group(required=True)
    src.add_argument("--points", type=str)
    src.add_argument("--features", type=str)
    p_learn.add_argument("--truth", type=str, default="")
    p_learn.add_argument("--k", type=int, required=True)
    p_learn.add_argument("--alpha", type=float, default=0.5)
    p_learn.add_argument("--mode", choices=sorted(MODE_NAMES), default="shared")
    p_learn.add_argument("--theta-init", type=float, default=1.0, help="uniform initial parameter value")
    p_learn.add_argument("--theta-file", type=str, default="", help="initial theta JSON (overrides --theta-init)")
    p_learn.add_argument("--labels", type=str, default="", help="initial clustering (optional)")
    p_learn.add_argument("--p-reclust", type=float, default=0.8)
    p_learn.add_argument("--max-targets", type=int, default=6)
    p_learn.add_argument("--restarts", type=int, default=20)
    p_learn.add_argument("--max-iters", type=int, default=100)
    p_learn.add_argument("--select", dest="select", action="store_true", default=False)
    p_learn.add_argument("--no-select", dest="select", action="store_false")
    p_learn.add_argument("--seed", type=int, required=True)
    p_learn.add_argument("--out", type=str, required=True, help="output directory for labels.txt and theta.json")
    p_learn.add_argument("--report", type=str, default="")
    p_learn.add_argument("--no-figures", action="store_true")
    p_learn.add_argument("--check-monotone", action="store_true",
                         help="fail unless the accepted objective trace is non-increasing")
    p_learn.set_defaults(func=_cmd_learn)

    p_eval = sub.add_parser("eval", help="Classification error between two label files")
    p_eval.add_argument("--pred", type=str, required=True)
    p_eval.add_argument("--truth", type=str, required=True)
    p_eval.set_defaults(func=_cmd_eval)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return int(args.func(args))
    except (EigensolverError, NonFiniteObjectiveError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataFormatError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    raise SystemExit(main())
