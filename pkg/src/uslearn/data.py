"""Synthetic benchmark generation, pairwise features from point clouds, and file I/O."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cluster import Clustering
from .simgraph import FeatureTensor

FEATURE_MAGIC = b"USLF"
FEATURE_VERSION = 1

# Benchmark generator defaults: four well separated planar blobs with unequal
# spreads; the noise scale is comparable to the data spread so uniform weights
# genuinely confuse the clustering.
DEFAULT_MEANS = ((0.0, 0.0), (6.0, 0.0), (0.0, 6.0), (6.0, 6.0))
DEFAULT_DEVS = (0.5, 0.8, 1.0, 0.6)
DEFAULT_NOISE_SCALE = 3.0


class DataFormatError(ValueError):
    """A data file failed to parse; carries the offending 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        suffix = f" (line {line})" if line is not None else ""
        super().__init__(message + suffix)


@dataclass(frozen=True)
class PointSet:
    """Points in R^d with optional ground-truth labels."""

    points: np.ndarray
    labels: Clustering | None = None

    def __post_init__(self):
        p = np.ascontiguousarray(np.asarray(self.points, dtype=float))
        if p.ndim != 2:
            raise ValueError(f"points must be 2-D (n, d), got shape {p.shape}")
        if not np.isfinite(p).all():
            raise ValueError("points contain non-finite coordinates")
        if self.labels is not None and self.labels.n != p.shape[0]:
            raise ValueError("label count does not match point count")
        object.__setattr__(self, "points", p)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class GaussianSpec:
    """Planar Gaussian blobs plus label-independent noise dimensions."""

    means: tuple[tuple[float, float], ...] = DEFAULT_MEANS
    devs: tuple[float, ...] = DEFAULT_DEVS
    counts: tuple[int, ...] = (100, 150, 120, 130)
    d_noise: int = 0
    noise_scale: float = DEFAULT_NOISE_SCALE

    def __post_init__(self):
        k = len(self.means)
        if len(self.devs) != k or len(self.counts) != k:
            raise ValueError("means, devs, and counts must have equal length")
        if any(c < 1 for c in self.counts):
            raise ValueError("every component count must be >= 1")
        if any(d <= 0 for d in self.devs):
            raise ValueError("every deviation must be positive")
        if self.d_noise < 0 or self.noise_scale < 0:
            raise ValueError("noise settings must be non-negative")

    @property
    def K(self) -> int:
        return len(self.means)

    @property
    def n(self) -> int:
        return sum(self.counts)


def gen_gaussians(spec: GaussianSpec, seed: int) -> PointSet:
    """Sample the blobs in two meaningful dimensions and append d_noise
    label-independent Gaussian coordinates; deterministic per seed."""
    rng = np.random.default_rng(seed)
    parts = []
    labels = []
    for k, (mean, dev, count) in enumerate(zip(spec.means, spec.devs, spec.counts), start=1):
        parts.append(rng.normal(loc=mean, scale=dev, size=(count, 2)))
        labels.extend([k] * count)
    pts = np.vstack(parts)
    if spec.d_noise:
        noise = rng.normal(0.0, spec.noise_scale, size=(spec.n, spec.d_noise))
        pts = np.hstack([pts, noise])
    return PointSet(pts, Clustering(np.array(labels), spec.K))


def pairwise_features(p: PointSet) -> FeatureTensor:
    """One dissimilarity feature per coordinate axis: x[i, j, f] = |p_if - p_jf|."""
    diff = np.abs(p.points[:, None, :] - p.points[None, :, :])
    return FeatureTensor(diff)


def minmax_scale(points: np.ndarray) -> np.ndarray:
    """Column-wise min-max scaling to [0, 1]; constant columns map to 0."""
    lo = points.min(axis=0)
    span = points.max(axis=0) - lo
    span[span == 0] = 1.0
    return (points - lo) / span


def save_points_csv(path: str | Path, p: PointSet, with_labels: bool = False) -> None:
    """Header-free rows "v1,v2,...,vd[,label]" with full float precision."""
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(p.n):
            row = ",".join(repr(float(v)) for v in p.points[i])
            if with_labels:
                if p.labels is None:
                    raise ValueError("point set has no labels to write")
                row += f",{int(p.labels.labels[i])}"
            fh.write(row + "\n")


def load_points_csv(path: str | Path, labeled: bool = False) -> PointSet:
    """Parse a header-free CSV of coordinates, optionally with a trailing label column."""
    rows: list[list[float]] = []
    labels: list[int] = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            fields = line.split(",")
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise DataFormatError(
                    f"expected {width} fields, found {len(fields)}", line=lineno
                )
            try:
                values = [float(v) for v in fields]
            except ValueError as exc:
                raise DataFormatError(f"non-numeric field: {exc}", line=lineno) from exc
            if labeled:
                lab = values[-1]
                if lab != int(lab):
                    raise DataFormatError(f"label column must be integral, got {lab}", line=lineno)
                labels.append(int(lab))
                values = values[:-1]
            rows.append(values)
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    pts = np.array(rows)
    clustering = Clustering.from_labels(labels) if labeled else None
    return PointSet(pts, clustering)


def save_labels(path: str | Path, c: Clustering) -> None:
    """One 1-based integer per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for lab in c.labels:
            fh.write(f"{int(lab)}\n")


def load_labels(path: str | Path) -> Clustering:
    labels = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                labels.append(int(line))
            except ValueError as exc:
                raise DataFormatError(f"labels must be integers: {exc}", line=lineno) from exc
    if not labels:
        raise DataFormatError(f"{path}: empty labels file")
    try:
        return Clustering.from_labels(labels)
    except ValueError as exc:
        raise DataFormatError(str(exc)) from exc


def save_features(path: str | Path, x: FeatureTensor) -> None:
    """Binary tensor: magic, version u32, n u32, F u32, then n*n*F little-endian
    float64 in (i, j, f) row-major order; the full symmetric tensor is written."""
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<III", FEATURE_VERSION, x.n, x.F))
        fh.write(np.ascontiguousarray(x.values, dtype="<f8").tobytes())


def _load_features_text(path: str | Path) -> FeatureTensor:
    """Pair-list fallback: lines "i j v1 ... vF" with 1-based indices; missing
    pairs default to zero features."""
    entries: list[tuple[int, int, list[float]]] = []
    n = 0
    F = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if len(fields) < 3:
                raise DataFormatError("expected 'i j v1 ...'", line=lineno)
            try:
                i, j = int(fields[0]), int(fields[1])
                vals = [float(v) for v in fields[2:]]
            except ValueError as exc:
                raise DataFormatError(f"bad pair row: {exc}", line=lineno) from exc
            if i < 1 or j < 1:
                raise DataFormatError("pair indices are 1-based", line=lineno)
            if F is None:
                F = len(vals)
            elif len(vals) != F:
                raise DataFormatError(f"expected {F} feature values, found {len(vals)}", line=lineno)
            n = max(n, i, j)
            entries.append((i - 1, j - 1, vals))
    if F is None:
        raise DataFormatError(f"{path}: no pair rows")
    x = np.zeros((n, n, F))
    for i, j, vals in entries:
        x[i, j] = vals
        x[j, i] = vals
    return FeatureTensor(x)


def load_features(path: str | Path) -> FeatureTensor:
    """Load the binary tensor format, falling back to the textual pair list."""
    with open(path, "rb") as fh:
        head = fh.read(4)
        if head != FEATURE_MAGIC:
            return _load_features_text(path)
        meta = fh.read(12)
        if len(meta) != 12:
            raise DataFormatError(f"{path}: truncated feature tensor header")
        version, n, F = struct.unpack("<III", meta)
        if version != FEATURE_VERSION:
            raise DataFormatError(f"{path}: unsupported feature tensor version {version}")
        payload = fh.read(8 * n * n * F)
        if len(payload) != 8 * n * n * F:
            raise DataFormatError(f"{path}: truncated feature tensor payload")
        values = np.frombuffer(payload, dtype="<f8").reshape(n, n, F)
    return FeatureTensor(values.copy())


def load_dermatology(path: str | Path) -> PointSet:
    """Parse the UCI erythemato-squamous raw format: 34 comma-separated
    attributes plus a class column, "?" marking a missing age.

    Rows with any missing field are dropped, features are min-max scaled to
    [0, 1] per column, and the class column becomes the truth labels.
    """
    rows: list[list[float]] = []
    labels: list[int] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            fields = line.split(",")
            if len(fields) != 35:
                raise DataFormatError(f"expected 35 fields (34 attributes + class), found {len(fields)}", line=lineno)
            if any(f.strip() == "?" for f in fields):
                continue
            try:
                values = [float(v) for v in fields[:-1]]
                cls = int(fields[-1])
            except ValueError as exc:
                raise DataFormatError(f"non-numeric field: {exc}", line=lineno) from exc
            rows.append(values)
            labels.append(cls)
    if not rows:
        raise DataFormatError(f"{path}: no complete rows")
    pts = minmax_scale(np.array(rows))
    return PointSet(pts, Clustering.from_labels(labels))
