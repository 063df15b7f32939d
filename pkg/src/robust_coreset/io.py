"""Dataset files, synthetic generators and JSON reports."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .core import EuclideanMetric, ExplicitMetric, WeightedPointSet

SCHEMA_VERSION = 1
GENERATORS = ("gaussian_mixture", "uniform_box", "clustered_with_outliers", "collinear")


class DataFormatError(ValueError):
    pass


def fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _fields(line: str) -> list[str]:
    return [f.strip() for f in line.split(",")]


def parse_csv(text: str):
    """Rows of coordinates with an optional trailing ``weight=<w>`` field."""
    coords, weights = [], []
    dim = None
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        fields = _fields(line)
        w = 1.0
        if fields[-1].startswith("weight="):
            try:
                w = float(fields[-1][len("weight="):])
            except ValueError:
                raise DataFormatError(f"line {lineno}: bad weight field {fields[-1]!r}") from None
            fields = fields[:-1]
        try:
            row = [float(f) for f in fields]
        except ValueError:
            raise DataFormatError(f"line {lineno}: non-numeric coordinate") from None
        if not row:
            raise DataFormatError(f"line {lineno}: no coordinates")
        if dim is None:
            dim = len(row)
        elif len(row) != dim:
            raise DataFormatError(f"line {lineno}: expected {dim} coordinates, got {len(row)}")
        if not all(math.isfinite(v) for v in row) or not math.isfinite(w) or w < 0:
            raise DataFormatError(f"line {lineno}: values must be finite, weights nonnegative")
        coords.append(row)
        weights.append(w)
    if not coords:
        raise DataFormatError("no data rows")
    return np.asarray(coords, dtype=np.float64), np.asarray(weights)


def looks_explicit(text: str) -> bool:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        return False
    head = _fields(lines[0])
    if len(head) != 1 or not head[0].isdigit():
        return False
    n = int(head[0])
    return n >= 2 and len(lines) == n + 1 and all(len(_fields(ln)) == n for ln in lines[1:])


def parse_explicit(text: str) -> ExplicitMetric:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    try:
        n = int(lines[0].strip())
        mat = np.asarray([[float(v) for v in _fields(ln)] for ln in lines[1:]])
    except (ValueError, IndexError):
        raise DataFormatError("explicit metric: expected 'n' then n rows of n distances") from None
    if mat.shape != (n, n):
        raise DataFormatError(f"explicit metric: expected {n}x{n} matrix, got {mat.shape}")
    return ExplicitMetric(mat)


def load_dataset(path, metric: str = "auto"):
    """Returns ``(WeightedPointSet, MetricSpace)``; explicit datasets use every index once."""
    text = Path(path).read_text()
    if metric == "auto":
        metric = "explicit" if looks_explicit(text) else "euclidean"
    if metric == "explicit":
        em = parse_explicit(text)
        return WeightedPointSet.unweighted(np.arange(em.size)), em
    if metric != "euclidean":
        raise ValueError(f"unknown metric {metric!r}")
    coords, w = parse_csv(text)
    return WeightedPointSet(coords, w, np.arange(len(w))), EuclideanMetric(coords.shape[1])


def load_coreset(path, metric) -> WeightedPointSet:
    coords, w = parse_csv(Path(path).read_text())
    if metric.kind == "explicit":
        if coords.shape[1] != 1 or np.any(coords != np.round(coords)):
            raise DataFormatError("explicit-metric coresets list one integer index per row")
        idx = coords[:, 0].astype(np.int64)
        return WeightedPointSet(metric.as_points(idx), w, idx)
    if coords.shape[1] != metric.dim:
        raise DataFormatError("coreset dimension does not match the dataset")
    return WeightedPointSet(coords, w, np.arange(len(w)))


def format_points(Y: WeightedPointSet, with_weight: bool = True) -> str:
    pts = np.asarray(Y.points)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    lines = []
    for row, w in zip(pts, Y.weights):
        fields = [str(int(v)) if pts.dtype.kind in "iu" else fmt(v) for v in row]
        if with_weight:
            fields.append(f"weight={fmt(w)}")
        lines.append(",".join(fields))
    return "\n".join(lines) + "\n"


def write_points(path, Y: WeightedPointSet, with_weight: bool = True):
    Path(path).write_text(format_points(Y, with_weight))


def generate(kind: str, n: int, d: int = 2, k: int = 3, m: int = 0, spread: float = 1.0,
             seed: int = 0) -> np.ndarray:
    """Synthetic point clouds; deterministic in ``seed``.

    clustered_with_outliers: k Gaussian clusters (std spread/10, centers in
    [-spread, spread]^d) and exactly m uniform outliers at distance >= 10*spread
    from every inlier.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if d < 1 or k < 1 or m < 0 or spread <= 0:
        raise ValueError("invalid generator parameters")
    rng = np.random.default_rng(seed)
    if kind == "collinear":
        pts = np.zeros((n, d))
        pts[:, 0] = np.arange(n)
        return pts
    if kind == "uniform_box":
        return rng.uniform(-spread, spread, size=(n, d))
    if kind == "gaussian_mixture":
        centers = rng.uniform(-spread, spread, size=(k, d))
        labels = rng.integers(k, size=n)
        return centers[labels] + rng.normal(scale=spread / 10, size=(n, d))
    if kind == "clustered_with_outliers":
        if m > n:
            raise ValueError("more outliers than points")
        n_in = n - m
        centers = rng.uniform(-spread, spread, size=(k, d))
        labels = rng.integers(k, size=n_in)
        inliers = centers[labels] + rng.normal(scale=spread / 10, size=(n_in, d))
        outliers = []
        box = 20 * spread + (np.abs(inliers).max() if n_in else 0.0)
        while len(outliers) < m:
            cand = rng.uniform(-box, box, size=d)
            if n_in == 0 or np.min(np.linalg.norm(inliers - cand, axis=1)) >= 10 * spread:
                outliers.append(cand)
        pts = np.vstack([inliers] + ([np.asarray(outliers)] if m else []))
        return pts
    raise ValueError(f"unknown generator {kind!r}")


def format_dataset(points: np.ndarray) -> str:
    return "\n".join(",".join(fmt(v) for v in row) for row in points) + "\n"


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def make_report(config: dict, stage_sizes: dict, sample_sizes: dict, delta_ledger: dict,
                distortion: dict, timings_ms: dict, seed: int, **extra) -> dict:
    report = {
        "schema": SCHEMA_VERSION,
        "config": config,
        "stage_sizes": stage_sizes,
        "sample_sizes": sample_sizes,
        "delta_ledger": delta_ledger,
        "distortion": {key: distortion.get(key) for key in ("max_rel", "max_add", "pass_rate", "witness")},
        "timings_ms": timings_ms,
        "seed": seed,
    }
    report.update(extra)
    return _clean(report)


REPORT_KEYS = ("schema", "config", "stage_sizes", "sample_sizes", "delta_ledger",
               "distortion", "timings_ms", "seed")


def write_report(path, report: dict):
    Path(path).write_text(json.dumps(report, indent=2, allow_nan=False) + "\n")
