"""Error measurement, label-budget sweeps, and PCA feature export."""

from __future__ import annotations

import csv
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .autograd import constant
from .data import EmbeddingDataset, LabelBudget
from .errors import ContractError, ParameterError
from .losses import LossWeights
from .networks import CONTENT_FEATURE_WIDTH, ComponentBundle
from .optim import AdamWConfig
from .training import FitConfig, TrainingSchedule, fit

METHODS = ("supervised", "semi-supervised")


def predictions(bundle: ComponentBundle, dataset: EmbeddingDataset, batch_size: int = 1024) -> np.ndarray:
    """Argmax content class per row, dropout disabled."""
    out = np.empty(len(dataset), dtype=np.int64)
    for start in range(0, len(dataset), batch_size):
        rows = dataset.embeddings[start : start + batch_size].astype(np.float64)
        logits = bundle.content_logits(constant(rows))
        out[start : start + len(rows)] = logits.data.argmax(axis=1)
    return out


def error_rate(bundle: ComponentBundle, dataset: EmbeddingDataset) -> float:
    """Fraction of rows whose argmax content class misses the label."""
    if (dataset.labels < 0).any():
        raise ContractError("error_rate requires a fully labeled dataset")
    pred = predictions(bundle, dataset)
    return float((pred != dataset.labels).mean())


@dataclass(frozen=True)
class SweepRow:
    budget: int
    method: str
    seed: int
    best_error: float
    steps: int


@dataclass
class SweepConfig:
    schedule: TrainingSchedule
    optimizer: AdamWConfig = field(default_factory=AdamWConfig)
    weights: LossWeights = field(default_factory=LossWeights)


def _run_cell(args) -> SweepRow:
    train, test, budget, method, seed, cfg = args
    schedule = cfg.schedule
    if method == "supervised":
        schedule = replace(schedule, supervised_only=True)
    _, report = fit(
        train, test, budget, schedule,
        FitConfig(optimizer=cfg.optimizer, weights=cfg.weights),
        seed=seed,
    )
    return SweepRow(budget, method, seed, report.best_error, report.steps_run)


def run_sweep(
    train: EmbeddingDataset,
    test: EmbeddingDataset,
    ladder: LabelBudget,
    methods: tuple[str, ...],
    seeds: tuple[int, ...],
    config: SweepConfig,
    jobs: int = 1,
) -> list[SweepRow]:
    """Train one fresh model per (budget, method, seed) cell.

    Cells at the same (budget, seed) share the labeled subset across
    methods (selection depends only on dataset, budget and seed), making
    the comparison paired.
    """
    for m in methods:
        if m not in METHODS:
            raise ParameterError(f"unknown method {m!r}; expected one of {METHODS}")
    cells = [
        (train, test, budget, method, seed, config)
        for budget in ladder.ladder
        for method in methods
        for seed in seeds
    ]
    if jobs > 1:
        # spawn, not fork: numba's threading layer does not survive forking
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=jobs, mp_context=ctx) as pool:
            rows = list(pool.map(_run_cell, cells))
    else:
        rows = [_run_cell(c) for c in cells]
    rows.sort(key=lambda r: (-r.budget, r.method, r.seed))
    return rows


def write_sweep_csv(rows: list[SweepRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["budget", "method", "seed", "best_error", "steps"])
        for r in rows:
            w.writerow([r.budget, r.method, r.seed, repr(r.best_error), r.steps])


def read_sweep_csv(path: str | Path) -> list[SweepRow]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [
            SweepRow(int(r["budget"]), r["method"], int(r["seed"]),
                     float(r["best_error"]), int(r["steps"]))
            for r in reader
        ]


@dataclass(frozen=True)
class ProjectedFeatures:
    scores: np.ndarray  # (N, k)
    loadings: np.ndarray  # (k, d) orthonormal rows
    explained_variance_ratio: np.ndarray  # (k,) descending


def pca_project(features: np.ndarray, k: int = 5) -> ProjectedFeatures:
    """Top-k principal components of mean-centered rows via SVD.

    Sign convention: each loading's largest-magnitude coordinate is made
    positive, so outputs are deterministic.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise ParameterError(f"features must be 2-D, got shape {x.shape}")
    n, d = x.shape
    if k > d:
        raise ParameterError(f"k={k} exceeds feature width {d}")
    if n < k:
        raise ParameterError(f"need at least k={k} rows, got {n}")
    centered = x - x.mean(axis=0)
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    loadings = vt[:k]
    flip = np.sign(loadings[np.arange(k), np.abs(loadings).argmax(axis=1)])
    loadings = loadings * flip[:, None]
    variances = s**2
    total = variances.sum()
    ratios = variances[:k] / total if total > 0 else np.zeros(k)
    return ProjectedFeatures(
        scores=centered @ loadings.T,
        loadings=loadings,
        explained_variance_ratio=ratios,
    )


def content_feature_matrix(bundle: ComponentBundle, dataset: EmbeddingDataset,
                           batch_size: int = 1024) -> np.ndarray:
    """Penultimate classifier activations (width 1024) for every row."""
    out = np.empty((len(dataset), CONTENT_FEATURE_WIDTH))
    for start in range(0, len(dataset), batch_size):
        rows = dataset.embeddings[start : start + batch_size].astype(np.float64)
        out[start : start + len(rows)] = bundle.content_features(constant(rows)).data
    return out


def export_features(bundle: ComponentBundle, dataset: EmbeddingDataset, path: str | Path) -> None:
    """CSV of labels, 1024-dim classifier features, and their 5-dim PCA."""
    feats = content_feature_matrix(bundle, dataset)
    proj = pca_project(feats, k=5)
    header = (
        ["label"]
        + [f"f{i}" for i in range(CONTENT_FEATURE_WIDTH)]
        + [f"p{i}" for i in range(5)]
    )
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(len(dataset)):
            row = [int(dataset.labels[i])]
            row += [repr(float(v)) for v in feats[i]]
            row += [repr(float(v)) for v in proj.scores[i]]
            w.writerow(row)
