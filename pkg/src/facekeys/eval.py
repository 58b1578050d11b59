"""RMSE metric, benchmark runner, and report formatting.

The benchmark mirrors the study design: per task (eleven sparse keypoints,
four dense keypoints) impute, hold out a seeded test fraction, build raw
and LBP+PCA feature pipelines, fit each configured model, and score
held-out RMSE in pixel units. Reports render as markdown tables (model
rows, RMSE1 = eleven task, RMSE2 = four task) or as a deterministic CSV.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import (
    Dataset,
    DatasetError,
    Task,
    holdout_split,
    impute_column_means,
    load_training_csv,
    split_by_keypoint_coverage,
    to_matrices,
)
from .lbp import LbpConfig
from .pipeline import fit_pipeline
from .pca import fit_pca, to_grid, transform
from .regressors import RegressorSpec, fit_any, predict_any
from .rng import permutation

TASK_LABELS = {"eleven": "RMSE1", "four": "RMSE2"}

DEFAULT_MODELS = ("knn", "ols", "ridge", "lasso", "elastic", "tree")
ALL_MODELS = ("knn", "ols", "ridge", "lasso", "elastic", "tree", "mlp", "cnn")


class EvalError(ValueError):
    """Invalid metric input or benchmark configuration."""


def rmse(predictions, truths) -> float:
    """Root mean squared error over every entry of two equal-shape matrices."""
    P = np.asarray(predictions, dtype=np.float64)
    T = np.asarray(truths, dtype=np.float64)
    if P.shape != T.shape:
        raise EvalError(f"shape mismatch: {P.shape} vs {T.shape}")
    if P.size == 0:
        raise EvalError("cannot score empty matrices")
    diff = P - T
    return float(np.sqrt(np.mean(diff * diff)))


@dataclass
class BenchmarkConfig:
    """Everything a benchmark run depends on, one seed included.

    Desk-scale caps (max_rows, epoch caps) keep default runs small;
    full=True lifts them to study scale.
    """

    training_csv: str = ""
    models: tuple[str, ...] = DEFAULT_MODELS
    pipelines: tuple[str, ...] = ("raw", "lbp_pca")
    tasks: tuple[str, ...] = ("eleven", "four")
    seed: int = 7
    train_fraction: float = 0.9
    scale_pixels: bool = True
    train_only_means: bool = False
    pca_components: int = 256
    lbp_neighbors: int = 8
    lbp_radius: float = 1.0
    lbp_rotation_invariant: bool = False
    lbp_mode: str = "pixel_map"
    max_rows: int | None = 400
    mlp_epochs: int | None = 30
    cnn_epochs: int | None = 20
    full: bool = False
    knn_k: int = 5
    ridge_lam: float = 1.0
    lasso_alpha: float = 0.1
    elastic_alpha: float = 0.1
    elastic_rho: float = 0.5
    cd_max_iter: int = 1000
    cd_tol: float = 1e-4
    tree_max_depth: int = 5
    tree_min_samples_leaf: int = 1
    optimizer: str = "rmsprop"
    mlp_hidden: tuple[int, ...] = (300, 150, 50)
    mlp_batch_size: int = 30
    cnn_batch_size: int = 50

    def __post_init__(self):
        for m in self.models:
            if m not in ALL_MODELS:
                raise EvalError(f"unknown model {m!r}; expected one of {ALL_MODELS}")
        for p in self.pipelines:
            if p not in ("raw", "lbp_pca"):
                raise EvalError(f"unknown pipeline {p!r}")
        for t in self.tasks:
            if t not in TASK_LABELS:
                raise EvalError(f"unknown task {t!r}")
        if "cnn" in self.models:
            side = math.isqrt(self.pca_components)
            if side * side != self.pca_components or side % 4 != 0:
                raise EvalError(
                    "cnn needs pca_components to be a square of a multiple of 4"
                )

    def effective_max_rows(self) -> int | None:
        return None if self.full else self.max_rows

    def effective_epochs(self, kind: str) -> int:
        if kind == "mlp":
            return 500 if self.full or self.mlp_epochs is None else self.mlp_epochs
        return 400 if self.full or self.cnn_epochs is None else self.cnn_epochs


_BOOL_KEYS = {"scale_pixels", "train_only_means", "lbp_rotation_invariant", "full"}
_INT_KEYS = {
    "seed", "pca_components", "lbp_neighbors", "max_rows", "mlp_epochs",
    "cnn_epochs", "knn_k", "cd_max_iter", "tree_max_depth",
    "tree_min_samples_leaf", "mlp_batch_size", "cnn_batch_size",
}
_FLOAT_KEYS = {
    "train_fraction", "lbp_radius", "ridge_lam", "lasso_alpha",
    "elastic_alpha", "elastic_rho", "cd_tol",
}
_TUPLE_KEYS = {"models", "pipelines", "tasks", "mlp_hidden"}


def load_config(path) -> BenchmarkConfig:
    """Parse a flat key=value config file ('#' starts a comment)."""
    values: dict = {}
    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise EvalError(f"{path}:{line_no}: expected key = value")
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if key in _BOOL_KEYS:
                if val.lower() not in ("true", "false"):
                    raise EvalError(f"{path}:{line_no}: {key} must be true or false")
                values[key] = val.lower() == "true"
            elif key in _INT_KEYS:
                values[key] = None if val.lower() == "none" else int(val)
            elif key in _FLOAT_KEYS:
                values[key] = float(val)
            elif key in _TUPLE_KEYS:
                items = tuple(v.strip() for v in val.split(",") if v.strip())
                values[key] = tuple(int(v) for v in items) if key == "mlp_hidden" else items
            elif key in ("training_csv", "optimizer", "lbp_mode"):
                values[key] = val
            else:
                raise EvalError(f"{path}:{line_no}: unknown key {key!r}")
    return BenchmarkConfig(**values)


@dataclass
class EvalRow:
    """One (model, pipeline, task) measurement."""

    model: str
    pipeline: str
    task: str
    rmse: float | None
    n_train: int
    n_test: int
    seed: int
    hyperparameters: dict
    seconds: float = 0.0
    error: str | None = None


@dataclass
class EvalReport:
    """Benchmark output: one row per configured (model, pipeline, task)."""

    rows: list[EvalRow] = field(default_factory=list)
    seed: int = 0


def _spec_for(cfg: BenchmarkConfig, kind: str) -> RegressorSpec:
    if kind == "knn":
        hp = {"k": cfg.knn_k}
    elif kind == "ols":
        hp = {}
    elif kind == "ridge":
        hp = {"lam": cfg.ridge_lam}
    elif kind == "lasso":
        hp = {"alpha": cfg.lasso_alpha, "max_iter": cfg.cd_max_iter, "tol": cfg.cd_tol}
    elif kind == "elastic":
        hp = {
            "alpha": cfg.elastic_alpha, "rho": cfg.elastic_rho,
            "max_iter": cfg.cd_max_iter, "tol": cfg.cd_tol,
        }
    elif kind == "tree":
        hp = {"max_depth": cfg.tree_max_depth, "min_samples_leaf": cfg.tree_min_samples_leaf}
    elif kind == "mlp":
        hp = {
            "hidden": cfg.mlp_hidden, "epochs": cfg.effective_epochs("mlp"),
            "batch_size": cfg.mlp_batch_size, "optimizer": cfg.optimizer,
        }
    else:
        hp = {
            "epochs": cfg.effective_epochs("cnn"),
            "batch_size": cfg.cnn_batch_size, "optimizer": cfg.optimizer,
        }
    return RegressorSpec(kind=kind, hyperparameters=hp, seed=cfg.seed)


def _subsample(d: Dataset, max_rows: int | None, seed: int) -> Dataset:
    if max_rows is None or len(d) <= max_rows:
        return d
    idx = sorted(permutation(len(d), seed)[:max_rows])
    return d.take(idx)


def _lbp_config(cfg: BenchmarkConfig) -> LbpConfig:
    return LbpConfig(
        neighbors=cfg.lbp_neighbors,
        radius=cfg.lbp_radius,
        rotation_invariant=cfg.lbp_rotation_invariant,
    )


def _grids_for_cnn(cfg: BenchmarkConfig, X_train: np.ndarray, X_test: np.ndarray):
    """Square grids for the cnn.

    Features that already form a pool-friendly square (e.g. a 256-wide
    PCA space) reshape directly; anything else (raw 9216-pixel rows) gets
    its own PCA projection first, shrunk if the training split is small.
    """
    k = X_train.shape[1]
    side = math.isqrt(k)
    if side * side == k and side % 4 == 0:
        return X_train.reshape(-1, side, side), X_test.reshape(-1, side, side)
    n_comp = min(cfg.pca_components, X_train.shape[0] - 1, k)
    side = math.isqrt(n_comp)
    while side > 0 and (side * side != n_comp or side % 4 != 0):
        n_comp -= 1
        side = math.isqrt(n_comp)
    if side == 0:
        raise EvalError("training split too small to build cnn grids")
    model = fit_pca(X_train, n_components=n_comp)
    return (
        to_grid(model, transform(model, X_train), side),
        to_grid(model, transform(model, X_test), side),
    )


def run_benchmark(cfg: BenchmarkConfig) -> EvalReport:
    """Run the configured benchmark; per-row failures never abort the run."""
    data = load_training_csv(cfg.training_csv)
    dense, sparse = split_by_keypoint_coverage(data)
    by_task = {"four": dense, "eleven": sparse}
    report = EvalReport(seed=cfg.seed)

    for task in cfg.tasks:
        d = _subsample(by_task[task], cfg.effective_max_rows(), cfg.seed)
        if cfg.train_only_means:
            train_raw, test_raw = holdout_split(d, cfg.train_fraction, cfg.seed)
            from .dataset import column_means

            means = column_means(train_raw)
            train = impute_column_means(train_raw, means)
            test = impute_column_means(test_raw, means)
        else:
            d = impute_column_means(d)
            train, test = holdout_split(d, cfg.train_fraction, cfg.seed)

        _, Y_train = to_matrices(train, cfg.scale_pixels)
        _, Y_test = to_matrices(test, cfg.scale_pixels)

        for pipeline_name in cfg.pipelines:
            try:
                if pipeline_name == "raw":
                    pipe = fit_pipeline(train.images, scale_pixels=cfg.scale_pixels)
                else:
                    n_comp = min(cfg.pca_components, len(train) - 1)
                    pipe = fit_pipeline(
                        train.images,
                        scale_pixels=cfg.scale_pixels,
                        lbp=_lbp_config(cfg),
                        lbp_mode=cfg.lbp_mode,
                        pca_components=n_comp,
                    )
                X_train = pipe.transform(train.images).values
                X_test = pipe.transform(test.images).values
            except Exception as exc:  # configuration-level failure hits all rows
                for kind in cfg.models:
                    report.rows.append(EvalRow(
                        model=kind, pipeline=pipeline_name, task=task,
                        rmse=None, n_train=len(train), n_test=len(test),
                        seed=cfg.seed, hyperparameters={}, error=str(exc),
                    ))
                continue

            for kind in cfg.models:
                spec = _spec_for(cfg, kind)
                started = time.perf_counter()
                try:
                    if kind == "cnn":
                        G_train, G_test = _grids_for_cnn(cfg, X_train, X_test)
                        model = fit_any(spec, G_train, Y_train)
                        pred = predict_any(model, G_test)
                    else:
                        model = fit_any(spec, X_train, Y_train)
                        pred = predict_any(model, X_test)
                    value = rmse(pred, Y_test)
                    error = None
                except Exception as exc:
                    value = None
                    error = str(exc)
                report.rows.append(EvalRow(
                    model=kind, pipeline=pipeline_name, task=task,
                    rmse=value, n_train=len(train), n_test=len(test),
                    seed=cfg.seed, hyperparameters=spec.hyperparameters,
                    seconds=time.perf_counter() - started, error=error,
                ))
    return report


def mean_predictor_rmse(Y_train: np.ndarray, Y_test: np.ndarray) -> float:
    """RMSE of always predicting the training-target column means."""
    mean = np.asarray(Y_train, dtype=np.float64).mean(axis=0)
    pred = np.broadcast_to(mean, np.asarray(Y_test).shape)
    return rmse(pred, Y_test)


def _fmt(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def format_report(report: EvalReport, style: str = "markdown") -> str:
    """Render a report as 'markdown' (paper-style tables) or 'csv'.

    The CSV holds only deterministic fields (no wall-clock timing), so two
    identically seeded runs serialize byte-for-byte identically, and it
    round-trips through load_report_csv.
    """
    if style == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            ["model", "pipeline", "task", "rmse", "n_train", "n_test",
             "seed", "hyperparameters", "error"]
        )
        for r in report.rows:
            writer.writerow([
                r.model, r.pipeline, r.task, _fmt(r.rmse), r.n_train,
                r.n_test, r.seed, json.dumps(r.hyperparameters, sort_keys=True),
                r.error or "",
            ])
        return buf.getvalue()
    if style != "markdown":
        raise EvalError(f"unknown report style {style!r}")

    lines = [f"# Benchmark report (seed {report.seed})", ""]
    for pipeline_name in dict.fromkeys(r.pipeline for r in report.rows):
        rows = [r for r in report.rows if r.pipeline == pipeline_name]
        tasks = [t for t in ("eleven", "four") if any(r.task == t for r in rows)]
        sizes = ", ".join(
            f"{t}: {next(r for r in rows if r.task == t).n_train} train / "
            f"{next(r for r in rows if r.task == t).n_test} test"
            for t in tasks
        )
        lines.append(f"## Pipeline: {pipeline_name} ({sizes})")
        lines.append("")
        header = "| Model | " + " | ".join(TASK_LABELS[t] for t in tasks) + " | seconds |"
        lines.append(header)
        lines.append("|" + "---|" * (len(tasks) + 2))
        for kind in dict.fromkeys(r.model for r in rows):
            cells = [kind]
            total_s = 0.0
            for t in tasks:
                row = next((r for r in rows if r.model == kind and r.task == t), None)
                if row is None:
                    cells.append("")
                elif row.error is not None:
                    cells.append("error")
                else:
                    cells.append(f"{row.rmse:.3f}")
                if row is not None:
                    total_s += row.seconds
            cells.append(f"{total_s:.1f}")
            lines.append("| " + " | ".join(cells) + " |")
        errors = [r for r in rows if r.error]
        for r in errors:
            lines.append(f"- {r.model}/{r.task} failed: {r.error}")
        lines.append("")
    return "\n".join(lines)


def load_report_csv(text: str) -> EvalReport:
    """Parse a CSV produced by format_report(style='csv')."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    expected = ["model", "pipeline", "task", "rmse", "n_train", "n_test",
                "seed", "hyperparameters", "error"]
    if header != expected:
        raise EvalError(f"unexpected report header {header}")
    report = EvalReport()
    for row in reader:
        if not row:
            continue
        report.rows.append(EvalRow(
            model=row[0], pipeline=row[1], task=row[2],
            rmse=float(row[3]) if row[3] else None,
            n_train=int(row[4]), n_test=int(row[5]), seed=int(row[6]),
            hyperparameters=json.loads(row[7]),
            error=row[8] or None,
        ))
    if report.rows:
        report.seed = report.rows[0].seed
    return report
