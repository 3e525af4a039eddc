"""L2-regularized logistic/ridge fitting and the repeated-split protocol.

Objective for both kinds (intercept unpenalized)::

    mean_i loss(x_i . w + b, y_i) + lam * ||w||^2 / 2

with log-loss for ``logistic`` and squared error for ``ridge``.  Fitting is
damped Newton from zero, so results are deterministic.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit

from genealogy._parallel import parallel_map
from genealogy.dataset import Dataset
from genealogy.stats import TestResult, wilcoxon_signed_rank

LAMBDA_GRID = tuple(2.0 ** x for x in range(-8, 2))
SPLIT = (0.7, 0.1, 0.2)
DEFAULT_REPEATS = 30
GRAD_TOL = 1e-8
MAX_NEWTON_ITER = 200
MAX_SPLIT_RETRIES = 100
KINDS = ("logistic", "ridge")


@dataclass(frozen=True)
class Scaler:
    """Train-set imputation and standardization (population sigma).

    Missing values are replaced by the training mean before scaling; columns
    with zero training variance map to 0.
    """

    mean: np.ndarray
    scale: np.ndarray
    constant: np.ndarray

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        X = np.where(np.isnan(X), self.mean, X)
        Z = (X - self.mean) / self.scale
        Z[:, self.constant] = 0.0
        return Z


def standardize(train: np.ndarray) -> tuple[Scaler, np.ndarray]:
    train = np.asarray(train, dtype=float)
    if train.ndim != 2 or len(train) == 0:
        raise ValueError("training matrix must be non-empty and 2-D")
    with np.errstate(invalid="ignore"):
        all_nan = np.all(np.isnan(train), axis=0)
        mean = np.where(all_nan, 0.0, np.nanmean(np.where(all_nan, 0.0, train), axis=0))
    filled = np.where(np.isnan(train), mean, train)
    sd = filled.std(axis=0)
    constant = sd == 0
    scaler = Scaler(mean, np.where(constant, 1.0, sd), constant)
    return scaler, scaler.transform(train)


@dataclass(frozen=True)
class LinearModel:
    kind: str
    weights: np.ndarray
    intercept: float
    lam: float
    feature_names: tuple[str, ...] = ()

    def decision(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.weights + self.intercept

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if self.kind != "logistic":
            raise ValueError("probabilities only exist for logistic models")
        return expit(self.decision(X))

    def predict(self, X: np.ndarray) -> np.ndarray:
        z = self.decision(X)
        return (z >= 0).astype(float) if self.kind == "logistic" else z

    def score(self, X: np.ndarray, y: np.ndarray) -> float:
        """Accuracy for logistic models, mean squared error for ridge."""
        pred = self.predict(X)
        if self.kind == "logistic":
            return float(np.mean(pred == y))
        return float(np.mean((pred - y) ** 2))


def objective(kind: str, X: np.ndarray, y: np.ndarray, lam: float,
              params: np.ndarray) -> tuple[float, np.ndarray]:
    """Loss and gradient at ``params = [w..., b]``."""
    w, b = params[:-1], params[-1]
    z = X @ w + b
    n = len(y)
    if kind == "logistic":
        loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
        r = expit(z) - y
    elif kind == "ridge":
        loss = float(np.mean((z - y) ** 2))
        r = 2.0 * (z - y)
    else:
        raise ValueError(f"unknown model kind {kind!r}")
    loss += lam * float(w @ w) / 2
    grad = np.empty_like(params)
    grad[:-1] = X.T @ r / n + lam * w
    grad[-1] = r.mean()
    return loss, grad


def _hessian(kind, Xb, params, lam):
    n = len(Xb)
    if kind == "logistic":
        s = expit(Xb @ params)
        d = s * (1 - s)
    else:
        d = np.full(n, 2.0)
    H = (Xb * d[:, None]).T @ Xb / n
    H[np.arange(len(params) - 1), np.arange(len(params) - 1)] += lam
    return H


def fit(kind: str, X: np.ndarray, y: np.ndarray, lam: float,
        feature_names: Sequence[str] = (), tol: float = GRAD_TOL) -> LinearModel:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if kind not in KINDS:
        raise ValueError(f"unknown model kind {kind!r}")
    if X.ndim != 2 or len(X) != len(y) or len(y) < 2:
        raise ValueError("X must be 2-D with len(y) >= 2 rows")
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite values in X or y")

    Xb = np.hstack([X, np.ones((len(X), 1))])
    params = np.zeros(X.shape[1] + 1)
    loss, grad = objective(kind, X, y, lam, params)
    for _ in range(MAX_NEWTON_ITER):
        if np.linalg.norm(grad) < tol:
            break
        step = np.linalg.solve(_hessian(kind, Xb, params, lam), grad)
        t = 1.0
        while True:
            cand = params - t * step
            cand_loss, cand_grad = objective(kind, X, y, lam, cand)
            if cand_loss <= loss - 1e-4 * t * float(grad @ step) or t < 1e-10:
                break
            t /= 2
        params, loss, grad = cand, cand_loss, cand_grad
    return LinearModel(kind, params[:-1].copy(), float(params[-1]), lam, tuple(feature_names))


def split_indices(n: int, rng: np.random.Generator,
                  fractions: Sequence[float] = SPLIT) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    if min(n_train, n_val, n - n_train - n_val) < 1:
        raise ValueError(f"{n} rows cannot be split {fractions}")
    perm = rng.permutation(n)
    return perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:]


def repeat_splits(y: np.ndarray, kind: str, repeats: int, seed: int,
                  fractions: Sequence[float] = SPLIT):
    """The per-repeat (train, val, test) index triples; depends only on seed, n and y."""
    out = []
    for r in range(repeats):
        rng = np.random.default_rng(np.random.SeedSequence([seed, r]))
        for _ in range(MAX_SPLIT_RETRIES):
            tr, va, te = split_indices(len(y), rng, fractions)
            if kind != "logistic" or len(np.unique(y[tr])) == 2:
                break
        else:
            raise ValueError("could not draw a training split containing both classes")
        out.append((tr, va, te))
    return out


@dataclass
class EvalReport:
    kind: str
    feature_names: list[str]
    metrics: np.ndarray
    lambdas: np.ndarray
    coefficients: np.ndarray
    seed: int = 0
    label: str = ""

    @property
    def metric_name(self) -> str:
        return "accuracy" if self.kind == "logistic" else "mse"

    @property
    def repeats(self) -> int:
        return len(self.metrics)

    @property
    def mean(self) -> float:
        return float(np.mean(self.metrics))

    @property
    def se(self) -> float:
        n = len(self.metrics)
        return float(np.std(self.metrics, ddof=1) / np.sqrt(n)) if n > 1 else 0.0

    @property
    def coefficient_means(self) -> dict[str, float]:
        m = self.coefficients.mean(axis=0)
        return dict(zip(self.feature_names, map(float, m)))

    @property
    def coefficient_se(self) -> dict[str, float]:
        n = len(self.coefficients)
        se = self.coefficients.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 \
            else np.zeros(len(self.feature_names))
        return dict(zip(self.feature_names, map(float, se)))


def _better(kind, a, b):
    return a > b if kind == "logistic" else a < b


def _one_repeat(data, args):
    X, y, kind, grid, names = data
    tr, va, te = args
    scaler, Xtr = standardize(X[tr])
    Xva = scaler.transform(X[va])
    best = None
    for lam in grid:
        model = fit(kind, Xtr, y[tr], lam, names)
        s = model.score(Xva, y[va])
        if best is None or _better(kind, s, best[0]):
            best = (s, model)
    model = best[1]
    return model.score(scaler.transform(X[te]), y[te]), model.lam, model.weights


def run_protocol(dataset: Dataset, kind: str, repeats: int = DEFAULT_REPEATS, seed: int = 0,
                 features: str | Sequence[str] | None = None,
                 grid: Sequence[float] = LAMBDA_GRID, workers: int = 1,
                 label: str = "") -> EvalReport:
    """Repeated 70/10/20 splits with validation grid search over lambda.

    Each repeat standardizes on its training rows, fits one model per grid
    value, keeps the best on validation (first in grid order on ties) and
    reports its test metric.  Splits depend only on (seed, repeat, targets),
    so different feature sets evaluated with one seed are paired.
    """
    if len(dataset) < 10:
        raise ValueError("protocol needs at least 10 rows")
    names = dataset.resolve(features)
    X = dataset.columns(names)
    y = dataset.y
    splits = repeat_splits(y, kind, repeats, seed)
    results = parallel_map(_one_repeat, splits, workers, (X, y, kind, tuple(grid), tuple(names)))
    return EvalReport(kind, names,
                      np.array([r[0] for r in results]),
                      np.array([r[1] for r in results]),
                      np.array([r[2] for r in results]).reshape(repeats, len(names)),
                      seed, label or (features if isinstance(features, str) else "custom"))


def majority_baseline(dataset: Dataset, repeats: int = DEFAULT_REPEATS, seed: int = 0) -> np.ndarray:
    """Test accuracy of predicting the training majority class on the protocol's splits."""
    y = dataset.y
    out = []
    for tr, _, te in repeat_splits(y, "logistic", repeats, seed):
        majority = float(np.mean(y[tr]) >= 0.5)
        out.append(float(np.mean(y[te] == majority)))
    return np.array(out)


@dataclass
class Comparison:
    reports: dict[str, EvalReport]
    tests: dict[tuple[str, str], TestResult] = field(default_factory=dict)


def compare_feature_sets(dataset: Dataset, kind: str, feature_sets: Sequence[str],
                         repeats: int = DEFAULT_REPEATS, seed: int = 0,
                         reference: str = "all", workers: int = 1) -> Comparison:
    """Evaluate several feature sets on identical splits and Wilcoxon-test
    ``reference`` against each of the others on the paired per-run metrics."""
    reports = {fs: run_protocol(dataset, kind, repeats, seed, fs, workers=workers, label=fs)
               for fs in feature_sets}
    tests = {}
    if reference in reports:
        for a, b in itertools.product([reference], feature_sets):
            if a != b:
                tests[(a, b)] = wilcoxon_signed_rank(reports[a].metrics, reports[b].metrics)
    return Comparison(reports, tests)
