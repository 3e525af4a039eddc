"""Significance tables and plot-ready exports.

Everything written here is a tab-separated table with a header row.  Nothing
is rendered; figures are left to whatever plotting tool reads the tables.
"""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from genealogy.dataset import Dataset
from genealogy.graph import GenealogyEdge, write_edge_list
from genealogy.stats import TestResult, bonferroni, pearson, t_test

EXPORT_KINDS = ("edges", "emergence", "timeseries", "growth", "early")


class MissingStageError(RuntimeError):
    def __init__(self, stage: str, path: str):
        super().__init__(f"missing {path}; run `genealogy {stage}` first")
        self.stage = stage
        self.path = path


@dataclass(frozen=True)
class FeatureTest:
    feature: str
    result: TestResult
    n: int


def feature_significance(dataset: Dataset, test: str = "t",
                         target: np.ndarray | None = None) -> list[FeatureTest]:
    """Per-feature tests with Bonferroni correction over the features tested.

    ``test="t"``: Welch t between rows with y == 1 and y == 0.
    ``test="pearson"``: correlation of each feature with ``target`` (defaults
    to ``dataset.y``).  Features that cannot be tested (constant, too few
    values) get p = 1 and direction "0".
    """
    raw = []
    for j, name in enumerate(dataset.feature_names):
        x = dataset.X[:, j]
        try:
            if test == "t":
                ok = ~np.isnan(x)
                res = t_test(x[ok & (dataset.y == 1)], x[ok & (dataset.y == 0)])
                n = int(ok.sum())
            elif test == "pearson":
                tgt = dataset.y if target is None else target
                ok = ~np.isnan(x) & ~np.isnan(tgt)
                res = pearson(x[ok], tgt[ok])
                n = int(ok.sum())
            else:
                raise ValueError(f"unknown test {test!r}")
        except ValueError:
            res, n = TestResult(math.nan, 1.0, 1.0, "0"), int((~np.isnan(x)).sum())
        raw.append((name, res, n))
    corrected = bonferroni([r.p_value for _, r, _ in raw])
    return [FeatureTest(name, TestResult(r.statistic, r.p_value, cp, r.direction), n)
            for (name, r, n), cp in zip(raw, corrected)]


def _writer(path):
    fh = open(path, "w", encoding="utf-8", newline="")
    return fh, csv.writer(fh, delimiter="\t", lineterminator="\n")


def _table(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> str:
    fh, w = _writer(path)
    with fh:
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return path


def _export_eval(prefix: str, results: dict, out_dir: str) -> list[str]:
    """``results``: {"runs": [...], "comparisons": [...], "significance": [...]}
    as produced by the CLI's eval stages."""
    runs = results["runs"]
    paths = [
        _table(os.path.join(out_dir, f"{prefix}_performance.tsv"),
               ["task", "k", "feature_set", "metric", "mean", "se", "n_runs"],
               [(r["task"], r["k"], r["feature_set"], r["metric"], r["mean"], r["se"],
                 len(r["metrics"])) for r in runs]),
        _table(os.path.join(out_dir, f"{prefix}_runs.tsv"),
               ["task", "k", "feature_set", "run", "metric_value", "lambda"],
               [(r["task"], r["k"], r["feature_set"], i, m, lam)
                for r in runs for i, (m, lam) in enumerate(zip(r["metrics"], r["lambdas"]))]),
        _table(os.path.join(out_dir, f"{prefix}_coefficients.tsv"),
               ["task", "k", "feature_set", "feature", "mean", "se"],
               [(r["task"], r["k"], r["feature_set"], f, r["coef_mean"][f], r["coef_se"][f])
                for r in runs for f in r["features"]]),
        _table(os.path.join(out_dir, f"{prefix}_comparisons.tsv"),
               ["task", "k", "set_a", "set_b", "statistic", "p_value", "direction"],
               [(c["task"], c["k"], c["a"], c["b"], c["statistic"], c["p_value"], c["direction"])
                for c in results["comparisons"]]),
        _table(os.path.join(out_dir, f"{prefix}_significance.tsv"),
               ["task", "k", "feature", "statistic", "p_value", "corrected_p", "arrows", "n"],
               [(s["task"], s["k"], s["feature"], s["statistic"], s["p_value"], s["corrected_p"],
                 s["arrows"], s["n"]) for s in results["significance"]]),
    ]
    return paths


def export_plot_data(results, kind: str, out_dir: str,
                     edge_filter: float | None = None) -> list[str]:
    """Write plot-ready tables for one result kind; returns the paths written.

    - ``edges``: {k: [GenealogyEdge, ...]} -> edges_k{k}.tsv
    - ``emergence``: [CurvePoint-like dicts] -> emergence.tsv (k, property, mean, se, n)
    - ``timeseries``: [SeriesPoint-like dicts] -> timeseries.tsv
    - ``growth`` / ``early``: eval results -> *_performance/_runs/_coefficients/
      _comparisons/_significance.tsv
    """
    os.makedirs(out_dir, exist_ok=True)
    if kind == "edges":
        paths = []
        for k, edges in sorted(results.items()):
            path = os.path.join(out_dir, f"edges_k{k}.tsv")
            with open(path, "w", encoding="utf-8") as fh:
                write_edge_list(edges, fh, edge_filter)
            paths.append(path)
        return paths
    if kind == "emergence":
        return [_table(os.path.join(out_dir, "emergence.tsv"), ["k", "property", "mean", "se", "n"],
                       [(r["k"], r["property"], r["mean"], r["se"], r["n"]) for r in results])]
    if kind == "timeseries":
        return [_table(os.path.join(out_dir, "timeseries.tsv"),
                       ["bucket_start", "k", "property", "mean", "se", "n"],
                       [(r["bucket_start"], r["k"], r["property"], r["mean"], r["se"], r["n"])
                        for r in results])]
    if kind in ("growth", "early"):
        return _export_eval(kind, results, out_dir)
    raise ValueError(f"unknown export kind {kind!r}; expected one of {EXPORT_KINDS}")


def edges_from_records(records: Iterable[dict]) -> list[GenealogyEdge]:
    return [GenealogyEdge(r["parent"], r["child"], r["weight"], r["k"]) for r in records]
