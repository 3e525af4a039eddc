"""Labels and origin features for growth classification and rate regression."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from genealogy._parallel import parallel_map
from genealogy.corpus import CorpusIndex
from genealogy.dataset import Dataset
from genealogy.graph import (DEFAULT_THRESHOLDS, DEFAULT_WINDOW, GenealogyEdge, ParentStats,
                             parent_edges, threshold_name)
from genealogy.lm import LanguageModels, parent_language_stats

BASE_RANK = 100

log = logging.getLogger(__name__)


class IntegrityError(ValueError):
    pass


def feature_groups(thresholds: Sequence[float] = DEFAULT_THRESHOLDS) -> dict[str, list[str]]:
    return {
        "temporal": ["creation_time", "avg_time_gap"],
        "basic_parent": ["num_parents", *(threshold_name(t) for t in thresholds),
                         "max_parent_weight", "mean_parent_weight", "std_parent_weight"],
        "parent_meta": ["avg_parent_size", "min_parent_size", "max_parent_size",
                        "std_parent_size", "weighted_avg_parent_size", "parent_size_missing",
                        "avg_language_distance", "max_language_distance",
                        "std_language_distance", "language_missing"],
        "new_user": ["fraction_new_users"],
    }


def feature_names(thresholds: Sequence[float] = DEFAULT_THRESHOLDS) -> list[str]:
    return [n for ns in feature_groups(thresholds).values() for n in ns]


def empirical_median_size(index: CorpusIndex, eligible: Iterable[str]) -> int:
    """Lower median of final member counts."""
    sizes = sorted(index.size(c) for c in eligible)
    if not sizes:
        raise ValueError("no eligible communities")
    return sizes[(len(sizes) - 1) // 2]


def growth_targets(child: str, median: int, index: CorpusIndex,
                   base_rank: int = BASE_RANK) -> tuple[bool, float | None]:
    """(size > median, ln(t_median - t_base) in seconds or None)."""
    members = index.members[child]
    if len(members) < base_rank:
        raise ValueError(f"{child} has fewer than {base_rank} members")
    if len(members) <= median:
        return False, None
    gap = members[median - 1][1] - members[base_rank - 1][1]
    if gap <= 0:
        raise IntegrityError(f"{child}: member {median} joined {gap}s after member {base_rank}")
    return True, math.log(gap)


@dataclass
class GrowthExample:
    child: str
    features: dict[str, float]
    label: bool
    rate_target: float | None


def parent_activity_size(parent: str, t0: int, t1: int, index: CorpusIndex) -> float:
    """ln of distinct posters in [t0, t1); a parent with none counts as 1."""
    return math.log(max(1, len(index.active_users(parent, t0, t1))))


def extract_growth_features(child: str, k: int, window: int, index: CorpusIndex,
                            lms: LanguageModels,
                            edges: Sequence[GenealogyEdge] | None = None,
                            stats: ParentStats | None = None,
                            thresholds: Sequence[float] = DEFAULT_THRESHOLDS) -> dict[str, float]:
    """All growth features from the first ``k`` members.

    Values that cannot be computed (no parents, fewer than two parents with a
    language model) are NaN with the family's missing flag set to 1; the
    evaluation harness imputes them with the training mean.
    """
    if edges is None or stats is None:
        edges, stats = parent_edges(child, k, window, index, thresholds)
    first = index.first_members(child, k)
    created = index.creation_time(child)
    f: dict[str, float] = {}

    f["creation_time"] = float(created)
    f["avg_time_gap"] = (first[-1][1] - first[0][1]) / (k - 1) if k > 1 else 0.0

    w = np.array([e.weight for e in edges])
    f["num_parents"] = float(stats.num_parents)
    for th in thresholds:
        f[threshold_name(th)] = float(stats.num_parents_weight_at_least[th])
    f["max_parent_weight"] = stats.max_parent_weight
    f["mean_parent_weight"] = float(w.mean()) if len(w) else 0.0
    f["std_parent_weight"] = float(w.std()) if len(w) else 0.0

    if len(edges):
        sizes = np.array([parent_activity_size(e.parent, created - window, created, index)
                          for e in edges])
        f["avg_parent_size"] = float(sizes.mean())
        f["min_parent_size"] = float(sizes.min())
        f["max_parent_size"] = float(sizes.max())
        f["std_parent_size"] = float(sizes.std())
        f["weighted_avg_parent_size"] = float(w @ sizes / w.sum())
        f["parent_size_missing"] = 0.0
    else:
        for name in ("avg_parent_size", "min_parent_size", "max_parent_size",
                     "std_parent_size", "weighted_avg_parent_size"):
            f[name] = math.nan
        f["parent_size_missing"] = 1.0

    lang = parent_language_stats(child, edges, window, index, lms)
    if lang is None:
        f["avg_language_distance"] = f["max_language_distance"] = math.nan
        f["std_language_distance"] = math.nan
        f["language_missing"] = 1.0
    else:
        f["avg_language_distance"] = lang.avg
        f["max_language_distance"] = lang.max
        f["std_language_distance"] = lang.std
        f["language_missing"] = 0.0

    f["fraction_new_users"] = stats.fraction_new_users
    return {name: f[name] for name in feature_names(thresholds)}


def _example(index, args):
    child, k, window, median, base_rank, thresholds, lm_args = args
    lms = LanguageModels(index, *lm_args)
    feats = extract_growth_features(child, k, window, index, lms, thresholds=thresholds)
    try:
        label, rate = growth_targets(child, median, index, base_rank)
    except IntegrityError as exc:
        log.warning("dropping %s: %s", child, exc)
        return None
    return GrowthExample(child, feats, label, rate)


def build_growth_dataset(index: CorpusIndex, children: Iterable[str], k: int,
                         window: int = DEFAULT_WINDOW, median: int | None = None,
                         base_rank: int = BASE_RANK,
                         thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
                         alpha: float = 0.01, min_unique_members: int = 100,
                         workers: int = 1, cache_dir: str | None = None) -> Dataset:
    """One row per child; target ``label`` plus a ``rate_target`` column (NaN
    when the child does not exceed the median)."""
    children = sorted(children)
    if median is None:
        median = empirical_median_size(index, children)
    items = [(c, k, window, median, base_rank, tuple(thresholds), (alpha, min_unique_members, cache_dir))
             for c in children]
    examples = [ex for ex in parallel_map(_example, items, workers, index) if ex is not None]
    names = feature_names(thresholds)
    X = np.array([[ex.features[n] for n in names] for ex in examples]).reshape(len(examples), len(names))
    return Dataset(
        ids=[ex.child for ex in examples], feature_names=names, X=X,
        y=np.array([float(ex.label) for ex in examples]),
        groups=feature_groups(thresholds),
        extra={"rate_target": np.array([math.nan if ex.rate_target is None else ex.rate_target
                                        for ex in examples])},
    )


def rate_dataset(growth: Dataset) -> Dataset:
    """Rows exceeding the median, with ``rate_target`` as the target."""
    return growth.rows(growth.y == 1).with_target("rate_target")
