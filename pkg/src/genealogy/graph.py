"""Genealogy edges, per-child parent statistics, and their aggregate curves.

A member's recent activity is read over ``[t - window, t)`` where ``t`` is the
member's own first post in the child.  Only communities created strictly
before the child count as parents.
"""
from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

import numpy as np

from genealogy._parallel import parallel_map
from genealogy.corpus import CorpusIndex

DAY = 86_400
DEFAULT_WINDOW = 30 * DAY
DEFAULT_THRESHOLDS = (0.05, 0.1)
DISPLAY_EDGE_FILTER = 0.01


class InsufficientMembersError(ValueError):
    pass


@dataclass(frozen=True)
class GenealogyEdge:
    parent: str
    child: str
    weight: float
    k: int

    @property
    def count(self) -> int:
        return round(self.weight * self.k)


@dataclass(frozen=True)
class ParentStats:
    child: str
    k: int
    num_parents: int
    num_parents_weight_at_least: dict[float, int]
    max_parent_weight: float
    fraction_new_users: float

    def as_dict(self) -> dict[str, float]:
        out = {"num_parents": float(self.num_parents),
               "max_parent_weight": self.max_parent_weight,
               "fraction_new_users": self.fraction_new_users}
        for th, n in sorted(self.num_parents_weight_at_least.items()):
            out[threshold_name(th)] = float(n)
        return out


def threshold_name(theta: float) -> str:
    return f"num_parents_w>={theta:g}"


def recent_communities(user: str, t: int, window: int, index: CorpusIndex) -> frozenset[str]:
    if window <= 0:
        raise ValueError("window must be positive")
    return frozenset(index.posts[i].community_id for i in index.user_window(user, t - window, t))


def member_parent_sets(child: str, k: int, window: int, index: CorpusIndex) -> list[frozenset[str]]:
    """Recent communities created before ``child`` for each of its first ``k`` members."""
    if k < 1:
        raise ValueError("k must be >= 1")
    members = index.members[child]
    if len(members) < k:
        raise InsufficientMembersError(f"{child} has {len(members)} members, need {k}")
    created = index.creation_time(child)
    out = []
    for user, t in members[:k]:
        recent = recent_communities(user, t, window, index)
        out.append(frozenset(c for c in recent if index.creation_time(c) < created))
    return out


def _aggregate(child: str, k: int, parent_sets: Sequence[frozenset[str]],
               thresholds: Sequence[float]) -> tuple[list[GenealogyEdge], ParentStats]:
    counts = Counter()
    for s in parent_sets[:k]:
        counts.update(s)
    edges = [GenealogyEdge(p, child, n / k, k) for p, n in sorted(counts.items())]
    with_history = sum(1 for s in parent_sets[:k] if s)
    # compare on integer counts so thresholds like 0.1 are not hit by float error
    at_least = {th: sum(1 for n in counts.values() if n >= th * k - 1e-9) for th in thresholds}
    stats = ParentStats(
        child=child, k=k, num_parents=len(edges),
        num_parents_weight_at_least=at_least,
        max_parent_weight=max(counts.values()) / k if counts else 0.0,
        fraction_new_users=1.0 - with_history / k,
    )
    return edges, stats


def parent_edges(child: str, k: int, window: int, index: CorpusIndex,
                 thresholds: Sequence[float] = DEFAULT_THRESHOLDS
                 ) -> tuple[list[GenealogyEdge], ParentStats]:
    return _aggregate(child, k, member_parent_sets(child, k, window, index), thresholds)


def emergence_curve(child: str, ks: Sequence[int], window: int, index: CorpusIndex,
                    thresholds: Sequence[float] = DEFAULT_THRESHOLDS) -> dict[int, ParentStats]:
    sets = member_parent_sets(child, max(ks), window, index)
    return {k: _aggregate(child, k, sets, thresholds)[1] for k in ks}


@dataclass(frozen=True)
class GenealogyGraph:
    k: int
    window: int
    edges: tuple[GenealogyEdge, ...]
    stats: dict[str, ParentStats]

    def parents_of(self, child: str) -> list[GenealogyEdge]:
        return [e for e in self.edges if e.child == child]

    def __len__(self):
        return len(self.edges)


def _child_edges(index, args):
    child, k, window, thresholds = args
    return parent_edges(child, k, window, index, thresholds)


def build_genealogy(index: CorpusIndex, children: Iterable[str], k: int,
                    window: int = DEFAULT_WINDOW,
                    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
                    workers: int = 1) -> GenealogyGraph:
    children = sorted(children)
    results = parallel_map(_child_edges, [(c, k, window, tuple(thresholds)) for c in children],
                           workers, index)
    edges = []
    stats = {}
    for child, (es, st) in zip(children, results):
        edges.extend(es)
        stats[child] = st
    return GenealogyGraph(k, window, tuple(edges), stats)


def mean_se(values: Sequence[float]) -> tuple[float, float, int]:
    """Mean and standard error (sample std / sqrt(n)); SE is 0 when n == 1."""
    x = np.asarray(values, dtype=float)
    n = len(x)
    if n == 0:
        raise ValueError("no values")
    se = float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return float(x.mean()), se, n


@dataclass(frozen=True)
class CurvePoint:
    k: int
    property: str
    mean: float
    se: float
    n: int


@dataclass(frozen=True)
class SeriesPoint:
    bucket_start: int
    k: int
    property: str
    mean: float
    se: float
    n: int


def _curve(index, args):
    child, ks, window, thresholds = args
    return emergence_curve(child, ks, window, index, thresholds)


def emergence_table(index: CorpusIndex, children: Iterable[str], ks: Sequence[int],
                    window: int = DEFAULT_WINDOW,
                    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
                    workers: int = 1) -> tuple[list[CurvePoint], dict[str, dict[int, ParentStats]]]:
    """Per-k mean and SE of every ParentStats property over ``children``."""
    children = sorted(children)
    curves = parallel_map(_curve, [(c, tuple(ks), window, tuple(thresholds))
                                   for c in children], workers, index)
    per_child = dict(zip(children, curves))
    rows = []
    for k in ks:
        values = defaultdict(list)
        for c in children:
            for name, v in per_child[c][k].as_dict().items():
                values[name].append(v)
        for name in sorted(values):
            rows.append(CurvePoint(k, name, *mean_se(values[name])))
    return rows, per_child


def property_time_series(index: CorpusIndex, ks: Sequence[int], window: int, bucket: int,
                         children: Iterable[str],
                         thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
                         workers: int = 1) -> list[SeriesPoint]:
    """Group children by creation-time bucket and average each property.

    Buckets are ``[m * bucket, (m + 1) * bucket)`` in epoch seconds; empty
    buckets are omitted.
    """
    if bucket <= 0:
        raise ValueError("bucket must be positive")
    children = sorted(children)
    if not children:
        raise ValueError("no eligible children")
    _, per_child = emergence_table(index, children, ks, window, thresholds, workers)
    groups = defaultdict(list)
    for c in children:
        groups[index.creation_time(c) // bucket * bucket].append(c)
    rows = []
    for start in sorted(groups):
        for k in ks:
            values = defaultdict(list)
            for c in groups[start]:
                for name, v in per_child[c][k].as_dict().items():
                    values[name].append(v)
            for name in sorted(values):
                rows.append(SeriesPoint(start, k, name, *mean_se(values[name])))
    return rows


def write_edge_list(edges: Iterable[GenealogyEdge], fh: TextIO,
                    min_weight: float | None = None) -> int:
    """Tab-separated ``parent child weight k``; ``min_weight`` keeps weight > min_weight."""
    fh.write("parent\tchild\tweight\tk\n")
    n = 0
    for e in edges:
        if min_weight is not None and not e.weight > min_weight:
            continue
        fh.write(f"{e.parent}\t{e.child}\t{e.weight!r}\t{e.k}\n")
        n += 1
    return n


def read_edge_list(fh: TextIO) -> list[GenealogyEdge]:
    header = fh.readline().rstrip("\n").split("\t")
    if header != ["parent", "child", "weight", "k"]:
        raise ValueError(f"unexpected edge-list header {header}")
    out = []
    for line in fh:
        if line.strip():
            p, c, w, k = line.rstrip("\n").split("\t")
            out.append(GenealogyEdge(p, c, float(w), int(k)))
    return out
