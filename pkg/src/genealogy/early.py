"""Matched-pair dataset for predicting who becomes an early member.

Each (parent, child) edge contributes its positives: first-k members of the
child who posted in the parent during the window before their own first post
in the child.  Every positive is paired with the parent member closest in
parent post count over that same window who is not among the child's first k
members; pairs farther apart than ``MAX_MATCH_DISTANCE`` posts are dropped.
Both users' features are measured over the positive's window.
"""
from __future__ import annotations

import itertools
import logging
import math
import statistics
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from genealogy._parallel import parallel_map
from genealogy.corpus import CorpusIndex
from genealogy.dataset import Dataset
from genealogy.graph import DEFAULT_WINDOW, GenealogyGraph
from genealogy.lm import LanguageModels, UnigramLM, cross_entropy

MAX_MATCH_DISTANCE = 5
DEFAULT_TUPLES = 10_000

log = logging.getLogger(__name__)

SCOPE_FEATURES = ["num_posts", "avg_time_gap", "feedback", "language_distance",
                  "language_distance_std", "language_missing"]
FEATURE_GROUPS = {
    "parent": [f"parent_{n}" for n in SCOPE_FEATURES],
    "global": [f"global_{n}" for n in SCOPE_FEATURES],
    "interplay": ["fraction_in_parent", "community_entropy"],
}
FEATURE_NAMES = [n for ns in FEATURE_GROUPS.values() for n in ns]


class NoActivityError(ValueError):
    pass


@dataclass(frozen=True)
class MatchedPair:
    parent: str
    child: str
    positive: str
    negative: str
    match_time: int


def sample_tuples(graph: GenealogyGraph, n: int, rng_seed: int) -> list[tuple[str, str]]:
    """Up to ``n`` distinct (parent, child) edges, uniformly without replacement."""
    pairs = sorted({(e.parent, e.child) for e in graph.edges})
    if not pairs:
        raise ValueError("genealogy graph has no edges")
    if n >= len(pairs):
        return pairs
    rng = np.random.default_rng(rng_seed)
    return [pairs[i] for i in rng.choice(len(pairs), size=n, replace=False)]


def _parent_post_counts(parent: str, t0: int, t1: int, index: CorpusIndex) -> Counter:
    return Counter(index.posts[i].user_id for i in index.community_window(parent, t0, t1))


def match_negative(positive: str, parent: str, child: str, k: int, window: int,
                   index: CorpusIndex, max_distance: int = MAX_MATCH_DISTANCE) -> str | None:
    early = {u for u, _ in index.first_members(child, k)}
    match_time = dict(index.first_members(child, k))[positive]
    counts = _parent_post_counts(parent, match_time - window, match_time, index)
    if positive not in counts:
        raise ValueError(f"{positive} has no recent posts in {parent}")
    target = counts[positive]
    best = None
    for user, n in counts.items():
        if user in early:
            continue
        key = (abs(n - target), user)
        if best is None or key < best:
            best = key
    if best is None or best[0] > max_distance:
        return None
    return best[1]


def positives_for(parent: str, child: str, k: int, window: int,
                  index: CorpusIndex) -> list[tuple[str, int]]:
    """First-k members of ``child`` with a post in ``parent`` before joining."""
    return [(u, t) for u, t in index.first_members(child, k)
            if index.user_window(u, t - window, t, parent)]


class FeatureContext:
    """Per-index caches for window medians and language models."""

    def __init__(self, index: CorpusIndex, lms: LanguageModels | None = None):
        self.index = index
        self.lms = lms or LanguageModels(index)
        self._medians: dict[tuple[str, int, int], float] = {}

    def median_feedback(self, community: str, t0: int, t1: int) -> float:
        key = (community, t0, t1)
        if key not in self._medians:
            ids = self.index.community_window(community, t0, t1)
            self._medians[key] = statistics.median(self.index.posts[i].feedback for i in ids)
        return self._medians[key]


def _scope(ids: Sequence[int], t0: int, t1: int, lm: UnigramLM | None,
           ctx: FeatureContext) -> dict[str, float]:
    index = ctx.index
    posts = [index.posts[i] for i in ids]
    out = {"num_posts": float(len(posts))}
    if len(posts) >= 2:
        out["avg_time_gap"] = (posts[-1].timestamp - posts[0].timestamp) / (len(posts) - 1)
    else:
        out["avg_time_gap"] = float(t1 - t0)
    if posts:
        out["feedback"] = float(np.mean([p.feedback - ctx.median_feedback(p.community_id, t0, t1)
                                         for p in posts]))
    else:
        out["feedback"] = math.nan
    token_lists = [index.tokens[i] for i in ids if index.tokens[i]]
    if lm is None or not token_lists:
        out["language_distance"] = out["language_distance_std"] = math.nan
        out["language_missing"] = 1.0
    else:
        out["language_distance"] = cross_entropy(lm, list(itertools.chain.from_iterable(token_lists)))
        per_post = [cross_entropy(lm, t) for t in token_lists]
        out["language_distance_std"] = float(np.std(per_post))
        out["language_missing"] = 0.0
    return out


def community_entropy(communities: Sequence[str]) -> float:
    counts = np.array(list(Counter(communities).values()), dtype=float)
    p = counts / counts.sum()
    return float(max(0.0, -np.sum(p * np.log2(p))))


def extract_user_features(user: str, parent: str, t: int, window: int, index: CorpusIndex,
                          lang: FeatureContext | LanguageModels | None = None) -> dict[str, float]:
    """Parent-scope, global-scope and interplay features over ``[t - window, t)``."""
    if window <= 0:
        raise ValueError("window must be positive")
    ctx = lang if isinstance(lang, FeatureContext) else FeatureContext(index, lang)
    t0 = t - window
    global_ids = index.user_window(user, t0, t)
    if not global_ids:
        raise NoActivityError(f"{user} has no posts in the window before {t}")
    parent_ids = index.user_window(user, t0, t, parent)
    f = {}
    for name, v in _scope(parent_ids, t0, t, ctx.lms.community(parent, t0, t), ctx).items():
        f[f"parent_{name}"] = v
    for name, v in _scope(global_ids, t0, t, ctx.lms.corpus(t0, t), ctx).items():
        f[f"global_{name}"] = v
    f["fraction_in_parent"] = len(parent_ids) / len(global_ids)
    f["community_entropy"] = community_entropy([index.posts[i].community_id for i in global_ids])
    return {n: f[n] for n in FEATURE_NAMES}


def _tuple_rows(index, args):
    parent, child, k, window, lm_args, max_distance = args
    ctx = FeatureContext(index, LanguageModels(index, *lm_args))
    rows = []
    for positive, t in positives_for(parent, child, k, window, index):
        negative = match_negative(positive, parent, child, k, window, index, max_distance)
        if negative is None:
            continue
        try:
            fp = extract_user_features(positive, parent, t, window, index, ctx)
            fn = extract_user_features(negative, parent, t, window, index, ctx)
        except NoActivityError as exc:
            log.info("dropping pair (%s, %s): %s", positive, negative, exc)
            continue
        rows.append((MatchedPair(parent, child, positive, negative, t), fp, fn))
    return rows


def build_early_dataset(index: CorpusIndex, graph: GenealogyGraph, n_tuples: int = DEFAULT_TUPLES,
                        seed: int = 0, window: int | None = None,
                        max_distance: int = MAX_MATCH_DISTANCE, alpha: float = 0.01,
                        min_unique_members: int = 100, workers: int = 1,
                        cache_dir: str | None = None) -> tuple[Dataset, list[MatchedPair]]:
    """Balanced dataset: rows come in (positive, negative) pairs sharing ``pair_id``."""
    window = graph.window if window is None else window
    tuples = sample_tuples(graph, n_tuples, seed)
    items = [(p, c, graph.k, window, (alpha, min_unique_members, cache_dir), max_distance) for p, c in tuples]
    pairs, ids, X, y, pair_ids = [], [], [], [], []
    for rows in parallel_map(_tuple_rows, items, workers, index):
        for pair, fp, fn in rows:
            pid = len(pairs)
            pairs.append(pair)
            for user, feats, label in ((pair.positive, fp, 1.0), (pair.negative, fn, 0.0)):
                ids.append(f"{pair.parent}|{pair.child}|{user}")
                X.append([feats[n] for n in FEATURE_NAMES])
                y.append(label)
                pair_ids.append(pid)
    data = Dataset(ids, list(FEATURE_NAMES), np.array(X).reshape(len(ids), len(FEATURE_NAMES)),
                   np.array(y), {g: list(ns) for g, ns in FEATURE_GROUPS.items()},
                   {"pair_id": np.array(pair_ids, dtype=float)})
    return data, pairs
