"""Unigram language models and the two distances built on them."""
from __future__ import annotations

import hashlib
import itertools
import json
import math
import os
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

if TYPE_CHECKING:
    from genealogy.corpus import CorpusIndex
    from genealogy.graph import GenealogyEdge

TOKENIZER_VERSION = "alnum-lower-1"
DEFAULT_ALPHA = 0.01
DEFAULT_MIN_UNIQUE_MEMBERS = 100
TOP_PARENTS = 20

_TOKEN_RE = re.compile(r"[^\W_]+")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on runs of non-alphanumeric characters."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class UnigramLM:
    """Additively smoothed unigram model with one shared unseen bucket.

    p(t) = (count(t) + alpha) / (total + alpha * (V + 1))
    """

    token_counts: dict[str, int]
    total: int
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("smoothing mass must be positive")

    @classmethod
    def from_tokens(cls, tokens: Iterable[str], alpha: float = DEFAULT_ALPHA) -> "UnigramLM":
        counts = Counter(tokens)
        return cls(dict(counts), sum(counts.values()), alpha)

    @property
    def vocabulary_size(self) -> int:
        return len(self.token_counts)

    @property
    def smoothing_mass(self) -> float:
        return self.alpha

    @property
    def _norm(self) -> float:
        return self.total + self.alpha * (self.vocabulary_size + 1)

    @property
    def unseen_prob(self) -> float:
        return self.alpha / self._norm

    def prob(self, token: str) -> float:
        return (self.token_counts.get(token, 0) + self.alpha) / self._norm

    def top_tokens(self, n: int) -> list[str]:
        return [t for t, _ in sorted(self.token_counts.items(), key=lambda kv: (-kv[1], kv[0]))[:n]]


def build_lm(tokens: Iterable[str], alpha: float = DEFAULT_ALPHA) -> UnigramLM:
    return UnigramLM.from_tokens(tokens, alpha)


def cross_entropy(lm: UnigramLM, tokens: Sequence[str]) -> float:
    """Bits per token of ``tokens`` under ``lm``."""
    if len(tokens) == 0:
        raise ValueError("cross entropy of an empty token sequence is undefined")
    counts = Counter(tokens)
    total = sum(c * math.log2(lm.prob(t)) for t, c in counts.items())
    return -total / len(tokens)


def _distribution(lm: UnigramLM, vocab: Sequence[str]) -> np.ndarray:
    # last slot: this model's unseen bucket
    p = np.array([lm.token_counts[t] + lm.alpha if t in lm.token_counts else 0.0
                  for t in vocab] + [lm.alpha])
    return p / lm._norm


def lm_distance(a: UnigramLM, b: UnigramLM) -> float:
    """Base-2 Jensen-Shannon divergence over the union vocabulary.

    Each model keeps its unseen-bucket mass on a single extra outcome, so both
    vectors are proper distributions over the same support.
    """
    vocab = sorted(set(a.token_counts) | set(b.token_counts))
    p = _distribution(a, vocab)
    q = _distribution(b, vocab)
    m = 0.5 * (p + q)
    js = 0.0
    for x in (p, q):
        nz = x > 0
        js += 0.5 * float(np.sum(x[nz] * np.log2(x[nz] / m[nz])))
    return min(1.0, max(0.0, js))


class LanguageModels:
    """Memoizing source of interval language models over one index.

    ``community(c, t0, t1)`` covers the posts of ``c`` in ``[t0, t1)`` and is
    absent (``None``) when fewer than ``min_unique_members`` users posted.
    ``corpus(t0, t1)`` covers every post in the interval.  When ``cache_dir``
    is set, models are also persisted as JSON keyed by community, interval,
    tokenizer version and smoothing mass.
    """

    def __init__(self, index: "CorpusIndex", alpha: float = DEFAULT_ALPHA,
                 min_unique_members: int = DEFAULT_MIN_UNIQUE_MEMBERS,
                 cache_dir: str | os.PathLike | None = None):
        self.index = index
        self.alpha = alpha
        self.min_unique_members = min_unique_members
        self.cache_dir = cache_dir
        self._memo: dict[tuple, UnigramLM | None] = {}

    def _key(self, community, t0, t1, min_unique):
        return (community, t0, t1, self.index.tokenizer_version, self.alpha, min_unique)

    def _disk_path(self, key):
        digest = hashlib.sha1(json.dumps(key).encode()).hexdigest()
        return os.path.join(self.cache_dir, f"lm-{digest}.json")

    def _get(self, key, ids_fn):
        if key in self._memo:
            return self._memo[key]
        lm = None
        path = self._disk_path(key) if self.cache_dir else None
        if path and os.path.exists(path):
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
            if data is not None:
                lm = UnigramLM(data["counts"], data["total"], self.alpha)
        else:
            ids = ids_fn()
            users = {self.index.posts[i].user_id for i in ids}
            if users and len(users) >= key[-1]:
                lm = build_lm(itertools.chain.from_iterable(self.index.tokens[i] for i in ids),
                              self.alpha)
            if path:
                os.makedirs(self.cache_dir, exist_ok=True)
                with open(path, "w", encoding="utf-8") as fh:
                    json.dump(None if lm is None else
                              {"counts": lm.token_counts, "total": lm.total}, fh)
        self._memo[key] = lm
        return lm

    def community(self, community: str, t0: int, t1: int) -> UnigramLM | None:
        if t0 >= t1:
            raise ValueError("empty interval")
        key = self._key(community, t0, t1, self.min_unique_members)
        return self._get(key, lambda: self.index.community_window(community, t0, t1))

    def corpus(self, t0: int, t1: int) -> UnigramLM | None:
        if t0 >= t1:
            raise ValueError("empty interval")
        key = self._key(None, t0, t1, 1)
        return self._get(key, lambda: self.index.corpus_window(t0, t1))


def community_month_lm(community: str, interval: tuple[int, int], index: "CorpusIndex",
                       min_unique_members: int = DEFAULT_MIN_UNIQUE_MEMBERS,
                       alpha: float = DEFAULT_ALPHA) -> UnigramLM | None:
    t0, t1 = interval
    return LanguageModels(index, alpha, min_unique_members).community(community, t0, t1)


@dataclass(frozen=True)
class LanguageStats:
    avg: float
    max: float
    std: float
    parents: tuple[str, ...] = field(default=())


def parent_language_stats(child: str, edges: Sequence["GenealogyEdge"], window: int,
                          index: "CorpusIndex", lms: LanguageModels,
                          top: int = TOP_PARENTS) -> LanguageStats | None:
    """Pairwise JS distances among the heaviest parents with a usable model.

    Models cover the ``window`` before the child's creation.  At most ``top``
    parents are used (weight descending, then parent id).  ``None`` when fewer
    than two parents qualify.
    """
    t1 = index.creation_time(child)
    t0 = t1 - window
    ranked = sorted((e for e in edges if e.child == child), key=lambda e: (-e.weight, e.parent))
    chosen = []
    for e in ranked:
        lm = lms.community(e.parent, t0, t1)
        if lm is not None:
            chosen.append((e.parent, lm))
            if len(chosen) == top:
                break
    if len(chosen) < 2:
        return None
    d = np.array([lm_distance(a, b) for (_, a), (_, b) in itertools.combinations(chosen, 2)])
    return LanguageStats(float(d.mean()), float(d.max()), float(d.std()),
                         tuple(p for p, _ in chosen))
