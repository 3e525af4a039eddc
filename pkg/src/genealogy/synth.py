"""Deterministic synthetic corpora with planted genealogy.

Every member of every community is a fresh user.  Member ``r`` of community
``c`` first posts in ``c`` at ``creation + r * join_gap``.  Each tracked early
member is assigned a set of earlier communities (planted parents, an "extra"
pool, or nothing for new users) and gets 1..n posts in each of them inside its
own recency window, placed after that community's planned member block so
the planned member order of every community is never disturbed.

Because nothing else touches an early member's history, the assigned sets are
exactly the recent-community sets the pipeline must find.  ``GroundTruth``
keeps them, so recovered edges can be checked for exact equality.
"""
from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from genealogy.corpus import Event

DAY = 86_400
EPOCH = 1_230_768_000  # 2009-01-01T00:00:00Z
SHARED_VOCAB = ("the", "a", "of", "and", "to", "is", "in", "it", "this", "that")


class ConfigError(ValueError):
    pass


@dataclass
class CommunityPlan:
    name: str
    creation_time: int
    size: int
    parents: tuple[tuple[str, float], ...] = ()
    # None: everything not assigned to a parent is a new user
    new_user_fraction: float | None = None
    extra_pool: tuple[str, ...] | None = None
    maven_extra: int = 0
    tracked: int | None = None
    assignment: str = "random"
    join_gap: int = 600
    own_posts: tuple[int, int] | None = None

    @property
    def block_end(self) -> int:
        return self.creation_time + (self.size - 1) * self.join_gap

    @property
    def planted_weight(self) -> float:
        return sum(w for _, w in self.parents)

    @property
    def new_fraction(self) -> float:
        if self.new_user_fraction is None:
            return max(0.0, 1.0 - self.planted_weight)
        return self.new_user_fraction


@dataclass
class SynthConfig:
    seed: int
    communities: list[CommunityPlan]
    window: int = 30 * DAY
    history_posts: tuple[int, int] = (1, 3)
    own_posts: tuple[int, int] = (0, 2)
    activity_span: int = 60 * DAY
    title_len: tuple[int, int] = (2, 6)
    body_len: tuple[int, int] = (0, 10)
    feedback: tuple[int, int] = (-5, 50)
    vocab_per_topic: int = 30
    default_tracked: int = 100


@dataclass
class GroundTruth:
    window: int
    creation_time: dict[str, int]
    sizes: dict[str, int]
    members: dict[str, list[str]]
    recent: dict[str, list[list[str]]]
    topics: dict[str, list[str]] = field(default_factory=dict)

    def weights(self, child: str, k: int) -> dict[str, float]:
        # later joiners are history posters whose genealogy is not planned
        if k > len(self.members[child]):
            raise ValueError(f"{child}: only {len(self.members[child])} planned members")
        counts = Counter()
        for s in self.recent[child][:k]:
            counts.update(s)
        return {p: n / k for p, n in sorted(counts.items())}

    def parent_stats(self, child: str, k: int,
                     thresholds: Sequence[float] = (0.05, 0.1)) -> dict:
        w = self.weights(child, k)
        with_history = sum(1 for s in self.recent[child][:k] if s)
        return {
            "num_parents": len(w),
            "num_parents_weight_at_least": {
                th: sum(1 for p in w if round(w[p] * k) >= th * k - 1e-9) for th in thresholds},
            "max_parent_weight": max(w.values(), default=0.0),
            "fraction_new_users": 1.0 - with_history / k,
        }

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "GroundTruth":
        return cls(**json.loads(text))


def validate(config: SynthConfig) -> None:
    plans = {}
    for p in config.communities:
        if p.name in plans:
            raise ConfigError(f"duplicate community {p.name}")
        if p.size < 1 or p.join_gap < 1 or p.creation_time <= config.window:
            raise ConfigError(f"{p.name}: bad size, join gap or creation time")
        if p.assignment not in ("random", "quota"):
            raise ConfigError(f"{p.name}: unknown assignment {p.assignment!r}")
        plans[p.name] = p
    for p in config.communities:
        seen = set()
        for parent, w in p.parents:
            if parent not in plans or parent in seen:
                raise ConfigError(f"{p.name}: unknown or repeated parent {parent}")
            seen.add(parent)
            if not 0 < w <= 1:
                raise ConfigError(f"{p.name}: weight {w} outside (0, 1]")
            if plans[parent].block_end + 2 > p.creation_time:
                raise ConfigError(f"{p.name}: parent {parent} still filling its member block")
        if not 0 <= p.new_fraction <= 1:
            raise ConfigError(f"{p.name}: new-user fraction outside [0, 1]")
        if p.planted_weight + p.new_fraction > 1 + 1e-9:
            raise ConfigError(f"{p.name}: planted weights plus new-user fraction exceed 1")
        for e in p.extra_pool or ():
            if e not in plans or plans[e].block_end + 2 > p.creation_time:
                raise ConfigError(f"{p.name}: extra community {e} unusable")


def _topics(config: SynthConfig) -> dict[str, list[str]]:
    return {p.name: [f"c{ci}w{i}" for i in range(config.vocab_per_topic)]
            for ci, p in enumerate(config.communities)}


def generate_corpus(config: SynthConfig) -> tuple[list[Event], GroundTruth]:
    validate(config)
    rng = np.random.default_rng(config.seed)
    plans = sorted(config.communities, key=lambda p: (p.creation_time, p.name))
    by_name = {p.name: p for p in plans}
    topics = _topics(config)
    W = config.window

    def text(community: str, lo_hi: tuple[int, int]) -> str:
        n = int(rng.integers(lo_hi[0], lo_hi[1] + 1))
        pool = topics[community]
        words = [pool[rng.integers(len(pool))] if rng.random() < 0.8
                 else SHARED_VOCAB[rng.integers(len(SHARED_VOCAB))] for _ in range(n)]
        return " ".join(words)

    def post(user: str, community: str, t: int) -> Event:
        return Event(user, community, int(t), text(community, config.title_len),
                     text(community, config.body_len),
                     int(rng.integers(config.feedback[0], config.feedback[1] + 1)))

    events: list[Event] = []
    posters: dict[str, set[str]] = defaultdict(set)
    members: dict[str, list[str]] = {}
    recent: dict[str, list[list[str]]] = {}

    for plan in plans:
        c = plan.name
        T = plan.creation_time
        planted = [p for p, _ in plan.parents]
        usable = [q.name for q in plans if q.block_end + 2 <= T]
        pool = list(plan.extra_pool) if plan.extra_pool is not None \
            else [q for q in usable if q not in planted]
        tracked = min(plan.size, config.default_tracked if plan.tracked is None else plan.tracked)
        probs = [w for _, w in plan.parents] + [plan.new_fraction]
        extra_mass = max(0.0, 1.0 - sum(probs))
        if extra_mass > 1e-9 and not pool:
            raise ConfigError(f"{c}: {extra_mass:.3f} of early members need an extra community")
        probs.append(extra_mass)
        probs = np.array(probs) / sum(probs)
        slots = len(planted)  # category index of "new"; slots + 1 is "extra"

        if plan.assignment == "quota":
            counts = [int(round(w * tracked)) for _, w in plan.parents]
            n_new = min(int(round(plan.new_fraction * tracked)), tracked - sum(counts))
            if sum(counts) > tracked:
                raise ConfigError(f"{c}: quota exceeds {tracked} tracked members")
            cats = [i for i, n in enumerate(counts) for _ in range(n)] + [slots] * n_new
            cats += [slots + 1] * (tracked - len(cats))
            if slots + 1 in cats and not pool:
                raise ConfigError(f"{c}: quota leaves members without a community")
            categories = list(rng.permutation(cats))
        else:
            categories = list(rng.choice(len(probs), size=tracked, p=probs))

        members[c] = []
        recent[c] = []
        own_lo, own_hi = plan.own_posts or config.own_posts
        for r in range(plan.size):
            user = f"u{len(members)}_{r}"
            t_r = T + r * plan.join_gap
            history: list[str] = []
            if r < tracked:
                cat = int(categories[r])
                if cat < slots:
                    history.append(planted[cat])
                elif cat == slots + 1:
                    history.append(pool[rng.integers(len(pool))])
                if history and plan.maven_extra:
                    spare = [q for q in pool if q not in history]
                    m = min(len(spare), int(rng.integers(0, plan.maven_extra + 1)))
                    if m:
                        history.extend(spare[i] for i in rng.choice(len(spare), m, replace=False))
            for h in history:
                lo = max(t_r - W, by_name[h].block_end + 1)
                for _ in range(int(rng.integers(config.history_posts[0],
                                                config.history_posts[1] + 1))):
                    events.append(post(user, h, rng.integers(lo, t_r)))
                posters[h].add(user)
            events.append(post(user, c, t_r))
            posters[c].add(user)
            for _ in range(int(rng.integers(own_lo, own_hi + 1))):
                events.append(post(user, c, t_r + rng.integers(1, config.activity_span + 1)))
            members[c].append(user)
            recent[c].append(sorted(history))

    events.sort(key=lambda e: (e.timestamp, e.community_id, e.user_id, e.feedback, e.title, e.body))
    truth = GroundTruth(
        window=W,
        creation_time={p.name: p.creation_time for p in plans},
        sizes={c: len(u) for c, u in posters.items()},
        members=members, recent=recent, topics=topics,
    )
    return events, truth


# ---------------------------------------------------------------- presets


def random_config(seed: int, n_communities: int = 8, size_range: tuple[int, int] = (10, 40),
                  max_parents: int = 3, tracked: int | None = None) -> SynthConfig:
    """A small random DAG; roughly 300-1500 events at the defaults."""
    rng = np.random.default_rng([seed, 7])
    plans: list[CommunityPlan] = []
    t = EPOCH
    for i in range(n_communities):
        size = int(rng.integers(size_range[0], size_range[1] + 1))
        gap = int(rng.integers(300, 3600))
        ready = [p for p in plans if p.block_end + 2 <= t]
        parents: tuple = ()
        new = None
        if ready:
            n_par = int(rng.integers(0, min(max_parents, len(ready)) + 1))
            chosen = rng.choice(len(ready), size=n_par, replace=False)
            raw = rng.dirichlet(np.ones(n_par + 2))
            # floor to 3 decimals so the plan never exceeds a total of 1
            parents = tuple((ready[j].name, float(np.floor(w * 1000) / 1000))
                            for j, w in zip(chosen, raw[:n_par]) if w >= 0.001)
            new = float(np.floor(raw[n_par] * 1000) / 1000)
            if not any(p.name not in dict(parents) for p in ready):
                new = None
        plans.append(CommunityPlan(f"c{i:02d}", t, size, parents, new, join_gap=gap,
                                   maven_extra=int(rng.integers(0, 2)), tracked=tracked))
        t = plans[-1].block_end + int(rng.integers(2 * 3600, 10 * DAY))
    return SynthConfig(seed=seed, communities=plans)


def growth_config(seed: int, n_children: int = 120, n_roots: int = 6, base_rank: int = 30,
                  tracked: int = 20) -> SynthConfig:
    """Half the children get one dominant parent (weight 0.7) and grow large;
    the rest spread 0.6 over four parents and stay small."""
    rng = np.random.default_rng([seed, 11])
    roots = [CommunityPlan(f"root{i}", EPOCH + i * DAY, 80, join_gap=120, own_posts=(2, 6))
             for i in range(n_roots)]
    children = []
    t = EPOCH + 40 * DAY
    for j in range(n_children):
        high = bool(rng.random() < 0.5)
        picks = [roots[i].name for i in rng.choice(n_roots, size=4, replace=False)]
        if high:
            parents = ((picks[0], 0.7),)
            size = int(rng.integers(base_rank + 60, base_rank + 121))
        else:
            parents = tuple((p, 0.15) for p in picks)
            size = int(rng.integers(base_rank + 5, base_rank + 41))
        children.append(CommunityPlan(f"child{j:03d}", t, size, parents, tracked=tracked,
                                      join_gap=int(rng.integers(300, 1800))))
        t += int(rng.integers(DAY // 4, DAY))
    return SynthConfig(seed=seed, communities=roots + children, activity_span=200 * DAY)


def early_member_config(seed: int, n_roots: int = 5, n_children: int = 8,
                        maven_extra: int = 2, tracked: int = 60) -> SynthConfig:
    """Children's early members carry extra recent communities (0..maven_extra);
    root members post only in their root.  Children are spaced more than one
    window apart so that no child's early members are recent posters in a
    root while another child is recruiting from it."""
    rng = np.random.default_rng([seed, 13])
    span = (30 + 40 * n_children) * DAY
    roots = [CommunityPlan(f"root{i}", EPOCH + i * DAY, 200, join_gap=300,
                           own_posts=(span // (30 * DAY), 3 * span // (30 * DAY)))
             for i in range(n_roots)]
    children = []
    t = EPOCH + 30 * DAY
    for j in range(n_children):
        a, b = (roots[i].name for i in rng.choice(n_roots, size=2, replace=False))
        children.append(CommunityPlan(f"child{j:03d}", t, tracked + 10, ((a, 0.4), (b, 0.3)), 0.3,
                                      maven_extra=maven_extra, tracked=tracked,
                                      join_gap=int(rng.integers(300, 1800))))
        t += int(rng.integers(35 * DAY, 40 * DAY))
    return SynthConfig(seed=seed, communities=roots + children, activity_span=span)


def era_config(seed: int, per_era: int = 6, tracked: int = 10,
               era_gap_days: int = 120) -> SynthConfig:
    """Two eras of children with exact (quota) parent plans:
    era A has two parents at 0.5 and 0.3, era B five parents at 0.1."""
    roots = [CommunityPlan(f"root{i}", EPOCH + i * DAY, 30, join_gap=60) for i in range(6)]
    children = []
    t = EPOCH + 10 * DAY
    for j in range(per_era):
        children.append(CommunityPlan(f"a{j}", t + j * DAY, 20,
                                      (("root0", 0.5), ("root1", 0.3)), 0.2,
                                      tracked=tracked, assignment="quota"))
    t += era_gap_days * DAY
    for j in range(per_era):
        children.append(CommunityPlan(f"b{j}", t + j * DAY, 20,
                                      tuple((f"root{i}", 0.1) for i in range(1, 6)), 0.5,
                                      tracked=tracked, assignment="quota"))
    return SynthConfig(seed=seed, communities=roots + children)
