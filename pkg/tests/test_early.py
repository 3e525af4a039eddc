import math
from collections import Counter

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings, strategies as st

from helpers import DAY, T0, WINDOW, first_members, post
from genealogy.corpus import build_index
from genealogy.early import (FEATURE_NAMES, MAX_MATCH_DISTANCE, NoActivityError,
                             build_early_dataset, community_entropy, extract_user_features,
                             match_negative, sample_tuples)
from genealogy.graph import GenealogyEdge, GenealogyGraph, build_genealogy
from genealogy.lm import LanguageModels, build_lm, tokenize
from genealogy.synth import early_member_config, generate_corpus, random_config


def _graph(n_edges):
    edges = tuple(GenealogyEdge(f"p{i}", "c", 0.1, 10) for i in range(n_edges))
    return GenealogyGraph(10, WINDOW, edges, {})


def _posts(user, community, n, end=T0, step=3600):
    return [post(user, community, end - (i + 1) * step) for i in range(n)]


class TestSampleTuples:
    def test_fewer_edges_than_requested(self):
        assert sample_tuples(_graph(3), 10, 0) == [("p0", "c"), ("p1", "c"), ("p2", "c")]

    def test_deterministic(self):
        assert sample_tuples(_graph(50), 10, 4) == sample_tuples(_graph(50), 10, 4)

    def test_without_replacement(self):
        picks = sample_tuples(_graph(50), 20, 1)
        assert len(set(picks)) == 20

    def test_empty_graph(self):
        with pytest.raises(ValueError):
            sample_tuples(_graph(0), 1, 0)

    def test_uniform_over_edges(self):
        graph = _graph(5)
        counts = Counter(sample_tuples(graph, 1, seed)[0] for seed in range(100_000))
        assert scipy.stats.chisquare(list(counts.values())).pvalue > 0.01


class TestMatchNegative:
    def _index(self, candidates):
        events = [post("founder", "P", T0 - 300 * DAY), post("pos", "C", T0)]
        events += _posts("pos", "P", 7)
        for user, n in candidates.items():
            events += _posts(user, "P", n)
        return build_index(events)

    def test_nearest_count(self):
        idx = self._index({"six": 6, "twenty": 20})
        assert match_negative("pos", "P", "C", 1, WINDOW, idx) == "six"

    def test_distance_above_five_is_dropped(self):
        idx = self._index({"thirteen": 13})
        assert match_negative("pos", "P", "C", 1, WINDOW, idx) is None

    def test_ties_broken_by_user_id(self):
        idx = self._index({"bob": 8, "amy": 6})
        assert match_negative("pos", "P", "C", 1, WINDOW, idx) == "amy"

    def test_early_members_are_not_candidates(self):
        idx = self._index({"six": 6})
        events = list(idx.posts) + [post("six", "C", T0 + 10)]
        assert match_negative("pos", "P", "C", 2, WINDOW, build_index(events)) is None
        # a later joiner outside the first k is still a valid negative
        assert match_negative("pos", "P", "C", 1, WINDOW, build_index(events)) == "six"

    def test_matches_linear_scan(self):
        rng = np.random.default_rng(0)
        counts = {f"cand{i:02d}": int(rng.integers(1, 15)) for i in range(50)}
        idx = self._index(counts)
        expected = min(counts, key=lambda u: (abs(counts[u] - 7), u))
        assert match_negative("pos", "P", "C", 1, WINDOW, idx) == expected


class TestUserFeatures:
    def test_uniform_over_four_communities(self):
        events = [post("x", f"c{i}", T0 - 100 * DAY) for i in range(4)]
        events += [post("u", f"c{i}", T0 - (i + 1) * DAY) for i in range(4)]
        idx = build_index(events)
        f = extract_user_features("u", "c0", T0, WINDOW, idx)
        assert f["community_entropy"] == 2.0
        assert f["fraction_in_parent"] == 0.25

    def test_all_posts_in_parent(self):
        idx = build_index(_posts("u", "P", 3))
        f = extract_user_features("u", "P", T0, WINDOW, idx)
        assert f["fraction_in_parent"] == 1.0
        assert f["community_entropy"] == 0.0
        assert f["parent_num_posts"] == f["global_num_posts"] == 3.0

    def test_single_post_gap_is_window_length(self):
        idx = build_index(_posts("u", "P", 1))
        f = extract_user_features("u", "P", T0, WINDOW, idx)
        assert f["parent_avg_time_gap"] == WINDOW

    def test_no_activity(self):
        idx = build_index([post("u", "P", T0 - 2 * WINDOW)])
        with pytest.raises(NoActivityError):
            extract_user_features("u", "P", T0, WINDOW, idx)

    def test_window_must_be_positive(self):
        idx = build_index(_posts("u", "P", 1))
        with pytest.raises(ValueError):
            extract_user_features("u", "P", T0, 0, idx)

    def test_matches_straight_line_oracle(self):
        events, _ = generate_corpus(random_config(3, n_communities=10))
        idx = build_index(events)
        lms = LanguageModels(idx, 0.01, 1)
        checked = 0
        for child in idx.communities:
            for user, t in first_members(events, child)[:5]:
                mine = [e for e in events if e.user_id == user and t - WINDOW <= e.timestamp < t]
                if not mine:
                    continue
                parent = sorted({e.community_id for e in mine})[0]
                got = extract_user_features(user, parent, t, WINDOW, idx, lms)
                expected = oracle_user_features(events, user, parent, t)
                for name in FEATURE_NAMES:
                    assert got[name] == pytest.approx(expected[name], abs=1e-9, nan_ok=True), name
                checked += 1
        assert checked >= 5


def oracle_user_features(events, user, parent, t, window=WINDOW, alpha=0.01):
    t0 = t - window
    in_window = [e for e in events if t0 <= e.timestamp < t]
    mine = sorted((e for e in in_window if e.user_id == user), key=lambda e: e.timestamp)
    f = {}
    for scope, posts, pool in (("parent", [e for e in mine if e.community_id == parent],
                                [e for e in in_window if e.community_id == parent]),
                               ("global", mine, in_window)):
        f[f"{scope}_num_posts"] = float(len(posts))
        f[f"{scope}_avg_time_gap"] = ((posts[-1].timestamp - posts[0].timestamp) / (len(posts) - 1)
                                      if len(posts) > 1 else float(window))
        diffs = []
        for e in posts:
            fb = sorted(x.feedback for x in in_window if x.community_id == e.community_id)
            mid = len(fb) // 2
            median = fb[mid] if len(fb) % 2 else (fb[mid - 1] + fb[mid]) / 2
            diffs.append(e.feedback - median)
        f[f"{scope}_feedback"] = sum(diffs) / len(diffs) if diffs else math.nan
        lm = build_lm([tok for e in pool for tok in tokenize(e.text)], alpha) if pool else None
        per_post = [tokenize(e.text) for e in posts if tokenize(e.text)]
        if lm is None or not per_post:
            f[f"{scope}_language_distance"] = f[f"{scope}_language_distance_std"] = math.nan
            f[f"{scope}_language_missing"] = 1.0
        else:
            flat = [tok for toks in per_post for tok in toks]
            f[f"{scope}_language_distance"] = -sum(math.log2(lm.prob(x)) for x in flat) / len(flat)
            ce = [-sum(math.log2(lm.prob(x)) for x in toks) / len(toks) for toks in per_post]
            mean = sum(ce) / len(ce)
            f[f"{scope}_language_distance_std"] = math.sqrt(sum((c - mean) ** 2 for c in ce) / len(ce))
            f[f"{scope}_language_missing"] = 0.0
    f["fraction_in_parent"] = f["parent_num_posts"] / f["global_num_posts"]
    counts = Counter(e.community_id for e in mine)
    f["community_entropy"] = -sum(c / len(mine) * math.log2(c / len(mine)) for c in counts.values()) + 0.0
    return f


@given(st.lists(st.sampled_from("abcdefgh"), min_size=1, max_size=40))
def test_entropy_bounds(communities):
    h = community_entropy(communities)
    assert 0.0 <= h <= math.log2(len(set(communities))) + 1e-12


@pytest.fixture(scope="module")
def built():
    events, _ = generate_corpus(early_member_config(0, n_children=3, tracked=30))
    idx = build_index(events)
    children = [c for c in idx.communities if c.startswith("child")]
    return idx, build_genealogy(idx, children, 30)


class TestDataset:
    def test_balanced_and_within_distance(self, built):
        idx, graph = built
        data, pairs = build_early_dataset(idx, graph, 100, seed=0, min_unique_members=5)
        assert len(pairs) > 20
        assert data.y.sum() * 2 == len(data)
        assert np.array_equal(np.bincount(data.extra["pair_id"].astype(int)), np.full(len(pairs), 2))
        for p in pairs:
            early = {u for u, _ in idx.first_members(p.child, graph.k)}
            assert p.positive in early and p.negative not in early
            lo, hi = p.match_time - WINDOW, p.match_time
            n_pos = len(idx.user_window(p.positive, lo, hi, p.parent))
            n_neg = len(idx.user_window(p.negative, lo, hi, p.parent))
            assert abs(n_pos - n_neg) <= MAX_MATCH_DISTANCE

    def test_removing_filter_only_adds_pairs(self, built):
        idx, graph = built
        _, strict = build_early_dataset(idx, graph, 100, seed=0)
        _, loose = build_early_dataset(idx, graph, 100, seed=0, max_distance=10 ** 9)
        assert set(strict) <= set(loose)

    def test_workers_do_not_change_dataset(self, built):
        idx, graph = built
        a, _ = build_early_dataset(idx, graph, 100, seed=0, workers=1)
        b, _ = build_early_dataset(idx, graph, 100, seed=0, workers=3)
        assert a.ids == b.ids
        assert np.array_equal(a.X, b.X, equal_nan=True)


@settings(max_examples=20)
@given(st.integers(0, 1000))
def test_interplay_ranges(seed):
    events, _ = generate_corpus(random_config(seed))
    idx = build_index(events)
    for child in idx.communities:
        for user, t in idx.first_members(child, 3):
            recent = idx.user_window(user, t - WINDOW, t)
            if not recent:
                continue
            comms = {idx.posts[i].community_id for i in recent}
            f = extract_user_features(user, sorted(comms)[0], t, WINDOW, idx)
            assert 0 < f["fraction_in_parent"] <= 1
            assert 0 <= f["community_entropy"] <= math.log2(len(comms)) + 1e-12
