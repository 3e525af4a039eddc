import pytest

from helpers import DAY, WINDOW
from genealogy.corpus import build_index, events_to_text
from genealogy.graph import parent_edges
from genealogy.synth import (EPOCH, CommunityPlan, ConfigError, GroundTruth, SynthConfig,
                             early_member_config, era_config, generate_corpus, growth_config,
                             random_config)


def _roots(n=2, size=20):
    return [CommunityPlan(f"r{i}", EPOCH + i * DAY, size, join_gap=60) for i in range(n)]


def _check_against_truth(events, truth, ks):
    idx = build_index(events)
    for child in idx.communities:
        for k in ks:
            if k > len(truth.members[child]):
                continue
            edges, stats = parent_edges(child, k, truth.window, idx)
            assert {e.parent: e.weight for e in edges} == truth.weights(child, k)
            expected = truth.parent_stats(child, k)
            assert stats.num_parents == expected["num_parents"]
            assert stats.num_parents_weight_at_least == expected["num_parents_weight_at_least"]
            assert stats.max_parent_weight == expected["max_parent_weight"]
            assert stats.fraction_new_users == expected["fraction_new_users"]


class TestGenerate:
    def test_single_planted_parent(self):
        plan = CommunityPlan("child", EPOCH + 10 * DAY, 30, (("r0", 0.3),))
        events, truth = generate_corpus(SynthConfig(1, _roots() + [plan]))
        realized = truth.weights("child", 10)
        assert set(realized) <= {"r0"}
        assert all(round(w * 10) == w * 10 and 0 < w <= 1 for w in realized.values())
        _check_against_truth(events, truth, [10])

    def test_quota_recovers_planted_weight(self):
        plan = CommunityPlan("child", EPOCH + 10 * DAY, 10, (("r0", 0.3),), tracked=10,
                             assignment="quota")
        events, truth = generate_corpus(SynthConfig(1, _roots() + [plan]))
        edges, stats = parent_edges("child", 10, WINDOW, build_index(events))
        assert [(e.parent, e.weight) for e in edges] == [("r0", 0.3)]
        assert stats.fraction_new_users == 0.7

    def test_deterministic(self):
        a, ta = generate_corpus(random_config(9))
        b, tb = generate_corpus(random_config(9))
        assert events_to_text(a) == events_to_text(b)
        assert ta.to_json() == tb.to_json()

    def test_seeds_differ(self):
        assert generate_corpus(random_config(1))[0] != generate_corpus(random_config(2))[0]

    def test_twenty_communities(self):
        events, truth = generate_corpus(random_config(4, n_communities=20))
        assert len(truth.members) == 20
        _check_against_truth(events, truth, [1, 5, 10, 20])

    def test_quota_assignment_is_exact(self):
        events, truth = generate_corpus(era_config(0))
        assert truth.weights("a0", 10) == {"root0": 0.5, "root1": 0.3}
        assert truth.weights("b3", 10) == {f"root{i}": 0.1 for i in range(1, 6)}
        assert truth.parent_stats("b3", 10)["fraction_new_users"] == 0.5
        _check_against_truth(events, truth, [10])

    def test_sizes_and_creation_times(self):
        events, truth = generate_corpus(random_config(5))
        idx = build_index(events)
        assert truth.sizes == {c: idx.size(c) for c in idx.communities}
        assert truth.creation_time == {c: idx.creation_time(c) for c in idx.communities}
        for c, users in truth.members.items():
            assert [u for u, _ in idx.members[c][:len(users)]] == users

    @pytest.mark.parametrize("make", [growth_config, early_member_config, era_config])
    def test_presets_match_truth(self, make):
        events, truth = generate_corpus(make(0))
        _check_against_truth(events, truth, [10, 20])

    def test_truth_refuses_unplanned_members(self):
        _, truth = generate_corpus(random_config(0))
        child = next(iter(truth.members))
        with pytest.raises(ValueError):
            truth.weights(child, len(truth.members[child]) + 1)

    def test_truth_json_round_trip(self):
        _, truth = generate_corpus(random_config(0))
        assert GroundTruth.from_json(truth.to_json()) == truth


class TestValidation:
    def test_weights_exceeding_one(self):
        plan = CommunityPlan("child", EPOCH + 10 * DAY, 10, (("r0", 0.7), ("r1", 0.5)))
        with pytest.raises(ConfigError):
            generate_corpus(SynthConfig(0, _roots() + [plan]))

    def test_weights_plus_new_users_exceeding_one(self):
        plan = CommunityPlan("child", EPOCH + 10 * DAY, 10, (("r0", 0.6),), new_user_fraction=0.5)
        with pytest.raises(ConfigError):
            generate_corpus(SynthConfig(0, _roots() + [plan]))

    def test_parent_must_precede_child(self):
        plan = CommunityPlan("child", EPOCH, 10, (("r1", 0.5),))
        with pytest.raises(ConfigError):
            generate_corpus(SynthConfig(0, _roots() + [plan]))

    def test_unknown_parent(self):
        plan = CommunityPlan("child", EPOCH + 10 * DAY, 10, (("nope", 0.5),))
        with pytest.raises(ConfigError):
            generate_corpus(SynthConfig(0, _roots() + [plan]))

    def test_leftover_mass_needs_extra_community(self):
        plan = CommunityPlan("child", EPOCH + 10 * DAY, 10, (("r0", 0.3), ("r1", 0.3)),
                             new_user_fraction=0.1)
        with pytest.raises(ConfigError):
            generate_corpus(SynthConfig(0, _roots() + [plan]))

    def test_duplicate_names(self):
        with pytest.raises(ConfigError):
            generate_corpus(SynthConfig(0, _roots() + _roots()))

    def test_creation_before_first_window(self):
        with pytest.raises(ConfigError):
            generate_corpus(SynthConfig(0, [CommunityPlan("r", WINDOW, 5)]))
