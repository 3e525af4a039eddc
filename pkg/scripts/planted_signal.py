"""Recover planted structure from generated corpora and report test accuracy.

Growth: children whose early members come from popular parents grow larger.
Early adopters: members of a new child tend to be active across several
parent communities.  Prints mean +- SE over the repeated splits per feature set.
"""
import argparse

from genealogy.corpus import build_index
from genealogy.early import FEATURE_GROUPS, build_early_dataset
from genealogy.graph import build_genealogy
from genealogy.growth import build_growth_dataset, feature_groups
from genealogy.models import compare_feature_sets
from genealogy.synth import early_member_config, generate_corpus, growth_config


def children(index):
    return [c for c in index.communities if c.startswith("child")]


def report(title, comparison):
    print(title)
    for name, r in comparison.reports.items():
        print(f"  {name:>14}: {r.mean:.3f} +- {r.se:.3f}")
    for (a, b), t in comparison.tests.items():
        print(f"  {a} vs {b}: T+ = {t.statistic:g}, p = {t.p_value:.2g}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--repeats", type=int, default=30)
    ap.add_argument("--workers", type=int, default=4)
    args = ap.parse_args()

    idx = build_index(generate_corpus(growth_config(args.seed))[0])
    data = build_growth_dataset(idx, children(idx), 10, base_rank=30, min_unique_members=10,
                                workers=args.workers)
    comp = compare_feature_sets(data, "logistic", ["all", *feature_groups()], args.repeats,
                                args.seed, workers=args.workers)
    report(f"growth, {len(data)} children", comp)
    coef = comp.reports["all"].coefficient_means["max_parent_weight"]
    print(f"  max_parent_weight coefficient: {coef:+.3f}")

    idx = build_index(generate_corpus(early_member_config(args.seed))[0])
    graph = build_genealogy(idx, children(idx), 60, workers=args.workers)
    data, pairs = build_early_dataset(idx, graph, seed=args.seed, min_unique_members=10,
                                     workers=args.workers)
    comp = compare_feature_sets(data, "logistic", ["all", *FEATURE_GROUPS], args.repeats,
                                args.seed, workers=args.workers)
    report(f"early adopters, {len(pairs)} matched pairs", comp)


if __name__ == "__main__":
    main()
