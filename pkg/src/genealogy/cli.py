"""Command-line pipeline.

Stages write intermediate files into ``--out-dir`` so long runs can resume:

    synth            events.jsonl + ground_truth.json
    ingest           index.bin (from --input)
    genealogy        genealogy_k{k}.json
    emergence        emergence.json
    timeseries       timeseries.json
    growth-dataset   growth_k{k}.tsv
    growth-eval      growth_eval.json
    early-dataset    early_k{k}.tsv
    early-eval       early_eval.json
    export           figures/*.tsv

Each run also writes ``manifest_<stage>.json`` with its configuration, seeds
and input hashes.  Exit codes: 0 ok, 1 user error, 2 internal error.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import sys
import time

from genealogy import __version__
from genealogy.corpus import (CorpusError, build_index, eligible_children, load_index,
                              parse_events, save_index, write_events)
from genealogy.dataset import Dataset
from genealogy.graph import (DAY, DEFAULT_THRESHOLDS, DISPLAY_EDGE_FILTER, build_genealogy,
                             emergence_table, property_time_series)
from genealogy.growth import build_growth_dataset, empirical_median_size, rate_dataset
from genealogy.early import build_early_dataset
from genealogy.models import compare_feature_sets
from genealogy.synth import (ConfigError, early_member_config, era_config, generate_corpus,
                             growth_config, random_config)
from genealogy.tables import MissingStageError, edges_from_records, export_plot_data, \
    feature_significance

CACHE_ENV = "GENEALOGY_CACHE_DIR"
DEFAULT_KS = tuple(range(10, 101, 10))
GROWTH_SETS = ("temporal", "basic_parent", "parent_meta", "new_user", "all")
EARLY_SETS = ("parent", "global", "interplay", "all")
PRESETS = {"random": random_config, "growth": growth_config,
           "early": early_member_config, "eras": era_config}

log = logging.getLogger("genealogy")


class UserError(Exception):
    pass


@dataclasses.dataclass
class RunConfig:
    out_dir: str
    input: str | None = None
    index: str | None = None
    ks: tuple[int, ...] = DEFAULT_KS
    window_days: float = 30.0
    min_members: int = 100
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    repeats: int = 30
    seed: int = 0
    workers: int = 1
    created_after: int | None = None
    created_until: int | None = None

    def __post_init__(self):
        if any(k < 1 for k in self.ks) or list(self.ks) != sorted(self.ks):
            raise UserError("--k values must be positive and sorted")
        if self.window_days <= 0 or self.min_members < 1 or self.repeats < 1:
            raise UserError("window, member threshold and repeats must be positive")

    @property
    def window(self) -> int:
        return int(round(self.window_days * DAY))


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(cfg: RunConfig, stage: str, args: argparse.Namespace, argv: list[str],
                    inputs: list[str], outputs: list[str]) -> None:
    manifest = {
        "stage": stage,
        "version": __version__,
        "argv": argv,
        "config": {k: v for k, v in vars(args).items() if k != "func"},
        "seeds": {"seed": cfg.seed},
        "inputs": {p: _sha256(p) for p in inputs if os.path.exists(p)},
        "outputs": sorted(os.path.relpath(p, cfg.out_dir) for p in outputs),
    }
    with open(os.path.join(cfg.out_dir, f"manifest_{stage}.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def _path(cfg: RunConfig, name: str) -> str:
    return os.path.join(cfg.out_dir, name)


def _require(path: str, stage: str) -> str:
    if not os.path.exists(path):
        raise MissingStageError(stage, path)
    return path


def _index_path(cfg: RunConfig) -> str:
    return cfg.index or _path(cfg, "index.bin")


def _load(cfg: RunConfig):
    return load_index(_require(_index_path(cfg), "ingest"))


def _children(cfg: RunConfig, index, k: int) -> list[str]:
    kids = eligible_children(index, cfg.min_members, cfg.created_after, cfg.created_until)
    kids = sorted(c for c in kids if index.size(c) >= k)
    if not kids:
        raise UserError("no eligible child communities; check --min-members and creation bounds")
    return kids


def _dump(path: str, obj) -> str:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
    return path


def _read_json(path: str, stage: str):
    with open(_require(path, stage), encoding="utf-8") as fh:
        return json.load(fh)


# ------------------------------------------------------------------ stages


def cmd_synth(cfg, args):
    config = PRESETS[args.preset](cfg.seed)
    events, truth = generate_corpus(config)
    ev_path = _path(cfg, "events.jsonl")
    with open(ev_path, "w", encoding="utf-8") as fh:
        write_events(events, fh)
    gt_path = _path(cfg, "ground_truth.json")
    with open(gt_path, "w", encoding="utf-8") as fh:
        fh.write(truth.to_json())
    print(f"wrote {len(events)} events for {len(truth.members)} communities to {ev_path}")
    return [], [ev_path, gt_path]


def cmd_ingest(cfg, args):
    if not cfg.input:
        raise UserError("ingest needs --input")
    parsed = parse_events(cfg.input)
    index = build_index(parsed.events)
    path = _index_path(cfg)
    save_index(index, path)
    print(f"{len(parsed.events)} events, {parsed.skipped} skipped, "
          f"{len(index.registry)} communities -> {path}")
    return [cfg.input], [path]


def cmd_genealogy(cfg, args):
    index = _load(cfg)
    outputs = []
    for k in cfg.ks:
        g = build_genealogy(index, _children(cfg, index, k), k, cfg.window, cfg.thresholds,
                            cfg.workers)
        path = _dump(_path(cfg, f"genealogy_k{k}.json"), {
            "k": k, "window": cfg.window,
            "edges": [dataclasses.asdict(e) for e in g.edges],
            "stats": [{"child": c, **s.as_dict()} for c, s in sorted(g.stats.items())],
        })
        outputs.append(path)
        print(f"k={k}: {len(g.stats)} children, {len(g.edges)} edges")
    return [_index_path(cfg)], outputs


def cmd_emergence(cfg, args):
    index = _load(cfg)
    rows, per_child = emergence_table(index, _children(cfg, index, max(cfg.ks)), cfg.ks,
                                      cfg.window, cfg.thresholds, cfg.workers)
    path = _dump(_path(cfg, "emergence.json"), {
        "ks": list(cfg.ks), "rows": [dataclasses.asdict(r) for r in rows],
        "per_child": {c: {str(k): s.as_dict() for k, s in d.items()} for c, d in per_child.items()},
    })
    return [_index_path(cfg)], [path]


def cmd_timeseries(cfg, args):
    index = _load(cfg)
    rows = property_time_series(index, cfg.ks, cfg.window, int(args.bucket_days * DAY),
                                _children(cfg, index, max(cfg.ks)), cfg.thresholds, cfg.workers)
    path = _dump(_path(cfg, "timeseries.json"), [dataclasses.asdict(r) for r in rows])
    return [_index_path(cfg)], [path]


def cmd_growth_dataset(cfg, args):
    index = _load(cfg)
    children = _children(cfg, index, max(max(cfg.ks), args.base_rank))
    median = empirical_median_size(index, children)
    outputs = []
    for k in cfg.ks:
        data = build_growth_dataset(index, children, k, cfg.window, median, args.base_rank,
                                    cfg.thresholds, args.alpha, args.min_lm_members, cfg.workers,
                                    os.environ.get(CACHE_ENV) or None)
        path = _path(cfg, f"growth_k{k}.tsv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            data.to_tsv(fh)
        outputs.append(path)
        print(f"k={k}: {len(data)} children, median size {median}, "
              f"{int(data.y.sum())} above median")
    return [_index_path(cfg)], outputs


def _load_dataset(path: str, stage: str) -> Dataset:
    with open(_require(path, stage), encoding="utf-8") as fh:
        return Dataset.from_tsv(fh)


def _eval_runs(task, k, comparison):
    runs = []
    for name, rep in comparison.reports.items():
        runs.append({"task": task, "k": k, "feature_set": name, "metric": rep.metric_name,
                     "mean": rep.mean, "se": rep.se, "metrics": rep.metrics.tolist(),
                     "lambdas": rep.lambdas.tolist(), "features": rep.feature_names,
                     "coef_mean": rep.coefficient_means, "coef_se": rep.coefficient_se})
    comps = [{"task": task, "k": k, "a": a, "b": b, "statistic": t.statistic,
              "p_value": t.p_value, "direction": t.direction}
             for (a, b), t in comparison.tests.items()]
    return runs, comps


def _significance_rows(task, k, tests):
    return [{"task": task, "k": k, "feature": t.feature, "statistic": t.result.statistic,
             "p_value": t.result.p_value, "corrected_p": t.result.corrected_p,
             "arrows": t.result.arrows, "n": t.n} for t in tests]


def cmd_growth_eval(cfg, args):
    runs, comps, sig, inputs = [], [], [], []
    for k in cfg.ks:
        path = _path(cfg, f"growth_k{k}.tsv")
        data = _load_dataset(path, "growth-dataset")
        inputs.append(path)
        rate = rate_dataset(data)
        for task, kind, d in (("classification", "logistic", data), ("regression", "ridge", rate)):
            if len(d) < 10:
                log.warning("k=%d %s: only %d rows, skipped", k, task, len(d))
                continue
            r, c = _eval_runs(task, k, compare_feature_sets(d, kind, GROWTH_SETS, cfg.repeats,
                                                            cfg.seed, workers=cfg.workers))
            runs += r
            comps += c
        if k == max(cfg.ks):
            sig += _significance_rows("classification", k, feature_significance(data, "t"))
            if len(rate) >= 3:
                sig += _significance_rows("regression", k, feature_significance(rate, "pearson"))
    path = _dump(_path(cfg, "growth_eval.json"),
                 {"runs": runs, "comparisons": comps, "significance": sig})
    return inputs, [path]


def cmd_early_dataset(cfg, args):
    index = _load(cfg)
    outputs = []
    for k in cfg.ks:
        graph = build_genealogy(index, _children(cfg, index, k), k, cfg.window, cfg.thresholds,
                                cfg.workers)
        data, pairs = build_early_dataset(index, graph, args.tuples, cfg.seed, cfg.window,
                                          alpha=args.alpha, min_unique_members=args.min_lm_members,
                                          workers=cfg.workers,
                                          cache_dir=os.environ.get(CACHE_ENV) or None)
        path = _path(cfg, f"early_k{k}.tsv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            data.to_tsv(fh)
        outputs.append(path)
        print(f"k={k}: {len(pairs)} matched pairs")
    return [_index_path(cfg)], outputs


def cmd_early_eval(cfg, args):
    runs, comps, sig, inputs = [], [], [], []
    for k in cfg.ks:
        path = _path(cfg, f"early_k{k}.tsv")
        data = _load_dataset(path, "early-dataset")
        inputs.append(path)
        if len(data) < 10:
            log.warning("k=%d: only %d rows, skipped", k, len(data))
            continue
        r, c = _eval_runs("early_member", k, compare_feature_sets(
            data, "logistic", EARLY_SETS, cfg.repeats, cfg.seed, workers=cfg.workers))
        runs += r
        comps += c
        if k == max(cfg.ks):
            sig += _significance_rows("early_member", k, feature_significance(data, "t"))
    path = _dump(_path(cfg, "early_eval.json"),
                 {"runs": runs, "comparisons": comps, "significance": sig})
    return inputs, [path]


def cmd_export(cfg, args):
    fig_dir = _path(cfg, "figures")
    kinds = ["edges", "emergence", "timeseries", "growth", "early"] if args.kind == "all" \
        else [args.kind]
    inputs, outputs = [], []
    for kind in kinds:
        if kind == "edges":
            results = {}
            for k in cfg.ks:
                path = _path(cfg, f"genealogy_k{k}.json")
                results[k] = edges_from_records(_read_json(path, "genealogy")["edges"])
                inputs.append(path)
        else:
            stage = {"emergence": "emergence", "timeseries": "timeseries",
                     "growth": "growth-eval", "early": "early-eval"}[kind]
            name = {"growth": "growth_eval.json", "early": "early_eval.json"}.get(kind, f"{kind}.json")
            path = _path(cfg, name)
            results = _read_json(path, stage)
            if kind == "emergence":
                results = results["rows"]
            inputs.append(path)
        outputs += export_plot_data(results, kind, fig_dir, args.edge_filter)
    for p in outputs:
        print(p)
    return inputs, outputs


# ------------------------------------------------------------------ parser


def _ks(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad k list {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="event log (newline-delimited records)")
    common.add_argument("--index", help="index cache file (default: OUT_DIR/index.bin)")
    common.add_argument("--k", type=_ks, default=DEFAULT_KS,
                        help="comma-separated early-member counts (default 10,20,...,100)")
    common.add_argument("--window-days", type=float, default=30.0)
    common.add_argument("--min-members", type=int, default=100,
                        help="children need strictly more members than this")
    common.add_argument("--created-after", type=int, default=None)
    common.add_argument("--created-until", type=int, default=None)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--repeats", type=int, default=30)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--out-dir", default=".")
    common.add_argument("--edge-filter", type=float, nargs="?", const=DISPLAY_EDGE_FILTER,
                        default=None, help="only export edges with weight above this "
                                           f"(bare flag: {DISPLAY_EDGE_FILTER})")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="genealogy", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, **kw):
        p = sub.add_parser(name, parents=[common], **kw)
        p.set_defaults(func=func)
        return p

    p = add("synth", cmd_synth, help="write a synthetic corpus with planted genealogy")
    p.add_argument("--preset", choices=sorted(PRESETS), default="random")
    add("ingest", cmd_ingest, help="parse an event log and build the index")
    add("genealogy", cmd_genealogy, help="genealogy edges and parent stats per k")
    add("emergence", cmd_emergence, help="parent-stat curves over k")
    p = add("timeseries", cmd_timeseries, help="parent stats by child creation period")
    p.add_argument("--bucket-days", type=float, default=30.0)
    for name, func in (("growth-dataset", cmd_growth_dataset), ("early-dataset", cmd_early_dataset)):
        p = add(name, func)
        p.add_argument("--alpha", type=float, default=0.01, help="LM additive smoothing")
        p.add_argument("--min-lm-members", type=int, default=100,
                       help="unique posters needed for a community language model")
        if name == "growth-dataset":
            p.add_argument("--base-rank", type=int, default=100)
        else:
            p.add_argument("--tuples", type=int, default=10_000)
    add("growth-eval", cmd_growth_eval, help="growth classification and rate regression")
    add("early-eval", cmd_early_eval, help="early-member prediction")
    p = add("export", cmd_export, help="plot-ready tables from finished stages")
    p.add_argument("--kind", choices=["all", "edges", "emergence", "timeseries", "growth", "early"],
                   default="all")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig(out_dir=args.out_dir, input=args.input, index=args.index, ks=args.k,
                        window_days=args.window_days, min_members=args.min_members,
                        repeats=args.repeats, seed=args.seed, workers=args.workers,
                        created_after=args.created_after, created_until=args.created_until)
        os.makedirs(cfg.out_dir, exist_ok=True)
        if os.environ.get(CACHE_ENV):
            os.makedirs(os.environ[CACHE_ENV], exist_ok=True)
        t0 = time.time()
        inputs, outputs = args.func(cfg, args)
        _write_manifest(cfg, args.command, args, argv, inputs, outputs)
        log.info("%s finished in %.1fs", args.command, time.time() - t0)
        return 0
    except (UserError, CorpusError, ConfigError, MissingStageError, FileNotFoundError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
