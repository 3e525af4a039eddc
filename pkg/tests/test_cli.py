import csv
import json
import os

import pytest

from genealogy import cli
from genealogy.corpus import build_index, load_index, parse_events
from genealogy.graph import parent_edges
from genealogy.synth import EPOCH, GroundTruth

DAY = 86_400
AFTER_ROOTS = str(EPOCH + 10 * DAY)


def run(*argv):
    return cli.main([str(a) for a in argv])


def read_tsv(path):
    with open(path, encoding="utf-8") as fh:
        return list(csv.reader(fh, delimiter="\t"))


@pytest.fixture(scope="module")
def random_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("random")
    common = ["--out-dir", out, "--k", "5,10", "--min-members", "9"]
    assert run("synth", "--preset", "random", "--seed", 3, "--out-dir", out) == 0
    assert run("ingest", "--input", out / "events.jsonl", *common) == 0
    for stage in ("genealogy", "emergence", "timeseries"):
        assert run(stage, *common) == 0
    assert run("export", "--kind", "edges", "--edge-filter", *common) == 0
    assert run("export", "--kind", "emergence", *common) == 0
    assert run("export", "--kind", "timeseries", *common) == 0
    return out


class TestGenealogyStages:
    def test_index_matches_events(self, random_run):
        index = load_index(random_run / "index.bin")
        assert index == build_index(parse_events(random_run / "events.jsonl").events)

    def test_genealogy_matches_modules_and_truth(self, random_run):
        index = load_index(random_run / "index.bin")
        truth = GroundTruth.from_json((random_run / "ground_truth.json").read_text())
        data = json.loads((random_run / "genealogy_k10.json").read_text())
        assert data["stats"]
        for row in data["stats"]:
            child = row["child"]
            edges, stats = parent_edges(child, 10, 30 * DAY, index)
            assert row == {"child": child, **stats.as_dict()}
            assert {e["parent"]: e["weight"] for e in data["edges"] if e["child"] == child} \
                == truth.weights(child, 10)

    def test_edge_export_filter(self, random_run):
        rows = read_tsv(random_run / "figures" / "edges_k10.tsv")
        assert rows[0] == ["parent", "child", "weight", "k"]
        assert all(float(r[2]) > 0.01 for r in rows[1:])

    def test_emergence_export_columns(self, random_run):
        rows = read_tsv(random_run / "figures" / "emergence.tsv")
        assert rows[0] == ["k", "property", "mean", "se", "n"]
        stored = json.loads((random_run / "emergence.json").read_text())["rows"]
        assert len(rows) - 1 == len(stored)
        assert {r[0] for r in rows[1:]} == {"5", "10"}

    def test_timeseries_export_columns(self, random_run):
        rows = read_tsv(random_run / "figures" / "timeseries.tsv")
        assert rows[0] == ["bucket_start", "k", "property", "mean", "se", "n"]

    def test_manifest(self, random_run):
        manifest = json.loads((random_run / "manifest_ingest.json").read_text())
        assert manifest["stage"] == "ingest"
        assert manifest["seeds"] == {"seed": 0}
        (path, digest), = manifest["inputs"].items()
        assert path.endswith("events.jsonl") and len(digest) == 64
        assert manifest["outputs"] == ["index.bin"]
        assert "--input" in manifest["argv"]

    def test_synth_is_reproducible(self, random_run, tmp_path):
        assert run("synth", "--preset", "random", "--seed", 3, "--out-dir", tmp_path) == 0
        assert (tmp_path / "events.jsonl").read_bytes() == (random_run / "events.jsonl").read_bytes()


@pytest.fixture(scope="module")
def growth_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("growth")
    common = ["--out-dir", out, "--k", "10", "--min-members", "30",
              "--created-after", AFTER_ROOTS, "--repeats", "3"]
    assert run("synth", "--preset", "growth", "--out-dir", out) == 0
    assert run("ingest", "--input", out / "events.jsonl", *common) == 0
    assert run("growth-dataset", "--base-rank", "30", "--min-lm-members", "10", *common) == 0
    assert run("growth-eval", *common) == 0
    assert run("export", "--kind", "growth", *common) == 0
    return out


class TestGrowthStages:
    def test_dataset_rows(self, growth_run):
        rows = read_tsv(growth_run / "growth_k10.tsv")
        assert rows[0][0].startswith("#groups")
        assert rows[1][0] == "id" and rows[1][-2:] == ["label", "rate_target"]
        assert len(rows) - 2 == 120

    def test_eval_tables(self, growth_run):
        perf = read_tsv(growth_run / "figures" / "growth_performance.tsv")
        assert perf[0] == ["task", "k", "feature_set", "metric", "mean", "se", "n_runs"]
        sets = {(r[0], r[2]) for r in perf[1:]}
        assert ("classification", "all") in sets and ("regression", "temporal") in sets
        assert all(r[6] == "3" for r in perf[1:])
        sig = read_tsv(growth_run / "figures" / "growth_significance.tsv")
        assert sig[0] == ["task", "k", "feature", "statistic", "p_value", "corrected_p", "arrows", "n"]
        comps = read_tsv(growth_run / "figures" / "growth_comparisons.tsv")
        assert {r[2] for r in comps[1:]} == {"all"}

    def test_eval_is_reproducible(self, growth_run, tmp_path):
        first = (growth_run / "growth_eval.json").read_bytes()
        assert run("growth-eval", "--out-dir", growth_run, "--k", "10", "--repeats", "3",
                   "--workers", "2") == 0
        assert (growth_run / "growth_eval.json").read_bytes() == first


class TestEarlyStages:
    def test_pipeline(self, tmp_path):
        common = ["--out-dir", tmp_path, "--k", "20", "--min-members", "60",
                  "--created-after", AFTER_ROOTS, "--repeats", "3"]
        assert run("synth", "--preset", "early", "--out-dir", tmp_path) == 0
        assert run("ingest", "--input", tmp_path / "events.jsonl", *common) == 0
        assert run("early-dataset", "--tuples", "4", "--min-lm-members", "10", *common) == 0
        assert run("early-eval", *common) == 0
        assert run("export", "--kind", "early", *common) == 0
        header = read_tsv(tmp_path / "early_k20.tsv")[1]
        assert header[-2:] == ["label", "pair_id"]
        perf = read_tsv(tmp_path / "figures" / "early_performance.tsv")
        assert {r[2] for r in perf[1:]} == {"parent", "global", "interplay", "all"}


class TestErrors:
    def test_missing_stage_names_it(self, tmp_path, capsys):
        assert run("genealogy", "--out-dir", tmp_path) == 1
        assert "genealogy ingest" in capsys.readouterr().err

    def test_export_before_eval(self, tmp_path, capsys):
        assert run("export", "--kind", "growth", "--out-dir", tmp_path) == 1
        assert "growth-eval" in capsys.readouterr().err

    def test_ingest_needs_input(self, tmp_path):
        assert run("ingest", "--out-dir", tmp_path) == 1

    def test_bad_arguments(self, tmp_path):
        assert run("genealogy", "--k", "x,y", "--out-dir", tmp_path) == 1
        assert run("nonsense") == 1
        assert run("genealogy", "--k", "20,10", "--out-dir", tmp_path) == 1

    def test_malformed_input(self, tmp_path):
        path = tmp_path / "events.jsonl"
        path.write_text("no header\n")
        assert run("ingest", "--input", path, "--out-dir", tmp_path) == 1

    def test_no_eligible_children(self, random_run, tmp_path):
        assert run("genealogy", "--index", random_run / "index.bin", "--out-dir", tmp_path,
                   "--min-members", "100000") == 1

    def test_internal_error(self, tmp_path, monkeypatch):
        def boom(config):
            raise RuntimeError("boom")
        monkeypatch.setattr(cli, "generate_corpus", boom)
        assert run("synth", "--out-dir", tmp_path) == 2

    def test_help(self):
        assert run("--help") == 0


def test_cache_dir_env(tmp_path, monkeypatch, random_run):
    cache = tmp_path / "cache"
    monkeypatch.setenv(cli.CACHE_ENV, str(cache))
    out = tmp_path / "out"
    assert run("growth-dataset", "--index", random_run / "index.bin", "--out-dir", out,
               "--k", "5", "--min-members", "12", "--base-rank", "10",
               "--min-lm-members", "1") == 0
    assert any(p.name.startswith("lm-") for p in cache.iterdir())
    assert os.path.exists(out / "growth_k5.tsv")
