import json
import subprocess
import sys
from pathlib import Path


from toolscope import cli
from toolscope.core import load_benchmark, load_toolset, read_json, read_jsonl
from toolscope.llm.parsing import MERGE_BAD, Verdict


def run(*argv):
    return cli.main([str(a) for a in argv])


def _chain(root: Path) -> Path:
    """fixture -> merge -> retrieve -> select -> eval -> audit, all in mock mode."""
    data, out = root / "data", root / "out"
    assert run("fixture", "planted", "--out", data) == 0
    ts, bench = data / "toolset.json", data / "benchmark.jsonl"
    assert run("merge", "--mock-providers", "--toolset", ts, "--benchmark", bench, "--out", out) == 0
    merged, relabeled = out / "merged_toolset.json", out / "benchmark_relabeled.jsonl"
    io = ["--mock-providers", "--toolset", merged, "--benchmark", relabeled, "--out", out]
    assert run("retrieve", *io) == 0
    assert run("select", *io) == 0
    assert run("eval", *io, "--selections", out / "selections.jsonl", "--silhouette", "2,3", "--original-toolset", ts) == 0
    assert run("audit", "--out", out) == 0
    return out


def test_end_to_end_outputs(tmp_path, capsys):
    out = _chain(tmp_path)
    text = capsys.readouterr().out
    assert "toolset  60             20           -66.7%" in text
    for name in ("merge_plan.json", "merged_toolset.json", "benchmark_relabeled.jsonl", "retrieval.jsonl", "selections.jsonl",
                 "report.json", "metrics.tsv", "metrics.png", "silhouette.png", "audit_log.json", "audit_log.txt",
                 "manifest_merge.json", "manifest_retrieve.json", "manifest_select.json", "manifest_eval.json", "manifest_audit.json"):
        assert (out / name).is_file(), name
    assert (out / "metrics.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    assert len(load_toolset(out / "merged_toolset.json")) == 20
    report = read_json(out / "report.json")
    assert report["csr_at_k"] == {"5": 1.0}
    assert set(report["recall_at_k"]) == {"1", "3", "5"}
    assert set(report["silhouette"]) == {"2", "3"} and set(report["silhouette_baseline"]) == {"2", "3"}
    assert (out / "metrics.tsv").read_text().startswith("metric\tk\tvalue\ncsr\t5\t1.000000\n")
    manifest = read_json(out / "manifest_eval.json")
    assert manifest["inputs"]["toolset"]["file"] == "merged_toolset.json"
    assert "audit log:" in text and "MERGE_OK" in text


def test_runs_are_byte_identical(tmp_path):
    a = _chain(tmp_path / "a")
    b = _chain(tmp_path / "b")
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes(), n


def test_size_table_examples():
    from toolscope.merger import format_size_table

    assert format_size_table("x", 30, 10).splitlines()[1].endswith("-66.7%")
    assert format_size_table("x", 7, 7).splitlines()[1].endswith("0.0%")


def test_no_merge_is_identity(tmp_path, capsys):
    data = tmp_path / "data"
    run("fixture", "planted", "--out", data)
    assert run("merge", "--mock-providers", "--no-merge", "--toolset", data / "toolset.json", "--benchmark", data / "benchmark.jsonl", "--out", tmp_path) == 0
    assert len(load_toolset(tmp_path / "merged_toolset.json")) == 60
    assert capsys.readouterr().out.rstrip().endswith("0.0%")


def test_eval_computes_selections_when_absent(tmp_path):
    data = tmp_path / "data"
    run("fixture", "planted", "--out", data)
    io = ["--mock-providers", "--toolset", data / "toolset.json", "--benchmark", data / "benchmark.jsonl", "--out", tmp_path]
    assert run("retrieve", *io, "--top-k", "3") == 0
    assert run("eval", *io, "--top-k", "3") == 0
    assert len(read_jsonl(tmp_path / "selections.jsonl")) == 20
    assert read_json(tmp_path / "report.json")["csr_at_k"].keys() == {"3"}


def test_ablate(tmp_path, capsys):
    data = tmp_path / "data"
    run("fixture", "planted", "--out", data)
    assert run("ablate", "--mock-providers", "--toolset", data / "toolset.json", "--benchmark", data / "benchmark.jsonl", "--out", tmp_path, "--label", "planted") == 0
    rows = (tmp_path / "ablation.csv").read_text().splitlines()
    assert len(rows) == 6
    assert (tmp_path / "ablation.png").is_file()
    assert "planted" in capsys.readouterr().out


def test_large_fixture(tmp_path):
    assert run("fixture", "large", "--size", "120", "--queries", "7", "--out", tmp_path) == 0
    ts = load_toolset(tmp_path / "toolset.json")
    assert len(ts) == 120 and len(load_benchmark(tmp_path / "benchmark.jsonl", ts)) == 7


def test_config_file_and_flag_precedence(tmp_path):
    data = tmp_path / "data"
    run("fixture", "planted", "--out", data)
    cfg = tmp_path / "run.toml"
    cfg.write_text(
        f'seed = 3\n[paths]\ntoolset = "{data / "toolset.json"}"\nbenchmark = "{data / "benchmark.jsonl"}"\nout = "{tmp_path / "o"}"\n'
        "[retriever]\nk = 2\n[providers]\nmock = true\n"
    )
    assert run("retrieve", "--config", cfg) == 0
    assert all(len(r["final_top_k"]) == 2 for r in read_jsonl(tmp_path / "o" / "retrieval.jsonl"))
    assert run("retrieve", "--config", cfg, "--top-k", "4") == 0
    assert all(len(r["final_top_k"]) == 4 for r in read_jsonl(tmp_path / "o" / "retrieval.jsonl"))
    assert read_json(tmp_path / "o" / "manifest_retrieve.json")["config"]["settings"]["seed"] == 3


# --- exit codes --------------------------------------------------------------------------


def test_exit_1_on_input_problems(tmp_path, capsys):
    assert run("merge", "--mock-providers", "--toolset", tmp_path / "missing.json", "--benchmark", tmp_path / "b.jsonl") == 1
    bad = tmp_path / "bad.json"
    bad.write_text('[{"name": "a", "id": "1"}, {"name": "b", "id": "1"}]')
    (tmp_path / "b.jsonl").write_text("")
    assert run("merge", "--mock-providers", "--toolset", bad, "--benchmark", tmp_path / "b.jsonl", "--out", tmp_path) == 1
    assert "DuplicateToolId" in capsys.readouterr().err
    cfg = tmp_path / "c.toml"
    cfg.write_text("[retriever]\nbogus = 1\n")
    assert run("retrieve", "--config", cfg) == 1
    assert run("retrieve", "--mock-providers") == 1


def test_live_mode_without_endpoints_is_input_error(tmp_path):
    data = tmp_path / "data"
    run("fixture", "planted", "--out", data)
    assert run("merge", "--toolset", data / "toolset.json", "--benchmark", data / "benchmark.jsonl", "--out", tmp_path) == 1


def test_exit_2_when_endpoint_unreachable(tmp_path, capsys):
    data = tmp_path / "data"
    run("fixture", "planted", "--out", data)
    cfg = tmp_path / "live.toml"
    cfg.write_text('[providers]\nembedding_base_url = "http://127.0.0.1:9/v1"\nchat_base_url = "http://127.0.0.1:9/v1"\n')
    code = run("merge", "--config", cfg, "--toolset", data / "toolset.json", "--benchmark", data / "benchmark.jsonl", "--out", tmp_path)
    assert code == 2
    assert "[stage: startup]" in capsys.readouterr().err


def test_exit_3_on_corrupt_plan(tmp_path, capsys):
    out = _chain(tmp_path)
    plan = read_json(out / "merge_plan.json")
    c0 = plan["clusters"][0]
    plan["phi"][c0["representative"]] = c0["members"][-1] if c0["members"][-1] != c0["representative"] else c0["members"][0]
    (out / "merge_plan.json").write_text(json.dumps(plan))
    assert run("audit", "--out", out) == 3
    assert "IntegrityViolation" in capsys.readouterr().err


def test_exit_3_on_foreign_sub_cluster(tmp_path, monkeypatch, capsys):
    from toolscope import pipeline

    class Foreign:
        def validate(self, members):
            return Verdict(MERGE_BAD, ((members[0].id, "not-a-member"),), "bad")

    real = pipeline.make_providers

    def patched(settings):
        p = real(settings)
        p.validator = Foreign()
        return p

    monkeypatch.setattr(pipeline, "make_providers", patched)
    data = tmp_path / "data"
    run("fixture", "planted", "--out", data)
    code = run("merge", "--mock-providers", "--toolset", data / "toolset.json", "--benchmark", data / "benchmark.jsonl", "--out", tmp_path)
    assert code == 3
    assert "ForeignId" in capsys.readouterr().err


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "toolscope.cli", "fixture", "planted", "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "wrote 60 tools and 20 queries" in proc.stdout
