"""``toolscope`` command line: merge, retrieve, select, eval, audit, ablate (plus fixture generation).

Stages communicate through files in the output directory. Exit codes:
0 success, 1 input error, 2 provider error, 3 integrity violation.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .core import (
    Benchmark,
    Toolset,
    load_benchmark,
    load_toolset,
    read_json,
    read_jsonl,
    save_benchmark,
    save_toolset,
    write_json,
    write_jsonl,
    write_text,
)
from .embedding import embed_toolset
from .errors import ConfigError, InputError, SchemaMismatch, ToolScopeError
from .merger import MergePlan, format_size_table

log = logging.getLogger("toolscope")

PLAN_FILE = "merge_plan.json"
MERGED_TOOLSET_FILE = "merged_toolset.json"
RELABELED_FILE = "benchmark_relabeled.jsonl"
RETRIEVAL_FILE = "retrieval.jsonl"
SELECTIONS_FILE = "selections.jsonl"


def _csv_ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML or JSON run config; flags override it")
    common.add_argument("--out", help="output directory (default: out)")
    common.add_argument("--mock-providers", action="store_true", default=None, help="offline deterministic doubles for every model")
    common.add_argument("--cache-dir", help="disk cache for embeddings and chat replies (live mode)")
    common.add_argument("--seed", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    inputs = argparse.ArgumentParser(add_help=False)
    inputs.add_argument("--toolset", help="toolset JSON")
    inputs.add_argument("--benchmark", help="benchmark JSONL")

    merge_flags = argparse.ArgumentParser(add_help=False)
    merge_flags.add_argument("--threshold", type=float, help="cosine threshold for merge candidates (default 0.82)")
    merge_flags.add_argument("--candidate-k", type=int, help="neighbours considered per tool (default 30)")
    merge_flags.add_argument("--no-autocorrect", action="store_true", help="skip the cluster audit pass")
    merge_flags.add_argument("--no-merge", action="store_true", help="identity merge plan")
    merge_flags.add_argument("--doc-fallback", action="store_true", help="keep original docs when synthesis fails")

    retr_flags = argparse.ArgumentParser(add_help=False)
    retr_flags.add_argument("--alpha", type=float, help="dense weight in the hybrid score (default 1.0)")
    retr_flags.add_argument("--top-k", type=int, help="tools returned per query (default 5)")
    retr_flags.add_argument("--rerank-pool", type=int, help="candidates passed to the reranker (default 50)")
    retr_flags.add_argument("--no-rerank", action="store_true", help="rank by hybrid score only")

    p = argparse.ArgumentParser(prog="toolscope", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fixture", parents=[common], help="write a synthetic toolset and benchmark")
    f.add_argument("kind", choices=["planted", "large"])
    f.add_argument("--size", type=int, default=1000, help="tool count for the large fixture")
    f.add_argument("--queries", type=int, default=50)

    sub.add_parser("merge", parents=[common, inputs, merge_flags], help="deduplicate the toolset and relabel the benchmark")
    sub.add_parser("retrieve", parents=[common, inputs, retr_flags], help="top-k tools per query")

    s = sub.add_parser("select", parents=[common, inputs], help="agent tool selection over retrieved candidates")
    s.add_argument("--retrieval", help=f"retrieval JSONL (default <out>/{RETRIEVAL_FILE})")

    e = sub.add_parser("eval", parents=[common, inputs], help="CSR@k, Recall@k, context tokens, silhouette")
    e.add_argument("--retrieval", help=f"retrieval JSONL (default <out>/{RETRIEVAL_FILE})")
    e.add_argument("--selections", help="selections JSONL; computed and written when absent")
    e.add_argument("--top-k", type=int, help="k the retrieval was run with; CSR is reported at this k (default 5)")
    e.add_argument("--ks", type=_csv_ints, default=[1, 3, 5], help="recall cut-offs (default 1,3,5)")
    e.add_argument("--silhouette", type=_csv_ints, default=[], help="cluster counts for silhouette diagnostics")
    e.add_argument("--original-toolset", help="pre-merge toolset for a silhouette baseline")

    a = sub.add_parser("audit", parents=[common], help="print the auto-correction verdicts of a merge plan")
    a.add_argument("--plan", help=f"merge plan JSON (default <out>/{PLAN_FILE})")

    ab = sub.add_parser("ablate", parents=[common, inputs, merge_flags, retr_flags], help="reranker/merger/auto-correction grid")
    ab.add_argument("--label", default="dataset")
    return p


# --- helpers -------------------------------------------------------------------


def _run_config(args):
    from .config import RunConfig, apply_overrides, config_from_dict, read_config_file

    cfg = config_from_dict(read_config_file(args.config)) if args.config else RunConfig()
    merger = {
        "cosine_threshold": getattr(args, "threshold", None),
        "candidate_k": getattr(args, "candidate_k", None),
        "autocorrect_enabled": False if getattr(args, "no_autocorrect", False) else None,
        "doc_fallback": True if getattr(args, "doc_fallback", False) else None,
    }
    retriever = {
        "alpha": getattr(args, "alpha", None),
        "k": getattr(args, "top_k", None),
        "rerank_pool": getattr(args, "rerank_pool", None),
        "rerank": False if getattr(args, "no_rerank", False) else None,
    }
    return apply_overrides(
        cfg,
        merger,
        retriever,
        toolset=getattr(args, "toolset", None),
        benchmark=getattr(args, "benchmark", None),
        out=args.out,
        mock=True if args.mock_providers else None,
        cache_dir=args.cache_dir,
        seed=args.seed,
    )


def _require(value, what: str) -> str:
    if not value:
        raise ConfigError(f"missing {what}")
    return value


def _providers(cfg):
    from .config import check_reachable
    from .pipeline import make_providers

    check_reachable(cfg.settings)
    return make_providers(cfg.settings)


def _inputs(cfg) -> tuple[Toolset, Benchmark]:
    toolset = load_toolset(_require(cfg.toolset, "--toolset"))
    benchmark = load_benchmark(_require(cfg.benchmark, "--benchmark"), toolset)
    return toolset, benchmark


def _load_results(path):
    from .retriever import RetrievalResult

    try:
        return [RetrievalResult.from_dict(d) for d in read_jsonl(path)]
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaMismatch(f"{path}: not a retrieval file ({exc})") from exc


def _load_selections(path):
    from .retriever import Selection

    try:
        return [Selection.from_dict(d) for d in read_jsonl(path)]
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaMismatch(f"{path}: not a selections file ({exc})") from exc


def _load_plan(path, tool_ids=None) -> MergePlan:
    try:
        return MergePlan.from_dict(read_json(path), tool_ids)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaMismatch(f"{path}: not a merge plan ({exc})") from exc


def format_audit(records, plan: MergePlan | None = None) -> str:
    if not records:
        return "audit log: no clusters were audited"
    lines = []
    splits = sum(r.verdict != "MERGE_OK" for r in records)
    lines.append(f"audit log: {len(records)} cluster(s), {splits} split")
    reps = {c.members: c.representative for c in plan.clusters} if plan else {}
    for i, r in enumerate(records, 1):
        lines.append(f"[{i}] {r.verdict}  before: {list(r.members)}")
        if r.reason:
            lines.append(f"    reason: {r.reason}")
        if r.verdict != "MERGE_OK":
            lines.append(f"    proposed split: {[list(c) for c in r.sub_clusters]}")
        for kept in r.kept:
            rep = reps.get(tuple(sorted(kept)))
            lines.append(f"    after: {list(kept)}" + (f" -> {rep}" if rep else ""))
        if r.unmerged:
            lines.append(f"    unmerged: {list(r.unmerged)}")
    return "\n".join(lines)


# --- commands ----------------------------------------------------------------------


def cmd_fixture(args, cfg) -> int:
    from .fixtures import large_benchmark, large_toolset, planted_benchmark, planted_toolset

    out = Path(cfg.out)
    if args.kind == "planted":
        toolset, benchmark = planted_toolset(), planted_benchmark()
    else:
        toolset = large_toolset(args.size, cfg.settings.seed)
        benchmark = large_benchmark(toolset, args.queries, cfg.settings.seed)
    save_toolset(toolset, out / "toolset.json")
    save_benchmark(benchmark, out / "benchmark.jsonl")
    print(f"wrote {len(toolset)} tools and {len(benchmark)} queries to {out}")
    return 0


def cmd_merge(args, cfg) -> int:
    from .config import write_manifest
    from .pipeline import merge_stage

    toolset, benchmark = _inputs(cfg)
    providers = _providers(cfg)
    m = merge_stage(toolset, benchmark, cfg.settings.merger, providers, enabled=not args.no_merge)
    out = Path(cfg.out)
    paths = [out / PLAN_FILE, out / MERGED_TOOLSET_FILE, out / RELABELED_FILE]
    write_json(paths[0], m.plan.to_dict())
    save_toolset(m.toolset, paths[1])
    save_benchmark(m.benchmark, paths[2])
    write_manifest(out, "merge", cfg, {"toolset": cfg.toolset, "benchmark": cfg.benchmark}, paths)
    print(format_size_table(Path(cfg.toolset).stem, len(toolset), len(m.toolset)))
    return 0


def cmd_retrieve(args, cfg) -> int:
    from .config import write_manifest
    from .pipeline import retrieve_stage

    toolset, benchmark = _inputs(cfg)
    providers = _providers(cfg)
    results = retrieve_stage(toolset, benchmark, cfg.settings.retriever, providers, cfg.settings.workers)
    out = Path(cfg.out)
    path = out / RETRIEVAL_FILE
    write_jsonl(path, (r.to_dict() for r in results))
    write_manifest(out, "retrieve", cfg, {"toolset": cfg.toolset, "benchmark": cfg.benchmark}, [path])
    print(f"retrieved top-{cfg.settings.retriever.k} tools for {len(results)} queries -> {path}")
    return 0


def _select(cfg, toolset, benchmark, results):
    from .pipeline import select_stage

    return select_stage(toolset, benchmark, results, _providers(cfg).agent)


def cmd_select(args, cfg) -> int:
    from .config import write_manifest

    toolset, benchmark = _inputs(cfg)
    out = Path(cfg.out)
    rpath = args.retrieval or out / RETRIEVAL_FILE
    selections = _select(cfg, toolset, benchmark, _load_results(rpath))
    path = out / SELECTIONS_FILE
    write_jsonl(path, (s.to_dict() for s in selections))
    write_manifest(out, "select", cfg, {"toolset": cfg.toolset, "benchmark": cfg.benchmark, "retrieval": rpath}, [path])
    bad = sum(len(s.hallucinations) for s in selections)
    print(f"selected tools for {len(selections)} queries ({bad} hallucinated names) -> {path}")
    return 0


def cmd_eval(args, cfg) -> int:
    from .config import write_manifest
    from .pipeline import evaluate
    from .plotting import plot_metrics, plot_silhouette

    toolset, benchmark = _inputs(cfg)
    out = Path(cfg.out)
    rpath = args.retrieval or out / RETRIEVAL_FILE
    results = _load_results(rpath)
    known = {r.query_id for r in benchmark}
    stray = [r.query_id for r in results if r.query_id not in known]
    if stray:
        raise SchemaMismatch(f"retrieval file has queries not in the benchmark: {stray[:5]}")
    written = []
    if args.selections:
        spath = Path(args.selections)
        selections = _load_selections(spath)
    else:
        selections = _select(cfg, toolset, benchmark, results)
        spath = out / SELECTIONS_FILE
        write_jsonl(spath, (s.to_dict() for s in selections))
        written.append(spath)
    matrix = baseline = None
    if args.silhouette:
        provider = _providers(cfg).embedder
        matrix = embed_toolset(toolset, provider)
        if args.original_toolset:
            baseline = embed_toolset(load_toolset(args.original_toolset), provider)
    report = evaluate(
        toolset,
        benchmark,
        results,
        selections,
        recall_ks=args.ks,
        silhouette_counts=args.silhouette,
        matrix=matrix,
        baseline_matrix=baseline,
        seed=cfg.settings.seed,
        k=cfg.settings.retriever.k,
    )
    report_path, tsv_path = out / "report.json", out / "metrics.tsv"
    write_json(report_path, report.to_dict())
    write_text(tsv_path, report.to_tsv())
    written += [report_path, tsv_path, plot_metrics(report, out / "metrics.png")]
    if report.silhouette:
        curves = {"merged": report.silhouette}
        if report.silhouette_baseline:
            curves = {"original": report.silhouette_baseline, **curves}
        written.append(plot_silhouette(curves, out / "silhouette.png"))
    inputs = {"toolset": cfg.toolset, "benchmark": cfg.benchmark, "retrieval": rpath, "original_toolset": args.original_toolset}
    if args.selections:
        inputs["selections"] = spath
    write_manifest(out, "eval", cfg, inputs, written)
    print(report.format_table())
    return 0


def cmd_audit(args, cfg) -> int:
    from .config import write_manifest

    out = Path(cfg.out)
    ppath = args.plan or out / PLAN_FILE
    plan = _load_plan(ppath)
    text = format_audit(plan.audit_log, plan)
    log_path = out / "audit_log.json"
    txt_path = out / "audit_log.txt"
    write_json(log_path, [r.to_dict() for r in plan.audit_log])
    write_text(txt_path, text + "\n")
    write_manifest(out, "audit", cfg, {"plan": ppath}, [log_path, txt_path])
    print(text)
    return 0


def cmd_ablate(args, cfg) -> int:
    from .config import write_manifest
    from .evalkit import ablation_csv, format_ablation, run_ablation
    from .plotting import plot_ablation

    toolset, benchmark = _inputs(cfg)
    rows = run_ablation(benchmark, toolset, cfg.settings, providers=_providers(cfg))
    out = Path(cfg.out)
    csv_path = out / "ablation.csv"
    write_text(csv_path, ablation_csv(rows))
    png = plot_ablation(rows, out / "ablation.png")
    write_manifest(out, "ablate", cfg, {"toolset": cfg.toolset, "benchmark": cfg.benchmark}, [csv_path, png])
    print(format_ablation(rows, args.label))
    return 0


COMMANDS = {
    "fixture": cmd_fixture,
    "merge": cmd_merge,
    "retrieve": cmd_retrieve,
    "select": cmd_select,
    "eval": cmd_eval,
    "audit": cmd_audit,
    "ablate": cmd_ablate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _run_config(args)
        return COMMANDS[args.command](args, cfg)
    except ToolScopeError as exc:
        where = f" [stage: {exc.stage}]" if exc.stage else ""
        print(f"error{where}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: InputError: {exc}", file=sys.stderr)
        return InputError.exit_code


if __name__ == "__main__":
    sys.exit(main())
