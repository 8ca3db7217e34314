"""Command-line surface: every pipeline stage as a resumable subcommand.

One JSON config file feeds all stages; flags override config keys one to
one. Exit codes: 0 success, 1 fatal stage error, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Optional

from . import analytics, evaluation, ingest, judge as judge_mod, kgstore, pipeline
from .extraction import PromptTemplate, default_template, load_template
from .gateway import LlmClient, LlmConfig
from .ingest import Corpus, ScrapePlan

STAGES = ["scrape", "parse", "extract", "vote", "build"]

DEFAULT_CONFIG = {
    "corpus_dir": "corpus",
    "runs_dir": "runs",
    "jobs": 4,
    "scrape": {
        "index_urls": [],
        "link_pattern": r"\.pdf$",
        "rate_limit": 1000,
        "max_documents": 10000,
        "local_sources": [],
    },
    "llm": {
        "endpoint_url": "",
        "model_name": "",
        "temperature": 0.7,
        "max_output_tokens": 1024,
        "num_generations": 5,
        "timeout_ms": 60000,
        "max_retries": 3,
        "mock_script": None,
        "mock_context_window": None,
    },
    "extraction": {"template": None},
    "voting": {"threshold": 0.5, "normalize_after_vote": False},
    "judge": {"llm": None, "template": None},
    "serve": {"port": 8787, "ui_dir": "frontend/dist"},
}


class ConfigError(ValueError):
    pass


def load_config(path: Optional[str]) -> dict:
    config = json.loads(json.dumps(DEFAULT_CONFIG))  # deep copy
    if path:
        try:
            user = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        unknown = set(user) - set(DEFAULT_CONFIG)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        for key, value in user.items():
            if isinstance(value, dict) and isinstance(config.get(key), dict):
                bad = set(value) - set(config[key])
                if bad:
                    raise ConfigError(f"unknown keys in config section {key!r}: {', '.join(sorted(bad))}")
                config[key].update(value)
            else:
                config[key] = value
    return config


def _llm_config(section: dict, mock_override: Optional[str], generations_override: Optional[int]) -> LlmConfig:
    merged = dict(DEFAULT_CONFIG["llm"])
    merged.update({k: v for k, v in (section or {}).items() if v is not None})
    if mock_override:
        merged["mock_script"] = mock_override
    if generations_override:
        merged["num_generations"] = generations_override
    return LlmConfig(
        endpoint_url=merged["endpoint_url"],
        model_name=merged["model_name"],
        temperature=merged["temperature"],
        max_output_tokens=merged["max_output_tokens"],
        num_generations=merged["num_generations"],
        timeout_ms=merged["timeout_ms"],
        max_retries=merged["max_retries"],
        mock_script=merged["mock_script"],
        mock_context_window=merged["mock_context_window"],
    )


def _template(config: dict, template_flag: Optional[str]) -> PromptTemplate:
    path = template_flag or config["extraction"]["template"]
    return load_template(Path(path)) if path else default_template()


def cmd_scrape(args, config) -> int:
    corpus = Corpus(Path(args.corpus or config["corpus_dir"]))
    section = config["scrape"]
    plan = ScrapePlan(
        index_urls=tuple(section["index_urls"]),
        link_pattern=section["link_pattern"],
        rate_limit=section["rate_limit"],
        max_documents=section["max_documents"],
    )
    records = ingest.scrape(plan, corpus, local_sources=[Path(p) for p in section["local_sources"]])
    failed = sum(1 for r in records if r.status == "failed")
    print(f"scrape: {len(records)} documents ({failed} failed) -> {corpus.root}")
    return 0


def cmd_parse(args, config) -> int:
    corpus = Corpus(Path(args.corpus or config["corpus_dir"]))
    records = ingest.parse_corpus(corpus)
    parsed = sum(1 for r in records if r.status in ("parsed", "extraction_done"))
    failed = sum(1 for r in records if r.status == "failed")
    print(f"parse: {parsed} parsed, {failed} failed of {len(records)} documents")
    return 0


def cmd_extract(args, config) -> int:
    corpus = Corpus(Path(args.corpus or config["corpus_dir"]))
    run_id = args.run or pipeline.new_run_id()
    paths = pipeline.RunPaths(Path(args.runs_dir or config["runs_dir"]), run_id)
    cfg = _llm_config(config["llm"], args.mock, args.generations)
    client = LlmClient(cfg)
    try:
        summary = pipeline.extract_stage(
            corpus, paths, _template(config, args.template), client, jobs=args.jobs or config["jobs"]
        )
    finally:
        client.close()
    print(
        f"extract: run {run_id}: {summary['extracted']} documents extracted, "
        f"{summary['failed']} failed, {summary['triples']} raw triples"
    )
    return 0


def cmd_vote(args, config) -> int:
    paths = pipeline.RunPaths(Path(args.runs_dir or config["runs_dir"]), args.run)
    threshold = args.threshold if args.threshold is not None else config["voting"]["threshold"]
    summary = pipeline.vote_stage(paths, threshold, config["voting"]["normalize_after_vote"])
    print(f"vote: {summary['voted']} triples kept at threshold {threshold}, {summary['rejected']} rejected")
    return 0


def cmd_build(args, config) -> int:
    paths = pipeline.RunPaths(Path(args.runs_dir or config["runs_dir"]), args.run)
    kg, target = pipeline.build_stage(paths, Path(args.out) if args.out else None)
    print(f"build: {kg.node_count()} nodes, {kg.edge_count()} edges -> {target}")
    return 0


def cmd_stats(args, config) -> int:
    kg = kgstore.import_csv(Path(args.kg))
    s = kgstore.stats(kg)
    print(f"nodes: {s['node_count']}")
    print(f"edges: {s['edge_count']}")
    for name, count in s["nodes_per_type"].items():
        print(f"  node {name}: {count}")
    for name, count in s["edges_per_relation"].items():
        print(f"  edge {name}: {count}")
    return 0


def cmd_analyze(args, config) -> int:
    kg = kgstore.import_csv(Path(args.kg))
    out_dir = Path(args.out)
    analytics.write_analytics(kg, out_dir, tau=args.tau)
    print(f"analyze: tables written to {out_dir}")
    return 0


def cmd_judge(args, config) -> int:
    judge_section = dict(config["judge"])
    if args.judge_config:
        try:
            judge_section.update(json.loads(Path(args.judge_config).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read judge config {args.judge_config}: {exc}") from None
    cfg = _llm_config(judge_section.get("llm") or config["llm"], args.mock, None)
    skeleton = ""
    if judge_section.get("template"):
        skeleton = judge_mod.load_judge_skeleton(Path(judge_section["template"]))
    corpus = Corpus(Path(args.corpus or config["corpus_dir"]))
    paths = pipeline.RunPaths(Path(args.runs_dir or config["runs_dir"]), args.run)
    client = LlmClient(cfg)
    try:
        summary = judge_mod.judge_corpus(paths.root, corpus, client, skeleton=skeleton)
    finally:
        client.close()
    if summary.report is None:
        print(f"judge: no verdicts ({summary.error})")
        return 1
    print(
        f"judge: {summary.report.total} verdicts over {summary.total_docs} documents "
        f"(completion {summary.completion:.0%}, {len(summary.missing)} missing)"
    )
    print(evaluation.format_report(summary.report, title="LLM-as-a-judge evaluation"))
    return 0


def cmd_report(args, config) -> int:
    verdicts = []
    for path in args.verdicts:
        verdicts.extend(evaluation.read_verdicts_csv(Path(path)))
    by_source = {}
    for v in verdicts:
        by_source.setdefault(v.source, []).append(v)
    if not by_source:
        print("report: no verdicts found", file=sys.stderr)
        return 1
    reports = {source: evaluation.aggregate(items) for source, items in by_source.items()}
    audit = evaluation.read_audit_json(Path(args.audit)) if args.audit else None

    human = reports.get(evaluation.Source.HUMAN)
    judge_report = reports.get(evaluation.Source.LLM_JUDGE)
    if human and judge_report:
        print(evaluation.format_side_by_side(human, judge_report))
    else:
        for source, report in reports.items():
            print(evaluation.format_report(report, title=f"{source.value} evaluation"))
    if audit:
        recall_value = evaluation.recall(audit)
        print(f"Recall: {recall_value * 100:.1f}% ({audit.gold_relation_count - audit.false_negatives}"
              f"/{audit.gold_relation_count} gold relations recovered)")

    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["source", "label", "count", "percentage"])
            for source, report in reports.items():
                for label in evaluation.Label:
                    writer.writerow([source.value, label.value, report.counts[label], report.percentages[label]])
            if audit:
                writer.writerow(["audit", "recall", "", evaluation.recall(audit)])
        print(f"report: written to {args.out}")
    return 0


def cmd_serve(args, config) -> int:
    import uvicorn

    from .service import create_app

    ui_dir = Path(args.ui_dir or config["serve"]["ui_dir"])
    app = create_app(
        runs_dir=Path(args.runs_dir or config["runs_dir"]),
        corpus_dir=Path(args.corpus or config["corpus_dir"]),
        ui_dir=ui_dir if ui_dir.exists() else None,
    )
    port = args.port or config["serve"]["port"]
    print(f"serve: run {args.run} on http://127.0.0.1:{port} (ui: {ui_dir if ui_dir.exists() else 'none'})")
    uvicorn.run(app, host=args.host, port=port, log_level="warning")
    return 0


def cmd_run_all(args, config) -> int:
    start = STAGES.index(args.from_stage)
    stop = STAGES.index(args.to_stage)
    if start > stop:
        raise ConfigError(f"--from {args.from_stage} comes after --to {args.to_stage}")
    selected = STAGES[start : stop + 1]
    run_id = args.run or pipeline.new_run_id()
    if "scrape" in selected:
        cmd_scrape(args, config)
    if "parse" in selected:
        cmd_parse(args, config)
    if "extract" in selected:
        extract_args = argparse.Namespace(**vars(args))
        extract_args.run = run_id
        cmd_extract(extract_args, config)
    if "vote" in selected:
        vote_args = argparse.Namespace(**vars(args))
        vote_args.run = run_id
        cmd_vote(vote_args, config)
    if "build" in selected:
        build_args = argparse.Namespace(**vars(args))
        build_args.run = run_id
        cmd_build(build_args, config)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kgforge", description=__doc__)
    parser.add_argument("--config", help="JSON config file; flags override config keys")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(func=func)
        p.add_argument("--corpus", help="corpus directory")
        p.add_argument("--runs-dir", dest="runs_dir", help="runs directory")
        p.add_argument("--jobs", type=int, help="worker pool size")
        return p

    add("scrape", cmd_scrape, help="discover and fetch leaflet documents")
    add("parse", cmd_parse, help="convert fetched documents to text")

    p = add("extract", cmd_extract, help="run LLM triple extraction over parsed documents")
    p.add_argument("--run", help="run id (new one generated when omitted)")
    p.add_argument("--template", help="extraction prompt template file")
    p.add_argument("--generations", type=int, help="generations per document")
    p.add_argument("--mock", help="mock provider script (JSONL)")

    p = add("vote", cmd_vote, help="majority-vote and filter raw triples")
    p.add_argument("--run", required=True)
    p.add_argument("--threshold", type=float, help="confidence threshold (default 0.5)")

    p = add("build", cmd_build, help="merge voted triples into the knowledge graph CSV")
    p.add_argument("--run", required=True)
    p.add_argument("--out", help="output kg.csv path (default runs/<run>/kg.csv)")

    p = add("stats", cmd_stats, help="print graph statistics")
    p.add_argument("--kg", required=True, help="kg.csv path")

    p = add("analyze", cmd_analyze, help="write analytics tables for a graph")
    p.add_argument("--kg", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--tau", type=float, default=0.5, help="clustering similarity threshold")

    p = add("judge", cmd_judge, help="LLM-as-a-judge over a run's voted triples")
    p.add_argument("--run", required=True)
    p.add_argument("--judge-config", dest="judge_config", help="JSON with judge llm settings/template")
    p.add_argument("--mock", help="mock judge script (JSONL)")

    p = add("report", cmd_report, help="evaluation reports from verdict files")
    p.add_argument("--verdicts", action="append", required=True, help="verdict CSV (repeatable)")
    p.add_argument("--audit", help="false-negative audit JSON for recall")
    p.add_argument("--out", help="write report CSV here")

    p = add("serve", cmd_serve, help="run the annotation HTTP service")
    p.add_argument("--run", required=True)
    p.add_argument("--port", type=int)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--ui-dir", dest="ui_dir", help="static UI directory (default frontend/dist)")

    p = add("run-all", cmd_run_all, help="run scrape through build in one go")
    p.add_argument("--from", dest="from_stage", choices=STAGES, default="scrape")
    p.add_argument("--to", dest="to_stage", choices=STAGES, default="build")
    p.add_argument("--run", help="run id (new one generated when omitted)")
    p.add_argument("--template", help="extraction prompt template file")
    p.add_argument("--generations", type=int)
    p.add_argument("--mock", help="mock provider script (JSONL)")
    p.add_argument("--threshold", type=float)
    p.add_argument("--out", help="output kg.csv path")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return args.func(args, config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"missing artifact: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # fatal stage error
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
