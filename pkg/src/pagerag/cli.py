"""Batch CLI: ingest, index, train-pagescorer, retrieve, generate, evaluate,
sweep, report, synth.

Exit codes: 0 success, 1 usage error, 2 data error, 3 bridge error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import List, Optional

from . import __version__
from .clients import (
    BridgeEmbedder,
    BridgeError,
    BridgeGenerator,
    BridgeReranker,
    BridgeSparseEncoder,
    CosineMockReranker,
    ExtractiveMockGenerator,
    HashingEmbedder,
    MockSparseEncoder,
    bridge_health,
)
from .corpus import IntegrityError, ParseError, load_corpus, load_samples, save_corpus, save_samples
from .dense import build_vector_index, save_vector_cache
from .harness import (
    ExperimentResult,
    RunConfig,
    breakdown_table_csv,
    generate_answer,
    generation_table_csv,
    load_config_file,
    load_results,
    overlap_gap_csv,
    results_table_csv,
    results_table_markdown,
    run_experiment,
    sweep,
    sweep_table_csv,
)
from .corpus import chunk_corpus
from .metrics import aggregate, evaluate_query, numeric_match, rouge_l
from .oracle import OracleMode
from .pagescorer import Adapter, TrainConfig, make_folds, make_pairs, train_adapter
from .synth import build_synthetic

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_BRIDGE = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pagerag", description="Retrieval-failure decomposition for long-document QA"
    )
    parser.add_argument("--version", action="version", version=f"pagerag {__version__}")
    parser.add_argument("--config", help="flat key=value config file; flags override it")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a corpus and QA file")
    p.add_argument("--corpus", required=True)
    p.add_argument("--qa")
    p.add_argument("--manifest", help="write a JSON manifest of counts and hashes")

    p = sub.add_parser("index", help="embed chunks and write a vector cache")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--embedder", default="hash-256")
    p.add_argument("--bridge-url")
    p.add_argument("--chunk-size", type=int, default=1024)
    p.add_argument("--chunk-overlap", type=int, default=128)

    p = sub.add_parser("train-pagescorer", help="train the page-relevance adapter")
    p.add_argument("--corpus", required=True)
    p.add_argument("--qa", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--fold", type=int, default=0)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--learning-rate", type=float, default=5e-2)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--epochs", type=int, default=15)
    p.add_argument("--scale", type=float, default=20.0)
    p.add_argument("--embedder", default="hash-256")
    p.add_argument("--bridge-url")

    p = sub.add_parser("retrieve", help="run one retriever config over all queries")
    _add_run_args(p)
    p.add_argument("--out", required=True, help="JSON Lines of per-query ranked lists")

    p = sub.add_parser("generate", help="generate answers from persisted retrievals")
    p.add_argument("--results", required=True)
    p.add_argument("--qa", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bridge-url")

    p = sub.add_parser("evaluate", help="evaluate persisted retrievals (and answers)")
    p.add_argument("--results", required=True)
    p.add_argument("--qa", required=True)
    p.add_argument("--answers")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--out-prefix", required=True, help="writes <prefix>.csv / .md / .json")
    p.add_argument("--label", default="run")

    p = sub.add_parser("sweep", help="P or k ablation sharing built indexes")
    _add_run_args(p)
    p.add_argument("--parameter", choices=("P", "k"), required=True)
    p.add_argument("--values", required=True, help="comma-separated integers, e.g. 5,10,20")
    p.add_argument("--out", required=True, help="CSV sweep table")

    p = sub.add_parser("report", help="emit result tables from persisted evaluations")
    p.add_argument("--evals", nargs="+", required=True, help="<label>=<eval.json> entries")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--out-prefix", required=True)

    p = sub.add_parser("synth", help="write a seeded synthetic corpus and QA fixture")
    p.add_argument("--out-corpus", required=True)
    p.add_argument("--out-qa", required=True)
    p.add_argument("--docs", type=int, default=6)
    p.add_argument("--pages", type=int, default=10)
    p.add_argument("--questions", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _add_run_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--corpus", required=True)
    p.add_argument("--qa", required=True)
    p.add_argument("--retriever", default="dense")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--oracle", default="standard", choices=[m.value for m in OracleMode])
    p.add_argument("--embedder", default="hash-256")
    p.add_argument("--bridge-url")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--top-pages", "-P", type=int, default=20)
    p.add_argument("--adapter", help="trained adapter file for page-then-chunk")
    p.add_argument("--generate", action="store_true")


def _clients(args) -> dict:
    """Pick mocks or bridge clients; bridge problems fail fast."""
    bridge = getattr(args, "bridge_url", None)
    if not bridge:
        return {
            "embedder": HashingEmbedder(_hash_dim(args)),
            "generator": ExtractiveMockGenerator(),
            "reranker": CosineMockReranker(),
            "sparse_encoder": MockSparseEncoder(),
        }
    health = bridge_health(bridge)
    dim = int(health.get("dim", 1024))
    return {
        "embedder": BridgeEmbedder(bridge, dim=dim),
        "generator": BridgeGenerator(bridge),
        "reranker": BridgeReranker(bridge),
        "sparse_encoder": BridgeSparseEncoder(bridge),
    }


def _hash_dim(args) -> int:
    spec = getattr(args, "embedder", "hash-256") or "hash-256"
    if spec.startswith("hash-"):
        return int(spec.split("-", 1)[1])
    return 256


def _cmd_ingest(args) -> int:
    corpus = load_corpus(args.corpus)
    samples = load_samples(args.qa) if args.qa else []
    doc_ids = set(corpus.doc_ids)
    missing = sorted({s.gold_doc for s in samples if s.gold_doc not in doc_ids})
    if missing:
        raise IntegrityError(f"QA gold documents absent from corpus: {missing}")
    print(f"pages={len(corpus)} docs={len(doc_ids)} questions={len(samples)}")
    if args.manifest:
        from .harness import corpus_fingerprint

        with open(args.manifest, "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "pages": len(corpus),
                    "docs": len(doc_ids),
                    "questions": len(samples),
                    "corpus_hash": corpus_fingerprint(corpus),
                },
                fh,
                sort_keys=True,
                indent=2,
            )
    return EXIT_OK


def _cmd_index(args) -> int:
    corpus = load_corpus(args.corpus)
    chunks = chunk_corpus(corpus, args.chunk_size, args.chunk_overlap)
    clients = _clients(args)
    index = build_vector_index(chunks, clients["embedder"])
    save_vector_cache(index, args.out)
    print(f"chunks={len(chunks)} dim={index.dim} -> {args.out}")
    return EXIT_OK


def _cmd_train(args) -> int:
    corpus = load_corpus(args.corpus)
    samples = load_samples(args.qa)
    plan = make_folds(samples, n=args.folds, seed=args.seed)
    fold = plan.folds[args.fold]
    pairs = [p for p in make_pairs(samples) if p.doc_id in fold.train_docs]
    clients = _clients(args)
    cfg = TrainConfig(
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        epochs=args.epochs,
        scale=args.scale,
        seed=args.seed,
    )
    adapter, trace = train_adapter(pairs, clients["embedder"], corpus, fold, cfg)
    adapter.metadata["fold"] = args.fold
    adapter.save(args.out)
    print(f"pairs={len(pairs)} epochs={len(trace)} final_loss={trace[-1]:.4f} -> {args.out}")
    return EXIT_OK


def _cmd_retrieve(args) -> int:
    corpus = load_corpus(args.corpus)
    samples = load_samples(args.qa)
    config = RunConfig(
        retriever=args.retriever,
        k=args.k,
        oracle_mode=OracleMode(args.oracle),
        embedder_id=args.embedder,
        bridge_url=args.bridge_url,
        seed=args.seed,
        top_pages=args.top_pages,
        generate=args.generate,
    )
    adapter = Adapter.load(args.adapter) if args.adapter else None
    result = run_experiment(config, corpus, samples, adapter=adapter, **_clients(args))
    from .harness import save_results

    save_results(result.results, args.out)
    print(f"queries={len(result.results)} -> {args.out}")
    return EXIT_OK


def _cmd_generate(args) -> int:
    results = load_results(args.results)
    samples = {s.qid: s for s in load_samples(args.qa)}
    clients = _clients(args)
    with open(args.out, "w", encoding="utf-8") as fh:
        for qid in sorted(results):
            sample = samples.get(qid)
            if sample is None:
                raise IntegrityError(f"results qid {qid} missing from QA file")
            try:
                answer = generate_answer(sample.question, results[qid], clients["generator"])
            except BridgeError:
                raise
            except Exception as exc:
                log.warning("generation failed for %s: %s", qid, exc)
                answer = None
            fh.write(json.dumps({"qid": qid, "answer": answer}, sort_keys=True) + "\n")
    print(f"answers -> {args.out}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    results = load_results(args.results)
    samples = load_samples(args.qa)
    answers = {}
    if args.answers:
        with open(args.answers, "r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    row = json.loads(line)
                    answers[row["qid"]] = row.get("answer")
    per_query = []
    for sample in samples:
        if sample.qid not in results:
            raise IntegrityError(f"no retrieval results for qid {sample.qid}")
        evaluation = evaluate_query(results[sample.qid], sample, args.k)
        if args.answers:
            answer = answers.get(sample.qid)
            evaluation.gen_rouge_l = rouge_l(answer, sample.answer) if answer else 0.0
            if sample.question_type == "METRICS":
                evaluation.numeric_match = numeric_match(sample.answer, answer) if answer else 0
        per_query.append(evaluation)
    report = aggregate(per_query, samples)
    _write_report(report, args.label, args.k, args.out_prefix)
    print(f"n={report.n} -> {args.out_prefix}.{{csv,md,json}}")
    return EXIT_OK


def _report_json(report) -> dict:
    return {
        "overall": report.overall,
        "by_question_type": report.by_question_type,
        "by_doc_type": report.by_doc_type,
        "group_counts": report.group_counts,
        "n": report.n,
        "metadata": report.metadata,
    }


def _write_report(report, label: str, k: int, prefix: str) -> None:
    rows = [(label, report)]
    with open(prefix + ".csv", "w", encoding="utf-8") as fh:
        fh.write(results_table_csv(rows, k, numeric="numeric_match" in report.overall))
    with open(prefix + ".md", "w", encoding="utf-8") as fh:
        fh.write(results_table_markdown(rows, k, numeric="numeric_match" in report.overall))
        fh.write("\nBy question type:\n\n")
        fh.write(breakdown_table_csv(report, "question_type", k))
        fh.write("\nBy filing type:\n\n")
        fh.write(breakdown_table_csv(report, "doc_type", k))
    with open(prefix + ".json", "w", encoding="utf-8") as fh:
        json.dump(_report_json(report), fh, sort_keys=True, indent=2)


def _cmd_sweep(args) -> int:
    corpus = load_corpus(args.corpus)
    samples = load_samples(args.qa)
    values = [int(v) for v in args.values.split(",") if v.strip()]
    config = RunConfig(
        retriever=args.retriever,
        k=args.k,
        oracle_mode=OracleMode(args.oracle),
        embedder_id=args.embedder,
        bridge_url=args.bridge_url,
        seed=args.seed,
        top_pages=args.top_pages,
    )
    adapter = Adapter.load(args.adapter) if args.adapter else None
    rows = sweep(config, args.parameter, values, corpus, samples, adapter=adapter, **_clients(args))
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(sweep_table_csv(rows, args.k))
    print(f"rows={len(rows)} -> {args.out}")
    return EXIT_OK


def _cmd_report(args) -> int:
    from .metrics import EvalReport

    rows = []
    for item in args.evals:
        if "=" not in item:
            raise ValueError(f"--evals entries must be label=path, got {item!r}")
        label, path = item.split("=", 1)
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        rows.append(
            (
                label,
                EvalReport(
                    overall=payload["overall"],
                    by_question_type=payload.get("by_question_type", {}),
                    by_doc_type=payload.get("by_doc_type", {}),
                    group_counts=payload.get("group_counts", {}),
                    n=payload.get("n", 0),
                    metadata=payload.get("metadata", {}),
                ),
            )
        )
    numeric = any("numeric_match" in r.overall for _, r in rows)
    with open(args.out_prefix + ".csv", "w", encoding="utf-8") as fh:
        fh.write(results_table_csv(rows, args.k, numeric=numeric))
    with open(args.out_prefix + ".md", "w", encoding="utf-8") as fh:
        fh.write(results_table_markdown(rows, args.k, numeric=numeric))
    with open(args.out_prefix + "_overlap_gap.csv", "w", encoding="utf-8") as fh:
        fh.write(overlap_gap_csv(rows, args.k))
    if any("gen_rouge_l" in r.overall for _, r in rows):
        with open(args.out_prefix + "_generation.csv", "w", encoding="utf-8") as fh:
            fh.write(generation_table_csv(rows))
    print(f"tables -> {args.out_prefix}*.csv")
    return EXIT_OK


def _cmd_synth(args) -> int:
    corpus, samples = build_synthetic(
        n_docs=args.docs, pages_per_doc=args.pages, n_questions=args.questions, seed=args.seed
    )
    save_corpus(corpus, args.out_corpus)
    save_samples(samples, args.out_qa)
    print(f"pages={len(corpus)} questions={len(samples)}")
    return EXIT_OK


_COMMANDS = {
    "ingest": _cmd_ingest,
    "index": _cmd_index,
    "train-pagescorer": _cmd_train,
    "retrieve": _cmd_retrieve,
    "generate": _cmd_generate,
    "evaluate": _cmd_evaluate,
    "sweep": _cmd_sweep,
    "report": _cmd_report,
    "synth": _cmd_synth,
}


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    if args.config:
        try:
            defaults = load_config_file(args.config)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        # config file fills in values the command line left at defaults
        argv_list = list(argv) if argv is not None else sys.argv[1:]
        explicit = {a.split("=", 1)[0] for a in argv_list if a.startswith("--")}
        for key, value in defaults.items():
            attr = key.replace("-", "_")
            if hasattr(args, attr) and f"--{key}" not in explicit:
                current = getattr(args, attr)
                if isinstance(current, bool):
                    setattr(args, attr, value.lower() in ("1", "true", "yes"))
                elif current is not None:
                    setattr(args, attr, type(current)(value))
                else:
                    setattr(args, attr, value)
    try:
        return _COMMANDS[args.command](args)
    except BridgeError as exc:
        print(f"bridge error: {exc}", file=sys.stderr)
        return EXIT_BRIDGE
    except (ParseError, IntegrityError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
