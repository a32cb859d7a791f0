"""Command-line interface.

One subcommand per pipeline stage plus ``run`` for the whole pipeline and
``synth`` for the bundled ground-truth corpus generator. Exit codes:
0 success, 2 configuration error, 3 data error, 4 stage failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from . import __version__, credit, dependency, keywords, report, synth
from .coclustering import partition_agreement, scan_k
from .errors import ConfigError, DataError, PipelineError, ScibranchError
from .records import Corpus, RegionMap, build_citation_graph, filter_corpus, parse_records
from .tables import read_csv, write_csv
from .text import (
    DocTermMatrix,
    TokenPipelineConfig,
    Vocabulary,
    build_matrix,
    build_vocabulary,
    load_stopwords,
    load_vocabulary_words,
    tokenize_corpus,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_STAGE = 4


def _cmd_synth(args) -> int:
    params = synth.GeneratorParams(n_docs=args.n)
    lines, truth = synth.generate(params, seed=args.seed)
    synth.write_corpus(args.out, lines)
    if args.truth:
        with open(args.truth, "w", encoding="utf-8") as fh:
            fh.write(truth.to_json())
            fh.write("\n")
    print(f"wrote {len(lines)} records to {args.out}")
    return EXIT_OK


def _cmd_ingest(args) -> int:
    region_map = RegionMap.from_csv(args.region_map) if args.region_map \
        else RegionMap.bundled()
    with open(args.input, encoding="utf-8") as fh:
        records, parse_report = parse_records(fh, region_map=region_map)
    for issue in parse_report.issues:
        print(f"line {issue.line_no}: {issue.message}", file=sys.stderr)
    corpus, filter_report = filter_corpus(records)
    corpus.save(args.out)
    report_path = f"{args.out}.filter_report.csv"
    write_csv(report_path, ["reason", "count"], filter_report.rows())
    graph = build_citation_graph(corpus)
    print(f"retained {len(corpus)} of {filter_report.n_input} records "
          f"({graph.n_edges} citation edges, "
          f"{graph.n_external_refs} external references); "
          f"filter report: {report_path}")
    return EXIT_OK


def _token_config(args) -> TokenPipelineConfig:
    return TokenPipelineConfig(stopwords=load_stopwords(args.stopwords))


def _cmd_textprep(args) -> int:
    corpus = Corpus.load(args.corpus)
    config = _token_config(args)
    tokens = tokenize_corpus(corpus, config)
    vocabulary = build_vocabulary(corpus, config, threshold=args.threshold,
                                  mode=args.vocab_mode, tokens=tokens)
    matrix = build_matrix(corpus, vocabulary, config, tokens=tokens)
    vocabulary.save(args.out_vocab)
    matrix.save(args.out_matrix)
    print(f"matrix {matrix.shape[0]} x {matrix.shape[1]}, "
          f"{matrix.counts.nnz} nonzeros, total count {matrix.total()}")
    return EXIT_OK


def _cmd_cluster(args) -> int:
    words = load_vocabulary_words(args.vocab)
    matrix = DocTermMatrix.load(args.matrix, words)
    n_zero_rows = int((matrix.counts.getnnz(axis=1) == 0).sum())
    if n_zero_rows:
        print(f"note: {n_zero_rows} documents contain no vocabulary word; "
              f"their labels fall to cluster 0 by tie-break", file=sys.stderr)
    results = scan_k(matrix, args.k_min, args.k_max,
                     restarts=args.restarts, seed=args.seed)
    outdir = args.out
    os.makedirs(outdir, exist_ok=True)
    write_csv(os.path.join(outdir, "scan_summary.csv"), ["k", "Q"],
              [(k, part.modularity) for k, part in results])
    for k, part in results:
        write_csv(os.path.join(outdir, f"partition_k{k}_docs.csv"),
                  ["doc_id", "label"],
                  [(d, int(lab)) for d, lab in zip(matrix.doc_ids, part.row_labels)])
        write_csv(os.path.join(outdir, f"partition_k{k}_words.csv"),
                  ["word", "label"],
                  [(w, int(lab)) for w, lab in zip(matrix.words, part.col_labels)])
        flag = "" if part.converged else " (no convergence)"
        print(f"k={k}: Q={part.modularity:.6g}{flag}")
    return EXIT_OK


def _load_partition_column(path) -> dict[str, int]:
    header, rows = read_csv(path)
    if len(header) < 2:
        raise DataError(f"{path}: expected a two-column partition file")
    return {row[0]: int(row[1]) for row in rows}


def _parse_group_ids(value: str) -> list[int]:
    try:
        return [int(v) for v in value.split(",") if v.strip() != ""]
    except ValueError:
        raise ConfigError(f"bad group id list: {value!r}") from None


def _cmd_agree(args) -> int:
    part_a = _load_partition_column(args.partition_a)
    part_b = _load_partition_column(args.partition_b)
    if set(part_a) != set(part_b):
        raise DataError("partitions cover different document sets")
    doc_ids = sorted(part_a)
    labels_a = np.array([part_a[d] for d in doc_ids])
    labels_b = np.array([part_b[d] for d in doc_ids])
    stats = partition_agreement(labels_a, _parse_group_ids(args.group_a),
                                labels_b, _parse_group_ids(args.group_b))
    rows = [(args.group_a, args.group_b, stats.size_a, stats.size_b, stats.overlap)]
    header = ["group_a", "group_b", "size_a", "size_b", "overlap"]
    if args.out == "-":
        writer = csv.writer(sys.stdout)
        writer.writerow(header)
        writer.writerows(rows)
    else:
        write_csv(args.out, header, rows)
    return EXIT_OK


def _cmd_merge(args) -> int:
    part = _load_partition_column(args.partition)
    labels = set(part.values())
    if args.stable_group not in labels:
        raise DataError(f"stable group {args.stable_group} not among labels "
                        f"{sorted(labels)}")
    rows = [(doc_id, "T" if label == args.stable_group else "A")
            for doc_id, label in part.items()]
    write_csv(args.out, ["doc_id", "branch"], rows)
    n_t = sum(1 for _, b in rows if b == "T")
    print(f"T: {n_t} documents, A: {len(rows) - n_t} documents")
    return EXIT_OK


def _cmd_keywords(args) -> int:
    corpus = Corpus.load(args.corpus)
    branches = report.load_branches_csv(args.branches,
                                        [d.id for d in corpus.documents])
    config = _token_config(args)
    words = load_vocabulary_words(args.vocab)
    vocabulary = Vocabulary(words=words, doc_freq=(0,) * len(words), threshold=0.0)
    stats = keywords.cluster_word_stats(corpus, branches, vocabulary, config)
    top = keywords.top_keywords(stats, args.top_quantile, args.n,
                                denominator=args.denominator)
    write_csv(args.out, ["cluster", "rank", "word", "frequency", "zscore"],
              top.rows())
    for word, reason in top.skipped:
        print(f"skipped '{word}': {reason}", file=sys.stderr)
    return EXIT_OK


def _cmd_credit(args) -> int:
    corpus = Corpus.load(args.corpus)
    branches = report.load_branches_csv(args.branches,
                                        [d.id for d in corpus.documents])
    ledger = credit.compute_ledger(corpus)
    write_csv(args.out_ledger, ["doc_id", "region", "fraction"],
              [(doc.id, region, float(fraction))
               for doc, entry in zip(corpus.documents, ledger.entries)
               for region, fraction in sorted(entry.items())])
    by = tuple(f for f in (args.by or "branch").split(",") if f and f != "region")
    shares = credit.aggregate_shares(corpus, ledger, branches, by=by,
                                     min_share=args.min_share)
    write_csv(args.out_shares, ["region", "year", "branch", "credit", "share"],
              [(r.region, r.year, r.branch, r.credit, r.share)
               for r in shares.rows])
    return EXIT_OK


def _load_graph_and_branches(graph_path, branches_path):
    corpus = Corpus.load(graph_path)
    graph = build_citation_graph(corpus)
    branches = report.load_branches_csv(branches_path,
                                        [d.id for d in corpus.documents])
    return corpus, graph, branches


def _cmd_dependency(args) -> int:
    corpus, graph, branches = _load_graph_and_branches(args.graph, args.branches)
    config = dependency.DependencyConfig(r=args.r, root_mode=args.root_mode)
    scores = dependency.propagate(graph, branches, config)
    write_csv(args.out, ["doc_id", "status", "d_T", "i_T", "D_T"],
              [(doc.id, s.status, s.direct_t, s.indirect_t, s.overall_t)
               for doc, s in zip(corpus.documents, scores)])
    n_root = sum(1 for s in scores if s.status == dependency.ROOT)
    print(f"{len(scores) - n_root} defined, {n_root} root papers")
    return EXIT_OK


def _load_scores_csv(path, doc_ids) -> list[dependency.DependencyScore]:
    header, rows = read_csv(path)
    if header != ["doc_id", "status", "d_T", "i_T", "D_T"]:
        raise DataError(f"{path}: not a dependency score file")
    by_id = {}
    for doc_id, status, d_t, i_t, big_t in rows:
        if status == dependency.ROOT:
            by_id[doc_id] = dependency.DependencyScore(dependency.ROOT)
        else:
            by_id[doc_id] = dependency.DependencyScore(
                dependency.DEFINED,
                direct_t=float(d_t),
                indirect_t=float(i_t) if i_t != "" else None,
                overall_t=float(big_t),
            )
    try:
        return [by_id[d] for d in doc_ids]
    except KeyError as exc:
        raise DataError(f"{path}: missing score for document {exc}") from exc


def _cmd_dependency_report(args) -> int:
    corpus = Corpus.load(args.corpus)
    doc_ids = [d.id for d in corpus.documents]
    branches = report.load_branches_csv(args.branches, doc_ids)
    scores = _load_scores_csv(args.scores, doc_ids)
    if args.by is None:
        means = dependency.group_average(scores, branches)
        write_csv(args.out, ["group", "mean_D_T", "mean_D_A", "n_defined"],
                  [(g, *(pair if pair else (None, None)), means.counts.get(g, 0))
                   for g, pair in sorted(means.groups.items())])
    elif args.by == "year":
        years = [d.year for d in corpus.documents]
        write_csv(args.out, ["year", "group", "mean_D_T", "mean_D_A", "n_defined"],
                  dependency.yearly_average(scores, branches, years))
    else:  # region
        write_csv(args.out,
                  ["region", "year", "group", "mean_D_T", "mean_D_A", "n_defined"],
                  dependency.region_average(scores, branches, corpus))
    return EXIT_OK


def _cmd_dependency_sweep(args) -> int:
    _, graph, branches = _load_graph_and_branches(args.graph, args.branches)
    if args.r_steps < 2:
        raise ConfigError("--r-steps must be >= 2")
    r_values = [i / (args.r_steps - 1) for i in range(args.r_steps)]
    rows = dependency.r_sweep(graph, branches, r_values, root_mode=args.root_mode)
    write_csv(args.out, ["r", "group", "mean_D_T", "mean_D_A", "n_defined"], rows)
    return EXIT_OK


def _cmd_run(args) -> int:
    overrides = {}
    for key in report.PipelineConfig.__dataclass_fields__:
        value = getattr(args, f"override_{key}", None)
        if value is not None:
            overrides[key] = value
    config = report.load_config(args.config, overrides)
    manifest = report.run_pipeline(config)
    print(f"pipeline complete; manifest: {manifest}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scibranch",
        description="Theoretical/applied branch analytics for a publication corpus",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic ground-truth corpus")
    p.add_argument("--n", type=int, default=1000, help="number of retained documents")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--truth", help="also write the ground-truth JSON here")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("ingest", help="parse, filter and snapshot a corpus")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--region-map", help="substring,code CSV replacing the bundled map")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("textprep", help="build the vocabulary and term matrix")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out-matrix", required=True)
    p.add_argument("--out-vocab", required=True)
    p.add_argument("--threshold", type=float, default=0.0001)
    p.add_argument("--vocab-mode", choices=("document", "token"), default="document")
    p.add_argument("--stopwords")
    p.set_defaults(func=_cmd_textprep)

    p = sub.add_parser("cluster", help="co-cluster over a range of k")
    p.add_argument("--matrix", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--k-min", type=int, default=2)
    p.add_argument("--k-max", type=int, default=9)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("agree", help="overlap between groups of two partitions")
    p.add_argument("--partition-a", required=True)
    p.add_argument("--group-a", required=True, help="group id(s), comma-separated")
    p.add_argument("--partition-b", required=True)
    p.add_argument("--group-b", required=True)
    p.add_argument("--out", default="-")
    p.set_defaults(func=_cmd_agree)

    p = sub.add_parser("merge", help="merge a partition into T/A branches")
    p.add_argument("--partition", required=True, help="doc_id,label CSV")
    p.add_argument("--stable-group", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_merge)

    p = sub.add_parser("keywords", help="z-score keyword tables per branch")
    p.add_argument("--corpus", required=True)
    p.add_argument("--branches", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--top-quantile", type=float, default=0.02)
    p.add_argument("--n", type=int, default=25)
    p.add_argument("--denominator", choices=keywords.DENOMINATOR_MODES,
                   default="sqrt",
                   help="'variance' reproduces the unnormalized variant")
    p.add_argument("--stopwords")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_keywords)

    p = sub.add_parser("credit", help="regional credit ledger and shares")
    p.add_argument("--corpus", required=True)
    p.add_argument("--branches", required=True)
    p.add_argument("--out-ledger", required=True)
    p.add_argument("--out-shares", required=True)
    p.add_argument("--min-share", type=float, default=None)
    p.add_argument("--by", help="comma list from: year, branch (region is implied)")
    p.set_defaults(func=_cmd_credit)

    p = sub.add_parser("dependency", help="dependency factors over the citation graph")
    p.add_argument("--graph", required=True,
                   help="corpus snapshot; the graph is derived from references")
    p.add_argument("--branches", required=True)
    p.add_argument("--r", type=float, default=0.5)
    p.add_argument("--root-mode", choices=dependency.ROOT_MODES, default="indicator")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_dependency)

    p = sub.add_parser("dependency-report", help="group-mean dependency tables")
    p.add_argument("--scores", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--branches", required=True)
    p.add_argument("--by", choices=("year", "region"), default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_dependency_report)

    p = sub.add_parser("dependency-sweep", help="group means across mix ratios")
    p.add_argument("--graph", required=True)
    p.add_argument("--branches", required=True)
    p.add_argument("--r-steps", type=int, default=11)
    p.add_argument("--root-mode", choices=dependency.ROOT_MODES, default="indicator")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_dependency_sweep)

    p = sub.add_parser("run", help="run the whole pipeline from a config file")
    p.add_argument("--config", required=True)
    for key in report.PipelineConfig.__dataclass_fields__:
        p.add_argument(f"--{key.replace('_', '-')}", dest=f"override_{key}",
                       metavar="VALUE", help=f"override config key '{key}'")
    p.set_defaults(func=_cmd_run)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (PipelineError, ScibranchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
