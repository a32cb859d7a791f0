"""Pipeline orchestration: run every stage and emit the analysis artifacts.

Artifacts are CSV tables plus SVG figures under ``figures/``, and a
``manifest.json`` listing every emitted file with its sha256. A lock file
keeps the run single-instance per artifact directory; on stage failure
all partial outputs are removed.
"""

from __future__ import annotations

import contextlib
import hashlib
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from . import charts, credit, dependency, keywords
from .coclustering import (
    BranchLabeling,
    CoPartition,
    merge_to_branches,
    scan_k,
)
from .errors import ConfigError, DataError, PipelineError, ScibranchError
from .records import Corpus, RegionMap, build_citation_graph, filter_corpus, parse_records
from .tables import read_csv, write_csv
from .text import (
    TokenPipelineConfig,
    build_matrix,
    build_vocabulary,
    load_stopwords,
    tokenize_corpus,
)


@dataclass
class PipelineConfig:
    input: str = ""
    outdir: str = ""
    region_map: str | None = None
    stopwords: str | None = None
    threshold: float = 0.0001
    k_min: int = 2
    k_max: int = 9
    restarts: int = 10
    seed: int = 0
    merge_k: int | None = None  # default: the scanned k with the highest Q
    stable_group: int | None = None
    top_quantile: float = 0.02
    top_n: int = 25
    r: float = 0.5
    root_mode: str = "indicator"
    min_share: float = 0.02
    year_min: int = 2004
    charts: bool = True

    def validate(self) -> None:
        if not self.input:
            raise ConfigError("config: 'input' is required")
        if not self.outdir:
            raise ConfigError("config: 'outdir' is required")
        paths = [self.input, self.outdir, self.region_map, self.stopwords]
        paths = [os.path.abspath(p) for p in paths if p]
        if len(paths) != len(set(paths)):
            raise ConfigError("config: referenced paths must be distinct")
        if self.k_min < 2:
            raise ConfigError("config: k_min must be >= 2")
        if self.k_min > self.k_max:
            raise ConfigError("config: k_min must not exceed k_max")
        if self.restarts < 1:
            raise ConfigError("config: restarts must be >= 1")
        if not 0.0 <= self.r <= 1.0:
            raise ConfigError("config: r must be in [0, 1]")
        if self.root_mode not in dependency.ROOT_MODES:
            raise ConfigError(f"config: unknown root_mode '{self.root_mode}'")
        if self.threshold < 0:
            raise ConfigError("config: threshold must be >= 0")
        if not 0 < self.top_quantile <= 1:
            raise ConfigError("config: top_quantile must be in (0, 1]")
        if self.top_n < 0:
            raise ConfigError("config: top_n must be >= 0")
        if not 0 <= self.min_share < 1:
            raise ConfigError("config: min_share must be in [0, 1)")
        if self.merge_k is not None and not self.k_min <= self.merge_k <= self.k_max:
            raise ConfigError("config: merge_k outside the scanned k range")
        if self.stable_group is not None and self.stable_group < 0:
            raise ConfigError("config: stable_group must be >= 0")


_BOOL_VALUES = {"true": True, "1": True, "yes": True,
                "false": False, "0": False, "no": False}


def _coerce(name: str, kind, raw: str):
    raw = raw.strip()
    if raw.lower() in ("", "none"):
        return None
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    if kind == "bool":
        if raw.lower() not in _BOOL_VALUES:
            raise ConfigError(f"config: bad boolean for '{name}': {raw!r}")
        return _BOOL_VALUES[raw.lower()]
    return raw


_FIELD_KINDS = {
    "input": "str", "outdir": "str", "region_map": "str", "stopwords": "str",
    "threshold": "float", "k_min": "int", "k_max": "int", "restarts": "int",
    "seed": "int", "merge_k": "int", "stable_group": "int",
    "top_quantile": "float", "top_n": "int", "r": "float", "root_mode": "str",
    "min_share": "float", "year_min": "int", "charts": "bool",
}


def load_config(path, overrides: dict[str, str] | None = None) -> PipelineConfig:
    """Parse a flat 'key = value' config file, then apply CLI overrides."""
    values: dict[str, str] = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{line_no}: expected 'key = value'")
                key, _, value = line.partition("=")
                values[key.strip()] = value.strip()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    for key, value in (overrides or {}).items():
        values[key] = value
    config = PipelineConfig()
    for key, raw in values.items():
        if key not in _FIELD_KINDS:
            raise ConfigError(f"config: unknown key '{key}'")
        setattr(config, key, _coerce(key, _FIELD_KINDS[key], raw))
    config.validate()
    return config


def load_branches_csv(path, doc_ids) -> BranchLabeling:
    """Read a 'doc_id,branch' file and align it with the given document order."""
    header, rows = read_csv(path)
    if header[:2] != ["doc_id", "branch"]:
        raise DataError(f"{path}: expected a 'doc_id,branch' file")
    by_id = {row[0]: row[1] for row in rows}
    labels = []
    for doc_id in doc_ids:
        branch = by_id.get(doc_id)
        if branch not in ("T", "A"):
            raise DataError(f"{path}: no T/A label for document '{doc_id}'")
        labels.append(branch)
    return BranchLabeling(doc_labels=tuple(labels), word_labels=())


@dataclass
class TrendRow:
    year: int
    branch: str
    count: int
    proportion: float


def yearly_trend(
    corpus: Corpus,
    branches: BranchLabeling,
    year_min: int = 2004,
    year_max: int | None = None,
    weight: str = "count",
    ledger: credit.CreditLedger | None = None,
) -> list[TrendRow]:
    """Per-year branch counts and proportions.

    Proportions are paper-count shares by default; ``weight='credit'``
    weighs each paper by its (always unit) total credit instead, which
    matters only when combined with per-region filtering upstream.
    """
    if weight not in ("count", "credit"):
        raise ScibranchError(f"unknown trend weight '{weight}'")
    counts: dict[tuple[int, str], float] = {}
    for pos, doc in enumerate(corpus.documents):
        year = doc.year
        if year is None or year < year_min:
            continue
        if year_max is not None and year > year_max:
            continue
        amount = 1.0
        if weight == "credit" and ledger is not None:
            amount = float(sum(ledger.entries[pos].values()))
        key = (year, branches.doc_labels[pos])
        counts[key] = counts.get(key, 0.0) + amount
    year_totals: dict[int, float] = {}
    for (year, _), n in counts.items():
        year_totals[year] = year_totals.get(year, 0.0) + n
    rows = []
    for (year, branch) in sorted(counts):
        n = counts[(year, branch)]
        rows.append(TrendRow(year, branch, int(n) if weight == "count" else n,
                             n / year_totals[year]))
    return rows


class _ArtifactDir:
    """Tracks created files so a failed run can clean up after itself."""

    def __init__(self, outdir: Path):
        self.outdir = outdir
        self.created: list[Path] = []

    def path(self, rel: str) -> Path:
        p = self.outdir / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        self.created.append(p)
        return p

    def cleanup(self) -> None:
        for p in self.created:
            try:
                p.unlink()
            except OSError:
                pass
        figures = self.outdir / "figures"
        if figures.is_dir() and not any(figures.iterdir()):
            figures.rmdir()


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _prompt_stable_group(scan_results: list[tuple[int, CoPartition]],
                         merge_k: int) -> int:
    part = dict(scan_results)[merge_k]
    sizes = [int((part.row_labels == k).sum()) for k in range(part.g)]
    print(f"Partition at k={merge_k}: document group sizes {sizes}")
    print("Group stability should be judged with the 'agree' subcommand "
          "against other k values.")
    while True:
        answer = input(f"stable group id [0..{part.g - 1}]: ").strip()
        try:
            group = int(answer)
        except ValueError:
            continue
        if 0 <= group < part.g:
            return group


def run_pipeline(
    config: PipelineConfig,
    stable_group_resolver: Callable[[list[tuple[int, CoPartition]], int], int]
    | None = None,
) -> Path:
    """Execute ingest through report; returns the manifest path.

    ``stable_group_resolver`` supplies the stable-group judgment when the
    config leaves it open; by default an interactive terminal prompts and
    a non-interactive run fails, because the choice is deliberate.
    """
    config.validate()
    outdir = Path(config.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    lock = outdir / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise PipelineError("lock", f"artifact directory {outdir} is locked "
                                    f"(remove {lock} if no run is active)")
    os.close(fd)
    art = _ArtifactDir(outdir)
    try:
        _run_stages(config, art, stable_group_resolver)
    except ScibranchError:
        art.cleanup()
        raise
    except Exception as exc:
        art.cleanup()
        raise PipelineError("internal", exc) from exc
    finally:
        lock.unlink(missing_ok=True)
    return outdir / "manifest.json"


@contextlib.contextmanager
def _stage(name: str):
    """Attach the stage name to unexpected failures; scibranch errors carry
    their own context and keep their exit-code class."""
    try:
        yield
    except ScibranchError:
        raise
    except Exception as exc:
        raise PipelineError(name, exc) from exc


def _run_stages(config, art: _ArtifactDir, resolver) -> None:
    token_config = TokenPipelineConfig(stopwords=load_stopwords(config.stopwords))
    region_map = (RegionMap.from_csv(config.region_map) if config.region_map
                  else RegionMap.bundled())

    with _stage("ingest"):
        with open(config.input, encoding="utf-8") as fh:
            records, parse_report = parse_records(fh, region_map=region_map)
        corpus, filter_report = filter_corpus(records)
        corpus.save(art.path("corpus.json"))
        write_csv(art.path("filter_report.csv"), ["reason", "count"],
                  filter_report.rows())
        if parse_report.issues:
            write_csv(art.path("parse_issues.csv"), ["line", "error"],
                      [(i.line_no, i.message) for i in parse_report.issues])

    with _stage("textprep"):
        tokens = tokenize_corpus(corpus, token_config)
        vocabulary = build_vocabulary(corpus, token_config,
                                      threshold=config.threshold, tokens=tokens)
        matrix = build_matrix(corpus, vocabulary, token_config, tokens=tokens)
        vocabulary.save(art.path("vocab.txt"))
        matrix_path = art.path("matrix.csv")
        matrix.save(matrix_path)
        art.created.append(Path(f"{matrix_path}.docs"))

    with _stage("cluster"):
        n_zero_rows = int((matrix.counts.getnnz(axis=1) == 0).sum())
        if n_zero_rows:
            print(f"note: {n_zero_rows} documents contain no vocabulary word; "
                  f"their labels fall to cluster 0 by tie-break", file=sys.stderr)
        scan_results = scan_k(matrix, config.k_min, config.k_max,
                              restarts=config.restarts, seed=config.seed)
        write_csv(art.path("scan_summary.csv"), ["k", "Q"],
                  [(k, part.modularity) for k, part in scan_results])
        for k, part in scan_results:
            write_csv(art.path(f"partition_k{k}_docs.csv"), ["doc_id", "label"],
                      [(doc_id, int(lab)) for doc_id, lab
                       in zip(matrix.doc_ids, part.row_labels)])
            write_csv(art.path(f"partition_k{k}_words.csv"), ["word", "label"],
                      [(word, int(lab)) for word, lab
                       in zip(matrix.words, part.col_labels)])

    with _stage("merge"):
        merge_k = config.merge_k
        if merge_k is None:
            merge_k = max(scan_results, key=lambda kv: kv[1].modularity)[0]
        partition = dict(scan_results)[merge_k]
        stable_group = config.stable_group
        if stable_group is None:
            if resolver is not None:
                stable_group = resolver(scan_results, merge_k)
            elif sys.stdin.isatty():
                stable_group = _prompt_stable_group(scan_results, merge_k)
            else:
                raise ConfigError(
                    "config: 'stable_group' is required in non-interactive runs"
                )
        if not 0 <= stable_group < partition.g:
            raise ConfigError(f"config: stable_group {stable_group} not in "
                              f"0..{partition.g - 1} at k={merge_k}")
        branches = merge_to_branches(partition, stable_group)
        write_csv(art.path("branches.csv"), ["doc_id", "branch"],
                  list(zip(matrix.doc_ids, branches.doc_labels)))

    with _stage("keywords"):
        stats = keywords.cluster_word_stats(corpus, branches, vocabulary,
                                            token_config, tokens=tokens)
        top = keywords.top_keywords(stats, config.top_quantile, config.top_n)
        write_csv(art.path("keywords.csv"),
                  ["cluster", "rank", "word", "frequency", "zscore"], top.rows())

    with _stage("credit"):
        ledger = credit.compute_ledger(corpus)
        write_csv(art.path("credit_ledger.csv"), ["doc_id", "region", "fraction"],
                  [(doc.id, region, float(fraction))
                   for doc, entry in zip(corpus.documents, ledger.entries)
                   for region, fraction in sorted(entry.items())])
        shares = credit.aggregate_shares(corpus, ledger, branches, by=("branch",))
        write_csv(art.path("region_shares.csv"),
                  ["region", "year", "branch", "credit", "share"],
                  [(row.region, row.year, row.branch, row.credit, row.share)
                   for row in shares.rows])
        proportions = credit.region_year_proportions(corpus, ledger, branches)
        write_csv(art.path("region_year_proportions.csv"),
                  ["region", "year", "theory_share", "applied_share"],
                  [(p.region, p.year, p.theory_share, p.applied_share)
                   for p in proportions])

    with _stage("dependency"):
        graph = build_citation_graph(corpus)
        dep_config = dependency.DependencyConfig(r=config.r,
                                                 root_mode=config.root_mode)
        scores = dependency.propagate(graph, branches, dep_config)
        write_csv(art.path("dependency_scores.csv"),
                  ["doc_id", "status", "d_T", "i_T", "D_T"],
                  [(doc.id, s.status, s.direct_t, s.indirect_t, s.overall_t)
                   for doc, s in zip(corpus.documents, scores)])
        means = dependency.group_average(scores, branches)
        write_csv(art.path("dependency_groups.csv"),
                  ["group", "mean_D_T", "mean_D_A", "n_defined"],
                  [(g, *(pair if pair else (None, None)), means.counts.get(g, 0))
                   for g, pair in sorted(means.groups.items())])
        years = [doc.year for doc in corpus.documents]
        write_csv(art.path("dependency_yearly.csv"),
                  ["year", "group", "mean_D_T", "mean_D_A", "n_defined"],
                  dependency.yearly_average(scores, branches, years))
        write_csv(art.path("dependency_regions.csv"),
                  ["region", "year", "group", "mean_D_T", "mean_D_A", "n_defined"],
                  dependency.region_average(scores, branches, corpus))

    with _stage("trend"):
        trend = yearly_trend(corpus, branches, year_min=config.year_min)
        write_csv(art.path("trend.csv"), ["year", "branch", "count", "proportion"],
                  [(t.year, t.branch, t.count, t.proportion) for t in trend])

    if config.charts:
        with _stage("charts"):
            _emit_figures(art, trend, shares, proportions, scores, branches,
                          corpus, config)

    # manifest
    entries = sorted(
        {str(p.relative_to(art.outdir)) for p in art.created if p.exists()}
    )
    manifest = {
        "artifacts": [
            {"path": rel, "sha256": _sha256(art.outdir / rel)} for rel in entries
        ]
    }
    manifest_path = art.path("manifest.json")
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _emit_figures(art, trend, shares, proportions, scores, branches, corpus,
                  config) -> None:
    trend_rows = [(t.year, t.branch, t.count, t.proportion) for t in trend]
    charts.emit_chart(
        ["year", "branch", "count", "proportion"], trend_rows,
        charts.ChartSpec("line", x="year", y="proportion", series="branch",
                         title="Yearly branch shares", xlabel="year",
                         ylabel="share of papers"),
        art.path("figures/trend.svg"),
    )
    share_rows = [(r.region, r.branch, r.share)
                  for r in shares.filtered(config.min_share).rows]
    charts.emit_chart(
        ["region", "branch", "share"], share_rows,
        charts.ChartSpec("bar", x="region", y="share", series="branch",
                         title=f"Regional credit shares (>= {config.min_share:.0%})",
                         xlabel="region", ylabel="share of branch credit"),
        art.path("figures/region_shares.svg"),
    )
    # Regions worth a curve: at least min_share of credit in either branch.
    top_regions = sorted({r.region for r in shares.rows
                          if r.share >= config.min_share})
    prop_rows = [(p.region, p.year, p.theory_share) for p in proportions
                 if p.region in top_regions and p.year >= config.year_min]
    charts.emit_chart(
        ["region", "year", "theory_share"], prop_rows,
        charts.ChartSpec("line", x="year", y="theory_share", series="region",
                         title="Theory share of regional credit by year",
                         xlabel="year", ylabel="share of credit in T"),
        art.path("figures/region_trend.svg"),
    )
    years = [doc.year for doc in corpus.documents]
    yearly = dependency.yearly_average(scores, branches, years)
    dep_rows = [(year, group, mean_t) for year, group, mean_t, _, _ in yearly
                if year >= config.year_min]
    charts.emit_chart(
        ["year", "group", "mean_D_T"], dep_rows,
        charts.ChartSpec("line", x="year", y="mean_D_T", series="group",
                         title="Yearly mean dependency on the theoretical branch",
                         xlabel="year", ylabel="mean D_T"),
        art.path("figures/dependency_yearly.svg"),
    )
    regional = dependency.region_average(scores, branches, corpus,
                                         regions=top_regions or None)
    reg_rows = [(f"{region}:{group}", year, mean_t)
                for region, year, group, mean_t, _, _ in regional
                if year >= config.year_min]
    charts.emit_chart(
        ["series", "year", "mean_D_T"], reg_rows,
        charts.ChartSpec("line", x="year", y="mean_D_T", series="series",
                         title="Yearly mean dependency on T by region and group",
                         xlabel="year", ylabel="mean D_T"),
        art.path("figures/dependency_regions.svg"),
    )
