"""Bibliographic record parsing, corpus filtering and citation graph building.

Input is line-delimited JSON, one record per line, with fields
``id, doi, title, abstract, year, doc_type, authors, references`` where
``authors`` is a list of ``{name, affiliations: [{raw, region}]}``. The
``region`` key is optional; when absent it is inferred from ``raw`` with a
substring lookup table (see :class:`RegionMap`).
"""

from __future__ import annotations

import datetime
import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Iterable, TextIO

from .errors import DataError, DuplicateIdError, EmptyCorpusError

UNKNOWN_REGION = "UNKNOWN"

MIN_YEAR = 1900


@dataclass(frozen=True)
class Affiliation:
    raw: str
    region: str


@dataclass(frozen=True)
class Author:
    name: str
    affiliations: tuple[Affiliation, ...] = ()


@dataclass(frozen=True)
class Record:
    id: str
    doi: str | None
    title: str
    abstract: str
    year: int | None
    doc_type: str
    authors: tuple[Author, ...] = ()
    references: tuple[str, ...] = ()

    @property
    def text(self) -> str:
        """Title and abstract joined with a single space."""
        return f"{self.title} {self.abstract}" if self.abstract else self.title


class RegionMap:
    """Maps raw affiliation strings to region codes by substring search.

    Among all table substrings present in the lowercased affiliation the
    longest one wins; ties go to the earliest table row. Unmatched strings
    map to the UNKNOWN sentinel, which flows through credit accounting as
    its own category.
    """

    def __init__(self, entries: Iterable[tuple[str, str]]):
        self.entries = [(sub.lower(), code.upper()) for sub, code in entries]

    @classmethod
    def from_csv(cls, path) -> "RegionMap":
        entries = []
        with open(path, encoding="utf-8") as fh:
            header = fh.readline()
            if header.strip().lower() not in ("substring,code", ""):
                # no header row: treat the first line as data
                sub, _, code = header.partition(",")
                entries.append((sub.strip(), code.strip()))
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                sub, _, code = line.partition(",")
                if not sub or not code:
                    raise DataError(f"bad region map line: {line!r}")
                entries.append((sub.strip(), code.strip()))
        return cls(entries)

    @classmethod
    def bundled(cls) -> "RegionMap":
        ref = resources.files("scibranch.data").joinpath("regions.csv")
        with resources.as_file(ref) as path:
            return cls.from_csv(path)

    def lookup(self, raw: str) -> str:
        text = raw.lower()
        best = None
        best_len = 0
        for sub, code in self.entries:
            if len(sub) > best_len and sub in text:
                best, best_len = code, len(sub)
        return best if best is not None else UNKNOWN_REGION


@dataclass
class ParseIssue:
    line_no: int
    message: str


@dataclass
class ParseReport:
    n_lines: int = 0
    n_parsed: int = 0
    issues: list[ParseIssue] = field(default_factory=list)

    def add(self, line_no: int, message: str) -> None:
        self.issues.append(ParseIssue(line_no, message))


def _parse_author(entry, region_map: RegionMap) -> Author:
    if isinstance(entry, str):
        return Author(name=entry)
    name = str(entry.get("name", ""))
    affils = []
    for a in entry.get("affiliations") or []:
        if isinstance(a, str):
            a = {"raw": a}
        raw = str(a.get("raw", ""))
        region = a.get("region")
        if region:
            region = str(region).upper()
        else:
            region = region_map.lookup(raw)
        affils.append(Affiliation(raw=raw, region=region))
    return Author(name=name, affiliations=tuple(affils))


def _parse_jsonl_line(line: str, region_map: RegionMap) -> Record:
    obj = json.loads(line)
    if not isinstance(obj, dict):
        raise ValueError("record is not an object")
    rec_id = obj.get("id")
    if not isinstance(rec_id, str) or not rec_id.strip():
        raise ValueError("missing or empty 'id'")
    if "title" not in obj or not isinstance(obj["title"], str):
        raise ValueError("missing 'title'")
    doi = obj.get("doi")
    doi = str(doi).strip() if doi else None
    year = obj.get("year")
    if year is not None:
        try:
            year = int(year)
        except (TypeError, ValueError):
            year = None
    refs = obj.get("references") or []
    if not isinstance(refs, list):
        raise ValueError("'references' is not a list")
    authors = obj.get("authors") or []
    if not isinstance(authors, list):
        raise ValueError("'authors' is not a list")
    return Record(
        id=rec_id.strip(),
        doi=doi,
        title=obj["title"],
        abstract=str(obj.get("abstract") or ""),
        year=year,
        doc_type=str(obj.get("doc_type") or ""),
        authors=tuple(_parse_author(a, region_map) for a in authors),
        references=tuple(str(r) for r in refs),
    )


_LINE_PARSERS: dict[str, Callable[[str, RegionMap], Record]] = {
    "jsonl": _parse_jsonl_line,
}


def register_format(name: str, parser: Callable[[str, RegionMap], Record]) -> None:
    """Converter hook: register a line parser for another input format."""
    _LINE_PARSERS[name] = parser


def parse_records(
    stream: Iterable[str] | TextIO,
    fmt: str = "jsonl",
    region_map: RegionMap | None = None,
) -> tuple[list[Record], ParseReport]:
    """Parse one record per line, collecting per-line errors.

    Malformed lines are skipped and reported with their line number in the
    returned :class:`ParseReport`. A duplicate id aborts parsing.
    """
    if fmt not in _LINE_PARSERS:
        raise DataError(f"unknown input format '{fmt}'")
    parse_line = _LINE_PARSERS[fmt]
    if region_map is None:
        region_map = RegionMap.bundled()
    records: list[Record] = []
    seen: set[str] = set()
    report = ParseReport()
    for line_no, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        report.n_lines += 1
        try:
            record = parse_line(line, region_map)
        except (ValueError, KeyError, TypeError) as exc:
            report.add(line_no, str(exc))
            continue
        if record.id in seen:
            raise DuplicateIdError(f"duplicate record id '{record.id}' at line {line_no}")
        seen.add(record.id)
        records.append(record)
        report.n_parsed += 1
    return records, report


# Exclusion reasons, checked in this order; each record counts once.
REASON_DOC_TYPE = "doc_type"
REASON_MISSING_DOI = "missing_doi"
REASON_MISSING_YEAR = "missing_year"
REASON_YEAR_OUT_OF_RANGE = "year_out_of_range"

FILTER_REASONS = (
    REASON_DOC_TYPE,
    REASON_MISSING_DOI,
    REASON_MISSING_YEAR,
    REASON_YEAR_OUT_OF_RANGE,
)


@dataclass
class FilterReport:
    n_input: int
    n_retained: int
    exclusions: dict[str, int]

    def rows(self) -> list[tuple[str, int]]:
        return [(reason, self.exclusions.get(reason, 0)) for reason in FILTER_REASONS]


@dataclass
class Corpus:
    """Filtered documents plus id and doi indexes.

    Every document has a nonempty doi, a defined in-range year and
    doc_type 'Article' (case-insensitive). Document order follows the
    input stream.
    """

    documents: tuple[Record, ...]
    index: dict[str, int]
    doi_index: dict[str, int]

    def __len__(self) -> int:
        return len(self.documents)

    @classmethod
    def from_documents(cls, documents: Iterable[Record]) -> "Corpus":
        docs = tuple(documents)
        index: dict[str, int] = {}
        doi_index: dict[str, int] = {}
        for pos, doc in enumerate(docs):
            index[doc.id] = pos
            if doc.doi:
                doi_index[doc.doi.lower()] = pos
        return cls(documents=docs, index=index, doi_index=doi_index)

    def to_json(self) -> str:
        payload = {
            "format": "scibranch-corpus-v1",
            "documents": [
                {
                    "id": d.id,
                    "doi": d.doi,
                    "title": d.title,
                    "abstract": d.abstract,
                    "year": d.year,
                    "doc_type": d.doc_type,
                    "authors": [
                        {
                            "name": a.name,
                            "affiliations": [
                                {"raw": af.raw, "region": af.region}
                                for af in a.affiliations
                            ],
                        }
                        for a in d.authors
                    ],
                    "references": list(d.references),
                }
                for d in self.documents
            ],
        }
        return json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=1)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "Corpus":
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        if payload.get("format") != "scibranch-corpus-v1":
            raise DataError(f"{path}: not a corpus snapshot")
        docs = []
        for d in payload["documents"]:
            docs.append(
                Record(
                    id=d["id"],
                    doi=d["doi"],
                    title=d["title"],
                    abstract=d["abstract"],
                    year=d["year"],
                    doc_type=d["doc_type"],
                    authors=tuple(
                        Author(
                            name=a["name"],
                            affiliations=tuple(
                                Affiliation(raw=af["raw"], region=af["region"])
                                for af in a["affiliations"]
                            ),
                        )
                        for a in d["authors"]
                    ),
                    references=tuple(d["references"]),
                )
            )
        return cls.from_documents(docs)


def filter_corpus(
    records: Iterable[Record], max_year: int | None = None
) -> tuple[Corpus, FilterReport]:
    """Keep research articles with a doi and an in-range publication year."""
    if max_year is None:
        max_year = datetime.date.today().year
    kept: list[Record] = []
    exclusions = {reason: 0 for reason in FILTER_REASONS}
    n_input = 0
    for rec in records:
        n_input += 1
        if rec.doc_type.strip().lower() != "article":
            exclusions[REASON_DOC_TYPE] += 1
        elif not rec.doi:
            exclusions[REASON_MISSING_DOI] += 1
        elif rec.year is None:
            exclusions[REASON_MISSING_YEAR] += 1
        elif not (MIN_YEAR <= rec.year <= max_year):
            exclusions[REASON_YEAR_OUT_OF_RANGE] += 1
        else:
            kept.append(rec)
    if not kept:
        raise EmptyCorpusError("no analyzable documents after filtering")
    report = FilterReport(n_input=n_input, n_retained=len(kept), exclusions=exclusions)
    return Corpus.from_documents(kept), report


@dataclass
class CitationGraph:
    """Within-corpus citation edges, citing position -> cited positions.

    ``out_refs[p]`` lists the corpus positions cited by document ``p``,
    sorted and deduplicated. References that do not resolve to a corpus
    member are only counted (``n_external_refs``).
    """

    n_docs: int
    out_refs: tuple[tuple[int, ...], ...]
    n_edges: int
    n_refs_total: int
    n_external_refs: int
    n_self_refs: int
    n_duplicate_refs: int

    def in_degrees(self) -> list[int]:
        degrees = [0] * self.n_docs
        for targets in self.out_refs:
            for t in targets:
                degrees[t] += 1
        return degrees


def build_citation_graph(corpus: Corpus) -> CitationGraph:
    """Resolve each document's references by id, then by lowercased doi."""
    out_refs: list[tuple[int, ...]] = []
    n_edges = n_total = n_external = n_self = n_dup = 0
    for pos, doc in enumerate(corpus.documents):
        targets: set[int] = set()
        for ref in doc.references:
            n_total += 1
            ref_norm = ref.strip()
            target = corpus.index.get(ref_norm)
            if target is None:
                target = corpus.doi_index.get(ref_norm.lower())
            if target is None:
                n_external += 1
            elif target == pos:
                n_self += 1
            elif target in targets:
                n_dup += 1
            else:
                targets.add(target)
        resolved = tuple(sorted(targets))
        n_edges += len(resolved)
        out_refs.append(resolved)
    return CitationGraph(
        n_docs=len(corpus),
        out_refs=tuple(out_refs),
        n_edges=n_edges,
        n_refs_total=n_total,
        n_external_refs=n_external,
        n_self_refs=n_self,
        n_duplicate_refs=n_dup,
    )
