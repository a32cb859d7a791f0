"""Fractional allocation of each paper's unit credit across regions.

Credit splits evenly over authors, then evenly over each author's
affiliation entries (duplicate same-region entries count separately),
and accumulates by region code. Exact rational arithmetic keeps every
per-paper ledger summing to one.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction

from .coclustering import BranchLabeling
from .errors import DataError
from .records import UNKNOWN_REGION, Corpus, Record

logger = logging.getLogger(__name__)


def paper_credit(document: Record) -> dict[str, Fraction]:
    """One unit of credit split over the document's regions.

    Each author holds 1/n_authors; an author's share splits uniformly over
    that author's affiliation entries. Authors without any recorded
    affiliation, and documents without authors, put their share under the
    UNKNOWN region rather than dropping it.
    """
    if not document.authors:
        logger.warning("document %s has no authors; crediting UNKNOWN", document.id)
        return {UNKNOWN_REGION: Fraction(1)}
    credit: dict[str, Fraction] = {}
    author_share = Fraction(1, len(document.authors))
    for author in document.authors:
        if not author.affiliations:
            credit[UNKNOWN_REGION] = credit.get(UNKNOWN_REGION, Fraction(0)) + author_share
            continue
        affil_share = author_share / len(author.affiliations)
        for affil in author.affiliations:
            region = affil.region or UNKNOWN_REGION
            credit[region] = credit.get(region, Fraction(0)) + affil_share
    return credit


@dataclass
class CreditLedger:
    """Per-document region credit, aligned with corpus document order."""

    entries: tuple[dict[str, Fraction], ...]

    def __len__(self) -> int:
        return len(self.entries)


def compute_ledger(corpus: Corpus) -> CreditLedger:
    return CreditLedger(entries=tuple(paper_credit(doc) for doc in corpus.documents))


@dataclass
class ShareRow:
    region: str
    year: int | None
    branch: str | None
    credit: float
    share: float


@dataclass
class RegionShareTable:
    rows: list[ShareRow]

    def filtered(self, min_share: float) -> "RegionShareTable":
        return RegionShareTable([r for r in self.rows if r.share >= min_share])


def aggregate_shares(
    corpus: Corpus,
    ledger: CreditLedger,
    branches: BranchLabeling | None = None,
    by: tuple[str, ...] = ("branch",),
    min_share: float | None = None,
) -> RegionShareTable:
    """Sum credit by region within each requested (year, branch) slice.

    ``by`` may contain 'year' and/or 'branch'; region is always a key.
    Shares are computed against the slice total before any ``min_share``
    display filter is applied.
    """
    if len(ledger) != len(corpus):
        raise DataError("ledger does not cover the corpus")
    use_year = "year" in by
    use_branch = "branch" in by
    unknown = [f for f in by if f not in ("year", "branch")]
    if unknown:
        raise DataError(f"unknown group-by field(s) {unknown}")
    if use_branch and branches is None:
        raise DataError("branch grouping requested without a branch labeling")

    totals: dict[tuple, float] = {}
    for pos, doc in enumerate(corpus.documents):
        year = doc.year if use_year else None
        branch = branches.doc_labels[pos] if use_branch else None
        for region, fraction in ledger.entries[pos].items():
            key = (region, year, branch)
            totals[key] = totals.get(key, 0.0) + float(fraction)

    slice_totals: dict[tuple, float] = {}
    for (region, year, branch), credit in totals.items():
        slice_key = (year, branch)
        slice_totals[slice_key] = slice_totals.get(slice_key, 0.0) + credit

    rows = [
        ShareRow(
            region=region,
            year=year,
            branch=branch,
            credit=credit,
            share=credit / slice_totals[(year, branch)],
        )
        for (region, year, branch), credit in totals.items()
    ]
    rows.sort(key=lambda r: (
        r.year if r.year is not None else -1,
        r.branch or "",
        -r.credit,
        r.region,
    ))
    table = RegionShareTable(rows)
    if min_share is not None:
        table = table.filtered(min_share)
    return table


@dataclass
class ProportionRow:
    region: str
    year: int
    theory_share: float
    applied_share: float


def region_year_proportions(
    corpus: Corpus, ledger: CreditLedger, branches: BranchLabeling
) -> list[ProportionRow]:
    """Credit-based T/A proportion per region and year.

    Region-years with no credit are simply absent from the output; chart
    rendering turns those into visible line breaks.
    """
    if len(ledger) != len(corpus) or len(branches) != len(corpus):
        raise DataError("ledger or labeling does not cover the corpus")
    credit_t: dict[tuple[str, int], float] = {}
    credit_a: dict[tuple[str, int], float] = {}
    for pos, doc in enumerate(corpus.documents):
        if doc.year is None:
            continue
        bucket = credit_t if branches.doc_labels[pos] == "T" else credit_a
        for region, fraction in ledger.entries[pos].items():
            key = (region, doc.year)
            bucket[key] = bucket.get(key, 0.0) + float(fraction)
    rows = []
    for key in sorted(set(credit_t) | set(credit_a)):
        region, year = key
        c_t = credit_t.get(key, 0.0)
        c_a = credit_a.get(key, 0.0)
        total = c_t + c_a
        if total <= 0:
            continue
        rows.append(ProportionRow(region, year, c_t / total, c_a / total))
    return rows
