"""Shared fixtures: tiny hand-built corpora and records."""

from __future__ import annotations

import json

import pytest

from scibranch.records import Affiliation, Author, Corpus, Record


def make_record(
    rec_id: str,
    title: str = "a title",
    abstract: str = "",
    year: int | None = 2010,
    doi: str | None = None,
    doc_type: str = "Article",
    authors: tuple = (),
    references: tuple = (),
) -> Record:
    return Record(
        id=rec_id,
        doi=doi if doi is not None else f"10.1/{rec_id.lower()}",
        title=title,
        abstract=abstract,
        year=year,
        doc_type=doc_type,
        authors=authors,
        references=references,
    )


def make_author(name: str, *regions: str) -> Author:
    return Author(
        name=name,
        affiliations=tuple(Affiliation(raw=f"Somewhere, {r}", region=r) for r in regions),
    )


def corpus_of(*records: Record) -> Corpus:
    return Corpus.from_documents(records)


def jsonl_line(**fields) -> str:
    base = {
        "id": "W1",
        "doi": "10.1/w1",
        "title": "a title",
        "abstract": "an abstract",
        "year": 2012,
        "doc_type": "Article",
        "authors": [],
        "references": [],
    }
    base.update(fields)
    return json.dumps(base)


@pytest.fixture
def six_doc_corpus() -> Corpus:
    """Three theory-flavored and three application-flavored documents."""
    docs = [
        make_record("T1", title="dirac spin lattice", abstract="spin gap"),
        make_record("T2", title="spin lattice", abstract="dirac dirac"),
        make_record("T3", title="lattice gap", abstract="spin transport"),
        make_record("A1", title="sensor electrode", abstract="electrode cycling"),
        make_record("A2", title="electrode battery", abstract="sensor sensor"),
        make_record("A3", title="battery cycling", abstract="electrode sensor"),
    ]
    return corpus_of(*docs)
