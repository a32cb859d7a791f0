"""Token pipeline, feature vocabulary and sparse document-term matrix."""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from scipy import sparse

from . import stemmer
from .errors import DataError, EmptyVocabularyError
from .records import Corpus

# Unicode alphanumeric runs; anything else (hyphens included) splits tokens.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

DEFAULT_THRESHOLD = 0.0001


def load_stopwords(path=None) -> frozenset[str]:
    """Read a stopword file, one word per line, '#' comments allowed."""
    if path is None:
        ref = resources.files("scibranch.data").joinpath("stopwords_en.txt")
        text = ref.read_text(encoding="utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    words = set()
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line.lower())
    return frozenset(words)


@dataclass(frozen=True)
class TokenPipelineConfig:
    stopwords: frozenset[str] = field(default_factory=load_stopwords)
    stemmer: str = "porter"
    min_token_len: int = 2
    fold_case: bool = True

    def __post_init__(self):
        if self.min_token_len < 1:
            raise DataError("min_token_len must be >= 1")
        if self.stemmer not in ("porter", "none"):
            raise DataError(f"unknown stemmer '{self.stemmer}'")


def tokenize(text: str, config: TokenPipelineConfig) -> list[str]:
    """Split on non-alphanumerics, drop numbers and stopwords, stem, filter."""
    tokens = _TOKEN_RE.findall(text)
    if config.fold_case:
        tokens = [t.lower() for t in tokens]
    out = []
    for t in tokens:
        if t.isdigit():
            continue
        if t in config.stopwords:
            continue
        if config.stemmer == "porter":
            t = stemmer.stem(t)
        if len(t) >= config.min_token_len:
            out.append(t)
    return out


def tokenize_corpus(corpus: Corpus, config: TokenPipelineConfig) -> list[list[str]]:
    return [tokenize(doc.text, config) for doc in corpus.documents]


@dataclass
class Vocabulary:
    """Feature words kept by the document-frequency threshold.

    Words are sorted lexicographically; ``doc_freq[i]`` is the number of
    corpus documents containing ``words[i]`` at least once.
    """

    words: tuple[str, ...]
    doc_freq: tuple[int, ...]
    threshold: float

    def __post_init__(self):
        self.index = {w: i for i, w in enumerate(self.words)}

    def __len__(self) -> int:
        return len(self.words)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for word in self.words:
                fh.write(word + "\n")


def load_vocabulary_words(path) -> tuple[str, ...]:
    with open(path, encoding="utf-8") as fh:
        return tuple(line.rstrip("\n") for line in fh if line.strip())


def build_vocabulary(
    corpus: Corpus,
    config: TokenPipelineConfig,
    threshold: float = DEFAULT_THRESHOLD,
    mode: str = "document",
    tokens: list[list[str]] | None = None,
) -> Vocabulary:
    """Keep words whose frequency strictly exceeds ``threshold`` x corpus size.

    ``mode='document'`` counts documents containing the word (the default
    reading of the threshold); ``mode='token'`` counts token occurrences
    against the total token count instead.
    """
    if len(corpus) == 0:
        raise DataError("corpus is empty")
    if mode not in ("document", "token"):
        raise DataError(f"unknown vocabulary mode '{mode}'")
    if tokens is None:
        tokens = tokenize_corpus(corpus, config)
    doc_freq: dict[str, int] = {}
    tok_freq: dict[str, int] = {}
    for doc_tokens in tokens:
        for t in set(doc_tokens):
            doc_freq[t] = doc_freq.get(t, 0) + 1
        for t in doc_tokens:
            tok_freq[t] = tok_freq.get(t, 0) + 1
    if mode == "document":
        cutoff = threshold * len(corpus)
        kept = [w for w, f in doc_freq.items() if f > cutoff]
    else:
        total = sum(tok_freq.values())
        cutoff = threshold * total
        kept = [w for w, f in tok_freq.items() if f > cutoff]
    if not kept:
        raise EmptyVocabularyError(
            f"no word exceeds the {threshold:g} frequency threshold"
        )
    kept.sort()
    return Vocabulary(
        words=tuple(kept),
        doc_freq=tuple(doc_freq[w] for w in kept),
        threshold=threshold,
    )


@dataclass
class DocTermMatrix:
    """Sparse nonnegative count matrix, documents x vocabulary words."""

    counts: sparse.csr_matrix
    doc_ids: tuple[str, ...]
    words: tuple[str, ...]

    @property
    def shape(self) -> tuple[int, int]:
        return self.counts.shape

    def total(self) -> int:
        return int(self.counts.sum())

    def save(self, path) -> None:
        """Write 'row,col,count' triplets plus a '<path>.docs' id sidecar."""
        coo = self.counts.tocoo()
        order = np.lexsort((coo.col, coo.row))
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["row", "col", "count"])
            for i in order:
                writer.writerow([int(coo.row[i]), int(coo.col[i]), int(coo.data[i])])
        with open(f"{path}.docs", "w", encoding="utf-8") as fh:
            for doc_id in self.doc_ids:
                fh.write(doc_id + "\n")

    @classmethod
    def load(cls, path, words: tuple[str, ...]) -> "DocTermMatrix":
        with open(f"{path}.docs", encoding="utf-8") as fh:
            doc_ids = tuple(line.rstrip("\n") for line in fh if line.strip())
        rows, cols, data = [], [], []
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["row", "col", "count"]:
                raise DataError(f"{path}: not a coordinate-triplet matrix file")
            for rec in reader:
                rows.append(int(rec[0]))
                cols.append(int(rec[1]))
                data.append(int(rec[2]))
        counts = sparse.csr_matrix(
            (data, (rows, cols)), shape=(len(doc_ids), len(words)), dtype=np.int64
        )
        return cls(counts=counts, doc_ids=doc_ids, words=words)


def build_matrix(
    corpus: Corpus,
    vocabulary: Vocabulary,
    config: TokenPipelineConfig,
    tokens: list[list[str]] | None = None,
) -> DocTermMatrix:
    """Count vocabulary words per document; all-zero rows are kept."""
    if tokens is None:
        tokens = tokenize_corpus(corpus, config)
    index = vocabulary.index
    rows, cols, data = [], [], []
    for p, doc_tokens in enumerate(tokens):
        counts: dict[int, int] = {}
        for t in doc_tokens:
            n = index.get(t)
            if n is not None:
                counts[n] = counts.get(n, 0) + 1
        for n in sorted(counts):
            rows.append(p)
            cols.append(n)
            data.append(counts[n])
    counts_mat = sparse.csr_matrix(
        (data, (rows, cols)),
        shape=(len(corpus), len(vocabulary)),
        dtype=np.int64,
    )
    return DocTermMatrix(
        counts=counts_mat,
        doc_ids=tuple(doc.id for doc in corpus.documents),
        words=vocabulary.words,
    )
