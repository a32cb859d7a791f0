"""Branch-characteristic keywords ranked by binomial z-score.

For word w and cluster k with N_k documents, the observed count is the
number of cluster-k documents containing w; under the null that w is
spread binomially with its corpus-wide document frequency P_w, the
z-score is (observed - N_k*P_w) / sqrt(N_k*P_w*(1-P_w)). High-z words in
a cluster are used more often there than chance predicts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coclustering import BranchLabeling
from .errors import DataError
from .records import Corpus
from .text import TokenPipelineConfig, Vocabulary, tokenize

DEFAULT_TOP_QUANTILE = 0.02
DEFAULT_TOP_N = 25

# 'variance' divides by the raw binomial variance instead of its square
# root, for comparison against tables produced with that convention.
DENOMINATOR_MODES = ("sqrt", "variance")


@dataclass
class ClusterWordStats:
    """Per-(word, cluster) document counts against corpus-wide frequency."""

    clusters: tuple[str, ...]
    words: tuple[str, ...]
    observed: np.ndarray  # (n_clusters, n_words) document counts
    cluster_sizes: tuple[int, ...]
    global_doc_freq: np.ndarray  # (n_words,) documents containing the word
    n_docs: int

    def p_global(self, word_idx: int) -> float:
        return float(self.global_doc_freq[word_idx]) / self.n_docs


def cluster_word_stats(
    corpus: Corpus,
    branches: BranchLabeling,
    vocabulary: Vocabulary,
    config: TokenPipelineConfig,
    tokens: list[list[str]] | None = None,
) -> ClusterWordStats:
    """Count documents containing each word, per cluster and corpus-wide."""
    if len(branches) != len(corpus):
        raise DataError("branch labeling does not cover the corpus")
    clusters = tuple(sorted(set(branches.doc_labels)))
    cluster_idx = {c: i for i, c in enumerate(clusters)}
    observed = np.zeros((len(clusters), len(vocabulary)), dtype=np.int64)
    sizes = [0] * len(clusters)
    for p, doc in enumerate(corpus.documents):
        doc_tokens = tokens[p] if tokens is not None else tokenize(doc.text, config)
        k = cluster_idx[branches.doc_labels[p]]
        sizes[k] += 1
        present = {vocabulary.index[t] for t in set(doc_tokens) if t in vocabulary.index}
        for n in present:
            observed[k, n] += 1
    return ClusterWordStats(
        clusters=clusters,
        words=vocabulary.words,
        observed=observed,
        cluster_sizes=tuple(sizes),
        global_doc_freq=observed.sum(axis=0),
        n_docs=len(corpus),
    )


def zscore(observed: float, n_k: int, p_w: float, denominator: str = "sqrt") -> float:
    """Standardized deviation of an in-cluster document count from its mean."""
    if n_k <= 0:
        raise DataError("cluster size must be positive")
    if not 0.0 < p_w < 1.0:
        raise DataError(f"z-score undefined for P_w={p_w}")
    if denominator not in DENOMINATOR_MODES:
        raise DataError(f"unknown denominator mode '{denominator}'")
    mean = n_k * p_w
    variance = n_k * p_w * (1.0 - p_w)
    if denominator == "sqrt":
        return (observed - mean) / math.sqrt(variance)
    return (observed - mean) / variance


@dataclass
class KeywordEntry:
    word: str
    cluster: str
    observed: int
    expected: float
    zscore: float
    global_doc_freq: float  # fraction of all documents containing the word


@dataclass
class TopKeywords:
    per_cluster: dict[str, list[KeywordEntry]]
    pool_size: int
    skipped: list[tuple[str, str]] = field(default_factory=list)

    def rows(self) -> list[tuple]:
        out = []
        for cluster in sorted(self.per_cluster):
            for rank, entry in enumerate(self.per_cluster[cluster], start=1):
                out.append(
                    (cluster, rank, entry.word, entry.global_doc_freq, entry.zscore)
                )
        return out


def top_keywords(
    stats: ClusterWordStats,
    top_frequency_quantile: float = DEFAULT_TOP_QUANTILE,
    n: int = DEFAULT_TOP_N,
    denominator: str = "sqrt",
) -> TopKeywords:
    """Rank the top-frequency word pool by z-score within each cluster.

    The candidate pool is the ceil(quantile * vocabulary) most frequent
    words by corpus-wide document frequency (frequency ties broken
    alphabetically); within the pool, each cluster ranks by descending
    z-score, again breaking ties alphabetically. Words with degenerate
    global frequency (every document or none) have no defined z-score and
    are skipped with a reason.
    """
    if not 0 < top_frequency_quantile <= 1:
        raise DataError("top_frequency_quantile must be in (0, 1]")
    if n < 0:
        raise DataError("n must be >= 0")
    n_words = len(stats.words)
    pool_size = min(n_words, math.ceil(top_frequency_quantile * n_words))
    by_freq = sorted(
        range(n_words), key=lambda i: (-int(stats.global_doc_freq[i]), stats.words[i])
    )
    pool = by_freq[:pool_size]

    per_cluster: dict[str, list[KeywordEntry]] = {}
    skipped: list[tuple[str, str]] = []
    skipped_words: set[str] = set()
    for k, cluster in enumerate(stats.clusters):
        n_k = stats.cluster_sizes[k]
        entries = []
        for i in pool:
            p_w = stats.p_global(i)
            if not 0.0 < p_w < 1.0:
                if stats.words[i] not in skipped_words:
                    skipped_words.add(stats.words[i])
                    skipped.append(
                        (stats.words[i], f"degenerate global frequency P_w={p_w:g}")
                    )
                continue
            entries.append(
                KeywordEntry(
                    word=stats.words[i],
                    cluster=cluster,
                    observed=int(stats.observed[k, i]),
                    expected=n_k * p_w,
                    zscore=zscore(stats.observed[k, i], n_k, p_w, denominator),
                    global_doc_freq=p_w,
                )
            )
        entries.sort(key=lambda e: (-e.zscore, e.word))
        per_cluster[cluster] = entries[:n] if n else []
    return TopKeywords(per_cluster=per_cluster, pool_size=pool_size, skipped=skipped)
