"""Keyword statistics: per-cluster counts, z-scores and ranking."""

from __future__ import annotations

import numpy as np
import pytest

from conftest import corpus_of, make_record
from scibranch.coclustering import BranchLabeling
from scibranch.errors import DataError
from scibranch.keywords import cluster_word_stats, top_keywords, zscore
from scibranch.text import TokenPipelineConfig, build_vocabulary


@pytest.fixture(scope="module")
def config():
    return TokenPipelineConfig()


def branches_for(corpus, labels):
    return BranchLabeling(doc_labels=tuple(labels), word_labels=())


class TestClusterWordStats:
    def test_hand_counted_six_doc_corpus(self, six_doc_corpus, config):
        vocab = build_vocabulary(six_doc_corpus, config, threshold=0.0)
        branches = branches_for(six_doc_corpus, ["T", "T", "T", "A", "A", "A"])
        stats = cluster_word_stats(six_doc_corpus, branches, vocab, config)
        k = {c: i for i, c in enumerate(stats.clusters)}
        w = {word: i for i, word in enumerate(stats.words)}
        # manual tally: 'spin' appears in T1, T2, T3 (documents, not tokens)
        assert stats.observed[k["T"], w["spin"]] == 3
        assert stats.observed[k["A"], w["spin"]] == 0
        # 'sensor' in A1, A2, A3
        assert stats.observed[k["A"], w["sensor"]] == 3
        # 'dirac' in T1 and T2 only (T2 has it twice but counts once)
        assert stats.observed[k["T"], w["dirac"]] == 2
        assert stats.cluster_sizes == (3, 3)
        assert stats.n_docs == 6

    def test_word_in_every_document_saturates(self, config):
        docs = [make_record(f"D{i}", title="graphene word%d" % i) for i in range(4)]
        corpus = corpus_of(*docs)
        vocab = build_vocabulary(corpus, config, threshold=0.0)
        branches = branches_for(corpus, ["T", "T", "A", "A"])
        stats = cluster_word_stats(corpus, branches, vocab, config)
        w = stats.words.index("graphen")
        total = sum(stats.observed[k, w] for k in range(len(stats.clusters)))
        assert total == len(corpus)
        assert stats.p_global(w) == 1.0

    def test_absent_word_is_zero(self, six_doc_corpus, config):
        vocab = build_vocabulary(six_doc_corpus, config, threshold=0.0)
        branches = branches_for(six_doc_corpus, ["T", "T", "T", "A", "A", "A"])
        stats = cluster_word_stats(six_doc_corpus, branches, vocab, config)
        k = {c: i for i, c in enumerate(stats.clusters)}
        w = stats.words.index("batteri")
        assert stats.observed[k["T"], w] == 0

    def test_conservation_across_clusters(self, six_doc_corpus, config):
        vocab = build_vocabulary(six_doc_corpus, config, threshold=0.0)
        branches = branches_for(six_doc_corpus, ["T", "A", "T", "A", "T", "A"])
        stats = cluster_word_stats(six_doc_corpus, branches, vocab, config)
        summed = stats.observed.sum(axis=0)
        assert np.array_equal(summed, stats.global_doc_freq)

    def test_labeling_must_cover_corpus(self, six_doc_corpus, config):
        vocab = build_vocabulary(six_doc_corpus, config, threshold=0.0)
        with pytest.raises(DataError):
            cluster_word_stats(six_doc_corpus, branches_for(six_doc_corpus, ["T"]),
                               vocab, config)


class TestZscore:
    def test_worked_value(self):
        assert zscore(20, 100, 0.1) == pytest.approx(10 / 3, abs=1e-12)

    def test_expectation_gives_zero(self):
        assert zscore(30.0, 100, 0.3) == 0.0

    def test_below_expectation_negative(self):
        assert zscore(5, 100, 0.1) < 0

    def test_degenerate_p_rejected(self):
        with pytest.raises(DataError):
            zscore(5, 10, 0.0)
        with pytest.raises(DataError):
            zscore(5, 10, 1.0)

    def test_zero_cluster_rejected(self):
        with pytest.raises(DataError):
            zscore(0, 0, 0.5)

    def test_variance_denominator_mode(self):
        # same numerator, divided by N*P*(1-P) instead of its square root
        assert zscore(20, 100, 0.1, denominator="variance") == pytest.approx(
            10 / 9, abs=1e-12
        )

    def test_monte_carlo_standardization(self):
        rng = np.random.default_rng(0)
        n_k, p_w = 500, 0.2
        draws = rng.binomial(n_k, p_w, size=2000)
        zs = [zscore(mu, n_k, p_w) for mu in draws]
        assert abs(np.mean(zs)) < 0.05
        assert np.var(zs) == pytest.approx(1.0, abs=0.1)

    def test_opposite_signs_in_two_cluster_labeling(self, six_doc_corpus, config):
        vocab = build_vocabulary(six_doc_corpus, config, threshold=0.0)
        branches = branches_for(six_doc_corpus, ["T", "T", "T", "A", "A", "A"])
        stats = cluster_word_stats(six_doc_corpus, branches, vocab, config)
        k = {c: i for i, c in enumerate(stats.clusters)}
        for w in range(len(stats.words)):
            p_w = stats.p_global(w)
            if not 0 < p_w < 1:
                continue
            z_t = zscore(stats.observed[k["T"], w], stats.cluster_sizes[k["T"]], p_w)
            z_a = zscore(stats.observed[k["A"], w], stats.cluster_sizes[k["A"]], p_w)
            assert z_t * z_a <= 1e-12


def synthetic_corpus(n_docs=50):
    """Cluster-1 documents always contain 'plasmon'; fillers differ."""
    docs = []
    labels = []
    for i in range(n_docs):
        in_cluster_1 = i % 2 == 0
        words = ["carbon", "film"]
        if in_cluster_1:
            words += ["plasmon", "lattice"]
        else:
            words += ["electrode"] if i % 4 == 1 else ["electrode", "lattice"]
        docs.append(make_record(f"D{i}", title=" ".join(words)))
        labels.append("one" if in_cluster_1 else "two")
    return corpus_of(*docs), labels


class TestTopKeywords:
    def test_exclusive_frequent_word_ranks_first(self, config):
        corpus, labels = synthetic_corpus()
        vocab = build_vocabulary(corpus, config, threshold=0.0)
        branches = branches_for(corpus, labels)
        stats = cluster_word_stats(corpus, branches, vocab, config)
        top = top_keywords(stats, top_frequency_quantile=1.0, n=3)

        # brute-force ranking oracle for cluster 'one'
        k = stats.clusters.index("one")
        scored = []
        for w, word in enumerate(stats.words):
            p_w = stats.p_global(w)
            if 0 < p_w < 1:
                scored.append((word,
                               zscore(stats.observed[k, w],
                                      stats.cluster_sizes[k], p_w)))
        scored.sort(key=lambda t: (-t[1], t[0]))
        assert [e.word for e in top.per_cluster["one"]] == [w for w, _ in scored[:3]]
        assert top.per_cluster["one"][0].word == "plasmon"

    def test_saturated_word_skipped_with_reason(self, config):
        corpus, labels = synthetic_corpus()
        vocab = build_vocabulary(corpus, config, threshold=0.0)
        stats = cluster_word_stats(corpus, branches_for(corpus, labels), vocab, config)
        top = top_keywords(stats, top_frequency_quantile=1.0, n=10)
        skipped_words = {w for w, _ in top.skipped}
        assert "carbon" in skipped_words  # P_w == 1
        for entries in top.per_cluster.values():
            assert all(e.word != "carbon" for e in entries)

    def test_n_zero_returns_empty(self, config):
        corpus, labels = synthetic_corpus()
        vocab = build_vocabulary(corpus, config, threshold=0.0)
        stats = cluster_word_stats(corpus, branches_for(corpus, labels), vocab, config)
        top = top_keywords(stats, n=0)
        assert all(entries == [] for entries in top.per_cluster.values())

    def test_pool_smaller_than_n_returns_pool(self, config):
        corpus, labels = synthetic_corpus()
        vocab = build_vocabulary(corpus, config, threshold=0.0)
        stats = cluster_word_stats(corpus, branches_for(corpus, labels), vocab, config)
        top = top_keywords(stats, top_frequency_quantile=0.2, n=100)
        for entries in top.per_cluster.values():
            assert len(entries) <= top.pool_size

    def test_pool_restricts_to_top_frequency(self, config):
        corpus, labels = synthetic_corpus()
        vocab = build_vocabulary(corpus, config, threshold=0.0)
        stats = cluster_word_stats(corpus, branches_for(corpus, labels), vocab, config)
        top = top_keywords(stats, top_frequency_quantile=0.4, n=100)
        pool_words = {e.word for entries in top.per_cluster.values() for e in entries}
        freqs = sorted(stats.global_doc_freq, reverse=True)
        cutoff = freqs[top.pool_size - 1]
        for word in pool_words:
            assert stats.global_doc_freq[stats.words.index(word)] >= cutoff

    def test_ranking_invariant_under_document_reorder(self, config):
        corpus, labels = synthetic_corpus()
        order = np.random.default_rng(3).permutation(len(labels))
        shuffled = corpus_of(*(corpus.documents[i] for i in order))
        shuffled_labels = [labels[i] for i in order]
        vocab = build_vocabulary(corpus, config, threshold=0.0)
        top1 = top_keywords(cluster_word_stats(
            corpus, branches_for(corpus, labels), vocab, config), 1.0, 5)
        top2 = top_keywords(cluster_word_stats(
            shuffled, branches_for(shuffled, shuffled_labels), vocab, config), 1.0, 5)
        for cluster in top1.per_cluster:
            assert [e.word for e in top1.per_cluster[cluster]] == \
                   [e.word for e in top2.per_cluster[cluster]]

    def test_rows_format(self, config):
        corpus, labels = synthetic_corpus()
        vocab = build_vocabulary(corpus, config, threshold=0.0)
        stats = cluster_word_stats(corpus, branches_for(corpus, labels), vocab, config)
        rows = top_keywords(stats, 1.0, 2).rows()
        assert rows[0][0] == "one" and rows[0][1] == 1
        assert len(rows) == 4
