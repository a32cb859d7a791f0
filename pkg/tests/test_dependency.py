"""Dependency propagation against a memoized recursive oracle."""

from __future__ import annotations

import numpy as np
import pytest

from conftest import corpus_of, make_author, make_record
from scibranch.coclustering import BranchLabeling
from scibranch.dependency import (
    DEFINED,
    ROOT,
    DependencyConfig,
    direct_dependency,
    group_average,
    propagate,
    r_sweep,
    region_average,
    single_region,
    yearly_average,
)
from scibranch.errors import DataError
from scibranch.records import CitationGraph


def graph_of(out_refs):
    """CitationGraph from a plain adjacency list of cited positions."""
    refs = tuple(tuple(sorted(set(t))) for t in out_refs)
    return CitationGraph(
        n_docs=len(refs),
        out_refs=refs,
        n_edges=sum(len(t) for t in refs),
        n_refs_total=sum(len(t) for t in refs),
        n_external_refs=0,
        n_self_refs=0,
        n_duplicate_refs=0,
    )


def branches_of(labels):
    return BranchLabeling(doc_labels=tuple(labels), word_labels=())


def oracle_scores(graph, labels, r, root_mode="indicator"):
    """Memoized recursion; valid on acyclic graphs only."""
    memo: dict[int, tuple | None] = {}

    def solve(n):
        if n in memo:
            return memo[n]
        refs = graph.out_refs[n]
        if not refs:
            memo[n] = None  # root
            return None
        n_theory = sum(1 for m in refs if labels[m] == "T")
        d_t = n_theory / len(refs)
        effs = []
        for m in refs:
            sub = solve(m)
            if sub is None:
                if root_mode == "indicator":
                    effs.append(1.0 if labels[m] == "T" else 0.0)
            else:
                effs.append(sub[2])
        if not effs:
            memo[n] = (d_t, None, d_t)
            return memo[n]
        i_t = sum(effs) / len(effs)
        memo[n] = (d_t, i_t, r * d_t + (1.0 - r) * i_t)
        return memo[n]

    return [solve(n) for n in range(graph.n_docs)]


def jacobi_scores(graph, labels, r, tol=1e-13, max_sweeps=100_000):
    """Whole-graph synchronous fixed-point iteration (second route)."""
    n = graph.n_docs
    d = [None] * n
    for p in range(n):
        refs = graph.out_refs[p]
        if refs:
            d[p] = sum(1 for m in refs if labels[m] == "T") / len(refs)
    values = [d[p] if d[p] is not None else None for p in range(n)]
    for _ in range(max_sweeps):
        residual = 0.0
        new = list(values)
        for p in range(n):
            if d[p] is None:
                continue
            effs = []
            for m in graph.out_refs[p]:
                if d[m] is None:
                    effs.append(1.0 if labels[m] == "T" else 0.0)
                else:
                    effs.append(values[m])
            i_t = sum(effs) / len(effs)
            new[p] = r * d[p] + (1.0 - r) * i_t
            residual = max(residual, abs(new[p] - values[p]))
        values = new
        if residual < tol:
            break
    return values


def random_dag(rng, n_nodes):
    """Random DAG where edges only point to lower-numbered nodes."""
    out_refs = []
    for p in range(n_nodes):
        if p == 0 or rng.random() < 0.2:
            out_refs.append(())
        else:
            k = int(rng.integers(1, min(p, 4) + 1))
            out_refs.append(tuple(rng.choice(p, size=k, replace=False).tolist()))
    labels = ["T" if rng.random() < 0.5 else "A" for _ in range(n_nodes)]
    return graph_of(out_refs), branches_of(labels)


class TestDirectDependency:
    def test_three_theory_seven_applied(self):
        labels = ["T"] * 3 + ["A"] * 7 + ["A"]
        graph = graph_of([()] * 10 + [tuple(range(10))])
        assert direct_dependency(10, graph, branches_of(labels)) == (0.3, 0.7)

    def test_all_theory(self):
        graph = graph_of([(), (0,)])
        assert direct_dependency(1, graph, branches_of(["T", "A"])) == (1.0, 0.0)

    def test_root_returns_none(self):
        graph = graph_of([()])
        assert direct_dependency(0, graph, branches_of(["T"])) is None


class TestPropagate:
    def test_unanimity_through_root(self):
        # theoretical root R(0); applied B(1) cites only R
        graph = graph_of([(), (0,)])
        labels = branches_of(["T", "A"])
        for r in (0.0, 0.3, 0.5, 1.0):
            scores = propagate(graph, labels, DependencyConfig(r=r))
            assert scores[0].status == ROOT
            assert scores[1].overall_t == 1.0

    def test_four_node_worked_example(self):
        # R(0) theory root; B(1) applied cites R; S(2) applied root;
        # C(3) applied cites B and S.
        graph = graph_of([(), (0,), (), (1, 2)])
        labels = branches_of(["T", "A", "A", "A"])
        scores = propagate(graph, labels, DependencyConfig(r=0.5))
        oracle = oracle_scores(graph, labels.doc_labels, 0.5)
        assert scores[3].direct_t == 0.0
        assert scores[3].indirect_t == pytest.approx(0.5, abs=1e-15)
        assert scores[3].overall_t == pytest.approx(0.25, abs=1e-15)
        assert scores[3].overall_t == oracle[3][2]

    def test_r_one_reduces_to_direct(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            graph, labels = random_dag(rng, 10)
            scores = propagate(graph, labels, DependencyConfig(r=1.0))
            for p in range(graph.n_docs):
                if scores[p].status == DEFINED:
                    assert scores[p].overall_t == scores[p].direct_t  # bitwise

    def test_r_zero_reduces_to_indirect(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            graph, labels = random_dag(rng, 10)
            scores = propagate(graph, labels, DependencyConfig(r=0.0))
            for p in range(graph.n_docs):
                if scores[p].status == DEFINED and scores[p].indirect_t is not None:
                    assert scores[p].overall_t == scores[p].indirect_t

    def test_matches_recursive_oracle_on_random_dags(self):
        rng = np.random.default_rng(2)
        for trial in range(100):
            graph, labels = random_dag(rng, int(rng.integers(2, 13)))
            for r in (0.0, 0.25, 0.5, 0.75, 1.0):
                scores = propagate(graph, labels, DependencyConfig(r=r))
                oracle = oracle_scores(graph, labels.doc_labels, r)
                for p in range(graph.n_docs):
                    if oracle[p] is None:
                        assert scores[p].status == ROOT
                    else:
                        assert scores[p].overall_t == pytest.approx(
                            oracle[p][2], abs=1e-10
                        )

    def test_pair_sums_to_one(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            graph, labels = random_dag(rng, 12)
            scores = propagate(graph, labels, DependencyConfig(r=0.4))
            for s in scores:
                if s.status == DEFINED:
                    assert s.overall_t + s.overall_a == pytest.approx(1.0, abs=1e-9)
                    assert 0.0 <= s.overall_t <= 1.0

    def test_averaging_bound(self):
        rng = np.random.default_rng(4)
        for _ in range(30):
            graph, labels = random_dag(rng, 10)
            scores = propagate(graph, labels, DependencyConfig(r=0.5))
            for p in range(graph.n_docs):
                refs = graph.out_refs[p]
                if not refs or scores[p].indirect_t is None:
                    continue
                effs = []
                for m in refs:
                    if scores[m].status == ROOT:
                        effs.append(1.0 if labels.doc_labels[m] == "T" else 0.0)
                    else:
                        effs.append(scores[m].overall_t)
                assert min(effs) - 1e-12 <= scores[p].indirect_t <= max(effs) + 1e-12

    def test_agrees_with_jacobi_iteration_on_dags(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            graph, labels = random_dag(rng, 11)
            scores = propagate(graph, labels, DependencyConfig(r=0.5))
            alt = jacobi_scores(graph, labels.doc_labels, 0.5)
            for p in range(graph.n_docs):
                if scores[p].status == DEFINED:
                    assert scores[p].overall_t == pytest.approx(alt[p], abs=1e-10)

    def test_node_order_independence(self):
        graph = graph_of([(), (0,), (0, 1), (1, 2)])
        labels = ["T", "A", "T", "A"]
        scores = propagate(graph, branches_of(labels), DependencyConfig(r=0.5))
        # same graph, nodes renumbered in reverse
        remap = [3, 2, 1, 0]
        out2 = [(), (), (), ()]
        out2 = [tuple(sorted(remap[m] for m in graph.out_refs[p]))
                for p in range(4)]
        reordered = [out2[i] for i in remap]
        graph2 = graph_of(reordered)
        labels2 = [labels[remap.index(i)] for i in range(4)]
        scores2 = propagate(graph2, branches_of(labels2), DependencyConfig(r=0.5))
        for p in range(4):
            q = remap[p]
            if scores[p].status == DEFINED:
                assert scores[p].overall_t == pytest.approx(
                    scores2[q].overall_t, abs=1e-12
                )

    def test_labeling_size_mismatch(self):
        with pytest.raises(DataError):
            propagate(graph_of([(), (0,)]), branches_of(["T"]))


class TestCycles:
    def test_two_cycle_converges_to_fixed_point(self):
        # 0 and 1 cite each other plus branch roots 2 (T) and 3 (A)
        graph = graph_of([(1, 2), (0, 3), (), ()])
        labels = branches_of(["T", "A", "T", "A"])
        config = DependencyConfig(r=0.5)
        scores = propagate(graph, labels, config)
        # verify the fixed-point equations directly
        for p in (0, 1):
            refs = graph.out_refs[p]
            d_t = sum(1 for m in refs if labels.doc_labels[m] == "T") / len(refs)
            effs = [scores[m].overall_t if scores[m].status == DEFINED
                    else (1.0 if labels.doc_labels[m] == "T" else 0.0)
                    for m in refs]
            i_t = sum(effs) / len(effs)
            assert scores[p].overall_t == pytest.approx(
                0.5 * d_t + 0.5 * i_t, abs=1e-9
            )

    def test_three_cycle_with_low_r(self):
        graph = graph_of([(1, 3), (2, 3), (0, 4), (), ()])
        labels = branches_of(["T", "A", "T", "T", "A"])
        scores = propagate(graph, labels, DependencyConfig(r=0.1))
        for p in (0, 1, 2):
            assert scores[p].status == DEFINED
            assert 0.0 <= scores[p].overall_t <= 1.0

    def test_pure_two_cycle_r_zero_stays_at_fixed_point(self):
        # with r=0 and no external refs any equal pair is a fixed point;
        # iteration starts from the direct values and must stop cleanly
        graph = graph_of([(1,), (0,)])
        labels = branches_of(["T", "A"])
        scores = propagate(graph, labels, DependencyConfig(r=0.0))
        assert scores[0].status == DEFINED and scores[1].status == DEFINED


class TestRootModes:
    def test_skip_mode_drops_roots_from_average(self):
        # node 2 cites root 0 (T) and defined node 1
        graph = graph_of([(), (0,), (0, 1)])
        labels = branches_of(["T", "A", "A"])
        ind = propagate(graph, labels, DependencyConfig(r=0.5, root_mode="indicator"))
        skip = propagate(graph, labels, DependencyConfig(r=0.5, root_mode="skip"))
        # indicator: i(2) = (1 + D(1))/2 ; skip: i(2) = D(1)
        assert ind[2].indirect_t == pytest.approx((1.0 + ind[1].overall_t) / 2)
        assert skip[2].indirect_t == pytest.approx(skip[1].overall_t)

    def test_skip_mode_all_root_references_falls_back_to_direct(self):
        graph = graph_of([(), (), (0, 1)])
        labels = branches_of(["T", "A", "A"])
        scores = propagate(graph, labels, DependencyConfig(r=0.3, root_mode="skip"))
        assert scores[2].indirect_t is None
        assert scores[2].overall_t == scores[2].direct_t == 0.5

    def test_bad_config(self):
        with pytest.raises(DataError):
            DependencyConfig(r=1.5)
        with pytest.raises(DataError):
            DependencyConfig(root_mode="ignore")


class TestAverages:
    def test_own_branch_roots_give_diagonal(self):
        # every defined paper cites only own-branch roots
        graph = graph_of([(), (), (0,), (1,)])
        labels = branches_of(["T", "A", "T", "A"])
        means = group_average(propagate(graph, labels, DependencyConfig()), labels)
        assert means.groups["T"] == pytest.approx((1.0, 0.0))
        assert means.groups["A"] == pytest.approx((0.0, 1.0))

    def test_columns_sum_to_one(self):
        rng = np.random.default_rng(6)
        graph, labels = random_dag(rng, 12)
        means = group_average(propagate(graph, labels, DependencyConfig()), labels)
        for pair in means.groups.values():
            if pair is not None:
                assert pair[0] + pair[1] == pytest.approx(1.0, abs=1e-12)

    def test_group_without_defined_papers_flagged(self):
        graph = graph_of([(), (0,)])
        labels = branches_of(["T", "A"])  # the only T paper is a root
        means = group_average(propagate(graph, labels, DependencyConfig()), labels)
        assert means.groups["T"] is None
        assert means.counts.get("T", 0) == 0

    def test_single_year_equals_group_average(self):
        rng = np.random.default_rng(7)
        graph, labels = random_dag(rng, 10)
        scores = propagate(graph, labels, DependencyConfig())
        means = group_average(scores, labels)
        rows = yearly_average(scores, labels, [2010] * 10)
        for year, branch, mean_t, mean_a, n in rows:
            assert year == 2010
            assert means.groups[branch][0] == pytest.approx(mean_t)
            assert means.counts[branch] == n

    def test_yearly_fixture_hand_computed(self):
        """8-node, 2-year fixture; means recomputed by hand."""
        # year 2010: roots 0(T), 1(A); defined 2(T cites 0), 3(A cites 1)
        # year 2011: defined 4(T cites 0,1), 5(A cites 0), 6(T cites 1), 7 root (A)
        graph = graph_of([(), (), (0,), (1,), (0, 1), (0,), (1,), ()])
        labels = branches_of(["T", "A", "T", "A", "T", "A", "T", "A"])
        years = [2010, 2010, 2010, 2010, 2011, 2011, 2011, 2011]
        scores = propagate(graph, labels, DependencyConfig(r=0.5))
        rows = {(y, b): (mt, n) for y, b, mt, _, n in
                [(r[0], r[1], r[2], r[3], r[4]) for r in
                 yearly_average(scores, labels, years)]}
        # node 2: d=1, i=1 -> 1.0 ; node 4: d=0.5, i=0.5 -> 0.5 ; node 6: d=0, i=0 -> 0
        assert rows[(2010, "T")] == (pytest.approx(1.0), 1)
        assert rows[(2011, "T")] == (pytest.approx(0.25), 2)
        # node 3: d=0, i=0 -> 0 ; node 5: d=1, i=1 -> 1
        assert rows[(2010, "A")] == (pytest.approx(0.0), 1)
        assert rows[(2011, "A")] == (pytest.approx(1.0), 1)
        # 2011 has no defined-A gap: node 7 is a root and excluded
        assert (2011, "A") in rows


class TestRegionAverages:
    def _corpus(self):
        return corpus_of(
            make_record("P0", year=2010, authors=(make_author("X", "CN"),)),
            make_record("P1", year=2010, authors=(make_author("X", "US"),)),
            make_record("P2", year=2011, authors=(make_author("X", "CN"),)),
            make_record("P3", year=2011, authors=(make_author("X", "CN"),
                                                  make_author("Y", "US"))),
            make_record("P4", year=2011, authors=(make_author("X", "US"),)),
        )

    def test_multi_region_paper_excluded(self):
        corpus = self._corpus()
        assert single_region(corpus.documents[3]) is None
        graph = graph_of([(), (), (0,), (0, 1), (1,)])
        labels = branches_of(["T", "A", "T", "T", "A"])
        scores = propagate(graph, labels, DependencyConfig())
        rows = region_average(scores, labels, corpus)
        regions_present = {(r[0], r[1], r[2]) for r in rows}
        assert ("CN", 2011, "T") in regions_present
        assert all(not (year == 2011 and branch == "T" and region == "US")
                   for region, year, branch in regions_present)

    def test_singleton_region_year(self):
        corpus = self._corpus()
        graph = graph_of([(), (), (0,), (0, 1), (1,)])
        labels = branches_of(["T", "A", "T", "T", "A"])
        scores = propagate(graph, labels, DependencyConfig())
        rows = region_average(scores, labels, corpus)
        by_key = {(r[0], r[1], r[2]): r[3] for r in rows}
        assert by_key[("CN", 2011, "T")] == pytest.approx(scores[2].overall_t)

    def test_matches_filter_then_recompute_oracle(self):
        corpus = self._corpus()
        graph = graph_of([(), (), (0,), (0, 1), (1,)])
        labels = branches_of(["T", "A", "T", "T", "A"])
        scores = propagate(graph, labels, DependencyConfig())
        rows = region_average(scores, labels, corpus)
        # oracle: filter documents per (region, year, branch) and average
        for region, year, branch, mean_t, _, n in rows:
            selected = [
                scores[p].overall_t
                for p, doc in enumerate(corpus.documents)
                if single_region(doc) == region and doc.year == year
                and labels.doc_labels[p] == branch and scores[p].status == DEFINED
            ]
            assert len(selected) == n
            assert mean_t == pytest.approx(sum(selected) / len(selected))

    def test_region_filter(self):
        corpus = self._corpus()
        graph = graph_of([(), (), (0,), (0, 1), (1,)])
        labels = branches_of(["T", "A", "T", "T", "A"])
        scores = propagate(graph, labels, DependencyConfig())
        rows = region_average(scores, labels, corpus, regions=["US"])
        assert {r[0] for r in rows} == {"US"}


class TestRSweep:
    def test_sweep_endpoints(self):
        graph = graph_of([(), (), (0, 1), (0,)])
        labels = branches_of(["T", "A", "A", "T"])
        rows = r_sweep(graph, labels, [0.0, 0.5, 1.0])
        assert {r[0] for r in rows} == {0.0, 0.5, 1.0}
        direct = propagate(graph, labels, DependencyConfig(r=1.0))
        means = group_average(direct, labels)
        end = {(r[0], r[1]): r[2] for r in rows}
        for branch, pair in means.groups.items():
            if pair is not None:
                assert end[(1.0, branch)] == pytest.approx(pair[0])
