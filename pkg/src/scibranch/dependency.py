"""Dependency of each paper on the theoretical vs. applied literature.

A paper's direct dependency is the T/A proportion of its in-corpus
references; its indirect dependency is the mean of those references' own
overall dependency. The overall pair mixes the two with a ratio
parameter: overall = r * direct + (1 - r) * indirect. Papers citing
nothing inside the corpus are "roots" and carry no dependency value of
their own; as references they contribute their branch indicator (or are
skipped, behind a flag). Evaluation follows reverse citation order, so
references are resolved before their citers; strongly connected
components (citation cycles) are resolved by fixed-point iteration.
"""

from __future__ import annotations

from dataclasses import dataclass

from .coclustering import THEORY, BranchLabeling
from .errors import ConvergenceError, DataError
from .records import CitationGraph, Corpus

ROOT = "ROOT"
DEFINED = "DEFINED"

ROOT_MODES = ("indicator", "skip")


@dataclass(frozen=True)
class DependencyConfig:
    r: float = 0.5
    root_mode: str = "indicator"
    tol: float = 1e-10
    max_sweeps: int = 10_000

    def __post_init__(self):
        if not 0.0 <= self.r <= 1.0:
            raise DataError(f"mix ratio r={self.r} outside [0, 1]")
        if self.root_mode not in ROOT_MODES:
            raise DataError(f"unknown root mode '{self.root_mode}'")


@dataclass
class DependencyScore:
    """Direct / indirect / overall theory-dependency of one paper.

    The applied-side components are complements (each pair sums to 1), so
    only the theory side is stored. ROOT papers have no components.
    """

    status: str
    direct_t: float | None = None
    indirect_t: float | None = None
    overall_t: float | None = None

    @property
    def direct_a(self) -> float | None:
        return None if self.direct_t is None else 1.0 - self.direct_t

    @property
    def indirect_a(self) -> float | None:
        return None if self.indirect_t is None else 1.0 - self.indirect_t

    @property
    def overall_a(self) -> float | None:
        return None if self.overall_t is None else 1.0 - self.overall_t


def direct_dependency(
    position: int, graph: CitationGraph, branches: BranchLabeling
) -> tuple[float, float] | None:
    """Reference branch proportions of one paper, or None for a root."""
    refs = graph.out_refs[position]
    if not refs:
        return None
    n_theory = sum(1 for m in refs if branches.doc_labels[m] == THEORY)
    d_t = n_theory / len(refs)
    return d_t, 1.0 - d_t


def _tarjan_sccs(out_refs) -> list[list[int]]:
    """Strongly connected components, emitted with references before citers.

    Iterative Tarjan; each emitted component only points to components
    already emitted, which is exactly the evaluation order we need.
    """
    n = len(out_refs)
    index_of = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    sccs: list[list[int]] = []
    counter = 0
    for start in range(n):
        if index_of[start] != -1:
            continue
        work = [(start, 0)]
        while work:
            node, child_i = work[-1]
            if child_i == 0:
                index_of[node] = low[node] = counter
                counter += 1
                stack.append(node)
                on_stack[node] = True
            advanced = False
            targets = out_refs[node]
            while child_i < len(targets):
                child = targets[child_i]
                child_i += 1
                if index_of[child] == -1:
                    work[-1] = (node, child_i)
                    work.append((child, 0))
                    advanced = True
                    break
                if on_stack[child]:
                    low[node] = min(low[node], index_of[child])
            if advanced:
                continue
            work.pop()
            if low[node] == index_of[node]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == node:
                        break
                sccs.append(comp)
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
    return sccs


def propagate(
    graph: CitationGraph,
    branches: BranchLabeling,
    config: DependencyConfig = DependencyConfig(),
) -> list[DependencyScore]:
    """Overall dependency for every paper, references evaluated first."""
    if len(branches) != graph.n_docs:
        raise DataError("branch labeling does not cover the citation graph")
    r = config.r
    n = graph.n_docs
    scores: list[DependencyScore | None] = [None] * n
    is_root = [len(graph.out_refs[p]) == 0 for p in range(n)]

    def effective(m: int) -> float | None:
        """Reference m's contribution to a citer's indirect average."""
        if is_root[m]:
            if config.root_mode == "indicator":
                return 1.0 if branches.doc_labels[m] == THEORY else 0.0
            return None  # skip mode: drop roots from the average
        return scores[m].overall_t

    def evaluate(p: int) -> DependencyScore:
        refs = graph.out_refs[p]
        n_theory = sum(1 for m in refs if branches.doc_labels[m] == THEORY)
        d_t = n_theory / len(refs)
        effs = [e for e in (effective(m) for m in refs) if e is not None]
        if not effs:
            # skip mode with every reference a root: no indirect term,
            # the overall value falls back to the direct proportion.
            return DependencyScore(DEFINED, direct_t=d_t, indirect_t=None, overall_t=d_t)
        i_t = sum(effs) / len(effs)
        return DependencyScore(
            DEFINED, direct_t=d_t, indirect_t=i_t, overall_t=r * d_t + (1.0 - r) * i_t
        )

    def solve_cycle(comp: list[int]) -> None:
        """Damped fixed-point iteration within one strongly connected component.

        Members of a cycle all have references, so none is a root. The
        update map is an averaging (nonexpansive) operator whose fixed
        points are unchanged by damping; the half-step damping also
        converges in the r=0 case, where the plain update can oscillate.
        """
        members = set(comp)
        direct = {}
        for p in comp:
            refs = graph.out_refs[p]
            n_theory = sum(1 for m in refs if branches.doc_labels[m] == THEORY)
            direct[p] = n_theory / len(refs)
        x = dict(direct)

        def step(values: dict[int, float]) -> dict[int, float]:
            out = {}
            for p in comp:
                effs = []
                for m in graph.out_refs[p]:
                    if m in members:
                        effs.append(values[m])
                    else:
                        e = effective(m)
                        if e is not None:
                            effs.append(e)
                i_t = sum(effs) / len(effs)
                out[p] = r * direct[p] + (1.0 - r) * i_t
            return out

        for _ in range(config.max_sweeps):
            fx = step(x)
            residual = max(abs(fx[p] - x[p]) for p in comp)
            if residual < config.tol:
                x = fx
                break
            x = {p: 0.5 * (x[p] + fx[p]) for p in comp}
        else:
            raise ConvergenceError(
                f"citation cycle did not converge within {config.max_sweeps} "
                f"sweeps; component: {sorted(comp)}"
            )
        # One last consistent application: report the indirect mean over the
        # converged values so D = r*d + (1-r)*i holds exactly per member.
        for p in comp:
            effs = []
            for m in graph.out_refs[p]:
                if m in members:
                    effs.append(x[m])
                else:
                    e = effective(m)
                    if e is not None:
                        effs.append(e)
            i_t = sum(effs) / len(effs)
            scores[p] = DependencyScore(DEFINED, direct_t=direct[p],
                                        indirect_t=i_t,
                                        overall_t=r * direct[p] + (1.0 - r) * i_t)

    for comp in _tarjan_sccs(graph.out_refs):
        if len(comp) == 1:
            p = comp[0]
            scores[p] = DependencyScore(ROOT) if is_root[p] else evaluate(p)
        else:
            solve_cycle(comp)
    return scores  # type: ignore[return-value]


@dataclass
class GroupMeans:
    """Mean overall dependency per branch group, root papers excluded."""

    groups: dict[str, tuple[float, float] | None]  # branch -> (mean T, mean A)
    counts: dict[str, int]


def group_average(scores: list[DependencyScore], branches: BranchLabeling) -> GroupMeans:
    if len(scores) != len(branches):
        raise DataError("scores do not cover the labeling")
    sums: dict[str, float] = {}
    defined_counts: dict[str, int] = {}
    for score, branch in zip(scores, branches.doc_labels):
        if score.status != DEFINED:
            continue
        sums[branch] = sums.get(branch, 0.0) + score.overall_t
        defined_counts[branch] = defined_counts.get(branch, 0) + 1
    groups: dict[str, tuple[float, float] | None] = {}
    for branch in sorted(set(branches.doc_labels)):
        n_defined = defined_counts.get(branch, 0)
        if n_defined == 0:
            groups[branch] = None
        else:
            mean_t = sums.get(branch, 0.0) / n_defined
            groups[branch] = (mean_t, 1.0 - mean_t)
    return GroupMeans(groups=groups, counts=defined_counts)


def yearly_average(
    scores: list[DependencyScore],
    branches: BranchLabeling,
    years: list[int | None],
) -> list[tuple[int, str, float, float, int]]:
    """(year, branch, mean T, mean A, n defined) rows; empty cells are gaps."""
    if not (len(scores) == len(branches) == len(years)):
        raise DataError("scores, labeling and years must align")
    sums: dict[tuple[int, str], float] = {}
    counts: dict[tuple[int, str], int] = {}
    for score, branch, year in zip(scores, branches.doc_labels, years):
        if year is None or score.status != DEFINED:
            continue
        key = (year, branch)
        sums[key] = sums.get(key, 0.0) + score.overall_t
        counts[key] = counts.get(key, 0) + 1
    rows = []
    for key in sorted(counts):
        year, branch = key
        mean_t = sums[key] / counts[key]
        rows.append((year, branch, mean_t, 1.0 - mean_t, counts[key]))
    return rows


def single_region(document) -> str | None:
    """The one region covering every author's affiliations, if it exists."""
    if not document.authors:
        return None
    regions: set[str] = set()
    for author in document.authors:
        if not author.affiliations:
            return None
        regions.update(a.region for a in author.affiliations)
    if len(regions) == 1:
        return next(iter(regions))
    return None


def region_average(
    scores: list[DependencyScore],
    branches: BranchLabeling,
    corpus: Corpus,
    regions: list[str] | None = None,
) -> list[tuple[str, int, str, float, float, int]]:
    """Yearly group means restricted to single-region papers.

    Rows are (region, year, branch, mean T, mean A, n defined); papers
    whose authors span several regions contribute to none of them.
    """
    if not (len(scores) == len(branches) == len(corpus)):
        raise DataError("scores, labeling and corpus must align")
    wanted = set(regions) if regions is not None else None
    sums: dict[tuple[str, int, str], float] = {}
    counts: dict[tuple[str, int, str], int] = {}
    for pos, doc in enumerate(corpus.documents):
        if doc.year is None or scores[pos].status != DEFINED:
            continue
        region = single_region(doc)
        if region is None or (wanted is not None and region not in wanted):
            continue
        key = (region, doc.year, branches.doc_labels[pos])
        sums[key] = sums.get(key, 0.0) + scores[pos].overall_t
        counts[key] = counts.get(key, 0) + 1
    rows = []
    for key in sorted(counts):
        region, year, branch = key
        mean_t = sums[key] / counts[key]
        rows.append((region, year, branch, mean_t, 1.0 - mean_t, counts[key]))
    return rows


def r_sweep(
    graph: CitationGraph,
    branches: BranchLabeling,
    r_values: list[float],
    root_mode: str = "indicator",
) -> list[tuple[float, str, float, float, int]]:
    """Group means across mix ratios: (r, branch, mean T, mean A, n) rows."""
    rows = []
    for r in r_values:
        config = DependencyConfig(r=r, root_mode=root_mode)
        means = group_average(propagate(graph, branches, config), branches)
        for branch in sorted(means.groups):
            pair = means.groups[branch]
            if pair is None:
                rows.append((r, branch, None, None, 0))
            else:
                rows.append((r, branch, pair[0], pair[1], means.counts[branch]))
    return rows
