"""Diagonal co-clustering of a document-term matrix by modularity maximization.

Rows (documents) and columns (words) share one label set 0..g-1; a cell
(p, n) is in-block when row p and column n carry the same label. The
objective is the observed minus expected in-block weight, normalized by
the total matrix weight. Optimization alternates exact row and column
reassignment half-steps: given the other side's labels, the argmax
reassignment of every row (column) is the global optimum for that side,
so the objective never decreases between iterations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import DataError


def _as_csr(matrix) -> sparse.csr_matrix:
    if hasattr(matrix, "counts"):  # DocTermMatrix
        matrix = matrix.counts
    if sparse.issparse(matrix):
        return matrix.tocsr().astype(np.float64)
    arr = np.asarray(matrix, dtype=np.float64)
    if arr.ndim != 2:
        raise DataError("matrix must be two-dimensional")
    return sparse.csr_matrix(arr)


@dataclass
class CoPartition:
    """A joint row/column labeling with its modularity score."""

    g: int
    row_labels: np.ndarray
    col_labels: np.ndarray
    modularity: float
    converged: bool = True
    n_iter: int = 0
    q_trace: list[float] = field(default_factory=list)
    n_repairs: int = 0

    def row_groups(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.row_labels == k) for k in range(self.g)]

    def col_groups(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.col_labels == k) for k in range(self.g)]


def modularity(matrix, row_labels, col_labels) -> float:
    """Observed minus expected in-block weight over total weight.

    Q = (1/S) * sum over same-label cells (p, n) of
    (a_pn - row_sum_p * col_sum_n / S), with S the total matrix sum.
    """
    A = _as_csr(matrix)
    row_labels = np.asarray(row_labels, dtype=np.intp)
    col_labels = np.asarray(col_labels, dtype=np.intp)
    P, N = A.shape
    if row_labels.shape != (P,) or col_labels.shape != (N,):
        raise DataError("label arrays do not cover the matrix dimensions")
    total = A.sum()
    if total == 0:
        raise DataError("modularity is undefined for an all-zero matrix")
    g = int(max(row_labels.max(), col_labels.max())) + 1
    row_sums = np.asarray(A.sum(axis=1)).ravel()
    col_sums = np.asarray(A.sum(axis=0)).ravel()
    col_onehot = np.zeros((N, g))
    col_onehot[np.arange(N), col_labels] = 1.0
    per_row_block = A @ col_onehot  # (P, g): row p's weight into each column group
    observed = per_row_block[np.arange(P), row_labels].sum()
    weight_row = np.bincount(row_labels, weights=row_sums, minlength=g)
    weight_col = np.bincount(col_labels, weights=col_sums, minlength=g)
    expected = float(weight_row @ weight_col) / total
    return float((observed - expected) / total)


def _init_labels(rng: np.random.Generator, size: int, g: int) -> np.ndarray:
    """Random labels with every cluster guaranteed at least one member."""
    labels = np.empty(size, dtype=np.intp)
    perm = rng.permutation(size)
    labels[perm[:g]] = np.arange(g)
    if size > g:
        labels[perm[g:]] = rng.integers(0, g, size=size - g)
    return labels


def _repair_empty(labels: np.ndarray, scores: np.ndarray, g: int) -> int:
    """Move worst-contribution members into emptied clusters, keeping g fixed.

    ``scores[i, k]`` is member i's objective contribution under label k.
    Donors are restricted to clusters that keep at least one member.
    """
    n_repairs = 0
    counts = np.bincount(labels, minlength=g)
    while True:
        empty = np.flatnonzero(counts == 0)
        if empty.size == 0:
            return n_repairs
        k = int(empty[0])
        current = scores[np.arange(labels.size), labels]
        movable = counts[labels] >= 2
        if not movable.any():
            raise DataError(f"cannot repair empty cluster {k}: too few members")
        candidates = np.flatnonzero(movable)
        worst = candidates[np.argmin(current[candidates])]
        counts[labels[worst]] -= 1
        labels[worst] = k
        counts[k] += 1
        n_repairs += 1


def coclus_fit(
    matrix,
    g: int,
    seed: int = 0,
    max_iter: int = 100,
    tol: float = 1e-9,
) -> CoPartition:
    """Alternating argmax co-clustering from a seeded random start.

    Each half-step reassigns every row (column) to the label maximizing its
    modularity contribution given the other side's labels; ties break to the
    lowest cluster index. A cluster emptied by a half-step is repaired by
    donating the worst-contribution member from a cluster of size >= 2.
    Returns the best labeling observed, with the per-iteration Q trace.
    """
    A = _as_csr(matrix)
    P, N = A.shape
    if g < 2:
        raise DataError("g must be >= 2")
    nonzero_rows = int((A.getnnz(axis=1) > 0).sum())
    nonzero_cols = int((A.getnnz(axis=0) > 0).sum())
    if nonzero_rows < g or nonzero_cols < g:
        raise DataError(
            f"need at least g={g} nonzero rows and columns "
            f"(have {nonzero_rows} rows, {nonzero_cols} cols)"
        )
    total = A.sum()
    row_sums = np.asarray(A.sum(axis=1)).ravel()
    col_sums = np.asarray(A.sum(axis=0)).ravel()
    At = A.T.tocsr()

    rng = np.random.default_rng(seed)
    row_labels = _init_labels(rng, P, g)
    col_labels = _init_labels(rng, N, g)

    q = modularity(A, row_labels, col_labels)
    q_trace = [q]
    best_q = q
    best = (row_labels.copy(), col_labels.copy())
    converged = False
    n_repairs = 0

    for iteration in range(1, max_iter + 1):
        # Row half-step: scores depend only on the column labels.
        col_onehot = np.zeros((N, g))
        col_onehot[np.arange(N), col_labels] = 1.0
        weight_col = np.bincount(col_labels, weights=col_sums, minlength=g)
        row_scores = (A @ col_onehot) - np.outer(row_sums, weight_col) / total
        row_labels = np.argmax(row_scores, axis=1).astype(np.intp)
        n_repairs += _repair_empty(row_labels, row_scores, g)

        # Column half-step given the fresh row labels.
        row_onehot = np.zeros((P, g))
        row_onehot[np.arange(P), row_labels] = 1.0
        weight_row = np.bincount(row_labels, weights=row_sums, minlength=g)
        col_scores = (At @ row_onehot) - np.outer(col_sums, weight_row) / total
        col_labels = np.argmax(col_scores, axis=1).astype(np.intp)
        n_repairs += _repair_empty(col_labels, col_scores, g)

        q_new = modularity(A, row_labels, col_labels)
        q_trace.append(q_new)
        if q_new > best_q:
            best_q = q_new
            best = (row_labels.copy(), col_labels.copy())
        if q_new - q < tol:
            converged = True
            q = q_new
            break
        q = q_new

    return CoPartition(
        g=g,
        row_labels=best[0],
        col_labels=best[1],
        modularity=best_q,
        converged=converged,
        n_iter=len(q_trace) - 1,
        q_trace=q_trace,
        n_repairs=n_repairs,
    )


def best_fit(
    matrix,
    g: int,
    restarts: int = 10,
    seed: int = 0,
    max_iter: int = 100,
    tol: float = 1e-9,
) -> CoPartition:
    """Best-of-restarts fit; ties keep the earliest restart."""
    if restarts < 1:
        raise DataError("restarts must be >= 1")
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    children = seed.spawn(restarts)
    best = None
    for child in children:
        part = coclus_fit(matrix, g, seed=child, max_iter=max_iter, tol=tol)
        if best is None or part.modularity > best.modularity:
            best = part
    return best


def scan_k(
    matrix,
    k_min: int = 2,
    k_max: int = 9,
    restarts: int = 10,
    seed: int = 0,
    max_iter: int = 100,
    tol: float = 1e-9,
) -> list[tuple[int, CoPartition]]:
    """Best partition per cluster count k in [k_min, k_max], sorted by k."""
    if k_min < 2:
        raise DataError("k_min must be >= 2")
    if k_min > k_max:
        raise DataError("k_min must not exceed k_max")
    ks = list(range(k_min, k_max + 1))
    children = np.random.SeedSequence(seed).spawn(len(ks))
    results = []
    for k, child in zip(ks, children):
        results.append((k, best_fit(matrix, k, restarts=restarts, seed=child,
                                    max_iter=max_iter, tol=tol)))
    return results


@dataclass
class AgreementStats:
    """Overlap between one group of each of two partitions."""

    size_a: int
    size_b: int
    overlap: int


def partition_agreement(
    p1: CoPartition | np.ndarray,
    group_ids_1,
    p2: CoPartition | np.ndarray,
    group_ids_2,
) -> AgreementStats:
    """Count documents in the selected group(s) of both partitions."""
    labels1 = p1.row_labels if isinstance(p1, CoPartition) else np.asarray(p1)
    labels2 = p2.row_labels if isinstance(p2, CoPartition) else np.asarray(p2)
    if labels1.shape != labels2.shape:
        raise DataError("partitions cover different document sets")
    ids1 = [group_ids_1] if np.isscalar(group_ids_1) else list(group_ids_1)
    ids2 = [group_ids_2] if np.isscalar(group_ids_2) else list(group_ids_2)
    for ids, labels, which in ((ids1, labels1, "a"), (ids2, labels2, "b")):
        present = set(np.unique(labels).tolist())
        unknown = [i for i in ids if i not in present]
        if unknown:
            raise DataError(f"unknown group id(s) {unknown} in partition {which}")
    in1 = np.isin(labels1, ids1)
    in2 = np.isin(labels2, ids2)
    return AgreementStats(
        size_a=int(in1.sum()),
        size_b=int(in2.sum()),
        overlap=int((in1 & in2).sum()),
    )


THEORY = "T"
APPLIED = "A"


@dataclass
class BranchLabeling:
    """Binary T/A labels for every document and word position."""

    doc_labels: tuple[str, ...]
    word_labels: tuple[str, ...]

    @property
    def t_doc_count(self) -> int:
        return sum(1 for b in self.doc_labels if b == THEORY)

    @property
    def a_doc_count(self) -> int:
        return len(self.doc_labels) - self.t_doc_count

    @property
    def t_word_count(self) -> int:
        return sum(1 for b in self.word_labels if b == THEORY)

    @property
    def a_word_count(self) -> int:
        return len(self.word_labels) - self.t_word_count

    def __len__(self) -> int:
        return len(self.doc_labels)


def merge_to_branches(partition: CoPartition, stable_group_id: int) -> BranchLabeling:
    """Label the stable group's documents and words T, everything else A."""
    if not 0 <= stable_group_id < partition.g:
        raise DataError(f"stable group {stable_group_id} not in 0..{partition.g - 1}")
    doc_labels = tuple(
        THEORY if lab == stable_group_id else APPLIED for lab in partition.row_labels
    )
    word_labels = tuple(
        THEORY if lab == stable_group_id else APPLIED for lab in partition.col_labels
    )
    return BranchLabeling(doc_labels=doc_labels, word_labels=word_labels)
