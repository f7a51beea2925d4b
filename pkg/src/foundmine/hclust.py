"""Agglomerative hierarchical clustering with Ward's method.

The default variant runs the Lance-Williams recurrence on squared
distances and reports heights as square roots (the convention consistent
with Euclidean inputs):

    d(i+j, k)^2 = ((n_i + n_k) d_ik^2 + (n_j + n_k) d_jk^2
                   - n_k d_ij^2) / (n_i + n_j + n_k)

``variant="D"`` instead feeds the raw dissimilarities through the same
recurrence and reports the criterion values as-is. Ties are broken by
the smallest (left id, right id) pair so dendrograms are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from foundmine.errors import ValidationError


@dataclass
class DistanceMatrix:
    """Symmetric pairwise distances in condensed upper-triangular form."""

    n: int
    condensed: np.ndarray
    labels: list = field(default_factory=list)

    def __post_init__(self):
        expect = self.n * (self.n - 1) // 2
        if self.condensed.shape != (expect,):
            raise ValidationError(
                f"condensed length {self.condensed.shape} != n(n-1)/2 = {expect}"
            )
        if not self.labels:
            self.labels = [str(i) for i in range(self.n)]
        if len(self.labels) != self.n:
            raise ValidationError("label count does not match item count")
        if (self.condensed < 0).any():
            raise ValidationError("distances must be non-negative")

    def full(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        iu = np.triu_indices(self.n, 1)
        out[iu] = self.condensed
        out[(iu[1], iu[0])] = self.condensed
        return out

    @classmethod
    def from_square(cls, square: np.ndarray, labels=None) -> "DistanceMatrix":
        square = np.asarray(square, dtype=np.float64)
        n = square.shape[0]
        iu = np.triu_indices(n, 1)
        return cls(n=n, condensed=square[iu].copy(), labels=list(labels or []))


@dataclass
class Merge:
    left: int
    right: int
    height: float
    size: int


@dataclass
class Dendrogram:
    """Agglomerative merge history; cluster ids follow the usual convention:

    items are 0 .. n-1 and the cluster created by merge step t gets id
    n + t.
    """

    n: int
    merges: list  # n-1 Merge records
    labels: list
    monotone: bool


def euclidean_on_dims(coords, m: int, labels=None) -> DistanceMatrix:
    """Pairwise Euclidean distance over the first ``m`` coordinate columns."""
    coords = np.asarray(coords, dtype=np.float64)
    if coords.ndim != 2:
        raise ValidationError(f"coordinates must be 2-d, got shape {coords.shape}")
    if m < 1:
        raise ValidationError("need at least one dimension")
    if m > coords.shape[1]:
        raise ValidationError(
            f"asked for {m} dimensions but only {coords.shape[1]} available"
        )
    pts = coords[:, :m]
    gram = pts @ pts.T
    sq = np.diag(gram)[:, None] + np.diag(gram)[None, :] - 2 * gram
    np.fill_diagonal(sq, 0.0)
    sq = np.maximum(sq, 0.0)
    n = pts.shape[0]
    iu = np.triu_indices(n, 1)
    return DistanceMatrix(n=n, condensed=np.sqrt(sq[iu]), labels=list(labels or []))


def ward_linkage(dist: DistanceMatrix, variant: str = "D2") -> Dendrogram:
    """Agglomerate by Ward's criterion via the Lance-Williams recurrence."""
    n = dist.n
    if variant not in ("D2", "D"):
        raise ValidationError(f"unknown Ward variant {variant!r}; use 'D2' or 'D'")
    if n < 2:
        raise ValidationError("need at least two items to cluster")
    if not np.isfinite(dist.condensed).all():
        raise ValidationError("distance matrix contains non-finite entries")

    d2 = dist.full() ** 2 if variant == "D2" else dist.full()
    np.fill_diagonal(d2, np.inf)
    active = list(range(n))  # positions into d2
    ids = list(range(n))  # cluster id at each active position
    sizes = {i: 1 for i in range(n)}

    merges = []
    monotone = True
    prev_height = -np.inf
    for step in range(n - 1):
        sub = d2[np.ix_(active, active)]
        best = np.min(sub)
        ti, tj = np.where(sub == best)
        # Tie-break on the smallest (left id, right id) pair.
        pairs = [
            (min(ids[active[a]] for a in (i, j)), max(ids[active[a]] for a in (i, j)), i, j)
            for i, j in zip(ti, tj)
            if i < j
        ]
        _, _, pi, pj = min(pairs)
        i_pos = active[pi]
        j_pos = active[pj]
        id_i, id_j = ids[i_pos], ids[j_pos]
        left, right = min(id_i, id_j), max(id_i, id_j)
        ni, nj = sizes[id_i], sizes[id_j]
        dij2 = d2[i_pos, j_pos]

        height = float(np.sqrt(dij2)) if variant == "D2" else float(dij2)
        if height < prev_height - 1e-12:
            monotone = False
        prev_height = max(prev_height, height)

        # Lance-Williams update written into i_pos, which becomes the
        # merged cluster; j_pos is retired.
        new_id = n + step
        new_size = ni + nj
        for pos in active:
            if pos in (i_pos, j_pos):
                continue
            nk = sizes[ids[pos]]
            upd = (
                (ni + nk) * d2[i_pos, pos]
                + (nj + nk) * d2[j_pos, pos]
                - nk * dij2
            ) / (ni + nj + nk)
            d2[i_pos, pos] = upd
            d2[pos, i_pos] = upd
        del active[pj]
        ids[i_pos] = new_id
        sizes[new_id] = new_size
        merges.append(Merge(left=left, right=right, height=height, size=new_size))

    return Dendrogram(n=n, merges=merges, labels=list(dist.labels), monotone=monotone)


def cut_tree(dend: Dendrogram, k: int) -> np.ndarray:
    """Flat assignment into ``k`` clusters by undoing the last k-1 merges.

    Labels run 0 .. k-1 in order of first item appearance.
    """
    n = dend.n
    if not (1 <= k <= n):
        raise ValidationError(f"k must lie in [1, {n}], got {k}")
    parent = list(range(2 * n - 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for step in range(n - k):
        m = dend.merges[step]
        new_id = n + step
        parent[find(m.left)] = new_id
        parent[find(m.right)] = new_id

    relabel = {}
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        root = find(i)
        if root not in relabel:
            relabel[root] = len(relabel)
        out[i] = relabel[root]
    return out


def _newick_safe(label: str) -> str:
    out = str(label)
    for ch in ",();: ":
        out = out.replace(ch, "_")
    return out


def to_newick(dend: Dendrogram) -> str:
    """Newick text with branch lengths from merge height differences."""
    n = dend.n
    height = {i: 0.0 for i in range(n)}
    node = {i: _newick_safe(dend.labels[i]) for i in range(n)}
    for step, m in enumerate(dend.merges):
        new_id = n + step
        bl = m.height - height[m.left]
        br = m.height - height[m.right]
        node[new_id] = f"({node[m.left]}:{bl:.6g},{node[m.right]}:{br:.6g})"
        height[new_id] = m.height
    return node[2 * n - 2] + ";"
