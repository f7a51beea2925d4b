"""Unsupervised random-forest attribute ranking and interaction distance.

The forest learns to tell real rows (label 1) from a column-shuffled
null copy (label 0); an attribute is important when trees split on it
near the root. Importance is the mean first-order maximal-subtree depth
(smaller = more informative); the interaction distance between two
attributes sums their mean second-order maximal-subtree depths, i.e.
how soon one splits inside the other's maximal subtree, symmetrized.

Missing values are first-class: splits are chosen on the rows observed
for the candidate attribute, and rows missing it are routed to a
uniformly random child. Trees are grown in parallel threads with
per-tree seeds mixed from the forest seed, so results are independent of
scheduling and thread count.

No per-tree normalization is applied to second-order depths across trees
of different heights; absent attributes are imputed at height + 1 so all
distances stay finite and absence ranks worse than the deepest presence.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from foundmine import _kernels
from foundmine._rng import mix64
from foundmine.errors import ValidationError
from foundmine.tabular import CategoricalTable

log = logging.getLogger(__name__)

MAX_MASK_LEVELS = 64  # uint64 level-set masks cap attribute width
_NULL_STREAM = 0x6E756C6C  # stream id for the shuffled-copy seed


@dataclass
class ForestConfig:
    n_trees: int = 1000
    mtry: int = 7
    min_node: int = 1
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValidationError("need at least one tree")
        if self.mtry < 1:
            raise ValidationError("mtry must be at least 1")
        if self.min_node < 1:
            raise ValidationError("min_node must be at least 1")


@dataclass
class Tree:
    """One grown tree as parallel node arrays; children follow parents."""

    attr: np.ndarray  # split attribute per node, -1 for leaves
    mask: np.ndarray  # uint64 level set routed left
    left: np.ndarray
    right: np.ndarray
    depth: np.ndarray  # edge count from root
    size: np.ndarray  # in-node sample count

    @property
    def n_nodes(self) -> int:
        return len(self.attr)

    @property
    def height(self) -> int:
        return int(self.depth.max())


@dataclass
class Forest:
    trees: list
    attr_names: list
    n_levels: np.ndarray
    excluded: list  # attribute indices never offered to splits
    config: ForestConfig = field(default_factory=ForestConfig)


@dataclass
class DepthStats:
    """First- and second-order maximal-subtree depth summaries."""

    d1: np.ndarray  # mean minimal depth per attribute
    d2: np.ndarray  # d2[u, v] = mean depth of v inside u's maximal subtree
    dist: np.ndarray  # d2 + d2.T
    rank: np.ndarray  # attribute indices ordered ascending by d1
    attr_names: list = field(default_factory=list)


def synthesize_null(table: CategoricalTable, seed: int) -> CategoricalTable:
    """Shuffle every column independently, destroying joint structure.

    Missing cells shuffle with the rest, so per-attribute level and
    missingness counts are preserved exactly.
    """
    if table.n_rows < 2:
        raise ValidationError("need at least two rows to shuffle")
    rng = np.random.default_rng(seed)
    cells = np.empty_like(table.cells)
    for q in range(table.n_cols):
        cells[:, q] = table.cells[rng.permutation(table.n_rows), q]
    return CategoricalTable(
        table.attr_names,
        table.levels,
        cells,
        provenance=table.provenance + " (shuffled null)",
    )


def _training_matrix(real: CategoricalTable, seed: int):
    null = synthesize_null(real, mix64(seed, _NULL_STREAM))
    codes = np.vstack([real.cells, null.cells]).astype(np.int16)
    y = np.concatenate(
        [np.ones(real.n_rows, np.int8), np.zeros(null.n_rows, np.int8)]
    )
    return codes, y


def grow_forest(
    real: CategoricalTable, cfg: ForestConfig | None = None, n_jobs: int = 1
) -> Forest:
    """Train the real-vs-shuffled ensemble on a categorical table."""
    cfg = cfg or ForestConfig()
    if real.n_cols < 1:
        raise ValidationError("table has no attributes")
    codes, y = _training_matrix(real, cfg.seed)
    n, q = codes.shape
    n_levels = np.array([len(lv) for lv in real.levels], dtype=np.int64)

    usable = []
    excluded = []
    for a in range(q):
        col = real.cells[:, a]
        if (col < 0).all():
            log.warning(
                "attribute %r is entirely missing; excluded from splits",
                real.attr_names[a],
            )
            excluded.append(a)
        elif n_levels[a] > MAX_MASK_LEVELS:
            log.warning(
                "attribute %r has %d levels (limit %d for level-set masks); "
                "excluded from splits; coarsen it with a level plan first",
                real.attr_names[a],
                n_levels[a],
                MAX_MASK_LEVELS,
            )
            excluded.append(a)
        else:
            usable.append(a)
    if not usable:
        raise ValidationError("no attribute is usable for splitting")
    cand_attrs = np.array(usable, dtype=np.int64)
    n_levels_safe = np.maximum(n_levels, 1)
    mtry = min(cfg.mtry, len(usable))

    kern = _kernels.kernels()
    grow = kern["grow_tree"]
    cap = 2 * n + 1

    def one_tree(t: int) -> Tree:
        na = np.empty(cap, np.int64)
        nm = np.empty(cap, np.uint64)
        nl = np.empty(cap, np.int64)
        nr = np.empty(cap, np.int64)
        nd = np.empty(cap, np.int64)
        ns = np.empty(cap, np.int64)
        n_nodes = grow(
            codes,
            y,
            n_levels_safe,
            cand_attrs,
            np.int64(mtry),
            np.int64(cfg.min_node),
            bool(cfg.bootstrap),
            np.uint64(mix64(cfg.seed, t)),
            na,
            nm,
            nl,
            nr,
            nd,
            ns,
        )
        sl = slice(0, n_nodes)
        return Tree(
            attr=na[sl].copy(),
            mask=nm[sl].copy(),
            left=nl[sl].copy(),
            right=nr[sl].copy(),
            depth=nd[sl].copy(),
            size=ns[sl].copy(),
        )

    if n_jobs > 1:
        # Compile once up front so worker threads reuse the dispatch.
        kern["warmup"]()
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = list(pool.map(one_tree, range(cfg.n_trees)))
    else:
        trees = [one_tree(t) for t in range(cfg.n_trees)]

    return Forest(
        trees=trees,
        attr_names=list(real.attr_names),
        n_levels=n_levels,
        excluded=excluded,
        config=cfg,
    )


def depth_statistics(forest: Forest, n_jobs: int = 1) -> DepthStats:
    """Aggregate per-tree maximal-subtree depths across the forest."""
    if not forest.trees:
        raise ValidationError("forest has no trees")
    q = len(forest.attr_names)
    kern = _kernels.kernels()
    stats = kern["tree_depth_stats"]

    def one(tree: Tree):
        d1 = np.empty(q, np.int64)
        d2 = np.empty((q, q), np.int64)
        stats(tree.attr, tree.left, tree.right, tree.depth, q, d1, d2)
        return d1, d2

    acc1 = np.zeros(q, np.float64)
    acc2 = np.zeros((q, q), np.float64)
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            for d1, d2 in pool.map(one, forest.trees):
                acc1 += d1
                acc2 += d2
    else:
        for tree in forest.trees:
            d1, d2 = one(tree)
            acc1 += d1
            acc2 += d2
    n_trees = len(forest.trees)
    d1 = acc1 / n_trees
    d2 = acc2 / n_trees
    return DepthStats(
        d1=d1,
        d2=d2,
        dist=d2 + d2.T,
        rank=np.argsort(d1, kind="stable"),
        attr_names=list(forest.attr_names),
    )


def minimal_depth_importance(forest: Forest) -> tuple[np.ndarray, np.ndarray]:
    """Mean first-order maximal-subtree depth and the ascending rank order."""
    stats = depth_statistics(forest)
    return stats.d1, stats.rank


def interaction_distance(forest: Forest) -> np.ndarray:
    """Symmetric pairwise attribute distance from second-order depths."""
    return depth_statistics(forest).dist
