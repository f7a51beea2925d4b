"""Synthetic categorical tables with planted ground truth.

These generators are the oracle layer for recovery experiments: block
structured missingness for the co-clustering stage and two-group latent
structure for the dimensionality-reduction stage. Everything is a pure
function of its parameters and seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from foundmine.errors import ValidationError
from foundmine.tabular import MISSING, AttributeSpec, CategoricalTable, Codebook

_CELL_LEVELS = ("v0", "v1", "v2")


@dataclass
class PlantedTruth:
    """Ground truth carried next to a generated table."""

    seed: int
    row_clusters: np.ndarray | None = None
    col_clusters: np.ndarray | None = None
    driver_axes: np.ndarray | None = None
    dependent_pairs: list = field(default_factory=list)
    signal_attributes: list = field(default_factory=list)

    def to_json(self, path=None) -> str:
        doc = {"seed": self.seed}
        for key in ("row_clusters", "col_clusters", "driver_axes"):
            val = getattr(self, key)
            doc[key] = None if val is None else np.asarray(val).tolist()
        doc["dependent_pairs"] = [list(p) for p in self.dependent_pairs]
        doc["signal_attributes"] = list(self.signal_attributes)
        text = json.dumps(doc, indent=2)
        if path is not None:
            Path(path).write_text(text + "\n", encoding="utf-8")
        return text

    @classmethod
    def from_json(cls, source) -> "PlantedTruth":
        if isinstance(source, (str, Path)):
            doc = json.loads(Path(source).read_text(encoding="utf-8"))
        else:
            doc = json.load(source)
        return cls(
            seed=doc["seed"],
            row_clusters=(
                None
                if doc.get("row_clusters") is None
                else np.asarray(doc["row_clusters"], dtype=np.int64)
            ),
            col_clusters=(
                None
                if doc.get("col_clusters") is None
                else np.asarray(doc["col_clusters"], dtype=np.int64)
            ),
            driver_axes=(
                None
                if doc.get("driver_axes") is None
                else np.asarray(doc["driver_axes"], dtype=np.float64)
            ),
            dependent_pairs=[tuple(p) for p in doc.get("dependent_pairs", [])],
            signal_attributes=list(doc.get("signal_attributes", [])),
        )


def _attr_names(n: int) -> list[str]:
    width = max(2, len(str(n - 1)))
    return [f"a{i:0{width}d}" for i in range(n)]


def codebook_for(table: CategoricalTable) -> Codebook:
    """Codebook declaring exactly the levels a generated table uses."""
    return Codebook(
        attributes=tuple(
            AttributeSpec(name=n, declared_levels=tuple(lv), missing_tokens=("",))
            for n, lv in zip(table.attr_names, table.levels)
        )
    )


def _balanced_assignment(rng, n: int, groups: int) -> np.ndarray:
    """Random membership with group sizes as even as possible."""
    return rng.permutation(n).astype(np.int64) % groups


def _block_pattern(rng, r: int, k: int) -> np.ndarray:
    """Diagonal-heavy boolean pattern with distinct row and column profiles.

    Starts from a diagonal stripe and flips random cells (seeded) until
    no two row-cluster or column-cluster profiles coincide, so the plant
    stays identifiable.
    """
    g = np.arange(r)[:, None]
    l = np.arange(k)[None, :]
    pattern = ((l - g) % max(r, k, 2)) == 0
    for _ in range(1000):
        rows_ok = len({tuple(row) for row in pattern}) == r
        cols_ok = len({tuple(col) for col in pattern.T}) == k
        if rows_ok and cols_ok:
            return pattern
        pattern = pattern.copy()
        pattern[rng.integers(0, r), rng.integers(0, k)] ^= True
    raise ValidationError(
        f"could not find an identifiable {r}x{k} block pattern"
    )


def plant_block_missingness(
    I: int,
    Q: int,
    r: int,
    k: int,
    alpha_low: float,
    alpha_high: float,
    seed: int,
) -> tuple[CategoricalTable, PlantedTruth]:
    """Table whose missingness mask carries an r x k planted block structure.

    Cells inside high-pattern blocks go missing with probability
    ``alpha_high``, elsewhere ``alpha_low``; observed cells are filled
    uniformly from three levels.
    """
    if not (0 <= alpha_low < alpha_high <= 1):
        raise ValidationError(
            f"need 0 <= alpha_low < alpha_high <= 1, got {alpha_low}, {alpha_high}"
        )
    if r > I or k > Q or r < 1 or k < 1:
        raise ValidationError(f"cluster counts ({r}, {k}) exceed table shape ({I}, {Q})")
    rng = np.random.default_rng(seed)
    row_clusters = _balanced_assignment(rng, I, r)
    col_clusters = _balanced_assignment(rng, Q, k)
    pattern = _block_pattern(rng, r, k)
    rates = np.where(pattern, alpha_high, alpha_low)
    cell_rate = rates[row_clusters[:, None], col_clusters[None, :]]
    miss = rng.random((I, Q)) < cell_rate
    values = rng.integers(0, len(_CELL_LEVELS), size=(I, Q)).astype(np.int32)
    values[miss] = MISSING
    table = CategoricalTable(
        _attr_names(Q),
        [list(_CELL_LEVELS)] * Q,
        values,
        provenance=f"planted block missingness seed={seed}",
    )
    truth = PlantedTruth(
        seed=seed, row_clusters=row_clusters, col_clusters=col_clusters
    )
    return table, truth


def plant_latent_dims(
    I: int,
    Q: int,
    n_levels: int,
    signal_attrs: int,
    seed: int,
    flip_prob: float = 0.0,
) -> tuple[CategoricalTable, PlantedTruth]:
    """Table whose first ``signal_attrs`` attributes encode two latent groups.

    Rows split into two exactly equal groups (random membership). Each
    signal attribute maps the group to a fixed level, corrupted to a
    uniform draw with probability ``flip_prob``; the remaining attributes
    are uniform noise. All signal-attribute pairs are mutually dependent
    and listed in the truth record.
    """
    if signal_attrs > Q:
        raise ValidationError(f"signal_attrs {signal_attrs} exceeds Q {Q}")
    if n_levels < 2:
        raise ValidationError("need at least 2 levels per attribute")
    if not (0 <= flip_prob <= 1):
        raise ValidationError(f"flip_prob must be in [0, 1], got {flip_prob}")
    rng = np.random.default_rng(seed)
    groups = _balanced_assignment(rng, I, 2)
    scores = np.where(groups == 0, -1.0, 1.0)
    cells = rng.integers(0, n_levels, size=(I, Q)).astype(np.int32)
    for q in range(signal_attrs):
        mapped = (2 * q + groups) % n_levels
        if flip_prob > 0:
            keep = rng.random(I) >= flip_prob
            cells[:, q] = np.where(keep, mapped, cells[:, q])
        else:
            cells[:, q] = mapped
    labels = [f"l{i}" for i in range(n_levels)]
    table = CategoricalTable(
        _attr_names(Q),
        [list(labels)] * Q,
        cells,
        provenance=f"planted latent dims seed={seed}",
    )
    truth = PlantedTruth(
        seed=seed,
        driver_axes=scores,
        dependent_pairs=[
            (u, v) for u in range(signal_attrs) for v in range(u + 1, signal_attrs)
        ],
        signal_attributes=list(range(signal_attrs)),
    )
    return table, truth
