"""Specific multiple correspondence analysis with suppressed levels.

The indicator (disjunctive) table keeps one 0/1 column per retained
level; rows whose level was suppressed or missing contribute an all-zero
block for that attribute. Row masses stay 1/I and column masses use
counts over I * Q_active even when suppression leaves a row with fewer
than Q_active ones: that is the partial-distance treatment that makes
the analysis "specific" rather than a full MCA on a subtable.

With N = I * Q_active, p_ij = z_ij / N, r_i = 1/I and c_j = n_j / N, the
standardized residual s_ij = (p_ij - r_i c_j) / sqrt(r_i c_j) is
decomposed by SVD; eigenvalues are squared singular values, principal
coordinates follow the usual transition formulas.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from foundmine.errors import DegenerateFitError, DimensionError, ValidationError
from foundmine.tabular import CategoricalTable, LevelPlan

log = logging.getLogger(__name__)

RANK_CUTOFF = 1e-12


@dataclass(frozen=True)
class IndicatorColumn:
    attr_index: int
    attr_name: str
    level_index: int
    label: str

    @property
    def name(self) -> str:
        return f"{self.attr_name}={self.label}"


@dataclass
class IndicatorMatrix:
    """0/1 expansion of a categorical table under a level plan."""

    Z: np.ndarray  # I x K' float64
    columns: list  # IndicatorColumn per active column
    q_active: int

    @property
    def n_rows(self) -> int:
        return self.Z.shape[0]

    @property
    def n_cols(self) -> int:
        return self.Z.shape[1]

    @property
    def column_counts(self) -> np.ndarray:
        return self.Z.sum(axis=0)


@dataclass
class McaFit:
    """Eigenvalues, coordinates, masses and contributions of one analysis."""

    eigenvalues: np.ndarray  # descending, > RANK_CUTOFF
    g: np.ndarray  # category principal coordinates, K' x S
    f: np.ndarray  # individual principal coordinates, I x S
    col_masses: np.ndarray  # c_j = n_j / (I * Q_active)
    ctr: np.ndarray  # contributions, K' x S, columns sum to 1
    columns: list  # IndicatorColumn metadata
    q_active: int
    total_inertia: float

    @property
    def n_dims(self) -> int:
        return len(self.eigenvalues)

    @property
    def n_rows(self) -> int:
        return self.f.shape[0]

    @property
    def raw_rates(self) -> np.ndarray:
        return self.eigenvalues / self.total_inertia


def indicator_table(table: CategoricalTable, plan: LevelPlan) -> IndicatorMatrix:
    """Build the disjunctive table over the plan's active attributes."""
    if plan.attr_names != table.attr_names:
        raise ValidationError("level plan was built for a different table")
    columns = []
    for name in plan.active:
        q = table.attr_index(name)
        counts = table.level_counts(q)
        for li in plan.retained[name]:
            if counts[li] == 0:
                # Declared-but-unseen level: an empty indicator column
                # would get zero mass, so it cannot enter the analysis.
                continue
            columns.append(IndicatorColumn(q, name, li, table.levels[q][li]))
    if len(columns) < 2:
        raise ValidationError(
            "level plan leaves fewer than two indicator columns"
        )
    Z = np.zeros((table.n_rows, len(columns)))
    for j, col in enumerate(columns):
        Z[:, j] = table.cells[:, col.attr_index] == col.level_index
    return IndicatorMatrix(Z=Z, columns=columns, q_active=len(plan.active))


def fit_specific_mca(indicator: IndicatorMatrix) -> McaFit:
    """Decompose the indicator matrix into principal latent dimensions."""
    Z = indicator.Z
    I, K = Z.shape
    if I < 2 or K < 2:
        raise DimensionError(f"need at least 2 rows and 2 columns, got {Z.shape}")
    q_act = indicator.q_active
    N = I * q_act
    n_j = Z.sum(axis=0)
    if (n_j == 0).any():
        raise ValidationError("indicator matrix contains an empty column")

    c = n_j / N
    r = 1.0 / I
    P = Z / N
    S = (P - r * c[None, :]) / np.sqrt(r * c[None, :])

    U, sv, Vt = np.linalg.svd(S, full_matrices=False)
    lams = sv**2
    keep = lams > RANK_CUTOFF
    if not keep.any():
        raise DegenerateFitError(
            "residual matrix has rank 0: every retained column is constant "
            "in proportion; nothing to decompose"
        )
    total_inertia = float((S * S).sum())
    lams = lams[keep]
    U = U[:, keep]
    V = Vt[keep].T

    sig = np.sqrt(lams)
    g = (V * sig[None, :]) / np.sqrt(c)[:, None]
    f = (U * sig[None, :]) / np.sqrt(r)
    # Deterministic orientation: the largest-|coordinate| level points up.
    for s in range(len(lams)):
        j = int(np.argmax(np.abs(g[:, s])))
        if g[j, s] < 0:
            g[:, s] = -g[:, s]
            f[:, s] = -f[:, s]
    ctr = (c[:, None] * g**2) / lams[None, :]

    return McaFit(
        eigenvalues=lams,
        g=g,
        f=f,
        col_masses=c,
        ctr=ctr,
        columns=list(indicator.columns),
        q_active=q_act,
        total_inertia=total_inertia,
    )


def contributions_report(
    fit: McaFit, axis: int, threshold: float | None = None
) -> list[dict]:
    """Levels contributing above average to one axis, sign-split.

    Entries carry attribute, label, contribution and coordinate; positive
    coordinates first, each side ordered by descending contribution. The
    default threshold is the average contribution 1/K'.
    """
    if not (0 <= axis < fit.n_dims):
        raise ValidationError(f"axis {axis} out of range (n_dims={fit.n_dims})")
    if threshold is None:
        threshold = 1.0 / len(fit.columns)
    rows = []
    for j, col in enumerate(fit.columns):
        # strictly above threshold, with a guard so exact ties stay out
        if fit.ctr[j, axis] > threshold + 1e-12:
            rows.append(
                {
                    "attribute": col.attr_name,
                    "level": col.label,
                    "ctr": float(fit.ctr[j, axis]),
                    "coord": float(fit.g[j, axis]),
                }
            )
    rows.sort(key=lambda e: (e["coord"] <= 0, -e["ctr"]))
    return rows


def project_supplementary(
    fit: McaFit, table: CategoricalTable, attribute: str
) -> dict[str, dict]:
    """Project an attribute's levels onto the fitted axes without refitting.

    Level coordinates are barycentres of the individual coordinates of
    the rows holding the level, rescaled by 1/sqrt(lambda) per axis.
    Levels with no occurrences are skipped.
    """
    if table.n_rows != fit.n_rows:
        raise DimensionError(
            f"table has {table.n_rows} rows but the fit was computed on {fit.n_rows}"
        )
    q = table.attr_index(attribute)
    col = table.cells[:, q]
    inv_sig = 1.0 / np.sqrt(fit.eigenvalues)
    out = {}
    for li, label in enumerate(table.levels[q]):
        rows = col == li
        n = int(rows.sum())
        if n == 0:
            continue
        coords = fit.f[rows].mean(axis=0) * inv_sig
        out[label] = {"n": n, "coords": coords}
    return out


def modified_rates(fit: McaFit) -> np.ndarray:
    """Adjusted inertia rates correcting MCA's pessimistic raw percentages.

    Eigenvalues above 1/Q_active are re-expressed as
    (Q/(Q-1))^2 (lambda - 1/Q)^2 and normalized; axes at or below the
    threshold get rate zero. Returns fractions summing to 1, or all
    zeros when no axis clears the threshold (degenerate, logged).
    """
    if fit.q_active < 2:
        raise ValidationError("modified rates need at least two active attributes")
    q = fit.q_active
    thresh = 1.0 / q
    lam = fit.eigenvalues
    pseudo = np.where(lam > thresh, (q / (q - 1.0)) ** 2 * (lam - thresh) ** 2, 0.0)
    total = pseudo.sum()
    if total <= 0:
        log.warning(
            "modified rates degenerate: no eigenvalue above 1/Q_active = %.4f",
            thresh,
        )
        return np.zeros_like(lam)
    return pseudo / total
