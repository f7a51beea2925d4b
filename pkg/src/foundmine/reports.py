"""CSV and SVG artifact emission for every analysis stage.

All CSVs are UTF-8 with RFC-4180 quoting; floats use Python's shortest
repr, so identical results serialize to identical bytes.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from foundmine import svg
from foundmine.blockmodel import LbmFit
from foundmine.hclust import Dendrogram
from foundmine.mca import McaFit, contributions_report, modified_rates
from foundmine.tabular import MISSING, CategoricalTable
from foundmine.urf import DepthStats


def write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def _num(x):
    return repr(float(x)) if isinstance(x, (float, np.floating)) else x


def block_grid_csv(path, fit: LbmFit) -> None:
    rows = [(r, k, _num(icl)) for r, k, icl in (fit.grid_scores or [])]
    write_csv(path, ["r", "k", "icl"], rows)


def block_assignments_csv(row_path, col_path, fit: LbmFit, attr_names) -> None:
    write_csv(row_path, ["row", "cluster"], list(enumerate(fit.z.tolist())))
    write_csv(
        col_path,
        ["attribute", "cluster"],
        list(zip(attr_names, fit.w.tolist())),
    )


def block_heatmap_svg(path, fit: LbmFit, mask: np.ndarray) -> None:
    sorted_view = fit.sorted_view(mask)
    z_sorted = fit.z[fit.row_order]
    w_sorted = fit.w[fit.col_order]
    row_breaks = np.flatnonzero(np.diff(z_sorted)) + 1
    col_breaks = np.flatnonzero(np.diff(w_sorted)) + 1
    text = svg.heatmap(
        sorted_view,
        row_breaks=row_breaks.tolist(),
        col_breaks=col_breaks.tolist(),
        title=f"missingness sorted into {fit.r} x {fit.k} blocks (white = missing)",
    )
    Path(path).write_text(text, encoding="utf-8")


def forest_rank_csv(path, stats: DepthStats) -> None:
    order = stats.rank
    rank_of = {int(a): i + 1 for i, a in enumerate(order)}
    rows = [
        (stats.attr_names[a], _num(stats.d1[a]), rank_of[a])
        for a in range(len(stats.attr_names))
    ]
    write_csv(path, ["attribute", "mean_min_depth", "rank"], rows)


def forest_distance_csv(path, stats: DepthStats) -> None:
    header = ["attribute"] + list(stats.attr_names)
    rows = [
        [stats.attr_names[u]] + [_num(v) for v in stats.dist[u]]
        for u in range(len(stats.attr_names))
    ]
    write_csv(path, header, rows)


def forest_interaction_svg(path, stats: DepthStats, dend: Dendrogram) -> None:
    rank_of = {int(a): i + 1 for i, a in enumerate(stats.rank)}
    annotations = [f"rank {rank_of[a]}" for a in range(len(stats.attr_names))]
    text = svg.dendrogram(
        dend.merges,
        dend.labels,
        annotations=annotations,
        title="attribute interaction distance (Ward merges) with importance rank",
    )
    Path(path).write_text(text, encoding="utf-8")


def mca_eigen_csv(path, fit: McaFit) -> None:
    mod = modified_rates(fit)
    rows = [
        (s + 1, _num(fit.eigenvalues[s]), _num(fit.raw_rates[s]), _num(mod[s]))
        for s in range(fit.n_dims)
    ]
    write_csv(path, ["axis", "eigenvalue", "raw_rate", "modified_rate"], rows)


def mca_coordinates_csv(path, fit: McaFit, n_axes: int = 5) -> None:
    """Every category point: mass, coordinates and contributions per axis."""
    n = min(n_axes, fit.n_dims)
    header = (
        ["attribute", "level", "mass"]
        + [f"coord{s + 1}" for s in range(n)]
        + [f"ctr{s + 1}" for s in range(n)]
    )
    rows = []
    for j, col in enumerate(fit.columns):
        rows.append(
            [col.attr_name, col.label, _num(fit.col_masses[j])]
            + [_num(fit.g[j, s]) for s in range(n)]
            + [_num(fit.ctr[j, s]) for s in range(n)]
        )
    write_csv(path, header, rows)


def mca_contributions_csv(path, fit: McaFit, n_axes: int = 2) -> None:
    rows = []
    for axis in range(min(n_axes, fit.n_dims)):
        for entry in contributions_report(fit, axis):
            rows.append(
                (
                    axis + 1,
                    entry["attribute"],
                    entry["level"],
                    _num(entry["ctr"]),
                    _num(entry["coord"]),
                )
            )
    write_csv(path, ["axis", "attribute", "level", "ctr", "coord"], rows)


def mca_factor_map_svg(path, fit: McaFit, title: str) -> None:
    mod = modified_rates(fit)
    points = []
    for j, col in enumerate(fit.columns):
        if fit.n_dims >= 2:
            points.append((col.name, fit.g[j, 0], fit.g[j, 1]))
        else:
            points.append((col.name, fit.g[j, 0], 0.0))
    xl = f"dim 1 ({100 * fit.raw_rates[0]:.0f}% raw, {100 * mod[0]:.0f}% adj)"
    yl = (
        f"dim 2 ({100 * fit.raw_rates[1]:.0f}% raw, {100 * mod[1]:.0f}% adj)"
        if fit.n_dims >= 2
        else "dim 2 (absent)"
    )
    Path(path).write_text(
        svg.factor_map(points, title=title, xlabel=xl, ylabel=yl), encoding="utf-8"
    )


def supplementary_csv(path, projection: dict, n_dims: int) -> None:
    header = ["level", "n"] + [f"dim{s + 1}" for s in range(n_dims)]
    rows = [
        [label, info["n"]] + [_num(c) for c in info["coords"]]
        for label, info in projection.items()
    ]
    write_csv(path, header, rows)


def supplementary_map_svg(path, projection: dict, title: str) -> None:
    points = []
    for label, info in projection.items():
        c = info["coords"]
        points.append((label, c[0], c[1] if len(c) > 1 else 0.0, "#7a3fa0"))
    Path(path).write_text(svg.factor_map(points, title=title), encoding="utf-8")


def cluster_merges_csv(path, dend: Dendrogram) -> None:
    rows = [
        (n + dend.n, m.left, m.right, _num(m.height), m.size)
        for n, m in enumerate(dend.merges)
    ]
    write_csv(path, ["cluster_id", "left", "right", "height", "size"], rows)


def cluster_members_csv(
    path, dend: Dendrogram, assignments: np.ndarray, counts: dict | None = None
) -> None:
    if counts is None:
        rows = list(zip(dend.labels, (int(a) for a in assignments)))
        write_csv(path, ["item", "cluster"], rows)
    else:
        rows = [
            (lab, int(a), counts.get(lab, ""))
            for lab, a in zip(dend.labels, assignments)
        ]
        write_csv(path, ["item", "cluster", "n"], rows)


def dendrogram_svg(path, dend: Dendrogram, title: str) -> None:
    Path(path).write_text(
        svg.dendrogram(dend.merges, dend.labels, title=title), encoding="utf-8"
    )


def inventory_csv(path, table: CategoricalTable) -> None:
    """Attribute inventory: level counts, missingness, dominant level."""
    rows = []
    n = max(table.n_rows, 1)
    for q, name in enumerate(table.attr_names):
        counts = table.level_counts(q)
        n_miss = int((table.cells[:, q] == MISSING).sum())
        if counts.size and counts.max() > 0:
            top = int(np.argmax(counts))
            top_label, top_count = table.levels[q][top], int(counts[top])
        else:
            top_label, top_count = "", 0
        rows.append(
            (
                name,
                int((counts > 0).sum()),
                n_miss,
                _num(n_miss / n),
                top_label,
                top_count,
            )
        )
    write_csv(
        path,
        ["attribute", "observed_levels", "missing", "missing_rate", "top_level", "top_count"],
        rows,
    )


def crosstab_csv(path, table: CategoricalTable, attr_a: str, attr_b: str) -> None:
    """Counts of attr_a levels against attr_b levels, plus row percentages."""
    qa = table.attr_index(attr_a)
    qb = table.attr_index(attr_b)
    levels_a = table.levels[qa] + ["<missing>"]
    levels_b = table.levels[qb] + ["<missing>"]
    ca = np.where(table.cells[:, qa] == MISSING, len(levels_a) - 1, table.cells[:, qa])
    cb = np.where(table.cells[:, qb] == MISSING, len(levels_b) - 1, table.cells[:, qb])
    counts = np.zeros((len(levels_a), len(levels_b)), dtype=np.int64)
    np.add.at(counts, (ca, cb), 1)
    header = (
        [attr_a, "total"]
        + [f"n:{lb}" for lb in levels_b]
        + [f"pct:{lb}" for lb in levels_b]
    )
    rows = []
    for i, la in enumerate(levels_a):
        total = int(counts[i].sum())
        pcts = [
            _num(100.0 * counts[i, j] / total) if total else _num(0.0)
            for j in range(len(levels_b))
        ]
        rows.append([la, total] + [int(c) for c in counts[i]] + pcts)
    write_csv(path, header, rows)
