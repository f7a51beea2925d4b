"""Command-line interface.

Each stage runs standalone on explicit inputs; ``run`` drives the whole
pipeline from one JSON config. Exit codes: 1 usage, 2 validation
failure, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from foundmine import blockmodel, hclust, mca, reports, synthgen, urf
from foundmine.errors import NumericalError, ValidationError
from foundmine.pipeline import run_pipeline
from foundmine.tabular import (
    Codebook,
    FilterClause,
    RowFilter,
    build_level_plan,
    filter_rows,
    load_table,
    missingness_mask,
    save_table,
)

EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("foundmine")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _delim(name: str) -> str:
    return {"comma": ",", "tab": "\t"}.get(name, name)


def _parse_range(text: str) -> list:
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(v) for v in text.split(",")]


def _parse_filter(text: str) -> RowFilter:
    """attr=Lab1,Lab2 keeps matching rows; attr!=Lab drops them."""
    clauses = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        if "!=" in part:
            attr, labels = part.split("!=", 1)
            op = "NOT_IN"
        elif "=" in part:
            attr, labels = part.split("=", 1)
            op = "IN"
        else:
            raise ValidationError(f"bad filter clause {part!r}; use attr=A,B or attr!=A")
        clauses.append(
            FilterClause(
                attribute=attr.strip(),
                op=op,
                labels=frozenset(l.strip() for l in labels.split(",")),
            )
        )
    return RowFilter(clauses=tuple(clauses))


def _load(args):
    codebook = Codebook.from_json(args.codebook)
    return codebook, load_table(codebook, args.table, _delim(args.delimiter))


def _add_table_args(p):
    p.add_argument("--table", required=True, help="delimited data file")
    p.add_argument("--codebook", required=True, help="codebook JSON")
    p.add_argument("--delimiter", default="comma", help="comma (default) or tab")


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_ingest(args) -> int:
    _, table = _load(args)
    print(
        f"rows={table.n_rows} attributes={table.n_cols} "
        f"missing_cells={table.n_missing()}"
    )
    if args.out:
        save_table(table, args.out, _delim(args.delimiter))
        print(f"wrote {args.out}")
    return 0


def _cmd_blocks(args) -> int:
    _, table = _load(args)
    mask = missingness_mask(table)
    cfg = blockmodel.LbmConfig(
        n_restarts=args.restarts, max_sweeps=args.max_sweeps, seed=args.seed
    )
    fit = blockmodel.select_blocks(
        mask, _parse_range(args.r), _parse_range(args.k), cfg, n_jobs=args.threads
    )
    out = _out_dir(args)
    reports.block_grid_csv(out / "blocks_grid.csv", fit)
    reports.block_assignments_csv(
        out / "blocks_row_assignments.csv",
        out / "blocks_col_assignments.csv",
        fit,
        table.attr_names,
    )
    reports.block_heatmap_svg(out / "blocks_heatmap.svg", fit, mask)
    print(f"selected r={fit.r} k={fit.k} icl={fit.icl:.3f}; artifacts in {out}")
    return 0


def _cmd_forest(args) -> int:
    _, table = _load(args)
    cfg = urf.ForestConfig(
        n_trees=args.n_trees,
        mtry=args.mtry,
        min_node=args.min_node,
        bootstrap=not args.no_bootstrap,
        seed=args.seed,
    )
    forest = urf.grow_forest(table, cfg, n_jobs=args.threads)
    stats = urf.depth_statistics(forest, n_jobs=args.threads)
    out = _out_dir(args)
    reports.forest_rank_csv(out / "forest_rank.csv", stats)
    reports.forest_distance_csv(out / "forest_distance.csv", stats)
    dist = stats.dist.copy()
    np.fill_diagonal(dist, 0.0)
    dend = hclust.ward_linkage(
        hclust.DistanceMatrix.from_square(dist, labels=stats.attr_names)
    )
    reports.forest_interaction_svg(out / "forest_interaction.svg", stats, dend)
    best = stats.attr_names[stats.rank[0]]
    print(f"{cfg.n_trees} trees grown; most informative attribute: {best}; artifacts in {out}")
    return 0


def _cmd_mca(args) -> int:
    _, table = _load(args)
    if args.filter:
        table = filter_rows(table, _parse_filter(args.filter))
    plan = build_level_plan(table, args.min_freq, args.suppress or ())
    fit = mca.fit_specific_mca(mca.indicator_table(table, plan))
    out = _out_dir(args)
    reports.mca_eigen_csv(out / "mca_eigenvalues.csv", fit)
    reports.mca_coordinates_csv(out / "mca_coordinates.csv", fit)
    reports.mca_contributions_csv(out / "mca_contributions.csv", fit)
    reports.mca_factor_map_svg(out / "mca_factor_map.svg", fit, title="category map")
    for attr in args.supplementary or ():
        proj = mca.project_supplementary(fit, table, attr)
        reports.supplementary_csv(out / f"mca_supp_{attr}.csv", proj, fit.n_dims)
        reports.supplementary_map_svg(
            out / f"mca_supp_{attr}_map.svg", proj, title=f"supplementary {attr}"
        )
    rates = mca.modified_rates(fit)
    shown = min(3, fit.n_dims)
    summary = ", ".join(
        f"dim{s + 1} {100 * fit.raw_rates[s]:.1f}% raw / {100 * rates[s]:.1f}% adj"
        for s in range(shown)
    )
    print(f"{fit.n_dims} axes ({summary}); artifacts in {out}")
    return 0


def _cmd_cluster(args) -> int:
    rows = []
    labels = []
    with open(args.coords, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        dim_cols = [i for i, h in enumerate(header) if h.startswith("dim")]
        if not dim_cols:
            raise ValidationError(f"{args.coords}: no dim* columns in header {header}")
        for rec in reader:
            labels.append(rec[0])
            rows.append([float(rec[i]) for i in dim_cols])
    coords = np.asarray(rows)
    dist = hclust.euclidean_on_dims(coords, min(args.dims, coords.shape[1]), labels=labels)
    dend = hclust.ward_linkage(dist)
    flat = hclust.cut_tree(dend, args.k)
    out = _out_dir(args)
    reports.cluster_merges_csv(out / "cluster_merges.csv", dend)
    reports.cluster_members_csv(out / "cluster_members.csv", dend, flat)
    reports.dendrogram_svg(out / "cluster_dendrogram.svg", dend, title=f"k={args.k}")
    (out / "cluster_tree.nwk").write_text(hclust.to_newick(dend) + "\n", encoding="utf-8")
    print(f"clustered {len(labels)} items into {args.k}; artifacts in {out}")
    return 0


def _cmd_synth(args) -> int:
    out = _out_dir(args)
    if args.plant == "block":
        table, truth = synthgen.plant_block_missingness(
            args.I, args.Q, args.r, args.k, args.alpha_low, args.alpha_high, args.seed
        )
    else:
        table, truth = synthgen.plant_latent_dims(
            args.I, args.Q, args.n_levels, args.signal_attrs, args.seed,
            flip_prob=args.flip_prob,
        )
    save_table(table, out / "synth_table.csv")
    synthgen.codebook_for(table).to_json(out / "synth_codebook.json")
    truth.to_json(out / "synth_truth.json")
    print(f"wrote synth_table.csv, synth_codebook.json, synth_truth.json to {out}")
    return 0


def _cmd_report(args) -> int:
    _, table = _load(args)
    out = _out_dir(args)
    reports.inventory_csv(out / "inventory.csv", table)
    wrote = ["inventory.csv"]
    for pair in args.crosstab or ():
        a, b = pair.split(",", 1)
        name = f"crosstab_{a}_x_{b}.csv"
        reports.crosstab_csv(out / name, table, a.strip(), b.strip())
        wrote.append(name)
    print(f"wrote {', '.join(wrote)} to {out}")
    return 0


def _cmd_run(args) -> int:
    manifest = run_pipeline(args.config)
    print(
        f"pipeline complete: {len(manifest.files)} artifacts, "
        f"config {manifest.config_hash[:12]}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="foundmine", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate and re-serialize a table")
    _add_table_args(p)
    p.add_argument("--out", help="write the normalized table here")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("blocks", help="co-cluster the missingness mask")
    _add_table_args(p)
    p.add_argument("--r", default="1..4", help="row-cluster range, e.g. 1..6")
    p.add_argument("--k", default="1..4", help="column-cluster range")
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--max-sweeps", type=int, default=100)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_blocks)

    p = sub.add_parser("forest", help="rank attributes with an unsupervised forest")
    _add_table_args(p)
    p.add_argument("--n-trees", type=int, default=1000)
    p.add_argument("--mtry", type=int, default=7)
    p.add_argument("--min-node", type=int, default=1)
    p.add_argument("--no-bootstrap", action="store_true")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_forest)

    p = sub.add_parser("mca", help="specific MCA with suppressed levels")
    _add_table_args(p)
    p.add_argument("--min-freq", type=float, default=0.01)
    p.add_argument("--suppress", nargs="*", help="labels suppressed in every attribute")
    p.add_argument("--filter", help="row filter, e.g. 'outcome=Killed,Captured'")
    p.add_argument("--supplementary", nargs="*", help="attributes projected post hoc")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_mca)

    p = sub.add_parser("cluster", help="Ward-cluster coordinates from a CSV")
    p.add_argument("--coords", required=True, help="CSV with label + dim* columns")
    p.add_argument("--dims", type=int, default=2, help="leading dimensions to use")
    p.add_argument("--k", type=int, required=True, help="flat cluster count")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("synth", help="generate a synthetic table with planted truth")
    p.add_argument("--plant", choices=["block", "latent"], required=True)
    p.add_argument("--I", type=int, required=True)
    p.add_argument("--Q", type=int, required=True)
    p.add_argument("--r", type=int, default=3)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--alpha-low", type=float, default=0.1)
    p.add_argument("--alpha-high", type=float, default=0.6)
    p.add_argument("--n-levels", type=int, default=3)
    p.add_argument("--signal-attrs", type=int, default=2)
    p.add_argument("--flip-prob", type=float, default=0.0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("report", help="inventory and cross-tabulation CSVs")
    _add_table_args(p)
    p.add_argument(
        "--crosstab",
        nargs="*",
        help="attribute pairs 'A,B' to cross-tabulate",
    )
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("run", help="run the full pipeline from a JSON config")
    p.add_argument("config", help="pipeline configuration file")
    p.set_defaults(func=_cmd_run)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # pipeline wraps causes; classify by the root
        root = getattr(exc, "cause", None)
        if isinstance(root, NumericalError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_NUMERICAL
        if isinstance(root, ValidationError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_VALIDATION
        raise


if __name__ == "__main__":
    sys.exit(main())
