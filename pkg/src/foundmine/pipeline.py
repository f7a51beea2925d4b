"""End-to-end orchestration driven by one JSON configuration.

Stages run in dependency order: ingest, missingness block clustering,
forest ranking (optionally with the fitted row-cluster label appended as
a derived attribute), one MCA per named row filter with supplementary
projections, and Ward clustering of the supplementary points. Every
artifact is a CSV or SVG file; the manifest records the config hash,
seeds, stage timings, and a content digest per emitted file. Reruns
with the same config and seeds reproduce identical digests regardless
of thread count; on stage failure all files from the current run are
removed.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from foundmine import blockmodel, hclust, mca, reports, urf
from foundmine.errors import PipelineError, ValidationError
from foundmine.tabular import (
    CategoricalTable,
    Codebook,
    RowFilter,
    build_level_plan,
    filter_rows,
    load_table,
    missingness_mask,
    validate_filter,
)

log = logging.getLogger(__name__)


@dataclass
class RunManifest:
    config_hash: str
    seeds: dict
    timings: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)  # relative path -> sha256

    def to_json(self) -> str:
        return json.dumps(
            {
                "config_hash": self.config_hash,
                "seeds": self.seeds,
                "timings": self.timings,
                "files": dict(sorted(self.files.items())),
            },
            indent=2,
        )


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def _require(cond, message):
    if not cond:
        raise ValidationError(message)


def load_config(path) -> dict:
    """Parse a pipeline config, apply defaults, resolve relative paths."""
    path = Path(path)
    raw = path.read_bytes()
    cfg = json.loads(raw.decode("utf-8"))
    cfg["_hash"] = hashlib.sha256(raw).hexdigest()
    base = path.parent

    data = cfg.get("data") or {}
    _require("table" in data and "codebook" in data, "config needs data.table and data.codebook")
    for key in ("table", "codebook"):
        p = base / data[key] if not Path(data[key]).is_absolute() else Path(data[key])
        _require(p.exists(), f"data.{key} does not exist: {p}")
        data[key] = str(p)
    data.setdefault("delimiter", ",")
    cfg["data"] = data

    bm = cfg.get("blockmodel") or {}
    bm.setdefault("r_range", [1, 4])
    bm.setdefault("k_range", [1, 4])
    bm.setdefault("restarts", 10)
    bm.setdefault("max_sweeps", 100)
    bm.setdefault("seed", 0)
    bm.setdefault("manual_overrides", {})
    cfg["blockmodel"] = bm

    fo = cfg.get("forest") or {}
    fo.setdefault("n_trees", 200)
    fo.setdefault("mtry", 7)
    fo.setdefault("min_node", 1)
    fo.setdefault("bootstrap", True)
    fo.setdefault("seed", 0)
    fo.setdefault("include_derived_attrs", True)
    cfg["forest"] = fo

    mc = cfg.get("mca") or {}
    mc.setdefault("min_freq", 0.01)
    mc.setdefault("suppress", [])
    mc.setdefault("filters", {"all": []})
    mc.setdefault("supplementary", [])
    mc.setdefault("dims_for_clustering", 2)
    cfg["mca"] = mc

    cl = cfg.get("cluster") or {}
    cl.setdefault("k", 2)
    cl.setdefault("min_count", 1)
    cfg["cluster"] = cl

    rep = cfg.get("report") or {}
    out = rep.get("output_dir", "out")
    out_path = base / out if not Path(out).is_absolute() else Path(out)
    rep["output_dir"] = str(out_path)
    cfg["report"] = rep

    cfg.setdefault("threads", 1)
    return cfg


def _range_of(spec) -> list:
    if isinstance(spec, (list, tuple)) and len(spec) == 2:
        return list(range(int(spec[0]), int(spec[1]) + 1))
    if isinstance(spec, (list, tuple)):
        return [int(v) for v in spec]
    return [int(spec)]


class _Emitter:
    """Tracks artifacts so a failed run can be cleaned up."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.created: list[Path] = []

    def path(self, name: str) -> Path:
        p = self.out_dir / name
        self.created.append(p)
        return p

    def cleanup(self):
        for p in self.created:
            try:
                p.unlink(missing_ok=True)
            except OSError:
                pass

    def digests(self) -> dict:
        return {
            p.name: _sha256(p) for p in self.created if p.exists()
        }


def run_pipeline(config_path) -> RunManifest:
    """Execute every configured stage; returns the manifest (also written)."""
    cfg = load_config(config_path)
    out_dir = Path(cfg["report"]["output_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    emit = _Emitter(out_dir)
    manifest = RunManifest(
        config_hash=cfg["_hash"],
        seeds={"blockmodel": cfg["blockmodel"]["seed"], "forest": cfg["forest"]["seed"]},
    )
    threads = int(cfg.get("threads", 1))

    stage = "ingest"
    try:
        t0 = time.perf_counter()
        codebook = Codebook.from_json(cfg["data"]["codebook"])
        table = load_table(codebook, cfg["data"]["table"], cfg["data"]["delimiter"])
        named_filters = {
            name: RowFilter.from_spec(spec)
            for name, spec in cfg["mca"]["filters"].items()
        }
        for name, row_filter in named_filters.items():
            try:
                validate_filter(table, row_filter)
            except ValidationError as exc:
                raise ValidationError(f"filter {name!r}: {exc}")
        for attr in cfg["mca"]["supplementary"]:
            table.attr_index(attr)
        reports.inventory_csv(emit.path("inventory.csv"), table)
        manifest.timings[stage] = time.perf_counter() - t0

        stage = "blocks"
        t0 = time.perf_counter()
        mask = missingness_mask(table)
        lbm_cfg = blockmodel.LbmConfig(
            n_restarts=int(cfg["blockmodel"]["restarts"]),
            max_sweeps=int(cfg["blockmodel"]["max_sweeps"]),
            seed=int(cfg["blockmodel"]["seed"]),
        )
        fit = blockmodel.select_blocks(
            mask,
            _range_of(cfg["blockmodel"]["r_range"]),
            _range_of(cfg["blockmodel"]["k_range"]),
            lbm_cfg,
            n_jobs=threads,
        )
        overrides = cfg["blockmodel"]["manual_overrides"].get("extra_column_clusters")
        if overrides:
            groups = [[table.attr_index(a) for a in grp] for grp in overrides]
            fit = blockmodel.apply_column_overrides(fit, mask, groups)
        reports.block_grid_csv(emit.path("blocks_grid.csv"), fit)
        reports.block_assignments_csv(
            emit.path("blocks_row_assignments.csv"),
            emit.path("blocks_col_assignments.csv"),
            fit,
            table.attr_names,
        )
        reports.block_heatmap_svg(emit.path("blocks_heatmap.svg"), fit, mask)
        manifest.timings[stage] = time.perf_counter() - t0

        stage = "forest"
        t0 = time.perf_counter()
        forest_table = table
        if cfg["forest"]["include_derived_attrs"]:
            labels = [f"c{g}" for g in range(fit.r)]
            forest_table = table.with_column("record_cluster", labels, fit.z)
        forest_cfg = urf.ForestConfig(
            n_trees=int(cfg["forest"]["n_trees"]),
            mtry=int(cfg["forest"]["mtry"]),
            min_node=int(cfg["forest"]["min_node"]),
            bootstrap=bool(cfg["forest"]["bootstrap"]),
            seed=int(cfg["forest"]["seed"]),
        )
        forest = urf.grow_forest(forest_table, forest_cfg, n_jobs=threads)
        stats = urf.depth_statistics(forest, n_jobs=threads)
        reports.forest_rank_csv(emit.path("forest_rank.csv"), stats)
        reports.forest_distance_csv(emit.path("forest_distance.csv"), stats)
        dist = hclust.DistanceMatrix.from_square(
            _zero_diag(stats.dist), labels=stats.attr_names
        )
        interaction_dend = hclust.ward_linkage(dist)
        reports.forest_interaction_svg(
            emit.path("forest_interaction.svg"), stats, interaction_dend
        )
        manifest.timings[stage] = time.perf_counter() - t0

        stage = "mca"
        t0 = time.perf_counter()

        def run_one_mca(item):
            name, row_filter = item
            sub = filter_rows(table, row_filter) if row_filter.clauses else table
            plan = build_level_plan(
                sub,
                min_freq=float(cfg["mca"]["min_freq"]),
                manual_suppress=cfg["mca"]["suppress"],
            )
            fit_mca = mca.fit_specific_mca(mca.indicator_table(sub, plan))
            return name, sub, plan, fit_mca

        items = sorted(named_filters.items())
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                analyses = list(pool.map(run_one_mca, items))
        else:
            analyses = [run_one_mca(it) for it in items]

        for name, sub, plan, fit_mca in analyses:
            reports.write_csv(
                emit.path(f"plan_{name}.csv"),
                ["attribute", "level", "status", "reason"],
                _plan_rows(sub, plan),
            )
            reports.mca_eigen_csv(emit.path(f"mca_{name}_eigenvalues.csv"), fit_mca)
            reports.mca_coordinates_csv(
                emit.path(f"mca_{name}_coordinates.csv"), fit_mca
            )
            reports.mca_contributions_csv(
                emit.path(f"mca_{name}_contributions.csv"), fit_mca
            )
            reports.mca_factor_map_svg(
                emit.path(f"mca_{name}_factor_map.svg"),
                fit_mca,
                title=f"category map ({name})",
            )
        manifest.timings[stage] = time.perf_counter() - t0

        stage = "cluster"
        t0 = time.perf_counter()
        k_spec = cfg["cluster"]["k"]
        min_count = int(cfg["cluster"]["min_count"])
        m_dims = int(cfg["mca"]["dims_for_clustering"])
        for name, sub, plan, fit_mca in analyses:
            for attr in cfg["mca"]["supplementary"]:
                proj = mca.project_supplementary(fit_mca, sub, attr)
                reports.supplementary_csv(
                    emit.path(f"mca_{name}_supp_{attr}.csv"), proj, fit_mca.n_dims
                )
                reports.supplementary_map_svg(
                    emit.path(f"mca_{name}_supp_{attr}_map.svg"),
                    proj,
                    title=f"supplementary {attr} ({name})",
                )
                kept = {
                    lab: info for lab, info in proj.items() if info["n"] >= min_count
                }
                if len(kept) < 2:
                    log.warning(
                        "analysis %s/%s: fewer than 2 supplementary levels with "
                        "count >= %d; clustering skipped",
                        name,
                        attr,
                        min_count,
                    )
                    continue
                labels = sorted(kept)
                coords = np.vstack([kept[lab]["coords"] for lab in labels])
                m_use = min(m_dims, coords.shape[1])
                dist = hclust.euclidean_on_dims(coords, m_use, labels=labels)
                dend = hclust.ward_linkage(dist)
                k = k_spec[name] if isinstance(k_spec, dict) else int(k_spec)
                k = max(1, min(k, len(labels)))
                flat = hclust.cut_tree(dend, k)
                base = f"cluster_{name}_{attr}"
                reports.cluster_merges_csv(emit.path(f"{base}_merges.csv"), dend)
                reports.cluster_members_csv(
                    emit.path(f"{base}_members.csv"),
                    dend,
                    flat,
                    counts={lab: kept[lab]["n"] for lab in labels},
                )
                reports.dendrogram_svg(
                    emit.path(f"{base}_dendrogram.svg"),
                    dend,
                    title=f"{attr} clusters ({name}), k={k}",
                )
                emit.path(f"{base}.nwk").write_text(
                    hclust.to_newick(dend) + "\n", encoding="utf-8"
                )
        manifest.timings[stage] = time.perf_counter() - t0

        stage = "manifest"
        manifest.files = emit.digests()
        (out_dir / "manifest.json").write_text(
            manifest.to_json() + "\n", encoding="utf-8"
        )
    except Exception as exc:
        emit.cleanup()
        if isinstance(exc, PipelineError):
            raise
        raise PipelineError(stage, exc) from exc

    return manifest


def _zero_diag(matrix: np.ndarray) -> np.ndarray:
    out = matrix.copy()
    np.fill_diagonal(out, 0.0)
    return out


def _plan_rows(table: CategoricalTable, plan) -> list:
    rows = []
    for name in plan.attr_names:
        q = table.attr_index(name)
        for li in plan.retained[name]:
            rows.append((name, table.levels[q][li], "retained", ""))
        for li, reason in sorted(plan.suppressed[name].items()):
            label = "<missing>" if li == -1 else table.levels[q][li]
            rows.append((name, label, "suppressed", reason))
        if name in plan.dropped:
            rows.append((name, "", "attribute_dropped", "fewer than 2 retained levels"))
    return rows
