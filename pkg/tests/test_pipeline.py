import json
from pathlib import Path

import pytest

from foundmine import synthgen as sg
from foundmine.errors import PipelineError, ValidationError
from foundmine.pipeline import load_config, run_pipeline
from foundmine.tabular import save_table


def write_inputs(base: Path, seed=7, I=250, Q=10):
    data = base / "data"
    data.mkdir(parents=True, exist_ok=True)
    table, truth = sg.plant_block_missingness(I, Q, 2, 2, 0.1, 0.6, seed=seed)
    save_table(table, data / "synth_table.csv")
    sg.codebook_for(table).to_json(data / "synth_codebook.json")
    truth.to_json(data / "synth_truth.json")
    return data


def base_config(out="out", threads=1):
    return {
        "data": {
            "table": "data/synth_table.csv",
            "codebook": "data/synth_codebook.json",
        },
        "threads": threads,
        "blockmodel": {"r_range": [1, 3], "k_range": [1, 3], "restarts": 4, "seed": 7},
        "forest": {"n_trees": 40, "seed": 11, "include_derived_attrs": True},
        "mca": {
            "filters": {
                "all": [],
                "sub": [{"attribute": "a00", "op": "IN", "labels": ["v0", "v1"]}],
            },
            "supplementary": ["a01"],
            "dims_for_clustering": 2,
        },
        "cluster": {"k": 2},
        "report": {"output_dir": out},
    }


def write_config(base: Path, cfg: dict, name="config.json") -> Path:
    path = base / name
    path.write_text(json.dumps(cfg, indent=2), encoding="utf-8")
    return path


class TestRunPipeline:
    def test_emits_declared_artifacts(self, tmp_path):
        write_inputs(tmp_path)
        manifest = run_pipeline(write_config(tmp_path, base_config()))
        files = set(manifest.files)
        assert len(files) >= 10
        expected = {
            "blocks_grid.csv",
            "blocks_heatmap.svg",
            "blocks_row_assignments.csv",
            "blocks_col_assignments.csv",
            "forest_rank.csv",
            "forest_distance.csv",
            "forest_interaction.svg",
            "inventory.csv",
            "mca_all_eigenvalues.csv",
            "mca_all_contributions.csv",
            "mca_all_factor_map.svg",
            "mca_all_supp_a01.csv",
            "cluster_all_a01_merges.csv",
            "cluster_all_a01_members.csv",
            "cluster_all_a01_dendrogram.svg",
            "cluster_all_a01.nwk",
            "mca_sub_eigenvalues.csv",
            "plan_all.csv",
        }
        assert expected <= files
        assert (tmp_path / "out" / "manifest.json").exists()
        assert manifest.timings.keys() >= {"ingest", "blocks", "forest", "mca", "cluster"}

    def test_rerun_reproduces_digests(self, tmp_path):
        write_inputs(tmp_path)
        m1 = run_pipeline(write_config(tmp_path, base_config(out="o1"), "c1.json"))
        m2 = run_pipeline(write_config(tmp_path, base_config(out="o2"), "c2.json"))
        assert m1.files == m2.files

    def test_thread_count_does_not_change_digests(self, tmp_path):
        write_inputs(tmp_path)
        m1 = run_pipeline(write_config(tmp_path, base_config(out="t1", threads=1), "c1.json"))
        m2 = run_pipeline(write_config(tmp_path, base_config(out="t2", threads=4), "c4.json"))
        assert m1.files == m2.files

    def test_derived_attribute_feeds_forest(self, tmp_path):
        write_inputs(tmp_path)
        run_pipeline(write_config(tmp_path, base_config()))
        rank = (tmp_path / "out" / "forest_rank.csv").read_text()
        assert "record_cluster" in rank

    def test_bad_filter_attribute_fails_before_artifacts(self, tmp_path):
        write_inputs(tmp_path)
        cfg = base_config()
        cfg["mca"]["filters"]["bad"] = [
            {"attribute": "missing_attr", "op": "IN", "labels": ["v0"]}
        ]
        with pytest.raises(PipelineError) as err:
            run_pipeline(write_config(tmp_path, cfg))
        assert err.value.stage == "ingest"
        out = tmp_path / "out"
        leftovers = [p for p in out.iterdir() if p.is_file()] if out.exists() else []
        assert leftovers == []

    def test_midstage_failure_removes_partial_artifacts(self, tmp_path):
        # A constant table reaches the MCA stage (blocks and forest cope)
        # and then fails with a rank-0 decomposition.
        data = tmp_path / "data"
        data.mkdir()
        (data / "synth_table.csv").write_text(
            "a00,a01\n" + "x,y\n" * 12, encoding="utf-8"
        )
        (data / "synth_codebook.json").write_text(
            json.dumps(
                {"attributes": [
                    {"name": "a00", "levels": ["x", "z"]},
                    {"name": "a01", "levels": ["y", "w"]},
                ]}
            ),
            encoding="utf-8",
        )
        cfg = base_config()
        cfg["blockmodel"] = {"r_range": [1, 2], "k_range": [1, 2], "restarts": 2, "seed": 7}
        cfg["mca"]["filters"] = {"all": []}
        cfg["mca"]["min_freq"] = 0.0
        cfg["forest"] = {"n_trees": 4, "seed": 1, "include_derived_attrs": False}
        with pytest.raises(PipelineError) as err:
            run_pipeline(write_config(tmp_path, cfg))
        assert err.value.stage == "mca"
        out = tmp_path / "out"
        leftovers = [p.name for p in out.iterdir() if p.is_file()]
        assert leftovers == []

    def test_manual_column_override_splits_cluster(self, tmp_path):
        write_inputs(tmp_path)
        cfg = base_config()
        cfg["blockmodel"]["manual_overrides"] = {
            "extra_column_clusters": [["a00", "a01"]]
        }
        manifest = run_pipeline(write_config(tmp_path, cfg))
        import csv

        rows = list(
            csv.reader(open(tmp_path / "out" / "blocks_col_assignments.csv"))
        )[1:]
        by_attr = {name: int(c) for name, c in rows}
        assert by_attr["a00"] == by_attr["a01"]
        others = {c for name, c in by_attr.items() if name not in ("a00", "a01")}
        assert by_attr["a00"] not in others


class TestLoadConfig:
    def test_missing_data_keys_rejected(self, tmp_path):
        path = write_config(tmp_path, {"data": {}})
        with pytest.raises(ValidationError):
            load_config(path)

    def test_missing_table_file_rejected(self, tmp_path):
        path = write_config(
            tmp_path,
            {"data": {"table": "absent.csv", "codebook": "absent.json"}},
        )
        with pytest.raises(ValidationError):
            load_config(path)

    def test_defaults_applied(self, tmp_path):
        write_inputs(tmp_path)
        cfg = load_config(write_config(tmp_path, base_config()))
        assert cfg["mca"]["min_freq"] == 0.01
        assert cfg["blockmodel"]["max_sweeps"] == 100
        assert cfg["forest"]["mtry"] == 7
        assert "_hash" in cfg
