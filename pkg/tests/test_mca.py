import numpy as np
import pytest

from foundmine import mca
from foundmine import synthgen as sg
from foundmine.errors import DegenerateFitError, DimensionError, ValidationError
from foundmine.tabular import (
    MISSING,
    CategoricalTable,
    build_level_plan,
)


def correlated_pair_table():
    cells = np.array([[0, 0], [0, 0], [1, 1], [1, 1]], dtype=np.int32)
    return CategoricalTable(["A", "B"], [["x", "y"], ["x", "y"]], cells)


def fit_of(table, min_freq=0.0, suppress=()):
    plan = build_level_plan(table, min_freq=min_freq, manual_suppress=suppress)
    return mca.fit_specific_mca(mca.indicator_table(table, plan))


def random_table(rng, max_rows=200, max_cols_total=40):
    n_attrs = int(rng.integers(2, 7))
    levels = [int(rng.integers(2, 6)) for _ in range(n_attrs)]
    while sum(levels) > max_cols_total:
        levels[int(rng.integers(0, n_attrs))] = 2
    I = int(rng.integers(10, max_rows + 1))
    cells = np.column_stack(
        [rng.integers(0, L, I) for L in levels]
    ).astype(np.int32)
    if rng.random() < 0.5:
        cells[rng.random(cells.shape) < 0.1] = MISSING
    names = [f"a{j}" for j in range(n_attrs)]
    lab = [[f"l{i}" for i in range(L)] for L in levels]
    return CategoricalTable(names, lab, cells)


def residual_matrix(indicator):
    """Independent reconstruction of the standardized residual by loops."""
    Z = indicator.Z
    I, K = Z.shape
    N = I * indicator.q_active
    n_j = [sum(Z[i][j] for i in range(I)) for j in range(K)]
    S = np.empty((I, K))
    for i in range(I):
        for j in range(K):
            p = Z[i][j] / N
            rc = (1.0 / I) * (n_j[j] / N)
            S[i][j] = (p - rc) / np.sqrt(rc)
    return S


class TestIndicator:
    def test_two_rows_identity(self):
        table = CategoricalTable(["a"], [["x", "y"]], np.array([[0], [1]], np.int32))
        plan = build_level_plan(table, 0.0)
        ind = mca.indicator_table(table, plan)
        assert np.array_equal(ind.Z, np.eye(2))
        assert ind.q_active == 1

    def test_suppressed_level_gives_zero_block(self):
        cells = np.array([[0], [0], [0], [1]], dtype=np.int32)
        table = CategoricalTable(["a", ], [["x", "y"]], cells)
        wide = CategoricalTable(
            ["a", "b"],
            [["x", "y"], ["p", "q"]],
            np.column_stack([cells[:, 0], np.array([0, 1, 0, 1], np.int32)]),
        )
        plan = build_level_plan(wide, min_freq=0.0, manual_suppress={"y"})
        ind = mca.indicator_table(wide, plan)
        names = [c.name for c in ind.columns]
        assert "a=y" not in names
        row_block = ind.Z[3, [i for i, c in enumerate(ind.columns) if c.attr_name == "a"]]
        assert (row_block == 0).all()

    def test_column_counts_match_level_frequencies(self):
        rng = np.random.default_rng(5)
        table = random_table(rng)
        plan = build_level_plan(table, 0.0)
        ind = mca.indicator_table(table, plan)
        for j, col in enumerate(ind.columns):
            expected = int(table.level_counts(col.attr_index)[col.level_index])
            assert int(ind.column_counts[j]) == expected

    def test_missing_cell_gives_zero_block(self):
        cells = np.array([[0, 0], [MISSING, 1], [1, 0], [0, 1]], dtype=np.int32)
        table = CategoricalTable(["a", "b"], [["x", "y"], ["p", "q"]], cells)
        plan = build_level_plan(table, 0.0)
        ind = mca.indicator_table(table, plan)
        a_cols = [i for i, c in enumerate(ind.columns) if c.attr_name == "a"]
        assert (ind.Z[1, a_cols] == 0).all()

    def test_plan_table_mismatch_rejected(self):
        t1 = correlated_pair_table()
        plan = build_level_plan(t1, 0.0)
        other = CategoricalTable(["Z"], [["x"]], np.zeros((4, 1), np.int32))
        with pytest.raises(ValidationError):
            mca.indicator_table(other, plan)


class TestFit:
    def test_perfectly_correlated_binary_pair(self):
        fit = fit_of(correlated_pair_table())
        assert fit.eigenvalues[0] == pytest.approx(1.0, abs=1e-9)
        # any further axis is numerically null
        assert all(l <= 1e-9 for l in fit.eigenvalues[1:])
        assert np.allclose(np.abs(fit.g[:, 0]), 1.0, atol=1e-9)

    def test_contribution_normalization(self):
        rng = np.random.default_rng(17)
        for _ in range(10):
            fit = fit_of(random_table(rng))
            sums = fit.ctr.sum(axis=0)
            assert np.allclose(sums, 1.0, atol=1e-9)

    def test_individual_coordinates_centered(self):
        rng = np.random.default_rng(23)
        for _ in range(10):
            fit = fit_of(random_table(rng))
            assert np.abs(fit.f.sum(axis=0)).max() < 1e-8

    def test_total_inertia_equals_eigenvalue_sum(self):
        rng = np.random.default_rng(29)
        for _ in range(10):
            fit = fit_of(random_table(rng))
            assert fit.eigenvalues.sum() == pytest.approx(
                fit.total_inertia, abs=1e-9
            )

    def test_transition_formula(self):
        rng = np.random.default_rng(31)
        table = random_table(rng)
        fit = fit_of(table)
        for s in range(fit.n_dims):
            if fit.eigenvalues[s] < 1e-10:
                continue
            for j, col in enumerate(fit.columns):
                rows = table.cells[:, col.attr_index] == col.level_index
                rhs = fit.f[rows, s].mean() / np.sqrt(fit.eigenvalues[s])
                assert rhs == pytest.approx(fit.g[j, s], abs=1e-8)

    def test_duplicating_rows_preserves_fit(self):
        table = random_table(np.random.default_rng(37))
        doubled = CategoricalTable(
            table.attr_names,
            table.levels,
            np.vstack([table.cells, table.cells]),
        )
        f1 = fit_of(table)
        f2 = fit_of(doubled)
        n = min(f1.n_dims, f2.n_dims)
        assert np.allclose(f1.eigenvalues[:n], f2.eigenvalues[:n], atol=1e-8)
        assert np.allclose(np.abs(f1.g[:, :n]), np.abs(f2.g[:, :n]), atol=1e-7)
        assert np.allclose(f1.ctr[:, :n], f2.ctr[:, :n], atol=1e-8)

    def test_eigendecomposition_oracle(self):
        rng = np.random.default_rng(41)
        for _ in range(20):
            table = random_table(rng, max_rows=120)
            plan = build_level_plan(table, 0.0)
            ind = mca.indicator_table(table, plan)
            fit = mca.fit_specific_mca(ind)
            S = residual_matrix(ind)
            evals, evecs = np.linalg.eigh(S.T @ S)
            evals = evals[::-1]
            evecs = evecs[:, ::-1]
            n = fit.n_dims
            assert np.allclose(fit.eigenvalues, evals[:n], atol=1e-8)
            c = ind.column_counts / (ind.n_rows * ind.q_active)
            lam = fit.eigenvalues
            for s in range(n):
                # per-axis sign comparison is only defined off ties
                gap_lo = np.inf if s == 0 else lam[s - 1] - lam[s]
                gap_hi = lam[s] if s == n - 1 else lam[s] - lam[s + 1]
                if min(gap_lo, gap_hi) < 1e-6:
                    continue
                g_oracle = np.sqrt(evals[s]) * evecs[:, s] / np.sqrt(c)
                assert np.allclose(
                    np.abs(fit.g[:, s]), np.abs(g_oracle), atol=1e-8
                )

    def test_degenerate_rank_zero(self):
        cells = np.tile(np.array([[0, 1]], dtype=np.int32), (6, 1))
        table = CategoricalTable(["a", "b"], [["x", "y"], ["x", "y"]], cells)
        plan = build_level_plan(table, 0.0)
        plan.retained["a"] = [0, 1]
        plan.retained["b"] = [0, 1]
        plan.active = ["a", "b"]
        plan.dropped = []
        with pytest.raises((DegenerateFitError, ValidationError)):
            mca.fit_specific_mca(mca.indicator_table(table, plan))

    def test_too_small_rejected(self):
        ind = mca.IndicatorMatrix(Z=np.ones((1, 3)), columns=[None] * 3, q_active=1)
        with pytest.raises(DimensionError):
            mca.fit_specific_mca(ind)


class TestContributions:
    def test_uniform_contributions_give_empty_report(self):
        fit = fit_of(correlated_pair_table())
        # all four levels contribute exactly the average 1/4
        assert np.allclose(fit.ctr[:, 0], 0.25, atol=1e-12)
        assert mca.contributions_report(fit, 0) == []

    def test_lower_threshold_reports_all_four(self):
        fit = fit_of(correlated_pair_table())
        rows = mca.contributions_report(fit, 0, threshold=0.2)
        assert len(rows) == 4
        coords = np.array([abs(r["coord"]) for r in rows])
        assert np.allclose(coords, coords[0], atol=1e-9)
        positives = [r for r in rows if r["coord"] > 0]
        assert rows[: len(positives)] == positives  # positive side first

    def test_axis_out_of_range(self):
        fit = fit_of(correlated_pair_table())
        with pytest.raises(ValidationError):
            mca.contributions_report(fit, fit.n_dims)


class TestSupplementary:
    def test_active_attribute_reproduced(self):
        rng = np.random.default_rng(43)
        table = random_table(rng)
        fit = fit_of(table)
        for attr in table.attr_names:
            proj = mca.project_supplementary(fit, table, attr)
            for j, col in enumerate(fit.columns):
                if col.attr_name != attr:
                    continue
                assert np.allclose(
                    proj[col.label]["coords"], fit.g[j], atol=1e-8
                )

    def test_constant_level_projects_to_origin(self):
        table = correlated_pair_table()
        fit = fit_of(table)
        tagged = table.with_column("tag", ["all"], np.zeros(4, dtype=np.int32))
        proj = mca.project_supplementary(fit, tagged, "tag")
        assert np.allclose(proj["all"]["coords"], 0.0, atol=1e-9)

    def test_planted_group_marker_separates(self):
        tab, truth = sg.plant_latent_dims(300, 5, 3, 5, seed=9)
        group = (truth.driver_axes > 0).astype(np.int32)
        tagged = tab.with_column("group", ["neg", "pos"], group)
        fit = fit_of(tab)
        proj = mca.project_supplementary(fit, tagged, "group")
        a = proj["neg"]["coords"][0]
        b = proj["pos"]["coords"][0]
        assert a * b < 0

    def test_row_count_mismatch_rejected(self):
        table = correlated_pair_table()
        fit = fit_of(table)
        small = CategoricalTable(["A"], [["x"]], np.zeros((2, 1), np.int32))
        with pytest.raises(DimensionError):
            mca.project_supplementary(fit, small, "A")


class TestModifiedRates:
    def test_single_dominant_axis(self):
        fit = fit_of(correlated_pair_table())
        rates = mca.modified_rates(fit)
        assert rates[0] == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(rates[1:], 0.0)

    def test_all_below_threshold_degenerate(self):
        fit = fit_of(correlated_pair_table())
        fit.eigenvalues = np.array([0.4, 0.3])  # both <= 1/2
        rates = mca.modified_rates(fit)
        assert (rates == 0).all()

    def test_rates_sum_to_one(self):
        rng = np.random.default_rng(47)
        for _ in range(10):
            table = random_table(rng)
            fit = fit_of(table)
            rates = mca.modified_rates(fit)
            if rates.sum() > 0:
                assert rates.sum() == pytest.approx(1.0, abs=1e-9)
