import math

import numpy as np
import pytest

from foundmine import hclust
from foundmine.errors import ValidationError


def ward_oracle(square):
    """Naive agglomeration: dict-of-ids bookkeeping, same recurrence."""
    n = square.shape[0]
    d2 = {}
    for i in range(n):
        for j in range(i + 1, n):
            d2[(i, j)] = float(square[i, j]) ** 2
    sizes = {i: 1 for i in range(n)}
    alive = set(range(n))
    merges = []
    for step in range(n - 1):
        best = None
        for i in sorted(alive):
            for j in sorted(alive):
                if i >= j:
                    continue
                key = (d2[(i, j)], i, j)
                if best is None or key < best:
                    best = key
        val, a, b = best
        new_id = n + step
        merges.append((a, b, math.sqrt(val), sizes[a] + sizes[b]))
        for k in sorted(alive):
            if k in (a, b):
                continue
            dak = d2[(min(a, k), max(a, k))]
            dbk = d2[(min(b, k), max(b, k))]
            upd = (
                (sizes[a] + sizes[k]) * dak
                + (sizes[b] + sizes[k]) * dbk
                - sizes[k] * val
            ) / (sizes[a] + sizes[b] + sizes[k])
            d2[(k, new_id)] = upd
        sizes[new_id] = sizes[a] + sizes[b]
        alive.discard(a)
        alive.discard(b)
        alive.add(new_id)
    return merges


class TestEuclidean:
    def test_identical_points(self):
        d = hclust.euclidean_on_dims(np.zeros((2, 3)), 3)
        assert d.condensed[0] == 0.0

    def test_three_four_five(self):
        d = hclust.euclidean_on_dims(np.array([[0.0, 0.0], [3.0, 4.0]]), 2)
        assert d.condensed[0] == pytest.approx(5.0, abs=1e-12)

    def test_matches_double_loop_oracle(self):
        rng = np.random.default_rng(19)
        for _ in range(50):
            n = int(rng.integers(2, 15))
            dims = int(rng.integers(1, 5))
            pts = rng.normal(size=(n, dims))
            m = int(rng.integers(1, dims + 1))
            got = hclust.euclidean_on_dims(pts, m).full()
            for i in range(n):
                for j in range(n):
                    want = math.sqrt(
                        sum((pts[i, s] - pts[j, s]) ** 2 for s in range(m))
                    )
                    assert abs(got[i, j] - want) < 1e-12

    def test_zero_dims_rejected(self):
        with pytest.raises(ValidationError):
            hclust.euclidean_on_dims(np.zeros((3, 2)), 0)

    def test_too_many_dims_rejected(self):
        with pytest.raises(ValidationError):
            hclust.euclidean_on_dims(np.zeros((3, 2)), 5)


class TestWardLinkage:
    def test_line_points_oracle(self):
        d = hclust.euclidean_on_dims(np.array([[0.0], [1.0], [10.0]]), 1)
        dend = hclust.ward_linkage(d)
        assert (dend.merges[0].left, dend.merges[0].right) == (0, 1)
        assert dend.merges[0].height == pytest.approx(1.0, abs=1e-12)
        assert dend.merges[1].height == pytest.approx(math.sqrt(361 / 3), abs=1e-9)

    def test_two_items(self):
        d = hclust.DistanceMatrix(n=2, condensed=np.array([7.0]))
        dend = hclust.ward_linkage(d)
        assert len(dend.merges) == 1
        assert dend.merges[0].height == pytest.approx(7.0)

    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(101)
        for case in range(100):
            n = int(rng.integers(2, 9))
            pts = rng.normal(size=(n, 2))
            dm = hclust.euclidean_on_dims(pts, 2)
            dend = hclust.ward_linkage(dm)
            expected = ward_oracle(dm.full())
            for got, (a, b, h, s) in zip(dend.merges, expected):
                assert (got.left, got.right) == (a, b)
                assert abs(got.height - h) < 1e-9
                assert got.size == s

    def test_monotone_on_metric_input(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            pts = rng.normal(size=(10, 3))
            dend = hclust.ward_linkage(hclust.euclidean_on_dims(pts, 3))
            heights = [m.height for m in dend.merges]
            assert all(b >= a - 1e-12 for a, b in zip(heights, heights[1:]))
            assert dend.monotone

    def test_ward_d_variant(self):
        # plain-distance recurrence: update for {0,1} vs {10} is
        # (2*10 + 2*9 - 1*1) / 3 = 37/3
        d = hclust.euclidean_on_dims(np.array([[0.0], [1.0], [10.0]]), 1)
        dend = hclust.ward_linkage(d, variant="D")
        assert dend.merges[0].height == pytest.approx(1.0, abs=1e-12)
        assert dend.merges[1].height == pytest.approx(37 / 3, abs=1e-9)

    def test_unknown_variant_rejected(self):
        d = hclust.DistanceMatrix(n=2, condensed=np.array([1.0]))
        with pytest.raises(ValidationError):
            hclust.ward_linkage(d, variant="D3")

    def test_non_finite_rejected(self):
        d = hclust.DistanceMatrix(n=2, condensed=np.array([np.inf]))
        with pytest.raises(ValidationError):
            hclust.ward_linkage(d)

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(55)
        pts = rng.normal(size=(9, 2))
        base = hclust.ward_linkage(hclust.euclidean_on_dims(pts, 2))
        perm = rng.permutation(9)
        other = hclust.ward_linkage(hclust.euclidean_on_dims(pts[perm], 2))
        for k in range(1, 10):
            a = hclust.cut_tree(base, k)
            b = hclust.cut_tree(other, k)
            # same partition after undoing the permutation, up to relabeling
            b_unperm = np.empty_like(b)
            b_unperm[perm] = b
            mapping = {}
            ok = True
            for x, y in zip(a, b_unperm):
                if x in mapping and mapping[x] != y:
                    ok = False
                    break
                mapping[x] = y
            assert ok and len(set(mapping.values())) == len(mapping)


class TestCutTree:
    def _dend(self):
        return hclust.ward_linkage(
            hclust.euclidean_on_dims(np.array([[0.0], [1.0], [10.0]]), 1)
        )

    def test_all_singletons(self):
        assert hclust.cut_tree(self._dend(), 3).tolist() == [0, 1, 2]

    def test_single_cluster(self):
        assert hclust.cut_tree(self._dend(), 1).tolist() == [0, 0, 0]

    def test_two_clusters(self):
        assert hclust.cut_tree(self._dend(), 2).tolist() == [0, 0, 1]

    def test_out_of_range(self):
        with pytest.raises(ValidationError):
            hclust.cut_tree(self._dend(), 0)
        with pytest.raises(ValidationError):
            hclust.cut_tree(self._dend(), 4)

    def test_cuts_nest(self):
        rng = np.random.default_rng(77)
        pts = rng.normal(size=(12, 2))
        dend = hclust.ward_linkage(hclust.euclidean_on_dims(pts, 2))
        for k in range(2, 13):
            coarse = hclust.cut_tree(dend, k - 1)
            fine = hclust.cut_tree(dend, k)
            # every fine cluster sits inside one coarse cluster
            for c in set(fine.tolist()):
                members = np.flatnonzero(fine == c)
                assert len(set(coarse[members].tolist())) == 1


class TestNewick:
    def test_structure(self):
        d = hclust.euclidean_on_dims(
            np.array([[0.0], [1.0], [10.0]]), 1, labels=["a", "b", "c"]
        )
        text = hclust.to_newick(hclust.ward_linkage(d))
        assert text.endswith(";")
        assert "a" in text and "b" in text and "c" in text
        assert text.count("(") == 2
