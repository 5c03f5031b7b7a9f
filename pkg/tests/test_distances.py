import numpy as np
import pytest

import oracle
from wgcpd.data import validate_sequence
from wgcpd.distances import Metric, build_distance_matrix, deltacon_affinity, pairwise
from wgcpd.errors import InputError, KindMismatch
from wgcpd.kernel import centered_gram_from_distances


def random_graphs(rng, n, m=5, p=0.4):
    a = (rng.random((n, m, m)) < p).astype(float)
    a = np.triu(a, 1)
    return a + a.transpose(0, 2, 1)


class TestPairwise:
    def test_sqeuclidean(self):
        assert pairwise(Metric("sqeuclidean"), [0, 0], [3, 4]) == 25

    @pytest.mark.parametrize("kind", ["sqeuclidean", "l2fun"])
    def test_identity_vectors(self, kind, rng):
        y = rng.standard_normal(6)
        assert pairwise(Metric(kind), y, y) == 0

    @pytest.mark.parametrize("kind", ["frobenius", "deltacon"])
    def test_identity_graphs(self, kind, rng):
        g = random_graphs(rng, 1)[0]
        assert pairwise(Metric(kind), g, g) == 0

    def test_frobenius_one_edge(self):
        a = np.zeros((3, 3))
        b = a.copy()
        b[0, 2] = b[2, 0] = 1
        assert pairwise(Metric("frobenius"), a, b) == 2

    def test_l2fun_riemann_sum(self):
        a = np.ones(4)
        b = np.zeros(4)
        assert pairwise(Metric("l2fun", 2.0), a, b) == pytest.approx(2.0)

    def test_kind_mismatch(self):
        with pytest.raises(KindMismatch):
            pairwise(Metric("deltacon"), [1.0, 2.0], [1.0, 2.0])
        with pytest.raises(KindMismatch):
            pairwise(Metric("sqeuclidean"), np.eye(2), np.eye(2))

    def test_bad_metric(self):
        with pytest.raises(InputError):
            Metric("cosine")
        with pytest.raises(InputError):
            Metric("l2fun", 0.0)

    def test_deltacon_not_negative_type_flag(self):
        assert not Metric("deltacon").negative_type
        assert Metric("frobenius").negative_type


class TestDeltacon:
    def test_empty_graph_is_identity(self):
        assert np.array_equal(deltacon_affinity(np.zeros((4, 4))), np.eye(4))

    def test_two_node_edge_closed_form(self):
        # eps = 1/2, M = [[5/4, -1/2], [-1/2, 5/4]], det = 25/16 - 1/4 = 21/16
        q = deltacon_affinity(np.array([[0, 1], [1, 0]]))
        expected = np.array([[5 / 4, 1 / 2], [1 / 2, 5 / 4]]) * 16 / 21
        assert np.allclose(q, expected, rtol=1e-14)

    def test_matches_gauss_jordan_oracle(self, rng):
        for g in random_graphs(rng, 5, m=6):
            assert np.allclose(deltacon_affinity(g), oracle.deltacon_affinity(g.tolist()),
                               rtol=1e-12, atol=1e-14)

    def test_distance_is_matusita_form(self, rng):
        g1, g2 = random_graphs(rng, 2, m=6)
        q1 = oracle.deltacon_affinity(g1.tolist())
        q2 = oracle.deltacon_affinity(g2.tolist())
        expected = np.sqrt(sum((np.sqrt(a) - np.sqrt(b)) ** 2
                               for a, b in zip(q1.ravel(), q2.ravel())))
        assert pairwise(Metric("deltacon"), g1, g2) == pytest.approx(expected, rel=1e-12)

    def test_entries_nonnegative(self, rng):
        for g in random_graphs(rng, 10, m=8, p=0.7):
            assert np.all(deltacon_affinity(g) >= 0)


class TestBuild:
    def test_identical_observations(self):
        seq = validate_sequence(np.ones((5, 3)), kind="vector")
        assert np.all(build_distance_matrix(Metric("sqeuclidean"), seq).d == 0)

    def test_small_example(self):
        seq = validate_sequence(np.array([[0.0], [1.0], [3.0], [3.0]]), kind="vector")
        d = build_distance_matrix(Metric("sqeuclidean"), seq).d
        assert np.array_equal(d[:3, :3], [[0, 1, 9], [1, 0, 4], [9, 4, 0]])

    def test_matches_double_loop_exactly(self, rng):
        x = rng.standard_normal((10, 4))
        seq = validate_sequence(x, kind="vector")
        d = build_distance_matrix(Metric("sqeuclidean"), seq).d
        ref = np.array([[sum((a[k] - b[k]) ** 2 for k in range(4)) for b in x] for a in x])
        assert np.allclose(d, ref, rtol=1e-15, atol=0)

    @pytest.mark.parametrize("kind", ["frobenius", "deltacon"])
    def test_graph_metrics_match_pairwise(self, kind, rng):
        g = random_graphs(rng, 6)
        seq = validate_sequence(g, kind="graph")
        metric = Metric(kind)
        d = build_distance_matrix(metric, seq).d
        ref = np.array([[pairwise(metric, a, b) for b in g] for a in g])
        assert np.allclose(d, ref, rtol=1e-12, atol=1e-14)

    def test_l2fun_uses_grid_length(self, rng):
        x = rng.standard_normal((5, 50))
        seq = validate_sequence(x, kind="function", grid=(0.0, 2 * np.pi))
        metric = Metric.for_sequence("l2fun", seq)
        d = build_distance_matrix(metric, seq).d
        assert d[0, 1] == pytest.approx(2 * np.pi / 50 * np.sum((x[0] - x[1]) ** 2))

    def test_kind_mismatch(self, rng):
        seq = validate_sequence(rng.standard_normal((5, 2)), kind="vector")
        with pytest.raises(KindMismatch):
            build_distance_matrix(Metric("deltacon"), seq)


class TestNegativeType:
    @pytest.mark.parametrize("kind", ["sqeuclidean", "l2fun"])
    def test_zero_sum_certificate(self, kind, rng):
        for _ in range(50):
            n = int(rng.integers(4, 9))
            seq = validate_sequence(rng.standard_normal((n, 3)), kind="vector" if kind ==
                                    "sqeuclidean" else "function")
            d = build_distance_matrix(Metric(kind), seq).d
            c = rng.standard_normal(n)
            c -= c.mean()
            assert c @ d @ c <= 1e-9

    def test_frobenius_certificate(self, rng):
        for _ in range(50):
            seq = validate_sequence(random_graphs(rng, 8), kind="graph")
            d = build_distance_matrix(Metric("frobenius"), seq).d
            c = rng.standard_normal(8)
            c -= c.mean()
            assert c @ d @ c <= 1e-9

    def test_centered_gram_psd(self, rng):
        seq = validate_sequence(rng.standard_normal((30, 4)), kind="vector")
        d = build_distance_matrix(Metric("sqeuclidean"), seq)
        lam = np.linalg.eigvalsh(centered_gram_from_distances(d).K)
        assert lam.min() >= -1e-8 * lam.max()
