import numpy as np
import pytest

from conftest import finite_difference, rel_err
from orthoreg.errors import ConfigError, ShapeMismatch
from orthoreg.graphio import graph_from_edges, normalize
from orthoreg.reg import (
    RegularizerSpec,
    corr_identity_reg,
    cross_correlation,
    laplacian_reg,
    neighborhood_summary,
    orthoreg_loss,
    p_reg,
    regularizer_value_grad,
)
from orthoreg.synth import path_graph, sbm_graph


def ring_modes(n: int) -> np.ndarray:
    """First-frequency cosine/sine columns on a ring: zero-mean, orthogonal,
    and eigenvectors of every ring operator with a positive eigenvalue."""
    theta = 2.0 * np.pi * np.arange(n) / n
    return np.column_stack([np.cos(theta), np.sin(theta)])


class TestSpec:
    def test_rejects_unknown_kind(self):
        with pytest.raises(ConfigError):
            RegularizerSpec(kind="bogus")

    def test_rejects_negative_strengths(self):
        with pytest.raises(ConfigError):
            RegularizerSpec(kind="orthoreg", alpha=-1.0)

    def test_rejects_bad_hops(self):
        with pytest.raises(ConfigError):
            RegularizerSpec(kind="orthoreg", hops=0)


class TestLaplacianReg:
    def test_constant_rows_on_regular_graph(self, ring8):
        lap = normalize(ring8, "laplacian")
        h = np.tile([2.0, -1.0, 0.5], (8, 1))
        value, grad = laplacian_reg(h, lap, 0.7)
        assert value == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(grad, 0.0, atol=1e-12)

    def test_two_node_hand_computation(self, single_edge):
        lap = normalize(single_edge, "laplacian")
        h = np.array([[1.0], [0.0]])
        lam = 0.9
        value, _ = laplacian_reg(h, lap, lam)
        assert value == pytest.approx(lam * 1.0)

    def test_gradient_matches_finite_differences(self, rng):
        g, _ = sbm_graph(9, seed=4)
        lap = normalize(g, "laplacian")
        h = rng.standard_normal((9, 3))
        lam = 0.31
        _, grad = laplacian_reg(h, lap, lam)
        fd = finite_difference(lambda hh: laplacian_reg(hh, lap, lam)[0], h)
        assert rel_err(grad, fd) < 1e-6

    def test_value_nonnegative(self, rng):
        g, _ = sbm_graph(12, seed=1)
        lap = normalize(g, "laplacian")
        for _ in range(10):
            value, _ = laplacian_reg(rng.standard_normal((12, 4)), lap, 1.0)
            assert value >= -1e-12

    def test_wrong_operator_kind(self, ring8, rng):
        with pytest.raises(ShapeMismatch):
            laplacian_reg(rng.standard_normal((8, 2)), normalize(ring8, "sym"), 1.0)


class TestPReg:
    def test_constant_rows_on_regular_graph(self, ring8):
        a_sym = normalize(ring8, "sym")
        h = np.tile([1.5, -2.0], (8, 1))
        value, grad = p_reg(h, a_sym, 0.5)
        assert value == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(grad, 0.0, atol=1e-12)

    def test_single_edge_hand_computation(self, single_edge):
        a_sym = normalize(single_edge, "sym")
        h = np.array([[1.0], [-1.0]])
        lam = 0.25
        value, _ = p_reg(h, a_sym, lam)
        # propagation flips the sign: residual rows are -2 and 2
        assert value == pytest.approx(lam / 2.0 * 8.0)

    def test_gradient_matches_finite_differences(self, rng):
        g, _ = sbm_graph(10, seed=6)
        a_sym = normalize(g, "sym")
        h = rng.standard_normal((10, 3))
        _, grad = p_reg(h, a_sym, 0.8)
        fd = finite_difference(lambda hh: p_reg(hh, a_sym, 0.8)[0], h)
        assert rel_err(grad, fd) < 1e-6

    def test_value_nonnegative(self, rng):
        g, _ = sbm_graph(10, seed=2)
        a_sym = normalize(g, "sym")
        for _ in range(10):
            assert p_reg(rng.standard_normal((10, 3)), a_sym, 1.0)[0] >= -1e-12


class TestNeighborhoodSummary:
    def test_one_hop_equals_propagation(self, rng):
        g, _ = sbm_graph(12, seed=0)
        a_rw = normalize(g, "rw")
        h = rng.standard_normal((12, 4))
        np.testing.assert_allclose(
            neighborhood_summary(h, a_rw, 1), a_rw.matrix @ h, atol=1e-14
        )

    def test_two_hop_average_on_path(self):
        g = path_graph(4)
        a_rw = normalize(g, "rw")
        h = np.eye(4)
        # dense column-normalized adjacency, built by hand
        a = np.array(
            [[0, 1, 0, 0], [1, 0, 1, 0], [0, 1, 0, 1], [0, 0, 1, 0]], dtype=float
        )
        d_inv = np.diag(1.0 / a.sum(axis=0))
        a_hand = a @ d_inv
        expected = (a_hand @ h + a_hand @ a_hand @ h) / 2.0
        np.testing.assert_allclose(neighborhood_summary(h, a_rw, 2), expected, atol=1e-12)

    def test_second_hop_mode(self, rng):
        g, _ = sbm_graph(10, seed=8)
        a_rw = normalize(g, "rw")
        h = rng.standard_normal((10, 3))
        expected = a_rw.matrix @ (a_rw.matrix @ h)
        np.testing.assert_allclose(
            neighborhood_summary(h, a_rw, 2, mode="second_hop_only"), expected, atol=1e-14
        )

    def test_isolated_node_gets_zero_row(self, rng):
        g = graph_from_edges(5, [(0, 1), (1, 2), (2, 3)])  # node 4 isolated
        a_rw = normalize(g, "rw")
        s = neighborhood_summary(rng.standard_normal((5, 3)), a_rw, 2)
        np.testing.assert_array_equal(s[4], 0.0)

    def test_linearity(self, rng):
        g, _ = sbm_graph(11, seed=3)
        a_rw = normalize(g, "rw")
        h1 = rng.standard_normal((11, 3))
        h2 = rng.standard_normal((11, 3))
        lhs = neighborhood_summary(2.5 * h1 - 1.25 * h2, a_rw, 3)
        rhs = 2.5 * neighborhood_summary(h1, a_rw, 3) - 1.25 * neighborhood_summary(h2, a_rw, 3)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)


class TestCrossCorrelation:
    def test_self_correlation_of_orthogonal_columns(self, ring8):
        h = ring_modes(8)
        cc = cross_correlation(h, h)
        np.testing.assert_allclose(cc.c, np.eye(2), atol=1e-6)

    def test_negated_partner_gives_minus_one_diagonal(self, rng):
        h = rng.standard_normal((10, 3))
        cc = cross_correlation(h, -h)
        np.testing.assert_allclose(np.diag(cc.c), -1.0, atol=1e-6)

    def test_matches_bruteforce_standardize_then_dot(self, rng):
        h = rng.standard_normal((10, 3))
        s = rng.standard_normal((10, 3))
        eps = 1e-8
        expected = np.zeros((3, 3))
        for k in range(3):
            for kp in range(3):
                a = h[:, k] - h[:, k].mean()
                b = s[:, kp] - s[:, kp].mean()
                a = a / np.sqrt((a**2).mean() + eps)
                b = b / np.sqrt((b**2).mean() + eps)
                expected[k, kp] = float((a * b).mean())
        np.testing.assert_allclose(cross_correlation(h, s).c, expected, atol=1e-12)

    def test_entries_bounded_by_cauchy_schwarz(self, rng):
        for _ in range(10):
            h = rng.standard_normal((15, 4)) * rng.uniform(0.1, 5.0)
            s = rng.standard_normal((15, 4))
            assert np.abs(cross_correlation(h, s).c).max() <= 1.0 + 1e-6

    def test_shape_mismatch(self, rng):
        with pytest.raises(ShapeMismatch):
            cross_correlation(rng.standard_normal((5, 2)), rng.standard_normal((5, 3)))


class TestOrthoregLoss:
    def test_smoothed_orthonormal_embedding_hits_optimum(self, ring8):
        # ring frequency-1 modes: standardized-orthogonal and eigenvectors
        # of the propagation with a positive eigenvalue, so the summary
        # standardizes back to the embedding itself
        a_rw = normalize(ring8, "rw")
        spec = RegularizerSpec(kind="orthoreg", alpha=0.3, beta=0.1, hops=1)
        value, _ = orthoreg_loss(ring_modes(8), a_rw, spec)
        assert value == pytest.approx(-0.3 * 2, abs=1e-6)

    def test_rank_one_smooth_embedding_saturates_off_diagonal(self, ring8):
        a_rw = normalize(ring8, "rw")
        d = 3
        h = np.tile(ring_modes(8)[:, :1], (1, d))
        spec = RegularizerSpec(kind="orthoreg", alpha=0.0, beta=0.05, hops=1)
        value, _ = orthoreg_loss(h, a_rw, spec)
        assert value == pytest.approx(0.05 * d * (d - 1), rel=1e-5)

    def test_gradient_matches_finite_differences(self, rng):
        g, _ = sbm_graph(12, seed=11)
        a_rw = normalize(g, "rw")
        h = rng.standard_normal((12, 4))
        spec = RegularizerSpec(kind="orthoreg", alpha=1e-3, beta=1e-6, hops=2)
        _, grad = orthoreg_loss(h, a_rw, spec)
        fd = finite_difference(lambda hh: orthoreg_loss(hh, a_rw, spec)[0], h)
        assert rel_err(grad, fd) < 1e-5

    def test_gradient_second_hop_mode(self, rng):
        g, _ = sbm_graph(10, seed=13)
        a_rw = normalize(g, "rw")
        h = rng.standard_normal((10, 3))
        spec = RegularizerSpec(
            kind="orthoreg", alpha=2e-3, beta=1e-4, hops=2, pooling="second_hop_only"
        )
        _, grad = orthoreg_loss(h, a_rw, spec)
        fd = finite_difference(lambda hh: orthoreg_loss(hh, a_rw, spec)[0], h)
        assert rel_err(grad, fd) < 1e-5

    def test_gradient_three_hop_average(self, rng):
        g, _ = sbm_graph(11, seed=17)
        a_rw = normalize(g, "rw")
        h = rng.standard_normal((11, 3))
        spec = RegularizerSpec(kind="orthoreg", alpha=5e-3, beta=5e-5, hops=3)
        _, grad = orthoreg_loss(h, a_rw, spec)
        fd = finite_difference(lambda hh: orthoreg_loss(hh, a_rw, spec)[0], h)
        assert rel_err(grad, fd) < 1e-5

    def test_gradient_with_isolated_node(self, rng):
        # the isolated node's summary row is all zeros; its standardized
        # column path runs entirely on the eps guard and must still
        # differentiate cleanly
        g = graph_from_edges(7, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)])  # 6 isolated
        a_rw = normalize(g, "rw")
        h = rng.standard_normal((7, 3))
        spec = RegularizerSpec(kind="orthoreg", alpha=1e-2, beta=1e-4, hops=2)
        _, grad = orthoreg_loss(h, a_rw, spec)
        fd = finite_difference(lambda hh: orthoreg_loss(hh, a_rw, spec)[0], h)
        assert rel_err(grad, fd) < 1e-5

    def test_gradient_uncentered_variant(self, rng):
        g, _ = sbm_graph(9, seed=14)
        a_rw = normalize(g, "rw")
        h = rng.standard_normal((9, 3))
        spec = RegularizerSpec(
            kind="orthoreg", alpha=1e-2, beta=1e-4, hops=1, center_correlation=False
        )
        _, grad = orthoreg_loss(h, a_rw, spec)
        fd = finite_difference(lambda hh: orthoreg_loss(hh, a_rw, spec)[0], h)
        assert rel_err(grad, fd) < 1e-5

    def test_value_bounded_below(self, rng):
        g, _ = sbm_graph(10, seed=5)
        a_rw = normalize(g, "rw")
        spec = RegularizerSpec(kind="orthoreg", alpha=0.7, beta=0.2, hops=2)
        for _ in range(10):
            value, _ = orthoreg_loss(rng.standard_normal((10, 4)), a_rw, spec)
            assert value >= -0.7 * 4 - 1e-9

    def test_permutation_equivariance(self, rng):
        g, _ = sbm_graph(10, seed=21)
        a_rw = normalize(g, "rw")
        h = rng.standard_normal((10, 3))
        spec = RegularizerSpec(kind="orthoreg", alpha=1e-2, beta=1e-3, hops=2)
        value, grad = orthoreg_loss(h, a_rw, spec)

        old_of_new = rng.permutation(10)          # position k holds old node old_of_new[k]
        new_of_old = np.argsort(old_of_new)
        src, dst = g.arc_endpoints()
        g_perm = graph_from_edges(10, np.column_stack([new_of_old[src], new_of_old[dst]]))
        value_p, grad_p = orthoreg_loss(h[old_of_new], normalize(g_perm, "rw"), spec)
        assert value_p == pytest.approx(value, rel=1e-10)
        np.testing.assert_allclose(grad_p, grad[old_of_new], atol=1e-10)


class TestCorrIdentityReg:
    def test_orthogonal_zero_mean_columns_cost_nothing(self, ring8):
        value, _ = corr_identity_reg(ring_modes(8), 0.4)
        assert value == pytest.approx(0.0, abs=1e-6)

    def test_two_identical_columns(self, rng):
        col = rng.standard_normal(12)
        value, _ = corr_identity_reg(np.column_stack([col, col]), 0.6)
        assert value == pytest.approx(2 * 0.6, rel=1e-6)

    def test_gradient_matches_finite_differences(self, rng):
        h = rng.standard_normal((11, 4))
        _, grad = corr_identity_reg(h, 0.9)
        fd = finite_difference(lambda hh: corr_identity_reg(hh, 0.9)[0], h)
        assert rel_err(grad, fd) < 1e-5


class TestDispatch:
    def test_none_kind(self, rng):
        value, grad = regularizer_value_grad(rng.standard_normal((5, 2)),
                                             RegularizerSpec(kind="none"), {})
        assert value == 0.0 and grad is None

    def test_dispatch_matches_direct_calls(self, rng):
        g, _ = sbm_graph(10, seed=1)
        ops = {
            "laplacian": normalize(g, "laplacian"),
            "sym": normalize(g, "sym"),
            "rw": normalize(g, "rw"),
        }
        h = rng.standard_normal((10, 3))
        lap_spec = RegularizerSpec(kind="laplacian", lam=0.2)
        v1, g1 = regularizer_value_grad(h, lap_spec, ops)
        v2, g2 = laplacian_reg(h, ops["laplacian"], 0.2)
        assert v1 == v2
        np.testing.assert_array_equal(g1, g2)
