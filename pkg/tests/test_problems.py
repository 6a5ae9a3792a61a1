"""Tests of the benchmark problems and their self-contained oracles."""

import numpy as np
import pytest

from bregopt.problems import (
    brockett,
    jacobi_eigen,
    load_matrix,
    make_instance,
    procrustes,
    rayleigh,
    svd_small,
    symmetric_from_spectrum,
    symmetric_instance,
)


def ambient_fd_gradient(f, q, eps=1e-6):
    grad = np.empty(q.size)
    for j in range(q.size):
        delta = np.zeros(q.size)
        delta[j] = eps
        grad[j] = (f(q + delta) - f(q - delta)) / (2.0 * eps)
    return grad


class TestJacobiEigen:
    def test_diagonal_matrix(self):
        values, vectors = jacobi_eigen(np.diag([3.0, 1.0, 2.0]))
        np.testing.assert_allclose(values, [1.0, 2.0, 3.0], atol=1e-14)
        np.testing.assert_allclose(np.abs(vectors), np.eye(3)[:, [1, 2, 0]], atol=1e-14)

    def test_two_by_two_exchange(self):
        values, _ = jacobi_eigen(np.array([[0.0, 1.0], [1.0, 0.0]]))
        np.testing.assert_allclose(values, [-1.0, 1.0], atol=1e-14)

    def test_random_residual_and_orthogonality(self):
        rng = np.random.default_rng(0)
        for n in (5, 20, 60):
            a = rng.standard_normal((n, n))
            a = a + a.T
            values, vectors = jacobi_eigen(a, tol=1e-10)
            assert np.max(np.abs(a @ vectors - vectors * values)) <= 1e-10
            assert np.max(np.abs(vectors.T @ vectors - np.eye(n))) <= 1e-10
            assert np.all(np.diff(values) >= 0.0)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            jacobi_eigen(np.array([[0.0, 1.0], [0.0, 0.0]]))
        with pytest.raises(ValueError):
            jacobi_eigen(np.zeros((201, 201)))
        with pytest.raises(ValueError):
            jacobi_eigen(np.zeros((2, 3)))


class TestSvdSmall:
    def test_identity(self):
        u, s, v = svd_small(np.eye(3))
        np.testing.assert_allclose(u, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(s, np.ones(3), atol=1e-12)
        np.testing.assert_allclose(v, np.eye(3), atol=1e-12)

    def test_diagonal(self):
        _, s, _ = svd_small(np.diag([2.0, 1.0]))
        np.testing.assert_allclose(s, [2.0, 1.0], atol=1e-12)

    @pytest.mark.parametrize("shape", [(5, 3), (3, 5), (4, 4)])
    def test_reconstruction(self, shape):
        rng = np.random.default_rng(1)
        m = rng.standard_normal(shape)
        u, s, v = svd_small(m)
        np.testing.assert_allclose(u @ np.diag(s) @ v.T, m, atol=1e-8)
        k = min(shape)
        np.testing.assert_allclose(u.T @ u, np.eye(k), atol=1e-9)
        np.testing.assert_allclose(v.T @ v, np.eye(k), atol=1e-9)
        assert np.all(np.diff(s) <= 1e-12) and np.all(s >= 0.0)

    def test_rank_deficient(self):
        x = np.array([[1.0], [2.0], [0.5]])
        y = np.array([[1.0, -1.0]])
        m = x @ y
        u, s, v = svd_small(m)
        np.testing.assert_allclose(u @ np.diag(s) @ v.T, m, atol=1e-10)
        np.testing.assert_allclose(u.T @ u, np.eye(2), atol=1e-9)
        assert s[1] <= 1e-12


class TestRayleigh:
    def test_identity_matrix_is_flat(self):
        prob = rayleigh(np.eye(3))
        rng = np.random.default_rng(2)
        for _ in range(5):
            q = prob.manifold.random_point(rng)
            assert prob.f(q) == pytest.approx(-1.0)
            riem = prob.manifold.riemannian_gradient(q, prob.ambient_grad(q))
            np.testing.assert_allclose(riem, np.zeros(3), atol=1e-12)

    def test_two_by_two_oracle(self):
        prob = rayleigh(np.diag([1.0, 2.0]))
        assert prob.oracle_value == pytest.approx(-2.0, abs=1e-12)
        np.testing.assert_allclose(np.abs(prob.oracle_point), [0.0, 1.0], atol=1e-10)

    def test_seeded_oracle_consistency(self):
        prob = make_instance("rayleigh", (10,), seed=3)
        assert abs(prob.f(prob.oracle_point) - prob.oracle_value) <= 1e-10

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            rayleigh(np.array([[1.0, 2.0], [0.0, 1.0]]))


class TestBrockett:
    def test_identity_matrix_is_flat(self):
        prob = brockett(np.eye(4), np.array([1.0, 2.0]))
        rng = np.random.default_rng(4)
        x = prob.manifold.random_point(rng)
        assert prob.f(x) == pytest.approx(3.0)
        riem = prob.manifold.riemannian_gradient(x, prob.ambient_grad(x))
        np.testing.assert_allclose(riem, np.zeros(8), atol=1e-12)

    def test_diagonal_oracle_pairing(self):
        # the largest weight pairs with the smallest eigenvalue
        prob = brockett(np.diag([1.0, 2.0, 3.0]), np.array([1.0, 2.0]))
        assert prob.oracle_value == pytest.approx(4.0, abs=1e-12)
        assert abs(prob.f(prob.oracle_point) - 4.0) <= 1e-12

    def test_oracle_columns_are_eigenvectors(self):
        prob = make_instance("brockett", (7, 3), seed=5)
        x = prob.manifold.as_matrix(prob.oracle_point)
        # columns must satisfy the eigenvalue equation of the instance matrix
        inst = symmetric_instance(5, 7, 10.0)
        for j in range(3):
            col = x[:, j]
            lam = col @ (inst @ col)
            assert np.linalg.norm(inst @ col - lam * col) <= 1e-8

    def test_rejects_bad_weights(self):
        with pytest.raises(ValueError):
            brockett(np.eye(3), np.array([2.0, 1.0]))
        with pytest.raises(ValueError):
            brockett(np.eye(3), np.array([-1.0, 1.0]))


class TestProcrustes:
    def test_consistent_balanced_system(self):
        rng = np.random.default_rng(6)
        a = rng.standard_normal((5, 3))
        x0, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        prob = procrustes(a, a @ x0)
        assert prob.oracle_value <= 1e-12

    def test_balanced_oracle_beats_random_points(self):
        prob = make_instance("procrustes", (3, 3, 5), seed=7)
        rng = np.random.default_rng(8)
        for _ in range(100):
            q = prob.manifold.random_point(rng)
            assert prob.oracle_value <= prob.f(q) + 1e-9

    def test_unbalanced_has_no_oracle(self):
        prob = make_instance("procrustes", (4, 2, 6), seed=9)
        assert prob.oracle_value is None
        assert prob.oracle_point is None

    def test_dimension_checks(self):
        rng = np.random.default_rng(10)
        with pytest.raises(ValueError):
            procrustes(rng.standard_normal((3, 4)), rng.standard_normal((3, 2)))
        with pytest.raises(ValueError):
            procrustes(rng.standard_normal((4, 4)), rng.standard_normal((4, 4)))
        with pytest.raises(ValueError):
            procrustes(rng.standard_normal((5, 2)), rng.standard_normal((5, 3)))


class TestGradientConsistency:
    @pytest.mark.parametrize(
        "name,dims",
        [("rayleigh", (6,)), ("brockett", (5, 2)), ("procrustes", (4, 3, 6))],
    )
    def test_ambient_gradient_matches_finite_differences(self, name, dims):
        prob = make_instance(name, dims, seed=11)
        rng = np.random.default_rng(12)
        for _ in range(20):
            q = prob.manifold.random_point(rng)
            fd = ambient_fd_gradient(prob.f, q)
            exact = prob.ambient_grad(q)
            np.testing.assert_allclose(
                exact, fd, rtol=1e-6, atol=1e-6 * (1.0 + np.max(np.abs(fd)))
            )


class TestOracleLocalOptimality:
    @pytest.mark.parametrize(
        "name,dims",
        [("rayleigh", (6,)), ("brockett", (5, 2)), ("procrustes", (3, 3, 5))],
    )
    def test_oracle_point_locally_minimal(self, name, dims):
        prob = make_instance(name, dims, seed=13)
        rng = np.random.default_rng(14)
        base = prob.oracle_point
        f_star = prob.f(base)
        for _ in range(50):
            xi = prob.manifold.random_tangent(base, rng)
            nudged = prob.manifold.retract(base, 1e-3 * xi)
            assert f_star <= prob.f(nudged) + 1e-9


class TestInstanceGeneration:
    def test_reproducible_per_seed(self):
        a = symmetric_instance(17, 8, 25.0)
        b = symmetric_instance(17, 8, 25.0)
        np.testing.assert_array_equal(a, b)
        assert np.max(np.abs(symmetric_instance(18, 8, 25.0) - a)) > 1e-6

    def test_conditioning_controls_spread(self):
        a = symmetric_instance(0, 10, 50.0)
        values, _ = jacobi_eigen(a)
        assert values[0] == pytest.approx(1.0, rel=1e-8)
        assert values[-1] == pytest.approx(50.0, rel=1e-8)

    def test_prescribed_spectrum(self):
        spectrum = np.array([0.5, 1.5, 4.0])
        a = symmetric_from_spectrum(np.random.default_rng(1), spectrum)
        values, _ = jacobi_eigen(a)
        np.testing.assert_allclose(values, spectrum, atol=1e-10)

    def test_unknown_problem(self):
        with pytest.raises(ValueError):
            make_instance("knapsack", (4,), seed=0)


class TestMatrixFile:
    def test_round_trip(self, tmp_path):
        a = np.array([[1.0, 2.5, -3.0], [0.25, 0.0, 9.0]])
        path = tmp_path / "matrix.txt"
        path.write_text(
            "\n".join(" ".join(f"{v!r}" for v in row.tolist()) for row in a) + "\n"
        )
        np.testing.assert_array_equal(load_matrix(path), a)

    def test_single_row(self, tmp_path):
        path = tmp_path / "row.txt"
        path.write_text("1.0 2.0 3.0\n")
        assert load_matrix(path).shape == (1, 3)
