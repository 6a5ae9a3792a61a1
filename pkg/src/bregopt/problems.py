"""Benchmark objectives with ambient gradients and independent oracles.

Three problems are provided: Rayleigh-quotient minimization on the unit
sphere, the Brockett cost on the Stiefel manifold (generalized eigenvalue
problem), and the orthogonal Procrustes problem.  Optimal values come from
self-contained dense oracles (a cyclic Jacobi eigensolver and an SVD built
on it) rather than from external linear-algebra routines, so acceptance
checks do not assume anything about the environment.

Objectives and gradients take flat point vectors in the convention of the
host manifold (Stiefel points column-major flattened).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConvergenceError
from .manifolds import EmbeddedManifold, Sphere, Stiefel

# The dense oracles are meant for desk-scale experiments.
MAX_ORACLE_DIM = 200


@dataclass
class ProblemSpec:
    """An objective bound to a manifold, with optional solution oracle."""

    name: str
    manifold: EmbeddedManifold
    f: Callable[[np.ndarray], float]
    ambient_grad: Callable[[np.ndarray], np.ndarray]
    oracle_value: float | None = None
    oracle_point: np.ndarray | None = None


# ---------------------------------------------------------------------------
# Dense oracles
# ---------------------------------------------------------------------------


def jacobi_eigen(a: np.ndarray, tol: float = 1e-10, max_sweeps: int = 100):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(w, v)`` with eigenvalues ascending and orthonormal
    eigenvector columns satisfying ``|A v_i - w_i v_i| <= tol``.

    Raises:
        ValueError: asymmetric input or dimension above the desk-scale cap.
        ConvergenceError: sweep budget exhausted.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("jacobi_eigen expects a square matrix")
    if n > MAX_ORACLE_DIM:
        raise ValueError(f"jacobi_eigen caps at n <= {MAX_ORACLE_DIM}")
    if n and np.max(np.abs(a - a.T)) > 1e-12 * max(1.0, np.max(np.abs(a))):
        raise ValueError("jacobi_eigen expects a symmetric matrix")

    work = a.copy()
    vecs = np.eye(n)
    scale = max(1.0, float(np.max(np.abs(a))))
    target = max(1e-14, 0.01 * tol) * scale
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(work, -1) ** 2) * 2.0)
        if off <= target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = work[p, q]
                if abs(apq) <= 1e-30 * scale:
                    continue
                tau = (work[q, q] - work[p, p]) / (2.0 * apq)
                t = np.sign(tau) / (abs(tau) + np.sqrt(1.0 + tau * tau)) if tau else 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                rot = np.array([[c, -s], [s, c]])
                work[[p, q], :] = rot @ work[[p, q], :]
                work[:, [p, q]] = work[:, [p, q]] @ rot.T
                vecs[:, [p, q]] = vecs[:, [p, q]] @ rot.T
    else:
        raise ConvergenceError(
            f"jacobi_eigen did not converge within {max_sweeps} sweeps"
        )
    values = np.diag(work).copy()
    order = np.argsort(values, kind="stable")
    return values[order], vecs[:, order]


def _complete_orthonormal(u_partial: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Extend orthonormal columns to ``cols`` columns deterministically."""
    basis = np.hstack([u_partial, np.eye(rows)])
    q, _ = np.linalg.qr(basis)
    return q[:, :cols]


def svd_small(m: np.ndarray, tol: float = 1e-10):
    """Singular value decomposition of a small dense matrix.

    Built on :func:`jacobi_eigen` applied to the smaller Gram matrix.
    Returns ``(u, s, v)`` with ``u (p x k)``, ``s`` nonincreasing of length
    ``k = min(p, q)`` and ``v (q x k)`` such that ``u @ diag(s) @ v.T``
    reconstructs the input.
    """
    m = np.asarray(m, dtype=float)
    p, q = m.shape
    if max(p, q) > MAX_ORACLE_DIM:
        raise ValueError(f"svd_small caps at dimensions <= {MAX_ORACLE_DIM}")
    if p < q:
        v, s, u = svd_small(m.T, tol)
        return u, s, v
    gram = m.T @ m
    w, v = jacobi_eigen(gram, tol)
    order = np.argsort(-w, kind="stable")
    w, v = w[order], v[:, order]
    s = np.sqrt(np.clip(w, 0.0, None))
    cutoff = max(1e-13 * (s[0] if s.size else 0.0), 1e-300)
    u = np.zeros((p, q))
    known = s > cutoff
    u[:, known] = (m @ v[:, known]) / s[known]
    if not np.all(known):
        filled = _complete_orthonormal(u[:, known], p, q)
        u[:, ~known] = filled[:, int(np.sum(known)):]
    return u, s, v


# ---------------------------------------------------------------------------
# Benchmark problems
# ---------------------------------------------------------------------------


def _check_symmetric(a: np.ndarray, label: str) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{label} must be a square matrix")
    if np.max(np.abs(a - a.T)) > 1e-12 * max(1.0, np.max(np.abs(a))):
        raise ValueError(f"{label} must be symmetric")
    return a


def rayleigh(a: np.ndarray) -> ProblemSpec:
    """Rayleigh-quotient minimization of ``f(v) = -v^T A v`` on the sphere.

    The minimum is the negative largest eigenvalue, attained at the
    corresponding unit eigenvector.
    """
    a = _check_symmetric(a, "A")
    n = a.shape[0]
    manifold = Sphere(n)
    values, vectors = jacobi_eigen(a)

    def f(q):
        return -float(q @ (a @ q))

    def grad(q):
        return -2.0 * (a @ q)

    return ProblemSpec(
        name="rayleigh",
        manifold=manifold,
        f=f,
        ambient_grad=grad,
        oracle_value=-float(values[-1]),
        oracle_point=vectors[:, -1].copy(),
    )


def brockett(a: np.ndarray, n_diag: np.ndarray) -> ProblemSpec:
    """Brockett cost ``f(X) = trace(X^T A X N)`` on the Stiefel manifold.

    ``n_diag`` holds the nondecreasing nonnegative diagonal of ``N``.  The
    minimizer's columns are eigenvectors of the smallest eigenvalues of
    ``A``, with the largest weight paired with the smallest eigenvalue, so
    the optimal value is ``sum_j mu_j * lambda_{m - j + 1}`` for ascending
    eigenvalues ``lambda``.
    """
    a = _check_symmetric(a, "A")
    mu = np.asarray(n_diag, dtype=float)
    if mu.ndim != 1:
        raise ValueError("N must be given as its 1-D diagonal")
    if np.any(mu < 0.0) or np.any(np.diff(mu) < 0.0):
        raise ValueError("diagonal of N must satisfy 0 <= mu_1 <= ... <= mu_m")
    n, m = a.shape[0], mu.size
    manifold = Stiefel(n, m)
    values, vectors = jacobi_eigen(a)

    def f(q):
        x = manifold.as_matrix(q)
        return float(np.trace(x.T @ a @ x @ np.diag(mu)))

    def grad(q):
        x = manifold.as_matrix(q)
        return manifold.from_matrix(2.0 * a @ x @ np.diag(mu))

    oracle_value = float(np.sum(mu * values[m - 1 :: -1]))
    oracle_point = manifold.from_matrix(vectors[:, m - 1 :: -1])
    return ProblemSpec(
        name="brockett",
        manifold=manifold,
        f=f,
        ambient_grad=grad,
        oracle_value=oracle_value,
        oracle_point=oracle_point,
    )


def procrustes(a: np.ndarray, b: np.ndarray) -> ProblemSpec:
    """Orthogonal Procrustes problem ``f(X) = |A X - B|_F^2`` on Stiefel.

    Requires ``A (l x n)`` and ``B (l x m)`` with ``l >= n`` and ``l > m``.
    In the balanced case ``n = m`` the global solution ``X* = U V^T`` comes
    from the SVD ``B^T A = U S V^T``; the unbalanced case has no closed-form
    oracle and only descent trends can be checked.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or b.ndim != 2 or a.shape[0] != b.shape[0]:
        raise ValueError("A and B must share their row dimension")
    l, n = a.shape
    m = b.shape[1]
    if l < n or l <= m:
        raise ValueError("procrustes requires l >= n and l > m")
    if n < m:
        raise ValueError("procrustes requires n >= m for the Stiefel domain")
    manifold = Stiefel(n, m)

    def f(q):
        x = manifold.as_matrix(q)
        res = a @ x - b
        return float(np.sum(res * res))

    def grad(q):
        x = manifold.as_matrix(q)
        return manifold.from_matrix(2.0 * a.T @ (a @ x - b))

    oracle_value = None
    oracle_point = None
    if n == m:
        # Minimizing |AX - B|_F^2 over O(n) maximizes trace(X^T A^T B); the
        # maximizer is U V^T from the SVD of A^T B.
        u, _, v = svd_small(a.T @ b)
        x_star = u @ v.T
        oracle_point = manifold.from_matrix(x_star)
        oracle_value = f(oracle_point)
    return ProblemSpec(
        name="procrustes",
        manifold=manifold,
        f=f,
        ambient_grad=grad,
        oracle_value=oracle_value,
        oracle_point=oracle_point,
    )


# ---------------------------------------------------------------------------
# Instance generation and file input
# ---------------------------------------------------------------------------


def random_orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    """Haar-ish orthogonal matrix from the QR of a Gaussian sample."""
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.where(np.diag(r) < 0.0, -1.0, 1.0)


def symmetric_from_spectrum(rng: np.random.Generator, spectrum: np.ndarray) -> np.ndarray:
    """Symmetric matrix with a prescribed spectrum and random eigenbasis."""
    spectrum = np.asarray(spectrum, dtype=float)
    q = random_orthogonal(rng, spectrum.size)
    return (q * spectrum) @ q.T


def symmetric_instance(seed: int, n: int, conditioning: float = 10.0) -> np.ndarray:
    """Reproducible symmetric matrix with eigenvalues spread over
    ``[1, conditioning]``."""
    if conditioning < 1.0:
        raise ValueError("conditioning must be >= 1")
    rng = np.random.default_rng(seed)
    return symmetric_from_spectrum(rng, np.linspace(1.0, conditioning, n))


def make_instance(
    name: str, dims, seed: int = 0, conditioning: float = 10.0
) -> ProblemSpec:
    """Seeded benchmark instance of a named problem.

    ``dims`` is ``(n,)`` for rayleigh, ``(n, m)`` for brockett and
    ``(n, m, l)`` for procrustes.
    """
    rng = np.random.default_rng(seed)
    if name == "rayleigh":
        (n,) = dims
        return rayleigh(symmetric_from_spectrum(rng, np.linspace(1.0, conditioning, n)))
    if name == "brockett":
        n, m = dims
        a = symmetric_from_spectrum(rng, np.linspace(1.0, conditioning, n))
        return brockett(a, np.arange(1.0, m + 1.0))
    if name == "procrustes":
        n, m, l = dims
        a = rng.standard_normal((l, n))
        b = rng.standard_normal((l, m))
        return procrustes(a, b)
    raise ValueError(f"unknown problem name {name!r}")


def load_matrix(path) -> np.ndarray:
    """Read a plain-text matrix: one row per line, whitespace-separated."""
    return np.atleast_2d(np.loadtxt(path, dtype=float))
