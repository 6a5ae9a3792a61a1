"""Embedded-submanifold geometry for the unit sphere and the Stiefel manifold.

Each manifold is described by a constraint map ``C`` whose zero level set is
the manifold, together with the operations needed by the constrained
integrators and optimizers: constraint Jacobian, tangent-space projection,
retraction, vector transport and Riemannian gradient.  The ambient metric is
the Euclidean/Frobenius inner product throughout, so cotangent vectors are
identified with tangent vectors component-wise.

Points and tangent vectors are flat 1-D arrays of length ``ambient_dim``.
Stiefel points are n x m matrices with orthonormal columns, flattened in
column-major (Fortran) order; :meth:`Stiefel.as_matrix` and
:meth:`Stiefel.from_matrix` convert between the two representations.

All operations are pure functions of their inputs; nothing here carries
mutable state, so manifold objects can be shared freely across threads.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    DimensionError,
    FeasibilityError,
    RetractionError,
    TransportError,
)

# Default tolerance for accepting a point as feasible on input.
FEAS_TOL = 1e-8


class EmbeddedManifold:
    """A submanifold of Euclidean space given as the zero set of a constraint.

    Attributes:
        name: identifier such as ``"sphere:3"`` or ``"stiefel:20,5"``.
        ambient_dim: dimension of the embedding Euclidean space.
        constraint_dim: number of independent constraint components ``d``.
            The Euclidean stub used for unconstrained runs has ``d = 0``.
    """

    name: str
    ambient_dim: int
    constraint_dim: int

    # -- constraint ---------------------------------------------------------

    def constraint(self, q: np.ndarray) -> np.ndarray:
        """Constraint residual ``C(q)`` as a vector of length ``constraint_dim``."""
        raise NotImplementedError

    def constraint_jacobian(self, q: np.ndarray) -> np.ndarray:
        """Jacobian of the constraint; row ``i`` is the gradient of ``C_i``."""
        raise NotImplementedError

    def constraint_violation(self, q: np.ndarray) -> float:
        """Infinity norm of the constraint residual."""
        c = self.constraint(q)
        return float(np.max(np.abs(c))) if c.size else 0.0

    def is_feasible(self, q: np.ndarray, tol: float = FEAS_TOL) -> bool:
        return self.constraint_violation(q) <= tol

    # -- geometry -----------------------------------------------------------

    def tangent_project(self, q: np.ndarray, z: np.ndarray) -> np.ndarray:
        """Orthogonal projection of ``z`` onto the tangent space at ``q``."""
        raise NotImplementedError

    def retract(self, q: np.ndarray, v: np.ndarray) -> np.ndarray:
        """First-order map from the tangent space at ``q`` back to the manifold."""
        raise NotImplementedError

    def transport(self, q_from: np.ndarray, q_to: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Move a tangent vector at ``q_from`` to the tangent space at ``q_to``."""
        raise NotImplementedError

    def riemannian_gradient(self, q: np.ndarray, ambient_grad: np.ndarray) -> np.ndarray:
        """Riemannian gradient: the tangent projection of the ambient gradient."""
        return self.tangent_project(q, ambient_grad)

    # -- sampling helpers ---------------------------------------------------

    def random_point(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def random_tangent(self, q: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return self.tangent_project(q, rng.standard_normal(self.ambient_dim))

    # -- validation ---------------------------------------------------------

    def _check_dim(self, q: np.ndarray) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if q.shape != (self.ambient_dim,):
            raise DimensionError(
                f"{self.name}: expected vector of length {self.ambient_dim}, "
                f"got shape {q.shape}"
            )
        return q

    def _check_feasible(self, q: np.ndarray, tol: float = FEAS_TOL) -> np.ndarray:
        q = self._check_dim(q)
        violation = self.constraint_violation(q)
        if violation > tol:
            raise FeasibilityError(
                f"{self.name}: point violates constraint by {violation:.3e} "
                f"(tolerance {tol:.1e})"
            )
        return q

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name!r})"


class Sphere(EmbeddedManifold):
    """Unit sphere in R^n with constraint ``q.q - 1 = 0``."""

    def __init__(self, n: int):
        if n < 2:
            raise ValueError("sphere needs ambient dimension >= 2")
        self.name = f"sphere:{n}"
        self.ambient_dim = n
        self.constraint_dim = 1

    def constraint(self, q):
        q = self._check_dim(q)
        return np.array([q @ q - 1.0])

    def constraint_jacobian(self, q):
        q = self._check_dim(q)
        return 2.0 * q[np.newaxis, :]

    def tangent_project(self, q, z):
        q = self._check_feasible(q)
        z = self._check_dim(z)
        return z - (q @ z) * q

    def retract(self, q, v):
        q = self._check_dim(q)
        v = self._check_dim(v)
        if not np.any(v):
            return q.copy()
        w = q + v
        norm = np.linalg.norm(w)
        if norm < 1e-12:
            raise RetractionError("sphere retraction undefined: q + v is zero")
        return w / norm

    def transport(self, q_from, q_to, v):
        """Exact parallel transport along the great circle joining the points."""
        x = self._check_feasible(q_from)
        y = self._check_feasible(q_to)
        v = self._check_dim(v)
        c = x @ y
        if 1.0 + c < 1e-12:
            raise TransportError(
                "parallel transport undefined between antipodal sphere points"
            )
        return v - ((y @ v) / (1.0 + c)) * (x + y)

    def random_point(self, rng):
        q = rng.standard_normal(self.ambient_dim)
        return q / np.linalg.norm(q)


class Stiefel(EmbeddedManifold):
    """Matrices with orthonormal columns: ``{X in R^{n x m} : X^T X = I}``.

    The constraint exposes only the upper triangle (including the diagonal)
    of ``X^T X - I``, vectorized row-major, so that the constraint Jacobian
    has full row rank ``d = m (m + 1) / 2``.
    """

    def __init__(self, n: int, m: int):
        if not 1 <= m <= n or n < 2:
            raise ValueError("stiefel requires 1 <= m <= n and n >= 2")
        self.name = f"stiefel:{n},{m}"
        self.n = n
        self.m = m
        self.ambient_dim = n * m
        self.constraint_dim = m * (m + 1) // 2
        self._triu = np.triu_indices(m)

    def as_matrix(self, q: np.ndarray) -> np.ndarray:
        """View a flat point as the underlying n x m matrix."""
        return np.asarray(q, dtype=float).reshape((self.n, self.m), order="F")

    def from_matrix(self, x: np.ndarray) -> np.ndarray:
        """Flatten an n x m matrix into the packed point representation."""
        return np.asarray(x, dtype=float).reshape(-1, order="F")

    def constraint(self, q):
        q = self._check_dim(q)
        gram = self.as_matrix(q).T @ self.as_matrix(q) - np.eye(self.m)
        return gram[self._triu]

    def constraint_jacobian(self, q):
        q = self._check_dim(q)
        x = self.as_matrix(q)
        jac = np.zeros((self.constraint_dim, self.ambient_dim))
        for row, (i, j) in enumerate(zip(*self._triu)):
            grad = np.zeros((self.n, self.m))
            grad[:, i] += x[:, j]
            grad[:, j] += x[:, i]
            jac[row] = grad.reshape(-1, order="F")
        return jac

    def tangent_project(self, q, z):
        q = self._check_feasible(q)
        z = self._check_dim(z)
        x = self.as_matrix(q)
        zm = self.as_matrix(z)
        xtz = x.T @ zm
        return self.from_matrix(zm - x @ ((xtz + xtz.T) / 2.0))

    def retract(self, q, v):
        """Q factor of the QR factorization of ``X + V``.

        The diagonal of the R factor is forced positive so the factorization,
        and hence the retraction, is deterministic.
        """
        q = self._check_dim(q)
        v = self._check_dim(v)
        if not np.any(v):
            return q.copy()
        w = self.as_matrix(q) + self.as_matrix(v)
        qf, r = np.linalg.qr(w)
        diag = np.diag(r)
        scale = max(1.0, float(np.max(np.abs(w))))
        if np.any(np.abs(diag) < 1e-12 * scale):
            raise RetractionError("QR retraction undefined: X + V is rank deficient")
        qf = qf * np.where(diag < 0.0, -1.0, 1.0)
        return self.from_matrix(qf)

    def transport(self, q_from, q_to, v):
        """Projection-based vector transport onto the tangent space at ``q_to``."""
        self._check_dim(q_from)
        return self.tangent_project(q_to, v)

    def random_point(self, rng):
        a = rng.standard_normal((self.n, self.m))
        qf, r = np.linalg.qr(a)
        qf = qf * np.where(np.diag(r) < 0.0, -1.0, 1.0)
        return self.from_matrix(qf)


class Euclidean(EmbeddedManifold):
    """Unconstrained stub (``d = 0``) so the constrained machinery degrades
    gracefully to ordinary phase-space integrators."""

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("euclidean needs dimension >= 1")
        self.name = f"euclidean:{n}"
        self.ambient_dim = n
        self.constraint_dim = 0

    def constraint(self, q):
        self._check_dim(q)
        return np.zeros(0)

    def constraint_jacobian(self, q):
        self._check_dim(q)
        return np.zeros((0, self.ambient_dim))

    def tangent_project(self, q, z):
        self._check_dim(q)
        return self._check_dim(z).copy()

    def retract(self, q, v):
        return self._check_dim(q) + self._check_dim(v)

    def transport(self, q_from, q_to, v):
        return self._check_dim(v).copy()

    def random_point(self, rng):
        return rng.standard_normal(self.ambient_dim)


def manifold_from_name(spec: str) -> EmbeddedManifold:
    """Build a manifold from its config name, e.g. ``"sphere:10"`` or
    ``"stiefel:20,5"``."""
    try:
        kind, _, dims = spec.partition(":")
        if kind == "sphere":
            return Sphere(int(dims))
        if kind == "stiefel":
            n, m = (int(part) for part in dims.split(","))
            return Stiefel(n, m)
        if kind == "euclidean":
            return Euclidean(int(dims))
    except (ValueError, TypeError) as exc:
        raise ValueError(f"malformed manifold name {spec!r}") from exc
    raise ValueError(f"unknown manifold kind in {spec!r}")
