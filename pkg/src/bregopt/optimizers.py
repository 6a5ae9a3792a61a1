"""Optimization methods built on the constrained variational machinery.

Three families are provided:

* ``htvi_direct`` / ``htvi_adaptive`` -- one-step maps of the discrete
  right Hamiltonian of the (direct or time-rescaled) Bregman family, with
  the holonomic constraint enforced through Lagrange multipliers.  These
  need neither retraction nor transport.
* ``el_v1`` / ``el_v2`` -- semi-implicit Euler discretizations of the
  accelerated-flow Euler--Lagrange equations written with a retraction and
  a vector transport; version 2 evaluates a look-ahead corrected gradient.
* ``rgd`` -- Riemannian gradient descent.

``run`` drives any of them to a stopping criterion and records a
per-iteration :class:`Trace`.  Traces accumulate locally, so independent
runs may execute concurrently; a single run is sequential.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import bregman
from .bregman import BregmanParams, ExtendedState
from .dynamics import DEFAULT_NEWTON, NewtonConfig, newton_solve, project_momentum
from .errors import BregoptError, NewtonError
from .manifolds import EmbeddedManifold, Sphere
from .problems import ProblemSpec

METHODS = ("htvi_direct", "htvi_adaptive", "el_v1", "el_v2", "rgd")


@dataclass
class RunConfig:
    """Configuration of a single optimizer run.

    ``stop_grad_tol`` stops on the Riemannian gradient norm;
    ``stop_f_tol`` stops on the objective gap against the problem oracle
    when one is available.  ``seed`` draws the initial point when none is
    passed to :func:`run`.  ``momentum_projection`` re-projects the
    momentum onto the tangent space after every HTVI step (off by default,
    matching the plain multiplier formulation).
    """

    method: str
    params: BregmanParams
    max_iters: int = 1000
    stop_grad_tol: float = 1e-12
    stop_f_tol: float = 1e-12
    seed: int = 0
    momentum_projection: bool = False
    newton: NewtonConfig = field(default_factory=NewtonConfig)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")
        if self.stop_grad_tol <= 0 or self.stop_f_tol <= 0:
            raise ValueError("stopping tolerances must be positive")


class Trace:
    """Per-iteration record of an optimizer run.

    Columns are parallel lists indexed by row; ``errors_vs_oracle`` entries
    are ``None`` when the problem has no oracle and ``newton_iters`` entries
    are ``None`` for methods without an inner solve.
    """

    def __init__(self, method: str):
        self.method = method
        self.ks: list[int] = []
        self.ts: list[float] = []
        self.fs: list[float] = []
        self.grad_norms: list[float] = []
        self.constraint_violations: list[float] = []
        self.errors_vs_oracle: list[float | None] = []
        self.newton_iters: list[int | None] = []
        self.failed = False
        self.failure_reason: str | None = None

    def append(self, k, t, f, grad_norm, constraint_violation, error_vs_oracle, newton_iters):
        self.ks.append(int(k))
        self.ts.append(float(t))
        self.fs.append(float(f))
        self.grad_norms.append(float(grad_norm))
        self.constraint_violations.append(float(constraint_violation))
        self.errors_vs_oracle.append(
            None if error_vs_oracle is None else float(error_vs_oracle)
        )
        self.newton_iters.append(None if newton_iters is None else int(newton_iters))

    def __len__(self):
        return len(self.ks)

    def iterations_to_gap(self, gap: float) -> int | None:
        """First iteration index whose oracle gap is at most ``gap``."""
        for k, err in zip(self.ks, self.errors_vs_oracle):
            if err is not None and err <= gap:
                return k
        return None


# ---------------------------------------------------------------------------
# One-step maps
# ---------------------------------------------------------------------------


def _solve_multiplier_sphere(w: np.ndarray, v: np.ndarray) -> float:
    """Smallest-magnitude root of ``|w - v * lam|^2 = 1``.

    The small root is the one that vanishes as the step size goes to zero,
    so it keeps the map continuous in ``h``.
    """
    a = float(v @ v)
    b = -2.0 * float(w @ v)
    c = float(w @ w) - 1.0
    tiny = 1e-300
    if a < tiny:
        if abs(b) < tiny:
            if abs(c) < 1e-12:
                return 0.0
            raise NewtonError("sphere multiplier equation is degenerate")
        return -c / b
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        raise NewtonError(
            f"sphere constraint unreachable along the multiplier direction "
            f"(discriminant {disc:.3e})"
        )
    sq = np.sqrt(disc)
    big = (-b - sq) / (2.0 * a) if b >= 0.0 else (-b + sq) / (2.0 * a)
    if big == 0.0:
        return 0.0
    small = c / (a * big)
    return small if abs(small) <= abs(big) else big


def htvi_step(
    direction: str,
    params: BregmanParams,
    manifold: EmbeddedManifold,
    state: ExtendedState,
    grad_f: np.ndarray,
    f_val: float,
    newton: NewtonConfig = DEFAULT_NEWTON,
) -> tuple[ExtendedState, int]:
    """One step of the direct or adaptive constrained Hamiltonian integrator.

    ``grad_f`` and ``f_val`` are the ambient gradient and objective value at
    ``state.q``.  The implicit five-equation system is solved by exploiting
    its explicit sub-chain: the time coordinate updates in closed form, the
    multiplier is the only genuine unknown (it must place the new position
    on the constraint manifold), and the remaining updates follow
    explicitly.  On the sphere the multiplier solves a scalar quadratic in
    closed form; in general it is a small Newton solve of dimension ``d``.

    Returns the new state and the number of inner Newton iterations.
    """
    if direction not in ("direct", "adaptive"):
        raise ValueError("direction must be 'direct' or 'adaptive'")
    adaptive = direction == "adaptive"
    coeffs = bregman.step_coefficients(params, state.q_t, adaptive)

    base = state.r - coeffs.gradient * np.asarray(grad_f, dtype=float)
    d = manifold.constraint_dim
    iterations = 0
    if d == 0:
        lam = np.zeros(0)
        r_next = base
        q_next = state.q + coeffs.position * r_next
    else:
        jac_t = manifold.constraint_jacobian(state.q).T
        drift = state.q + coeffs.position * base
        if isinstance(manifold, Sphere):
            lam_val = _solve_multiplier_sphere(drift, coeffs.position * jac_t[:, 0])
            lam = np.array([lam_val])
        else:
            shift = coeffs.position * jac_t

            def residual(lam):
                return manifold.constraint(drift - shift @ lam)

            def jacobian(lam):
                return -manifold.constraint_jacobian(drift - shift @ lam) @ shift

            lam0 = state.lam if state.lam.shape == (d,) else np.zeros(d)
            result = newton_solve(residual, lam0, newton, jacobian)
            lam = result.x
            iterations = result.iterations
        r_next = base - jac_t @ lam
        q_next = state.q + coeffs.position * r_next

    r_t_next = (
        state.r_t + coeffs.kinetic_rt * float(r_next @ r_next) - coeffs.potential_rt * f_val
    ) / (1.0 + coeffs.feedback_rt)
    next_state = ExtendedState(
        q=q_next,
        q_t=state.q_t + coeffs.q_t_increment,
        r=r_next,
        r_t=r_t_next,
        lam=lam,
    )
    return next_state, iterations


def el_step(
    version: int,
    params: BregmanParams,
    manifold: EmbeddedManifold,
    x: np.ndarray,
    v: np.ndarray,
    k: int,
    riemannian_grad,
) -> tuple[np.ndarray, np.ndarray]:
    """Semi-implicit Euler step of the accelerated-flow velocity recursion.

    ``riemannian_grad`` maps a point to the Riemannian gradient of the
    objective there.  Version 1 evaluates the gradient at ``x``; version 2
    at the trial point reached by following the damped velocity alone.
    The gradient coefficient grows polynomially in ``k`` and is clamped at
    ``params.coeff_cap``.
    """
    if version not in (1, 2):
        raise ValueError("version must be 1 or 2")
    if k < 1:
        raise ValueError("iteration index k must be >= 1")
    h, p = params.h, params.p
    b_k = 1.0 - (params.lambda_conv * p + 1.0) / k
    c_k = min(params.coeff_cap, params.c_const * p * p * (k * h) ** (p - 2.0))
    if version == 1:
        grad = riemannian_grad(x)
    else:
        grad = riemannian_grad(manifold.retract(x, (h * b_k) * v))
    a_k = b_k * v - (h * c_k) * grad
    x_next = manifold.retract(x, h * a_k)
    v_next = manifold.transport(x, x_next, a_k)
    return x_next, v_next


def rgd_step(
    manifold: EmbeddedManifold, x: np.ndarray, h: float, grad_f_ambient: np.ndarray
) -> np.ndarray:
    """Riemannian gradient descent: retract along minus the projected gradient."""
    grad = manifold.riemannian_gradient(x, grad_f_ambient)
    return manifold.retract(x, -h * grad)


# ---------------------------------------------------------------------------
# Run driver
# ---------------------------------------------------------------------------


def _record(trace, problem, k, t, q, newton_iters):
    f_val = problem.f(q)
    grad = problem.manifold.riemannian_gradient(q, problem.ambient_grad(q))
    gap = None if problem.oracle_value is None else f_val - problem.oracle_value
    trace.append(
        k=k,
        t=t,
        f=f_val,
        grad_norm=float(np.linalg.norm(grad)),
        constraint_violation=problem.manifold.constraint_violation(q),
        error_vs_oracle=gap,
        newton_iters=newton_iters,
    )
    return f_val, float(np.linalg.norm(grad)), gap


def _should_stop(config, grad_norm, gap):
    if grad_norm <= config.stop_grad_tol:
        return True
    return gap is not None and gap <= config.stop_f_tol


def run(config: RunConfig, problem: ProblemSpec, initial=None) -> Trace:
    """Execute an optimizer run and return its trace.

    ``initial`` is a feasible point (flat array); when omitted it is drawn
    from the manifold with the config seed.  HTVI methods start from the
    standard extended state (zero momenta, unit time coordinate).  Step
    failures mark the trace as failed and end the run gracefully.
    """
    manifold = problem.manifold
    if initial is None:
        initial = manifold.random_point(np.random.default_rng(config.seed))
    q0 = np.asarray(initial, dtype=float)
    trace = Trace(config.method)
    params = config.params
    h = params.h

    if config.method in ("htvi_direct", "htvi_adaptive"):
        direction = "direct" if config.method == "htvi_direct" else "adaptive"
        state = ExtendedState.initial(q0, manifold.constraint_dim)
        _, grad_norm, gap = _record(trace, problem, 0, state.q_t, state.q, None)
        if _should_stop(config, grad_norm, gap):
            return trace
        for k in range(1, config.max_iters + 1):
            f_val = problem.f(state.q)
            grad_f = problem.ambient_grad(state.q)
            try:
                state, iters = htvi_step(
                    direction, params, manifold, state, grad_f, f_val, config.newton
                )
            except BregoptError as exc:
                trace.failed = True
                trace.failure_reason = str(exc)
                return trace
            if config.momentum_projection:
                state.r = project_momentum(manifold, state.q, state.r)
            if not state.is_finite():
                trace.failed = True
                trace.failure_reason = "non-finite state"
                return trace
            _, grad_norm, gap = _record(trace, problem, k, state.q_t, state.q, iters)
            if _should_stop(config, grad_norm, gap):
                return trace
        return trace

    if config.method in ("el_v1", "el_v2"):
        version = 1 if config.method == "el_v1" else 2

        def riemannian_grad(point):
            return manifold.riemannian_gradient(point, problem.ambient_grad(point))

        x, v = q0.copy(), np.zeros_like(q0)
        _, grad_norm, gap = _record(trace, problem, 0, 0.0, x, None)
        if _should_stop(config, grad_norm, gap):
            return trace
        for k in range(1, config.max_iters + 1):
            try:
                x, v = el_step(version, params, manifold, x, v, k, riemannian_grad)
            except BregoptError as exc:
                trace.failed = True
                trace.failure_reason = str(exc)
                return trace
            if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
                trace.failed = True
                trace.failure_reason = "non-finite state"
                return trace
            _, grad_norm, gap = _record(trace, problem, k, k * h, x, None)
            if _should_stop(config, grad_norm, gap):
                return trace
        return trace

    # rgd
    x = q0.copy()
    _, grad_norm, gap = _record(trace, problem, 0, 0.0, x, None)
    if _should_stop(config, grad_norm, gap):
        return trace
    for k in range(1, config.max_iters + 1):
        try:
            x = rgd_step(manifold, x, h, problem.ambient_grad(x))
        except BregoptError as exc:
            trace.failed = True
            trace.failure_reason = str(exc)
            return trace
        if not np.all(np.isfinite(x)):
            trace.failed = True
            trace.failure_reason = "non-finite state"
            return trace
        _, grad_norm, gap = _record(trace, problem, k, k * h, x, None)
        if _should_stop(config, grad_norm, gap):
            return trace
    return trace
