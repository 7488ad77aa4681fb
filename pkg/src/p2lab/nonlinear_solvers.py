"""Eigenpair solvers for lambda above the spectral threshold.

Two routes to a critical point of I_lambda on the constrained subspace:

* direct minimization (p > 2): the functional is coercive there, so descent
  from the threshold minimizer (retracted onto the Nehari set, where I < 0
  already) walks to a global-minimum candidate;
* Nehari minimization (1 < p < 2, also usable as a cross-check for p > 2):
  descent on the direction vector in reduced coordinates, Euclidean
  projection onto the constraint built into the coordinates, and the
  explicit retraction t(v) = ((lambda C - B)/A)^{1/(p-2)} mapping every
  admissible direction onto the Nehari set, where I > 0 for p < 2.

Both run in reduced coordinates (u = Z x), so iterates satisfy the
constraint exactly. Globalization is Armijo backtracking on I_lambda along
directions preconditioned by the reduced discrete W^{1,2} metric; once the
dual residual is small the solver switches to damped Newton steps on the
reduced stationarity system, accepted only when they halve the residual
(functional differences near the floor drown in roundoff, residual norms do
not). Stationarity on the subspace implies the full-space residual vanishes
too, because testing against constants is free: the constraint functional is
exactly (Ma+Bb) 1.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, lu_factor, lu_solve

from p2lab.assembly import (
    DiscreteProblem,
    _check_vector,
    functional_I,
    grad_I,
    hessian_I,
    p_dirichlet_integral,
)
from p2lab.errors import (
    BelowThresholdError,
    ConstantDirectionError,
    InvalidArgumentError,
    NonConvergenceError,
    NotInConeError,
)
from p2lab.linear_spectrum import ThresholdEstimate, compute_nu1, dual_norm
from p2lab.subspace import reduce_matrix


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-8
    max_iterations: int = 10000
    eps: float | None = None  # direction-regularization override (p < 2 only)
    margin: float = 1e-6
    armijo_slope: float = 1e-4
    armijo_backtrack: float = 0.5
    max_backtracks: int = 60
    newton_gate: float = 1e-2  # dual residual below which Newton steps are tried


@dataclass(frozen=True)
class NehariPoint:
    """A point u = t v on the Nehari set, with the invariants' ingredients:
    A = int |grad v|^p, B = v^T K v, C = v^T (Ma+Bb) v."""

    v: np.ndarray
    t: float
    u: np.ndarray
    A: float
    B: float
    C: float


@dataclass(frozen=True)
class EigenPair:
    lam: float
    u: np.ndarray
    residual_dual: float
    I_value: float
    iterations: int
    method: str  # "direct" | "nehari"
    eps_used: float
    diagnostics: dict = field(default_factory=dict)


def _nehari_scale(problem, lam, A, B, C):
    if not A > 0.0:
        raise ConstantDirectionError(
            "direction has zero p-gradient energy; no Nehari scale exists")
    excess = lam * C - B
    if not excess > 0.0:
        raise NotInConeError(
            f"no Nehari point along this direction: lambda*C - B = {excess:.3e} <= 0 "
            "(its quadratic Rayleigh quotient is >= lambda)")
    return (excess / A) ** (1.0 / (problem.p - 2.0))


def nehari_t(problem: DiscreteProblem, lam, v):
    """Positive scale t placing t*v on the Nehari set:
    t^p A + t^2 B = lambda t^2 C, i.e. t = ((lambda C - B)/A)^{1/(p-2)}."""
    return nehari_point(problem, lam, v).t


def nehari_point(problem: DiscreteProblem, lam, v) -> NehariPoint:
    v = _check_vector(problem, v)
    cv = abs(float(problem.c @ v))
    if cv > 1e-8 * np.linalg.norm(problem.c) * max(np.linalg.norm(v), 1e-300):
        raise InvalidArgumentError(
            f"direction violates the constraint: |c.v| = {cv:.3e}")
    A = p_dirichlet_integral(problem, v)
    B = float(v @ (problem.K @ v))
    C = float(v @ (problem.Msum @ v))
    t = _nehari_scale(problem, lam, A, B, C)
    return NehariPoint(v=v, t=t, u=t * v, A=A, B=B, C=C)


def residual_dual_norm(problem: DiscreteProblem, lam, u):
    """Dual norm of the weak-form defect grad_I at (lambda, u): the numerical
    stand-in for the eigenvalue identity holding against all test vectors."""
    u = _check_vector(problem, u)
    return dual_norm(problem, grad_I(problem, lam, u), u)


def _require_above_threshold(lam, estimate, margin):
    if not lam > estimate.nu1 * (1.0 + margin):
        raise BelowThresholdError(
            f"lambda = {lam:.12g} is not above the spectral threshold "
            f"nu1 = {estimate.nu1:.12g} (margin {margin:.1e}); no eigenpair exists there")


def _direction_eps(problem, opts):
    if opts.eps is None:
        return problem.eps
    eps = float(opts.eps)
    if eps < 0.0:
        raise InvalidArgumentError("eps must be nonnegative")
    if problem.p > 2.0 and eps != 0.0:
        raise InvalidArgumentError("eps regularization applies only for p < 2")
    return eps


def solve_direct_min(problem: DiscreteProblem, lam, opts: SolverOptions | None = None,
                     threshold: ThresholdEstimate | None = None) -> EigenPair:
    """Minimize I_lambda over the constrained subspace (p > 2 only); returns
    a stationary point with I < 0 and dual residual below the tolerance."""
    if not problem.p > 2.0:
        raise InvalidArgumentError(
            f"direct minimization requires p > 2 (got p = {problem.p}); "
            "use the Nehari solver for p < 2")
    return _minimize(problem, lam, opts or SolverOptions(), threshold,
                     retracted=False, method="direct")


def solve_nehari_min(problem: DiscreteProblem, lam, opts: SolverOptions | None = None,
                     threshold: ThresholdEstimate | None = None) -> EigenPair:
    """Minimize I_lambda over the Nehari set via the explicit retraction;
    for p < 2 the minimum value is positive. A retraction failure inside the
    line search just shrinks the step."""
    return _minimize(problem, lam, opts or SolverOptions(), threshold,
                     retracted=True, method="nehari")


class _State:
    """Coherent iterate bundle: reduced coordinates, lifted vector, value."""

    __slots__ = ("x", "u", "point", "I_val")

    def __init__(self, x, u, point, I_val):
        self.x = x
        self.u = u
        self.point = point
        self.I_val = I_val


def _minimize(problem, lam, opts, threshold, retracted, method):
    lam = float(lam)
    estimate = threshold if threshold is not None else compute_nu1(problem)
    _require_above_threshold(lam, estimate, opts.margin)
    eps_used = _direction_eps(problem, opts)
    sub = problem.subspace
    chol = problem.reduced_h_cholesky

    def make_state(x):
        """Lift (and retract); renormalizes x onto the Nehari set so the
        retraction factor stays near 1 and the landscape stays well scaled."""
        if retracted:
            point = nehari_point(problem, lam, sub.lift(x))
            x = point.t * x
            point = nehari_point(problem, lam, sub.lift(x))
            u = point.u
        else:
            point = None
            u = sub.lift(x)
        return _State(x, u, point, functional_I(problem, lam, u))

    t0 = nehari_point(problem, lam, estimate.minimizer).t
    state = make_state(t0 * sub.project_reduced(estimate.minimizer))

    h_norm = lambda u: float(np.sqrt(max(u @ (problem.H @ u), 0.0)))
    h0 = max(h_norm(state.u), 1e-300)
    h_max = h0
    backtracks_total = 0
    newton_steps = 0
    i_increase_max = 0.0
    alpha = 1.0

    for it in range(opts.max_iterations + 1):
        r = grad_I(problem, lam, state.u)
        res = dual_norm(problem, r, state.u)
        if res <= opts.tol:
            diag = _diagnostics(problem, lam, state.u, h_max / h0, backtracks_total)
            diag["newton_steps"] = newton_steps
            diag["i_increase_max"] = i_increase_max
            return EigenPair(lam=lam, u=state.u, residual_dual=res,
                             I_value=state.I_val, iterations=it, method=method,
                             eps_used=eps_used, diagnostics=diag)
        if it == opts.max_iterations:
            raise NonConvergenceError(
                f"{method} minimization hit the iteration cap "
                f"({opts.max_iterations}) with residual {res:.3e} > tol {opts.tol:.3e}",
                last_iterate=state.u, residual=res)

        new_state = None
        if res <= opts.newton_gate:
            new_state = _newton_step(problem, lam, opts, sub, state, r, res,
                                     retracted, make_state)
            if new_state is not None:
                newton_steps += 1

        if new_state is None:
            new_state, nbt, alpha = _descent_step(problem, lam, opts, sub, chol,
                                                  state, r, res, eps_used,
                                                  retracted, make_state, alpha)
            backtracks_total += nbt

        i_increase_max = max(i_increase_max, new_state.I_val - state.I_val)
        state = new_state
        h_max = max(h_max, h_norm(state.u))


def _newton_step(problem, lam, opts, sub, state, r, res, retracted, make_state):
    """Damped Newton on the reduced stationarity system Z^T grad_I(Z x) = 0.

    Accepted only if the dual residual at least halves; returns None (caller
    falls back to the descent step) otherwise. The reduced Hessian may be
    indefinite (the Nehari point is a saddle of I for p < 2), so a plain LU
    factorization is used.
    """
    try:
        Hred = reduce_matrix(sub, hessian_I(problem, lam, state.u))
        delta = lu_solve(lu_factor(Hred), -sub.project_reduced(r))
    except (LinAlgError, ValueError):
        return None
    if not np.all(np.isfinite(delta)):
        return None
    step = 1.0
    for _ in range(8):
        try:
            trial = make_state(state.x + step * delta)
        except (NotInConeError, ConstantDirectionError):
            step *= 0.5
            continue
        res_trial = dual_norm(problem, grad_I(problem, lam, trial.u), trial.u)
        if res_trial <= max(0.5 * res, opts.tol * 0.5) and np.isfinite(trial.I_val):
            return trial
        step *= 0.5
    return None


def _descent_step(problem, lam, opts, sub, chol, state, r, res, eps_used,
                  retracted, make_state, alpha_prev):
    """One preconditioned descent step with Armijo backtracking on I."""
    if eps_used != problem.eps:
        r = grad_I(problem, lam, state.u, eps=eps_used)
    g = sub.project_reduced(r)
    if retracted:
        g = state.point.t * g
    d = -cho_solve(chol, g)
    slope = float(g @ d)

    alpha = min(4.0, alpha_prev / opts.armijo_backtrack)
    backtracks = 0
    for _ in range(opts.max_backtracks + 1):
        try:
            trial = make_state(state.x + alpha * d)
        except (NotInConeError, ConstantDirectionError):
            alpha *= opts.armijo_backtrack
            backtracks += 1
            continue
        if np.isfinite(trial.I_val) and \
                trial.I_val <= state.I_val + opts.armijo_slope * alpha * slope:
            return trial, backtracks, alpha
        alpha *= opts.armijo_backtrack
        backtracks += 1
    raise NonConvergenceError(
        f"Armijo line search stalled (residual {res:.3e} > tol {opts.tol:.3e})",
        last_iterate=state.u, residual=res)


def _diagnostics(problem, lam, u, h_ratio, backtracks):
    un = float(np.linalg.norm(u))
    cn = float(np.linalg.norm(problem.c))
    pairing = float(grad_I(problem, lam, u) @ u)
    scale = p_dirichlet_integral(problem, u) + abs(lam) * float(u @ (problem.Msum @ u))
    return {
        "constraint_rel": abs(float(problem.c @ u)) / max(cn * un, 1e-300),
        "nehari_pairing_rel": abs(pairing) / max(scale, 1e-300),
        "h_norm_max_ratio": h_ratio,
        "backtracks_total": backtracks,
    }
