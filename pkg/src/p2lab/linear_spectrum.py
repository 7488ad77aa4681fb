"""Spectral threshold of the quadratic Rayleigh quotient on the constrained
subspace, and the scaling limits tying the full quotient to it.

The threshold nu1 = min x^T K~ x / x^T M~ x over the reduced space is found
through the inverted pencil: with K~ = R^T R, nu1 = 1 / mu_max where mu_max
is the largest eigenvalue of R^{-T} M~ R^{-1}. Inverting sidesteps the
semidefinite denominator entirely (directions with zero spectral mass land at
mu = 0 and never contaminate mu_max).
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cholesky, eigh, solve_triangular

from p2lab.assembly import DiscreteProblem, rayleigh_full
from p2lab.errors import (
    DegenerateProblemError,
    InvalidArgumentError,
    InvalidDiscretizationError,
)
from p2lab.subspace import reduce_matrix


@dataclass(frozen=True)
class ThresholdEstimate:
    """Threshold value with its minimizer (normalized to unit spectral mass,
    largest-magnitude entry positive) and the dual-norm pencil residual."""

    nu1: float
    minimizer: np.ndarray
    pencil_residual: float
    reduced_dim: int


@dataclass(frozen=True)
class ScalingRow:
    t: float
    value: float
    gap: float
    ratio: float | None  # gap(previous) / gap(this); None on the first row


def dual_norm(problem: DiscreteProblem, r, u=None):
    """sqrt(r^T H^{-1} r) / max(1, |u|_H), the discrete dual norm of a
    weak-form defect (H = K + M1). Zero iff r = 0."""
    z = problem.h_solver.solve(r)
    num = float(np.sqrt(max(r @ z, 0.0)))
    if u is None:
        return num
    return num / max(1.0, float(np.sqrt(max(u @ (problem.H @ u), 0.0))))


def _power_iteration(S, tol=1e-12, max_iterations=200000):
    """Largest eigenpair of the symmetric matrix S by power iteration,
    converged on the Rayleigh quotient (fallback eigensolver path)."""
    rng = np.random.default_rng(0)
    y = rng.standard_normal(S.shape[0])
    y /= np.linalg.norm(y)
    mu = float(y @ (S @ y))
    for _ in range(max_iterations):
        z = S @ y
        norm = np.linalg.norm(z)
        if norm == 0.0:
            return 0.0, y
        y = z / norm
        mu_new = float(y @ (S @ y))
        if abs(mu_new - mu) <= tol * max(abs(mu_new), 1e-300):
            return mu_new, y
        mu = mu_new
    raise InvalidDiscretizationError(
        "power iteration on the inverted pencil did not converge")


def compute_nu1(problem: DiscreteProblem, method="dense") -> ThresholdEstimate:
    """Minimize the quadratic quotient over the constrained subspace.

    method: "dense" (default, LAPACK symmetric eigensolve) or "power" (the
    fallback for larger reduced systems).
    """
    if method not in ("dense", "power"):
        raise InvalidArgumentError(f"unknown eigensolver method {method!r}")
    sub = problem.subspace
    Kt = reduce_matrix(sub, problem.K)
    Mt = reduce_matrix(sub, problem.Msum)
    try:
        R = cholesky(Kt, lower=False)
    except LinAlgError as exc:
        raise InvalidDiscretizationError(
            "reduced stiffness is not positive definite "
            f"(is the mesh connected?): {exc}") from exc

    if not np.abs(Mt).max() > 0.0:
        raise DegenerateProblemError(
            "both weights vanish on the constrained subspace; the quadratic "
            "quotient has no finite minimum")

    W = solve_triangular(R, Mt, trans="T", lower=False)
    S = solve_triangular(R, W.T, trans="T", lower=False).T
    S = 0.5 * (S + S.T)
    if method == "power":
        mu_max, y = _power_iteration(S)
    else:
        eigvals, eigvecs = eigh(S)
        mu_max, y = float(eigvals[-1]), eigvecs[:, -1]
    if not mu_max > 0.0:
        raise DegenerateProblemError(
            "spectral mass is numerically zero on the constrained subspace")
    nu1 = 1.0 / mu_max

    x = solve_triangular(R, y, lower=False)
    u = sub.lift(x)
    u = u / np.sqrt(float(u @ (problem.Msum @ u)))
    if u[np.argmax(np.abs(u))] < 0:
        u = -u
    resid = dual_norm(problem, problem.K @ u - nu1 * (problem.Msum @ u), u)
    return ThresholdEstimate(nu1=nu1, minimizer=u, pencil_residual=resid,
                             reduced_dim=sub.reduced_dim)


def verify_threshold_scaling(problem: DiscreteProblem, estimate: ThresholdEstimate,
                             t_list) -> list[ScalingRow]:
    """Evaluate the full quotient along t * minimizer.

    The gap above nu1 is exactly proportional to t^{p-2}: it shrinks as
    t -> 0 for p > 2 and as t -> inf for p < 2. Consecutive-gap ratios are
    reported for direct comparison with (t_i / t_{i+1})^{p-2}.
    """
    rows = []
    prev_gap = None
    for t in t_list:
        t = float(t)
        if not t > 0.0:
            raise InvalidArgumentError(f"scaling parameter t must be positive, got {t}")
        value = rayleigh_full(problem, t * estimate.minimizer)
        gap = value - estimate.nu1
        ratio = None if prev_gap is None else (prev_gap / gap if gap != 0.0 else np.inf)
        rows.append(ScalingRow(t=t, value=value, gap=gap, ratio=ratio))
        prev_gap = gap
    return rows


def default_t_list(p):
    """Scaling probe: toward 0 for p > 2, toward infinity for p < 2."""
    return [1.0, 0.1, 0.01] if p > 2.0 else [1.0, 10.0, 100.0]
