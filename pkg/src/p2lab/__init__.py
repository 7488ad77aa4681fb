"""p2lab: finite-element laboratory for the Steklov-type eigenvalue problem
of the (p,2)-Laplacian with weighted spectral terms in the domain and on the
boundary.

The spectrum of the discretized problem is an isolated zero eigenvalue plus
the open half-line above the quadratic-quotient threshold nu1; this package
computes the threshold, produces eigenpairs above it, and verifies the
structure by classification scans and invariant suites.
"""

from p2lab.assembly import (
    DiscreteProblem,
    WeightField,
    assemble,
    energy_p,
    functional_I,
    grad_I,
    grad_energy_p,
    rayleigh_full,
    rayleigh_quadratic,
)
from p2lab.linear_spectrum import (
    ThresholdEstimate,
    compute_nu1,
    verify_threshold_scaling,
)
from p2lab.mesh import (
    Mesh,
    build_disk_mesh,
    build_interval_mesh,
    build_rectangle_mesh,
    load_mesh,
    save_mesh,
)
from p2lab.nonlinear_solvers import (
    EigenPair,
    NehariPoint,
    SolverOptions,
    nehari_point,
    nehari_t,
    residual_dual_norm,
    solve_direct_min,
    solve_nehari_min,
)
from p2lab.subspace import (
    ConstrainedSubspace,
    build_subspace,
    decompose,
    mean_zero,
    reduce_matrix,
)
from p2lab.verification import (
    PIndependenceResult,
    ScanReport,
    ScanRow,
    classify_lambda,
    gap_certificate,
    p_independence_check,
    run_property_suite,
    scan,
    trace_constant,
)

__version__ = "0.1.0"

__all__ = [
    "DiscreteProblem", "WeightField", "assemble", "energy_p", "functional_I",
    "grad_I", "grad_energy_p", "rayleigh_full", "rayleigh_quadratic",
    "ThresholdEstimate", "compute_nu1", "verify_threshold_scaling",
    "Mesh", "build_disk_mesh", "build_interval_mesh", "build_rectangle_mesh",
    "load_mesh", "save_mesh",
    "EigenPair", "NehariPoint", "SolverOptions", "nehari_point", "nehari_t",
    "residual_dual_norm", "solve_direct_min", "solve_nehari_min",
    "ConstrainedSubspace", "build_subspace", "decompose", "mean_zero",
    "reduce_matrix",
    "PIndependenceResult", "ScanReport", "ScanRow", "classify_lambda",
    "gap_certificate", "p_independence_check", "run_property_suite", "scan",
    "trace_constant",
]
