"""Weight fields and assembly of the discrete operators.

Operators built from P1 elements:
    K    Dirichlet form, int grad(u).grad(v)
    Ma   domain mass weighted by a, int a u v
    Bb   boundary mass weighted by b, int_boundary b u v
    c    constraint functional, c_i = int a phi_i + int_boundary b phi_i
    M1   unweighted domain mass (discrete W^{1,2} inner product is K + M1)

Weights are sampled at element/facet barycenters and treated as constant per
element/facet; the u v factors use the exact P1 mass templates, so constant
weights are integrated exactly.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.linalg import cho_factor
from scipy.sparse.linalg import splu

from p2lab import _kernels
from p2lab.errors import (
    DegenerateDirectionError,
    InvalidArgumentError,
    InvalidWeightError,
    WeightsConditionError,
)
from p2lab.mesh import Mesh


@dataclass(frozen=True)
class WeightField:
    """Nonnegative coefficient field on the domain or on the boundary.

    Kinds: ``constant`` (a single value), ``affine`` (c0 + c.x clamped at 0),
    ``per_element`` (one value per element or boundary facet).
    """

    kind: str
    target: str
    value: float = 0.0
    coefficients: tuple = ()
    values: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("constant", "affine", "per_element"):
            raise InvalidArgumentError(f"unknown weight kind {self.kind!r}")
        if self.target not in ("domain", "boundary"):
            raise InvalidArgumentError(f"unknown weight target {self.target!r}")
        if self.kind == "constant" and self.value < 0:
            raise InvalidWeightError(f"constant weight must be nonnegative, got {self.value}")
        if self.kind == "per_element":
            vals = np.asarray(self.values, dtype=np.float64)
            if vals.ndim != 1:
                raise InvalidArgumentError("per-element weights must be a flat value list")
            if vals.size and vals.min() < 0:
                raise InvalidWeightError(
                    f"per-element weight {int(np.argmin(vals))} is negative")
            object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, value, target="domain"):
        return cls("constant", target, value=float(value))

    @classmethod
    def affine(cls, coefficients, target="domain"):
        return cls("affine", target, coefficients=tuple(float(c) for c in coefficients))

    @classmethod
    def per_element(cls, values, target="domain"):
        return cls("per_element", target, values=np.asarray(values, dtype=np.float64))

    @classmethod
    def from_file(cls, path, target="domain"):
        """Read one value per line (the per-element weight file format)."""
        vals = []
        with open(path) as fh:
            for lineno, raw in enumerate(fh, start=1):
                text = raw.split("#", 1)[0].strip()
                if not text:
                    continue
                try:
                    vals.append(float(text))
                except ValueError:
                    raise InvalidArgumentError(
                        f"{path}:{lineno}: unparseable weight value") from None
        return cls.per_element(vals, target=target)

    def _sample_points(self, points):
        if self.kind == "constant":
            return np.full(points.shape[0], self.value)
        coeffs = np.asarray(self.coefficients)
        if coeffs.shape[0] != points.shape[1] + 1:
            raise InvalidArgumentError(
                f"affine weight needs {points.shape[1] + 1} coefficients, "
                f"got {coeffs.shape[0]}")
        return np.maximum(0.0, coeffs[0] + points @ coeffs[1:])

    def element_values(self, mesh: Mesh):
        """Weight samples at element barycenters (domain-target fields only)."""
        if self.target != "domain":
            raise InvalidArgumentError(
                "boundary-target weight field evaluated on domain elements")
        if self.kind == "per_element":
            if self.values.shape[0] != mesh.n_elements:
                raise InvalidArgumentError(
                    f"per-element weight has {self.values.shape[0]} values, "
                    f"mesh has {mesh.n_elements} elements")
            return self.values
        return self._sample_points(mesh.element_barycenters())

    def facet_values(self, mesh: Mesh):
        """Weight samples at facet barycenters (boundary-target fields only)."""
        if self.target != "boundary":
            raise InvalidArgumentError(
                "domain-target weight field evaluated on boundary facets")
        if self.kind == "per_element":
            if self.values.shape[0] != mesh.n_boundary_facets:
                raise InvalidArgumentError(
                    f"per-facet weight has {self.values.shape[0]} values, "
                    f"mesh has {mesh.n_boundary_facets} facets")
            return self.values
        return self._sample_points(mesh.facet_barycenters())

    def scaled(self, gamma):
        """Same field multiplied by gamma > 0 (clamping commutes)."""
        if not gamma > 0:
            raise InvalidArgumentError("scale factor must be positive")
        if self.kind == "constant":
            return WeightField.constant(self.value * gamma, self.target)
        if self.kind == "affine":
            return WeightField.affine([c * gamma for c in self.coefficients], self.target)
        return WeightField.per_element(self.values * gamma, self.target)

    def describe(self):
        if self.kind == "constant":
            detail = {"value": self.value}
        elif self.kind == "affine":
            detail = {"coefficients": list(self.coefficients)}
        else:
            detail = {"n_values": int(self.values.shape[0]),
                      "sum": float(self.values.sum())}
        return {"kind": self.kind, "target": self.target, **detail}


def _element_geometry(mesh: Mesh):
    """Connectivity, basis gradients of local vertices 1..nv-1, and measures,
    laid out for the element kernels."""
    conn = np.ascontiguousarray(mesh.elements, dtype=np.int64)
    meas = np.ascontiguousarray(mesh.element_measures())
    if mesh.dim == 1:
        bgrads = (1.0 / meas).reshape(-1, 1, 1)
    else:
        p0 = mesh.nodes[conn[:, 0]]
        e1 = mesh.nodes[conn[:, 1]] - p0
        e2 = mesh.nodes[conn[:, 2]] - p0
        twoA = 2.0 * meas
        g1 = np.stack([e2[:, 1], -e2[:, 0]], axis=1) / twoA[:, None]
        g2 = np.stack([-e1[:, 1], e1[:, 0]], axis=1) / twoA[:, None]
        bgrads = np.stack([g1, g2], axis=1)
    return conn, np.ascontiguousarray(bgrads), meas


def _scatter(rows, cols, data, n):
    out = sp.coo_matrix((data.ravel(), (rows.ravel(), cols.ravel())),
                        shape=(n, n)).tocsr()
    out.eliminate_zeros()
    return out


def dirichlet_matrix(mesh: Mesh):
    """Stiffness matrix of the Dirichlet form (constants in its kernel)."""
    conn, bgrads, meas = _element_geometry(mesh)
    nv = conn.shape[1]
    g_rest = bgrads
    g0 = -g_rest.sum(axis=1, keepdims=True)
    G = np.concatenate([g0, g_rest], axis=1)
    Ke = meas[:, None, None] * np.einsum("eid,ejd->eij", G, G)
    rows = np.repeat(conn, nv, axis=1)
    cols = np.tile(conn, (1, nv))
    return _scatter(rows, cols, Ke, mesh.n_nodes)


_MASS_1D = (np.ones((2, 2)) + np.eye(2)) / 6.0
_MASS_2D = (np.ones((3, 3)) + np.eye(3)) / 12.0


def domain_mass_matrix(mesh: Mesh, values=None):
    """Weighted domain mass; ``values`` are per-element weights (default 1)."""
    conn = mesh.elements
    nv = conn.shape[1]
    meas = mesh.element_measures()
    template = _MASS_1D if mesh.dim == 1 else _MASS_2D
    w = meas if values is None else meas * values
    Me = w[:, None, None] * template
    rows = np.repeat(conn, nv, axis=1)
    cols = np.tile(conn, (1, nv))
    return _scatter(rows, cols, Me, mesh.n_nodes)


def boundary_mass_matrix(mesh: Mesh, values=None):
    """Weighted boundary mass; ``values`` are per-facet weights (default 1).

    In 1D the boundary carries the counting measure: a diagonal contribution
    of the facet weight at each endpoint node.
    """
    facets = mesh.boundary_facets
    nf = facets.shape[1]
    meas = mesh.facet_measures()
    w = meas if values is None else meas * values
    if mesh.dim == 1:
        data = w[:, None, None] * np.ones((1, 1))
    else:
        data = w[:, None, None] * _MASS_1D
    rows = np.repeat(facets, nf, axis=1)
    cols = np.tile(facets, (1, nf))
    return _scatter(rows, cols, data, mesh.n_nodes)


@dataclass(frozen=True)
class DiscreteProblem:
    """Assembled discretization: operators, constraint vector, exponent p and
    the gradient regularization eps (kernel arrays are carried along for the
    energy/gradient sweeps)."""

    mesh: Mesh
    a: WeightField
    b: WeightField
    p: float
    eps: float
    K: sp.csr_matrix
    Ma: sp.csr_matrix
    Bb: sp.csr_matrix
    M1: sp.csr_matrix
    c: np.ndarray
    elem_conn: np.ndarray = field(repr=False, default=None)
    elem_bgrads: np.ndarray = field(repr=False, default=None)
    elem_meas: np.ndarray = field(repr=False, default=None)

    @property
    def n(self):
        return self.mesh.n_nodes

    @cached_property
    def Msum(self):
        """Ma + Bb, the spectral-term mass."""
        return (self.Ma + self.Bb).tocsr()

    @cached_property
    def H(self):
        """Discrete W^{1,2} inner product K + M1 (the dual-norm metric)."""
        return (self.K + self.M1).tocsr()

    @cached_property
    def h_solver(self):
        """Sparse factorization of H for dual-norm evaluations."""
        return splu(self.H.tocsc())

    @cached_property
    def subspace(self):
        from p2lab.subspace import build_subspace

        return build_subspace(self.c)

    @cached_property
    def reduced_h_cholesky(self):
        """Cholesky factor of Z^T H Z (the solvers' descent metric)."""
        from p2lab.subspace import reduce_matrix

        return cho_factor(reduce_matrix(self.subspace, self.H))

    def fingerprint(self):
        return {
            "mesh_hash": self.mesh.content_hash(),
            "weight_a": self.a.describe(),
            "weight_b": self.b.describe(),
            "p": self.p,
            "eps": self.eps,
        }


def assemble(mesh: Mesh, a: WeightField, b: WeightField, p, eps=0.0) -> DiscreteProblem:
    """Assemble all discrete operators for exponent p.

    Requires p > 1 and p != 2 (at p = 2 the problem degenerates to the linear
    Steklov problem for the Laplacian and is excluded), nonnegative weight
    samples, eps >= 0 with eps = 0 for p > 2, and positive total weight mass.
    """
    p = float(p)
    if not p > 1.0:
        raise InvalidArgumentError(f"exponent p must exceed 1, got {p}")
    if p == 2.0:
        raise InvalidArgumentError(
            "p = 2 reduces to the linear Steklov problem for the Laplacian "
            "and is excluded; pick p in (1,2) or (2,inf)")
    eps = float(eps)
    if eps < 0.0:
        raise InvalidArgumentError(f"regularization eps must be nonnegative, got {eps}")
    if p > 2.0 and eps != 0.0:
        raise InvalidArgumentError("regularization eps must be 0 for p > 2")

    a_vals = np.asarray(a.element_values(mesh), dtype=np.float64)
    b_vals = np.asarray(b.facet_values(mesh), dtype=np.float64)
    if a_vals.size and a_vals.min() < 0:
        raise InvalidWeightError(
            f"domain weight sample {int(np.argmin(a_vals))} is negative")
    if b_vals.size and b_vals.min() < 0:
        raise InvalidWeightError(
            f"boundary weight sample {int(np.argmin(b_vals))} is negative")

    K = dirichlet_matrix(mesh)
    Ma = domain_mass_matrix(mesh, a_vals)
    Bb = boundary_mass_matrix(mesh, b_vals)
    M1 = domain_mass_matrix(mesh)
    ones = np.ones(mesh.n_nodes)
    c = Ma @ ones + Bb @ ones
    total = float(ones @ c)
    if not total > 0.0:
        raise WeightsConditionError(
            "weights condition violated: the integral of a over the domain "
            f"plus the integral of b over the boundary is {total:.3e}; "
            "it must be positive")

    conn, bgrads, meas = _element_geometry(mesh)
    return DiscreteProblem(mesh=mesh, a=a, b=b, p=p, eps=eps, K=K, Ma=Ma, Bb=Bb,
                           M1=M1, c=c, elem_conn=conn, elem_bgrads=bgrads,
                           elem_meas=meas)


def _check_vector(problem: DiscreteProblem, u):
    u = np.ascontiguousarray(u, dtype=np.float64)
    if u.shape != (problem.n,):
        raise InvalidArgumentError(
            f"nodal vector has shape {u.shape}, expected ({problem.n},)")
    return u


def energy_p(problem: DiscreteProblem, u):
    """(1/p) int |grad u|^p, exact for P1 (never regularized)."""
    u = _check_vector(problem, u)
    raw = _kernels.p_energy_raw(problem.elem_conn, problem.elem_bgrads,
                                problem.elem_meas, u, problem.p)
    return raw / problem.p


def p_dirichlet_integral(problem: DiscreteProblem, u):
    """int |grad u|^p = p * energy_p(u), computed directly."""
    u = _check_vector(problem, u)
    return _kernels.p_energy_raw(problem.elem_conn, problem.elem_bgrads,
                                 problem.elem_meas, u, problem.p)


def grad_energy_p(problem: DiscreteProblem, u, eps=None, p=None):
    """Nodal gradient of energy_p. Entry i is
    sum_e (|grad u|^2 + eps^2)^((p-2)/2) grad u . grad phi_i measure(e),
    with a zero contribution where the base vanishes at eps = 0.

    eps/p overrides exist for solver-internal regularization and for the
    p -> 2 consistency check; public callers use the problem's values.
    """
    u = _check_vector(problem, u)
    out = np.zeros(problem.n)
    _kernels.p2_gradient(problem.elem_conn, problem.elem_bgrads, problem.elem_meas,
                         u, problem.p if p is None else float(p),
                         problem.eps if eps is None else float(eps),
                         1.0, 0.0, out)
    return out


def _grad_p_plus_dirichlet(problem: DiscreteProblem, u, eps):
    """Gradient of energy_p(u) + (1/2) u^T K u in one element sweep."""
    out = np.zeros(problem.n)
    _kernels.p2_gradient(problem.elem_conn, problem.elem_bgrads, problem.elem_meas,
                         u, problem.p, eps, 1.0, 1.0, out)
    return out


def functional_I(problem: DiscreteProblem, lam, u):
    """I_lambda(u) = energy_p(u) + (1/2) u^T K u - (lambda/2) u^T (Ma+Bb) u."""
    u = _check_vector(problem, u)
    val = energy_p(problem, u) + 0.5 * float(u @ (problem.K @ u))
    if lam != 0.0:
        val -= 0.5 * lam * float(u @ (problem.Msum @ u))
    return val


def grad_I(problem: DiscreteProblem, lam, u, eps=None):
    """Nodal gradient of I_lambda: grad_energy_p(u) + K u - lambda (Ma+Bb) u.

    For lam = 0 and constant u the result is the bitwise zero vector: element
    gradients come from nodal differences, so every element contributes an
    exact 0.
    """
    u = _check_vector(problem, u)
    r = _grad_p_plus_dirichlet(problem, u, problem.eps if eps is None else float(eps))
    if lam != 0.0:
        r -= lam * (problem.Msum @ u)
    return r


def hessian_I(problem: DiscreteProblem, lam, u, eps=None):
    """Sparse second derivative of I_lambda at u (used by the solvers'
    Newton refinement): the p-term contributes per element
    w * (g_i . g_j) + (p-2) * base^{(p-4)/2} * (g_i . grad u)(g_j . grad u),
    with base = |grad u|^2 + eps^2 and w = base^{(p-2)/2}; elements with a
    vanishing base contribute nothing (their continuation is taken as 0).
    """
    u = _check_vector(problem, u)
    p = problem.p
    eps = problem.eps if eps is None else float(eps)
    conn, bgrads, meas = problem.elem_conn, problem.elem_bgrads, problem.elem_meas
    nv = conn.shape[1]

    ue = u[conn]
    du = ue[:, 1:] - ue[:, :1]
    g = np.einsum("ei,eid->ed", du, bgrads)
    base = np.einsum("ed,ed->e", g, g) + eps * eps
    w = np.zeros_like(base)
    w4 = np.zeros_like(base)
    nz = base > 0.0
    w[nz] = base[nz] ** (0.5 * (p - 2.0))
    w4[nz] = (p - 2.0) * base[nz] ** (0.5 * (p - 4.0))

    g0 = -bgrads.sum(axis=1, keepdims=True)
    G = np.concatenate([g0, bgrads], axis=1)
    gram = np.einsum("eid,ejd->eij", G, G)
    s = np.einsum("eid,ed->ei", G, g)
    He = meas[:, None, None] * (w[:, None, None] * gram
                                + w4[:, None, None] * np.einsum("ei,ej->eij", s, s))
    rows = np.repeat(conn, nv, axis=1)
    cols = np.tile(conn, (1, nv))
    Ap = _scatter(rows, cols, He, problem.n)
    return (Ap + problem.K - lam * problem.Msum).tocsr()


def rayleigh_quadratic(problem: DiscreteProblem, u):
    """u^T K u / u^T (Ma+Bb) u; scale-invariant."""
    u = _check_vector(problem, u)
    den = float(u @ (problem.Msum @ u))
    if not den > 0.0:
        raise DegenerateDirectionError(
            "direction has zero spectral mass (u^T (Ma+Bb) u = 0)")
    return float(u @ (problem.K @ u)) / den


def rayleigh_full(problem: DiscreteProblem, u):
    """[energy_p(u) + (1/2) u^T K u] / [(1/2) u^T (Ma+Bb) u]."""
    u = _check_vector(problem, u)
    den = float(u @ (problem.Msum @ u))
    if not den > 0.0:
        raise DegenerateDirectionError(
            "direction has zero spectral mass (u^T (Ma+Bb) u = 0)")
    return (energy_p(problem, u) + 0.5 * float(u @ (problem.K @ u))) / (0.5 * den)
