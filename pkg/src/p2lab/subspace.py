"""Algebraic realization of the constrained subspace {u : c.u = 0} and the
direct-sum split of nodal vectors into a constrained part plus a constant.

The orthonormal null-space basis Z comes from a single Householder reflection
taking c/|c| to the first coordinate axis; Z is its trailing n-1 columns.
Applications of Z and Z^T cost O(n) and never form the reflector; the dense Z
is materialized only on demand (operator reduction at desk scale).
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from p2lab.errors import ConstantsInsideSubspaceError, InvalidArgumentError
from p2lab.mesh import Mesh


@dataclass(frozen=True)
class ConstrainedSubspace:
    c: np.ndarray
    one_split: float  # c . 1, cached for the constant-part coefficient
    _v: np.ndarray = field(repr=False)  # Householder vector
    _beta: float = field(repr=False)    # 2 / v.v

    @property
    def n(self):
        return self.c.shape[0]

    @property
    def reduced_dim(self):
        return self.n - 1

    def lift(self, x):
        """Z x: reduced coordinates to a nodal vector with c.u = 0."""
        x = np.asarray(x, dtype=np.float64)
        y = np.concatenate([[0.0], x])
        return y - (self._beta * (y @ self._v)) * self._v

    def project_reduced(self, u):
        """Z^T u: nodal vector to reduced coordinates."""
        u = np.asarray(u, dtype=np.float64)
        return (u - (self._beta * (u @ self._v)) * self._v)[1:]

    @cached_property
    def Z(self):
        """Dense null-space basis (n x (n-1), orthonormal columns)."""
        H = np.eye(self.n) - self._beta * np.outer(self._v, self._v)
        return H[:, 1:]


def build_subspace(c) -> ConstrainedSubspace:
    """Constrained subspace for the functional c; requires c != 0 and
    c . 1 > 0 (otherwise constants would lie inside the subspace)."""
    c = np.ascontiguousarray(c, dtype=np.float64)
    norm = float(np.linalg.norm(c))
    if not norm > 0.0:
        raise InvalidArgumentError("constraint vector must be nonzero")
    one_split = float(c.sum())
    if not one_split > 0.0:
        raise ConstantsInsideSubspaceError(
            f"constraint functional has c . 1 = {one_split:.3e} <= 0; "
            "constant vectors are not separated from the subspace")
    q = c / norm
    v = q.copy()
    v[0] += 1.0 if q[0] >= 0 else -1.0
    beta = 2.0 / float(v @ v)
    return ConstrainedSubspace(c=c, one_split=one_split, _v=v, _beta=beta)


def decompose(subspace: ConstrainedSubspace, u):
    """Split u = w + s 1 with c.w = 0; returns (w, s). The split is the
    direct-sum decomposition against constants, not a Euclidean projection."""
    u = np.asarray(u, dtype=np.float64)
    s = float(subspace.c @ u) / subspace.one_split
    return u - s, s


def reduce_matrix(subspace: ConstrainedSubspace, A):
    """Z^T A Z for symmetric A (dense or sparse); PSD/PD-on-the-subspace is
    preserved. Result is densely symmetrized to kill roundoff asymmetry."""
    if sp.issparse(A):
        asym = abs(A - A.T).max()
        scale = abs(A).max()
    else:
        A = np.asarray(A, dtype=np.float64)
        asym = np.abs(A - A.T).max()
        scale = np.abs(A).max()
    if asym > 1e-10 * max(scale, 1e-300):
        raise InvalidArgumentError(
            f"matrix is not symmetric (asymmetry {asym:.3e} vs scale {scale:.3e})")
    Z = subspace.Z
    B = Z.T @ (A @ Z)
    return 0.5 * (B + B.T)


def mean_zero(mesh: Mesh, u):
    """u minus its exact P1 mean over the domain."""
    u = np.asarray(u, dtype=np.float64)
    meas = mesh.element_measures()
    elem_mean = u[mesh.elements].mean(axis=1)
    ubar = float(meas @ elem_mean) / float(meas.sum())
    return u - ubar
