"""Simplicial meshes of 1D intervals and 2D polygonal domains.

Nodes, elements and boundary facets are plain numpy arrays with a fixed,
construction-defined ordering so that assembly is bit-reproducible. The 1D
boundary consists of the two endpoint nodes carrying the counting measure
(each facet has measure 1); the 2D boundary consists of edges carrying their
length.
"""

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from p2lab.errors import InvalidArgumentError, MeshFormatError, MeshInvariantError


@dataclass(frozen=True)
class Mesh:
    """Immutable simplicial mesh.

    dim             1 or 2
    nodes           (n_nodes, dim) coordinates
    elements        (n_elements, dim+1) node indices, positively oriented
    boundary_facets (n_bfacets, dim) node indices (one node in 1D, an edge in 2D)
    facet_owners    (n_bfacets,) owning element index per facet
    """

    dim: int
    nodes: np.ndarray
    elements: np.ndarray
    boundary_facets: np.ndarray
    facet_owners: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "nodes", _freeze(np.asarray(self.nodes, dtype=np.float64)))
        object.__setattr__(self, "elements", _freeze(np.asarray(self.elements, dtype=np.int64)))
        object.__setattr__(self, "boundary_facets",
                           _freeze(np.asarray(self.boundary_facets, dtype=np.int64)))
        object.__setattr__(self, "facet_owners",
                           _freeze(np.asarray(self.facet_owners, dtype=np.int64)))

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_elements(self):
        return self.elements.shape[0]

    @property
    def n_boundary_facets(self):
        return self.boundary_facets.shape[0]

    def element_measures(self):
        """Signed element measures (lengths in 1D, triangle areas in 2D)."""
        if self.dim == 1:
            return self.nodes[self.elements[:, 1], 0] - self.nodes[self.elements[:, 0], 0]
        p0 = self.nodes[self.elements[:, 0]]
        p1 = self.nodes[self.elements[:, 1]]
        p2 = self.nodes[self.elements[:, 2]]
        e1 = p1 - p0
        e2 = p2 - p0
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def facet_measures(self):
        """Facet measures: 1 per endpoint in 1D, edge lengths in 2D."""
        if self.dim == 1:
            return np.ones(self.n_boundary_facets)
        a = self.nodes[self.boundary_facets[:, 0]]
        b = self.nodes[self.boundary_facets[:, 1]]
        return np.hypot(b[:, 0] - a[:, 0], b[:, 1] - a[:, 1])

    def element_barycenters(self):
        return self.nodes[self.elements].mean(axis=1)

    def facet_barycenters(self):
        return self.nodes[self.boundary_facets].mean(axis=1)

    def domain_measure(self):
        return float(self.element_measures().sum())

    def boundary_measure(self):
        return float(self.facet_measures().sum())

    def validate(self):
        """Check all structural invariants; raise MeshInvariantError naming
        the first violation found."""
        if self.dim not in (1, 2):
            raise MeshInvariantError(f"dimension must be 1 or 2, got {self.dim}")
        nv = self.dim + 1
        if self.nodes.ndim != 2 or self.nodes.shape[1] != self.dim:
            raise MeshInvariantError("node array shape does not match dimension")
        if self.elements.ndim != 2 or self.elements.shape[1] != nv:
            raise MeshInvariantError(f"elements must have {nv} nodes each")
        if self.boundary_facets.ndim != 2 or self.boundary_facets.shape[1] != self.dim:
            raise MeshInvariantError(f"boundary facets must have {self.dim} node(s) each")
        if self.facet_owners.shape != (self.n_boundary_facets,):
            raise MeshInvariantError("facet owner array length mismatch")

        n = self.n_nodes
        if self.elements.size and (self.elements.min() < 0 or self.elements.max() >= n):
            bad = int(np.argwhere((self.elements < 0) | (self.elements >= n))[0, 0])
            raise MeshInvariantError(f"element {bad} references a missing node")
        if self.boundary_facets.size and (self.boundary_facets.min() < 0
                                          or self.boundary_facets.max() >= n):
            bad = int(np.argwhere((self.boundary_facets < 0)
                                  | (self.boundary_facets >= n))[0, 0])
            raise MeshInvariantError(f"facet {bad} references a missing node")
        if self.facet_owners.size and (self.facet_owners.min() < 0
                                       or self.facet_owners.max() >= self.n_elements):
            bad = int(np.argwhere((self.facet_owners < 0)
                                  | (self.facet_owners >= self.n_elements))[0, 0])
            raise MeshInvariantError(f"facet {bad} references a missing owning element")

        for e, elem in enumerate(self.elements):
            if len(set(elem.tolist())) != nv:
                raise MeshInvariantError(f"element {e} repeats a node")
        measures = self.element_measures()
        if measures.size and measures.min() <= 0.0:
            bad = int(np.argmin(measures))
            raise MeshInvariantError(
                f"element {bad} has non-positive measure {measures[bad]:.3e}")

        for f, (facet, owner) in enumerate(zip(self.boundary_facets, self.facet_owners)):
            if not set(facet.tolist()) <= set(self.elements[owner].tolist()):
                raise MeshInvariantError(f"facet {f} not on its owning element")

        if self.dim == 1:
            if self.n_boundary_facets != 2:
                raise MeshInvariantError(
                    f"1D mesh must have exactly 2 boundary facets, got {self.n_boundary_facets}")
        else:
            counts = np.bincount(self.boundary_facets.ravel(), minlength=n)
            bnodes = np.nonzero(counts)[0]
            bad = bnodes[counts[bnodes] != 2]
            if bad.size:
                raise MeshInvariantError(
                    f"boundary node {int(bad[0])} has {int(counts[bad[0]])} incident "
                    "facets (expected 2: boundary must form closed loops)")
        return self

    def content_hash(self):
        """SHA-256 of the canonical text serialization (problem fingerprints)."""
        return hashlib.sha256(serialize_mesh(self).encode()).hexdigest()


def _freeze(a):
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


def build_interval_mesh(n, length):
    """Uniform mesh of (0, length) with n elements.

    The two endpoint facets carry the counting measure (measure 1 each).
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidArgumentError(f"element count must be a positive integer, got {n!r}")
    if not length > 0:
        raise InvalidArgumentError(f"interval length must be positive, got {length!r}")
    nodes = np.linspace(0.0, float(length), n + 1).reshape(-1, 1)
    elements = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    facets = np.array([[0], [n]])
    owners = np.array([0, n - 1])
    return Mesh(1, nodes, elements, facets, owners).validate()


def build_rectangle_mesh(nx, ny, Lx, Ly):
    """Structured triangulation of (0,Lx) x (0,Ly); each cell split into two
    triangles along its up-right diagonal. Node and element order follow the
    row-major construction loops."""
    for name, v in (("nx", nx), ("ny", ny)):
        if not isinstance(v, (int, np.integer)) or v < 1:
            raise InvalidArgumentError(f"{name} must be a positive integer, got {v!r}")
    if not (Lx > 0 and Ly > 0):
        raise InvalidArgumentError("rectangle side lengths must be positive")

    xs = np.linspace(0.0, float(Lx), nx + 1)
    ys = np.linspace(0.0, float(Ly), ny + 1)
    nodes = np.array([[x, y] for y in ys for x in xs])

    def nid(i, j):
        return j * (nx + 1) + i

    elements = []
    lower = {}
    upper = {}
    for j in range(ny):
        for i in range(nx):
            v00, v10 = nid(i, j), nid(i + 1, j)
            v01, v11 = nid(i, j + 1), nid(i + 1, j + 1)
            lower[i, j] = len(elements)
            elements.append((v00, v10, v11))
            upper[i, j] = len(elements)
            elements.append((v00, v11, v01))

    facets = []
    owners = []
    for i in range(nx):  # bottom
        facets.append((nid(i, 0), nid(i + 1, 0)))
        owners.append(lower[i, 0])
    for j in range(ny):  # right
        facets.append((nid(nx, j), nid(nx, j + 1)))
        owners.append(lower[nx - 1, j])
    for i in range(nx):  # top
        facets.append((nid(i + 1, ny), nid(i, ny)))
        owners.append(upper[i, ny - 1])
    for j in range(ny):  # left
        facets.append((nid(0, j + 1), nid(0, j)))
        owners.append(upper[0, j])

    return Mesh(2, nodes, np.array(elements), np.array(facets), np.array(owners)).validate()


def build_disk_mesh(m, rings, radius):
    """Triangulation of the regular m-gon inscribed in the circle of the
    given radius.

    Concentric rings carry linearly increasing vertex counts, fan-connected
    at the center; consecutive rings are joined by an angular two-pointer
    merge, which keeps elements close to equilateral. The union of triangles
    tiles the m-gon exactly, so the total area is (m/2) r^2 sin(2 pi / m)
    and the boundary length is 2 m r sin(pi / m).
    """
    if not isinstance(m, (int, np.integer)) or m < 4:
        raise InvalidArgumentError(f"boundary vertex count must be an integer >= 4, got {m!r}")
    if not isinstance(rings, (int, np.integer)) or rings < 1:
        raise InvalidArgumentError(f"ring count must be a positive integer, got {rings!r}")
    if not radius > 0:
        raise InvalidArgumentError(f"radius must be positive, got {radius!r}")

    counts = [max(3, round(m * k / rings)) for k in range(1, rings + 1)]
    counts[-1] = m

    nodes = [(0.0, 0.0)]
    offsets = []
    for k, nk in enumerate(counts, start=1):
        offsets.append(len(nodes))
        r = radius * k / rings
        for j in range(nk):
            theta = 2.0 * math.pi * j / nk
            nodes.append((r * math.cos(theta), r * math.sin(theta)))

    elements = []
    facets = []
    owners = []

    n1 = counts[0]
    for j in range(n1):
        tri = (0, offsets[0] + j, offsets[0] + (j + 1) % n1)
        if rings == 1:
            facets.append(tri[1:])
            owners.append(len(elements))
        elements.append(tri)

    for k in range(rings - 1):
        ni, no = counts[k], counts[k + 1]
        oi, oo = offsets[k], offsets[k + 1]
        last = k == rings - 2
        i = j = 0
        while i < ni or j < no:
            a_in = 2.0 * math.pi * (i + 1) / ni if i < ni else math.inf
            a_out = 2.0 * math.pi * (j + 1) / no if j < no else math.inf
            if a_out <= a_in:
                tri = (oi + i % ni, oo + j % no, oo + (j + 1) % no)
                if last:
                    facets.append(tri[1:])
                    owners.append(len(elements))
                j += 1
            else:
                tri = (oi + i % ni, oo + j % no, oi + (i + 1) % ni)
                i += 1
            elements.append(tri)

    return Mesh(2, np.array(nodes), np.array(elements),
                np.array(facets), np.array(owners)).validate()


def serialize_mesh(mesh):
    """Canonical text form (see load_mesh for the grammar)."""
    lines = [f"{mesh.dim} {mesh.n_nodes} {mesh.n_elements} {mesh.n_boundary_facets}"]
    for row in mesh.nodes:
        lines.append(" ".join(repr(float(x)) for x in row))
    for row in mesh.elements:
        lines.append(" ".join(str(int(i)) for i in row))
    for facet, owner in zip(mesh.boundary_facets, mesh.facet_owners):
        lines.append(" ".join(str(int(i)) for i in facet) + f" {int(owner)}")
    return "\n".join(lines) + "\n"


def save_mesh(mesh, path):
    with open(path, "w") as fh:
        fh.write(serialize_mesh(mesh))


def load_mesh(path):
    """Parse the whitespace-separated mesh format.

    Line 1: ``dim n_nodes n_elements n_bfacets``; then node coordinate lines,
    element connectivity lines, and facet lines (facet nodes followed by the
    owning element index). ``#`` starts a comment. Parse errors report the
    file line number; invariant violations name the offending entity.
    """
    rows = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if text:
                rows.append((lineno, text.split()))

    if not rows:
        raise MeshFormatError(f"{path}: empty mesh file")

    def parse(kind, lineno, tokens, count, caster):
        if len(tokens) != count:
            raise MeshFormatError(
                f"{path}:{lineno}: expected {count} {kind} value(s), got {len(tokens)}")
        try:
            return [caster(t) for t in tokens]
        except ValueError:
            raise MeshFormatError(f"{path}:{lineno}: unparseable {kind} value") from None

    lineno, header = rows[0]
    dim, n_nodes, n_elements, n_bfacets = parse("header", lineno, header, 4, int)
    if dim not in (1, 2):
        raise MeshFormatError(f"{path}:{lineno}: dimension must be 1 or 2, got {dim}")
    expected = 1 + n_nodes + n_elements + n_bfacets
    if len(rows) != expected:
        raise MeshFormatError(
            f"{path}: expected {expected} data lines per header, found {len(rows)}")

    cursor = 1
    nodes = [parse("coordinate", ln, tk, dim, float)
             for ln, tk in rows[cursor:cursor + n_nodes]]
    cursor += n_nodes
    elements = [parse("element index", ln, tk, dim + 1, int)
                for ln, tk in rows[cursor:cursor + n_elements]]
    cursor += n_elements
    facets = []
    owners = []
    for ln, tk in rows[cursor:cursor + n_bfacets]:
        vals = parse("facet index", ln, tk, dim + 1, int)
        facets.append(vals[:dim])
        owners.append(vals[dim])

    nodes = np.array(nodes, dtype=np.float64).reshape(n_nodes, dim)
    elements = np.array(elements, dtype=np.int64).reshape(n_elements, dim + 1)
    facets = np.array(facets, dtype=np.int64).reshape(n_bfacets, dim)
    owners = np.array(owners, dtype=np.int64)
    return Mesh(dim, nodes, elements, facets, owners).validate()
