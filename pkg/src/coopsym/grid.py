"""Polar discretization of disks and annuli with exact reflection machinery.

The grid is cell-centered in the radial direction and uniform in the angular
direction:

    r_i = r_inner + (i + 1/2) dr,   i = 0..nr-1,   dr = (r_outer - r_inner)/nr
    theta_j = j dtheta,             j = 0..ntheta-1, dtheta = 2 pi / ntheta

Nodes are indexed n = i*ntheta + j (radial-major).  Cell weights are the
midpoint-rule quadrature weights r_i * dr * dtheta; their sum reproduces the
domain area exactly because the integrand r is linear.

The minus-Laplacian is assembled in conservative flux form,

    (-Lap u)_i = -(1/r) d/dr (r du/dr) - (1/r^2) d2u/dtheta2 ,

which for a uniform cell-centered radial grid coincides with the centered
second-order stencil for u_rr + u_r/r.  Dirichlet data at the outer (and, for
annuli, inner) boundary face is imposed through ghost elimination
(u_ghost = -u_cell so the face value vanishes).  For the disk the innermost
face sits exactly at r = 0 where the flux coefficient r vanishes, so the
through-origin coupling carries zero weight and needs no special row.

Requiring ntheta % 4 == 0 makes every reflection across a hyperplane through
a grid direction an exact node permutation, and puts grid nodes exactly on
the two rays of the reflection hyperplane.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


class DomainKind(enum.Enum):
    DISK = "disk"
    ANNULUS = "annulus"


@dataclass(frozen=True)
class Domain:
    """A disk (r_inner = 0) or annulus (r_inner > 0) centered at the origin."""

    kind: DomainKind
    r_inner: float
    r_outer: float

    def __post_init__(self):
        if self.r_outer <= self.r_inner or self.r_inner < 0:
            raise ValueError(
                f"need r_outer > r_inner >= 0, got ({self.r_inner}, {self.r_outer})"
            )
        is_disk = self.r_inner == 0.0
        if is_disk != (self.kind is DomainKind.DISK):
            raise ValueError("kind must be DISK exactly when r_inner == 0")

    @staticmethod
    def disk(r_outer: float = 1.0) -> "Domain":
        return Domain(DomainKind.DISK, 0.0, float(r_outer))

    @staticmethod
    def annulus(r_inner: float, r_outer: float) -> "Domain":
        if r_inner <= 0:
            raise ValueError("annulus needs r_inner > 0")
        return Domain(DomainKind.ANNULUS, float(r_inner), float(r_outer))

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "r_inner": self.r_inner,
            "r_outer": self.r_outer,
        }

    @staticmethod
    def from_json_dict(d: dict) -> "Domain":
        return Domain(DomainKind(d["kind"]), float(d["r_inner"]), float(d["r_outer"]))


@dataclass(frozen=True)
class Grid:
    """Polar grid: immutable after construction, safe to share across workers."""

    domain: Domain
    nr: int
    ntheta: int
    r_nodes: np.ndarray = field(repr=False)
    theta_nodes: np.ndarray = field(repr=False)
    cell_weights: np.ndarray = field(repr=False)  # per node, length nr*ntheta

    @property
    def n_nodes(self) -> int:
        return self.nr * self.ntheta

    @property
    def dr(self) -> float:
        return (self.domain.r_outer - self.domain.r_inner) / self.nr

    @property
    def dtheta(self) -> float:
        return 2.0 * np.pi / self.ntheta

    @property
    def node_r(self) -> np.ndarray:
        """Radius of every node, length nr*ntheta, radial-major order."""
        return np.repeat(self.r_nodes, self.ntheta)

    @property
    def node_theta(self) -> np.ndarray:
        return np.tile(self.theta_nodes, self.nr)

    def node_xy(self) -> tuple[np.ndarray, np.ndarray]:
        r, t = self.node_r, self.node_theta
        return r * np.cos(t), r * np.sin(t)

    def to_json_dict(self) -> dict:
        d = self.domain.to_json_dict()
        d.update(nr=self.nr, ntheta=self.ntheta)
        return d

    @staticmethod
    def from_json_dict(d: dict) -> "Grid":
        dom = Domain.from_json_dict(d)
        return build_grid(dom, int(d["nr"]), int(d["ntheta"]))

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


@dataclass(frozen=True)
class Direction:
    """A grid-compatible unit direction e = (cos phi_k, sin phi_k), phi_k = 2 pi k / ntheta."""

    angle_index: int
    ntheta: int

    def __post_init__(self):
        if not 0 <= self.angle_index < self.ntheta:
            raise ValueError("angle_index out of range")

    @property
    def angle(self) -> float:
        return 2.0 * np.pi * self.angle_index / self.ntheta

    @property
    def vector(self) -> np.ndarray:
        return np.array([np.cos(self.angle), np.sin(self.angle)])

    def opposite(self) -> "Direction":
        return Direction((self.angle_index + self.ntheta // 2) % self.ntheta, self.ntheta)


@dataclass(frozen=True)
class SparseOperator:
    """CSR operator with an entrywise-symmetry flag.

    The flag refers to plain transpose symmetry.  The minus-Laplacian itself
    is not entrywise symmetric; it is symmetric in the inner product weighted
    by cell_weights, i.e. diag(w) @ matrix is entrywise symmetric.
    """

    matrix: sp.csr_matrix
    symmetric: bool

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, other):
        return self.matrix @ other


def build_grid(domain: Domain, nr: int, ntheta: int) -> Grid:
    """Build the cell-centered polar grid.

    nr >= 4 radial cells; ntheta >= 8 and divisible by 4 so that reflections
    across grid directions are exact permutations and the reflection
    hyperplane rays carry grid nodes.
    """
    if nr < 4:
        raise ValueError(f"nr must be >= 4, got {nr}")
    if ntheta < 8 or ntheta % 4 != 0:
        raise ValueError(f"ntheta must be >= 8 and divisible by 4, got {ntheta}")
    dr = (domain.r_outer - domain.r_inner) / nr
    r_nodes = domain.r_inner + (np.arange(nr) + 0.5) * dr
    theta_nodes = np.arange(ntheta) * (2.0 * np.pi / ntheta)
    dtheta = 2.0 * np.pi / ntheta
    weights = np.repeat(r_nodes * dr * dtheta, ntheta)
    return Grid(domain, nr, ntheta, r_nodes, theta_nodes, weights)


def laplacian(grid: Grid) -> SparseOperator:
    """Assemble -Lap with Dirichlet boundary faces, one scalar component.

    Returns the nodal operator A with (A u)_n ~ (-Lap u)(x_n).  A is symmetric
    under the cell-weight inner product: diag(cell_weights) @ A equals its
    transpose exactly.
    """
    nr, ntheta = grid.nr, grid.ntheta
    r = grid.r_nodes
    dr, dth = grid.dr, grid.dtheta
    n = grid.n_nodes

    i = np.arange(nr)
    r_out_face = r + dr / 2
    r_in_face = r - dr / 2

    c_out = r_out_face / (r * dr * dr)  # coupling to cell i+1
    c_in = r_in_face / (r * dr * dr)  # coupling to cell i-1
    c_ang = 1.0 / (r * r * dth * dth)

    rows, cols, vals = [], [], []
    node = (i[:, None] * ntheta + np.arange(ntheta)[None, :])

    # angular neighbours, periodic wrap
    jplus = (np.arange(ntheta) + 1) % ntheta
    jminus = (np.arange(ntheta) - 1) % ntheta
    for jj in (jplus, jminus):
        rows.append(node.ravel())
        cols.append((i[:, None] * ntheta + jj[None, :]).ravel())
        vals.append(np.repeat(-c_ang, ntheta))

    # radial neighbours
    inner = i[:-1]  # rows with an interior outer face: i -> i+1
    rows.append((inner[:, None] * ntheta + np.arange(ntheta)[None, :]).ravel())
    cols.append(((inner + 1)[:, None] * ntheta + np.arange(ntheta)[None, :]).ravel())
    vals.append(np.repeat(-c_out[:-1], ntheta))

    outer = i[1:]  # rows with an interior inner face: i -> i-1
    rows.append((outer[:, None] * ntheta + np.arange(ntheta)[None, :]).ravel())
    cols.append(((outer - 1)[:, None] * ntheta + np.arange(ntheta)[None, :]).ravel())
    vals.append(np.repeat(-c_in[1:], ntheta))

    # diagonal: interior faces contribute c, Dirichlet faces 2c (ghost = -u),
    # the disk center face contributes nothing (face radius 0)
    diag = 2.0 * c_ang + c_out + c_in
    diag[-1] += c_out[-1]  # outer Dirichlet face
    if grid.domain.kind is DomainKind.ANNULUS:
        diag[0] += c_in[0]  # inner Dirichlet face
    # disk: c_in[0] == 0 exactly, nothing to add
    rows.append(node.ravel())
    cols.append(node.ravel())
    vals.append(np.repeat(diag, ntheta))

    a = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )
    a.sum_duplicates()
    return SparseOperator(a, symmetric=False)


def weighted_form_matrix(grid: Grid, op: SparseOperator) -> sp.csr_matrix:
    """diag(cell_weights) @ op, the entrywise-symmetric quadratic form matrix."""
    return (sp.diags(grid.cell_weights) @ op.matrix).tocsr()


def reflect_map(grid: Grid, e: Direction) -> np.ndarray:
    """Node permutation of the reflection across the hyperplane {x . e = 0}.

    In polar coordinates the reflection maps theta to 2*phi_e + pi - theta and
    leaves r fixed, so on this grid it is the exact angular index map
    j -> (2k + ntheta/2 - j) mod ntheta.  The permutation is an involution and
    fixes exactly the nodes on the hyperplane rays.
    """
    if e.ntheta != grid.ntheta:
        raise ValueError("direction was built for a different ntheta")
    ntheta = grid.ntheta
    j = np.arange(ntheta)
    jref = (2 * e.angle_index + ntheta // 2 - j) % ntheta
    return (np.arange(grid.nr)[:, None] * ntheta + jref[None, :]).ravel()


def cap_mask(grid: Grid, e: Direction) -> np.ndarray:
    """Boolean node mask of the open cap {x in domain : x . e > 0}.

    Nodes on the hyperplane (x . e == 0, exact on this grid) are excluded, so
    the cap, its reflection, and the hyperplane rays partition the nodes.
    """
    if e.ntheta != grid.ntheta:
        raise ValueError("direction was built for a different ntheta")
    ntheta = grid.ntheta
    # x.e > 0 iff cos(theta_j - phi_e) > 0 iff (j - k) mod ntheta in the open
    # quarter-bands around 0; integer arithmetic keeps the test exact
    offset = (np.arange(ntheta) - e.angle_index) % ntheta
    quarter = ntheta // 4
    ang_in = (offset < quarter) | (offset > 3 * quarter)
    return np.tile(ang_in, grid.nr)


def restrict_operator(op: sp.csr_matrix, dofs: np.ndarray) -> sp.csr_matrix:
    """Zero-Dirichlet closure of op on a DOF subset (drop outside rows/cols)."""
    return op[dofs][:, dofs].tocsr()
