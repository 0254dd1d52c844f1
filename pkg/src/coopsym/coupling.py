"""Coupling structure of the linearization along a solution, and the
identities forced on nonradial low-index solutions.

Weak coupling asks every off-diagonal Jacobian entry to be nonnegative along
the solution.  Full coupling additionally forbids any bipartition (I, J) of
the component indices from decoupling: some entry dJ_i/du_j with i in I,
j in J must be positive on a node set of positive measure.  For finitely
many components that is exactly strong connectivity of the digraph with an
edge j -> i whenever dF_i/du_j is positive on enough cells, which is what
the checker uses (the equivalence is property-tested against the exhaustive
bipartition enumeration).

The identity residuals evaluate, along a computed solution, the relations
that hold when a nonradial low-index solution exists: componentwise

    sum_j dF_i/du_j dU_j/dtheta  =  sum_j dF_j/du_i dU_j/dtheta

i.e. (J - J^t) U_theta = 0, and for two components the pointwise symmetry
J_12 = J_21 (for the power cross-coupling problem this reads
p |u2|^(p-1) = q |u1|^(q-1)).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

from .solver import Solution


@dataclass
class CouplingReport:
    weakly_coupled: bool
    worst_violation: float  # most negative off-diagonal Jacobian entry, as >= 0 magnitude
    fully_coupled: bool
    digraph: np.ndarray  # adjacency[i, j]: edge j -> i
    tol: float
    weight_tol: float

    def to_json_dict(self) -> dict:
        return {
            "weakly_coupled": self.weakly_coupled,
            "worst_violation": self.worst_violation,
            "fully_coupled": self.fully_coupled,
            "digraph": self.digraph.astype(int).tolist(),
            "tolerances": {"tol": self.tol, "weight_tol": self.weight_tol},
        }


def strongly_connected(adj: np.ndarray) -> bool:
    """True iff the digraph with edge j -> i for adj[i, j] is one SCC."""
    adj = np.asarray(adj, dtype=bool)
    m = adj.shape[0]
    if m == 1:
        return True
    ncomp, _ = connected_components(adj.T.astype(np.int8), directed=True,
                                    connection="strong")
    return ncomp == 1


def fully_coupled_bruteforce(adj: np.ndarray) -> bool:
    """Exhaustive bipartition check: every split (I, J) sees an edge J -> I."""
    adj = np.asarray(adj, dtype=bool)
    m = adj.shape[0]
    idx = range(m)
    for size in range(1, m):
        for I in itertools.combinations(idx, size):
            J = [j for j in idx if j not in I]
            if not any(adj[i, j] for i in I for j in J):
                return False
    return True


def check_coupling(solution: Solution, region: np.ndarray | None = None,
                   tol: float = 1e-10, weight_tol: float | None = None) -> CouplingReport:
    """Classify the linearization along a solution as weakly/fully coupled.

    weight_tol defaults to ten times the smallest cell weight, so a lone
    positive node cannot certify an edge of the coupling digraph.
    """
    grid = solution.grid
    m = solution.problem.m
    jac = solution.problem.J(grid.node_r, solution.field.node_view())
    w = grid.cell_weights
    if region is not None:
        sel = np.asarray(region, dtype=bool)
        jac = jac[:, :, sel]
        w = w[sel]
    if weight_tol is None:
        weight_tol = 10.0 * float(grid.cell_weights.min())

    off_mask = ~np.eye(m, dtype=bool)
    if m > 1:
        worst = float(max(0.0, -jac[off_mask].min()))
    else:
        worst = 0.0
    weakly = worst <= tol

    adj = np.zeros((m, m), dtype=bool)
    for i in range(m):
        for j in range(m):
            if i == j:
                continue
            mass = float(w[jac[i, j] > tol].sum())
            adj[i, j] = mass > weight_tol
    fully = weakly and strongly_connected(adj)
    return CouplingReport(weakly, worst, fully, adj, tol, weight_tol)


@dataclass
class IdentityResiduals:
    """Residual fields of the coupling identities along a solution."""

    antisymmetry: np.ndarray  # (m, nr, ntheta): (J - J^t) U_theta per component
    antisymmetry_max: float
    antisymmetry_l2: float  # weighted-L2 norm
    pair_mismatch: np.ndarray | None  # (nr, ntheta): J_12 - J_21, m = 2 only
    pair_mismatch_max: float | None
    pair_mismatch_l2: float | None
    jac_scale: float  # max |J| along the solution, for relative verdicts

    def to_json_dict(self) -> dict:
        return {
            "antisymmetry_max": self.antisymmetry_max,
            "antisymmetry_l2": self.antisymmetry_l2,
            "pair_mismatch_max": self.pair_mismatch_max,
            "pair_mismatch_l2": self.pair_mismatch_l2,
            "jacobian_scale": self.jac_scale,
        }


def angular_derivative(values: np.ndarray, dtheta: float) -> np.ndarray:
    """Centered periodic differences along the last (angular) axis."""
    return (np.roll(values, -1, axis=-1) - np.roll(values, 1, axis=-1)) / (2.0 * dtheta)


def identity_residual(solution: Solution) -> IdentityResiduals:
    """Evaluate the coupling identity residuals on the grid.

    The residuals are diagnostics: they are computed in grid polar
    coordinates whether or not the solution is known to be symmetric.
    """
    grid = solution.grid
    m = solution.problem.m
    if m < 2:
        raise ValueError("identity residuals need at least two components")
    vals = solution.field.values  # (m, nr, ntheta)
    u_theta = angular_derivative(vals, grid.dtheta)
    jac = solution.problem.J(grid.node_r, solution.field.node_view())
    jac = jac.reshape(m, m, grid.nr, grid.ntheta)
    skew = jac - jac.transpose(1, 0, 2, 3)
    anti = np.einsum("ij...,j...->i...", skew, u_theta)

    w = grid.cell_weights
    anti_l2 = float(np.sqrt(np.sum(anti.reshape(m, -1) ** 2 * w[np.newaxis, :])))
    out = IdentityResiduals(
        antisymmetry=anti,
        antisymmetry_max=float(np.abs(anti).max()),
        antisymmetry_l2=anti_l2,
        pair_mismatch=None, pair_mismatch_max=None, pair_mismatch_l2=None,
        jac_scale=float(np.abs(jac).max()),
    )
    if m == 2:
        mism = jac[0, 1] - jac[1, 0]
        out.pair_mismatch = mism
        out.pair_mismatch_max = float(np.abs(mism).max())
        out.pair_mismatch_l2 = float(np.sqrt(np.sum(mism.reshape(-1) ** 2 * w)))
    return out
