"""Reflection differences, secant/endpoint comparison potentials, direction
scans, and the rotating-plane scan.

For a direction e and a solution U, the difference W = U - U(sigma_e x)
satisfies a linear cooperative system on the cap {x . e > 0} whose potential
is the secant (mean-value) matrix

    S_ij(x) = -int_0^1 dF_i/du_j(|x|, t U(x) + (1-t) U(sigma_e x)) dt,

computed here by Gauss-Legendre quadrature in t.  The endpoint average

    E_ij(x) = -( dF_i/du_j(|x|, U(x)) + dF_i/du_j(|x|, U(sigma_e x)) ) / 2

bounds it entrywise from below whenever the Jacobian entries are convex in U
(midpoint of a convex function <= average), so the quadratic form of W with
the secant potential dominates the one with the endpoint potential, and both
vanish on the difference of an exact solution.

The direction scan computes, for every grid direction, the first symmetric
eigenvalue of -Lap + E on the cap (plus companions for the secant
potential); low Morse index forces the maximum over directions to be
nonnegative.  The rotating-plane scan rotates the reflection hyperplane and
tracks the sign of W on the rotating cap; the angle where strict one-sign
behaviour breaks down locates a symmetry hyperplane.

Exactness notes: reflections are node permutations, nodes on the hyperplane
rays separate a cap from its mirror image in the stencil graph, and the
through-origin coupling carries zero weight; hence the odd extension of a
cap field has a full-domain quadratic form exactly twice the cap form, to
rounding.
"""

from __future__ import annotations

import concurrent.futures
import csv
import io
import os
from dataclasses import dataclass, field

import numpy as np

from .coupling import strongly_connected
from .fields import VectorField
from .grid import Direction, Grid, cap_mask, reflect_map
from .solver import Solution
from .spectral import (LinearizedOperator, SpectralError, default_tol_eig,
                       principal_eigenvalue, quadratic_form, symmetric_spectrum)


@dataclass
class ReflectionPack:
    direction: Direction
    difference: VectorField  # W = U - U o sigma_e
    secant_potential: np.ndarray  # (m, m, n_nodes)
    endpoint_potential: np.ndarray  # (m, m, n_nodes)
    form_secant: float  # quadratic form of W over the cap, secant potential
    form_endpoint: float
    quad_nodes: int

    def cap(self, grid: Grid) -> np.ndarray:
        return cap_mask(grid, self.direction)


def _gauss_legendre_01(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def secant_potential(problem, grid: Grid, u_nodes: np.ndarray,
                     u_reflected: np.ndarray, quad_nodes: int) -> np.ndarray:
    """-int_0^1 J(r, t U + (1-t) U_sigma) dt by Gauss-Legendre in t."""
    t_nodes, t_weights = _gauss_legendre_01(quad_nodes)
    acc = None
    for t, wt in zip(t_nodes, t_weights):
        jac = problem.J(grid.node_r, t * u_nodes + (1.0 - t) * u_reflected)
        acc = wt * jac if acc is None else acc + wt * jac
    return -acc


def reflection_pack(solution: Solution, e: Direction, quad_nodes: int = 8) -> ReflectionPack:
    """Difference field and comparison potentials for one direction."""
    if quad_nodes < 2:
        raise ValueError("quad_nodes must be >= 2")
    grid = solution.grid
    perm = reflect_map(grid, e)
    u = solution.field.node_view()
    u_ref = u[:, perm]
    w_field = VectorField.from_flat(grid, solution.problem.m, (u - u_ref).reshape(-1))

    sec = secant_potential(solution.problem, grid, u, u_ref, quad_nodes)
    jac_u = solution.problem.J(grid.node_r, u)
    jac_ref = solution.problem.J(grid.node_r, u_ref)
    end = -0.5 * (jac_u + jac_ref)

    cap = cap_mask(grid, e)
    w_cap = _mask_field(w_field, cap)
    q_sec = quadratic_form(LinearizedOperator(grid, sec), w_cap, cap)
    q_end = quadratic_form(LinearizedOperator(grid, end), w_cap, cap)
    return ReflectionPack(e, w_field, sec, end, q_sec, q_end, quad_nodes)


def _mask_field(fld: VectorField, mask: np.ndarray) -> VectorField:
    nodes = fld.node_view().copy()
    nodes[:, ~mask] = 0.0
    return VectorField.from_flat(fld.grid, fld.m, nodes.reshape(-1))


def odd_extension(fld: VectorField, e: Direction) -> VectorField:
    """phi on the cap extended to phi - phi o sigma_e (odd across the hyperplane)."""
    perm = reflect_map(fld.grid, e)
    return fld - fld.permute_nodes(perm)


def difference_residual(pack: ReflectionPack, solution: Solution) -> float:
    """Max-norm of (-Lap W + S W) over the cap nodes.

    Vanishes up to solver residual and quadrature error because the reflected
    solution solves the same discrete system (the stencil commutes with the
    reflection permutation exactly).
    """
    grid = solution.grid
    op = LinearizedOperator(grid, pack.secant_potential)
    resid = op.nodal_matrix(sym=False) @ pack.difference.flat()
    cap = pack.cap(grid)
    sel = np.tile(cap, solution.problem.m)
    return float(np.abs(resid[sel]).max(initial=0.0))


def potential_comparison(pack: ReflectionPack, strict_scale: float = 1e-8) -> dict:
    """Entrywise secant-vs-endpoint comparison over the nodes.

    Returns the worst violation of secant >= endpoint (as a nonnegative
    number), plus strictness bookkeeping on nodes where every component of U
    and its reflection differ (elsewhere the strict comparison is skipped and
    counted).
    """
    diff = pack.secant_potential - pack.endpoint_potential
    worst = float(max(0.0, -diff.min()))
    w_nodes = pack.difference.node_view()
    unorm = max(pack.difference.max_norm(), 1e-300)
    active = np.all(np.abs(w_nodes) > strict_scale * unorm, axis=0)
    skipped_fraction = 1.0 - float(active.mean())
    # strictness applies entrywise: only entries whose Jacobian entry is
    # strictly convex carry a positive gap, so report the matrix of minima
    gap_matrix = (diff[:, :, active].min(axis=2) if active.any() else None)
    return {
        "worst_violation": worst,
        "skipped_fraction": skipped_fraction,
        "min_gap_on_active_nodes": float(diff[:, :, active].min()) if active.any() else None,
        "min_gap_matrix": gap_matrix,
    }


# ---------------------------------------------------------------------------
# direction scan


@dataclass
class DirectionRow:
    angle_index: int
    angle: float
    lambda1_endpoint: float | None  # first symmetric eigenvalue, endpoint potential
    lambda1_secant: float | None  # symmetric part of the secant potential
    principal_secant: float | None  # principal eigenvalue, secant potential
    factor2_residual: float | None  # odd-extension identity defect
    form_secant: float
    form_endpoint: float
    difference_norm_sq: float  # weighted L2 norm^2 of W over the cap
    difference_residual: float  # max-norm of (-Lap + S) W over the cap
    comparison_violation: float  # worst secant-below-endpoint defect
    comparison_skipped: float  # node fraction excluded from the strict check
    error: str | None = None


@dataclass
class DirectionScan:
    rows: list[DirectionRow]
    tol_eig: float
    best_index: int  # maximizes lambda1_endpoint
    exists_nonnegative_direction: bool

    @property
    def best_direction_angle(self) -> float:
        return self.rows[self.best_index].angle

    def max_lambda1_endpoint(self) -> float:
        vals = [r.lambda1_endpoint for r in self.rows if r.lambda1_endpoint is not None]
        return max(vals)

    def to_json_dict(self) -> dict:
        return {
            "verdict": ("exists_nonnegative_direction"
                        if self.exists_nonnegative_direction else "all_negative"),
            "best_angle": self.best_direction_angle,
            "max_lambda1_endpoint": self.max_lambda1_endpoint(),
            "tolerances": {"tol_eig": self.tol_eig},
            "rows": [
                {
                    "angle": r.angle,
                    "lambda1_endpoint": r.lambda1_endpoint,
                    "lambda1_secant": r.lambda1_secant,
                    "principal_secant": r.principal_secant,
                    "factor2_residual": r.factor2_residual,
                    "form_secant": r.form_secant,
                    "form_endpoint": r.form_endpoint,
                    "difference_norm_sq": r.difference_norm_sq,
                    "difference_residual": r.difference_residual,
                    "comparison_violation": r.comparison_violation,
                    "comparison_skipped": r.comparison_skipped,
                    "error": r.error,
                }
                for r in self.rows
            ],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["angle", "lambda1_sym_endpoint", "lambda1_sym_secant",
                         "principal_secant", "factor2_residual",
                         "min_W", "max_W", "pos_mass", "neg_mass"])
        for r in self.rows:
            writer.writerow([f"{r.angle:.12g}",
                             _fmt(r.lambda1_endpoint), _fmt(r.lambda1_secant),
                             _fmt(r.principal_secant), _fmt(r.factor2_residual),
                             "", "", "", ""])
        return buf.getvalue()


def _fmt(x) -> str:
    return "" if x is None else f"{x:.17g}"


def scan_workers(workers: int | None = None) -> int:
    if workers is not None:
        return max(1, workers)
    env = os.environ.get("COOPSYM_WORKERS")
    if env:
        return max(1, int(env))
    return 1


def _scan_one_direction(solution: Solution, k: int, quad_nodes: int) -> DirectionRow:
    grid = solution.grid
    e = Direction(k, grid.ntheta)
    pack = reflection_pack(solution, e, quad_nodes)
    cap = cap_mask(grid, e)
    w_cap = _mask_field(pack.difference, cap)
    comparison = potential_comparison(pack)
    row = DirectionRow(k, e.angle, None, None, None, None,
                       pack.form_secant, pack.form_endpoint,
                       w_cap.weighted_l2_sq(),
                       difference_residual(pack, solution),
                       comparison["worst_violation"],
                       comparison["skipped_fraction"])
    try:
        op_end = LinearizedOperator(grid, pack.endpoint_potential)
        vals, fields = symmetric_spectrum(op_end, cap, k=1)
        row.lambda1_endpoint = float(vals[0])
        # odd-extension identity: full-domain form of the odd extension is
        # exactly twice the cap form (hyperplane nodes separate the halves)
        phi = fields[0]
        ext = odd_extension(phi, e)
        q_cap = quadratic_form(op_end, phi, cap)
        q_full = quadratic_form(op_end, ext)
        row.factor2_residual = abs(q_full - 2.0 * q_cap) / max(1.0, abs(q_cap))

        op_sec = LinearizedOperator(grid, pack.secant_potential)
        vals_sec, _ = symmetric_spectrum(op_sec, cap, k=1)
        row.lambda1_secant = float(vals_sec[0])
        lam, _ = principal_eigenvalue(op_sec, cap)
        row.principal_secant = float(lam)
    except SpectralError as exc:
        row.error = f"{type(exc).__name__}: {exc}"
    return row


def direction_scan(solution: Solution, quad_nodes: int = 8,
                   tol_eig: float | None = None,
                   workers: int | None = None) -> DirectionScan:
    """Per-direction cap eigenvalues over all grid directions.

    Directions are independent work items and run as a parallel map; results
    are aggregated in direction order so the scan is deterministic for any
    worker count.
    """
    grid = solution.grid
    if tol_eig is None:
        tol_eig = default_tol_eig(grid)
    nworkers = scan_workers(workers)
    ks = list(range(grid.ntheta))
    if nworkers == 1:
        rows = [_scan_one_direction(solution, k, quad_nodes) for k in ks]
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=nworkers) as pool:
            rows = list(pool.map(
                lambda k: _scan_one_direction(solution, k, quad_nodes), ks))
    scored = [(r.lambda1_endpoint, i) for i, r in enumerate(rows)
              if r.lambda1_endpoint is not None]
    if not scored:
        raise SpectralError("every direction failed in the scan")
    best = max(scored)[1]
    verdict = rows[best].lambda1_endpoint >= -tol_eig
    return DirectionScan(rows, tol_eig, best, verdict)


# ---------------------------------------------------------------------------
# rotating-plane scan


@dataclass
class RotatingRow:
    step: int
    theta: float  # rotation of the hyperplane relative to the base direction
    angle_index: int
    min_w: float
    max_w: float
    pos_mass: float
    neg_mass: float
    sign: str  # 'positive' | 'negative' | 'zero' | 'mixed'


@dataclass
class RotatingPlaneScan:
    base_index: int
    rows: list[RotatingRow]
    pos_tol: float
    verdict: str  # 'identically_symmetric' | 'transition_found' | 'no_one_sign_start'
    theta0: float | None
    symmetric_at_theta0: bool | None
    principal_at_theta0: float | None

    def to_json_dict(self) -> dict:
        return {
            "base_angle_index": self.base_index,
            "verdict": self.verdict,
            "theta0": self.theta0,
            "symmetric_at_theta0": self.symmetric_at_theta0,
            "principal_at_theta0": self.principal_at_theta0,
            "tolerances": {"pos_tol": self.pos_tol},
            "rows": [
                {"theta": r.theta, "sign": r.sign, "min_w": r.min_w,
                 "max_w": r.max_w, "pos_mass": r.pos_mass, "neg_mass": r.neg_mass}
                for r in self.rows
            ],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["angle", "lambda1_sym_endpoint", "lambda1_sym_secant",
                         "principal_secant", "factor2_residual",
                         "min_W", "max_W", "pos_mass", "neg_mass"])
        for r in self.rows:
            writer.writerow([f"{r.theta:.12g}", "", "", "", "",
                             _fmt(r.min_w), _fmt(r.max_w),
                             _fmt(r.pos_mass), _fmt(r.neg_mass)])
        return buf.getvalue()


def rotating_plane_scan(solution: Solution, e_base: Direction,
                        pos_tol_rel: float = 1e-8,
                        quad_nodes: int = 8) -> RotatingPlaneScan:
    """Track the sign of the reflection difference while the hyperplane rotates.

    Rotation angles are the grid angles in [0, pi).  The transition angle is
    the first rotation at which the strict one-sign pattern of the starting
    direction breaks (becoming zero or mixed); if the difference vanishes for
    every angle the solution is symmetric about every scanned hyperplane.
    """
    grid = solution.grid
    ntheta = grid.ntheta
    unorm = solution.field.max_norm()
    pos_tol = pos_tol_rel * max(unorm, 1e-300)
    m = solution.problem.m

    rows = []
    for step in range(ntheta // 2):
        k = (e_base.angle_index + step) % ntheta
        e = Direction(k, ntheta)
        perm = reflect_map(grid, e)
        u = solution.field.node_view()
        w = u - u[:, perm]
        cap = cap_mask(grid, e)
        wc = w[:, cap]
        weights = grid.cell_weights[cap]
        min_w = float(wc.min())
        max_w = float(wc.max())
        pos_mass = float((np.maximum(wc, 0.0) * weights).sum())
        neg_mass = float((np.maximum(-wc, 0.0) * weights).sum())
        if max(abs(min_w), abs(max_w)) <= pos_tol:
            sign = "zero"
        elif min_w > pos_tol:
            sign = "positive"
        elif max_w < -pos_tol:
            sign = "negative"
        else:
            sign = "mixed"
        rows.append(RotatingRow(step, step * grid.dtheta, k, min_w, max_w,
                                pos_mass, neg_mass, sign))

    if all(r.sign == "zero" for r in rows):
        return RotatingPlaneScan(e_base.angle_index, rows, pos_tol,
                                 "identically_symmetric", None, None, None)
    start_sign = rows[0].sign
    if start_sign not in ("positive", "negative"):
        return RotatingPlaneScan(e_base.angle_index, rows, pos_tol,
                                 "no_one_sign_start", None, None, None)
    theta0 = None
    theta0_row = None
    for r in rows[1:]:
        if r.sign != start_sign:
            theta0 = r.theta
            theta0_row = r
            break
    if theta0 is None:
        # the pattern must break within a half turn; flag rather than guess
        return RotatingPlaneScan(e_base.angle_index, rows, pos_tol,
                                 "no_one_sign_start", None, None, None)

    symmetric = theta0_row.sign == "zero"
    principal = None
    if symmetric:
        e0 = Direction(theta0_row.angle_index, ntheta)
        pack = reflection_pack(solution, e0, quad_nodes)
        try:
            lam, _ = principal_eigenvalue(
                LinearizedOperator(grid, pack.secant_potential), cap_mask(grid, e0))
            principal = float(lam)
        except SpectralError:
            principal = None
    return RotatingPlaneScan(e_base.angle_index, rows, pos_tol,
                             "transition_found", theta0, symmetric, principal)


def secant_digraph_strongly_connected(pack: ReflectionPack, grid: Grid,
                                      tol: float = 1e-10,
                                      weight_tol: float | None = None) -> bool:
    """Full-coupling inheritance: digraph of -secant_potential positivity."""
    m = pack.secant_potential.shape[0]
    if weight_tol is None:
        weight_tol = 10.0 * float(grid.cell_weights.min())
    adj = np.zeros((m, m), dtype=bool)
    coupling = -pack.secant_potential  # entries >= 0 where the system couples
    for i in range(m):
        for j in range(m):
            if i == j:
                continue
            mass = float(grid.cell_weights[coupling[i, j] > tol].sum())
            adj[i, j] = mass > weight_tol
    return strongly_connected(adj)
