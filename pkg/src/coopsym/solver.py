"""Damped-Newton solver for -Lap U = F(r, U) plus an independent radial
shooting oracle.

Newton iterates solve (A - diag-block J_F(U_k)) delta = -(A U_k - F(U_k))
with a sparse direct factorization and Armijo backtracking (halving) on the
max-norm residual.  The strong-form residual A U - F cannot be driven below
the float64 rounding floor of the matrix-vector product, which near the disk
center scales like eps * max-row-sum(A) * |U|; the iteration therefore
accepts once the residual is either below the requested tolerance or
provably at that floor and no damping step improves it.

The shooting oracle integrates the radial ODE  u'' + u'/r + F(r, u) = 0
(two space dimensions) with a high-order explicit integrator, scanning and
bisecting the free initial value until the outer boundary value vanishes.
It is deliberately independent of the grid discretization: no shared
stencils, no shared linear algebra.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .fields import VectorField
from .grid import Domain, DomainKind, Grid, laplacian
from .problems import Problem


class SolverError(Exception):
    pass


class MaxItersExceeded(SolverError):
    pass


class SingularJacobian(SolverError):
    pass


class BracketNotFound(SolverError):
    pass


@dataclass(frozen=True)
class NewtonOptions:
    tol: float = 1e-10
    max_iters: int = 50
    armijo_factor: float = 0.5
    armijo_slope: float = 1e-4
    max_damping: int = 30
    # multiples of eps * max-row-sum * scale(U) accepted as the rounding floor
    floor_factor: float = 8.0


@dataclass
class Solution:
    field: VectorField
    problem: Problem
    residual_inf: float
    newton_iters: int
    guess_label: str = ""
    diverged_to_zero: bool = False

    @property
    def grid(self) -> Grid:
        return self.field.grid


@dataclass
class RadialProfile:
    problem: Problem
    domain: Domain
    radii: np.ndarray
    values: np.ndarray  # (m, len(radii))
    derivatives: np.ndarray  # (m, len(radii))
    center_value: float  # free parameter found by the bisection
    boundary_miss: float
    sign_pattern: str
    _spline: object = field(default=None, repr=False)

    def interpolate(self, r: np.ndarray) -> np.ndarray:
        """Component values at arbitrary radii inside the domain, shape (m, len(r))."""
        return self._spline(np.asarray(r, dtype=float))


def block_potential(J: np.ndarray) -> sp.csr_matrix:
    """Sparse (m n x m n) matrix of per-node couplings from a (m, m, n) stack."""
    m, _, n = J.shape
    if m == 1:
        return sp.diags(J[0, 0]).tocsr()
    rows = []
    for i in range(m):
        rows.append([sp.diags(J[i, j]) for j in range(m)])
    return sp.bmat(rows, format="csr")


def residual_vector(problem: Problem, grid: Grid, a: sp.csr_matrix, u_nodes: np.ndarray) -> np.ndarray:
    """A U - F(r, U) over all nodes, shape (m, n_nodes)."""
    f = problem.F(grid.node_r, u_nodes)
    return np.stack([a @ u_nodes[c] for c in range(problem.m)]) - f


def newton_solve(problem: Problem, grid: Grid, initial: VectorField,
                 opts: NewtonOptions = NewtonOptions(),
                 guess_label: str = "") -> Solution:
    """Damped Newton from an initial field; raises on stall or singular solve."""
    if initial.m != problem.m:
        raise ValueError("initial field component count does not match problem")
    a = laplacian(grid).matrix
    m, n = problem.m, grid.n_nodes
    a_rowsum = np.abs(a).sum(axis=1).max()
    u = initial.node_view().copy()

    resid = residual_vector(problem, grid, a, u)
    rnorm = float(np.abs(resid).max())
    eps = np.finfo(float).eps

    for it in range(opts.max_iters):
        floor = opts.floor_factor * eps * a_rowsum * max(1.0, float(np.abs(u).max()))
        if rnorm <= max(opts.tol, floor):
            return _accept(problem, grid, u, rnorm, it, guess_label)
        jac = problem.J(grid.node_r, u)
        newton_mat = (sp.kron(sp.identity(m, format="csr"), a) - block_potential(jac)).tocsc()
        try:
            lu = spla.splu(newton_mat)
        except RuntimeError as exc:
            raise SingularJacobian(f"linear solve failed at iteration {it}: {exc}") from exc
        delta = lu.solve(-resid.reshape(-1))
        if not np.all(np.isfinite(delta)):
            raise SingularJacobian(f"non-finite Newton step at iteration {it}")
        delta = delta.reshape(m, n)

        alpha = 1.0
        improved = False
        for _ in range(opts.max_damping):
            u_try = u + alpha * delta
            resid_try = residual_vector(problem, grid, a, u_try)
            rnorm_try = float(np.abs(resid_try).max())
            if rnorm_try <= (1.0 - opts.armijo_slope * alpha) * rnorm:
                improved = True
                break
            alpha *= opts.armijo_factor
        if not improved:
            # stalled: legitimate only at the rounding floor of the residual
            if rnorm <= floor:
                return _accept(problem, grid, u, rnorm, it, guess_label)
            raise MaxItersExceeded(
                f"damping stalled at residual {rnorm:.3e} (floor {floor:.3e})")
        u, resid, rnorm = u_try, resid_try, rnorm_try

    floor = opts.floor_factor * eps * a_rowsum * max(1.0, float(np.abs(u).max()))
    if rnorm <= max(opts.tol, floor):
        return _accept(problem, grid, u, rnorm, opts.max_iters, guess_label)
    raise MaxItersExceeded(f"no convergence in {opts.max_iters} iterations "
                           f"(residual {rnorm:.3e})")


def _accept(problem, grid, u_nodes, rnorm, iters, guess_label) -> Solution:
    fld = VectorField(grid, u_nodes.reshape(problem.m, grid.nr, grid.ntheta).copy())
    trivial = fld.max_norm() < 1e-10
    return Solution(fld, problem, rnorm, iters, guess_label, diverged_to_zero=trivial)


# ---------------------------------------------------------------------------
# radial shooting oracle


def _integrate_radial(problem: Problem, domain: Domain, start_value: float,
                      rtol: float = 1e-12, atol: float = 1e-14):
    """Integrate the radial ODE with swap-symmetric initial data.

    Disk: U(0) = a * ones, U'(0) = 0, with the r -> 0 limit U'' = -F/2.
    Annulus: U(r_inner) = 0, U'(r_inner) = a * ones.
    """
    m = problem.m

    def rhs(r, y):
        u, v = y[:m], y[m:]
        f = problem.F(np.asarray(r), u)
        if r < 1e-12:
            acc = -f / 2.0
        else:
            acc = -v / r - f
        return np.concatenate([v, acc])

    if domain.kind is DomainKind.DISK:
        r0 = 1e-10 * domain.r_outer
        u0 = np.full(m, start_value)
        v0 = -problem.F(np.asarray(0.0), u0) * r0 / 2.0
    else:
        r0 = domain.r_inner
        u0 = np.zeros(m)
        v0 = np.full(m, start_value)
    y0 = np.concatenate([u0, v0])
    return solve_ivp(rhs, [r0, domain.r_outer], y0, method="DOP853",
                     rtol=rtol, atol=atol, dense_output=True)


def radial_shoot(problem: Problem, domain: Domain, sign_pattern: str = "positive",
                 scan_range: tuple[float, float] = (1e-2, 1e3),
                 scan_points: int = 80,
                 boundary_tol: float = 1e-10) -> RadialProfile:
    """Find a radial profile hitting zero at r_outer by scan + bisection.

    sign_pattern 'positive' targets the first sign change of the boundary
    miss function a -> u_1(r_outer; a) over the scan range; 'one-node'
    targets the second, which carries exactly one interior sign change.
    Swap-symmetric start data means systems are only covered when they keep
    components equal along the flow (e.g. equal exponents); the boundary
    check below rejects anything else.
    """
    if sign_pattern not in ("positive", "one-node"):
        raise ValueError("sign_pattern must be 'positive' or 'one-node'")

    def miss(a):
        return _integrate_radial(problem, domain, a).y[0, -1]

    avals = np.geomspace(scan_range[0], scan_range[1], scan_points)
    misses = [miss(a) for a in avals]
    brackets = [(avals[i], avals[i + 1]) for i in range(len(avals) - 1)
                if misses[i] * misses[i + 1] < 0 or misses[i + 1] == 0.0]
    want = 0 if sign_pattern == "positive" else 1

    if not brackets:
        # a miss map that is linear in the start value (checked at two
        # points) has the trivial profile as its only root: report that,
        # but only for the nodeless pattern
        m1, m2 = misses[0], miss(2.0 * avals[0])
        linear = abs(m2 - 2.0 * m1) <= 1e-6 * max(abs(m1), abs(m2), 1e-300)
        if linear and sign_pattern == "positive" and abs(miss(0.0)) <= boundary_tol:
            return _profile_from(problem, domain, 0.0, sign_pattern, boundary_tol)
        raise BracketNotFound(
            f"no sign change of the boundary miss in {scan_range} "
            f"({scan_points} samples)")
    if len(brackets) <= want:
        raise BracketNotFound(
            f"wanted bracket #{want + 1} for {sign_pattern!r} but found "
            f"{len(brackets)} in {scan_range}")

    lo, hi = brackets[want]
    a_star = brentq(miss, lo, hi, xtol=1e-14, rtol=8.9e-16)
    return _profile_from(problem, domain, a_star, sign_pattern, boundary_tol)


def _profile_from(problem, domain, a_star, sign_pattern, boundary_tol) -> RadialProfile:
    sol = _integrate_radial(problem, domain, a_star)
    m = problem.m
    boundary = sol.y[:m, -1]
    if np.abs(boundary).max() > boundary_tol:
        raise BracketNotFound(
            f"bisection converged in the first component but the profile "
            f"misses the boundary by {np.abs(boundary).max():.3e} "
            f"(system without swap symmetry?)")
    rr = np.linspace(sol.t[0], sol.t[-1], 2049)
    yy = sol.sol(rr)
    values, derivs = yy[:m], yy[m:]

    # enforce the requested nodal structure
    u0 = values[0]
    interior = np.abs(u0) > 1e-8 * max(1.0, np.abs(u0).max())
    signs = np.sign(u0[interior])
    changes = int(np.sum(np.diff(signs) != 0)) if signs.size else 0
    want = 0 if sign_pattern == "positive" else 1
    if a_star != 0.0 and changes != want:
        raise BracketNotFound(
            f"profile has {changes} interior sign changes, wanted {want}")

    spline = sol.sol

    def eval_values(r):
        return spline(np.asarray(r, dtype=float))[:m]

    return RadialProfile(problem, domain, rr, values, derivs, float(a_star),
                         float(np.abs(boundary).max()), sign_pattern,
                         _spline=eval_values)


# ---------------------------------------------------------------------------
# initial guesses

GUESS_KINDS = ("radial_bump", "nodal_angular", "from_radial_profile", "random_seeded")


def _radial_envelope(grid: Grid) -> np.ndarray:
    """Smooth positive profile vanishing at the Dirichlet boundary faces."""
    r = grid.node_r
    d = grid.domain
    if d.kind is DomainKind.DISK:
        return np.cos(0.5 * np.pi * r / d.r_outer)
    return np.sin(np.pi * (r - d.r_inner) / (d.r_outer - d.r_inner))


def initial_guess(grid: Grid, kind: str, amplitude: float, m: int = 1,
                  profile: RadialProfile | None = None,
                  seed: int = 0) -> VectorField:
    """Structured starting fields for the Newton solver.

    radial_bump          amplitude * envelope(r), identical components
    nodal_angular        amplitude * envelope(r) * (r/r_outer) * cos(theta)
    from_radial_profile  profile interpolated onto the radial nodes
    random_seeded        amplitude * envelope(r) * N(0,1) noise, seeded
    """
    if kind not in GUESS_KINDS:
        raise ValueError(f"unknown guess kind {kind!r}; have {GUESS_KINDS}")
    n = grid.n_nodes
    env = _radial_envelope(grid)
    if kind == "radial_bump":
        nodes = np.tile(amplitude * env, (m, 1))
    elif kind == "nodal_angular":
        rel_r = grid.node_r / grid.domain.r_outer
        nodes = np.tile(amplitude * env * rel_r * np.cos(grid.node_theta), (m, 1))
    elif kind == "from_radial_profile":
        if profile is None:
            raise ValueError("from_radial_profile needs a RadialProfile")
        vals = profile.interpolate(grid.r_nodes)  # (m_profile, nr)
        if vals.shape[0] not in (m, 1):
            raise ValueError("profile component count does not match m")
        if vals.shape[0] == 1 and m > 1:
            vals = np.tile(vals, (m, 1))
        nodes = amplitude * np.repeat(vals, grid.ntheta, axis=1)
    else:  # random_seeded
        rng = np.random.default_rng(seed)
        nodes = amplitude * env[np.newaxis, :] * rng.standard_normal((m, n))
    return VectorField(grid, nodes.reshape(m, grid.nr, grid.ntheta))
