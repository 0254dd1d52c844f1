"""Quadratic forms, symmetric spectra, Morse index and principal eigenvalues
of linearized operators -Lap + D(x) on the full domain or on caps.

The operator carries an m x m potential matrix D per node.  Its quadratic
form

    Q(Psi) = sum_n w_n [ Psi_n . (-Lap Psi)_n + Psi_n . D_n Psi_n ]

depends on D only through the symmetric part C = (D + D^t)/2, so the
variational spectrum of the self-adjoint surrogate -Lap + C ("symmetric
eigenvalues") controls the sign of Q.  The Morse index of a solution is the
number of negative symmetric eigenvalues of its linearization, where the
linearization of -Lap U = F(r, U) has D = -J_F(r, U).

For cooperative operators (off-diagonal D <= 0) the nodal matrix
T = A + D-blocks is a Z-matrix, and the principal eigenvalue (the smallest
eigenvalue admitting a positive eigenvector) is computed by inverse power
iteration on (T + sI)^{-1}.  The shift s is taken from a Gershgorin bound so
T + sI is strictly row-wise diagonally dominant, hence an M-matrix with a
nonnegative inverse; Collatz-Wielandt ratios of the iterates then bracket
the Perron root rigorously, and a second stage re-shifts just below the
converged bracket to squeeze it at a fast linear rate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fields import VectorField
from .grid import Grid, laplacian
from .solver import Solution


class SpectralError(Exception):
    pass


class NonConvergence(SpectralError):
    pass


class NotCooperative(SpectralError):
    pass


MORSE_K_CAP = 12


@dataclass
class LinearizedOperator:
    """-Lap + D(x) over m components on a grid."""

    grid: Grid
    potential: np.ndarray  # (m, m, n_nodes)
    _lap: sp.csr_matrix = field(default=None, repr=False)

    def __post_init__(self):
        self.potential = np.asarray(self.potential, dtype=float)
        if self.potential.ndim != 3 or self.potential.shape[0] != self.potential.shape[1]:
            raise ValueError("potential must have shape (m, m, n_nodes)")
        if self.potential.shape[2] != self.grid.n_nodes:
            raise ValueError("potential node count does not match grid")
        if self._lap is None:
            self._lap = laplacian(self.grid).matrix

    @property
    def m(self) -> int:
        return self.potential.shape[0]

    @property
    def sym_potential(self) -> np.ndarray:
        """C = (D + D^t)/2, exactly symmetric per node."""
        return 0.5 * (self.potential + self.potential.transpose(1, 0, 2))

    def mass(self) -> np.ndarray:
        return np.tile(self.grid.cell_weights, self.m)

    def nodal_matrix(self, sym: bool = False) -> sp.csr_matrix:
        """T = kron(I_m, A) + block(D): rows are the PDE, unweighted."""
        pot = self.sym_potential if sym else self.potential
        m, n = self.m, self.grid.n_nodes
        blocks = [[sp.diags(pot[i, j]) for j in range(m)] for i in range(m)]
        return (sp.kron(sp.identity(m, format="csr"), self._lap) +
                sp.bmat(blocks, format="csr")).tocsr()

    def form_matrix(self) -> sp.csr_matrix:
        """diag(mass) @ nodal_matrix(sym=True): entrywise symmetric."""
        return (sp.diags(self.mass()) @ self.nodal_matrix(sym=True)).tocsr()

    def dofs(self, region: np.ndarray | None) -> np.ndarray:
        """DOF indices of a node mask, tiled across components."""
        n = self.grid.n_nodes
        if region is None:
            return np.arange(self.m * n)
        nodes = np.flatnonzero(np.asarray(region, dtype=bool))
        return np.concatenate([nodes + c * n for c in range(self.m)])


def linearize(solution: Solution) -> LinearizedOperator:
    """Linearized operator along a solution: D = -J_F(r, U)."""
    grid = solution.grid
    jac = solution.problem.J(grid.node_r, solution.field.node_view())
    return LinearizedOperator(grid, -jac)


def quadratic_form(op: LinearizedOperator, psi: VectorField,
                   region: np.ndarray | None = None) -> float:
    """Q(psi) over a region; psi must vanish outside the region.

    The gradient part and the potential part are accumulated separately so
    that evaluating with D and with C = (D + D^t)/2 produces bit-comparable
    results (they differ only in the small potential term).
    """
    if psi.m != op.m or psi.grid is not op.grid and psi.grid.to_json() != op.grid.to_json():
        raise ValueError("field/operator mismatch")
    nodes = psi.node_view()
    if region is not None:
        outside = ~np.asarray(region, dtype=bool)
        if np.abs(nodes[:, outside]).max(initial=0.0) > 0.0:
            raise ValueError("field does not vanish outside the region")
    w = op.grid.cell_weights
    grad_part = float(sum(nodes[c] @ (w * (op._lap @ nodes[c])) for c in range(op.m)))
    pot_part = float(np.einsum("ijn,in,jn,n->", op.potential, nodes, nodes, w))
    return grad_part + pot_part


def _sym_standard(op: LinearizedOperator, region: np.ndarray | None):
    """Restricted symmetric matrix in the mass^{-1/2} similarity, plus scalings."""
    dofs = op.dofs(region)
    k_mat = op.form_matrix()[dofs][:, dofs]
    w = op.mass()[dofs]
    d = 1.0 / np.sqrt(w)
    k_std = (sp.diags(d) @ k_mat @ sp.diags(d)).tocsc()
    return k_std, dofs, w, d


def _sigma_floor(op: LinearizedOperator) -> float:
    """A strict lower bound for the first symmetric eigenvalue: the minimum
    nodal eigenvalue of C (the -Lap part is positive definite)."""
    c = np.ascontiguousarray(op.sym_potential.transpose(2, 0, 1))
    lam = np.linalg.eigvalsh(c)
    return float(min(0.0, lam.min()) - 1.0)


def symmetric_spectrum(op: LinearizedOperator, region: np.ndarray | None = None,
                       k: int = 6) -> tuple[np.ndarray, list[VectorField]]:
    """Lowest k symmetric eigenpairs on the region (zero-Dirichlet closure).

    Eigenfields are returned on the full grid, zero outside the region, and
    orthonormal in the cell-weight inner product.
    """
    if k < 1 or k > MORSE_K_CAP:
        raise ValueError(f"k must be in 1..{MORSE_K_CAP}")
    k_std, dofs, w, d = _sym_standard(op, region)
    dim = k_std.shape[0]
    if k >= dim:
        raise ValueError(f"k={k} too large for region dimension {dim}")
    if dim <= 600:
        vals_all, vecs_all = np.linalg.eigh(k_std.toarray())
        vals, vecs = vals_all[:k], vecs_all[:, :k]
    else:
        sigma = _sigma_floor(op)
        v0 = np.ones(dim)
        try:
            vals, vecs = spla.eigsh(k_std, k=k, sigma=sigma, which="LM", v0=v0)
        except spla.ArpackNoConvergence as exc:
            raise NonConvergence(f"eigensolver failed: {exc}") from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    fields = []
    full_dim = op.m * op.grid.n_nodes
    for idx in range(k):
        vec = vecs[:, idx] * d  # undo the mass scaling
        nrm = np.sqrt(np.sum(w * (vecs[:, idx] * d) ** 2))
        full = np.zeros(full_dim)
        full[dofs] = vec / nrm
        fields.append(VectorField.from_flat(op.grid, op.m, full))
    return vals, fields


@dataclass
class SpectralReport:
    region_label: str
    eigenvalues: np.ndarray
    eigenfields: list
    morse_index: int
    tol_eig: float
    inconclusive: bool = False
    ambiguous_value: float | None = None
    principal_eigenvalue: float | None = None
    principal_field: VectorField | None = None

    def to_json_dict(self) -> dict:
        return {
            "region": self.region_label,
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "morse_index": self.morse_index,
            "inconclusive": self.inconclusive,
            "ambiguous_value": self.ambiguous_value,
            "principal_eigenvalue": self.principal_eigenvalue,
            "tolerances": {"tol_eig": self.tol_eig},
        }


_LAM1_CACHE: dict[tuple, float] = {}


def grid_lambda1(grid: Grid) -> float:
    """First Dirichlet eigenvalue of -Lap on the grid (cached per grid spec)."""
    key = (grid.domain.kind.value, grid.domain.r_inner, grid.domain.r_outer,
           grid.nr, grid.ntheta)
    if key not in _LAM1_CACHE:
        zero = LinearizedOperator(grid, np.zeros((1, 1, grid.n_nodes)))
        vals, _ = symmetric_spectrum(zero, None, k=1)
        _LAM1_CACHE[key] = float(vals[0])
    return _LAM1_CACHE[key]


def default_tol_eig(grid: Grid) -> float:
    """Relative zero band for eigenvalue sign classification."""
    return 1e-6 * grid_lambda1(grid)


def spectral_report(solution: Solution, tol_eig: float | None = None,
                    region: np.ndarray | None = None,
                    with_principal: bool = True,
                    region_label: str = "full_domain") -> SpectralReport:
    """Morse data of the linearization along a solution.

    Grows the eigenvalue count until the top of the computed window clears
    +tol_eig (capped at 12); eigenvalues inside [-tol_eig, +tol_eig] mark the
    count as inconclusive and are reported with the worst offender.
    """
    op = linearize(solution)
    if tol_eig is None:
        tol_eig = default_tol_eig(solution.grid)
    dim = op.dofs(region).size
    k = min(6, dim - 1)
    while True:
        vals, fields = symmetric_spectrum(op, region, k=k)
        if vals[-1] > tol_eig or k >= min(MORSE_K_CAP, dim - 1):
            break
        k = min(MORSE_K_CAP, dim - 1, k + 4)
    morse = int(np.sum(vals < -tol_eig))
    in_band = np.abs(vals) <= tol_eig
    ambiguous = float(vals[np.argmin(np.abs(vals))]) if np.any(in_band) else None
    report = SpectralReport(region_label, vals, fields, morse, tol_eig,
                            inconclusive=bool(np.any(in_band)),
                            ambiguous_value=ambiguous)
    if with_principal:
        lam, psi = principal_eigenvalue(op, region)
        report.principal_eigenvalue = lam
        report.principal_field = psi
    return report


def morse_index(solution: Solution, tol_eig: float | None = None) -> int:
    """Count of symmetric eigenvalues below -tol_eig (see spectral_report)."""
    return spectral_report(solution, tol_eig, with_principal=False).morse_index


# ---------------------------------------------------------------------------
# principal eigenvalue of the (possibly) nonsymmetric cooperative operator


def _check_cooperative(op: LinearizedOperator, coop_tol: float):
    if op.m == 1:
        return
    off = op.potential[~np.eye(op.m, dtype=bool)]
    worst = float(off.max(initial=-np.inf))
    if worst > coop_tol:
        raise NotCooperative(
            f"off-diagonal potential entry {worst:.3e} > {coop_tol:.1e}; "
            "Perron structure not guaranteed")


def _cw_iterate(lu, x, shift, max_iter, rtol):
    """Collatz-Wielandt bracketing of the Perron eigenvalue via lu solves.

    Returns (lam_lo, lam_hi, x); lam = 1/rho - shift for rho the Perron root
    of the factored inverse.  The ratio test is restricted to entries that
    stay relatively large: on irreducible (fully coupled) regions that is all
    of them, while on decoupled regions the iterate drains out of the
    non-dominant blocks and their ratios never settle, even though the
    dominant ratios do (and the reported eigenvalue is still the smallest
    principal eigenvalue across blocks).
    """
    lam_lo = lam_hi = None
    for _ in range(max_iter):
        y = lu.solve(x)
        if not np.all(np.isfinite(y)):
            raise NonConvergence("inverse iteration produced non-finite values")
        sel = x > 1e-13 * x.max()
        ratios = y[sel] / x[sel]
        rho_lo, rho_hi = float(ratios.min()), float(ratios.max())
        if rho_lo <= 0:
            raise NonConvergence("iterate lost positivity")
        lam_lo, lam_hi = 1.0 / rho_hi - shift, 1.0 / rho_lo - shift
        x = y / np.linalg.norm(y)
        np.maximum(x, 0.0, out=x)
        if lam_hi - lam_lo <= rtol * max(1.0, abs(lam_lo)):
            break
    return lam_lo, lam_hi, x


def principal_eigenvalue(op: LinearizedOperator, region: np.ndarray | None = None,
                         tol: float = 1e-10, coop_tol: float = 1e-10,
                         max_iter: int = 400) -> tuple[float, VectorField]:
    """Perron pair of the cooperative operator restricted to a region.

    Two-stage inverse power iteration: a Gershgorin shift certifies the
    M-matrix structure, Collatz-Wielandt ratios bracket the eigenvalue, and
    once the bracket is rough the shift is moved just below its lower edge,
    which makes the remaining contraction rate tiny.  The eigenfield is
    normalized positive with unit weighted norm.
    """
    _check_cooperative(op, coop_tol)
    dofs = op.dofs(region)
    t_mat = op.nodal_matrix(sym=False)[dofs][:, dofs].tocsr()
    n = t_mat.shape[0]
    diag = t_mat.diagonal()
    row_abs = np.asarray(np.abs(t_mat).sum(axis=1)).ravel() - np.abs(diag)
    shift = 1.0 + max(0.0, float((row_abs - diag).max()))

    lu = spla.splu((t_mat + shift * sp.identity(n, format="csr")).tocsc())
    x = np.full(n, 1.0 / np.sqrt(n))
    lam_lo, lam_hi, x = _cw_iterate(lu, x, shift, max_iter, rtol=1e-4)

    for _ in range(4):
        width = lam_hi - lam_lo
        if width <= tol * max(1.0, abs(lam_lo)):
            break
        # re-shift just below the certified lower edge: still an M-matrix
        shift2 = -(lam_lo - max(10 * tol, 1e-3 * width))
        lu2 = spla.splu((t_mat + shift2 * sp.identity(n, format="csr")).tocsc())
        lam_lo, lam_hi, x = _cw_iterate(lu2, x, shift2, max_iter, rtol=tol)
    else:
        width = lam_hi - lam_lo
        if width > 1e3 * tol * max(1.0, abs(lam_lo)):
            raise NonConvergence(
                f"principal eigenvalue bracket stuck at width {width:.3e}")

    lam = 0.5 * (lam_lo + lam_hi)
    full = np.zeros(op.m * op.grid.n_nodes)
    w = op.mass()[dofs]
    full[dofs] = x / np.sqrt(np.sum(w * x * x))
    return lam, VectorField.from_flat(op.grid, op.m, full)


# ---------------------------------------------------------------------------
# maximum principle probe


@dataclass
class MaxPrincipleReport:
    trials: int
    passes: int
    worst_positive: float
    lambda1_sym: float
    principal: float | None
    predicted_hold: bool

    @property
    def all_pass(self) -> bool:
        return self.passes == self.trials

    def to_json_dict(self) -> dict:
        return {
            "trials": self.trials,
            "passes": self.passes,
            "worst_positive": self.worst_positive,
            "lambda1_sym": self.lambda1_sym,
            "principal_eigenvalue": self.principal,
            "predicted_hold": self.predicted_hold,
        }


def maximum_principle_probe(op: LinearizedOperator, region: np.ndarray | None = None,
                            trials: int = 100, tol: float = 1e-9,
                            rng: np.random.Generator | None = None,
                            coop_tol: float = 1e-10) -> MaxPrincipleReport:
    """Empirical weak maximum principle check on a region.

    Solves (-Lap + D) U = G for random componentwise-nonpositive G with zero
    boundary data and counts trials with U <= tol everywhere.  The verdict is
    cross-checked against the signs of the first symmetric eigenvalue and of
    the principal eigenvalue (positivity of either predicts that every trial
    passes; for the principal eigenvalue it is an exact characterization).
    """
    _check_cooperative(op, coop_tol)
    if rng is None:
        rng = np.random.default_rng(0)
    dofs = op.dofs(region)
    t_mat = op.nodal_matrix(sym=False)[dofs][:, dofs].tocsc()
    try:
        lu = spla.splu(t_mat)
    except RuntimeError as exc:
        raise SpectralError(f"probe linear solve failed: {exc}") from exc

    worst = -np.inf
    passes = 0
    for _ in range(trials):
        g = -rng.uniform(0.0, 1.0, size=dofs.size)
        u = lu.solve(g)
        top = float(u.max())
        worst = max(worst, top)
        if top <= tol:
            passes += 1

    vals, _ = symmetric_spectrum(op, region, k=1)
    lam_sym = float(vals[0])
    principal = None
    try:
        principal, _ = principal_eigenvalue(op, region)
    except SpectralError:
        pass
    predicted = lam_sym > 0 or (principal is not None and principal > 0)
    return MaxPrincipleReport(trials, passes, worst, lam_sym, principal, predicted)
