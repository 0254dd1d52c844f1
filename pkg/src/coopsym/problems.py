"""Catalog of nonlinearities F(r, U) for -Lap U = F(r, U).

A Problem bundles vectorized evaluation of F and of its Jacobian J_F with
structural metadata:

  cooperative      off-diagonal Jacobian entries are >= 0 everywhere
  gradient_type    J_F is symmetric (F is a gradient in U)
  hamiltonian_type m = 2 and F = (dH/du2, dH/du1) for a scalar H
  convex_derivatives  every entry of J_F is convex in U (midpoint-checked
                      at construction on random samples, not trusted)
  radial_weight    F carries an explicit |x| dependence

Built-in problems: "power" (odd power cross-coupling), "lane_emden"
(scalar odd power), "henon" (power cross-coupling with radial weights) and
"linear_constant" (F = -A U, for testing).

Evaluation conventions: r is scalar or (...,) array, U has shape (m, ...);
eval_F returns (m, ...), eval_J returns (m, m, ...).  The derivative of
|s|^(p-1) s is p |s|^(p-1), with 0^0 = 1 at p = 1 so the slope stays 1 for
the identity map; for p > 1 the derivative vanishes at s = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

TAGS = {"cooperative", "gradient_type", "hamiltonian_type", "convex_derivatives", "radial_weight"}


@dataclass(frozen=True)
class Problem:
    name: str
    m: int
    eval_F: Callable[[np.ndarray, np.ndarray], np.ndarray] = field(repr=False)
    eval_J: Callable[[np.ndarray, np.ndarray], np.ndarray] = field(repr=False)
    params: dict = field(default_factory=dict)
    tags: frozenset = frozenset()

    def F(self, r, U) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        U = np.asarray(U, dtype=float)
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(U))):
            raise ValueError("non-finite input to F")
        return self.eval_F(r, U)

    def J(self, r, U) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        U = np.asarray(U, dtype=float)
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(U))):
            raise ValueError("non-finite input to J")
        return self.eval_J(r, U)

    def to_json_dict(self) -> dict:
        return {"name": self.name, "params": dict(self.params)}


def _odd_power(u: np.ndarray, p: float) -> np.ndarray:
    return np.abs(u) ** (p - 1.0) * u


def _odd_power_slope(u: np.ndarray, p: float) -> np.ndarray:
    # p |u|^(p-1); numpy yields 0**0 == 1, which is the wanted p = 1 limit
    return p * np.abs(u) ** (p - 1.0)


def power_system(p: float, q: float) -> Problem:
    """f1 = |u2|^(p-1) u2, f2 = |u1|^(q-1) u1  (anti-diagonal Jacobian)."""
    if p < 1 or q < 1:
        raise ValueError("need p, q >= 1")

    def F(r, U):
        return np.stack([_odd_power(U[1], p), _odd_power(U[0], q)])

    def J(r, U):
        z = np.zeros_like(U[0])
        return np.stack([
            np.stack([z, _odd_power_slope(U[1], p)]),
            np.stack([_odd_power_slope(U[0], q), z]),
        ])

    tags = {"cooperative", "hamiltonian_type"}
    if p >= 2 and q >= 2:
        tags.add("convex_derivatives")
    return Problem("power", 2, F, J, {"p": p, "q": q}, frozenset(tags))


def scalar_lane_emden(p: float) -> Problem:
    """Scalar odd power: f = |z|^(p-1) z."""
    if p < 1:
        raise ValueError("need p >= 1")

    def F(r, U):
        return np.stack([_odd_power(U[0], p)])

    def J(r, U):
        return _odd_power_slope(U[0], p)[np.newaxis, np.newaxis]

    tags = {"cooperative", "gradient_type"}
    if p >= 2:
        tags.add("convex_derivatives")
    return Problem("lane_emden", 1, F, J, {"p": p}, frozenset(tags))


def henon_system(p: float, q: float, alpha: float, beta: float) -> Problem:
    """f1 = r^alpha |u2|^(p-1) u2, f2 = r^beta |u1|^(q-1) u1."""
    if p < 1 or q < 1:
        raise ValueError("need p, q >= 1")
    if alpha < 0 or beta < 0:
        raise ValueError("need alpha, beta >= 0")

    def F(r, U):
        return np.stack([
            r ** alpha * _odd_power(U[1], p),
            r ** beta * _odd_power(U[0], q),
        ])

    def J(r, U):
        z = np.zeros_like(U[0])
        return np.stack([
            np.stack([z, r ** alpha * _odd_power_slope(U[1], p)]),
            np.stack([r ** beta * _odd_power_slope(U[0], q), z]),
        ])

    tags = {"cooperative", "hamiltonian_type", "radial_weight"}
    if p >= 2 and q >= 2:
        tags.add("convex_derivatives")
    return Problem("henon", 2, F, J, {"p": p, "q": q, "alpha": alpha, "beta": beta},
                   frozenset(tags))


def linear_constant(a: np.ndarray) -> Problem:
    """F = -A U for a constant m x m matrix A; the linearization is exactly -A."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.shape[0] != a.shape[1]:
        raise ValueError("A must be square")
    m = a.shape[0]

    def F(r, U):
        return np.einsum("ij,j...->i...", -a, U)

    def J(r, U):
        shape = (m, m) + U.shape[1:]
        out = np.empty(shape)
        out[...] = (-a).reshape((m, m) + (1,) * (U.ndim - 1))
        return out

    tags = {"convex_derivatives"}
    if np.all(a[~np.eye(m, dtype=bool)] <= 0):
        tags.add("cooperative")
    if np.allclose(a, a.T):
        tags.add("gradient_type")
    return Problem("linear_constant", m, F, J, {"matrix": a.tolist()}, frozenset(tags))


def verify_jacobian(problem: Problem, rng: np.random.Generator,
                    samples: int = 20, h: float = 1e-6) -> float:
    """Worst relative error of eval_J against a central finite difference of eval_F.

    Sample points keep |U| in [0.5, 2] so the relative scale is meaningful for
    the non-Lipschitz power nonlinearities.
    """
    worst = 0.0
    for _ in range(samples):
        r = rng.uniform(0.2, 1.0)
        u = rng.uniform(0.5, 2.0, size=problem.m) * rng.choice([-1.0, 1.0], size=problem.m)
        jac = problem.J(np.asarray(r), u)
        fd = np.zeros_like(jac)
        for j in range(problem.m):
            up, um = u.copy(), u.copy()
            up[j] += h
            um[j] -= h
            fd[:, j] = (problem.F(np.asarray(r), up) - problem.F(np.asarray(r), um)) / (2 * h)
        scale = max(1.0, np.abs(jac).max())
        worst = max(worst, float(np.abs(fd - jac).max() / scale))
    return worst


def verify_convex_derivatives(problem: Problem, rng: np.random.Generator,
                              samples: int = 1000, tol: float = 1e-12) -> float:
    """Worst midpoint-convexity violation of the Jacobian entries.

    Checks J((S' + S'')/2) <= (J(S') + J(S''))/2 entrywise at random sample
    pairs; returns the largest positive violation (0 means the check passed).
    """
    worst = 0.0
    for _ in range(samples):
        r = np.asarray(rng.uniform(0.1, 2.0))
        s1 = rng.uniform(-3.0, 3.0, size=problem.m)
        s2 = rng.uniform(-3.0, 3.0, size=problem.m)
        mid = problem.J(r, (s1 + s2) / 2.0)
        avg = (problem.J(r, s1) + problem.J(r, s2)) / 2.0
        worst = max(worst, float((mid - avg).max()))
    return max(0.0, worst - tol)


_BUILDERS = {
    "power": lambda params: power_system(float(params["p"]), float(params["q"])),
    "lane_emden": lambda params: scalar_lane_emden(float(params["p"])),
    "henon": lambda params: henon_system(
        float(params["p"]), float(params["q"]),
        float(params["alpha"]), float(params["beta"])),
    "linear_constant": lambda params: linear_constant(np.asarray(params["matrix"], dtype=float)),
}


def catalog_names() -> list[str]:
    return sorted(_BUILDERS)


def make_problem(name: str, validate: bool = True, **params) -> Problem:
    """Instantiate a catalog problem by name.

    When validate is set, a declared convex_derivatives tag is re-checked by
    randomized midpoint sampling before the problem is handed out; a failure
    raises instead of silently reporting symmetry verdicts under a wrong
    hypothesis.
    """
    if name not in _BUILDERS:
        raise KeyError(f"unknown problem {name!r}; have {catalog_names()}")
    problem = _BUILDERS[name](params)
    if validate and "convex_derivatives" in problem.tags:
        rng = np.random.default_rng(20260810)
        violation = verify_convex_derivatives(problem, rng)
        if violation > 0:
            raise ValueError(
                f"problem {name!r} declares convex_derivatives but midpoint "
                f"sampling found a violation of {violation:.3e}")
    return problem
