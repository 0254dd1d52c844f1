"""Vector-valued grid functions (solutions, differences, eigenfields).

A VectorField stores m component samples over the nodes of a Grid as an
array of shape (m, nr, ntheta).  Flattening that array in C order gives the
canonical DOF layout used by every operator in this package:
component-major, then radial-major, then angular.

Dirichlet boundary data lives on cell faces, not on nodes, so every node is
an interior unknown and any finite field is boundary-compatible; fields are
understood to extend by zero outside the domain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid


@dataclass
class VectorField:
    grid: Grid
    values: np.ndarray  # shape (m, nr, ntheta)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim == 2:
            self.values = self.values[np.newaxis]
        expect = (self.grid.nr, self.grid.ntheta)
        if self.values.ndim != 3 or self.values.shape[1:] != expect:
            raise ValueError(f"values must have shape (m, {expect[0]}, {expect[1]})")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @staticmethod
    def zeros(grid: Grid, m: int) -> "VectorField":
        return VectorField(grid, np.zeros((m, grid.nr, grid.ntheta)))

    @staticmethod
    def from_flat(grid: Grid, m: int, flat: np.ndarray) -> "VectorField":
        return VectorField(grid, np.asarray(flat, dtype=float).reshape(m, grid.nr, grid.ntheta))

    def flat(self) -> np.ndarray:
        """DOF vector, length m * nr * ntheta (component-major)."""
        return self.values.reshape(-1)

    def node_view(self) -> np.ndarray:
        """Shape (m, n_nodes) view of the values."""
        return self.values.reshape(self.m, -1)

    def copy(self) -> "VectorField":
        return VectorField(self.grid, self.values.copy())

    def permute_nodes(self, perm: np.ndarray) -> "VectorField":
        """Compose with a node permutation, e.g. a reflection map."""
        nodes = self.node_view()[:, perm]
        return VectorField(self.grid, nodes.reshape(self.values.shape))

    def max_norm(self) -> float:
        return float(np.abs(self.values).max())

    def weighted_l2_sq(self) -> float:
        """Squared norm in the cell-weight inner product, summed over components."""
        w = self.grid.cell_weights
        nodes = self.node_view()
        return float(np.sum(nodes * nodes * w[np.newaxis, :]))

    def weighted_dot(self, other: "VectorField") -> float:
        w = self.grid.cell_weights
        return float(np.sum(self.node_view() * other.node_view() * w[np.newaxis, :]))

    def angular_variation(self) -> float:
        """Max over components and radii of (max - min) over the angle."""
        v = self.values
        return float((v.max(axis=2) - v.min(axis=2)).max())

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.grid, self.values + other.values)

    def __sub__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.grid, self.values - other.values)

    def __mul__(self, scalar: float) -> "VectorField":
        return VectorField(self.grid, self.values * scalar)

    __rmul__ = __mul__
