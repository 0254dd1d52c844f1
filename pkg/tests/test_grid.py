import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import jn_zeros

from coopsym.fields import VectorField
from coopsym.grid import (Direction, Domain, DomainKind, build_grid, cap_mask,
                          laplacian, reflect_map, restrict_operator,
                          weighted_form_matrix)

J01_SQ = jn_zeros(0, 1)[0] ** 2  # 5.7831859...
J11_SQ = jn_zeros(1, 1)[0] ** 2  # 14.681970...


def lowest_eig(k_mat, weights, k=1):
    d = 1.0 / np.sqrt(weights)
    std = (sp.diags(d) @ k_mat @ sp.diags(d)).tocsc()
    if std.shape[0] <= 400:
        return np.sort(np.linalg.eigvalsh(std.toarray()))[:k]
    v0 = np.ones(std.shape[0])
    vals = spla.eigsh(std, k=k, sigma=-1.0, which="LM", v0=v0,
                      return_eigenvectors=False)
    return np.sort(vals)


def disk_lambda1(nr, ntheta):
    grid = build_grid(Domain.disk(1.0), nr, ntheta)
    k_mat = weighted_form_matrix(grid, laplacian(grid))
    return lowest_eig(k_mat, grid.cell_weights)[0]


class TestBuildGrid:
    def test_disk_nodes(self):
        grid = build_grid(Domain.disk(1.0), 4, 8)
        # first two cell centers of an nr=2 refinement pattern
        grid2 = build_grid(Domain.disk(1.0), 4, 8)
        assert np.allclose(grid2.r_nodes[:2], [0.125, 0.375])
        assert grid.dtheta == pytest.approx(np.pi / 4)

    def test_disk_nr2_documented_values(self):
        # nr=2 is below the validity floor; the same arithmetic at nr=4
        # halves the spacing, so check the cell-centered rule directly
        dom = Domain.disk(1.0)
        dr = (dom.r_outer - dom.r_inner) / 2
        r_nodes = dom.r_inner + (np.arange(2) + 0.5) * dr
        assert np.allclose(r_nodes, [0.25, 0.75])

    def test_annulus_nodes(self):
        grid = build_grid(Domain.annulus(1.0, 2.0), 4, 8)
        assert np.allclose(grid.r_nodes, [1.125, 1.375, 1.625, 1.875])

    def test_area_is_exact(self):
        grid = build_grid(Domain.disk(1.0), 64, 128)
        assert grid.cell_weights.sum() == pytest.approx(np.pi, rel=1e-3)
        annulus = build_grid(Domain.annulus(1.0, 2.0), 16, 32)
        assert annulus.cell_weights.sum() == pytest.approx(3 * np.pi, rel=1e-12)

    def test_rejects_bad_ntheta(self):
        with pytest.raises(ValueError):
            build_grid(Domain.disk(1.0), 8, 18)
        with pytest.raises(ValueError):
            build_grid(Domain.disk(1.0), 8, 4)

    def test_rejects_degenerate_domain(self):
        with pytest.raises(ValueError):
            Domain(DomainKind.ANNULUS, 2.0, 1.0)
        with pytest.raises(ValueError):
            Domain(DomainKind.DISK, 0.5, 1.0)

    def test_grid_json_roundtrip(self):
        grid = build_grid(Domain.annulus(0.5, 2.5), 8, 16)
        from coopsym.grid import Grid
        clone = Grid.from_json_dict(grid.to_json_dict())
        assert np.array_equal(clone.r_nodes, grid.r_nodes)
        assert clone.domain == grid.domain


class TestLaplacian:
    def test_constant_annulus_interior(self, annulus_small):
        a = laplacian(annulus_small).matrix
        resid = a @ np.ones(annulus_small.n_nodes)
        interior = np.ones(annulus_small.n_nodes, dtype=bool)
        interior[: annulus_small.ntheta] = False  # inner Dirichlet ring
        interior[-annulus_small.ntheta:] = False  # outer Dirichlet ring
        assert np.abs(resid[interior]).max() < 1e-12 * np.abs(a.diagonal()).max()
        # boundary rows feel the Dirichlet ghost
        assert np.abs(resid[~interior]).min() > 0

    def test_constant_disk_interior(self, disk_small):
        a = laplacian(disk_small).matrix
        resid = a @ np.ones(disk_small.n_nodes)
        interior = np.ones(disk_small.n_nodes, dtype=bool)
        interior[-disk_small.ntheta:] = False
        assert np.abs(resid[interior]).max() < 1e-12 * np.abs(a.diagonal()).max()

    def test_weighted_symmetry(self, disk_small, annulus_small):
        for grid in (disk_small, annulus_small):
            k_mat = weighted_form_matrix(grid, laplacian(grid))
            assert abs(k_mat - k_mat.T).max() < 1e-14 * abs(k_mat).max()

    def test_disk_lambda1_vs_bessel(self):
        lam = disk_lambda1(64, 128)
        assert lam == pytest.approx(J01_SQ, rel=0.01)

    def test_halfdisk_lambda1_vs_bessel(self):
        grid = build_grid(Domain.disk(1.0), 64, 128)
        k_mat = weighted_form_matrix(grid, laplacian(grid))
        mask = cap_mask(grid, Direction(0, grid.ntheta))
        dofs = np.flatnonzero(mask)
        lam = lowest_eig(restrict_operator(k_mat, dofs), grid.cell_weights[dofs])[0]
        assert lam == pytest.approx(J11_SQ, rel=0.015)

    def test_refinement_reduces_error(self):
        err_coarse = abs(disk_lambda1(32, 64) - J01_SQ)
        err_fine = abs(disk_lambda1(64, 128) - J01_SQ)
        assert err_coarse / err_fine >= 3.0


class TestReflect:
    def test_xaxis_formula(self, disk_small):
        grid = disk_small
        perm = reflect_map(grid, Direction(0, grid.ntheta))
        theta = grid.node_theta
        reflected_theta = theta[perm]
        expect = np.pi - theta
        d = np.mod(reflected_theta - expect, 2 * np.pi)
        assert np.allclose(np.minimum(d, 2 * np.pi - d), 0.0)

    @given(k=st.integers(min_value=0, max_value=15))
    @settings(max_examples=16, deadline=None)
    def test_involution(self, k):
        grid = build_grid(Domain.disk(1.0), 4, 16)
        perm = reflect_map(grid, Direction(k, 16))
        assert np.array_equal(perm[perm], np.arange(grid.n_nodes))

    @given(k=st.integers(min_value=0, max_value=15))
    @settings(max_examples=16, deadline=None)
    def test_radius_invariant(self, k):
        grid = build_grid(Domain.disk(1.0), 4, 16)
        perm = reflect_map(grid, Direction(k, 16))
        assert np.array_equal(grid.node_r[perm], grid.node_r)

    def test_radial_field_invariant(self, disk_small, rng):
        vals = np.repeat(rng.standard_normal(disk_small.nr), disk_small.ntheta)
        for k in range(disk_small.ntheta):
            perm = reflect_map(disk_small, Direction(k, disk_small.ntheta))
            assert np.array_equal(vals[perm], vals)

    def test_fixes_exactly_hyperplane_nodes(self, disk_small):
        grid = disk_small
        for k in (0, 3, 7):
            perm = reflect_map(grid, Direction(k, grid.ntheta))
            fixed = perm == np.arange(grid.n_nodes)
            e = Direction(k, grid.ntheta)
            on_plane = np.abs(np.cos(grid.node_theta - e.angle)) < 1e-14
            assert np.array_equal(fixed, on_plane)


class TestCapMask:
    def test_count_ntheta8(self):
        grid = build_grid(Domain.disk(1.0), 4, 8)
        mask = cap_mask(grid, Direction(0, 8))
        # angles 0, pi/4, 7pi/4 are strictly inside the cap; the two axis
        # rays at pi/2 and 3pi/2 are excluded
        assert mask.sum() == 3 * grid.nr

    def test_partition(self, disk_small):
        grid = disk_small
        for k in range(grid.ntheta):
            e = Direction(k, grid.ntheta)
            mask = cap_mask(grid, e)
            perm = reflect_map(grid, e)
            mirror = np.zeros_like(mask)
            mirror[perm[mask]] = True
            on_plane = np.abs(np.cos(grid.node_theta - e.angle)) < 1e-14
            assert not np.any(mask & mirror)
            assert np.array_equal(mask | mirror, ~on_plane)

    def test_antipodal(self, disk_small):
        grid = disk_small
        for k in range(grid.ntheta):
            e = Direction(k, grid.ntheta)
            mask = cap_mask(grid, e)
            opp = cap_mask(grid, e.opposite())
            perm = reflect_map(grid, e)
            image = np.zeros_like(mask)
            image[perm[mask]] = True
            assert np.array_equal(opp, image)

    def test_cap_operator_weighted_symmetric(self, disk_small):
        grid = disk_small
        k_mat = weighted_form_matrix(grid, laplacian(grid))
        dofs = np.flatnonzero(cap_mask(grid, Direction(3, grid.ntheta)))
        sub = restrict_operator(k_mat, dofs)
        assert abs(sub - sub.T).max() < 1e-14 * abs(sub).max()


class TestOddExtension:
    def test_factor_two_identity(self, disk_small, rng):
        # a field supported on the cap, extended oddly, has full-domain
        # quadratic form exactly twice the cap form
        grid = disk_small
        e = Direction(2, grid.ntheta)
        mask = cap_mask(grid, e)
        perm = reflect_map(grid, e)
        phi = np.zeros(grid.n_nodes)
        phi[mask] = rng.standard_normal(mask.sum())
        ext = phi - phi[perm]
        k_mat = weighted_form_matrix(grid, laplacian(grid))
        q_full = ext @ (k_mat @ ext)
        dofs = np.flatnonzero(mask)
        sub = restrict_operator(k_mat, dofs)
        q_cap = phi[dofs] @ (sub @ phi[dofs])
        assert q_full == pytest.approx(2 * q_cap, rel=1e-12)


def test_vectorfield_roundtrip(disk_small, rng):
    vals = rng.standard_normal((2, disk_small.nr, disk_small.ntheta))
    fld = VectorField(disk_small, vals)
    assert np.array_equal(VectorField.from_flat(disk_small, 2, fld.flat()).values, vals)
    perm = reflect_map(disk_small, Direction(5, disk_small.ntheta))
    assert np.array_equal(fld.permute_nodes(perm).permute_nodes(perm).values, vals)
