import numpy as np
import pytest

from coopsym.grid import Domain, build_grid
from coopsym.problems import linear_constant, make_problem
from coopsym.solver import (BracketNotFound, NewtonOptions, initial_guess,
                            newton_solve, radial_shoot)

# shooting-oracle center values for the scalar cubic problem on the unit
# disk, frozen from the integrator at rtol 1e-12 (regression anchors)
LANE_EMDEN3_POSITIVE_U0 = 3.5739009819270717
LANE_EMDEN3_ONE_NODE_U0 = 12.287043209770745


class TestRadialShoot:
    def test_zero_problem_gives_zero_profile(self):
        prob = linear_constant(np.zeros((1, 1)))
        profile = radial_shoot(prob, Domain.disk(1.0), "positive")
        assert profile.center_value == 0.0
        assert np.abs(profile.values).max() < 1e-12

    def test_positive_profile(self, lane_emden_profile):
        prof = lane_emden_profile
        assert prof.center_value == pytest.approx(LANE_EMDEN3_POSITIVE_U0, rel=1e-9)
        assert prof.boundary_miss < 1e-10
        u = prof.values[0]
        assert u[0] > 0
        assert np.all(np.diff(u) < 1e-9)  # strictly decreasing outward

    def test_one_node_profile(self, lane_emden3):
        prof = radial_shoot(lane_emden3, Domain.disk(1.0), "one-node")
        assert prof.center_value == pytest.approx(LANE_EMDEN3_ONE_NODE_U0, rel=1e-9)
        u = prof.values[0]
        live = np.abs(u) > 1e-8 * np.abs(u).max()
        assert np.sum(np.diff(np.sign(u[live])) != 0) == 1

    def test_system_swap_symmetric_profiles(self, power33):
        prof = radial_shoot(power33, Domain.disk(1.0), "positive")
        assert np.abs(prof.values[0] - prof.values[1]).max() < 1e-10
        assert prof.center_value == pytest.approx(LANE_EMDEN3_POSITIVE_U0, rel=1e-8)

    def test_annulus_positive(self, lane_emden3):
        prof = radial_shoot(lane_emden3, Domain.annulus(1.0, 2.0), "positive")
        u = prof.values[0]
        assert prof.boundary_miss < 1e-10
        assert u[1:-1].min() > 0

    def test_bracket_not_found(self):
        # -Lap u = -u has only the trivial radial profile; no bracket appears
        prob = linear_constant(np.array([[1.0]]))
        with pytest.raises(BracketNotFound):
            radial_shoot(prob, Domain.disk(1.0), "one-node", scan_range=(0.1, 10), scan_points=12)


class TestInitialGuess:
    def test_zero_amplitude(self, disk_small):
        fld = initial_guess(disk_small, "radial_bump", 0.0, m=2)
        assert fld.max_norm() == 0.0

    def test_nodal_angular_zero_mean(self, disk_small):
        fld = initial_guess(disk_small, "nodal_angular", 2.0)
        means = fld.values.mean(axis=2)
        assert np.abs(means).max() < 1e-14

    def test_from_profile_is_radial(self, disk_small, lane_emden_profile):
        fld = initial_guess(disk_small, "from_radial_profile", 1.0,
                            profile=lane_emden_profile)
        assert fld.angular_variation() == 0.0

    def test_random_seeded_reproducible(self, disk_small):
        a = initial_guess(disk_small, "random_seeded", 1.0, m=2, seed=7)
        b = initial_guess(disk_small, "random_seeded", 1.0, m=2, seed=7)
        assert np.array_equal(a.values, b.values)

    def test_unknown_kind(self, disk_small):
        with pytest.raises(ValueError):
            initial_guess(disk_small, "bogus", 1.0)


class TestNewton:
    def test_zero_linear_problem(self, disk_small):
        prob = linear_constant(np.zeros((1, 1)))
        init = initial_guess(disk_small, "radial_bump", 1.0)
        sol = newton_solve(prob, disk_small, init)
        assert sol.field.max_norm() < 1e-12
        assert sol.diverged_to_zero

    def test_positive_matches_oracle(self, lane_emden_positive_medium):
        sol = lane_emden_positive_medium
        # center value approximated by the innermost ring
        u_center = sol.field.values[0, 0].mean()
        assert u_center == pytest.approx(LANE_EMDEN3_POSITIVE_U0, rel=0.01)
        assert sol.residual_inf < 1e-6

    def test_grid_convergence_toward_oracle(self, lane_emden3, lane_emden_profile):
        errs = []
        for nr, ntheta in [(16, 32), (32, 64)]:
            grid = build_grid(Domain.disk(1.0), nr, ntheta)
            init = initial_guess(grid, "from_radial_profile", 1.0,
                                 profile=lane_emden_profile)
            sol = newton_solve(lane_emden3, grid, init)
            ua = sol.field.values[0, :, 0]
            # compare the whole radial profile, not just the center
            oracle = lane_emden_profile.interpolate(grid.r_nodes)[0]
            errs.append(np.abs(ua - oracle).max())
        assert errs[0] / errs[1] >= 3.0

    def test_swap_symmetry(self, power33_positive_medium):
        sol = power33_positive_medium
        u1, u2 = sol.field.values
        assert np.abs(u1 - u2).max() <= 1e-8
        assert u1.max() > 1.0  # nontrivial branch

    def test_radial_guess_stays_radial(self, lane_emden_positive_medium):
        assert lane_emden_positive_medium.field.angular_variation() <= 1e-9

    def test_nodal_candidate_is_nonradial(self, lane_emden_nodal_medium):
        sol = lane_emden_nodal_medium
        assert not sol.diverged_to_zero
        assert sol.field.angular_variation() > 1.0
        # odd under a half turn by construction of the iteration
        vals = sol.field.values[0]
        rolled = np.roll(vals, sol.grid.ntheta // 2, axis=1)
        assert np.abs(vals + rolled).max() < 1e-7

    def test_options_respected(self, disk_small, lane_emden3, lane_emden_profile):
        init = initial_guess(disk_small, "from_radial_profile", 1.0,
                             profile=lane_emden_profile)
        sol = newton_solve(lane_emden3, disk_small, init,
                           NewtonOptions(tol=1e-8, max_iters=30))
        assert sol.residual_inf <= 1e-8
