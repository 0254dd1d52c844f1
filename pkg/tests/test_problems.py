import numpy as np
import pytest

from coopsym.problems import (catalog_names, henon_system, linear_constant,
                              make_problem, power_system, scalar_lane_emden,
                              verify_convex_derivatives, verify_jacobian)


class TestEval:
    def test_power_unit(self):
        prob = power_system(3, 3)
        assert np.allclose(prob.F(1.0, np.array([1.0, 1.0])), [1.0, 1.0])

    def test_henon_unit_radius(self):
        prob = henon_system(2, 2, 1.5, 0.7)
        assert np.allclose(prob.F(np.array(1.0), np.array([1.0, 1.0])), [1.0, 1.0])

    def test_power_mixed_signs(self):
        prob = power_system(3, 2)
        out = prob.F(1.0, np.array([-2.0, 0.5]))
        assert np.allclose(out, [0.125, -4.0])

    def test_rejects_nonfinite(self):
        prob = power_system(3, 3)
        with pytest.raises(ValueError):
            prob.F(1.0, np.array([np.nan, 1.0]))

    def test_vectorized_eval(self, rng):
        prob = power_system(3, 2)
        u = rng.standard_normal((2, 50))
        r = rng.uniform(0.1, 1.0, 50)
        f = prob.F(r, u)
        assert f.shape == (2, 50)
        assert np.allclose(f[0], np.abs(u[1]) ** 2 * u[1])


class TestJacobian:
    def test_power_at_ones(self):
        # linearizing the cross-power coupling at equal unit components
        prob = power_system(3, 3)
        jac = prob.J(1.0, np.array([1.0, 1.0]))
        assert np.allclose(jac, [[0.0, 3.0], [3.0, 0.0]])

    def test_antidiagonal_structure(self, rng):
        prob = power_system(2.5, 4)
        u = rng.standard_normal((2, 20))
        jac = prob.J(rng.uniform(0.1, 1, 20), u)
        assert np.allclose(jac[0, 0], 0) and np.allclose(jac[1, 1], 0)

    def test_linear_constant_jacobian(self, rng):
        a = rng.standard_normal((3, 3))
        prob = linear_constant(a)
        u = rng.standard_normal((3, 7))
        jac = prob.J(np.ones(7), u)
        for n in range(7):
            assert np.allclose(jac[:, :, n], -a)

    @pytest.mark.parametrize("maker", [
        lambda: power_system(3, 3),
        lambda: power_system(2.5, 3.5),
        lambda: scalar_lane_emden(3),
        lambda: henon_system(2, 3, 1.0, 2.0),
        lambda: linear_constant(np.array([[1.0, -2.0], [-0.5, 2.0]])),
    ])
    def test_finite_difference_agreement(self, maker, rng):
        assert verify_jacobian(maker(), rng, samples=20, h=1e-6) <= 1e-5

    def test_slope_at_zero_p1(self):
        # d/ds |s|^0 s = 1 at s = 0 (identity map)
        prob = power_system(1, 1)
        jac = prob.J(1.0, np.array([0.0, 0.0]))
        assert jac[0, 1] == 1.0 and jac[1, 0] == 1.0

    def test_slope_at_zero_p_gt_1(self):
        prob = power_system(3, 2)
        jac = prob.J(1.0, np.array([0.0, 0.0]))
        assert jac[0, 1] == 0.0 and jac[1, 0] == 0.0


class TestStructureTags:
    def test_cooperativity_sampling(self, rng):
        for prob in (power_system(3, 2), henon_system(2, 2, 1.0, 1.0)):
            u = rng.standard_normal((2, 200)) * 3
            jac = prob.J(rng.uniform(0.05, 1.0, 200), u)
            off = jac[~np.eye(2, dtype=bool)]
            assert off.min() >= 0.0

    def test_convex_tag_iff_exponents_at_least_two(self):
        assert "convex_derivatives" in power_system(2, 2).tags
        assert "convex_derivatives" in power_system(3, 5).tags
        assert "convex_derivatives" not in power_system(1.5, 3).tags
        assert "convex_derivatives" not in scalar_lane_emden(1.7).tags
        assert "convex_derivatives" in scalar_lane_emden(2.0).tags

    def test_convexity_sampler_accepts_power3(self, rng):
        assert verify_convex_derivatives(power_system(3, 3), rng, samples=300) == 0.0

    def test_convexity_sampler_rejects_subquadratic(self, rng):
        # p < 2 makes the slope |s|^(p-1) concave around 0
        violation = verify_convex_derivatives(power_system(1.5, 1.5), rng, samples=300)
        assert violation > 1e-6

    def test_hamiltonian_tag(self):
        assert "hamiltonian_type" in power_system(3, 3).tags
        assert "gradient_type" in scalar_lane_emden(3).tags
        assert "gradient_type" in linear_constant(np.eye(2)).tags
        assert "gradient_type" not in linear_constant(np.array([[0, 1.0], [0, 0]])).tags


class TestCatalog:
    def test_names(self):
        assert catalog_names() == ["henon", "lane_emden", "linear_constant", "power"]

    def test_make_by_name(self):
        prob = make_problem("power", p=3.0, q=3.0)
        assert prob.m == 2 and prob.params == {"p": 3.0, "q": 3.0}

    def test_unknown_name(self):
        with pytest.raises(KeyError):
            make_problem("does_not_exist")

    def test_load_validation_runs(self):
        # convex tag is re-checked at load for tagged problems
        prob = make_problem("power", p=2.0, q=2.0)
        assert "convex_derivatives" in prob.tags
