import numpy as np
import pytest

from coopsym.grid import Domain, build_grid
from coopsym.problems import make_problem
from coopsym.solver import NewtonOptions, initial_guess, newton_solve, radial_shoot


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture(scope="session")
def disk_small():
    return build_grid(Domain.disk(1.0), 8, 16)


@pytest.fixture(scope="session")
def disk_medium():
    return build_grid(Domain.disk(1.0), 32, 64)


@pytest.fixture(scope="session")
def annulus_small():
    return build_grid(Domain.annulus(1.0, 2.0), 8, 16)


@pytest.fixture(scope="session")
def lane_emden3():
    return make_problem("lane_emden", p=3.0)


@pytest.fixture(scope="session")
def power33():
    return make_problem("power", p=3.0, q=3.0)


@pytest.fixture(scope="session")
def lane_emden_profile(lane_emden3):
    return radial_shoot(lane_emden3, Domain.disk(1.0), "positive")


@pytest.fixture(scope="session")
def lane_emden_positive_medium(lane_emden3, disk_medium, lane_emden_profile):
    init = initial_guess(disk_medium, "from_radial_profile", 1.0, m=1,
                         profile=lane_emden_profile)
    return newton_solve(lane_emden3, disk_medium, init, NewtonOptions(),
                        guess_label="positive")


@pytest.fixture(scope="session")
def lane_emden_nodal_medium(lane_emden3, disk_medium):
    init = initial_guess(disk_medium, "nodal_angular", 10.0, m=1)
    return newton_solve(lane_emden3, disk_medium, init, NewtonOptions(),
                        guess_label="nodal_candidate")


@pytest.fixture(scope="session")
def power33_positive_medium(power33, disk_medium, lane_emden_profile):
    init = initial_guess(disk_medium, "from_radial_profile", 1.0, m=2,
                         profile=lane_emden_profile)
    return newton_solve(power33, disk_medium, init, NewtonOptions(),
                        guess_label="positive")
