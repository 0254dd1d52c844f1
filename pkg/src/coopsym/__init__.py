"""coopsym: a numerical laboratory for cooperative elliptic systems on disks
and annuli -- solutions, Morse indices, principal eigenvalues, and
reflection-based symmetry diagnostics."""

from .coupling import CouplingReport, check_coupling, identity_residual
from .fields import VectorField
from .grid import (Direction, Domain, DomainKind, Grid, SparseOperator,
                   build_grid, cap_mask, laplacian, reflect_map)
from .problems import (Problem, catalog_names, henon_system, linear_constant,
                       make_problem, power_system, scalar_lane_emden)
from .reflection import (DirectionScan, ReflectionPack, RotatingPlaneScan,
                         difference_residual, direction_scan, odd_extension,
                         reflection_pack, rotating_plane_scan)
from .solver import (BracketNotFound, MaxItersExceeded, NewtonOptions,
                     RadialProfile, SingularJacobian, Solution, SolverError,
                     initial_guess, newton_solve, radial_shoot)
from .spectral import (LinearizedOperator, NonConvergence, NotCooperative,
                       SpectralReport, default_tol_eig, linearize,
                       maximum_principle_probe, morse_index,
                       principal_eigenvalue, quadratic_form, spectral_report,
                       symmetric_spectrum)
from .symmetry import (Classification, DegenerateAxis, SymmetryReport,
                       classify, estimate_axis)

__version__ = "0.1.0"
