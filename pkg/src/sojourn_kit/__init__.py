"""Laplace transforms of sojourn times of linear diffusions in unions of
intervals, of the joint law with the terminal position, and of Brownian
local times, computed with 2x2 transfer matrices."""

from .bases import (BrownianGeneral, BrownianPaper, CustomBasis, DiffusionBasis, brownian_basis,
                    hitting_time_transform, potential)
from .core import (CoefficientSet, ConfigError, IntervalUnion, LaplaceParams, NumericalError,
                   PointSet, ScaledMat2, SojournError, make_interval_union, mat2_inv, mat2_mul)
from .inversion import InversionConfig, expectation_at_time, invert_in_lambda
from .joint import classify_y, psi, solve_psi, solve_psi_coefficients
from .localtime import (closed_form_one_point, closed_form_two_points, limit_pair,
                        local_time_transform, solve_local_time)
from .montecarlo import SimConfig, SimEstimate, estimate_local_time_transform, estimate_sojourn_transform
from .transfer import assemble, local_matrices, phi, solve_phi, solve_phi_coefficients

__version__ = "0.1.0"
