"""Root (psi-function) density estimation from complementing experiments."""

from .basis import BasisError, ContinuousBasis, DiscreteBasis, dft_unitary, gauss_hermite
from .estimator import EstimationConfig, EstimationError, EstimationResult, select_order, solve, solve_register
from .inference import (chi2_quantile, chi2_sf, confidence_cone, covariance, fisher_matrix_closed_form,
                        fisher_matrix_quadrature, homogeneity_test, state_equality_test, RealStateChart)
from .sampling import (CoordinateSample, MomentumSample, RegisterCounts, random_state, sample_coordinate,
                       sample_momentum, sample_register)
from .state import DensityMatrix, StateError, StateVector, density_matrix, fidelity

__version__ = "0.1.0"
