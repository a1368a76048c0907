"""Matrix completion with multi-weight subspace priors.

Set ``MWCOMPLETE_DISABLE_NUMBA=1`` to run the pure-numpy kernels instead of
the numba ones.
"""

from .errors import ConfigError, DegenerateAngleError, DegenerateWeightError, NumericalFailure
from .linalg import principal_angles, svd, truncated_svd
from .sampling import SampleMask, apply_p_omega, apply_r_omega, draw_mask, full_mask
from .subspaces import PriorModel, QMatrix, build_prior_model, build_q, identity_q
from .weights import BoundInputs, BoundReport, WeightSpec, alpha123, alpha456, optimize_weights
from .solver import SolveOptions, SolveReport, nre, solve_single_weight, solve_standard, solve_weighted, svt
from .fdd import ChannelConfig, bessel_j0, correlation_matrix, prior_angles_from_velocity
from .experiments import ExperimentPlan, PRESETS, run_fdd_pipeline, run_phase_transition

__version__ = "0.1.0"
