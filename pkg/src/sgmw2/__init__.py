"""Score-based generative sampling on Gaussian mixtures with explicit W2 bounds."""

from ._accel import backend, set_threads
from .constants import (
    b_const,
    bound_terms,
    build_report,
    delta_k,
    delta_sequence,
    eta,
    f_m,
    h_max,
    lipschitz_l,
    main_bound,
    n_h,
    profile_lower_bound,
    t_contract,
    uniform_l,
    weak_convexity_c,
    xi,
)
from .errors import ConfigurationError, NumericError
from .grid import TimeGrid
from .mixture import (
    ConvexityParams,
    GaussianMixture,
    SampleBatch,
    gmm_log_density,
    gmm_m2,
    gmm_sample,
    gmm_score,
    gmm_weak_convexity_params,
    two_mode_params,
)
from .ou_flow import backward_drift, forward_marginal, ou_transition_sample, score_forward, score_modified
from .sampler import CoupledRun, ScoreOracle, run_coupled, run_sgm
from .verify import CheckReport
from .wasserstein import W2Estimate, w2_1d_exact, w2_exact_matching, w2_gaussian_closed_form, w2_sliced

__version__ = "0.1.0"
