"""Low-rank stochastic semidefinite optimization via factored SVRG."""

from . import theory
from .errors import DegenerateRankError, DivergenceError, NumericalError
from .estimator import LowRankRecovery
from .initsch import InitConfig, InitResult, run_init, theoretical_t
from .matcore import (Alignment, factor_distance_sq, gram, procrustes,
                      psd_project, rank_r_factor, spectral_stats, symmetrize)
from .schedules import StepSchedule, next_eta
from .sensing import Objective, SensingInstance, estimate_curvature, generate
from .solvers import (ALGORITHMS, RunTrace, SolverConfig, run, run_fgd,
                      run_sgd, run_svrg_i, run_svrg_ii, run_svrg_lr,
                      run_svrg_sdp)
from .theory import TheoryConstants, constants, constants_for_instance, sbb_m_bound

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS", "Alignment", "DegenerateRankError", "DivergenceError",
    "InitConfig", "InitResult", "LowRankRecovery", "NumericalError",
    "Objective", "RunTrace", "SensingInstance", "SolverConfig", "StepSchedule",
    "TheoryConstants", "constants", "constants_for_instance",
    "estimate_curvature", "factor_distance_sq", "generate", "gram", "next_eta",
    "procrustes", "psd_project", "rank_r_factor", "run", "run_fgd", "run_init",
    "run_sgd", "run_svrg_i", "run_svrg_ii", "run_svrg_lr", "run_svrg_sdp",
    "sbb_m_bound", "spectral_stats", "symmetrize", "theory", "theoretical_t",
    "__version__",
]
