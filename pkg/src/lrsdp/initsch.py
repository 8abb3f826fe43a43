"""Projected-gradient initialization in the full matrix space.

Starting from the zero matrix, run T steps of

    X <- Proj_PSD( X - (1/L) grad f(X) )

and return the best rank-r factor of the final iterate.  T is either fixed
(the benchmark default is 10) or derived from the contraction argument

    T = ceil( log(arg) / log(1 - 1/kappa) ),
    arg = 16 (sqrt(2)-1)^2 sigma_r(X*)^2 / (9 kappa ||X*||_F^2),

valid for condition numbers 1 < kappa <= 64 (sqrt(2) - 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import matcore
from .errors import NumericalError
from .sensing import Objective

KAPPA_MAX = 64.0 * (math.sqrt(2.0) - 1.0)

# Absolute slack for the per-step objective monotonicity assertion.
_DESCENT_SLACK = 1e-12


@dataclass(frozen=True)
class InitConfig:
    """Projected-gradient initialization parameters.

    Exactly one of ``t_fixed`` or the theoretical triple
    (``kappa``, ``sigma_r_star``, ``x_star_fro``) selects the step count.
    ``lipschitz`` is the constant L whose inverse is the step size.
    """

    lipschitz: float
    t_fixed: Optional[int] = None
    kappa: Optional[float] = None
    sigma_r_star: Optional[float] = None
    x_star_fro: Optional[float] = None

    def __post_init__(self):
        if self.lipschitz <= 0:
            raise ValueError(f"lipschitz must be positive, got {self.lipschitz}")
        fixed = self.t_fixed is not None
        theo = (self.kappa is not None and self.sigma_r_star is not None
                and self.x_star_fro is not None)
        if fixed == theo:
            raise ValueError("specify either t_fixed or the theoretical "
                             "(kappa, sigma_r_star, x_star_fro) triple")
        if fixed and self.t_fixed < 1:
            raise ValueError(f"t_fixed must be >= 1, got {self.t_fixed}")

    @classmethod
    def fixed(cls, t: int, lipschitz: float) -> "InitConfig":
        return cls(lipschitz=lipschitz, t_fixed=t)

    @classmethod
    def theoretical(cls, kappa: float, sigma_r_star: float, x_star_fro: float,
                    lipschitz: float) -> "InitConfig":
        return cls(lipschitz=lipschitz, kappa=kappa,
                   sigma_r_star=sigma_r_star, x_star_fro=x_star_fro)

    def steps(self) -> int:
        if self.t_fixed is not None:
            return self.t_fixed
        return theoretical_t(self.kappa, self.sigma_r_star, self.x_star_fro)


def theoretical_t(kappa: float, sigma_r_star: float, x_star_fro: float) -> int:
    """Step count guaranteeing the initialization lands in the theory ball.

    Requires 1 < kappa <= 64 (sqrt(2) - 1).  The count is clamped to at
    least 1; the argument of the logarithm exceeding 1 (possible when
    sigma_r is large relative to ||X*||_F with kappa near 1) would make the
    formula nonpositive, a corner the clamp absorbs.
    """
    if not (1.0 < kappa <= KAPPA_MAX):
        raise ValueError(f"kappa={kappa} outside the admissible range "
                         f"(1, {KAPPA_MAX:.6f}]")
    if sigma_r_star <= 0 or x_star_fro <= 0:
        raise ValueError("sigma_r_star and x_star_fro must be positive")
    c = math.sqrt(2.0) - 1.0
    arg = 16.0 * c * c * sigma_r_star**2 / (9.0 * kappa * x_star_fro**2)
    t = math.ceil(math.log(arg) / math.log(1.0 - 1.0 / kappa))
    return max(t, 1)


@dataclass
class InitResult:
    """Output of :func:`run_init`: the factor plus run diagnostics."""

    factor: np.ndarray
    objective_values: list
    grad_evals: int
    iterates: Optional[list] = None


def run_init(inst: Objective, r: int, cfg: InitConfig,
             keep_iterates: bool = False) -> InitResult:
    """Run T projected-gradient steps from zero and factor the result.

    The objective is convex in X, so with step 1/L the value must not
    increase; a material increase indicates a bad Lipschitz constant and
    raises :class:`NumericalError`.  Costs n gradient evaluations per step.
    """
    p = inst.dim
    x = np.zeros((p, p))
    inv_l = 1.0 / cfg.lipschitz
    t_steps = cfg.steps()
    values = [inst.value_full(x)]
    iterates = [x.copy()] if keep_iterates else None
    for t in range(t_steps):
        x = matcore.psd_project(x - inv_l * inst.grad_full(x))
        values.append(inst.value_full(x))
        if values[-1] > values[-2] + _DESCENT_SLACK:
            raise NumericalError(
                f"projected gradient ascent at step {t + 1}: "
                f"{values[-2]:.6e} -> {values[-1]:.6e}; the Lipschitz "
                f"constant {cfg.lipschitz:.6e} is likely an underestimate")
        if iterates is not None:
            iterates.append(x.copy())
    factor = matcore.rank_r_factor(x, r)
    return InitResult(factor=factor, objective_values=values,
                      grad_evals=inst.n * t_steps, iterates=iterates)
