"""Scikit-learn style estimator wrapping the factored solvers.

``LowRankRecovery`` treats matrix sensing as a regression problem: ``X`` is
a stack of measurement matrices, ``y`` the observed inner products, and
fitting recovers the low-rank PSD matrix that interpolates them.  The class
follows the sklearn estimator contract (constructor stores hyperparameters
untouched, ``fit`` sets trailing-underscore attributes, ``get_params`` /
``set_params`` work with ``sklearn.base.clone`` and model selection).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from .initsch import InitConfig, run_init
from .schedules import StepSchedule
from .sensing import SensingInstance
from .solvers import ALGORITHMS, SolverConfig, run
from .validation import check_measurements, check_positive, check_rank


class LowRankRecovery(BaseEstimator, RegressorMixin):
    """Recover a low-rank PSD matrix from linear measurements.

    Parameters
    ----------
    rank : target rank of the recovered matrix.
    algorithm : one of ``lrsdp.ALGORITHMS`` (default the variance-reduced
        solver with last-iterate output).
    m : inner-loop length; ``None`` uses one pass over the samples.
    b : mini-batch size.
    step : "fixed", "bb" or "sbb".
    eta : step size, or "auto" for the conservative choice
        ``1 / (m (L_hat + epsilon))`` derived from the fitted data.
    epsilon : stabilization constant for the sbb schedule.
    max_outer : outer-iteration budget.
    tol : stop once the objective value drops below this.
    init_steps : projected-gradient initialization steps.
    random_state : seed for batch sampling (and any stochastic output rule).

    Attributes (after ``fit``)
    ----------
    factor_ : (p, rank) factor U with ``matrix_ = U @ U.T``.
    matrix_ : recovered PSD matrix.
    trace_ : per-outer-iteration :class:`RunTrace`.
    n_iter_ : completed outer iterations.
    converged_ : whether the objective tolerance was reached.
    """

    def __init__(self, rank=1, algorithm="svrg-sdp", m=None, b=1, step="sbb",
                 eta="auto", epsilon=1e-10, max_outer=100, tol=1e-12,
                 init_steps=10, random_state=0):
        self.rank = rank
        self.algorithm = algorithm
        self.m = m
        self.b = b
        self.step = step
        self.eta = eta
        self.epsilon = epsilon
        self.max_outer = max_outer
        self.tol = tol
        self.init_steps = init_steps
        self.random_state = random_state

    def _schedule(self, m: int, l_hat: float) -> StepSchedule:
        if self.eta == "auto":
            eta0 = 1.0 / (m * (l_hat + self.epsilon))
        else:
            eta0 = check_positive(self.eta, "eta")
        if self.step == "fixed":
            return StepSchedule.fixed(eta0)
        if self.step == "bb":
            return StepSchedule.bb(eta0)
        if self.step == "sbb":
            return StepSchedule.sbb(eta0, self.epsilon)
        raise ValueError(f"unknown step rule {self.step!r}")

    def fit(self, X, y):
        """Fit from measurements ``X`` of shape (n, p, p) and values ``y``."""
        a, y = check_measurements(X, y)
        p = a.shape[1]
        rank = check_rank(self.rank, p)
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; "
                             f"expected one of {ALGORITHMS}")
        inst = SensingInstance.from_data(a, y, rank, seed=self.random_state)
        m = inst.n if self.m is None else int(self.m)
        schedule = self._schedule(m, inst.l_hat)
        init = run_init(inst, rank, InitConfig.fixed(self.init_steps, inst.l_hat))
        cfg = SolverConfig(algorithm=self.algorithm, rank=rank, schedule=schedule,
                           m=m, b=self.b, max_outer=self.max_outer,
                           target_value=self.tol, seed=self.random_state,
                           keep_factors=True)
        trace = run(inst, init.factor, cfg)
        self.trace_ = trace
        self.n_iter_ = trace.outer_k[-1]
        self.converged_ = trace.converged
        self.factor_ = trace.factors[-1]
        self.matrix_ = self.factor_ @ self.factor_.T
        self.l_hat_ = inst.l_hat
        self.mu_hat_ = inst.mu_hat
        return self

    def predict(self, X):
        """Predicted measurements ``<X_i, matrix_>`` for new sensing matrices."""
        from sklearn.utils.validation import check_is_fitted
        check_is_fitted(self, "matrix_")
        a = check_measurements(X)
        p = self.matrix_.shape[0]
        if a.shape[1] != p:
            raise ValueError(f"measurements are {a.shape[1]}x{a.shape[1]} but "
                             f"the fitted matrix is {p}x{p}")
        sym = 0.5 * (a + a.transpose(0, 2, 1))
        return sym.reshape(a.shape[0], -1) @ self.matrix_.ravel()
