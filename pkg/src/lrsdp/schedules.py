"""Outer-loop step-size rules: fixed, Barzilai-Borwein, stabilized BB.

The BB family sets, for outer iteration k >= 1 with anchor difference
``D = X_k - X_{k-1}`` and gradient difference ``G = g_k - g_{k-1}``,

    eta_k = (1/m) * ||D||_F^2 / (|<D, G>| + eps * ||D||_F^2),

where ``eps = 0`` recovers plain BB.  Iteration 0 uses the configured
initial step.  A schedule instance carries the previously returned step so
the degenerate case (identical anchors) can fall back to it; solvers copy
the schedule at run start so configurations stay reusable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

KINDS = ("fixed", "bb", "sbb")

_DENOM_FLOOR = 1e-30


@dataclass
class StepSchedule:
    kind: str
    eta0: float
    epsilon: float = 0.0
    last_eta: float | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}, expected {KINDS}")
        if self.eta0 <= 0:
            raise ValueError(f"step size must be positive, got {self.eta0}")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon}")
        if self.kind == "bb":
            self.epsilon = 0.0

    @classmethod
    def fixed(cls, eta: float) -> "StepSchedule":
        return cls(kind="fixed", eta0=eta)

    @classmethod
    def bb(cls, eta0: float) -> "StepSchedule":
        return cls(kind="bb", eta0=eta0)

    @classmethod
    def sbb(cls, eta0: float, epsilon: float) -> "StepSchedule":
        return cls(kind="sbb", eta0=eta0, epsilon=epsilon)

    def reset(self) -> "StepSchedule":
        """Fresh copy with no remembered step (to start a new run)."""
        return StepSchedule(kind=self.kind, eta0=self.eta0, epsilon=self.epsilon)


def next_eta(schedule: StepSchedule, m: int, x_curr, x_prev, g_curr, g_prev) -> float:
    """Step size for the upcoming inner loop.

    ``x_prev``/``g_prev`` are ``None`` at the first outer iteration, where the
    configured initial step applies.  For bb/sbb a denominator below 1e-30
    (iterates essentially identical) returns the previous step.
    """
    if m < 1:
        raise ValueError(f"inner-loop length m must be >= 1, got {m}")
    if schedule.kind == "fixed":
        schedule.last_eta = schedule.eta0
        return schedule.eta0
    if x_prev is None or g_prev is None:
        schedule.last_eta = schedule.eta0
        return schedule.eta0
    dx = x_curr - x_prev
    dg = g_curr - g_prev
    dx_sq = float(np.sum(dx * dx))
    denom = abs(float(np.sum(dx * dg))) + schedule.epsilon * dx_sq
    if denom < _DENOM_FLOOR:
        if schedule.last_eta is None:
            schedule.last_eta = schedule.eta0
        return schedule.last_eta
    eta = dx_sq / (m * denom)
    schedule.last_eta = eta
    return eta
