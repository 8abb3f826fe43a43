"""Factored first-order solvers and their per-outer-iteration traces.

Six algorithms share the inner update ``U <- U - eta * direction``:

* ``svrg-sdp``  -- semi-stochastic gradient (both correction terms multiply
  the *current* factor), last inner iterate as output.
* ``svrg-i``    -- original SVRG correction (anchor terms multiply the
  *anchor* factor), last inner iterate as output.
* ``svrg-ii``   -- original SVRG correction, uniformly random inner iterate
  as output.
* ``svrg-lr``   -- semi-stochastic gradient, uniformly random output.
* ``fgd``       -- full-gradient factored descent.
* ``sgd-fix`` / ``sgd-diminish`` -- mini-batch SGD with a fixed step or the
  per-epoch diminishing step ``eta0 / (k + 1)``.

Traces are deterministic functions of (instance, U0, config): each run owns
a generator seeded from the config and gradient reductions are performed in
fixed sample order.  One gradient evaluation means one per-sample gradient;
an inner SVRG step with batch size b is charged b evaluations (the anchor
terms count toward the same charge whether cached or recomputed, so cost
comparisons are unaffected by the ``cache_anchor`` flag) and a full gradient
is charged n.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import matcore
from .errors import DivergenceError
from .schedules import StepSchedule, next_eta
from .sensing import Objective

ALGORITHMS = ("svrg-sdp", "svrg-i", "svrg-ii", "svrg-lr",
              "fgd", "sgd-fix", "sgd-diminish")

CSV_HEADER = "outer_k,epoch,grad_evals,eta,rel_error,dist_manifold,wall_ms"

# ||U||_F growing past this factor of its initial value counts as divergence.
_BLOWUP_FACTOR = 1e8


@dataclass
class SolverConfig:
    """Algorithm selection and run parameters.

    ``target_rel_error`` stops a run once the planted-optimum relative error
    drops below it (requires an instance with a planted optimum);
    ``target_value`` stops on the objective value instead and works for any
    instance.  ``keep_factors`` retains the outer iterates on the trace.
    """

    algorithm: str
    rank: int
    schedule: StepSchedule
    m: int = 1
    b: int = 1
    max_outer: int = 100
    target_rel_error: Optional[float] = None
    target_value: Optional[float] = None
    seed: int = 0
    cache_anchor: bool = False
    keep_factors: bool = False

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.m < 1 or self.b < 1 or self.max_outer < 1:
            raise ValueError("m, b and max_outer must all be >= 1")


@dataclass
class RunTrace:
    """Per-outer-iteration record of a solver run.

    Row ``k`` describes the iterate after ``k`` completed outer iterations;
    its ``eta`` is the step used to produce it (``nan`` for row 0).
    ``rel_error`` and ``dist_manifold`` are ``nan`` when the instance has no
    planted optimum.  ``grad_evals`` is strictly increasing.
    """

    algorithm: str
    n: int
    seed: int
    outer_k: list = field(default_factory=list)
    grad_evals: list = field(default_factory=list)
    eta: list = field(default_factory=list)
    rel_error: list = field(default_factory=list)
    dist_manifold: list = field(default_factory=list)
    wall_ms: list = field(default_factory=list)
    factors: Optional[list] = None
    converged: bool = False

    def append(self, k, evals, eta, rel, dist, wall_ms, factor=None):
        self.outer_k.append(int(k))
        self.grad_evals.append(int(evals))
        self.eta.append(float(eta))
        self.rel_error.append(float(rel))
        self.dist_manifold.append(float(dist))
        self.wall_ms.append(float(wall_ms))
        if self.factors is not None and factor is not None:
            self.factors.append(factor.copy())

    @property
    def epochs(self):
        """Epoch index per row: cumulative gradient evaluations / n, floored."""
        return [evals // self.n for evals in self.grad_evals]

    def epochs_to(self, level: float) -> float:
        """First epoch at which rel_error <= level, or ``inf`` if never."""
        for ep, rel in zip(self.epochs, self.rel_error):
            if rel <= level:
                return float(ep)
        return math.inf

    def grad_evals_to(self, level: float) -> float:
        for evals, rel in zip(self.grad_evals, self.rel_error):
            if rel <= level:
                return float(evals)
        return math.inf

    def csv_lines(self):
        yield CSV_HEADER
        for i in range(len(self.outer_k)):
            yield (f"{self.outer_k[i]},{self.grad_evals[i] // self.n},"
                   f"{self.grad_evals[i]},{self.eta[i]:.17g},"
                   f"{self.rel_error[i]:.17g},{self.dist_manifold[i]:.17g},"
                   f"{self.wall_ms[i]:.17g}")

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="ascii") as fh:
            for line in self.csv_lines():
                fh.write(line + "\n")


def _check_factor(inst, u0, cfg) -> np.ndarray:
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != (inst.dim, cfg.rank):
        raise ValueError(f"initial factor shape {u0.shape} does not match "
                         f"(p, r) = ({inst.dim}, {cfg.rank})")
    return u0.copy()


def _metrics(inst, u):
    x_star = getattr(inst, "x_star", None)
    if x_star is None:
        return math.nan, math.nan
    diff = matcore.gram(u) - x_star
    rel = float(np.sum(diff * diff) / np.sum(x_star * x_star))
    dist = matcore.factor_distance_sq(u, inst.u_star)
    return rel, dist


def _hit_target(inst, u, rel, cfg) -> bool:
    if cfg.target_rel_error is not None and rel <= cfg.target_rel_error:
        return True
    if cfg.target_value is not None:
        if inst.value_full(matcore.gram(u)) <= cfg.target_value:
            return True
    return False


class _Guard:
    """Divergence watchdog: non-finite entries or Frobenius blow-up."""

    def __init__(self, u0):
        self.limit = _BLOWUP_FACTOR ** 2 * max(float(np.sum(u0 * u0)), 1e-300)

    def check(self, u, trace):
        ssq = float(np.einsum("ij,ij->", u, u))
        if not math.isfinite(ssq) or ssq > self.limit:
            raise DivergenceError(
                f"iterate diverged (||U||^2 = {ssq:.3e}); trace attached", trace)


def _anchor_batch_grad(inst, x_anchor, idx, cache):
    if cache is not None:
        return matcore.symmetrize(np.mean(cache[idx], axis=0))
    return inst.grad_batch(x_anchor, idx)


def _build_anchor_cache(inst, x_anchor):
    # Per-sample anchor gradients: -(y_i - <A_i, X~>) A_i, memory n * p^2.
    resid = inst.y - inst.measurements(x_anchor)
    return -resid[:, None, None] * inst.a


def _run_svrg_family(inst, u0, cfg, *, semi_stochastic: bool, option_two: bool):
    n, m, b = inst.n, cfg.m, cfg.b
    if b > n:
        raise ValueError(f"batch size b={b} exceeds sample count n={n}")
    u_anchor = _check_factor(inst, u0, cfg)
    rng = np.random.default_rng(cfg.seed)
    schedule = cfg.schedule.reset()
    trace = RunTrace(algorithm=cfg.algorithm, n=n, seed=cfg.seed,
                     factors=[] if cfg.keep_factors else None)
    guard = _Guard(u_anchor)
    start = time.perf_counter()
    evals = 0
    rel, dist = _metrics(inst, u_anchor)
    trace.append(0, evals, math.nan, rel, dist, 0.0, u_anchor)
    if _hit_target(inst, u_anchor, rel, cfg):
        trace.converged = True
        return trace

    x_prev = g_prev = None
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(cfg.max_outer):
            x_anchor = matcore.gram(u_anchor)
            g_anchor = inst.grad_full(x_anchor)
            evals += n
            eta = next_eta(schedule, m, x_anchor, x_prev, g_anchor, g_prev)
            cache = _build_anchor_cache(inst, x_anchor) if cfg.cache_anchor else None
            # Output rule: last iterate, or a uniform index drawn up front
            # (distributionally identical to storing all inner iterates).
            out_t = m
            if option_two and m > 1:
                out_t = int(rng.integers(1, m + 1))
            u = u_anchor
            u_out = None
            for t in range(m):
                # rng.choice with replace=False yields a valid batch; the
                # objective validates again behind its public contract.
                idx = rng.choice(n, size=b, replace=False)
                x_t = matcore.gram(u)
                if semi_stochastic and cache is None:
                    v = inst.grad_batch_diff(x_t, x_anchor, idx) + g_anchor
                    direction = v @ u
                else:
                    if cache is not None:
                        gb_t = inst.grad_batch(x_t, idx)
                        gb_anchor = _anchor_batch_grad(inst, x_anchor, idx, cache)
                    else:
                        gb_t, gb_anchor = inst.grad_batch_pair(x_t, x_anchor, idx)
                    if semi_stochastic:
                        direction = (gb_t - gb_anchor + g_anchor) @ u
                    else:
                        direction = gb_t @ u - (gb_anchor - g_anchor) @ u_anchor
                u = u - eta * direction
                evals += b
                guard.check(u, trace)
                if t + 1 == out_t:
                    u_out = u
            u_anchor = u_out
            x_prev, g_prev = x_anchor, g_anchor
            rel, dist = _metrics(inst, u_anchor)
            wall = (time.perf_counter() - start) * 1e3
            trace.append(k + 1, evals, eta, rel, dist, wall, u_anchor)
            if _hit_target(inst, u_anchor, rel, cfg):
                trace.converged = True
                break
    return trace


def run_svrg_sdp(inst: Objective, u0, cfg: SolverConfig) -> RunTrace:
    """Variance-reduced run where both correction terms multiply the current
    factor; the inner loop outputs its last iterate."""
    if cfg.algorithm != "svrg-sdp":
        raise ValueError(f"config selects {cfg.algorithm!r}, not svrg-sdp")
    return _run_svrg_family(inst, u0, cfg, semi_stochastic=True, option_two=False)


def run_svrg_i(inst: Objective, u0, cfg: SolverConfig) -> RunTrace:
    """Original SVRG inner correction (anchor terms multiply the anchor
    factor); last inner iterate as output."""
    if cfg.algorithm != "svrg-i":
        raise ValueError(f"config selects {cfg.algorithm!r}, not svrg-i")
    return _run_svrg_family(inst, u0, cfg, semi_stochastic=False, option_two=False)


def run_svrg_ii(inst: Objective, u0, cfg: SolverConfig) -> RunTrace:
    """Original SVRG inner correction with a uniformly random inner iterate
    as the outer output."""
    if cfg.algorithm != "svrg-ii":
        raise ValueError(f"config selects {cfg.algorithm!r}, not svrg-ii")
    return _run_svrg_family(inst, u0, cfg, semi_stochastic=False, option_two=True)


def run_svrg_lr(inst: Objective, u0, cfg: SolverConfig) -> RunTrace:
    """Semi-stochastic inner update with uniformly random output selection."""
    if cfg.algorithm != "svrg-lr":
        raise ValueError(f"config selects {cfg.algorithm!r}, not svrg-lr")
    return _run_svrg_family(inst, u0, cfg, semi_stochastic=True, option_two=True)


def run_fgd(inst: Objective, u0, cfg: SolverConfig) -> RunTrace:
    """Full-gradient factored descent; one outer iteration per full step."""
    if cfg.algorithm != "fgd":
        raise ValueError(f"config selects {cfg.algorithm!r}, not fgd")
    if cfg.schedule.kind != "fixed":
        raise ValueError("fgd supports the fixed step schedule only")
    u = _check_factor(inst, u0, cfg)
    eta = cfg.schedule.eta0
    n = inst.n
    trace = RunTrace(algorithm=cfg.algorithm, n=n, seed=cfg.seed,
                     factors=[] if cfg.keep_factors else None)
    guard = _Guard(u)
    start = time.perf_counter()
    evals = 0
    rel, dist = _metrics(inst, u)
    trace.append(0, evals, math.nan, rel, dist, 0.0, u)
    if _hit_target(inst, u, rel, cfg):
        trace.converged = True
        return trace
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(cfg.max_outer):
            g = inst.grad_full(matcore.gram(u))
            u = u - eta * (g @ u)
            evals += n
            guard.check(u, trace)
            rel, dist = _metrics(inst, u)
            wall = (time.perf_counter() - start) * 1e3
            trace.append(k + 1, evals, eta, rel, dist, wall, u)
            if _hit_target(inst, u, rel, cfg):
                trace.converged = True
                break
    return trace


def run_sgd(inst: Objective, u0, cfg: SolverConfig) -> RunTrace:
    """Mini-batch SGD; the trace records one row per epoch (n evaluations).

    ``sgd-fix`` keeps the schedule's step; ``sgd-diminish`` uses
    ``eta0 / (k + 1)`` during epoch k, so competitors share the epoch axis.
    """
    if cfg.algorithm not in ("sgd-fix", "sgd-diminish"):
        raise ValueError(f"config selects {cfg.algorithm!r}, not an sgd variant")
    if cfg.schedule.kind != "fixed":
        raise ValueError("sgd uses a fixed base step (eta0)")
    n, b = inst.n, cfg.b
    if b > n:
        raise ValueError(f"batch size b={b} exceeds sample count n={n}")
    u = _check_factor(inst, u0, cfg)
    rng = np.random.default_rng(cfg.seed)
    eta0 = cfg.schedule.eta0
    steps_per_epoch = -(-n // b)
    trace = RunTrace(algorithm=cfg.algorithm, n=n, seed=cfg.seed,
                     factors=[] if cfg.keep_factors else None)
    guard = _Guard(u)
    start = time.perf_counter()
    evals = 0
    rel, dist = _metrics(inst, u)
    trace.append(0, evals, math.nan, rel, dist, 0.0, u)
    if _hit_target(inst, u, rel, cfg):
        trace.converged = True
        return trace
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(cfg.max_outer):
            eta = eta0 if cfg.algorithm == "sgd-fix" else eta0 / (k + 1)
            for _ in range(steps_per_epoch):
                idx = rng.choice(n, size=b, replace=False)
                g = inst.grad_batch(matcore.gram(u), idx)
                u = u - eta * (g @ u)
                evals += b
                guard.check(u, trace)
            rel, dist = _metrics(inst, u)
            wall = (time.perf_counter() - start) * 1e3
            trace.append(k + 1, evals, eta, rel, dist, wall, u)
            if _hit_target(inst, u, rel, cfg):
                trace.converged = True
                break
    return trace


_RUNNERS = {
    "svrg-sdp": run_svrg_sdp,
    "svrg-i": run_svrg_i,
    "svrg-ii": run_svrg_ii,
    "svrg-lr": run_svrg_lr,
    "fgd": run_fgd,
    "sgd-fix": run_sgd,
    "sgd-diminish": run_sgd,
}


def run(inst: Objective, u0, cfg: SolverConfig) -> RunTrace:
    """Dispatch to the solver selected by ``cfg.algorithm``."""
    return _RUNNERS[cfg.algorithm](inst, u0, cfg)
