"""Command-line benchmark harness.

Subcommands: ``generate`` (write a seeded instance file), ``run`` (one solver
run to a trace CSV), ``compare`` (several algorithms on a shared epoch axis),
``sweep`` (mini-batch or inner-loop-length sweeps) and ``check-theory`` (the
desk-scale inequality suite).  A YAML config file can mirror any flag;
explicitly passed flags win.  All randomness flows from ``--seed``/``--seeds``
so repeated invocations produce byte-identical CSVs apart from the wall_ms
column.

Exit codes: 0 success, 2 divergence, 3 budget exhausted, 4 bad flags,
5 theory-check failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile

import numpy as np
import yaml

from . import theory
from .errors import DivergenceError
from .initsch import InitConfig, run_init
from .matcore import spectral_stats
from .schedules import StepSchedule
from .sensing import SensingInstance, generate
from .solvers import ALGORITHMS, CSV_HEADER, RunTrace, SolverConfig, run

EXIT_OK = 0
EXIT_DIVERGED = 2
EXIT_BUDGET = 3
EXIT_BAD_FLAGS = 4
EXIT_THEORY_FAIL = 5


class _FlagError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _FlagError(message)


def _atomic_write(path, text: str) -> None:
    parent = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=parent, prefix=".lrsdp-tmp-")
    try:
        with os.fdopen(fd, "w", encoding="ascii") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_trace(path, trace: RunTrace) -> None:
    _atomic_write(path, "\n".join(trace.csv_lines()) + "\n")


def _load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    flat = {}

    def _walk(d):
        for key, val in d.items():
            if isinstance(val, dict):
                _walk(val)
            else:
                flat[str(key).replace("-", "_")] = val

    if not isinstance(raw, dict):
        raise _FlagError(f"config file {path} must hold a mapping")
    _walk(raw)
    return flat


def _merge_config(args) -> None:
    """Fill unset (None) options from the config file, if any."""
    cfg = _load_config(args.config) if getattr(args, "config", None) else {}
    for key, val in cfg.items():
        if hasattr(args, key) and getattr(args, key) is None:
            setattr(args, key, val)


def _resolved(args, name, default):
    val = getattr(args, name)
    return default if val is None else val


def _parse_spectrum(text):
    if not text:
        return None
    return tuple(float(tok) for tok in str(text).split(","))


def _parse_seeds(text, fallback):
    if text is None:
        return [fallback]
    if isinstance(text, int):
        return [text]
    return [int(tok) for tok in str(text).split(",")]


def _parse_count_tokens(text, n):
    """Sweep values, allowing n-relative tokens like ``n/8`` or ``2n``."""
    values = []
    for tok in str(text).split(","):
        tok = tok.strip().lower()
        if not tok:
            continue
        if "n" in tok:
            if tok == "n":
                values.append(n)
            elif tok.startswith("n/"):
                values.append(max(1, n // int(tok[2:])))
            elif tok.endswith("n"):
                values.append(int(float(tok[:-1]) * n))
            else:
                raise _FlagError(f"cannot parse sweep token {tok!r}")
        else:
            values.append(int(tok))
    if not values:
        raise _FlagError("empty sweep value list")
    return values


def _auto_eta(inst: SensingInstance, algorithm: str) -> float:
    """Benchmark step sizes tied to the planted optimum's norm."""
    if inst.x_star is None:
        raise _FlagError("--eta auto needs an instance with a planted optimum")
    x_fro = float(np.linalg.norm(inst.x_star))
    denom = 4.0 if not algorithm.startswith("sgd") else 8.0
    return 1.0 / (denom * inst.l_hat * x_fro)


def _schedule_from_flags(args, inst, algorithm) -> StepSchedule:
    step = _resolved(args, "step", "fixed")
    eta = _resolved(args, "eta", "auto")
    epsilon = float(_resolved(args, "epsilon", 0.0))
    eta0 = _auto_eta(inst, algorithm) if eta == "auto" else float(eta)
    if step == "fixed":
        return StepSchedule.fixed(eta0)
    if step == "bb":
        return StepSchedule.bb(eta0)
    if step == "sbb":
        return StepSchedule.sbb(eta0, epsilon)
    raise _FlagError(f"unknown --step {step!r}")


def _initial_factor(args, inst):
    mode = _resolved(args, "init", "fixed")
    if mode == "fixed":
        cfg = InitConfig.fixed(int(_resolved(args, "init_t", 10)), inst.l_hat)
    elif mode == "theoretical":
        kappa = inst.l_hat / inst.mu_hat
        sr, _, _ = spectral_stats(inst.x_star, inst.r)
        cfg = InitConfig.theoretical(kappa, sr, float(np.linalg.norm(inst.x_star)),
                                     inst.l_hat)
    else:
        raise _FlagError(f"unknown --init {mode!r}")
    return run_init(inst, inst.r, cfg).factor


def _solver_config(args, inst, algorithm, seed) -> SolverConfig:
    schedule = _schedule_from_flags(args, inst, algorithm)
    m = int(_resolved(args, "m", inst.n))
    return SolverConfig(
        algorithm=algorithm, rank=inst.r, schedule=schedule,
        m=m, b=int(_resolved(args, "b", 1)),
        max_outer=int(_resolved(args, "max_outer", 100)),
        target_rel_error=float(_resolved(args, "target", 1e-10)),
        seed=seed)


def _load_instance(args) -> SensingInstance:
    path = getattr(args, "instance", None)
    if not path:
        raise _FlagError("--instance is required")
    return SensingInstance.load(path)


# -- subcommands --------------------------------------------------------------

def cmd_generate(args) -> int:
    _merge_config(args)
    p = int(_resolved(args, "p", 100))
    r = int(_resolved(args, "r", 5))
    n = int(_resolved(args, "n", 10 * p))
    seed = int(_resolved(args, "seed", 0))
    spectrum = _parse_spectrum(_resolved(args, "spectrum", None))
    out = _resolved(args, "out", "instance.lrsdp")
    inst = generate(p=p, r=r, n=n, seed=seed, planted_spectrum=spectrum)
    inst.save(out)
    print(f"wrote {out}: p={p} r={r} n={n} seed={seed} "
          f"l_hat={inst.l_hat:.6g} mu_hat={inst.mu_hat:.6g}")
    return EXIT_OK


def cmd_run(args) -> int:
    _merge_config(args)
    inst = _load_instance(args)
    algorithm = _resolved(args, "alg", "svrg-sdp")
    if algorithm not in ALGORITHMS:
        raise _FlagError(f"unknown --alg {algorithm!r}")
    seed = int(_resolved(args, "seed", 0))
    out = _resolved(args, "out", "trace.csv")
    u0 = _initial_factor(args, inst)
    cfg = _solver_config(args, inst, algorithm, seed)
    try:
        trace = run(inst, u0, cfg)
    except DivergenceError as exc:
        if exc.trace is not None:
            _write_trace(out, exc.trace)
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    _write_trace(out, trace)
    print(f"wrote {out}: {trace.outer_k[-1]} outer iterations, "
          f"rel_error={trace.rel_error[-1]:.3e}, converged={trace.converged}")
    return EXIT_OK if trace.converged else EXIT_BUDGET


def _mean_trace_csv(traces) -> str:
    """Seed-averaged trace on the shared epoch axis (row-wise means)."""
    rows = min(len(t.outer_k) for t in traces)
    lines = [CSV_HEADER]
    t0 = traces[0]
    for i in range(rows):
        eta = float(np.mean([t.eta[i] for t in traces]))
        rel = float(np.mean([t.rel_error[i] for t in traces]))
        dist = float(np.mean([t.dist_manifold[i] for t in traces]))
        wall = float(np.mean([t.wall_ms[i] for t in traces]))
        lines.append(f"{t0.outer_k[i]},{t0.grad_evals[i] // t0.n},"
                     f"{t0.grad_evals[i]},{eta:.17g},{rel:.17g},"
                     f"{dist:.17g},{wall:.17g}")
    return "\n".join(lines) + "\n"


def _mean_or_inf(values):
    return float(np.mean(values))


def _run_group(inst, u0, args, algorithm, seeds, level=1e-6):
    """All seeds for one configuration; divergent runs keep partial traces."""
    traces, epochs, evals, walls = [], [], [], []
    for seed in seeds:
        cfg = _solver_config(args, inst, algorithm, seed)
        try:
            trace = run(inst, u0, cfg)
        except DivergenceError as exc:
            trace = exc.trace
        traces.append(trace)
        epochs.append(trace.epochs_to(level))
        evals.append(trace.grad_evals_to(level))
        walls.append(trace.wall_ms[-1])
    return traces, _mean_or_inf(epochs), _mean_or_inf(evals), _mean_or_inf(walls)


def cmd_compare(args) -> int:
    _merge_config(args)
    inst = _load_instance(args)
    algs = [a.strip() for a in
            str(_resolved(args, "algs", ",".join(ALGORITHMS))).split(",") if a.strip()]
    for alg in algs:
        if alg not in ALGORITHMS:
            raise _FlagError(f"unknown algorithm {alg!r} in --algs")
    seeds = _parse_seeds(getattr(args, "seeds", None),
                         int(_resolved(args, "seed", 0)))
    out_dir = _resolved(args, "out", "compare-out")
    os.makedirs(out_dir, exist_ok=True)
    u0 = _initial_factor(args, inst)
    summary = ["algorithm,epochs_to_1e-6,grad_evals_to_1e-6,wall_ms"]
    for alg in algs:
        traces, ep, ev, wall = _run_group(inst, u0, args, alg, seeds)
        _atomic_write(os.path.join(out_dir, f"{alg}.csv"), _mean_trace_csv(traces))
        summary.append(f"{alg},{ep:.17g},{ev:.17g},{wall:.17g}")
    _atomic_write(os.path.join(out_dir, "summary.csv"), "\n".join(summary) + "\n")
    print("\n".join(summary))
    return EXIT_OK


def _is_value_list(text) -> bool:
    return text is not None and ("," in str(text) or "n" in str(text).lower())


def cmd_sweep(args) -> int:
    _merge_config(args)
    inst = _load_instance(args)
    algorithm = _resolved(args, "alg", "svrg-sdp")
    if algorithm not in ALGORITHMS:
        raise _FlagError(f"unknown --alg {algorithm!r}")
    b_list = getattr(args, "b", None)
    m_list = getattr(args, "m", None)
    b_is_axis, m_is_axis = _is_value_list(b_list), _is_value_list(m_list)
    if b_is_axis == m_is_axis:
        raise _FlagError("sweep needs exactly one of --b or --m as a value "
                         'list (comma-separated, or n-relative like "n/8")')
    param = "b" if b_is_axis else "m"
    values = _parse_count_tokens(b_list if param == "b" else m_list, inst.n)
    seeds = _parse_seeds(getattr(args, "seeds", None),
                         int(_resolved(args, "seed", 0)))
    out_dir = _resolved(args, "out", "sweep-out")
    os.makedirs(out_dir, exist_ok=True)
    u0 = _initial_factor(args, inst)
    summary = [f"{param},epochs_to_1e-6,grad_evals_to_1e-6,wall_ms"]
    base_b, base_m = args.b, args.m
    fixed_b = None if b_is_axis else b_list
    fixed_m = None if m_is_axis else m_list
    for val in values:
        args.b = val if param == "b" else fixed_b
        args.m = val if param == "m" else fixed_m
        traces, ep, ev, wall = _run_group(inst, u0, args, algorithm, seeds)
        _atomic_write(os.path.join(out_dir, f"{param}{val}.csv"),
                      _mean_trace_csv(traces))
        summary.append(f"{val},{ep:.17g},{ev:.17g},{wall:.17g}")
    args.b, args.m = base_b, base_m
    _atomic_write(os.path.join(out_dir, "summary.csv"), "\n".join(summary) + "\n")
    print("\n".join(summary))
    return EXIT_OK


def cmd_check_theory(args) -> int:
    _merge_config(args)
    p = int(_resolved(args, "p", 12))
    if p > 32:
        raise _FlagError(f"check-theory enforces p <= 32 for enumeration, got {p}")
    r = int(_resolved(args, "r", 3))
    n = int(_resolved(args, "n", 150))
    seed = int(_resolved(args, "seed", 11))
    n_configs = int(_resolved(args, "configs", 100))
    out = _resolved(args, "out", "theory_report.txt")
    inst = generate(p=p, r=r, n=n, seed=seed)
    consts = theory.constants_for_instance(inst)
    report = theory.CheckReport()
    report.extend(theory.check_constant_identities(consts, inst.n))

    bound = theory.sbb_m_bound(consts, b=1, epsilon=1e-10, mu=consts.mu)
    recomputed = math.ceil(1.0 / ((consts.mu + 1e-10) * consts.eta_max))
    report.add("sbb_m_bound_closed_form", float(bound), float(recomputed),
               0.0, passed=bound == recomputed)

    rng = np.random.default_rng([seed, 0xC0DE])
    ball = consts.gamma0 * consts.sigma_r
    for j in range(n_configs):
        u_t = theory.sample_ball_factor(inst.u_star, ball * rng.uniform(0.05, 0.9), rng)
        u_a = theory.sample_ball_factor(inst.u_star, ball * rng.uniform(0.05, 0.9), rng)
        eta = consts.eta_max * rng.uniform(0.1, 1.0)
        for rep in (theory.check_second_order_descent(inst, u_t, u_a, inst.u_star,
                                                      eta, consts),
                    theory.check_gradient_bounds(inst, u_t, u_a, inst.u_star, consts),
                    theory.check_feasibility_lemma(inst, u_t, inst.u_star, consts)):
            for res in rep.results:
                report.results.append(theory.CheckResult(
                    name=f"config{j:03d}/{res.name}", lhs=res.lhs, rhs=res.rhs,
                    margin=res.margin, passed=res.passed,
                    informational=res.informational, note=res.note))

    if not getattr(args, "skip_statistical", False):
        eta = min(consts.eta_max, _auto_eta(inst, "svrg-sdp"))
        u0 = theory.sample_ball_factor(inst.u_star, 0.5 * consts.init_radius,
                                       np.random.default_rng([seed, 0xBA11]))
        traces = []
        for s in range(20):
            cfg = SolverConfig(algorithm="svrg-sdp", rank=inst.r,
                               schedule=StepSchedule.fixed(eta), m=inst.n, b=1,
                               max_outer=25, target_rel_error=0.0,
                               seed=10_000 + s)
            traces.append(run(inst, u0, cfg))
        for res in theory.check_contraction(traces, consts, m=inst.n).results:
            report.results.append(theory.CheckResult(
                name=f"statistical/{res.name}", lhs=res.lhs, rhs=res.rhs,
                margin=res.margin, passed=res.passed,
                informational=res.informational, note=res.note))

    _atomic_write(out, "\n".join(report.lines()) + "\n")
    n_fail = sum(1 for res in report.results
                 if not res.passed and not res.informational)
    print(f"wrote {out}: {len(report.results)} checks, {n_fail} failures")
    return EXIT_OK if n_fail == 0 else EXIT_THEORY_FAIL


def _build_parser() -> _Parser:
    parser = _Parser(prog="lrsdp", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="YAML file mirroring the flags")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", default=None)

    g = sub.add_parser("generate", help="write a seeded instance file")
    common(g)
    for flag in ("--p", "--r", "--n"):
        g.add_argument(flag, type=int, default=None)
    g.add_argument("--spectrum", default=None,
                   help="comma-separated planted eigenvalues")
    g.set_defaults(func=cmd_generate)

    def solver_flags(sp):
        sp.add_argument("--instance", default=None)
        sp.add_argument("--step", choices=["fixed", "bb", "sbb"], default=None)
        sp.add_argument("--eta", default=None, help='"auto" or a float')
        sp.add_argument("--epsilon", type=float, default=None)
        sp.add_argument("--max-outer", dest="max_outer", type=int, default=None)
        sp.add_argument("--target", type=float, default=None)
        sp.add_argument("--init", choices=["fixed", "theoretical"], default=None)
        sp.add_argument("--init-t", dest="init_t", type=int, default=None)

    rn = sub.add_parser("run", help="one solver run to a trace CSV")
    common(rn)
    solver_flags(rn)
    rn.add_argument("--alg", default=None, choices=list(ALGORITHMS))
    rn.add_argument("--b", type=int, default=None)
    rn.add_argument("--m", type=int, default=None)
    rn.set_defaults(func=cmd_run)

    cp = sub.add_parser("compare", help="multi-algorithm comparison")
    common(cp)
    solver_flags(cp)
    cp.add_argument("--algs", default=None,
                    help="comma-separated algorithm list")
    cp.add_argument("--seeds", default=None, help="comma-separated seed list")
    cp.add_argument("--b", type=int, default=None)
    cp.add_argument("--m", type=int, default=None)
    cp.set_defaults(func=cmd_compare)

    sw = sub.add_parser("sweep", help="sweep --b or --m value lists")
    common(sw)
    solver_flags(sw)
    sw.add_argument("--alg", default=None, choices=list(ALGORITHMS))
    sw.add_argument("--seeds", default=None)
    sw.add_argument("--b", default=None, help="comma list, e.g. 1,2,5,8,10,20")
    sw.add_argument("--m", default=None, help='comma list, allows "n/8", "2n"')
    sw.set_defaults(func=cmd_sweep)

    ct = sub.add_parser("check-theory", help="desk-scale inequality suite")
    common(ct)
    for flag in ("--p", "--r", "--n"):
        ct.add_argument(flag, type=int, default=None)
    ct.add_argument("--configs", type=int, default=None,
                    help="number of sampled in-ball configurations")
    ct.add_argument("--skip-statistical", action="store_true", default=False)
    ct.set_defaults(func=cmd_check_theory)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _FlagError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_FLAGS
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_FLAGS


if __name__ == "__main__":
    sys.exit(main())
