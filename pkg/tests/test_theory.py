import math

import numpy as np
import pytest

from lrsdp import (SolverConfig, StepSchedule, constants,
                   constants_for_instance, factor_distance_sq, run_svrg_sdp,
                   sbb_m_bound, theory)

SQRT2 = math.sqrt(2.0)


@pytest.fixture(scope="module")
def desk_consts(theory_instance):
    return constants_for_instance(theory_instance)


class TestConstants:
    def test_closed_form_recompute(self):
        # kappa=2, sigma_r=1, ||X*||_2=2, ||X*||_F=sqrt(5), L=2.
        x_star = np.diag([2.0, 1.0])
        c = constants(2.0, 1.0, x_star, r=2)
        assert c.kappa == pytest.approx(2.0)
        g0 = (SQRT2 - 1.0) / 2.0
        assert c.gamma0 == pytest.approx(g0, rel=1e-15)
        ball_norm_bound = math.sqrt(5.0) + (2.0 + math.sqrt(g0)) * math.sqrt(2.0) \
            * math.sqrt(g0 * 1.0)
        assert c.ball_norm_bound == pytest.approx(ball_norm_bound, rel=1e-12)
        eta_max = g0 * 1.0 / (54.0 * (2.0 + math.sqrt(g0)) ** 2 * 2.0 * 2.0
                              * ball_norm_bound)
        assert c.eta_max == pytest.approx(eta_max, rel=1e-12)
        assert c.b_max == pytest.approx(54.0 * (SQRT2 + 1.0) * 2.0 * 2.0,
                                        rel=1e-12)
        assert c.init_radius == pytest.approx(8.0 * (SQRT2 - 1.0) / 18.0,
                                              rel=1e-12)
        assert c.kappa_in_range

    def test_kappa_boundary_flagged(self):
        c = constants(1.0, 1.0, np.diag([2.0, 1.0]), r=2)
        assert c.kappa == 1.0
        assert not c.kappa_in_range
        big = constants(100.0, 1.0, np.diag([2.0, 1.0]), r=2)
        assert not big.kappa_in_range

    def test_rho_limits(self, desk_consts):
        c = desk_consts
        eta = c.eta_max
        assert c.rho(eta, 10 ** 9) == pytest.approx(0.5)
        assert 0.0 < c.rho(eta, 1) < 1.0

    def test_rho_monotone(self, desk_consts):
        c = desk_consts
        etas = np.linspace(0.1, 1.0, 8) * c.eta_max
        rhos = [c.rho(e, 5) for e in etas]
        assert all(b < a for a, b in zip(rhos, rhos[1:]))
        ms = [1, 2, 5, 20, 100]
        rhos_m = [c.rho(c.eta_max, m) for m in ms]
        assert all(b < a for a, b in zip(rhos_m, rhos_m[1:]))

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            constants(1.0, -1.0, np.eye(2), 1)
        with pytest.raises(ValueError):
            constants(1.0, 2.0, np.eye(2), 1)

    def test_constant_identities(self, theory_instance, desk_consts):
        rep = theory.check_constant_identities(desk_consts, theory_instance.n)
        assert rep.all_passed
        names = [r.name for r in rep.results]
        assert any("eta_chain" in n for n in names)

    def test_b_limit(self, desk_consts):
        assert desk_consts.b_limit(10) == 10
        assert desk_consts.b_limit(10 ** 9) == math.floor(desk_consts.b_max)


class TestSbbMBound:
    def test_large_epsilon_limit(self, desk_consts):
        assert sbb_m_bound(desk_consts, b=1, epsilon=1e30,
                           mu=desk_consts.mu) == 1

    def test_batch_inverse_proportionality(self, desk_consts):
        c = desk_consts
        exact = 1.0 / ((c.mu + 0.0) * c.eta_max)
        assert sbb_m_bound(c, 1, 0.0, c.mu) == math.ceil(exact)
        assert sbb_m_bound(c, 2, 0.0, c.mu) == math.ceil(exact / 2.0)

    def test_closed_form_recompute(self, desk_consts):
        c = desk_consts
        eps = 1e-10
        assert sbb_m_bound(c, 1, eps, c.mu) == math.ceil(
            1.0 / ((c.mu + eps) * c.eta_max))

    def test_invalid_batch(self, desk_consts):
        with pytest.raises(ValueError):
            sbb_m_bound(desk_consts, b=0, epsilon=0.0, mu=1.0)


class TestSecondOrderDescent:
    def test_trivial_at_optimum(self, theory_instance, desk_consts):
        inst = theory_instance
        rep = theory.check_second_order_descent(
            inst, inst.u_star, inst.u_star, inst.u_star,
            0.5 * desk_consts.eta_max, desk_consts)
        assert rep.all_passed
        res = rep.results[-1]
        assert res.lhs <= 1e-12 and res.rhs <= 1e-12

    def test_zero_step_equality_case(self, theory_instance, desk_consts):
        inst = theory_instance
        rng = np.random.default_rng(2)
        ball = desk_consts.gamma0 * desk_consts.sigma_r
        u = theory.sample_ball_factor(inst.u_star, 0.4 * ball, rng)
        rep = theory.check_second_order_descent(inst, u, u, inst.u_star,
                                                0.0, desk_consts)
        assert rep.all_passed

    def test_sampled_ball_configurations(self, theory_instance, desk_consts):
        inst = theory_instance
        rng = np.random.default_rng(7)
        ball = desk_consts.gamma0 * desk_consts.sigma_r
        for _ in range(20):
            u_t = theory.sample_ball_factor(inst.u_star,
                                            ball * rng.uniform(0.05, 0.9), rng)
            u_a = theory.sample_ball_factor(inst.u_star,
                                            ball * rng.uniform(0.05, 0.9), rng)
            eta = desk_consts.eta_max * rng.uniform(0.1, 1.0)
            rep = theory.check_second_order_descent(inst, u_t, u_a,
                                                    inst.u_star, eta,
                                                    desk_consts)
            assert rep.all_passed

    def test_outside_ball_reports_precondition(self, theory_instance,
                                               desk_consts):
        inst = theory_instance
        rng = np.random.default_rng(8)
        far = theory.sample_ball_factor(
            inst.u_star, 10.0 * desk_consts.gamma0 * desk_consts.sigma_r, rng)
        rep = theory.check_second_order_descent(inst, far, far, inst.u_star,
                                                desk_consts.eta_max, desk_consts)
        assert all(r.informational for r in rep.results)


class TestGradientBounds:
    def test_trivial_at_optimum(self, theory_instance, desk_consts):
        inst = theory_instance
        rep = theory.check_gradient_bounds(inst, inst.u_star, inst.u_star,
                                           inst.u_star, desk_consts)
        assert rep.all_passed

    def test_coinciding_anchor(self, theory_instance, desk_consts):
        inst = theory_instance
        rng = np.random.default_rng(9)
        ball = desk_consts.gamma0 * desk_consts.sigma_r
        u = theory.sample_ball_factor(inst.u_star, 0.3 * ball, rng)
        rep = theory.check_gradient_bounds(inst, u, u, inst.u_star, desk_consts)
        assert rep.all_passed

    def test_sampled_ball_configurations(self, theory_instance, desk_consts):
        inst = theory_instance
        rng = np.random.default_rng(10)
        ball = desk_consts.gamma0 * desk_consts.sigma_r
        for _ in range(20):
            u_t = theory.sample_ball_factor(inst.u_star,
                                            ball * rng.uniform(0.05, 0.9), rng)
            u_a = theory.sample_ball_factor(inst.u_star,
                                            ball * rng.uniform(0.05, 0.9), rng)
            rep = theory.check_gradient_bounds(inst, u_t, u_a, inst.u_star,
                                               desk_consts)
            assert rep.all_passed


class TestFeasibility:
    def test_exact_at_optimum(self, theory_instance, desk_consts):
        inst = theory_instance
        rep = theory.check_feasibility_lemma(inst, inst.u_star, inst.u_star,
                                             desk_consts)
        assert rep.all_passed
        by_name = {r.name: r for r in rep.results}
        # at an aligned point even the informational column-space claim holds
        assert by_name["column_space_alignment"].passed

    def test_sampled_ball_configurations(self, theory_instance, desk_consts):
        inst = theory_instance
        rng = np.random.default_rng(12)
        ball = desk_consts.gamma0 * desk_consts.sigma_r
        for _ in range(20):
            u = theory.sample_ball_factor(inst.u_star,
                                          ball * rng.uniform(0.05, 0.9), rng)
            rep = theory.check_feasibility_lemma(inst, u, inst.u_star,
                                                 desk_consts)
            assert rep.all_passed
            by_name = {r.name: r for r in rep.results}
            assert by_name["column_space_alignment"].informational


class TestContraction:
    def test_start_at_optimum_trivially_passes(self, theory_instance,
                                               desk_consts):
        inst = theory_instance
        cfg = SolverConfig(algorithm="svrg-sdp", rank=inst.r,
                           schedule=StepSchedule.fixed(desk_consts.eta_max),
                           m=inst.n, b=1, max_outer=3, seed=1,
                           target_rel_error=0.0)
        trace = run_svrg_sdp(inst, inst.u_star, cfg)
        rep = theory.check_contraction(trace, desk_consts, m=inst.n)
        assert rep.all_passed

    def test_fgd_deterministic_single_trace(self, theory_instance, desk_consts):
        # m=1, b=n: the expectation degenerates, one trace suffices.
        inst = theory_instance
        eta = desk_consts.eta_max
        cfg = SolverConfig(algorithm="svrg-sdp", rank=inst.r,
                           schedule=StepSchedule.fixed(eta), m=1, b=inst.n,
                           max_outer=10, seed=1, target_rel_error=0.0)
        rng = np.random.default_rng(3)
        u0 = theory.sample_ball_factor(inst.u_star,
                                       0.5 * desk_consts.init_radius, rng)
        trace = run_svrg_sdp(inst, u0, cfg)
        rep = theory.check_contraction(trace, desk_consts, m=1)
        assert rep.all_passed

    def test_outside_ball_precondition(self, theory_instance, desk_consts):
        inst = theory_instance
        rng = np.random.default_rng(4)
        u0 = theory.sample_ball_factor(inst.u_star,
                                       5.0 * desk_consts.init_radius, rng)
        cfg = SolverConfig(algorithm="svrg-sdp", rank=inst.r,
                           schedule=StepSchedule.fixed(desk_consts.eta_max),
                           m=10, b=1, max_outer=2, seed=1,
                           target_rel_error=0.0)
        trace = run_svrg_sdp(inst, u0, cfg)
        rep = theory.check_contraction(trace, desk_consts, m=10)
        assert all(r.informational for r in rep.results)


class TestHelpers:
    def test_variance_zero_at_anchor(self, theory_instance):
        inst = theory_instance
        assert theory.semi_stochastic_variance(inst, inst.u_star,
                                               inst.u_star) == 0.0

    def test_sample_ball_factor_hits_target(self, theory_instance):
        rng = np.random.default_rng(5)
        target = 0.123
        u = theory.sample_ball_factor(theory_instance.u_star, target, rng)
        d = factor_distance_sq(u, theory_instance.u_star)
        assert d == pytest.approx(target, rel=0.02)

    def test_report_serialization(self, tmp_path, desk_consts, theory_instance):
        rep = theory.check_constant_identities(desk_consts, theory_instance.n)
        path = tmp_path / "report.txt"
        rep.to_file(path)
        lines = path.read_text().splitlines()
        assert len(lines) == len(rep.results)
        assert all(("pass" in ln or "fail" in ln) and "lhs=" in ln
                   for ln in lines)
