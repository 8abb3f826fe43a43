import numpy as np
import pytest
from sklearn.base import clone

from lrsdp import LowRankRecovery, generate


@pytest.fixture(scope="module")
def sensing_data():
    # Long, well-conditioned instance: the sbb schedule self-tunes safely.
    inst = generate(p=10, r=2, n=2000, seed=8)
    return inst


class TestSklearnContract:
    def test_get_params_roundtrip(self):
        est = LowRankRecovery(rank=3, algorithm="svrg-i", b=2, eta=0.5)
        params = est.get_params()
        assert params["rank"] == 3
        assert params["algorithm"] == "svrg-i"
        est2 = LowRankRecovery().set_params(**params)
        assert est2.get_params() == params

    def test_clone(self):
        est = LowRankRecovery(rank=2, m=50, step="bb", eta=0.1)
        cloned = clone(est)
        assert cloned.get_params() == est.get_params()

    def test_constructor_stores_params_untouched(self):
        est = LowRankRecovery(rank=5, eta="auto")
        assert est.eta == "auto" and est.rank == 5
        assert not hasattr(est, "matrix_")


class TestFit:
    def test_recovers_planted_matrix(self, sensing_data):
        inst = sensing_data
        est = LowRankRecovery(rank=2, step="sbb", eta="auto", max_outer=40,
                              tol=1e-18, random_state=0)
        est.fit(inst.a, inst.y)
        rel = (np.linalg.norm(est.matrix_ - inst.x_star)
               / np.linalg.norm(inst.x_star)) ** 2
        assert rel <= 1e-6
        assert est.factor_.shape == (10, 2)
        assert est.n_iter_ >= 1
        assert len(est.trace_.rel_error) == est.n_iter_ + 1

    def test_predict_interpolates_training_measurements(self, sensing_data):
        inst = sensing_data
        est = LowRankRecovery(rank=2, step="sbb", eta="auto", max_outer=40,
                              tol=1e-18, random_state=0).fit(inst.a, inst.y)
        pred = est.predict(inst.a)
        assert np.linalg.norm(pred - inst.y) <= 1e-3 * np.linalg.norm(inst.y)
        assert est.score(inst.a, inst.y) >= 0.999

    def test_tol_stops_early(self, sensing_data):
        inst = sensing_data
        loose = LowRankRecovery(rank=2, step="sbb", eta="auto", max_outer=40,
                                tol=1e-4, random_state=0).fit(inst.a, inst.y)
        assert loose.converged_
        tight = LowRankRecovery(rank=2, step="sbb", eta="auto", max_outer=40,
                                tol=1e-18, random_state=0).fit(inst.a, inst.y)
        assert loose.n_iter_ <= tight.n_iter_

    def test_deterministic_given_random_state(self, sensing_data):
        inst = sensing_data
        a = LowRankRecovery(rank=2, max_outer=10, random_state=3).fit(inst.a, inst.y)
        b = LowRankRecovery(rank=2, max_outer=10, random_state=3).fit(inst.a, inst.y)
        assert np.array_equal(a.matrix_, b.matrix_)

    def test_fixed_step_algorithms(self, sensing_data):
        inst = sensing_data
        eta = 1.0 / (4.0 * inst.l_hat * np.linalg.norm(inst.x_star))
        est = LowRankRecovery(rank=2, algorithm="fgd", step="fixed", eta=eta,
                              max_outer=50, tol=1e-6, random_state=0)
        est.fit(inst.a, inst.y)
        assert est.trace_.algorithm == "fgd"


class TestValidation:
    def test_rejects_bad_shapes(self, rng):
        est = LowRankRecovery(rank=1)
        with pytest.raises(ValueError):
            est.fit(rng.standard_normal((5, 4, 3)), np.zeros(5))
        with pytest.raises(ValueError):
            est.fit(rng.standard_normal((5, 4, 4)), np.zeros(6))

    def test_rejects_non_finite(self, rng):
        a = rng.standard_normal((4, 3, 3))
        a[1, 0, 0] = np.nan
        with pytest.raises(ValueError):
            LowRankRecovery(rank=1).fit(a, np.zeros(4))

    def test_rejects_bad_rank(self, rng):
        a = rng.standard_normal((4, 3, 3))
        with pytest.raises(ValueError):
            LowRankRecovery(rank=7).fit(a, np.zeros(4))
        with pytest.raises(ValueError):
            LowRankRecovery(rank=0).fit(a, np.zeros(4))

    def test_rejects_unknown_algorithm(self, rng):
        a = rng.standard_normal((4, 3, 3))
        with pytest.raises(ValueError):
            LowRankRecovery(rank=1, algorithm="nope").fit(a, np.zeros(4))

    def test_predict_requires_fit(self, rng):
        from sklearn.exceptions import NotFittedError
        with pytest.raises(NotFittedError):
            LowRankRecovery(rank=1).predict(rng.standard_normal((2, 3, 3)))

    def test_predict_rejects_mismatched_dimension(self, sensing_data, rng):
        inst = sensing_data
        est = LowRankRecovery(rank=2, max_outer=3, random_state=0)
        est.fit(inst.a, inst.y)
        with pytest.raises(ValueError):
            est.predict(rng.standard_normal((2, 7, 7)))
