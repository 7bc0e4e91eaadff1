import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from conftest import two_codeword_dataset
from gsnade import GSN
from gsnade.data import gen_spiral


def binary_X(n=128, d=5, seed=0):
    return two_codeword_dataset(n, d=d, seed=seed).examples


class TestEstimatorProtocol:
    def test_get_params_round_trip(self):
        est = GSN(recon="rnade", n_components=3, learning_rate=0.01)
        params = est.get_params()
        assert params["recon"] == "rnade"
        assert params["n_components"] == 3
        rebuilt = GSN(**params)
        assert rebuilt.get_params() == params

    def test_clone(self):
        est = GSN(recon="factorial_bernoulli", epochs=2)
        cloned = clone(est)
        assert cloned.get_params() == est.get_params()

    def test_not_fitted_errors(self):
        est = GSN()
        with pytest.raises(NotFittedError):
            est.sample(3)
        with pytest.raises(NotFittedError):
            est.score_samples(np.zeros((2, 4)))

    def test_set_params(self):
        est = GSN().set_params(epochs=1, n_hidden=4)
        assert est.epochs == 1 and est.n_hidden == 4


class TestFit:
    def test_fit_returns_self_and_sets_state(self):
        est = GSN(n_hidden=6, encoder_hidden=8, epochs=2, batch_size=16,
                  learning_rate=0.1, random_state=3)
        out = est.fit(binary_X())
        assert out is est
        assert est.n_features_in_ == 5
        assert len(est.train_reports_) == 2

    def test_binary_recon_rejects_continuous_data(self):
        est = GSN(recon="nade", epochs=1)
        with pytest.raises(ValueError, match="binary"):
            est.fit(np.random.default_rng(0).random((10, 3)))

    def test_continuous_fit(self):
        X = gen_spiral(200, 0.03, 0).examples
        est = GSN(recon="rnade", corruption="gaussian", sigma=0.3, n_hidden=8,
                  encoder_hidden=8, n_components=2, epochs=2, batch_size=50,
                  learning_rate=0.02, random_state=0)
        est.fit(X)
        samples = est.sample(20)
        assert samples.shape == (20, 2)
        assert np.all(np.isfinite(samples))

    def test_unknown_recon_rejected(self):
        with pytest.raises(ValueError, match="reconstruction"):
            GSN(recon="boltzmann").fit(binary_X())


@pytest.fixture(scope="module")
def fitted():
    est = GSN(n_hidden=6, encoder_hidden=8, epochs=4, batch_size=16,
              learning_rate=0.2, momentum=0.5, random_state=1)
    return est.fit(binary_X())


class TestSampleAndScore:
    def test_sample_shape_and_domain(self, fitted):
        samples = fitted.sample(10, sample_every=3)
        assert samples.shape == (10, 5)
        assert set(np.unique(samples)) <= {0.0, 1.0}

    def test_sample_zero(self, fitted):
        assert fitted.sample(0).shape == (0, 5)

    def test_sample_deterministic_by_default(self, fitted):
        a = fitted.sample(5)
        b = fitted.sample(5)
        assert np.array_equal(a, b)

    def test_sample_random_state_varies(self, fitted):
        a = fitted.sample(5, random_state=1)
        b = fitted.sample(5, random_state=2)
        assert not np.array_equal(a, b)

    def test_score_samples_finite(self, fitted):
        X = binary_X(12, seed=9)
        scores = fitted.score_samples(X, n_latents=100)
        assert scores.shape == (12,)
        assert np.all(np.isfinite(scores))
        assert np.all(scores <= 0.0)  # log-probabilities of binary vectors

    def test_score_is_mean(self, fitted):
        X = binary_X(8, seed=10)
        mean = fitted.score(X, n_latents=50)
        per = fitted.score_samples(X, n_latents=50)
        assert mean == pytest.approx(per.mean())

    def test_transition_matrix_exposed(self, fitted):
        T = fitted.transition_matrix()
        assert T.entries.shape == (32, 32)

    def test_refit_same_seed_reproduces(self):
        X = binary_X(64, seed=4)
        est1 = GSN(n_hidden=4, encoder_hidden=4, epochs=2, batch_size=16,
                   random_state=7).fit(X)
        est2 = GSN(n_hidden=4, encoder_hidden=4, epochs=2, batch_size=16,
                   random_state=7).fit(X)
        assert np.array_equal(est1.sample(6), est2.sample(6))
