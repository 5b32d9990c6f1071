import numpy as np
import pytest
import scipy.linalg

from tucff.estimator import (
    EstimatorBank,
    default_covariances,
    kalman_gain,
    scalar_kalman_gain,
    steady_state_gain,
)

# scipy DARE on the dual problem, default tuning for S=0.5, x_max=100, E=20
FROZEN_KX = 0.6176385999099756
FROZEN_KE = 0.004946830258434335


def dual_dare_gain(Qx, Qe, R, E):
    A = np.array([[1.0, E], [0.0, 1.0]])
    H = np.array([[1.0, 0.0]])
    P = scipy.linalg.solve_discrete_are(A.T, H.T, np.diag([Qx, Qe]), np.array([[R]]))
    return (P @ H.T / (H @ P @ H.T + R)).ravel()


def test_default_covariances(chain2):
    Qx, Qe, R = default_covariances(chain2, 20.0)
    np.testing.assert_allclose(Qx, 1.0)
    np.testing.assert_allclose(Qe, 1e-4)
    np.testing.assert_allclose(R, 1.5625)


def test_frozen_gain():
    Kx, Ke = kalman_gain(1.0, 1e-4, 1.5625, 20.0)
    assert Kx == pytest.approx(FROZEN_KX, rel=1e-9)
    assert Ke == pytest.approx(FROZEN_KE, rel=1e-9)


@pytest.mark.parametrize("Qx, Qe, R, E", [(1.0, 1e-4, 1.5625, 20.0), (0.3, 1e-2, 4.0, 5.0), (2.0, 1e-6, 0.1, 10.0)])
def test_gain_matches_scipy_dare(Qx, Qe, R, E):
    np.testing.assert_allclose(kalman_gain(Qx, Qe, R, E), dual_dare_gain(Qx, Qe, R, E), rtol=1e-8)


def test_scalar_closed_form():
    for Qx, R in [(1.0, 1.5625), (0.01, 5.0), (10.0, 0.1)]:
        K, P = steady_state_gain(1.0, 1.0, Qx, R)
        assert scalar_kalman_gain(Qx, R) == pytest.approx(K[0, 0], rel=1e-10)


def test_zero_demand_noise_freezes_demand():
    Kx, Ke = kalman_gain(1.0, 0.0, 1.5625, 20.0)
    assert Ke == 0.0
    assert Kx == pytest.approx(scalar_kalman_gain(1.0, 1.5625))


def test_bad_covariances():
    with pytest.raises(ValueError):
        kalman_gain(0.0, 1e-4, 1.0, 20.0)
    with pytest.raises(ValueError):
        kalman_gain(1.0, 1e-4, 1.0, 0.0)


def _linear_run(bank, e_true, n_steps, seed, Qx, R):
    rng = np.random.default_rng(seed)
    Z = e_true.size
    x = np.zeros(Z)
    u0 = np.zeros(Z)
    err_y, err_x, e_hat = [], [], []
    predicted = None
    for k in range(n_steps):
        y = x + rng.normal(0, np.sqrt(R), Z)
        if predicted is None:
            bank.initialize(y)
        else:
            bank.update(predicted, y)
        err_y.append(y - x)
        err_x.append(bank.x_hat - x)
        e_hat.append(bank.e_hat.copy())
        predicted = bank.predict(u0)
        x = x + bank.E * e_true + rng.normal(0, np.sqrt(Qx), Z)
    return np.array(err_y), np.array(err_x), np.array(e_hat)


def test_filter_tracks_constant_demand(chain2):
    E = 20.0
    Qx, Qe, R = default_covariances(chain2, E)
    bank = EstimatorBank.build(chain2, E, np.zeros(2))
    e_true = np.array([0.2, -0.1])
    err_y, err_x, e_hat = _linear_run(bank, e_true, 4000, 7, Qx[0], R[0])
    mean_e = e_hat[1000:].mean(axis=0)
    np.testing.assert_allclose(mean_e, e_true, rtol=0.02)
    assert np.sqrt(np.mean(err_x[1000:] ** 2)) < np.sqrt(np.mean(err_y[1000:] ** 2))


def test_occupancy_mode_uses_historic_demand(chain2):
    e_hist = np.array([0.1, 0.05])
    bank = EstimatorBank.build(chain2, 20.0, e_hist, mode="occupancy")
    bank.initialize(np.array([10.0, 20.0]))
    x_pred, e_pred = bank.predict(np.zeros(2))
    np.testing.assert_allclose(x_pred, [12.0, 21.0])
    bank.update((x_pred, e_pred), np.array([50.0, 50.0]))
    np.testing.assert_array_equal(bank.e_hat, e_hist)


def test_prediction_includes_flows(chain2):
    bank = EstimatorBank.build(chain2, 20.0, np.zeros(2))
    bank.initialize(np.array([30.0, 0.0]))
    x_pred, _ = bank.predict(np.array([0.1, 0.0]))
    # link 1 loses 2 vehicles, link 2 gains them
    np.testing.assert_allclose(x_pred, [28.0, 2.0])


def test_unknown_mode(chain2):
    with pytest.raises(ValueError):
        EstimatorBank.build(chain2, 20.0, np.zeros(2), mode="psychic")
