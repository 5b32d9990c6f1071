"""
Estimating occupancy and demand
===============================

A per-link Kalman filter tracks occupancy and the exogenous demand from
noisy occupancy readings taken every E = 20 s.
"""
# %%
import numpy as np

from tucff import bundled
from tucff.estimator import EstimatorBank, kalman_gain, default_covariances
from tucff.network import validate_network

net = validate_network(bundled.chain2())
E = 20.0
Qx, Qe, R = default_covariances(net, E)
print("Qx, Qe, R on link 1:", Qx[0], Qe[0], R[0])
print("steady-state gain (Kx, Ke):", kalman_gain(Qx[0], Qe[0], R[0], E))

# %%
# Drive a linear random walk with constant demand and watch the estimate.
rng = np.random.default_rng(0)
e_true = np.array([0.2, 0.05])
bank = EstimatorBank.build(net, E, e_hist=np.zeros(2))
x = np.zeros(2)
predicted = None
history = []
for k in range(5000):
    y = x + rng.normal(0, np.sqrt(R))
    if predicted is None:
        bank.initialize(y)
    else:
        bank.update(predicted, y)
    history.append(bank.e_hat.copy())
    predicted = bank.predict(np.zeros(2))
    x = x + E * e_true + rng.normal(0, np.sqrt(Qx))

history = np.array(history)
print("true demand      :", e_true)
print("mean estimate    :", history[1000:].mean(axis=0).round(4))
print("estimate std dev :", history[1000:].std(axis=0).round(4))
