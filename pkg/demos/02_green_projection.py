"""
Feasible green times
====================

The control law gives unconstrained greens.  Each junction then projects
them onto ``{g >= g_min, sum(g) + L = C}``.
"""
# %%
import numpy as np

from tucff.controller import project_greens

g_min = np.array([15.0, 15.0, 10.0])
for raw in ([40.0, 40.0, 40.0], [120.0, -30.0, 5.0], [-50.0, -50.0, -50.0]):
    g = project_greens(raw, g_min, lost_time=10, cycle=100)
    print(f"{raw} -> {np.round(g, 3)}  (sum + L = {g.sum() + 10:g})")

# %%
# Projection is idempotent and does not care about a common offset.
g = np.array([70.0, 10.0, 30.0])
p = project_greens(g, g_min, 10, 100)
print(np.allclose(project_greens(p, g_min, 10, 100), p), np.allclose(project_greens(g + 37, g_min, 10, 100), p))
