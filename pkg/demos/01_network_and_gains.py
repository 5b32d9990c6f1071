"""
Networks and gains
==================

Build the bundled 2x2 grid, look at the two store-and-forward matrices and
synthesise the feedback and feedforward gains.
"""
# %%
import numpy as np

from tucff import bundled
from tucff.network import build_bg, build_bu, validate_network
from tucff.synthesis import controllability_rank, synthesize

net = validate_network(bundled.grid4())
print(f"{net.n_links} links, {net.n_stages} stages, {net.n_junctions} junctions, C = {net.cycle:g} s")

# %%
# ``B_u`` maps link outflows (veh/s) to occupancy change over one cycle.
# Its diagonal is -C: whatever leaves a link is lost to it.
B_u = build_bu(net)
print("diag(B_u):", np.diag(B_u)[:4], "...")

# %%
# ``B_g`` maps stage greens (s) to occupancy change.  Every stage moves
# occupancy in its own direction, so the rank equals the stage count.
B_g = build_bg(net)
print("rank(B_g) =", controllability_rank(B_g), "of", net.n_stages)

# %%
gs = synthesize(net, R_weight=1e-4)
print(f"Riccati residual {gs.dare_residual:.2e} after {gs.dare_iterations} iterations")
print("K shape", gs.K.shape, " Ke shape", gs.Ke.shape)

# %%
# With an identity state matrix the feedforward gain of the controllable
# part is exactly the inverse of its input matrix.
print("max |Ke1 B_g1 - I| =", np.abs(gs.Ke1 @ gs.B_g1 - np.eye(net.n_stages)).max())
