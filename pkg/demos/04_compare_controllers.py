"""
Comparing the four controllers
==============================

Run the grid with a demand pulse on the links leaving junction 1 and
compare the feedback-only controller with the feedforward one, each fed
either the true state or the estimates.
"""
# %%
from tucff import bundled
from tucff.controller import VARIANTS
from tucff.metrics import compare_table, evaluate
from tucff.network import validate_network
from tucff.scenario import parse_scenario
from tucff.simulator import run_scenario
from tucff.synthesis import synthesize

net = validate_network(bundled.grid4())
gains = synthesize(net)

reports = []
for variant in VARIANTS:
    trace = run_scenario(net, parse_scenario(bundled.pulse_scenario(variant)), gains)
    reports.append(evaluate(variant, trace.x, trace.x_b, net.x_max, trace.T))
print(compare_table(reports))

# %%
# Vehicles in the network over time, sampled hourly.
for r in reports:
    n = r.total_vehicles
    print(f"{r.method:>13}: " + " ".join(f"{n[k]:6.1f}" for k in range(0, len(n), 720)))
