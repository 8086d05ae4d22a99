"""Two-mode chain: solve the value function and compare it with a rollout.

Mode 0 flows right at unit speed until it hits A = [1, 3], jumps to x = 0 in
mode 1 (cost 0.5) and then flows on until the target x >= 1 (terminal cost 1).
With a single admissible policy the optimal cost is 0.5 e^-1 + e^-2.

    python3 demos/chain_value.py
"""

import math

import numpy as np

from hybridreach import Grid, bundled, evaluate_cost, simulate, solve_qvi

inst = bundled("e4")
system = inst.system
exact = 0.5 * math.exp(-1.0) + math.exp(-2.0)

# Rollout of the instance's policy: events are localized to round-off.
traj = simulate(system, [0.0], 0, inst.policy, 10.0)
for event in traj.events:
    print(f"{event.tag:>12s}  t = {event.t:.12f}  mode {event.q}")
print(f"simulated J = {float(evaluate_cost(system, traj, inst.policy)):.12f}   closed form {exact:.12f}")

# Value iteration on successively finer grids: the error stays within a few dx.
for dx in (0.04, 0.02, 0.01):
    grid = Grid.build(system, dx)
    field, report = solve_qvi(system, grid, dx / 2)
    v0 = field([0.0], 0)
    print(f"dx = {dx:<5}  V(0) = {v0:.6f}  error {abs(v0 - exact):.2e}  ({report.iterations} sweeps)")

# The value along mode 0 decays towards the jump set, where it equals the jump
# cost plus the value at the landing point.
grid = Grid.build(system, 0.05)
field, _ = solve_qvi(system, grid, 0.025)
xs = np.linspace(-0.5, 1.0, 7)
print("x      " + "  ".join(f"{x:6.2f}" for x in xs))
print("V(x,0) " + "  ".join(f"{v:6.3f}" for v in field(xs[:, None], 0)))
