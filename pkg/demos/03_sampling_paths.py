"""Sampling the embedded chain: single paths, occupancy statistics, and the
long-run agreement with the closed-form single-queue equilibrium."""

import math
from collections import Counter

from mcqnet import (
    builtin_fixture,
    empty_state,
    equilibrium_estimate,
    master_rng,
    simulate_path,
    state_norm,
)

rng = master_rng(2024)
mm1 = builtin_fixture("mm1")

print("20 embedded steps of the single queue (arrival rate 1, service rate 2):")
path = simulate_path(mm1, empty_state(mm1), 20, rng.spawn(1)[0])
print("  jobs:", [state_norm(s) for s in path])
print()

print("occupancy over 40000 steps vs the geometric law (rho = 1/2):")
path = simulate_path(mm1, empty_state(mm1), 40_000, rng.spawn(1)[0])
norms = Counter(state_norm(s) for s in path[2_000:])
total = sum(norms.values())
for level in range(5):
    observed = norms.get(level, 0) / total
    expected = 0.5 * 0.5**level
    bar = "#" * int(60 * observed)
    print(f"  {level} jobs: observed {observed:.4f}  expected {expected:.4f}  {bar}")
print()

print("long-run E[exp(-jobs)] with batch-means error bars:")
rho = 0.5
target = (1 - rho) / (1 - rho / math.e)
mean, se = equilibrium_estimate(mm1, (1.0,), 300_000, 5_000, 1.0, rng.spawn(1)[0])
print(f"  estimate {mean:.5f} +- {se:.5f}, analytic value {target:.5f}")
print()

print("a reentrant line under preemptive priorities, started busy; class 4")
print("outranks class 1 at station 1, class 2 outranks 3 at station 2:")
lk = builtin_fixture("lk-sbp").scale_theta(1.2)
path = simulate_path(lk, ((1, 1, 4), (2, 3)), 40, rng.spawn(1)[0])
shown = 0
for step, state in enumerate(path):
    if step and state == path[step - 1]:
        continue  # skip uniformization self-loops
    print(f"  step {step:2d}: station1={list(state[0])} station2={list(state[1])}")
    shown += 1
    if shown >= 12:
        break
