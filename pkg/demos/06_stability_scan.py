"""Stability-region tooling: monotone phi tables, threshold search along a
ray, and the classical subcritical-but-unstable priority line."""

import numpy as np

from mcqnet import (
    PathSampler,
    builtin_fixture,
    empty_state,
    master_rng,
    monotonicity_table,
    subcritical_bound,
    threshold_bisection,
    validate,
)

rng = master_rng(99)

print("exact phi table on the proportional reentrant line (rows: theta scale,")
print("columns: step count); the functional decreases along both axes:")
lk_prop = builtin_fixture("lk-prop")
table = monotonicity_table(lk_prop, (0.5, 1.0, 1.5), (2, 6, 10), 1.0, mode="exact", reduced=True)
header = "".join(f"   n={n:<5d}" for n in table.steps)
print("  scale " + header)
for i, a in enumerate(table.scales):
    row = "".join(f"  {table.values[i, j]:.5f}" for j in range(len(table.steps)))
    print(f"  {a:5.2f}{row}")
print(f"  monotonicity violations: {len(table.violations)}")
print()

print("threshold search on the single queue (level 0.2, analytic root 1.727):")
res = threshold_bisection(
    builtin_fixture("mm1"), (1.0,), 0.2, 8_000, 1.0, 800, rng.spawn(1)[0], iters=10
)
print(f"  bisection estimate: {res.threshold:.4f} after {len(res.trace)} probes")
print()

print("the priority reentrant line: subcritical is not enough.")
lk = builtin_fixture("lk-sbp")
bound = subcritical_bound(lk, (1.0, 0.0, 0.0, 0.0))
print(f"  workload says stable up to input rate {bound:.4f}")
print(f"  the class-2/class-4 priority pair saturates at rate {0.3 / 2:.4f}")
for scale, label in ((1.8, "subcritical yet unstable"), (0.6, "low load")):
    spec = lk.scale_theta(scale)
    rho = max(validate(spec).workload)
    sampler = PathSampler(spec)
    totals = np.zeros(2)
    reps = 30
    for _ in range(reps):
        totals += sampler.run_norm_checkpoints(
            empty_state(spec), [2_000, 20_000], rng.spawn(1)[0]
        )
    early, late = totals / reps
    print(
        f"  rate {spec.theta[0]:.2f} (workload {rho:.3f}, {label}): "
        f"mean jobs {early:.1f} at step 2e3 -> {late:.1f} at step 2e4"
    )
