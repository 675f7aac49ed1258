"""Tour of network specifications: building one, validating it, reading the
routing algebra, and the built-in example networks."""

import json

from mcqnet import FIXTURE_NAMES, builtin_fixture, spec_from_dict, spec_to_dict, validate

print("=" * 70)
print("Built-in networks")
print("=" * 70)
for name in FIXTURE_NAMES:
    spec = builtin_fixture(name)
    analysis = validate(spec)
    rho = ", ".join(f"{r:.3f}" for r in analysis.workload)
    print(
        f"{name:15s} classes={spec.class_count} stations={spec.station_count} "
        f"workload=({rho}) irreducible={analysis.irreducible}"
    )

print()
print("=" * 70)
print("A network from a JSON document")
print("=" * 70)
document = {
    "classes": 3,
    "stations": [[1, 3], [2]],
    "theta": [0.5, 0.0, 0.0],
    "beta": [2.0, 1.5, 1.8],
    # class 1 -> 2 -> 3 -> leave; rows may sum below one (deficit = exit)
    "routing": [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]],
    "protocols": [
        {"policy": "sbp", "ranking": [[3], [1]], "allocation": "hq"},
        {"policy": "fcfs", "allocation": "hq"},
    ],
}
spec = spec_from_dict(document)
analysis = validate(spec)
print(json.dumps(spec_to_dict(spec), indent=2)[:400], "...")
print()
print("effective rates:", [round(g, 6) for g in analysis.effective_rates])
print("station workloads:", [round(r, 6) for r in analysis.workload])
print("routing transient at matrix power:", analysis.decay_power)

print()
print("arrival rates are the experiment variable: scaling theta by 2.2 scales")
scaled = validate(spec.scale_theta(2.2))
print("  rates to", [round(g, 6) for g in scaled.effective_rates])
print("  workloads to", [round(r, 6) for r in scaled.workload])
