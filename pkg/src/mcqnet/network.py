"""Network specification, routing algebra and built-in example networks.

A network has d job classes partitioned over stations, per-class Poisson
arrival rates theta and exponential service rates beta, and a substochastic
routing matrix R (row deficits are exit probabilities). Validation computes
the effective arrival rates gamma = (I - R')^{-1} theta, the per-station
nominal workload rho_i = sum_{k at i} gamma_k / beta_k, a transience
certificate for R and the irreducibility flag gamma > 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .allocation import ServiceAllocation, StationProtocol
from .configurations import PriorityRanking, QueuePolicy
from .errors import (
    DimensionMismatchError,
    NegativeRateError,
    NonTransientRoutingError,
    UnknownFixtureError,
)

_TOL = 1e-12


@dataclass(frozen=True)
class NetworkSpec:
    class_count: int
    stations: tuple[tuple[int, ...], ...]
    theta: tuple[float, ...]
    beta: tuple[float, ...]
    routing: tuple[tuple[float, ...], ...]
    protocols: tuple[StationProtocol, ...]
    # class -> 0-based station index, derived in __post_init__
    _station_of: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        d = self.class_count
        lookup = [-1] * (d + 1)
        for i, classes in enumerate(self.stations):
            for k in classes:
                if not 1 <= k <= d:
                    raise DimensionMismatchError(f"class {k} outside 1..{d}")
                if lookup[k] != -1:
                    raise DimensionMismatchError(f"class {k} assigned to two stations")
                lookup[k] = i
        if any(s == -1 for s in lookup[1:]):
            raise DimensionMismatchError("stations do not cover every class")
        object.__setattr__(self, "_station_of", tuple(lookup))

    @property
    def station_count(self) -> int:
        return len(self.stations)

    def station_of(self, k: int) -> int:
        return self._station_of[k]

    def classes_at(self, i: int) -> tuple[int, ...]:
        return self.stations[i]

    def exit_probability(self, k: int) -> float:
        return 1.0 - sum(self.routing[k - 1])

    def with_theta(self, theta) -> "NetworkSpec":
        theta = tuple(float(x) for x in theta)
        if len(theta) != self.class_count:
            raise DimensionMismatchError("theta length must equal the class count")
        return replace(self, theta=theta)

    def scale_theta(self, a: float) -> "NetworkSpec":
        return self.with_theta(tuple(a * x for x in self.theta))


@dataclass(frozen=True)
class RoutingAnalysis:
    effective_rates: tuple[float, ...]
    workload: tuple[float, ...]
    irreducible: bool
    transient: bool
    decay_power: int  # power of R certified entrywise below 1e-12


def _check_structure(spec: NetworkSpec) -> None:
    d = spec.class_count
    if d < 1:
        raise DimensionMismatchError("need at least one class")
    if len(spec.theta) != d or len(spec.beta) != d:
        raise DimensionMismatchError("theta/beta length must equal the class count")
    if len(spec.routing) != d or any(len(row) != d for row in spec.routing):
        raise DimensionMismatchError("routing matrix must be d x d")
    if len(spec.protocols) != len(spec.stations):
        raise DimensionMismatchError("one protocol per station required")
    if any(t < 0 for t in spec.theta):
        raise NegativeRateError("arrival rates must be nonnegative")
    if any(b <= 0 for b in spec.beta):
        raise NegativeRateError("service rates must be positive")
    for k, row in enumerate(spec.routing, start=1):
        if any(x < -_TOL or x > 1 + _TOL for x in row):
            raise ValueError(f"routing entries of class {k} outside [0, 1]")
        if sum(row) > 1 + 1e-9:
            raise ValueError(f"routing row of class {k} sums above 1")
    for i, protocol in enumerate(spec.protocols):
        classes = frozenset(spec.stations[i])
        for ranking in (protocol.policy.ranking, protocol.allocation.ranking):
            if ranking is not None and ranking.classes != classes:
                raise ValueError(
                    f"ranking at station {i + 1} must cover exactly its classes {sorted(classes)}"
                )


def _transience_power(routing: np.ndarray) -> int:
    """Smallest 2^p with max|R^(2^p)| < 1e-12, or -1 if none within 64 doublings."""
    m = routing.copy()
    for p in range(64):
        top = float(np.abs(m).max())
        if top < _TOL:
            return 2**p if p else 1
        if not np.isfinite(top) or top > 1e12:
            return -1
        m = m @ m
    return -1


def validate(spec: NetworkSpec) -> RoutingAnalysis:
    """Check the spec and compute routing algebra; raises on structural defects."""
    _check_structure(spec)
    routing = np.array(spec.routing, dtype=float)
    power = _transience_power(routing)
    if power < 0:
        raise NonTransientRoutingError("routing matrix not transient: powers do not vanish")
    d = spec.class_count
    theta = np.array(spec.theta, dtype=float)
    system = np.eye(d) - routing.T
    gamma = np.linalg.solve(system, theta)
    residual = float(np.abs(system @ gamma - theta).max())
    if residual > 1e-10:
        raise NonTransientRoutingError(f"traffic equations ill-conditioned (residual {residual:.2e})")
    beta = np.array(spec.beta, dtype=float)
    workload = tuple(
        float(sum(gamma[k - 1] / beta[k - 1] for k in classes)) for classes in spec.stations
    )
    return RoutingAnalysis(
        effective_rates=tuple(float(g) for g in gamma),
        workload=workload,
        irreducible=bool((gamma > _TOL).all()),
        transient=True,
        decay_power=power,
    )


def workload_matrix(spec: NetworkSpec) -> np.ndarray:
    """Matrix C with rho(theta) = C theta; row i is station i's workload functional."""
    d = spec.class_count
    routing = np.array(spec.routing, dtype=float)
    inv = np.linalg.inv(np.eye(d) - routing.T)
    c = np.zeros((spec.station_count, d))
    for i, classes in enumerate(spec.stations):
        for k in classes:
            c[i] += inv[k - 1] / spec.beta[k - 1]
    return c


# ---------------------------------------------------------------------------
# Built-in networks

def _fcfs_hq() -> StationProtocol:
    return StationProtocol(QueuePolicy.fcfs(), ServiceAllocation.head_of_queue())


def _reentrant_routing() -> tuple[tuple[float, ...], ...]:
    # deterministic line 1 -> 2 -> 3 -> 4 -> exit
    rows = []
    for k in range(1, 5):
        row = [0.0] * 4
        if k < 4:
            row[k] = 1.0
        rows.append(tuple(row))
    return tuple(rows)


def builtin_fixture(name: str) -> NetworkSpec:
    """Named example networks used throughout the tests and demos.

    mm1            single class, theta=1, beta=2, FCFS.
    tandem2        two single-class stations in series, theta=(1,0), beta=(2,2.5).
    lk-prop        two-station reentrant line with proportional allocation,
                   theta=(1,0,0,0), beta=(4,3,5,2).
    lk-sbp         same line under preemptive priorities (preferential
                   allocation: class 4 over 1, class 2 over 3),
                   theta=(0.1,0,0,0), beta=(0.8,0.3,0.8,0.3).
    fcfs-reentrant same line, FCFS head-of-queue everywhere,
                   theta=(0.04,0,0,0), beta=(0.16,0.12,0.20,0.08).
    """
    if name == "mm1":
        return NetworkSpec(
            class_count=1,
            stations=((1,),),
            theta=(1.0,),
            beta=(2.0,),
            routing=((0.0,),),
            protocols=(_fcfs_hq(),),
        )
    if name == "tandem2":
        return NetworkSpec(
            class_count=2,
            stations=((1,), (2,)),
            theta=(1.0, 0.0),
            beta=(2.0, 2.5),
            routing=((0.0, 1.0), (0.0, 0.0)),
            protocols=(_fcfs_hq(), _fcfs_hq()),
        )
    if name == "lk-prop":
        proportional = StationProtocol(QueuePolicy.fcfs(), ServiceAllocation.proportional())
        return NetworkSpec(
            class_count=4,
            stations=((1, 4), (2, 3)),
            theta=(1.0, 0.0, 0.0, 0.0),
            beta=(4.0, 3.0, 5.0, 2.0),
            routing=_reentrant_routing(),
            protocols=(proportional, proportional),
        )
    if name == "lk-sbp":
        pref1 = StationProtocol(
            QueuePolicy.fcfs(),
            ServiceAllocation.preferential(PriorityRanking.total((4, 1))),
        )
        pref2 = StationProtocol(
            QueuePolicy.fcfs(),
            ServiceAllocation.preferential(PriorityRanking.total((2, 3))),
        )
        return NetworkSpec(
            class_count=4,
            stations=((1, 4), (2, 3)),
            theta=(0.1, 0.0, 0.0, 0.0),
            beta=(0.8, 0.3, 0.8, 0.3),
            routing=_reentrant_routing(),
            protocols=(pref1, pref2),
        )
    if name == "fcfs-reentrant":
        return NetworkSpec(
            class_count=4,
            stations=((1, 4), (2, 3)),
            theta=(0.04, 0.0, 0.0, 0.0),
            beta=(0.16, 0.12, 0.20, 0.08),
            routing=_reentrant_routing(),
            protocols=(_fcfs_hq(), _fcfs_hq()),
        )
    raise UnknownFixtureError(f"unknown fixture {name!r}")


FIXTURE_NAMES = ("mm1", "tandem2", "lk-prop", "lk-sbp", "fcfs-reentrant")


# ---------------------------------------------------------------------------
# JSON interchange

def _ranking_to_json(ranking: PriorityRanking | None):
    if ranking is None:
        return None
    if ranking.is_total:
        return [next(iter(c)) for c in ranking.castes]
    return [sorted(c) for c in ranking.castes]


def _ranking_from_json(data) -> PriorityRanking:
    if all(isinstance(x, int) for x in data):
        return PriorityRanking.total(tuple(data))
    return PriorityRanking.from_lists(data)


def spec_to_dict(spec: NetworkSpec) -> dict:
    protocols = []
    for protocol in spec.protocols:
        entry: dict = {
            "policy": protocol.policy.kind,
            "allocation": protocol.allocation.kind,
        }
        ranking = protocol.policy.ranking or protocol.allocation.ranking
        if ranking is not None:
            entry["ranking"] = _ranking_to_json(ranking)
        protocols.append(entry)
    return {
        "classes": spec.class_count,
        "stations": [list(s) for s in spec.stations],
        "theta": list(spec.theta),
        "beta": list(spec.beta),
        "routing": [list(row) for row in spec.routing],
        "protocols": protocols,
    }


def spec_from_dict(data: dict) -> NetworkSpec:
    protocols = []
    for entry in data["protocols"]:
        ranking = _ranking_from_json(entry["ranking"]) if "ranking" in entry else None
        kind = entry["policy"]
        policy = QueuePolicy(kind, ranking if kind == "sbp" else None)
        alloc_kind = entry["allocation"]
        allocation = ServiceAllocation(
            alloc_kind, ranking if alloc_kind == "preferential" else None
        )
        protocols.append(StationProtocol(policy, allocation))
    return NetworkSpec(
        class_count=int(data["classes"]),
        stations=tuple(tuple(int(k) for k in s) for s in data["stations"]),
        theta=tuple(float(x) for x in data["theta"]),
        beta=tuple(float(x) for x in data["beta"]),
        routing=tuple(tuple(float(x) for x in row) for row in data["routing"]),
        protocols=tuple(protocols),
    )


def dump_spec(spec: NetworkSpec, path) -> None:
    with open(path, "w") as fh:
        json.dump(spec_to_dict(spec), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_spec(path) -> NetworkSpec:
    with open(path) as fh:
        return spec_from_dict(json.load(fh))
