"""Performance samplers for long embedded-chain runs.

``PathSampler`` keeps mutable per-station buffers (explicit job order for
head-of-queue stations, composition counts for order-insensitive ones) so a
step costs O(1) for the common protocols. Order-insensitive buffers are
snapshotted in class-sorted canonical order, which represents the same lumped
state; every functional used on such networks depends on the state only
through its composition.

``batch_terminal_norms`` vectorizes many replications at once for networks in
which every station serves a single class, where the state reduces to a count
vector.
"""

from __future__ import annotations

import math
from collections import deque

import numpy as np

from .configurations import insertion_index
from .network import NetworkSpec
from .qprocess import (
    NetworkState,
    routing_choices,
    state_composition,
    state_norm,
    station_top_rate,
    uniformization_rate,
)
from .rng import Uniforms


class _HQStation:
    """Explicit ordered buffer; the head holds the whole server."""

    __slots__ = ("policy", "fcfs", "buf", "branch")

    def __init__(self, spec: NetworkSpec, i: int):
        protocol = spec.protocols[i]
        self.policy = protocol.policy
        self.fcfs = protocol.policy.kind == "fcfs"
        self.buf = deque() if self.fcfs else []
        top = station_top_rate(spec, i)
        self.branch = {}
        for k in spec.stations[i]:
            scale = spec.beta[k - 1] / top
            table = tuple((cum * scale, l) for cum, l in routing_choices(spec, k))
            self.branch[k] = (scale, table)

    def reset(self, q) -> None:
        if self.fcfs:
            self.buf = deque(q)
        else:
            self.buf = list(q)

    def insert(self, k: int) -> None:
        buf = self.buf
        if self.fcfs or not buf:
            buf.append(k)
        else:
            j = insertion_index(self.policy, tuple(buf), k)
            buf.insert(j - 1, k)

    def serve(self, u: float):
        buf = self.buf
        if not buf:
            return None
        k = buf[0]
        active, table = self.branch[k]
        if u >= active:
            return None
        for cum, l in table:
            if u < cum:
                break
        if self.fcfs:
            buf.popleft()
        else:
            buf.pop(0)
        return k, l

    def snapshot(self) -> tuple[int, ...]:
        return tuple(self.buf)

    def __len__(self) -> int:
        return len(self.buf)


class _OIStation:
    """Composition-count buffer for order-insensitive allocations."""

    __slots__ = ("classes", "kind", "order", "beta_scale", "routing", "counts", "total")

    def __init__(self, spec: NetworkSpec, i: int):
        protocol = spec.protocols[i]
        self.classes = spec.stations[i]
        self.kind = protocol.allocation.kind
        ranking = protocol.allocation.ranking
        self.order = (
            tuple(next(iter(c)) for c in ranking.castes) if ranking is not None else None
        )
        top = station_top_rate(spec, i)
        self.beta_scale = {k: spec.beta[k - 1] / top for k in self.classes}
        self.routing = {k: routing_choices(spec, k) for k in self.classes}
        self.counts = {k: 0 for k in self.classes}
        self.total = 0

    def reset(self, q) -> None:
        self.counts = {k: 0 for k in self.classes}
        for k in q:
            self.counts[k] += 1
        self.total = len(q)

    def insert(self, k: int) -> None:
        self.counts[k] += 1
        self.total += 1

    def _route(self, k: int, v: float):
        choices = self.routing[k]
        for cum, l in choices:
            if v < cum:
                break
        else:
            l = choices[-1][1]
        self.counts[k] -= 1
        self.total -= 1
        return k, l

    def serve(self, u: float):
        if self.total == 0:
            return None
        if self.kind == "preferential":
            for k in self.order:
                if self.counts[k] > 0:
                    break
            active = self.beta_scale[k]
            if u >= active:
                return None
            return self._route(k, u / active)
        if self.kind == "proportional":
            total = self.total
            acc = 0.0
            for k, c in self.counts.items():
                if c == 0:
                    continue
                share = (c / total) * self.beta_scale[k]
                if u < acc + share:
                    return self._route(k, (u - acc) / share)
                acc += share
            return None
        # egalitarian
        present = [k for k, c in self.counts.items() if c > 0]
        w = 1.0 / len(present)
        acc = 0.0
        for k in present:
            share = w * self.beta_scale[k]
            if u < acc + share:
                return self._route(k, (u - acc) / share)
            acc += share
        return None

    def snapshot(self) -> tuple[int, ...]:
        return tuple(k for k in sorted(self.classes) for _ in range(self.counts[k]))

    def __len__(self) -> int:
        return self.total


class PathSampler:
    """Reusable embedded-chain runner over mutable station buffers."""

    def __init__(self, spec: NetworkSpec):
        self.spec = spec
        self.rate = uniformization_rate(spec)
        entries = []
        cum = 0.0
        for k in range(1, spec.class_count + 1):
            if spec.theta[k - 1] > 0:
                cum += spec.theta[k - 1] / self.rate
                entries.append((cum, k, None))
        for i in range(spec.station_count):
            cum += station_top_rate(spec, i) / self.rate
            entries.append((cum, 0, i))
        self.events = tuple(entries)
        self.stations = [
            _OIStation(spec, i) if spec.protocols[i].allocation.order_insensitive
            else _HQStation(spec, i)
            for i in range(spec.station_count)
        ]
        self.norm = 0
        self._uni: Uniforms | None = None

    def reset(self, xi0: NetworkState, rng, block: int | None = None) -> None:
        for st, q in zip(self.stations, xi0):
            st.reset(q)
        self.norm = state_norm(xi0)
        self._uni = Uniforms(rng, block or 4096)

    def step(self) -> None:
        uni = self._uni
        u = uni.next()
        for cum, k, i in self.events:
            if u < cum:
                break
        if k:  # arrival
            self.stations[self.spec.station_of(k)].insert(k)
            self.norm += 1
            return
        served = self.stations[i].serve(uni.next())
        if served is None:
            return
        _, l = served
        if l:
            self.stations[self.spec.station_of(l)].insert(l)
        else:
            self.norm -= 1

    def snapshot(self) -> NetworkState:
        return tuple(st.snapshot() for st in self.stations)

    # -- run helpers -------------------------------------------------------

    def run_terminal_norm(self, xi0: NetworkState, n: int, rng) -> int:
        # at most two uniforms per step, so one block serves short runs
        self.reset(xi0, rng, block=min(4096, 2 * n + 4))
        step = self.step
        for _ in range(n):
            step()
        return self.norm

    def run_norm_checkpoints(self, xi0: NetworkState, checkpoints, rng) -> list[int]:
        self.reset(xi0, rng)
        out = []
        step = self.step
        last = 0
        for cp in sorted(checkpoints):
            for _ in range(cp - last):
                step()
            last = cp
            out.append(self.norm)
        return out

    def run_functional_average(
        self, xi0: NetworkState, steps: int, burn_in: int, fn, rng, batches: int = 100
    ) -> tuple[float, float]:
        """Long-run average of fn(norm) with a batch-means standard error."""
        self.reset(xi0, rng)
        step = self.step
        for _ in range(burn_in):
            step()
        batch = max(1, steps // batches)
        means = []
        done = 0
        while done < steps:
            size = min(batch, steps - done)
            acc = 0.0
            for _ in range(size):
                step()
                acc += fn(self.norm)
            means.append(acc / size)
            done += size
        means_arr = np.asarray(means)
        mean = float(means_arr.mean())
        stderr = float(means_arr.std(ddof=1) / math.sqrt(len(means_arr))) if len(means_arr) > 1 else 0.0
        return mean, stderr

    def run_cycle_length(self, cap: int, rng) -> tuple[int, bool]:
        """Embedded steps from empty until the first return after leaving.

        Returns (steps, censored); censored means the cap was hit first.
        """
        empty = tuple(() for _ in self.spec.stations)
        self.reset(empty, rng)
        step = self.step
        steps = 0
        while self.norm == 0:  # wait for the first job
            if steps >= cap:
                return steps, True
            step()
            steps += 1
        while self.norm > 0:
            if steps >= cap:
                return steps, True
            step()
            steps += 1
        return steps, False


def is_single_class_network(spec: NetworkSpec) -> bool:
    return all(len(classes) == 1 for classes in spec.stations)


def batch_terminal_norms(
    spec: NetworkSpec, xi0: NetworkState, n: int, reps: int, rng
) -> np.ndarray:
    """Terminal job counts of ``reps`` independent replications, vectorized.

    Only valid when every station holds a single class (the state lumps to a
    per-class count vector). One event draw and one routing draw per step are
    shared across replications; each step reduces to a fixed handful of array
    operations via gather tables.
    """
    if not is_single_class_network(spec):
        raise ValueError("batch stepping requires single-class stations")
    d = spec.class_count
    lam = uniformization_rate(spec)
    event_cum: list[float] = []
    event_cls: list[int] = []
    event_dep: list[bool] = []
    cum = 0.0
    for k in range(1, d + 1):
        if spec.theta[k - 1] > 0:
            cum += spec.theta[k - 1] / lam
            event_cum.append(cum)
            event_cls.append(k)
            event_dep.append(False)
    for i in range(spec.station_count):
        cum += station_top_rate(spec, i) / lam
        event_cum.append(cum)
        event_cls.append(spec.stations[i][0])
        event_dep.append(True)
    event_cum_arr = np.asarray(event_cum)
    event_cls_arr = np.asarray(event_cls)
    event_dep_arr = np.asarray(event_dep)

    routes = {k: routing_choices(spec, k) for k in range(1, d + 1)}
    width = max(len(r) for r in routes.values())
    route_cum = np.full((d + 1, width), 2.0)  # pads never selected
    route_tgt = np.zeros((d + 1, width), dtype=np.int64)
    for k, choices in routes.items():
        for j, (c, l) in enumerate(choices):
            route_cum[k, j] = c
            route_tgt[k, j] = l

    counts = np.tile(np.asarray(state_composition(spec, xi0), dtype=np.int64), (reps, 1))
    rows = np.arange(reps)
    top = len(event_cls) - 1
    for _ in range(n):
        u = rng.random(reps)
        v = rng.random(reps)
        ev = np.searchsorted(event_cum_arr, u, side="right")
        np.clip(ev, 0, top, out=ev)
        k_of = event_cls_arr[ev]
        dep = event_dep_arr[ev]
        active_dep = dep & (counts[rows, k_of - 1] > 0)
        pick = (v[:, None] >= route_cum[k_of]).sum(axis=1)
        np.clip(pick, 0, width - 1, out=pick)
        target = route_tgt[rows * 0 + k_of, pick]
        plus = np.where(~dep, k_of, np.where(active_dep, target, 0))
        minus = np.where(active_dep, k_of, 0)
        for c in range(1, d + 1):
            counts[:, c - 1] += plus == c
            counts[:, c - 1] -= minus == c
    return counts.sum(axis=1)
