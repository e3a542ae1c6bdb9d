"""Exact event-driven simulation of the N-node networks.

Every simulator runs a Gillespie loop with aggregated event classes
(arrivals, class-1 services, class-2 services) and picks the affected node
or job in O(1): jobs of each class live in swap-remove arrays, and the set
of non-saturated nodes is an indexable set.

The empirical distribution of node states is sampled on a uniform time
grid and returned as a :class:`~reroute_mf.trajectory.Trajectory`.  All
randomness comes from a single :class:`~reroute_mf.core.RngStream`, so a
run is a deterministic function of its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .core import DarParams, ProbVec, RistParams, RngStream, dar_space, enumerate_rist_space
from .trajectory import Trajectory

__all__ = [
    "RistNetworkState",
    "DarNetworkState",
    "UState",
    "UPath",
    "CouplingDefect",
    "CouplingReport",
    "empty_rist_state",
    "saturated_rist_state",
    "empty_dar_state",
    "rist_empirical",
    "dar_empirical",
    "simulate_rist",
    "simulate_dar",
    "simulate_u",
    "simulate_coupled",
    "saturation_experiment",
]


# ----------------------------------------------------------------------------
# states
# ----------------------------------------------------------------------------


@dataclass
class RistNetworkState:
    """Per-node class-1 counts ``x`` and class-2 counts ``y``."""

    x: np.ndarray
    y: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.int64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.x.shape != self.y.shape or self.x.ndim != 1:
            raise ValueError("x and y must be vectors of equal length")

    @property
    def N(self) -> int:
        return self.x.size

    def validate(self, C: int):
        if np.any(self.x < 0) or np.any(self.y < 0):
            raise ValueError("negative job counts")
        if np.any(self.x + self.y > C):
            raise ValueError(f"node occupancy exceeds capacity {C}")

    def totals(self, C: int) -> tuple:
        """``(empty places, class-1 jobs, class-2 jobs)`` over the network."""
        z1, z2 = int(self.x.sum()), int(self.y.sum())
        return C * self.N - z1 - z2, z1, z2


@dataclass
class DarNetworkState:
    occupancy: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.occupancy = np.asarray(self.occupancy, dtype=np.int64)

    @property
    def N(self) -> int:
        return self.occupancy.size

    def validate(self, C: int):
        if np.any(self.occupancy < 0) or np.any(self.occupancy > C):
            raise ValueError(f"occupancy outside [0, {C}]")


@dataclass
class UState:
    """State ``(u0, u1)`` of the two-dimensional comparison process."""

    u0: int
    u1: int
    t: float = 0.0

    def u2(self, N: int, C: int) -> int:
        return C * N - self.u0 - self.u1

    def validate(self, N: int, C: int):
        if self.u0 < 0 or self.u1 < 0 or self.u0 + self.u1 > N:
            raise ValueError(f"({self.u0}, {self.u1}) is outside u0 + u1 <= {N}")
        if self.u2(N, C) < 0:
            raise ValueError("u2 would be negative")


def empty_rist_state(N: int) -> RistNetworkState:
    return RistNetworkState(np.zeros(N, np.int64), np.zeros(N, np.int64))


def saturated_rist_state(N: int, C: int, eta: float, rng: RngStream) -> RistNetworkState:
    """All nodes full of class-2 jobs, minus ``floor(eta N)`` removed uniformly.

    The mean class-2 load is then at least ``C - eta``.
    """
    y = np.full(N, C, dtype=np.int64)
    m = int(math.floor(eta * N + 1e-12))
    if m:
        jobs = np.repeat(np.arange(N), C)
        gone = rng.generator().choice(jobs.size, size=min(m, jobs.size), replace=False)
        np.subtract.at(y, jobs[gone], 1)
    return RistNetworkState(np.zeros(N, np.int64), y)


def empty_dar_state(N: int) -> DarNetworkState:
    return DarNetworkState(np.zeros(N, np.int64))


def rist_empirical(x, y, C: int) -> ProbVec:
    space = enumerate_rist_space(C)
    idx = np.array([[space.index.get((i, j), -1) for j in range(C + 1)] for i in range(C + 1)])
    counts = np.bincount(idx[np.asarray(x), np.asarray(y)], minlength=len(space))
    return ProbVec(counts / counts.sum(), space)


def dar_empirical(occ, C: int) -> ProbVec:
    counts = np.bincount(np.asarray(occ), minlength=C + 1)
    return ProbVec(counts / counts.sum(), dar_space(C))


# ----------------------------------------------------------------------------
# small O(1) containers
# ----------------------------------------------------------------------------


class _JobList:
    """Multiset of node ids, one entry per job; O(1) add and uniform removal."""

    __slots__ = ("items",)

    def __init__(self, counts):
        self.items = [i for i, c in enumerate(counts) for _ in range(int(c))]

    def __len__(self):
        return len(self.items)

    def add(self, node: int):
        self.items.append(node)

    def pop_at(self, k: int) -> int:
        items = self.items
        node = items[k]
        items[k] = items[-1]
        items.pop()
        return node


class _IndexSet:
    """Set of node ids with O(1) insert, delete and uniform sampling."""

    __slots__ = ("items", "pos")

    def __init__(self, members, N: int):
        self.items = list(members)
        self.pos = [-1] * N
        for k, i in enumerate(self.items):
            self.pos[i] = k

    def __len__(self):
        return len(self.items)

    def __contains__(self, i):
        return self.pos[i] >= 0

    def add(self, i: int):
        if self.pos[i] < 0:
            self.pos[i] = len(self.items)
            self.items.append(i)

    def discard(self, i: int):
        k = self.pos[i]
        if k < 0:
            return
        last = self.items.pop()
        if last != i:
            self.items[k] = last
            self.pos[last] = k
        self.pos[i] = -1


def _grid(horizon: float, dt: Optional[float]) -> np.ndarray:
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    dt = horizon / 100 if dt is None else dt
    n = int(math.floor(horizon / dt + 1e-9))
    g = dt * np.arange(n + 1)
    if g[-1] < horizon - 1e-12:
        g = np.append(g, horizon)
    return g


# ----------------------------------------------------------------------------
# RIST
# ----------------------------------------------------------------------------


def simulate_rist(
    params: RistParams,
    N: int,
    init: RistNetworkState,
    horizon: float,
    dt: Optional[float] = None,
    rng: Optional[RngStream] = None,
    watch_from: Optional[float] = None,
) -> Trajectory:
    """Simulate the N-node RIST network.

    An arrival at a saturated node is rerouted as a class-2 job.  With
    ``p0=None`` the target is uniform among non-saturated nodes (rejected if
    there are none); with finite ``p0`` up to ``p0`` nodes are drawn with
    replacement from all ``N`` and the first non-saturated one is used.

    If ``watch_from`` is given, ``counters["min_mean_y"]`` holds the minimum
    of the mean class-2 load over ``[watch_from, horizon]``, checked at
    every event.
    """
    if N < 1 or init.N != N:
        raise ValueError("init must describe exactly N >= 1 nodes")
    C = params.C
    init.validate(C)
    rng = rng or RngStream(0)
    space = enumerate_rist_space(C)
    sidx = [[space.index.get((i, j), -1) for j in range(C + 1)] for i in range(C + 1)]

    x = [int(v) for v in init.x]
    y = [int(v) for v in init.y]
    counts = [0] * len(space)
    for i in range(N):
        counts[sidx[x[i]][y[i]]] += 1
    jobs1 = _JobList(x)
    jobs2 = _JobList(y)
    free = _IndexSet((i for i in range(N) if x[i] + y[i] < C), N)

    lam, mu1, mu2, p0 = params.lam, params.mu1, params.mu2, params.p0
    arr_rate = lam * N
    grid = _grid(horizon, dt)
    samples = []
    gi = 0
    t = float(init.t)
    c = dict(arrivals=0, accepted=0, rerouted=0, rejected=0, departures1=0, departures2=0)
    min_y = math.inf
    sum_y = len(jobs2)
    watching = False
    uniform = rng.uniform

    def record():
        samples.append(ProbVec(np.array(counts, dtype=float) / N, space))

    while True:
        r1 = mu1 * len(jobs1)
        r2 = mu2 * len(jobs2)
        total = arr_rate + r1 + r2
        t_next = t - math.log1p(-uniform()) / total
        while gi < len(grid) and grid[gi] <= t_next:
            if watch_from is not None and grid[gi] >= watch_from and not watching:
                watching = True
                min_y = min(min_y, sum_y / N)
            record()
            gi += 1
        if t_next > horizon:
            break
        t = t_next
        u = uniform() * total
        if u < arr_rate:
            c["arrivals"] += 1
            i = min(int(uniform() * N), N - 1)
            if x[i] + y[i] < C:
                counts[sidx[x[i]][y[i]]] -= 1
                x[i] += 1
                counts[sidx[x[i]][y[i]]] += 1
                jobs1.add(i)
                if x[i] + y[i] == C:
                    free.discard(i)
                c["accepted"] += 1
                continue
            j = -1
            if p0 is None:
                if len(free):
                    j = free.items[min(int(uniform() * len(free)), len(free) - 1)]
            else:
                for _ in range(p0):
                    k = min(int(uniform() * N), N - 1)
                    if x[k] + y[k] < C:
                        j = k
                        break
            if j < 0:
                c["rejected"] += 1
                continue
            counts[sidx[x[j]][y[j]]] -= 1
            y[j] += 1
            counts[sidx[x[j]][y[j]]] += 1
            jobs2.add(j)
            sum_y += 1
            if x[j] + y[j] == C:
                free.discard(j)
            c["rerouted"] += 1
        elif u < arr_rate + r1:
            i = jobs1.pop_at(min(int(uniform() * len(jobs1)), len(jobs1) - 1))
            counts[sidx[x[i]][y[i]]] -= 1
            x[i] -= 1
            counts[sidx[x[i]][y[i]]] += 1
            free.add(i)
            c["departures1"] += 1
        else:
            i = jobs2.pop_at(min(int(uniform() * len(jobs2)), len(jobs2) - 1))
            counts[sidx[x[i]][y[i]]] -= 1
            y[i] -= 1
            counts[sidx[x[i]][y[i]]] += 1
            free.add(i)
            sum_y -= 1
            c["departures2"] += 1
            if watching:
                min_y = min(min_y, sum_y / N)
        if watch_from is not None and not watching and t >= watch_from:
            watching = True
            min_y = min(min_y, sum_y / N)

    if watch_from is not None:
        c["min_mean_y"] = min_y
    c["events"] = c["arrivals"] + c["departures1"] + c["departures2"]
    meta = {
        "model": "rist",
        "N": N,
        "params": {"lam": lam, "mu1": mu1, "mu2": mu2, "C": C, "p0": p0},
        "seed": rng.master_seed,
        "stream": rng.stream_index,
    }
    traj = Trajectory(grid[: len(samples)], samples, counters=c, metadata=meta)
    traj.final_state = RistNetworkState(np.array(x), np.array(y), t)
    return traj


# ----------------------------------------------------------------------------
# DAR
# ----------------------------------------------------------------------------


def simulate_dar(
    params: DarParams,
    N: int,
    init: DarNetworkState,
    horizon: float,
    dt: Optional[float] = None,
    rng: Optional[RngStream] = None,
) -> Trajectory:
    """Simulate the exchangeable-node DAR network.

    Each node receives calls at rate ``lam = nu C``; every job is served at
    rate 1 independently.  A call at a saturated node picks two distinct
    other nodes; if both have room each receives one job, otherwise the
    call is lost.  This is the rerouting mechanism whose mean-field limit
    has ``h(x) = 1 + 2x(1-x)``, so only ``a == 2`` is accepted.
    """
    if params.a != 2:
        raise ValueError("the pair-rerouting simulator realizes a = 2 only")
    if N < 3:
        raise ValueError("rerouting needs N >= 3 nodes")
    if init.N != N:
        raise ValueError("init must describe exactly N nodes")
    C = params.C
    init.validate(C)
    rng = rng or RngStream(0)
    space = dar_space(C)

    L = [int(v) for v in init.occupancy]
    counts = [0] * (C + 1)
    for v in L:
        counts[v] += 1
    jobs = _JobList(L)
    arr_rate = params.lam * N
    grid = _grid(horizon, dt)
    samples = []
    gi = 0
    t = float(init.t)
    c = dict(arrivals=0, direct=0, rerouted_pairs=0, rejected=0, departures=0)
    uniform = rng.uniform

    while True:
        total = arr_rate + len(jobs)
        t_next = t - math.log1p(-uniform()) / total
        while gi < len(grid) and grid[gi] <= t_next:
            samples.append(ProbVec(np.array(counts, dtype=float) / N, space))
            gi += 1
        if t_next > horizon:
            break
        t = t_next
        if uniform() * total < arr_rate:
            c["arrivals"] += 1
            i = min(int(uniform() * N), N - 1)
            if L[i] < C:
                counts[L[i]] -= 1
                L[i] += 1
                counts[L[i]] += 1
                jobs.add(i)
                c["direct"] += 1
                continue
            # unordered pair of distinct nodes among the other N - 1
            j = min(int(uniform() * (N - 1)), N - 2)
            k = min(int(uniform() * (N - 2)), N - 3)
            if k >= j:
                k += 1
            j += j >= i
            k += k >= i
            if L[j] < C and L[k] < C:
                for m in (j, k):
                    counts[L[m]] -= 1
                    L[m] += 1
                    counts[L[m]] += 1
                    jobs.add(m)
                c["rerouted_pairs"] += 1
            else:
                c["rejected"] += 1
        else:
            i = jobs.pop_at(min(int(uniform() * len(jobs)), len(jobs) - 1))
            counts[L[i]] -= 1
            L[i] -= 1
            counts[L[i]] += 1
            c["departures"] += 1

    meta = {
        "model": "dar",
        "N": N,
        "params": {"nu": params.nu, "a": params.a, "C": C},
        "seed": rng.master_seed,
        "stream": rng.stream_index,
    }
    traj = Trajectory(grid[: len(samples)], samples, counters=c, metadata=meta)
    traj.final_state = DarNetworkState(np.array(L), t)
    return traj


# ----------------------------------------------------------------------------
# U-process
# ----------------------------------------------------------------------------


@dataclass
class UPath:
    times: np.ndarray
    u0: np.ndarray
    u1: np.ndarray
    hit_time: Optional[float]
    N: int
    C: int

    @property
    def u2(self) -> np.ndarray:
        return self.C * self.N - self.u0 - self.u1


def simulate_u(params, N: int, init: UState, horizon: float, rng: Optional[RngStream] = None, dt=None) -> UPath:
    """Simulate the comparison process on ``{u0 + u1 <= N}``.

    ``params`` needs attributes ``lam, mu1, mu2, C``.  Moves that would
    leave the state space are suppressed.  The path is sampled on a grid
    up to ``horizon``; ``hit_time`` is the first time ``u0 + u1 == N``
    (the path keeps running after it).
    """
    C = params.C
    init.validate(N, C)
    rng = rng or RngStream(0)
    lam, mu1, mu2 = params.lam, params.mu1, params.mu2
    grid = _grid(horizon, dt)
    u0, u1 = init.u0, init.u1
    t = float(init.t)
    hit = t if u0 + u1 == N else None
    s0, s1 = [], []
    gi = 0
    uniform = rng.uniform
    while True:
        r_a = lam * u0  # u - e0 + e1
        r_b = lam * (N - u0) if u0 > 0 else 0.0  # u - e0
        r_c = mu1 * u1  # u + e0 - e1
        r_d = mu2 * (C * N - u0 - u1) if u0 + u1 < N else 0.0  # u + e0
        total = r_a + r_b + r_c + r_d
        t_next = t - math.log1p(-uniform()) / total if total > 0 else math.inf
        while gi < len(grid) and grid[gi] <= t_next:
            s0.append(u0)
            s1.append(u1)
            gi += 1
        if t_next > horizon:
            break
        t = t_next
        v = uniform() * total
        if v < r_a:
            u0, u1 = u0 - 1, u1 + 1
        elif v < r_a + r_b:
            u0 -= 1
        elif v < r_a + r_b + r_c:
            u0, u1 = u0 + 1, u1 - 1
        else:
            u0 += 1
        if hit is None and u0 + u1 == N:
            hit = t
    return UPath(grid[: len(s0)], np.array(s0), np.array(s1), hit, N, C)


# ----------------------------------------------------------------------------
# coupling
# ----------------------------------------------------------------------------


class CouplingDefect(AssertionError):
    """A dominance inequality failed before the stopping time."""


BRANCHES = ("1a", "1b", "1c", "2a", "2b_i", "2b_ii", "2b_iii", "2c_i", "2c_ii", "2c_iii", "2c_iv")


@dataclass
class CouplingReport:
    rows: list
    violation_time: Optional[float]
    hit_time: Optional[float]
    branch_counts: dict
    N: int
    C: int
    metadata: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.violation_time is None

    def to_csv(self, path, config: Optional[dict] = None) -> Path:
        import json

        from . import __version__

        path = Path(path)
        lines = ["t,u0,u1,u2,z0,z1,z2,ok"]
        for r in self.rows:
            lines.append(",".join([f"{r[0]:.17g}", *(str(int(v)) for v in r[1:7]), str(int(r[7]))]))
        meta = dict(self.metadata, branch_counts=self.branch_counts, hit_time=self.hit_time,
                    violation_time=self.violation_time)
        if config is not None:
            meta["config"] = config
        lines.append(f"# version={__version__}")
        lines.append("# config=" + json.dumps(meta, sort_keys=True, default=str))
        lines.append(f"# status={'ok' if self.ok else 'violation'}")
        path.write_text("\n".join(lines) + "\n")
        return path


def simulate_coupled(
    params: RistParams,
    N: int,
    init: RistNetworkState,
    horizon: float,
    rng: Optional[RngStream] = None,
    raise_on_defect: bool = False,
) -> CouplingReport:
    """Joint simulation of the network totals and the comparison process.

    At each step the exponential races of the coupling construction are
    drawn explicitly; the smallest one fixes the paired transition:

    ===== ===================== =========================================
    race  rate                  effect
    ===== ===================== =========================================
    1a    lam * a0              U: -e0+e1; network: local class-1 arrival
    1b    lam * (u0 - a0)       U: -e0+e1; network: rerouted arrival
    1c    lam * (N - u0)        U: -e0;    network: rerouted arrival
    2a    mu2 * u2              U: +e0;    network: class-2 service
    ===== ===================== =========================================

    where ``a0`` is the number of non-saturated nodes (a rerouted arrival
    needs ``a0 > 0``).  Class-1 services then split on ``u1 <= z1``
    (branches 2b) or ``u1 > z1`` (branches 2c, with a shared exponential
    ``F`` of rate ``u1 - z1`` driving both ``F/mu1`` and ``F/mu2``).

    The network follows RIST with unbounded retrials at node level.  The
    initial totals must satisfy ``z0 + z1 <= N``.  The run stops at the
    first time ``u0 + u1 == N`` or at ``horizon``.
    """
    if params.p0 is not None:
        raise ValueError("the coupling is built for unbounded retrials")
    C = params.C
    init.validate(C)
    if init.N != N:
        raise ValueError("init must describe exactly N nodes")
    rng = rng or RngStream(0)
    lam, mu1, mu2 = params.lam, params.mu1, params.mu2

    x = [int(v) for v in init.x]
    y = [int(v) for v in init.y]
    jobs1 = _JobList(x)
    jobs2 = _JobList(y)
    free = _IndexSet((i for i in range(N) if x[i] + y[i] < C), N)
    z0, z1, z2 = init.totals(C)
    if z0 + z1 > N:
        raise ValueError(f"initial totals z0 + z1 = {z0 + z1} exceed N = {N}")
    u0, u1 = z0, z1
    t = float(init.t)
    counts = dict.fromkeys(BRANCHES, 0)
    rows = [(t, u0, u1, C * N - u0 - u1, z0, z1, z2, True)]
    hit = t if u0 + u1 == N else None
    violation = None
    uniform = rng.uniform
    E = lambda rate: -math.log1p(-uniform()) / rate if rate > 0 else math.inf

    def z_arrive_local():
        i = free.items[min(int(uniform() * len(free)), len(free) - 1)]
        x[i] += 1
        jobs1.add(i)
        if x[i] + y[i] == C:
            free.discard(i)

    def z_arrive_rerouted():
        j = free.items[min(int(uniform() * len(free)), len(free) - 1)]
        y[j] += 1
        jobs2.add(j)
        if x[j] + y[j] == C:
            free.discard(j)

    def z_serve(cls):
        jl, arr = (jobs1, x) if cls == 1 else (jobs2, y)
        i = jl.pop_at(min(int(uniform() * len(jl)), len(jl) - 1))
        arr[i] -= 1
        free.add(i)

    while hit is None:
        u2 = C * N - u0 - u1
        a0 = len(free)
        races = {
            "1a": E(lam * a0),
            "1b": E(lam * (u0 - a0)),
            "1c": E(lam * (N - u0)) if u0 > 0 else math.inf,
            "2a": E(mu2 * u2),
        }
        if u1 <= z1:
            races["2b_i"] = E(mu1 * u1)
            races["2b_ii"] = E(mu1 * (z1 - u1))
            races["2b_iii"] = E(mu2 * (z2 - u2))
        else:
            F = E(u1 - z1)
            races["2c_i"] = E(mu1 * z1)
            races["2c_ii"] = F / mu1
            races["2c_iii"] = F / mu2
            races["2c_iv"] = E(mu2 * (z2 - u2 - (u1 - z1)))
        # ties resolve in table order, so (2c)(ii) precedes (2c)(iii)
        branch = min(races, key=races.get)
        tau = races[branch]
        if t + tau > horizon:
            break
        t += tau
        counts[branch] += 1
        if branch == "1a":
            u0, u1 = u0 - 1, u1 + 1
            z_arrive_local()
            z0, z1 = z0 - 1, z1 + 1
        elif branch in ("1b", "1c"):
            u0 -= 1
            if branch == "1b":
                u1 += 1
            if a0 > 0:
                z_arrive_rerouted()
                z0, z2 = z0 - 1, z2 + 1
        elif branch == "2a":
            u0 += 1
            z_serve(2)
            z0, z2 = z0 + 1, z2 - 1
        elif branch in ("2b_i", "2c_i"):
            u0, u1 = u0 + 1, u1 - 1
            z_serve(1)
            z0, z1 = z0 + 1, z1 - 1
        elif branch == "2b_ii":
            z_serve(1)
            z0, z1 = z0 + 1, z1 - 1
        elif branch in ("2b_iii", "2c_iv"):
            z_serve(2)
            z0, z2 = z0 + 1, z2 - 1
        elif branch == "2c_ii":
            u0, u1 = u0 + 1, u1 - 1
        else:
            raise CouplingDefect(f"race (2c)(iii) won at t={t}")
        u2 = C * N - u0 - u1
        if u0 + u1 == N:
            hit = t
        ok = u2 <= z2 and u1 + u2 <= z1 + z2
        rows.append((t, u0, u1, u2, z0, z1, z2, ok))
        if not ok and hit is None and violation is None:
            violation = t
            if raise_on_defect:
                raise CouplingDefect(f"dominance fails at t={t}: u=({u0},{u1},{u2}) z=({z0},{z1},{z2})")
    meta = {
        "model": "coupling",
        "params": {"lam": lam, "mu1": mu1, "mu2": mu2, "C": C},
        "seed": rng.master_seed,
        "stream": rng.stream_index,
        "horizon": horizon,
    }
    return CouplingReport(rows, violation, hit, counts, N, C, meta)


# ----------------------------------------------------------------------------
# saturation experiment
# ----------------------------------------------------------------------------


@dataclass
class SaturationResult:
    successes: int
    runs: int
    min_mean_y: list

    @property
    def probability(self) -> float:
        return self.successes / self.runs


__all__.append("SaturationResult")


def saturation_experiment(
    params: RistParams,
    N: int,
    eta: float,
    t0: float,
    T: float,
    eps: float,
    runs: int,
    rng: RngStream,
    jobs: int = 1,
) -> SaturationResult:
    """Fraction of runs whose mean class-2 load stays ``>= C - eps`` on ``[t0, t0+T]``.

    Each run starts from :func:`saturated_rist_state` and uses its own child
    stream ``rng.child(k)``.  ``jobs > 1`` spreads runs over processes; the
    result does not depend on ``jobs``.
    """
    if not params.rho1 < params.C:
        raise ValueError("needs rho1 < C")
    args = [(params, N, eta, t0, T, rng.child(k)) for k in range(runs)]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(jobs) as ex:
            mins = list(ex.map(_saturation_run, args))
    else:
        mins = [_saturation_run(a) for a in args]
    ok = sum(m >= params.C - eps for m in mins)
    return SaturationResult(ok, runs, mins)


def _saturation_run(arg) -> float:
    params, N, eta, t0, T, stream = arg
    init = saturated_rist_state(N, params.C, eta, stream)
    tr = simulate_rist(params, N, init, t0 + T, dt=(t0 + T), rng=stream, watch_from=t0)
    return tr.counters["min_mean_y"]
