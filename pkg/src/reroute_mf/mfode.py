"""Mean-field dynamical systems and an adaptive Runge-Kutta integrator.

Four systems are supported, all forward (Fokker-Planck) equations of a
single node whose transition rates depend on the node's own distribution:

``"rist"``
    RIST with unbounded retrials.  Non-saturated nodes receive rerouted jobs
    at rate ``lam * R / (1 - R)`` where ``R`` is the saturated mass; the
    system is singular when ``R -> 1``.
``"rist-p0"``
    RIST with at most ``p0`` retrials; rerouting intensity
    ``lam * R (1 - R**p0) / (1 - R)``, bounded by ``lam * p0``.
``"dar"``
    DAR birth-death equations on ``{0..C}`` with birth rate
    ``lam * h(x_C)`` and death rate ``j`` in state ``j``.
``"nlmm1"``
    The non-linear M/M/1 queue of empty places, truncated at ``K``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import (
    DarParams,
    NlMm1Model,
    ProbVec,
    RistParams,
    RistStateSpace,
    dar_space,
    enumerate_rist_space,
    trunc_space,
)
from .trajectory import Trajectory

__all__ = [
    "SingularityError",
    "StepSizeUnderflow",
    "OdeOptions",
    "OdeResult",
    "rist_rhs_unbounded",
    "rist_rhs_retrials",
    "retrial_factor",
    "dar_rhs",
    "nlmm1_rhs",
    "make_rhs",
    "integrate",
]


class SingularityError(ArithmeticError):
    """The non-saturated mass fell below the singularity threshold."""


class StepSizeUnderflow(ArithmeticError):
    """Adaptive step size fell below the minimum step."""


@dataclass(frozen=True)
class OdeOptions:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    max_step: float = math.inf
    first_step: Optional[float] = None
    min_step: float = 1e-14
    max_steps: int = 2_000_000
    eps_sing: float = 1e-6
    K: int = 200
    renormalize_drift: float = 1e-10
    negative_tol: float = 1e-12

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "max_step", "min_step", "eps_sing", "renormalize_drift"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.K < 10:
            raise ValueError("truncation K must be at least 10")


@dataclass
class OdeResult:
    trajectory: Trajectory
    status: str
    t_end: float
    n_accepted: int = 0
    n_rejected: int = 0
    n_rhs: int = 0

    @property
    def singular(self) -> bool:
        return self.status.startswith("SingularityAt")

    @property
    def singularity_time(self) -> Optional[float]:
        return self.t_end if self.singular else None

    @property
    def final(self) -> ProbVec:
        return self.trajectory.states[-1]


# ----------------------------------------------------------------------------
# right-hand sides
# ----------------------------------------------------------------------------


class _RistMoves:
    """Index arrays of the four RIST moves, cached per capacity."""

    _cache: dict = {}

    def __init__(self, space: RistStateSpace):
        idx = space.index
        C = space.C
        src_up1, dst_up1, src_up2, dst_up2 = [], [], [], []
        src_dn1, dst_dn1, src_dn2, dst_dn2 = [], [], [], []
        for i, (x, y) in enumerate(space.states):
            if x + y < C:
                src_up1.append(i)
                dst_up1.append(idx[(x + 1, y)])
                src_up2.append(i)
                dst_up2.append(idx[(x, y + 1)])
            if x > 0:
                src_dn1.append(i)
                dst_dn1.append(idx[(x - 1, y)])
            if y > 0:
                src_dn2.append(i)
                dst_dn2.append(idx[(x, y - 1)])
        a = lambda v: np.array(v, dtype=np.int64)
        self.up1 = (a(src_up1), a(dst_up1))
        self.up2 = (a(src_up2), a(dst_up2))
        self.dn1 = (a(src_dn1), a(dst_dn1))
        self.dn2 = (a(src_dn2), a(dst_dn2))
        self.x = space.x.astype(float)
        self.y = space.y.astype(float)
        self.plus = space.plus
        self.saturated = space.saturated

    @classmethod
    def of(cls, space: RistStateSpace) -> "_RistMoves":
        m = cls._cache.get(space.C)
        if m is None:
            m = cls._cache[space.C] = cls(space)
        return m


def _rist_drift(v, moves: _RistMoves, lam, beta, mu1, mu2):
    # every move is injective in its destination, so fancy += is exact
    d = np.zeros_like(v)
    for (src, dst), rate in ((moves.up1, lam), (moves.up2, beta)):
        f = rate * v[src]
        d[src] -= f
        d[dst] += f
    for (src, dst), rate in ((moves.dn1, mu1 * moves.x), (moves.dn2, mu2 * moves.y)):
        f = rate[src] * v[src]
        d[src] -= f
        d[dst] += f
    return d


def _values(state):
    return state.values if isinstance(state, ProbVec) else np.asarray(state, dtype=float)


def rist_rhs_unbounded(state, params: RistParams, eps_sing: float = 1e-6) -> np.ndarray:
    """Drift of the RIST mean-field system with unbounded retrials.

    Raises:
        SingularityError: if the non-saturated mass is at most ``eps_sing``.
    """
    space = enumerate_rist_space(params.C)
    moves = _RistMoves.of(space)
    v = _values(state)
    plus = v[moves.plus].sum()
    if plus <= eps_sing:
        raise SingularityError(f"non-saturated mass {plus:.3e} <= {eps_sing:g}")
    R = v[moves.saturated].sum()
    return _rist_drift(v, moves, params.lam, params.lam * R / plus, params.mu1, params.mu2)


def retrial_factor(R: float, p0: int) -> float:
    """``R (1 - R**p0) / (1 - R)``, i.e. ``R + R**2 + ... + R**p0``."""
    if p0 == 0:
        return 0.0
    if abs(1.0 - R) < 1e-6:
        # geometric sum evaluated directly: the closed form loses digits near 1
        return float(sum(R ** k for k in range(1, p0 + 1)))
    return R * (1.0 - R ** p0) / (1.0 - R)


def rist_rhs_retrials(state, params: RistParams) -> np.ndarray:
    """Drift of the RIST mean-field system with at most ``params.p0`` retrials."""
    if params.p0 is None:
        raise ValueError("rist_rhs_retrials needs a finite p0")
    space = enumerate_rist_space(params.C)
    moves = _RistMoves.of(space)
    v = _values(state)
    R = min(max(v[moves.saturated].sum(), 0.0), 1.0)
    beta = params.lam * retrial_factor(R, params.p0)
    return _rist_drift(v, moves, params.lam, beta, params.mu1, params.mu2)


def dar_rhs(state, params: DarParams) -> np.ndarray:
    """GHK forward equations on ``{0..C}`` with ``lam = nu * C``."""
    v = _values(state)
    C = params.C
    birth = params.lam * params.h(v[C])
    d = np.zeros_like(v)
    up = birth * v[:C]
    d[:C] -= up
    d[1:] += up
    down = np.arange(1, C + 1) * v[1:]
    d[1:] -= down
    d[:C] += down
    return d


def nlmm1_rhs(state, model: NlMm1Model) -> np.ndarray:
    """Truncated non-linear M/M/1 forward equations on ``{0..K}``.

    Jumps ``+1`` at rate 1 (blocked at ``K``) and ``-1`` at rate
    ``nu * h(state[0])`` from every positive state.
    """
    v = _values(state)
    serv = model.nu * model.h(v[0])
    d = np.zeros_like(v)
    up = v[:-1]
    d[:-1] -= up
    d[1:] += up
    down = serv * v[1:]
    d[1:] -= down
    d[:-1] += down
    return d


def make_rhs(system: str, params, opts: OdeOptions = OdeOptions()):
    """Return ``(rhs, space, raw_rhs)`` for a system name.

    ``raw_rhs`` is used for Runge-Kutta stages and never raises on the
    singularity threshold; it returns ``None`` when the RIST ratio is
    undefined (non-positive non-saturated mass).
    """
    if system == "rist":
        if not isinstance(params, RistParams):
            raise TypeError("system 'rist' needs RistParams")
        space = enumerate_rist_space(params.C)
        moves = _RistMoves.of(space)

        def raw(v):
            plus = v[moves.plus].sum()
            if plus <= 0:
                return None
            R = v[moves.saturated].sum()
            return _rist_drift(v, moves, params.lam, params.lam * R / plus, params.mu1, params.mu2)

        return (lambda v: rist_rhs_unbounded(v, params, opts.eps_sing)), space, raw
    if system == "rist-p0":
        if not isinstance(params, RistParams) or params.p0 is None:
            raise TypeError("system 'rist-p0' needs RistParams with finite p0")
        space = enumerate_rist_space(params.C)
        f = lambda v: rist_rhs_retrials(v, params)
        return f, space, f
    if system == "dar":
        if not isinstance(params, DarParams):
            raise TypeError("system 'dar' needs DarParams")
        f = lambda v: dar_rhs(v, params)
        return f, dar_space(params.C), f
    if system == "nlmm1":
        if not isinstance(params, NlMm1Model):
            raise TypeError("system 'nlmm1' needs an NlMm1Model")
        f = lambda v: nlmm1_rhs(v, params)
        return f, trunc_space(opts.K), f
    raise ValueError(f"unknown system {system!r}")


# ----------------------------------------------------------------------------
# Dormand-Prince 5(4)
# ----------------------------------------------------------------------------

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# 5th order minus embedded 4th order weights
_E = _B - np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


def _dp_step(raw, y, k1, h):
    ks = [k1]
    for i in range(1, 7):
        yi = y.copy()
        for j, a in enumerate(_A[i]):
            if a:
                yi += h * a * ks[j]
        k = raw(yi)
        if k is None:
            return None, None, None
        ks.append(k)
    K = np.array(ks)
    y_new = y + h * (_B @ K)
    err = h * (_E @ K)
    return y_new, err, ks[6]


def _initial_step(raw, y, f0, opts, order=5):
    scale = opts.abs_tol + opts.rel_tol * np.abs(y)
    d0 = np.sqrt(np.mean((y / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y + h0 * f0
    f1 = raw(y1)
    if f1 is None:
        return h0 * 1e-3
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / order)
    return min(100 * h0, h1)


def integrate(
    system: str,
    init: ProbVec,
    params,
    horizon: float,
    opts: OdeOptions = OdeOptions(),
    dt: Optional[float] = None,
) -> OdeResult:
    """Integrate a mean-field system from ``init`` up to ``horizon``.

    The state is recorded on a uniform grid of spacing ``dt`` (default
    ``horizon / 100``).  After every accepted step, entries in
    ``[-negative_tol, 0)`` are set to zero and the vector is renormalized
    once its mass drifts by more than ``renormalize_drift``; a step that
    produces an entry below ``-negative_tol`` is rejected and retried with a
    smaller step.

    For ``system="rist"`` integration halts with status ``SingularityAt(t)``
    as soon as the non-saturated mass drops below ``opts.eps_sing``.  A step
    size below ``opts.min_step`` halts with ``StepSizeUnderflow(t)``.
    """
    _, space, raw = make_rhs(system, params, opts)
    y = np.array(init.values, dtype=float)
    if init.space != space:
        raise ValueError(f"initial state lives on {init.space!r}, system expects {space!r}")
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")

    meta = {"system": system, "params": repr(params), "horizon": horizon}
    times, states = [0.0], [init]
    plus_mask = space.plus if isinstance(space, RistStateSpace) else None

    def singular(v):
        return system == "rist" and v[plus_mask].sum() < opts.eps_sing

    if horizon == 0:
        return OdeResult(Trajectory(np.array(times), states, status="ReachedHorizon", metadata=meta),
                         "ReachedHorizon", 0.0)
    if singular(y):
        st = "SingularityAt(0)"
        return OdeResult(Trajectory(np.array(times), states, status=st, metadata=meta), st, 0.0)

    dt = horizon / 100 if dt is None else dt
    n_grid = int(math.floor(horizon / dt + 1e-9))
    grid = [k * dt for k in range(1, n_grid + 1)]
    if not grid or grid[-1] < horizon - 1e-12:
        grid.append(horizon)

    f = raw(y)
    n_rhs = 1
    h = opts.first_step or _initial_step(raw, y, f, opts)
    n_rhs += 1
    t = 0.0
    acc = rej = 0
    status = "ReachedHorizon"
    gi = 0

    while gi < len(grid):
        target = grid[gi]
        h = min(h, opts.max_step, target - t)
        if h < opts.min_step and target - t > opts.min_step:
            status = f"StepSizeUnderflow({t:.17g})"
            break
        y_new, err, f_new = _dp_step(raw, y, f, h)
        n_rhs += 6
        if y_new is None:
            rej += 1
            h *= 0.25
            continue
        scale = opts.abs_tol + opts.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        en = float(np.sqrt(np.mean((err / scale) ** 2)))
        if en > 1.0 or y_new.min() < -opts.negative_tol:
            rej += 1
            fac = 0.9 * en ** -0.2 if en > 1.0 else 0.5
            h *= max(0.1, min(0.5, fac))
            if acc + rej > opts.max_steps:
                status = f"StepSizeUnderflow({t:.17g})"
                break
            continue
        acc += 1
        t = target if abs(target - t - h) <= 1e-12 * max(1.0, target) else t + h
        neg = y_new < 0
        if neg.any():
            y_new[neg] = 0.0
            f_new = raw(y_new)
            n_rhs += 1
        s = y_new.sum()
        if abs(s - 1.0) > opts.renormalize_drift:
            y_new /= s
            f_new = raw(y_new)
            n_rhs += 1
        y, f = y_new, f_new
        h *= min(5.0, 0.9 * en ** -0.2) if en > 0 else 5.0
        if singular(y):
            status = f"SingularityAt({t:.17g})"
            times.append(t)
            states.append(ProbVec(y / y.sum(), space))
            break
        if f is None:
            status = f"SingularityAt({t:.17g})"
            break
        if t >= target:
            times.append(target)
            states.append(ProbVec(y / y.sum(), space, tol=1e-9))
            gi += 1
        if acc + rej > opts.max_steps:
            status = f"StepSizeUnderflow({t:.17g})"
            break

    traj = Trajectory(np.array(times), states, status=status, metadata=meta)
    return OdeResult(traj, status, t, acc, rej, n_rhs)
