"""Shared state spaces, probability vectors, parameter bundles and RNG streams.

Every other module in the package builds on the types defined here.  State
spaces are enumerated deterministically so that probability vectors produced
by the simulators, the ODE integrators and the equilibrium solvers can be
compared entry by entry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

__all__ = [
    "UNBOUNDED",
    "RistParams",
    "DarParams",
    "RistStateSpace",
    "ProbVec",
    "RngStream",
    "splitmix64",
    "enumerate_rist_space",
    "weighted_l2_sq",
    "total_variation",
    "NORMALIZATION_TOL",
    "NlMm1Model",
    "dar_space",
    "trunc_space",
]

NORMALIZATION_TOL = 1e-12

UNBOUNDED = None
"""Sentinel for an unbounded number of retrials (``p0=UNBOUNDED``)."""


# ----------------------------------------------------------------------------
# parameters
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class RistParams:
    """Parameters of the RIST network.

    Attributes:
        lam: arrival rate at every node.
        mu1: service rate of jobs accepted at their arrival node.
        mu2: service rate of rerouted jobs, ``0 < mu2 <= mu1``.
        C: node capacity.
        p0: maximum number of retrials; ``None`` means unbounded, ``0``
            disables rerouting altogether.
    """

    lam: float
    mu1: float
    mu2: float
    C: int
    p0: Optional[int] = UNBOUNDED

    def __post_init__(self):
        if not (self.lam > 0 and self.mu1 > 0 and self.mu2 > 0):
            raise ValueError("rates lam, mu1, mu2 must be positive")
        if self.mu2 > self.mu1:
            raise ValueError(f"need mu2 <= mu1, got mu2={self.mu2} > mu1={self.mu1}")
        if int(self.C) != self.C or self.C < 1:
            raise ValueError(f"capacity C must be a positive integer, got {self.C}")
        if self.p0 is not None and (int(self.p0) != self.p0 or self.p0 < 0):
            raise ValueError(f"p0 must be a nonnegative integer or None, got {self.p0}")
        object.__setattr__(self, "C", int(self.C))

    @property
    def rho1(self) -> float:
        return self.lam / self.mu1

    @property
    def rho2(self) -> float:
        return self.lam / self.mu2

    @property
    def unbounded(self) -> bool:
        return self.p0 is None

    def scaled(self, c: float) -> "RistParams":
        """Same network with every rate multiplied by ``c`` (time rescaling)."""
        return RistParams(self.lam * c, self.mu1 * c, self.mu2 * c, self.C, self.p0)

    def with_p0(self, p0: Optional[int]) -> "RistParams":
        return RistParams(self.lam, self.mu1, self.mu2, self.C, p0)


@dataclass(frozen=True)
class DarParams:
    """Parameters of the DAR network with load ``lam = nu * C``.

    ``h(x) = 1 + a x (1 - x)`` is the rerouting amplification of the arrival
    rate at non-saturated nodes when a fraction ``x`` of nodes is saturated.
    """

    nu: float
    a: float
    C: int

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if not self.a > 1:
            raise ValueError(f"a must be > 1, got {self.a}")
        if int(self.C) != self.C or self.C < 1:
            raise ValueError(f"capacity C must be a positive integer, got {self.C}")
        object.__setattr__(self, "C", int(self.C))

    @property
    def lam(self) -> float:
        return self.nu * self.C

    def h(self, x):
        return 1.0 + self.a * x * (1.0 - x)

    def dh(self, x):
        return self.a * (1.0 - 2.0 * x)


# ----------------------------------------------------------------------------
# state spaces and probability vectors
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class RistStateSpace:
    """Lexicographically ordered pairs ``(x, y)`` with ``x + y <= C``."""

    C: int
    states: tuple
    x: np.ndarray = field(repr=False, compare=False)
    y: np.ndarray = field(repr=False, compare=False)
    index: dict = field(repr=False, compare=False)
    plus: np.ndarray = field(repr=False, compare=False)
    saturated: np.ndarray = field(repr=False, compare=False)

    def __len__(self):
        return len(self.states)

    def idx(self, x: int, y: int) -> int:
        return self.index[(x, y)]

    def column_names(self) -> list:
        return [f"p_{x}_{y}" for x, y in self.states]


_SPACE_CACHE: dict = {}


def enumerate_rist_space(C: int) -> RistStateSpace:
    """Enumerate the node state space of the RIST network.

    >>> enumerate_rist_space(1).states
    ((0, 0), (0, 1), (1, 0))
    """
    if int(C) != C or C < 1:
        raise ValueError(f"capacity must be a positive integer, got {C}")
    C = int(C)
    if C in _SPACE_CACHE:
        return _SPACE_CACHE[C]
    states = tuple((x, y) for x in range(C + 1) for y in range(C + 1 - x))
    xs = np.array([s[0] for s in states], dtype=np.int64)
    ys = np.array([s[1] for s in states], dtype=np.int64)
    xs.flags.writeable = False
    ys.flags.writeable = False
    plus = np.flatnonzero(xs + ys < C)
    sat = np.flatnonzero(xs + ys == C)
    plus.flags.writeable = False
    sat.flags.writeable = False
    space = RistStateSpace(
        C=C,
        states=states,
        x=xs,
        y=ys,
        index={s: i for i, s in enumerate(states)},
        plus=plus,
        saturated=sat,
    )
    _SPACE_CACHE[C] = space
    return space


class ProbVec:
    """Immutable probability vector over an enumerated state space.

    ``space`` is either a :class:`RistStateSpace` or a string tag such as
    ``"dar:5"`` (occupancies ``0..5``) or ``"trunc:60"`` (queue lengths
    ``0..60``).  Vectors whose sum is within :data:`NORMALIZATION_TOL` of one
    are renormalized; larger drift is rejected.
    """

    __slots__ = ("_values", "space")

    def __init__(self, values, space, *, tol: float = NORMALIZATION_TOL):
        v = np.array(values, dtype=float)
        if v.ndim != 1:
            raise ValueError("probability vector must be one-dimensional")
        if isinstance(space, RistStateSpace) and v.size != len(space):
            raise ValueError(f"length {v.size} does not match state space of size {len(space)}")
        if isinstance(space, str) and v.size != _tag_size(space):
            raise ValueError(f"length {v.size} does not match space tag {space!r}")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("probability vector has negative or non-finite entries")
        s = v.sum()
        if abs(s - 1.0) > tol:
            raise ValueError(f"entries sum to {s!r}, not 1 within {tol}")
        if s != 1.0:
            v /= s
        v.flags.writeable = False
        self._values = v
        self.space = space

    @property
    def values(self) -> np.ndarray:
        return self._values

    def __len__(self):
        return self._values.size

    def __getitem__(self, i):
        return self._values[i]

    def __array__(self, dtype=None, copy=None):
        return self._values if dtype is None else self._values.astype(dtype)

    def __repr__(self):
        return f"ProbVec(space={self.space!r}, values={self._values!r})"

    def same_space(self, other: "ProbVec") -> bool:
        return self.space == other.space

    # support queries -----------------------------------------------------

    def mass_plus(self) -> float:
        """Mass on non-saturated RIST states."""
        return float(self._values[self._rist().plus].sum())

    def mass_saturated(self) -> float:
        """Mass on saturated RIST states ``x + y = C``."""
        return float(self._values[self._rist().saturated].sum())

    def mass_at(self, i: int) -> float:
        return float(self._values[i])

    def _rist(self) -> RistStateSpace:
        if not isinstance(self.space, RistStateSpace):
            raise TypeError("saturation queries need a RIST state space")
        return self.space

    # constructors --------------------------------------------------------

    @classmethod
    def point_mass(cls, space, i: int) -> "ProbVec":
        n = len(space) if isinstance(space, RistStateSpace) else _tag_size(space)
        v = np.zeros(n)
        v[i] = 1.0
        return cls(v, space)

    @classmethod
    def from_counts(cls, counts, space) -> "ProbVec":
        c = np.asarray(counts, dtype=float)
        return cls(c / c.sum(), space)


def _tag_size(tag: str) -> int:
    kind, _, n = tag.partition(":")
    if kind not in ("dar", "trunc") or not n.isdigit():
        raise ValueError(f"unknown space tag {tag!r}")
    return int(n) + 1


def dar_space(C: int) -> str:
    return f"dar:{int(C)}"


def trunc_space(K: int) -> str:
    return f"trunc:{int(K)}"


# ----------------------------------------------------------------------------
# distances
# ----------------------------------------------------------------------------


def _pair(mu, nu):
    if isinstance(mu, ProbVec) and isinstance(nu, ProbVec) and not mu.same_space(nu):
        raise ValueError("probability vectors live on different state spaces")
    a = np.asarray(mu, dtype=float)
    b = np.asarray(nu, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return a, b


def weighted_l2_sq(mu, pi) -> float:
    """Squared chi-square distance ``sum (mu - pi)^2 / pi``."""
    m, p = _pair(mu, pi)
    if np.any(p <= 0):
        raise ValueError("reference distribution must be strictly positive")
    return float(np.sum((m - p) ** 2 / p))


def total_variation(mu, nu) -> float:
    """Total variation distance ``0.5 * sum |mu - nu|``."""
    a, b = _pair(mu, nu)
    return float(0.5 * np.abs(a - b).sum())


# ----------------------------------------------------------------------------
# random streams
# ----------------------------------------------------------------------------

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """splitmix64 finalizer of a 64-bit integer."""
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class RngStream:
    """Reproducible random stream keyed by ``(master_seed, stream_index)``.

    The PCG64 bit generator is seeded with
    ``splitmix64(master_seed XOR stream_index)``.  Uniforms are served from a
    buffer of doubles so the per-event cost in the simulators stays small;
    the sequence of uniforms is identical to calling ``Generator.random``
    repeatedly.  A stream is single-owner and must not be shared by threads.
    """

    BUFFER = 4096

    def __init__(self, master_seed: int, stream_index: int = 0):
        if stream_index < 0:
            raise ValueError("stream_index must be nonnegative")
        self.master_seed = int(master_seed) & _MASK64
        self.stream_index = int(stream_index)
        self.seed = splitmix64(self.master_seed ^ (self.stream_index & _MASK64))
        self._gen = np.random.Generator(np.random.PCG64(self.seed))
        self._buf = np.empty(0)
        self._pos = 0

    def child(self, index: int) -> "RngStream":
        """Independent stream for sub-task ``index`` (e.g. one Monte Carlo run)."""
        return RngStream(splitmix64(self.seed), index)

    def uniform(self) -> float:
        if self._pos >= self._buf.size:
            self._buf = self._gen.random(self.BUFFER)
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return float(u)

    def uniforms(self, n: int) -> np.ndarray:
        return np.array([self.uniform() for _ in range(n)])

    def exponential(self, rate: float) -> float:
        """Exponential variate with the given rate (``inf`` for rate 0)."""
        if rate <= 0:
            return math.inf
        return -math.log1p(-self.uniform()) / rate

    def integer(self, n: int) -> int:
        """Uniform integer in ``range(n)``."""
        k = int(self.uniform() * n)
        return k if k < n else n - 1

    def generator(self) -> np.random.Generator:
        """Bulk-draw generator derived from this stream (for initial states)."""
        return np.random.Generator(np.random.PCG64(splitmix64(self.seed ^ 0x5DEECE66D)))


@dataclass(frozen=True)
class NlMm1Model:
    """Non-linear M/M/1 queue of empty places.

    Arrivals (freed places) at rate 1; services at rate ``nu * h(p0)`` where
    ``p0`` is the probability of the empty queue.  Either give the quadratic
    coefficient ``a`` (``h(x) = 1 + a x (1 - x)``) or a callable ``h`` with
    its derivative ``dh``.
    """

    nu: float
    a: Optional[float] = None
    h_fn: Optional[Callable[[float], float]] = field(default=None, compare=False)
    dh_fn: Optional[Callable[[float], float]] = field(default=None, compare=False)

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError("nu must be positive")
        if (self.a is None) == (self.h_fn is None):
            raise ValueError("give exactly one of a or h_fn")

    @property
    def quadratic(self) -> bool:
        return self.a is not None

    def h(self, x):
        if self.a is not None:
            return 1.0 + self.a * x * (1.0 - x)
        return self.h_fn(x)

    def dh(self, x, step: float = 1e-6):
        if self.a is not None:
            return self.a * (1.0 - 2.0 * x)
        if self.dh_fn is not None:
            return self.dh_fn(x)
        return (self.h_fn(x + step) - self.h_fn(x - step)) / (2 * step)
