"""Spectral gaps and exponential-stability checks for equilibria.

Two families of checks are provided:

* RIST: the linearized process at a blocking mass ``R`` is an Erlang loss
  node with two arrival classes.  It is reversible, so its spectral gap in
  the ``pi_R``-weighted L2 norm is the smallest nonzero eigenvalue of a
  symmetric matrix, computed here by cyclic Jacobi rotations.
* Non-linear M/M/1: the gap is explicit and the criterion reduces to an
  inequality in the fixed point ``S``.

Any equilibrium of any of the ODE systems can also be probed numerically
with :func:`linearized_probe`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import ProbVec, RistParams, enumerate_rist_space
from .equilibria import bisect, phi_normalized, rist_pi
from .mfode import OdeOptions, make_rhs

__all__ = [
    "NotReversibleError",
    "LinearGenerator",
    "StabilityReport",
    "ProbeResult",
    "build_rist_linear_generator",
    "jacobi_eigenvalues",
    "spectral_gap",
    "check_rist_criterion",
    "nlmm1_gap",
    "check_nlmm1_criterion",
    "nlmm1_interval_polynomials",
    "nlmm1_stability_interval",
    "linearized_probe",
]

DB_TOL = 1e-10


class NotReversibleError(ValueError):
    """Detailed balance fails; the weighted-L2 eigen-gap is not defined."""


@dataclass
class LinearGenerator:
    """Dense rate matrix ``Q`` with its stationary distribution."""

    Q: np.ndarray
    stationary: ProbVec
    db_residual: float = field(init=False)
    stationarity_residual: float = field(init=False)

    def __post_init__(self):
        Q = self.Q
        off = Q - np.diag(np.diag(Q))
        if np.any(off < 0):
            raise ValueError("off-diagonal rates must be nonnegative")
        if np.max(np.abs(Q.sum(axis=1))) > 1e-9 * max(1.0, np.abs(Q).max()):
            raise ValueError("generator rows must sum to zero")
        pi = self.stationary.values
        flux = pi[:, None] * Q
        self.db_residual = float(np.max(np.abs(flux - flux.T)))
        self.stationarity_residual = float(np.max(np.abs(pi @ Q)))

    @property
    def reversible(self) -> bool:
        return self.db_residual < DB_TOL * max(1.0, float(np.abs(self.Q).max()))

    @classmethod
    def from_matrix(cls, Q, pi=None) -> "LinearGenerator":
        """Wrap a generator; solve for the stationary law if not given."""
        Q = np.asarray(Q, dtype=float)
        n = Q.shape[0]
        if pi is None:
            M = np.vstack([Q.T, np.ones(n)])
            rhs = np.zeros(n + 1)
            rhs[-1] = 1.0
            pi = np.linalg.lstsq(M, rhs, rcond=None)[0]
            pi = np.clip(pi, 0.0, None)
            pi /= pi.sum()
        if not isinstance(pi, ProbVec):
            pi = ProbVec(pi, f"trunc:{n - 1}", tol=1e-9)
        return cls(Q, pi)

    def scaled(self, c: float) -> "LinearGenerator":
        return LinearGenerator(c * self.Q, self.stationary)


@dataclass
class StabilityReport:
    kappa: float
    criterion_threshold: float
    margin: float
    verdict: str
    method: str
    details: dict = field(default_factory=dict)

    @property
    def met(self) -> bool:
        return self.verdict == "CriterionMet"

    @property
    def conclusion(self) -> str:
        # the criteria are sufficient conditions only
        return "exponentially stable" if self.met else "inconclusive"

    def to_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "criterion_threshold": self.criterion_threshold,
            "margin": self.margin,
            "verdict": self.verdict,
            "conclusion": self.conclusion,
            "method": self.method,
            **self.details,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), default=float, **kw)


def _verdict(margin: float) -> str:
    return "CriterionMet" if margin > 0 else "CriterionNotMet"


# ----------------------------------------------------------------------------
# RIST linearized generator
# ----------------------------------------------------------------------------


def build_rist_linear_generator(R: float, params: RistParams) -> LinearGenerator:
    """Erlang loss node with class rates ``lam`` and ``lam R/(1-R)``."""
    if not 0 < R < 1:
        raise ValueError(f"R must lie in (0, 1), got {R}")
    space = enumerate_rist_space(params.C)
    n = len(space)
    Q = np.zeros((n, n))
    beta = params.lam * R / (1.0 - R)
    for i, (x, y) in enumerate(space.states):
        if x + y < params.C:
            Q[i, space.idx(x + 1, y)] = params.lam
            Q[i, space.idx(x, y + 1)] = beta
        if x > 0:
            Q[i, space.idx(x - 1, y)] = params.mu1 * x
        if y > 0:
            Q[i, space.idx(x, y - 1)] = params.mu2 * y
    Q[np.diag_indices(n)] = -Q.sum(axis=1)
    return LinearGenerator(Q, rist_pi(R, params))


# ----------------------------------------------------------------------------
# Jacobi eigenvalues
# ----------------------------------------------------------------------------


def _round_robin(n: int):
    """Pairings of ``range(n)`` (``n`` even) covering every pair once per sweep."""
    idx = list(range(n))
    for _ in range(n - 1):
        yield np.array(idx[: n // 2]), np.array(idx[n // 2 :][::-1])
        idx = [idx[0], idx[-1], *idx[1:-1]]


def jacobi_eigenvalues(A, tol: float = 1e-12, max_sweeps: int = 60) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.

    Each sweep visits every off-diagonal pair once in round-robin order;
    the ``n/2`` rotations of one round act on disjoint index pairs and are
    applied together.  Stops when the off-diagonal Frobenius norm falls
    below ``tol * max(1, ||A||_F)``.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    if n == 1:
        return A.diagonal().copy()
    if n % 2:
        A = np.pad(A, ((0, 1), (0, 1)))
    m = A.shape[0]
    scale = max(1.0, float(np.linalg.norm(A)))
    rounds = list(_round_robin(m))

    def off(M):
        return float(np.linalg.norm(M - np.diag(np.diag(M))))

    for _ in range(max_sweeps):
        if off(A) < tol * scale:
            break
        for P, Qi in rounds:
            apq = A[P, Qi]
            active = np.abs(apq) > 1e-300
            if not active.any():
                continue
            app, aqq = A[P, P], A[Qi, Qi]
            with np.errstate(divide="ignore", invalid="ignore"):
                tau = np.where(active, (aqq - app) / (2.0 * np.where(active, apq, 1.0)), 0.0)
            # hypot avoids overflow of tau**2 for nearly decoupled pairs
            t = np.where(active, np.sign(tau) / (np.abs(tau) + np.hypot(1.0, tau)), 0.0)
            t = np.where(active & (tau == 0), 1.0, t)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            ap, aq = A[:, P].copy(), A[:, Qi].copy()
            A[:, P] = c * ap - s * aq
            A[:, Qi] = s * ap + c * aq
            ap, aq = A[P, :].copy(), A[Qi, :].copy()
            A[P, :] = c[:, None] * ap - s[:, None] * aq
            A[Qi, :] = s[:, None] * ap + c[:, None] * aq
    else:
        raise ArithmeticError("Jacobi iteration did not converge")
    # the padding index is last and never couples to the others
    return np.sort(A.diagonal()[:n])


def _symmetrized(gen: LinearGenerator) -> np.ndarray:
    d = np.sqrt(gen.stationary.values)
    if np.any(d <= 0):
        raise NotReversibleError("stationary law has zero entries")
    A = d[:, None] * (-gen.Q) / d[None, :]
    asym = float(np.max(np.abs(A - A.T)))
    if asym > DB_TOL * max(1.0, float(np.abs(A).max())):
        raise NotReversibleError(f"symmetrized generator is asymmetric ({asym:.3e})")
    return 0.5 * (A + A.T)


def spectral_gap(gen: LinearGenerator, method: str = "auto", jacobi_max_dim: int = 400) -> float:
    """Smallest nonzero eigenvalue of ``-Q`` in the ``pi``-weighted L2 space.

    Args:
        gen: a reversible generator.
        method: ``"jacobi"``, ``"eigh"`` or ``"auto"`` (Jacobi up to
            ``jacobi_max_dim`` states, LAPACK above).

    Raises:
        NotReversibleError: if detailed balance fails.
    """
    if not gen.reversible:
        raise NotReversibleError(f"detailed-balance residual {gen.db_residual:.3e}")
    A = _symmetrized(gen)
    d = np.sqrt(gen.stationary.values)
    zero_res = float(np.max(np.abs(A @ d)))
    if zero_res > 1e-9 * max(1.0, float(np.abs(A).max())):
        raise ArithmeticError(f"sqrt(pi) is not a null vector (residual {zero_res:.3e})")
    if method == "auto":
        method = "jacobi" if A.shape[0] <= jacobi_max_dim else "eigh"
    if method == "jacobi":
        ev = jacobi_eigenvalues(A)
    elif method == "eigh":
        ev = np.linalg.eigvalsh(A)
    else:
        raise ValueError(f"unknown method {method!r}")
    # drop the eigenvalue closest to zero (the stationary mode)
    i0 = int(np.argmin(np.abs(ev)))
    return float(np.min(np.delete(ev, i0)))


def check_rist_criterion(R: float, params: RistParams, method: str = "auto") -> StabilityReport:
    """Compare the RIST eigen-gap at ``R`` with ``lam/(1-R) * sqrt(C/rho2)``.

    Raises:
        ValueError: if ``R`` is not a fixed point (normalized residual > 1e-8).
    """
    if not 0 < R < 1:
        raise ValueError("R must lie in (0, 1)")
    res = abs(phi_normalized(R / (1.0 - R), params.rho1, params.rho2, params.C))
    if res > 1e-8:
        raise ValueError(f"R={R} is not a fixed point (residual {res:.3e})")
    gen = build_rist_linear_generator(R, params)
    kappa = spectral_gap(gen, method)
    thr = params.lam / (1.0 - R) * math.sqrt(params.C / params.rho2)
    return StabilityReport(
        kappa=kappa,
        criterion_threshold=thr,
        margin=kappa - thr,
        verdict=_verdict(kappa - thr),
        method="EigenGap",
        details={
            "R": R,
            "fixed_point_residual": res,
            "detailed_balance_residual": gen.db_residual,
            "stationarity_residual": gen.stationarity_residual,
            "params": {"lam": params.lam, "mu1": params.mu1, "mu2": params.mu2, "C": params.C},
        },
    )


# ----------------------------------------------------------------------------
# non-linear M/M/1
# ----------------------------------------------------------------------------


def nlmm1_gap(S: float, nu: float, h: Callable[[float], float]) -> float:
    """``(sqrt(nu h(S)) - 1)^2``, the gap of the M/M/1 queue frozen at ``S``."""
    r = nu * h(S)
    if r <= 1:
        raise ValueError(f"nu*h(S) = {r} <= 1: frozen queue is not ergodic")
    return (math.sqrt(r) - 1.0) ** 2


def check_nlmm1_criterion(
    S: float,
    nu: float,
    a: Optional[float] = None,
    h: Optional[Callable[[float], float]] = None,
    dh: Optional[Callable[[float], float]] = None,
) -> StabilityReport:
    """Check ``nu S |h'(S)| < kappa_S`` at a fixed point ``S``.

    For the quadratic ``h`` the equivalent polynomial form
    ``a S |1 - 2S| < (1 - sqrt(1-S))^2 (1 + a S (1-S))`` is evaluated as
    well and both verdicts must agree.

    Raises:
        ValueError: if ``S`` is not a fixed point to ``1e-10``.
    """
    if (a is None) == (h is None):
        raise ValueError("give exactly one of a or h")
    if a is not None:
        h = lambda x: 1.0 + a * x * (1.0 - x)
        dh = lambda x: a * (1.0 - 2.0 * x)
    elif dh is None:
        dh = lambda x, e=1e-6: (h(x + e) - h(x - e)) / (2 * e)
    if not 0 < S < 1:
        raise ValueError("S must lie in (0, 1)")
    res = abs((1.0 - S) * h(S) - 1.0 / nu)
    if res > 1e-10:
        raise ValueError(f"S={S} is not a fixed point (residual {res:.3e})")
    kappa = nlmm1_gap(S, nu, h)
    thr = nu * S * abs(dh(S))
    # general form as stated: |h'(S)| < (1/(nu S)) (1/sqrt(1-S) - 1)^2
    general_margin = (1.0 / (nu * S)) * (1.0 / math.sqrt(1.0 - S) - 1.0) ** 2 - abs(dh(S))
    details = {"S": S, "nu": nu, "fixed_point_residual": res, "general_margin": general_margin}
    if a is not None:
        lhs = a * S * abs(1.0 - 2.0 * S)
        rhs = (1.0 - math.sqrt(1.0 - S)) ** 2 * (1.0 + a * S * (1.0 - S))
        details["quadratic_margin"] = rhs - lhs
        if (rhs - lhs > 0) != (general_margin > 0) and abs(rhs - lhs) > 1e-12:
            raise ArithmeticError("general and quadratic forms of the criterion disagree")
    return StabilityReport(
        kappa=kappa,
        criterion_threshold=thr,
        margin=kappa - thr,
        verdict=_verdict(general_margin),
        method="ClosedForm",
        details=details,
    )


def nlmm1_interval_polynomials(a: float):
    """The two quintics whose roots bound the stability interval."""
    P1 = lambda x: a * x**5 - a * x**4 - 3 * a * x**3 - a * x**2 + (a - 1) * x + a + 1
    P2 = lambda x: a * x**5 - a * x**4 + a * x**3 + 3 * a * x**2 - (1 + a) * x + 1 - a
    return P1, P2


def nlmm1_stability_interval(a: float) -> tuple:
    """Load range ``(nu_low, nu_high)`` on which the fixed point satisfies the criterion.

    ``z = sqrt(1 - S)`` parametrizes the fixed point, and
    ``nu = 1 / (z^2 (1 + a z^2 - a z^4))`` maps it back to the load.  The
    endpoints are the images of the root of the first quintic in
    ``(sqrt(2)/2, 1)`` and of the second in ``(0, sqrt(2)/2)``.
    """
    if not a > 1:
        raise ValueError("need a > 1")
    P1, P2 = nlmm1_interval_polynomials(a)
    r = math.sqrt(0.5)
    z1 = bisect(P1, r, 1.0, 1e-15)[0]
    z2 = bisect(P2, 0.0, r, 1e-15)[0]
    Q = lambda z: 1.0 / (z * z * (1.0 + a * z * z - a * z**4))
    return tuple(sorted((Q(z1), Q(z2))))


# ----------------------------------------------------------------------------
# linearized probe
# ----------------------------------------------------------------------------


@dataclass
class ProbeResult:
    abscissa: float
    label: str
    per_direction: list
    residual: float
    dim: int

    def to_dict(self) -> dict:
        return {
            "method": "LinearizedProbe",
            "abscissa": self.abscissa,
            "label": self.label,
            "per_direction": self.per_direction,
            "equilibrium_residual": self.residual,
            "tangent_dim": self.dim,
        }


def _tangent_basis(n: int) -> np.ndarray:
    # orthonormal basis of {d : sum(d) = 0}
    M = np.eye(n) - 1.0 / n
    q, _ = np.linalg.qr(M[:, : n - 1])
    return q


def tangent_jacobian(f, x: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of ``f`` restricted to the tangent space."""
    V = _tangent_basis(x.size)
    cols = []
    for j in range(V.shape[1]):
        d = step * V[:, j]
        cols.append((f(x + d) - f(x - d)) / (2 * step))
    return V.T @ np.array(cols).T


__all__.append("tangent_jacobian")


def linearized_probe(
    system: str,
    equilibrium: ProbVec,
    params,
    n_directions: int = 4,
    horizon: float = 40.0,
    seed: int = 0,
    opts: OdeOptions = OdeOptions(),
    threshold: float = 1e-4,
) -> ProbeResult:
    """Estimate the spectral abscissa of the linearization at an equilibrium.

    The tangent-space Jacobian ``J`` is discretized by one classical RK4
    step of size ``dt`` (the matrix polynomial of ``dt J``), squared until
    it propagates over a time ``tau`` of order one, and power-iterated from
    ``n_directions`` random starts up to ``horizon``.  The abscissa is the
    mean log growth rate over the second half of the iterations.

    Raises:
        ValueError: if ``||rhs(equilibrium)||_inf >= 1e-8``.
    """
    _, _, raw = make_rhs(system, params, opts)
    x = np.array(equilibrium.values, dtype=float)
    r0 = raw(x)
    if r0 is None or np.max(np.abs(r0)) >= 1e-8:
        res = math.inf if r0 is None else float(np.max(np.abs(r0)))
        raise ValueError(f"not an equilibrium (residual {res:.3e})")
    J = tangent_jacobian(raw, x)
    dim = J.shape[0]
    norm = max(float(np.abs(J).sum(axis=1).max()), 1e-12)
    dt = 0.5 / norm
    A = dt * J
    A2 = A @ A
    P = np.eye(dim) + A + A2 / 2 + A2 @ A / 6 + A2 @ A2 / 24
    tau = dt
    while tau < 0.5:
        P = P @ P
        tau *= 2
    n_iter = max(4, int(math.ceil(horizon / tau)))
    burn = n_iter // 2

    rng = np.random.default_rng(seed)
    rates = []
    for _ in range(n_directions):
        v = rng.standard_normal(dim)
        v /= np.linalg.norm(v)
        acc = 0.0
        for k in range(n_iter):
            v = P @ v
            nv = np.linalg.norm(v)
            if nv == 0:
                acc = -math.inf
                break
            if k >= burn:
                acc += math.log(nv)
            v /= nv
        rates.append(acc / ((n_iter - burn) * tau))
    alpha = max(rates)
    label = "Unstable" if alpha > threshold else "Stable" if alpha < -threshold else "Marginal"
    return ProbeResult(alpha, label, rates, float(np.max(np.abs(r0))), dim)
