"""Fixed points of the mean-field systems, with regime classification.

All fixed-point functions are evaluated in a normalized, overflow-safe form
whose value is ``O(1)``: the terms of each series are accumulated as
logarithms and combined with a log-sum-exp.  Roots are isolated on monotone
pieces (split at the critical points of the function, whenever these are
available in closed form) or by a dense sign scan, then refined by bisection.

Every solver returns an :class:`EquilibriumReport`.  Each root carries a
``stable_hint``: ``"stable"`` when the normalized function crosses zero
downward (the function is positive at ``0+``), ``"unstable"`` otherwise.
The hint is a heuristic of the one-dimensional reduction, not a proof;
:mod:`reroute_mf.stability` provides the actual checks.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import DarParams, ProbVec, RistParams, dar_space, enumerate_rist_space, trunc_space

__all__ = [
    "Root",
    "EquilibriumReport",
    "bisect",
    "phi_sign",
    "phi_normalized",
    "rist_pi",
    "rist_equilibria",
    "phi_c",
    "phi2_closed_form",
    "phi3_discriminant",
    "phi3_from_discriminant",
    "psi_rist1",
    "rist1_cubic_roots",
    "rist1_equilibria",
    "psi_dar",
    "dar_fixed_point_vector",
    "dar_fixed_points",
    "dar_limit_x0",
    "dar_limit_nu_a",
    "dar_limit_nu_a_printed",
    "dar_limit_fixed_points",
    "nlmm1_pi",
    "nlmm1_required_K",
    "nlmm1_fixed_points",
]

ROOT_TOL = 1e-12


@dataclass
class Root:
    """A root ``z`` of a normalized fixed-point function.

    ``value`` is the blocking mass ``R`` (RIST), ``S`` (one-retrial RIST and
    non-linear M/M/1) or ``x_C`` (DAR).  For RIST models ``z`` is the ratio
    ``R / (1 - R)``; elsewhere ``z == value``.  Solvers working in ``log z``
    also record ``log_z``, which stays exact when ``z`` underflows.
    """

    z: float
    value: float
    residual: float
    bracket: tuple
    stable_hint: str
    label: str = ""
    log_z: Optional[float] = None


@dataclass
class EquilibriumReport:
    model: str
    params: dict
    regime: str
    roots: list = field(default_factory=list)
    singular_saturation: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def values(self) -> list:
        return [r.value for r in self.roots]

    @property
    def zs(self) -> list:
        return [r.z for r in self.roots]

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "params": self.params,
            "regime": self.regime,
            "roots": [
                {
                    "z": r.z,
                    "R_or_S": r.value,
                    "residual": r.residual,
                    "stable_hint": r.stable_hint,
                    "bracket": list(r.bracket),
                    "label": r.label,
                    "log_z": r.log_z,
                }
                for r in self.roots
            ],
            "singular_saturation": self.singular_saturation,
            **({"extra": self.extra} if self.extra else {}),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


# ----------------------------------------------------------------------------
# generic helpers
# ----------------------------------------------------------------------------


def bisect(f: Callable[[float], float], lo: float, hi: float, tol: float = ROOT_TOL, max_iter: int = 200):
    """Bisection on a sign change of ``f`` over ``[lo, hi]``.

    Returns the midpoint of the final bracket and the bracket itself.  The
    stopping rule is relative for large arguments so that roots far from 0
    still terminate.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return lo, (lo, lo)
    if fhi == 0:
        return hi, (hi, hi)
    if (flo > 0) == (fhi > 0):
        raise ValueError(f"no sign change on [{lo}, {hi}]")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= tol * max(1.0, abs(mid)) or mid in (lo, hi):
            break
        fm = f(mid)
        if fm == 0:
            return mid, (mid, mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi), (lo, hi)


def _lse(logs: np.ndarray, axis=-1) -> np.ndarray:
    m = np.max(logs, axis=axis, keepdims=True)
    return (m + np.log(np.sum(np.exp(logs - m), axis=axis, keepdims=True))).squeeze(axis)


def _scan_roots(f_vec, f_scalar, grid: np.ndarray, tol=ROOT_TOL) -> list:
    """Bisect every sign change of ``f_vec`` along a sorted grid."""
    vals = f_vec(grid)
    s = np.sign(vals)
    out = []
    for i in np.flatnonzero(s[:-1] * s[1:] < 0):
        z, br = bisect(f_scalar, float(grid[i]), float(grid[i + 1]), tol)
        out.append((z, br))
    for i in np.flatnonzero(s == 0):
        out.append((float(grid[i]), (float(grid[i]), float(grid[i]))))
    out.sort()
    return out


def _hint(f, x, h=1e-7) -> str:
    d = h * max(1.0, abs(x))
    return "stable" if f(x - d) > f(x + d) else "unstable"


def _pieces(points, lo, hi):
    pts = sorted(p for p in points if lo < p < hi)
    edges = [lo, *pts, hi]
    return list(zip(edges[:-1], edges[1:]))


# ----------------------------------------------------------------------------
# RIST, unbounded retrials
# ----------------------------------------------------------------------------


def _log_rist(s, rho1: float, rho2: float, C: int) -> np.ndarray:
    """``log G`` as a function of ``s = log z`` (vectorized)."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    j = np.arange(1, C + 1)  # j = C - m
    # log C!/(C-j)! as a running sum of log(C-i), i < j
    log_fall = np.cumsum(np.log(C - np.arange(C)))
    logw = np.logaddexp(math.log(rho1), math.log(rho2) + s)[:, None]
    return s + _lse(log_fall[None, :] - j[None, :] * logw)


def phi_normalized(z, rho1: float, rho2: float, C: int):
    """``1 - G(z)`` with ``G(z) = z * sum_{m<C} C!/m! (rho1 + rho2 z)^-(C-m)``.

    Accepts scalar or array ``z > 0``.  Terms are combined in log space.
    """
    z_arr = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(z_arr <= 0):
        raise ValueError("phi is defined for z > 0 only")
    # clipping keeps the sign when G is astronomically large
    out = -np.expm1(np.minimum(_log_rist(np.log(z_arr), rho1, rho2, C), 700.0))
    return out if np.ndim(z) else float(out[0])


def phi_sign(z: float, rho1: float, rho2: float, C: int) -> tuple:
    """``(sign, value)`` of the normalized RIST fixed-point function at ``z``."""
    v = phi_normalized(z, rho1, rho2, C)
    return int(np.sign(v)), v


def rist_pi(R: float, params_or_rho, C: Optional[int] = None) -> ProbVec:
    """Product-form distribution ``pi_R`` on the RIST state space.

    ``pi_R(x, y)`` is proportional to ``rho1^x / x! * (rho2 z)^y / y!`` with
    ``z = R / (1 - R)``.  See :func:`rist1_pi` for the one-retrial model.
    """
    if isinstance(params_or_rho, RistParams):
        rho1, rho2, C = params_or_rho.rho1, params_or_rho.rho2, params_or_rho.C
    else:
        rho1, rho2 = params_or_rho
    if not 0 < R < 1:
        raise ValueError("R must lie in (0, 1)")
    return _product_form(rho1, rho2 * R / (1.0 - R), C)


def _product_form(a1: float, a2: float, C: int) -> ProbVec:
    space = enumerate_rist_space(C)
    x, y = space.x, space.y
    lg = np.array([math.lgamma(k + 1) for k in range(C + 1)])
    logs = x * math.log(a1) - lg[x] + (y * math.log(a2) if a2 > 0 else np.where(y == 0, 0.0, -np.inf)) - lg[y]
    w = np.exp(logs - logs.max())
    return ProbVec(w / w.sum(), space)


def _rist_params_dict(rho1, rho2, C, **kw):
    return {"rho1": rho1, "rho2": rho2, "C": C, **kw}


def _rist_regime(rho2, C):
    if rho2 < C:
        return "Underloaded"
    if rho2 == C:
        return "Critical"
    return "Overloaded"


def _q_roots(rho1, rho2, C) -> list:
    """Positive real roots of ``rho2(C-rho2)z^2 + rho2(C-rho1-1)z - rho1``."""
    a = rho2 * (C - rho2)
    b = rho2 * (C - rho1 - 1)
    c = -rho1
    if a == 0:
        return [-c / b] if b > 0 else []
    disc = b * b - 4 * a * c
    if disc < 0:
        return []
    sq = math.sqrt(disc)
    # numerically stable quadratic formula
    qq = -0.5 * (b + math.copysign(sq, b))
    r = [qq / a, c / qq] if qq != 0 else [-b / (2 * a)]
    return sorted(x for x in r if x > 0)


def _walk(F, s0, target_sign, step=1.0, limit=1e5):
    """Move from ``s0`` by doubling steps until ``sign(F) == target_sign``."""
    s = s0
    while abs(s - s0) < limit:
        if np.sign(F(s)) == target_sign:
            return s
        s += step
        step *= 2
    return None


def _solve_in_log(F, cuts, s_lo, s_hi, tol) -> list:
    """Bisect ``F`` (a function of ``s = log z``) on each piece between cuts."""
    out = []
    for a, b in _pieces(cuts, s_lo, s_hi):
        fa, fb = F(a), F(b)
        if fb == 0 or (fa > 0) != (fb > 0):
            out.append(bisect(F, a, b, tol))
    return out


def _to_root(s, br, F, value_of, sign_flip=False) -> Root:
    z = math.exp(s)
    hint = _hint(F, s)
    if sign_flip:
        hint = "stable" if hint == "unstable" else "unstable"
    return Root(
        z=z,
        value=value_of(z),
        residual=abs(F(s)),
        bracket=(math.exp(br[0]), math.exp(br[1])),
        stable_hint=hint,
        log_z=s,
    )


def rist_equilibria(rho1: float, rho2: float, C: int, tol: float = ROOT_TOL) -> EquilibriumReport:
    """Non-singular equilibria ``pi_R`` of the unbounded-retrial RIST system.

    The normalized function ``1 - G`` is positive at ``0+`` and tends to
    ``1 - C/rho2`` at infinity.  Its derivative changes sign only at the
    positive roots of ``rho2(C-rho2)z^2 + rho2(C-rho1-1)z - rho1``, so bisection on
    each monotone piece finds every root.  The search runs in ``log z`` so
    that roots below the smallest double are still bracketed.

    Raises:
        ValueError: if ``rho1 >= C``.
    """
    if not (rho1 > 0 and rho2 > 0):
        raise ValueError("loads must be positive")
    if rho1 >= C:
        raise ValueError(f"need rho1 < C, got rho1={rho1}, C={C}")
    C = int(C)
    F = lambda s: float(-np.expm1(np.minimum(_log_rist(s, rho1, rho2, C), 700.0))[0])
    crit = _q_roots(rho1, rho2, C)
    cuts = [math.log(c) for c in crit]
    top = max(cuts, default=0.0)
    s_lo = _walk(F, min(cuts, default=0.0) - 1.0, 1.0, step=-1.0)
    limit = 1.0 - C / rho2
    s_hi = None
    if limit < 0 or (limit == 0 and rho1 < C - 1):
        s_hi = _walk(F, top + 1.0, -1.0, step=1.0, limit=60.0)
    if s_hi is None:
        s_hi = top + 1.0
    found = _solve_in_log(F, cuts, s_lo, s_hi, tol)
    roots = [_to_root(s, br, F, lambda z: z / (1.0 + z)) for s, br in found]
    return EquilibriumReport(
        model="RistUnbounded",
        params=_rist_params_dict(rho1, rho2, C),
        regime=_rist_regime(rho2, C),
        roots=roots,
        singular_saturation=rho2 > C,
        extra={"critical_points": crit},
    )


def _min_phi(rho1, rho2, C) -> float:
    """Sign-faithful proxy for ``min_z Phi`` when ``rho2 > C``; positive if no dip."""
    crit = _q_roots(rho1, rho2, C)
    if not crit:
        return 1.0 - C / rho2
    return min(phi_normalized(crit[0], rho1, rho2, C), 1.0 - C / rho2)


def phi_c(rho2: float, C: int, tol: float = 1e-9) -> float:
    """Critical load ``phi_C(rho2) = sup{rho1 : min_z Phi < 0}``.

    The minimum over ``z`` is attained at the smaller positive root of the
    derivative quadratic, so ``m(rho1)`` is evaluated exactly rather than
    by a one-dimensional search.  ``rho1 -> m(rho1)`` is increasing, hence
    the outer bisection over ``(0, C - 1)``.
    """
    if rho2 <= C:
        raise ValueError("phi_C is defined for rho2 > C")
    lo, hi = 0.0, float(C - 1)
    if _min_phi(hi * (1 - 1e-15), rho2, C) < 0:
        return hi
    tiny = 1e-12
    if _min_phi(tiny, rho2, C) >= 0:
        return 0.0
    lo = tiny
    while hi - lo > tol * 1e-3:
        mid = 0.5 * (lo + hi)
        if _min_phi(mid, rho2, C) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def phi2_closed_form(rho2: float) -> float:
    return rho2 - 1.0 - math.sqrt(rho2 * (rho2 - 2.0))


def phi3_discriminant(u, rho2: float):
    """Discriminant polynomial ``H_{rho2}(u)`` of the ``C = 3`` cubic."""
    return (
        3 * u**4
        + 2 * (6 - 5 * rho2) * u**3
        + 3 * (3 * rho2**2 - 8 * (rho2 - 1)) * u**2
        - 12 * (rho2 - 2) * u
        - 8 * rho2
        + 12
    )


def phi3_from_discriminant(rho2: float) -> float:
    """Smallest root of ``H_{rho2}`` in ``(0, 2)``, by bisection on a fine scan."""
    grid = np.linspace(0.0, 2.0, 20001)
    f = lambda u: phi3_discriminant(u, rho2)
    vals = f(grid)
    i = int(np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)[0])
    return bisect(f, float(grid[i]), float(grid[i + 1]), 1e-14)[0]


# ----------------------------------------------------------------------------
# RIST, one retrial
# ----------------------------------------------------------------------------


def _log_rist1(s, rho1: float, rho2: float, C: int) -> np.ndarray:
    s = np.atleast_1d(np.asarray(s, dtype=float))
    k = np.arange(C + 1)
    log_fall = np.concatenate([[0.0], np.cumsum(np.log(C - np.arange(C)))])
    logw = np.logaddexp(math.log(rho1), math.log(rho2) + s)[:, None]
    return s + _lse(log_fall[None, :] - k[None, :] * logw)


def psi_rist1(z, rho1: float, rho2: float, C: int):
    """``z * sum_{k=0}^C C!/(C-k)! (rho1 + rho2 z)^-k - 1`` (vectorized)."""
    z_arr = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(z_arr <= 0):
        raise ValueError("z must be positive")
    out = np.expm1(np.minimum(_log_rist1(np.log(z_arr), rho1, rho2, C), 700.0))
    return out if np.ndim(z) else float(out[0])


def rist1_cubic_roots(rho1: float, rho2: float, C: int) -> list:
    """Real roots in ``(rho1, rho1 + rho2)`` of the derivative cubic, in ``w`` units."""
    coeffs = [1.0, -(2 * rho1 + rho2), rho1**2 + rho1 * rho2 + rho2 * (C - 1), -C * rho1 * rho2]
    out = []
    for r in np.roots(coeffs):
        if abs(r.imag) <= 1e-9 * max(1.0, abs(r.real)) and rho1 < r.real < rho1 + rho2:
            out.append(float(r.real))
    return sorted(out)


def rist1_equilibria(rho1: float, rho2: float, C: int, tol: float = ROOT_TOL) -> EquilibriumReport:
    """Equilibria ``pi_S`` of the RIST system with one retrial.

    ``S`` solves ``psi(S) = 0`` on ``(0, 1)``; ``psi(0+) = -1`` and
    ``psi(1) > 0``.  The interval is cut at the images ``(w - rho1)/rho2``
    of the real roots of the derivative cubic; each piece is monotone.  At
    large ``C`` the light-load root can be far below ``1e-300``, so the
    search runs in ``log S`` and such a root is reported with ``z == 0.0``
    and its logarithm in ``log_z``.
    """
    if not (rho1 > 0 and rho2 > 0):
        raise ValueError("loads must be positive")
    C = int(C)
    # clipping keeps the sign and avoids overflow far from the roots
    F = lambda s: float(np.expm1(np.minimum(_log_rist1(s, rho1, rho2, C), 700.0))[0])
    cuts = [math.log((w - rho1) / rho2) for w in rist1_cubic_roots(rho1, rho2, C)]
    s_lo = _walk(F, min(cuts, default=0.0) - 1.0, -1.0, step=-1.0, limit=1e7)
    found = _solve_in_log(F, cuts, s_lo, 0.0, tol)
    # psi rises through zero where the fixed-point map falls
    roots = [_to_root(s, br, F, lambda z: z, sign_flip=True) for s, br in found]
    return EquilibriumReport(
        model="RistOneRetrial",
        params=_rist_params_dict(rho1, rho2, C, p0=1),
        regime=f"{len(roots)}-root",
        roots=roots,
        singular_saturation=False,
        extra={"cuts": [math.exp(c) for c in cuts]},
    )


def rist1_pi(S: float, rho1: float, rho2: float, C: int) -> ProbVec:
    """``pi_S`` for the one-retrial model: class-2 load ``rho2 * S``."""
    return _product_form(rho1, rho2 * S, C)


__all__.append("rist1_pi")


# ----------------------------------------------------------------------------
# DAR
# ----------------------------------------------------------------------------


def _dar_log_prod(C: int) -> np.ndarray:
    # log prod_{i<k} (1 - i/C) for k = 0..C
    return np.concatenate([[0.0], np.cumsum(np.log1p(-np.arange(C) / C))])


def _log_dar(s, nu: float, a: float, C: int) -> np.ndarray:
    s = np.atleast_1d(np.asarray(s, dtype=float))
    z = np.exp(s)
    k = np.arange(C + 1)
    lnh = (math.log(nu) + np.log1p(a * z * (1.0 - z)))[:, None]
    return s + _lse(_dar_log_prod(C)[None, :] - k[None, :] * lnh)


def psi_dar(z, nu: float, a: float, C: int):
    """``1 - z * sum_k prod_{i<k}(1 - i/C) (nu h(z))^-k`` with ``h = 1 + a z (1 - z)``."""
    z_arr = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any((z_arr <= 0) | (z_arr >= 1)):
        raise ValueError("z must lie in (0, 1)")
    out = -np.expm1(_log_dar(np.log(z_arr), nu, a, C))
    return out if np.ndim(z) else float(out[0])


def dar_fixed_point_vector(z: float, params: DarParams) -> ProbVec:
    """``x_k`` proportional to ``(lam h(z))^k / k!`` on ``{0..C}``."""
    C = params.C
    k = np.arange(C + 1)
    lg = np.array([math.lgamma(i + 1) for i in k])
    logs = k * math.log(params.lam * params.h(z)) - lg
    w = np.exp(logs - logs.max())
    return ProbVec(w / w.sum(), dar_space(C))


def _dar_log_grid(nu: float, C: int, n_log: int, n_uniform: int) -> np.ndarray:
    """Grid in ``s = log z``: logarithmic below ``1e-2``, uniform in ``z`` above.

    The lower end is pushed below ``log 1e-12`` far enough that the
    function is certainly positive there (``h`` is 1 to double precision).
    """
    base = float(_lse(_dar_log_prod(C) - np.arange(C + 1) * math.log(nu)))
    s_min = min(math.log(1e-12), -base - 30.0)
    g1 = np.linspace(s_min, math.log(1e-2), n_log)
    g2 = np.log(np.linspace(1e-2, 1.0 - 1e-12, n_uniform))
    return np.unique(np.concatenate([g1, g2]))


def dar_fixed_points(
    nu: float, a: float, C: int, n_log: int = 4001, n_uniform: int = 20001
) -> EquilibriumReport:
    """Roots ``x_C`` in ``(0, 1)`` of the DAR fixed-point equation.

    A dense sign scan runs in ``log z``: uniform in ``z`` on ``[1e-2, 1)``,
    and logarithmic below, down to ``1e-12`` or further when the light-load
    root lies deeper (it decays geometrically in ``C``).  Each root is
    labelled ``"light"`` when ``nu h(x) < 1`` and ``"saturated"`` otherwise.
    """
    DarParams(nu, a, C)
    g = _dar_log_grid(nu, C, n_log, n_uniform)
    F = lambda s: float(-np.expm1(_log_dar(s, nu, a, C))[0])
    Fv = lambda v: -np.expm1(_log_dar(v, nu, a, C))
    roots = []
    for s, br in _scan_roots(Fv, F, g):
        r = _to_root(s, br, F, lambda z: z)
        light = math.log(nu) + math.log1p(a * r.z * (1 - r.z)) < 0
        r.label = "light" if light else "saturated"
        roots.append(r)
    return EquilibriumReport(
        model="DarFinite",
        params={"nu": nu, "a": a, "C": C},
        regime=f"{len(roots)}-root",
        roots=roots,
    )


def dar_limit_x0(a: float) -> float:
    """Maximizer of ``(1 - z) h(z)`` on ``[0, 1]``."""
    return (2.0 - math.sqrt((a + 3.0) / a)) / 3.0


def dar_limit_nu_a(a: float) -> float:
    """``1 / max_z (1 - z) h(z)``, the lower edge of the three-root window."""
    x0 = dar_limit_x0(a)
    return 1.0 / ((1.0 - x0) * (1.0 + a * x0 * (1.0 - x0)))


def dar_limit_nu_a_printed(a: float, coeff: float = 2.0 / 3.0) -> float:
    """``3 / (1 + 2a/9 + coeff (a+3)^{3/2} / sqrt(a))``.

    With ``coeff = 2/3`` this is the literal closed form as usually quoted,
    which does not agree with :func:`dar_limit_nu_a`; ``coeff = 2/9`` does.
    """
    return 3.0 / (1.0 + 2.0 * a / 9.0 + coeff * (a + 3.0) ** 1.5 / math.sqrt(a))


def dar_limit_fixed_points(nu: float, a: float, tol: float = ROOT_TOL) -> EquilibriumReport:
    """Roots in ``(0, 1)`` of ``a z^3 - 2a z^2 + (a-1) z + 1 = 1/nu``.

    ``(1 - z) h(z)`` increases on ``[0, x0]`` and decreases on ``[x0, 1]``
    from 1 to 0, so there are two roots for ``nu_a < nu < 1``, one for
    ``nu > 1`` and none below ``nu_a``.
    """
    if not (nu > 0 and a > 1):
        raise ValueError("need nu > 0 and a > 1")
    x0 = dar_limit_x0(a)
    f = lambda z: (1.0 - z) * (1.0 + a * z * (1.0 - z)) - 1.0 / nu
    roots = []
    for lo, hi in ((0.0, x0), (x0, 1.0)):
        flo, fhi = f(lo), f(hi)
        if flo == 0 and lo == 0:
            continue
        if (flo > 0) != (fhi > 0) or (fhi == 0 and hi < 1):
            z, br = bisect(f, lo, hi, tol)
            hint = "stable" if hi == 1.0 else "unstable"
            roots.append(Root(z=z, value=z, residual=abs(f(z)), bracket=br, stable_hint=hint))
    nu_a = dar_limit_nu_a(a)
    return EquilibriumReport(
        model="DarLimit",
        params={"nu": nu, "a": a},
        regime=f"{len(roots)}-root",
        roots=roots,
        extra={
            "x0": x0,
            "nu_a": nu_a,
            "nu_a_printed": dar_limit_nu_a_printed(a),
            "nu_a_coeff_2_9": dar_limit_nu_a_printed(a, 2.0 / 9.0),
            "window_width": 1.0 - nu_a,
        },
    )


# ----------------------------------------------------------------------------
# non-linear M/M/1
# ----------------------------------------------------------------------------


def nlmm1_pi(S: float, K: int) -> ProbVec:
    """Geometric ``pi_S(k) = S (1-S)^k`` truncated to ``{0..K}`` and renormalized."""
    if not 0 < S < 1:
        raise ValueError("S must lie in (0, 1)")
    k = np.arange(K + 1)
    v = np.exp(k * math.log1p(-S))
    return ProbVec(v / v.sum(), trunc_space(K))


def nlmm1_required_K(S: float, tail: float = 1e-10, minimum: int = 10) -> int:
    """Smallest ``K`` with geometric tail ``(1-S)^(K+1) < tail``."""
    return max(minimum, int(math.ceil(math.log(tail) / math.log1p(-S))))


def nlmm1_fixed_points(
    nu: float,
    a: Optional[float] = None,
    h: Optional[Callable[[float], float]] = None,
    grid_points: int = 100001,
    tol: float = ROOT_TOL,
) -> EquilibriumReport:
    """Roots ``S`` in ``(0, 1)`` of ``(1 - S) h(S) = 1/nu``.

    For quadratic ``h`` (give ``a``) the cubic is split at its maximizer;
    for a general callable ``h`` a uniform sign scan is used.
    """
    if not nu > 0:
        raise ValueError("nu must be positive")
    if (a is None) == (h is None):
        raise ValueError("give exactly one of a or h")
    if a is not None and a > 1:
        roots = dar_limit_fixed_points(nu, a, tol).roots
        params = {"nu": nu, "a": a}
    else:
        if a is not None:
            h = lambda s: 1.0 + a * s * (1.0 - s)
            params = {"nu": nu, "a": a}
        else:
            params = {"nu": nu, "h": getattr(h, "__name__", "callable")}
        f = lambda s: (1.0 - s) * h(s) - 1.0 / nu
        g = np.linspace(1e-12, 1.0 - 1e-12, grid_points)
        roots = [
            Root(z=z, value=z, residual=abs(f(z)), bracket=br, stable_hint=_hint(f, z))
            for z, br in _scan_roots(np.vectorize(f), f, g, tol)
        ]
    return EquilibriumReport(model="NlMm1", params=params, regime=f"{len(roots)}-root", roots=roots)
