"""Local stability certificates.

Prints the spectral-gap criterion for a RIST equilibrium, the stability
interval of the non-linear M/M/1 queue for a = 2, and a linearized probe
of a DAR fixed point.

    python demos/stability_checks.py
"""

from reroute_mf import equilibria as eq
from reroute_mf import stability
from reroute_mf.core import DarParams, RistParams

p = RistParams(1.0, 1.0, 0.5, 3)
R = eq.rist_equilibria(p.rho1, p.rho2, p.C).values[0]
rep = stability.check_rist_criterion(R, p)
print(f"RIST R={R:.5f}: gap {rep.kappa:.5f} vs threshold {rep.criterion_threshold:.5f} -> {rep.verdict}")

lo, hi = stability.nlmm1_stability_interval(2.0)
print(f"non-linear M/M/1, a=2: criterion holds for nu in ({lo:.4f}, {hi:.4f})")
for nu in (1.1, 1.4, 1.7):
    S = eq.nlmm1_fixed_points(nu, a=2.0).values[-1]
    print(f"  nu={nu}: S={S:.4f} {stability.check_nlmm1_criterion(S, nu, a=2.0).verdict}")

d = DarParams(0.94, 2.0, 600)
for r in eq.dar_fixed_points(d.nu, d.a, d.C).roots:
    pr = stability.linearized_probe("dar", eq.dar_fixed_point_vector(r.value, d), d)
    print(f"DAR nu=0.94 C=600 root {r.value:.5f}: {pr.label} (abscissa {pr.abscissa:.3g})")
