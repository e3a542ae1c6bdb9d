"""Equilibria of the DAR mean-field system as capacity grows.

For a = 2 the limiting equation has two saturated roots exactly when the
load lies in (nu_a, 1).  At finite capacity a third, light-load root joins
them only once C is large enough; this script shows how the root count at
nu = 0.97 changes with C and prints the limiting window.

    python demos/dar_equilibria.py
"""

from reroute_mf import equilibria as eq

a, nu = 2.0, 0.97
print(f"nu_a({a}) = {eq.dar_limit_nu_a(a):.5f}, window width = {1 - eq.dar_limit_nu_a(a):.5f}")
print("limiting roots at nu=0.97:", [round(v, 5) for v in eq.dar_limit_fixed_points(nu, a).values])

for C in (100, 500, 1000, 2000, 2500, 3000):
    rep = eq.dar_fixed_points(nu, a, C)
    labels = ", ".join(f"{r.value:.5g} ({r.label})" for r in rep.roots)
    print(f"C={C:5d}: {len(rep.roots)} root(s): {labels}")
