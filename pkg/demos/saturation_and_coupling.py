"""Saturation when rerouted jobs are slow.

With rho1 < C < rho2 the RIST network started near saturation stays there.
The ODE, by contrast, hits the singularity where no node is free.  The
pathwise coupling with the comparison process U is checked along the way.

    python demos/saturation_and_coupling.py
"""

import numpy as np

from reroute_mf import nsim
from reroute_mf.core import ProbVec, RistParams, RngStream, enumerate_rist_space
from reroute_mf.mfode import integrate

p = RistParams(lam=2.0, mu1=1.0, mu2=0.2, C=3)
space = enumerate_rist_space(p.C)
v = np.zeros(len(space))
v[space.idx(0, 3)], v[space.idx(0, 0)] = 1 - 1e-3, 1e-3
print("ODE from near saturation:", integrate("rist", ProbVec(v, space), p, 10.0).status)

res = nsim.saturation_experiment(p, 500, eta=0.3, t0=1.0, T=10.0, eps=0.5, runs=20, rng=RngStream(0))
print(f"saturation kept in {res.successes}/{res.runs} runs, lowest mean class-2 load {min(res.min_mean_y):.3f}")

bad = 0
for k in range(20):
    init = nsim.saturated_rist_state(100, p.C, 0.3, RngStream(k))
    bad += not nsim.simulate_coupled(p, 100, init, 10.0, RngStream(k, 1)).ok
print(f"coupling violations over 20 seeds: {bad}")
