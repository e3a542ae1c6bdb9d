import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reroute_mf import nsim
from reroute_mf.core import DarParams, RistParams, RngStream, total_variation
from reroute_mf.equilibria import _product_form

P = RistParams(2.0, 1.0, 0.2, 3)


def run_rist(params, N, init, horizon, seed):
    return nsim.simulate_rist(params, N, init, horizon, dt=horizon / 10, rng=RngStream(seed))


class TestRist:
    def test_single_node_never_reroutes(self):
        tr = nsim.simulate_rist(P, 1, nsim.empty_rist_state(1), 50.0, rng=RngStream(3))
        assert tr.counters["rerouted"] == 0
        assert all(s.values[np.asarray(s.space.y) > 0].sum() == 0 for s in tr.states)
        assert tr.counters["rejected"] > 0

    @settings(max_examples=25, deadline=None)
    @given(
        st.integers(1, 30),
        st.integers(1, 4),
        st.sampled_from([None, 0, 1, 3]),
        st.floats(0.2, 4.0),
        st.integers(0, 2**31),
    )
    def test_counters_and_capacity(self, N, C, p0, lam, seed):
        p = RistParams(lam, 1.0, 0.5, C, p0)
        tr = nsim.simulate_rist(p, N, nsim.empty_rist_state(N), 5.0, rng=RngStream(seed))
        c = tr.counters
        assert c["arrivals"] == c["accepted"] + c["rerouted"] + c["rejected"]
        fin = tr.final_state
        fin.validate(C)
        # every accepted or rerouted job is either still present or has left
        assert fin.x.sum() == c["accepted"] - c["departures1"]
        assert fin.y.sum() == c["rerouted"] - c["departures2"]
        for s in tr.states:
            k = s.values * N
            assert np.allclose(k, np.round(k), atol=1e-9)
        if p0 == 0:
            assert c["rerouted"] == 0

    def test_deterministic(self):
        a = run_rist(P, 40, nsim.empty_rist_state(40), 5.0, 11)
        b = run_rist(P, 40, nsim.empty_rist_state(40), 5.0, 11)
        assert a.counters == b.counters
        assert np.array_equal(a.matrix(), b.matrix())
        c = run_rist(P, 40, nsim.empty_rist_state(40), 5.0, 12)
        assert a.counters != c.counters

    def test_invalid_init_rejected(self):
        with pytest.raises(ValueError):
            nsim.simulate_rist(P, 2, nsim.RistNetworkState([2, 0], [2, 0]), 1.0)
        with pytest.raises(ValueError):
            nsim.simulate_rist(P, 3, nsim.empty_rist_state(2), 1.0)

    def test_saturated_state(self):
        s = nsim.saturated_rist_state(100, 3, 0.3, RngStream(1))
        s.validate(3)
        assert s.y.sum() == 300 - 30 and s.x.sum() == 0
        assert s.y.mean() >= 3 - 0.3

    def test_without_rerouting_matches_erlang(self):
        # p0 = 0 decouples the nodes into Erlang loss systems
        p = RistParams(2.0, 1.0, 0.5, 3, p0=0)
        tr = nsim.simulate_rist(p, 1000, nsim.empty_rist_state(1000), 200.0, dt=1.0, rng=RngStream(5))
        M = tr.matrix()[tr.times >= 20]
        avg = M.mean(axis=0)
        pi = _product_form(2.0, 0.0, 3).values
        assert total_variation(avg, pi) < 0.02


class TestDar:
    def test_all_full_rejects_everything(self):
        p = DarParams(1.0, 2.0, 2)
        tr = nsim.simulate_dar(p, 3, nsim.DarNetworkState([2, 2, 2]), 0.3, rng=RngStream(0))
        c = tr.counters
        # until the first departure nothing can be accepted
        if c["departures"] == 0:
            assert c["rejected"] == c["arrivals"]
        first = nsim.simulate_dar(p, 3, nsim.DarNetworkState([2, 2, 2]), 1e-3, rng=RngStream(0)).counters
        assert first["direct"] == first["rerouted_pairs"] == 0

    @settings(max_examples=25, deadline=None)
    @given(st.integers(3, 30), st.integers(1, 5), st.floats(0.2, 1.5), st.integers(0, 2**31))
    def test_counters_and_occupancy(self, N, C, nu, seed):
        p = DarParams(nu, 2.0, C)
        tr = nsim.simulate_dar(p, N, nsim.empty_dar_state(N), 5.0, rng=RngStream(seed))
        c = tr.counters
        assert c["arrivals"] == c["direct"] + c["rerouted_pairs"] + c["rejected"]
        fin = tr.final_state
        fin.validate(C)
        # two jobs per rerouted pair
        assert fin.occupancy.sum() == c["direct"] + 2 * c["rerouted_pairs"] - c["departures"]

    def test_rejects_small_or_general_a(self):
        with pytest.raises(ValueError):
            nsim.simulate_dar(DarParams(0.5, 2.0, 3), 2, nsim.empty_dar_state(2), 1.0)
        with pytest.raises(ValueError):
            nsim.simulate_dar(DarParams(0.5, 3.0, 3), 5, nsim.empty_dar_state(5), 1.0)


def u_mean_oracle(lam, mu1, mu2, C, N, u0, u1, t):
    """Mean of u0 at time t by the forward equations of the 2-D birth-death chain."""
    sparse = pytest.importorskip("scipy.sparse")
    spla = pytest.importorskip("scipy.sparse.linalg")
    states = [(a, b) for a in range(N + 1) for b in range(N + 1 - a)]
    idx = {s: k for k, s in enumerate(states)}
    rows, cols, vals = [], [], []
    for (a, b), k in idx.items():
        moves = [
            ((a - 1, b + 1), lam * a),
            ((a - 1, b), lam * (N - a) if a > 0 else 0.0),
            ((a + 1, b - 1), mu1 * b),
            ((a + 1, b), mu2 * (C * N - a - b) if a + b < N else 0.0),
        ]
        for s, r in moves:
            if r > 0 and s in idx:
                rows += [k, k]
                cols += [idx[s], k]
                vals += [r, -r]
    Q = sparse.csr_matrix((vals, (rows, cols)), shape=(len(states),) * 2)
    p = np.zeros(len(states))
    p[idx[(u0, u1)]] = 1.0
    pt = spla.expm_multiply(Q.T * t, p)
    return float(pt @ np.array([a for a, _ in states]))


class TestU:
    def test_boundary_start(self):
        path = nsim.simulate_u(P, 10, nsim.UState(4, 6), 1.0, RngStream(0))
        assert path.hit_time == 0.0

    def test_no_arrivals_monotone(self):
        q = SimpleNamespace(lam=0.0, mu1=1.0, mu2=0.2, C=3)
        path = nsim.simulate_u(q, 20, nsim.UState(2, 5), 10.0, RngStream(1))
        assert np.all(np.diff(path.u0) >= 0)
        assert np.all(path.u0 + path.u1 <= 20)

    def test_stays_in_domain(self):
        path = nsim.simulate_u(P, 15, nsim.UState(5, 5), 30.0, RngStream(2))
        assert np.all(path.u0 >= 0) and np.all(path.u1 >= 0)
        assert np.all(path.u0 + path.u1 <= 15) and np.all(path.u2 >= 0)

    def test_invalid_init(self):
        with pytest.raises(ValueError):
            nsim.simulate_u(P, 5, nsim.UState(4, 3), 1.0)

    def test_mean_matches_forward_equations(self):
        N, runs = 50, 500
        want = u_mean_oracle(2.0, 1.0, 0.2, 3, N, 20, 10, 1.0)
        root = RngStream(7)
        vals = np.array(
            [nsim.simulate_u(P, N, nsim.UState(20, 10), 1.0, root.child(k), dt=1.0).u0[-1] for k in range(runs)]
        )
        se = vals.std(ddof=1) / math.sqrt(runs)
        assert abs(vals.mean() - want) < 3 * se


class TestCoupling:
    def test_shared_start(self):
        init = nsim.empty_rist_state(20)
        init.y[:] = 3
        init.y[:5] = 1
        rep = nsim.simulate_coupled(P, 20, init, 0.0, RngStream(0))
        t, u0, u1, u2, z0, z1, z2, ok = rep.rows[0]
        assert ok and (u0, u1, u2) == (z0, z1, z2)

    def test_no_violations(self):
        for seed in range(20):
            init = nsim.saturated_rist_state(60, 3, 0.3, RngStream(seed))
            rep = nsim.simulate_coupled(P, 60, init, 20.0, RngStream(seed, 1))
            assert rep.ok, f"seed {seed} violated at t={rep.violation_time}"
            assert rep.branch_counts["2c_iii"] == 0

    def test_stops_at_crossing(self):
        init = nsim.saturated_rist_state(10, 3, 0.5, RngStream(4))
        rep = nsim.simulate_coupled(P, 10, init, 100.0, RngStream(4))
        assert rep.hit_time is not None
        assert rep.rows[-1][0] == rep.hit_time
        assert rep.rows[-1][1] + rep.rows[-1][2] == 10

    def test_rejects_bad_start(self):
        with pytest.raises(ValueError):
            nsim.simulate_coupled(P, 10, nsim.empty_rist_state(10), 1.0)  # z0 = 30 > N
        with pytest.raises(ValueError):
            nsim.simulate_coupled(P.with_p0(2), 10, nsim.empty_rist_state(10), 1.0)

    def test_csv(self, tmp_path):
        init = nsim.saturated_rist_state(20, 3, 0.2, RngStream(0))
        rep = nsim.simulate_coupled(P, 20, init, 2.0, RngStream(1))
        text = rep.to_csv(tmp_path / "c.csv").read_text().splitlines()
        assert text[0] == "t,u0,u1,u2,z0,z1,z2,ok"
        assert len([ln for ln in text if not ln.startswith("#")]) == len(rep.rows) + 1


class TestSaturation:
    def test_near_absorbing(self):
        p = RistParams(2.0, 1.0, 0.01, 3)
        res = nsim.saturation_experiment(p, 100, 0.0, 0.5, 1.0, 0.5, 50, RngStream(1))
        assert res.probability == 1.0

    def test_desaturates_under_light_reroute_load(self):
        p = RistParams(2.0, 1.0, 1.0, 3)  # rho2 = 2 < C
        probs = [nsim.saturation_experiment(p, 100, 0.0, 0.5, T, 0.5, 10, RngStream(2)).probability for T in (0.1, 5.0)]
        assert probs[-1] == 0.0 and probs[0] >= probs[-1]

    def test_same_result_in_parallel(self):
        p = RistParams(2.0, 1.0, 0.2, 3)
        a = nsim.saturation_experiment(p, 50, 0.3, 0.5, 1.0, 0.5, 4, RngStream(3))
        b = nsim.saturation_experiment(p, 50, 0.3, 0.5, 1.0, 0.5, 4, RngStream(3), jobs=2)
        assert a.min_mean_y == b.min_mean_y

    def test_requires_light_class1(self):
        with pytest.raises(ValueError):
            nsim.saturation_experiment(RistParams(4.0, 1.0, 0.2, 3), 10, 0.0, 0.1, 0.1, 0.5, 1, RngStream(0))
