import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reroute_mf import equilibria as eq
from reroute_mf.core import DarParams, RistParams

# ----------------------------------------------------------------------------
# naive oracles (plain floating point, no log-space tricks)
# ----------------------------------------------------------------------------


def naive_G(z, rho1, rho2, C):
    w = rho1 + rho2 * z
    return z * sum(math.factorial(C) / math.factorial(m) * w ** (-(C - m)) for m in range(C))


def naive_psi_dar(z, nu, a, C):
    g = nu * (1 + a * z * (1 - z))
    total, term = 0.0, 1.0
    for k in range(C + 1):
        total += term / g**k
        term *= 1 - k / C
    return 1 - z * total


def erlang_b(load, C):
    b = 1.0
    for k in range(1, C + 1):
        b = load * b / (k + load * b)
    return b


def sign_changes(f, grid):
    v = f(grid)
    idx = np.flatnonzero(np.sign(v[:-1]) * np.sign(v[1:]) < 0)
    return grid[idx], grid[idx + 1]


# ----------------------------------------------------------------------------
# RIST, unbounded retrials
# ----------------------------------------------------------------------------


class TestPhi:
    def test_c1_closed_form(self):
        rho1, rho2 = 0.3, 0.6
        z = rho1 / (1 - rho2)
        assert abs(eq.phi_normalized(z, rho1, rho2, 1)) < 1e-14
        (root,) = eq.rist_equilibria(rho1, rho2, 1).roots
        assert root.z == pytest.approx(z, rel=1e-10)

    def test_c2_quadratic_roots(self):
        want = np.sort(np.roots([3.0, -1.2, 0.04]).real)
        rep = eq.rist_equilibria(0.2, 3.0, 2)
        np.testing.assert_allclose(rep.zs, want, rtol=1e-10)
        assert rep.zs == pytest.approx([0.0367007, 0.3632993], abs=1e-7)
        for z in want:
            lo, hi = eq.phi_sign(z * 0.99, 0.2, 3.0, 2)[0], eq.phi_sign(z * 1.01, 0.2, 3.0, 2)[0]
            assert lo != hi

    def test_positive_near_zero(self):
        assert eq.phi_sign(1e-200, 1.0, 5.0, 4)[0] == 1

    def test_rejects_nonpositive_z(self):
        with pytest.raises(ValueError):
            eq.phi_normalized(0.0, 1, 2, 3)

    @settings(max_examples=80, deadline=None)
    @given(st.integers(1, 30), st.floats(0.05, 20), st.floats(0.05, 40), st.floats(1e-3, 50))
    def test_log_domain_matches_naive(self, C, rho1, rho2, z):
        naive = 1 - naive_G(z, rho1, rho2, C)
        got = eq.phi_normalized(z, rho1, rho2, C)
        assert got == pytest.approx(naive, rel=1e-9, abs=1e-12)

    def test_large_capacity_is_finite(self):
        v = eq.phi_normalized(np.array([1e-3, 1.0, 1e3]), 5000.0, 20000.0, 10000)
        assert np.all(np.isfinite(v))


class TestRistEquilibria:
    def test_two_roots_below_threshold(self):
        rep = eq.rist_equilibria(0.2, 3.0, 2)
        assert len(rep.roots) == 2 and rep.singular_saturation
        assert rep.regime == "Overloaded"

    def test_no_roots_above_threshold(self):
        rep = eq.rist_equilibria(1.0, 3.0, 2)
        assert rep.roots == [] and rep.singular_saturation

    def test_underloaded_unique_and_increasing(self):
        zs = []
        for rho2 in np.linspace(0.5, 2.9, 13):
            rep = eq.rist_equilibria(1.0, rho2, 3)
            assert len(rep.roots) == 1 and not rep.singular_saturation
            zs.append(rep.roots[0].z)
        assert np.all(np.diff(zs) > 0)

    def test_critical_cases(self):
        assert len(eq.rist_equilibria(1.0, 3.0, 3).roots) == 1
        assert eq.rist_equilibria(2.0, 3.0, 3).roots == []
        assert eq.rist_equilibria(1.0, 3.0, 3).regime == "Critical"

    def test_rejects_rho1_at_capacity(self):
        with pytest.raises(ValueError):
            eq.rist_equilibria(3.0, 4.0, 3)

    @pytest.mark.parametrize("rho1,rho2,C", [(1.0, 2.0, 3), (0.2, 3.0, 2), (0.5, 8.0, 4), (2.0, 4.5, 5)])
    def test_blocking_identity(self, rho1, rho2, C):
        for r in eq.rist_equilibria(rho1, rho2, C).roots:
            pi = eq.rist_pi(r.value, (rho1, rho2), C)
            assert abs(pi.mass_saturated() - r.value) < 1e-10
            assert r.residual < 1e-10

    @pytest.mark.parametrize("rho1,rho2,C", [(1.0, 2.0, 3), (0.2, 3.0, 2), (0.1, 6.0, 3), (1.5, 9.0, 5), (0.3, 4.0, 4)])
    def test_grid_oracle(self, rho1, rho2, C):
        # uniform scan in R = z / (1 + z) over (0, 1)
        R = np.linspace(1e-7, 1 - 1e-7, 10**6)
        z = R / (1 - R)
        lo, hi = sign_changes(lambda zz: 1 - naive_G(zz, rho1, rho2, C), z)
        got = eq.rist_equilibria(rho1, rho2, C).zs
        assert len(got) == len(lo)
        for g, a, b in zip(got, lo, hi):
            assert a <= g <= b

    @pytest.mark.parametrize("C,rho2", [(2, 2.5), (2, 4.0), (3, 4.0), (3, 6.0), (4, 7.0)])
    def test_count_follows_threshold(self, C, rho2):
        phi = eq.phi_c(rho2, C)
        for rho1, n in ((phi * 0.9, 2), (phi * 1.1 + 1e-3, 0)):
            if rho1 < C:
                assert len(eq.rist_equilibria(rho1, rho2, C).roots) == n


class TestPhiC:
    @pytest.mark.parametrize("rho2", [2.5, 3.0, 5.0, 10.0])
    def test_c2_closed_form(self, rho2):
        assert eq.phi_c(rho2, 2) == pytest.approx(eq.phi2_closed_form(rho2), abs=1e-8)

    def test_c2_rho2_3(self):
        assert eq.phi_c(3.0, 2) == pytest.approx(2 - math.sqrt(3), abs=1e-8)

    def test_c3_discriminant(self):
        assert eq.phi_c(4.0, 3) == pytest.approx(eq.phi3_from_discriminant(4.0), abs=1e-6)
        assert eq.phi_c(4.0, 3) == pytest.approx(0.93691792, abs=1e-7)

    def test_rejects_underloaded(self):
        with pytest.raises(ValueError):
            eq.phi_c(2.0, 3)


# ----------------------------------------------------------------------------
# RIST, one retrial
# ----------------------------------------------------------------------------


class TestRist1:
    def test_three_roots_large_capacity(self):
        rep = eq.rist1_equilibria(1.0, 2000.0, 400)
        S = rep.values
        assert len(S) == 3
        assert S[0] < 0.01
        surd = [(1 - math.sqrt(0.2)) / 2, (1 + math.sqrt(0.2)) / 2]
        assert S[1] == pytest.approx(surd[0], abs=0.02)
        assert S[2] == pytest.approx(surd[1], abs=0.02)
        assert S[1:] == pytest.approx([0.27270, 0.72434], abs=1e-4)

    def test_light_rerouting_single_root(self):
        g = np.linspace(1e-6, 1 - 1e-6, 10**4)
        naive = lambda s: np.array([x * sum(math.factorial(5) / math.factorial(5 - k) * (0.5 + 0.1 * x) ** -k
                                            for k in range(6)) - 1 for x in s])
        lo, _ = sign_changes(naive, g)
        rep = eq.rist1_equilibria(0.5, 0.1, 5)
        assert len(rep.roots) == len(lo) == 1

    @pytest.mark.parametrize("rho1,rho2,C", [(1.0, 2.0, 3), (2.0, 50.0, 10), (1.0, 2000.0, 400)])
    def test_residuals(self, rho1, rho2, C):
        for r in eq.rist1_equilibria(rho1, rho2, C).roots:
            if r.z > 0:
                assert abs(eq.psi_rist1(r.z, rho1, rho2, C)) < 1e-10

    def test_cubic_roots_are_critical_points(self):
        rho1, rho2, C = 1.0, 50.0, 10
        for w in eq.rist1_cubic_roots(rho1, rho2, C):
            f = w**3 - (2 * rho1 + rho2) * w**2 + (rho1**2 + rho1 * rho2 + rho2 * (C - 1)) * w - C * rho1 * rho2
            assert abs(f) < 1e-8 * max(1.0, w**3)


# ----------------------------------------------------------------------------
# DAR
# ----------------------------------------------------------------------------


class TestPsiDar:
    def test_near_zero(self):
        assert eq.psi_dar(1e-15, 0.9, 2.0, 50) == pytest.approx(1.0, abs=1e-12)

    def test_large_c_limit(self):
        nu, a, z = 1.2, 2.0, 0.3
        g = nu * (1 + a * z * (1 - z))
        assert eq.psi_dar(z, nu, a, 10**4) == pytest.approx(1 - z / (1 - 1 / g), abs=1e-3)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 200), st.floats(0.05, 0.95), st.floats(0.3, 2.0))
    def test_decreasing_in_capacity(self, C, z, nu):
        assert eq.psi_dar(z, nu, 2.0, C + 1) <= eq.psi_dar(z, nu, 2.0, C) + 1e-12

    @settings(max_examples=80, deadline=None)
    @given(st.integers(1, 30), st.floats(0.01, 0.99), st.floats(0.2, 3.0), st.floats(1.01, 6.0))
    def test_log_domain_matches_naive(self, C, z, nu, a):
        assert eq.psi_dar(z, nu, a, C) == pytest.approx(naive_psi_dar(z, nu, a, C), rel=1e-9, abs=1e-12)

    def test_rejects_outside_unit_interval(self):
        with pytest.raises(ValueError):
            eq.psi_dar(1.0, 1.0, 2.0, 5)


class TestDarFixedPoints:
    def test_light_load(self):
        r100 = eq.dar_fixed_points(0.5, 2.0, 100).roots
        r200 = eq.dar_fixed_points(0.5, 2.0, 200).roots
        assert len(r100) == 1 and r100[0].value < 1e-3
        assert r200[0].value < r100[0].value
        assert r100[0].label == "light"

    @pytest.mark.parametrize("C", [50, 100, 200])
    def test_overload_unique(self, C):
        rep = eq.dar_fixed_points(1.2, 2.0, C)
        assert len(rep.roots) == 1 and rep.roots[0].label == "saturated"

    def test_overload_converges_to_cubic(self):
        cubic = eq.dar_limit_fixed_points(1.2, 2.0).roots[0].value
        assert eq.dar_fixed_points(1.2, 2.0, 200).roots[0].value == pytest.approx(cubic, abs=0.02)

    def test_three_roots_at_large_capacity(self):
        rep = eq.dar_fixed_points(0.97, 2.0, 3000)
        assert rep.values == pytest.approx([0.0036062, 0.0208024, 0.2521221], abs=1e-6)

    @pytest.mark.parametrize("nu,C", [(0.5, 100), (0.94, 600), (0.97, 1000), (1.2, 50), (0.97, 3000)])
    def test_erlang_b_oracle(self, nu, C):
        p = DarParams(nu, 2.0, C)
        for r in eq.dar_fixed_points(nu, 2.0, C).roots:
            assert erlang_b(p.lam * p.h(r.value), C) == pytest.approx(r.value, rel=1e-9)

    @pytest.mark.parametrize("nu,C", [(0.9, 3), (1.1, 5), (0.97, 4)])
    def test_grid_oracle_small(self, nu, C):
        g = np.linspace(1e-9, 1 - 1e-9, 10**6)
        lo, hi = sign_changes(lambda z: np.array(eq.psi_dar(z, nu, 2.0, C)), g)
        got = eq.dar_fixed_points(nu, 2.0, C).values
        assert len(got) == len(lo)


class TestDarLimit:
    def test_nu_a(self):
        assert eq.dar_limit_nu_a(2.0) == pytest.approx(0.9371, abs=5e-4)
        assert 1 - eq.dar_limit_nu_a(2.0) == pytest.approx(0.063, abs=1e-3)

    def test_x0(self):
        assert eq.dar_limit_x0(2.0) == pytest.approx((2 - math.sqrt(2.5)) / 3)
        assert eq.dar_limit_x0(2.0) == pytest.approx(0.13962, abs=1e-5)

    def test_printed_closed_form_disagrees(self):
        assert eq.dar_limit_nu_a_printed(2.0) == pytest.approx(0.44677, abs=1e-4)
        assert eq.dar_limit_nu_a_printed(2.0, 2 / 9) == pytest.approx(eq.dar_limit_nu_a(2.0), rel=1e-12)

    @pytest.mark.parametrize("a", [1.5, 2.0, 5.0, 10.0])
    def test_nu_a_is_a_maximum(self, a):
        z = np.linspace(0, 1, 200001)
        assert 1 / np.max((1 - z) * (1 + a * z * (1 - z))) == pytest.approx(eq.dar_limit_nu_a(a), rel=1e-9)

    def test_cubic_single_root(self):
        (r,) = eq.dar_limit_fixed_points(1.2, 2.0).roots
        real = [x.real for x in np.roots([2, -4, 1, 1 - 1 / 1.2]) if abs(x.imag) < 1e-12 and 0 < x.real < 1]
        assert r.value == pytest.approx(real[0], abs=1e-10)
        assert r.value == pytest.approx(0.441, abs=1e-3)

    def test_window(self):
        assert len(eq.dar_limit_fixed_points(0.97, 2.0).roots) == 2
        assert eq.dar_limit_fixed_points(0.9, 2.0).roots == []
        assert eq.dar_limit_fixed_points(0.97, 2.0).values == pytest.approx([0.035, 0.250], abs=2e-3)


# ----------------------------------------------------------------------------
# non-linear M/M/1
# ----------------------------------------------------------------------------


class TestNlMm1:
    @pytest.mark.parametrize("a", [2.0, 5.0, 10.0])
    def test_half_at_u_a(self, a):
        rep = eq.nlmm1_fixed_points(8 / (4 + a), a=a)
        assert any(abs(r.value - 0.5) < 1e-12 for r in rep.roots)

    def test_nu_14(self):
        (r,) = eq.nlmm1_fixed_points(1.4, a=2.0).roots
        S = r.value
        assert S == pytest.approx(0.5235, abs=1e-4)
        assert 1.4 * (1 + 2 * S * (1 - S)) == pytest.approx(1 / (1 - S), abs=1e-10)

    def test_constant_h(self):
        (r,) = eq.nlmm1_fixed_points(2.0, h=lambda s: 1.0).roots
        assert r.value == pytest.approx(0.5, abs=1e-12)

    def test_general_h_many_roots(self):
        # h with several bumps produces several fixed points
        h = lambda s: 1.0 / (1.0 - s) * (1.0 + 0.2 * np.sin(12 * s)) / 1.5 if s < 0.99 else 1.0
        rep = eq.nlmm1_fixed_points(1.5, h=lambda s: max(1.0, h(s)))
        assert len(rep.roots) >= 2

    def test_geometric_pi(self):
        pi = eq.nlmm1_pi(0.5, 60)
        assert pi.values[0] == pytest.approx(0.5, abs=1e-12)
        assert eq.nlmm1_required_K(0.5) >= 33
