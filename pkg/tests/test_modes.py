import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from gravdce.errors import AiryBranchError, OutOfRangeError
from gravdce.geometry import CavityConfig, MetricParams, MirrorMotion, ModeIndex, Sine
from gravdce.modes import ModeSolver, inner_product

# Exact quantization roots of xi_vv + v xi = 0 (Airy Ai/Bi cross product),
# a0 = 1, sector (1, 1); computed with mpmath at 40 digits.
AIRY_ROOTS = {
    (1e-2, 0.0): [5.4964933945124212526, 7.7735512710170773603, 10.525453896100303729],
    (1e-3, 0.0): [5.4468462451577110919, 7.7030070410130431934, 10.429920988407980837],
    (1e-2, 1e-3): [5.4853114876113330194],
}


def solver(order=1, chi=0.0, gamma_a0=0.0, motion=None, **kw):
    return ModeSolver(CavityConfig(1.0), MetricParams(chi=chi, gamma=gamma_a0), motion, order=order, **kw)


def gram(s, n=8, t=0.0, sector=(1, 1)):
    funcs = [s.mode_function(ModeIndex(*sector, nz), t) for nz in range(1, n + 1)]
    return np.array([[inner_product(u, w) for w in funcs] for u in funcs])


class TestEigenfrequency:
    def test_flat_fundamental(self):
        assert solver().eigenfrequency(ModeIndex(1, 1, 1), 0.0).value == pytest.approx(math.sqrt(3) * math.pi)

    def test_order2_closed_form_at_zero_gamma(self):
        s = solver()
        k = ModeIndex(1, 2, 3)
        assert s.closed_form_frequency(k, 1.0, 2) == s.closed_form_frequency(k, 1.0, 1)

    def test_order2_closed_form(self):
        s = solver(2, chi=1e-3, gamma_a0=1e-2)
        e = s.eigenfrequency(ModeIndex(1, 1, 1), 0.0)
        # lapse sqrt((1-2chi)/(1+2chi)) agrees with 1 - 2chi to O(chi^2)
        assert_allclose(e.closed_form, (1 - 2e-3 + 1e-2) * math.sqrt(3) * math.pi, rtol=3e-6)
        assert e.value > 0 and e.order == 2

    @pytest.mark.parametrize("key", sorted(AIRY_ROOTS))
    def test_root_matches_exact_airy_quantization(self, key):
        gamma_a0, chi = key
        s = solver(2, chi=chi, gamma_a0=gamma_a0)
        for nz, exact in enumerate(AIRY_ROOTS[key], start=1):
            assert_allclose(s.omega(ModeIndex(1, 1, nz), 1.0), exact, rtol=1e-6)

    def test_leading_asymptotics_are_coarser(self):
        exact = AIRY_ROOTS[(1e-2, 0.0)][0]
        lead = solver(2, gamma_a0=1e-2, airy_terms=1).omega(ModeIndex(1, 1, 1), 1.0)
        full = solver(2, gamma_a0=1e-2).omega(ModeIndex(1, 1, 1), 1.0)
        assert abs(full / exact - 1) < abs(lead / exact - 1) / 50

    @pytest.mark.parametrize("gamma_a0", [1e-3, 1e-2])
    def test_root_vs_closed_form_quadratic(self, gamma_a0):
        s = solver(2, gamma_a0=gamma_a0)
        for nz in (1, 2, 5):
            k = ModeIndex(1, 1, nz)
            rel = abs(s.omega(k, 1.0) / s.closed_form_frequency(k, 1.0, 2) - 1)
            assert rel <= 10 * gamma_a0**2

    def test_domega_da_matches_difference(self):
        for s in (solver(1, chi=1e-3), solver(2, gamma_a0=1e-2)):
            k = ModeIndex(1, 1, 2)
            h = 1e-5
            fd = (s.omega(k, 1 + h) - s.omega(k, 1 - h)) / (2 * h)
            assert_allclose(s.domega_da(k, 1.0), fd, rtol=1e-7)


class TestOrderOneModes:
    def test_boundaries(self):
        s = solver(1, chi=1e-3)
        k = ModeIndex(2, 1, 3)
        edges = [0.0, 1.0]
        for x in edges:
            assert abs(s.mode(x, 0.3, 0.4, k, 0.0)) < 1e-14
            assert abs(s.mode(0.3, x, 0.4, k, 0.0)) < 1e-14
            assert abs(s.mode(0.3, 0.4, x, k, 0.0)) < 1e-14

    @pytest.mark.parametrize("chi", [0.0, 1e-3, 5e-2])
    def test_orthonormal(self, chi):
        assert_allclose(gram(solver(1, chi=chi)), np.eye(8), atol=1e-10)

    def test_flat_normalization_is_sine_normalization(self):
        s = solver()
        assert s.normalization(ModeIndex(1, 1, 1), 2.0) == pytest.approx(1.0)

    def test_transverse_sectors_orthogonal(self):
        s = solver()
        u = s.mode_function(ModeIndex(1, 2, 1), 0.0)
        w = s.mode_function(ModeIndex(2, 1, 1), 0.0)
        assert abs(inner_product(u, w)) < 1e-14

    def test_outside_point_rejected(self):
        with pytest.raises(OutOfRangeError):
            solver().mode(0.5, 0.5, 1.01, ModeIndex(1, 1, 1), 0.0)

    def test_residual(self):
        assert solver(1, chi=1e-3).mode_ode_residual(ModeIndex(1, 1, 2), 0.0) <= 1e-6

    def test_moving_mirror_uses_instantaneous_length(self):
        varpi = 3.0
        s = solver(motion=MirrorMotion(0.1, Sine(varpi)))
        t = math.pi / (2 * varpi)
        assert s.length(t) == pytest.approx(1.1)
        assert abs(s.mode(0.5, 0.5, 1.1, ModeIndex(1, 1, 1), t)) < 1e-14


class TestOrderTwoModes:
    def test_zero_gamma_rejected(self):
        with pytest.raises(AiryBranchError):
            solver(2, gamma_a0=0.0)

    @pytest.mark.parametrize("gamma_a0", [1e-3, 1e-2])
    def test_orthonormal(self, gamma_a0):
        assert np.max(np.abs(gram(solver(2, chi=1e-3, gamma_a0=gamma_a0)) - np.eye(8))) <= 1e-6

    def test_leading_asymptotics_fail_the_orthonormality_bar(self):
        dev = np.max(np.abs(gram(solver(2, gamma_a0=1e-2, airy_terms=1)) - np.eye(8)))
        assert dev > 1e-6

    @pytest.mark.parametrize("nz", [1, 4, 8])
    def test_boundary_values(self, nz):
        s = solver(2, gamma_a0=1e-2)
        k = ModeIndex(1, 1, nz)
        peak = np.max(np.abs(s.profile(np.linspace(0, 1, 2001), k, 1.0)))
        assert s.profile(0.0, k, 1.0) == 0.0
        assert abs(s.profile(1.0, k, 1.0)) <= 1e-10 * peak

    def test_airy_coordinate(self):
        s = solver(2, gamma_a0=1e-2)
        k = ModeIndex(1, 1, 1)
        v = s.airy_coordinate(np.array([0.0, 0.5, 1.0]), k, 0.0)
        assert np.all(np.diff(v) < 0)
        # direct evaluation with the exact root: v(a0) = 8.17, well inside v >> 1
        w = AIRY_ROOTS[(1e-2, 0.0)][0]
        c = (4 * 1e-2 * w**2) ** (1 / 3)
        assert_allclose(v[-1], (w**2 - 2 * math.pi**2) / c**2 - c, rtol=1e-5)
        assert v[-1] > s.v_min

    def test_airy_coordinate_flat_potential_definition(self):
        s = solver(2, gamma_a0=1e-2)
        k = ModeIndex(1, 1, 1)
        w = s.closed_form_frequency(k, 1.0, 2)
        c = (4 * 1e-2 * w**2) ** (1 / 3)
        expected = ((w**2 - 2 * math.pi**2) / c**3 - 0.3) * c
        assert_allclose(s.airy_coordinate_closed_form(0.3, k, 0.0), expected, rtol=1e-13)

    def test_small_v_rejected(self):
        with pytest.raises(AiryBranchError):
            solver(2, gamma_a0=1e-2, v_min=1e6).omega(ModeIndex(1, 1, 1), 1.0)

    def test_converges_to_order_one(self):
        z = np.linspace(0.05, 0.95, 19)
        k = ModeIndex(1, 1, 2)
        ref = solver(1).profile(z, k, 1.0)
        errs = []
        for g in (1e-3, 1e-4):
            err = np.max(np.abs(solver(2, gamma_a0=g).profile(z, k, 1.0) - ref)) / np.max(np.abs(ref))
            assert err <= 10 * g
            errs.append(err)
        assert 5 < errs[0] / errs[1] < 20  # first order in gamma a0

    def test_profile_da_matches_difference(self):
        s = solver(2, gamma_a0=1e-2)
        k = ModeIndex(1, 1, 3)
        z = np.linspace(0.0, 0.9, 7)
        h = 1e-5
        fd = (s.profile(z, k, 1 + h) - s.profile(z, k, 1 - h)) / (2 * h)
        assert_allclose(s.profile_da(z, k, 1.0), fd, atol=1e-7)

    def test_residual_scales_with_gamma_squared(self):
        k = ModeIndex(1, 1, 1)
        r2 = solver(2, gamma_a0=1e-2).mode_ode_residual(k, 0.0)
        r3 = solver(2, gamma_a0=1e-3).mode_ode_residual(k, 0.0)
        assert 50 < r2 / r3 < 200


@given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 12))
@settings(max_examples=20, deadline=None)
def test_inner_product_symmetric(nx, ny, nz):
    s = solver(1, chi=1e-3)
    u = s.mode_function(ModeIndex(nx, ny, nz), 0.0)
    w = s.mode_function(ModeIndex(nx, ny, 1 + nz % 5), 0.0)
    assert inner_product(u, w) == pytest.approx(inner_product(w, u), abs=1e-15)
