import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from gravdce.coupling import CouplingMatrix, CouplingModel, SectorCoupling, expansion_coefficients, split_parts
from gravdce.geometry import CavityConfig, MetricParams, MirrorMotion, ModeIndex, Sine
from gravdce.modes import ModeSolver
from gravdce.observables import coupling_constant_second_parametric

from conftest import RESONANT_VARPI

PERIOD = 2 * math.pi / RESONANT_VARPI


def model(eps=1e-4, order=1, chi=0.0, gamma=0.0, nz_max=8, method="auto", varpi=RESONANT_VARPI):
    s = ModeSolver(CavityConfig(1.0), MetricParams(chi=chi, gamma=gamma), MirrorMotion(eps, Sine(varpi)), order=order)
    return CouplingModel(s, nz_max, method)


def K(nz, nx=1, ny=1):
    return ModeIndex(nx, ny, nz)


class TestCouplingMatrix:
    def test_static_mirror(self):
        m = model(eps=0.0)
        assert not np.any(m.coupling_matrix((1, 1), 0.3).G)
        assert m.coupling_G(K(1), K(2), 0.3) == 0.0

    @given(st.floats(0.0, 3.0))
    @settings(max_examples=20, deadline=None)
    def test_split_identities(self, t):
        for m in (model(1e-3), model(1e-3, order=2, gamma=1e-2)):
            cm = m.coupling_matrix((1, 1), t)
            assert_allclose(cm.sym + cm.antisym, cm.G, atol=1e-12)
            assert_allclose(cm.sym, cm.sym.T, atol=1e-12)
            assert_allclose(cm.antisym, -cm.antisym.T, atol=1e-12)
            assert np.all(np.diag(cm.antisym) == 0)

    def test_from_G(self):
        G = np.arange(9.0).reshape(3, 3)
        cm = CouplingMatrix.from_G(0.0, range(3), G)
        assert_allclose(cm.sym, split_parts(G)[0])

    def test_transverse_selection(self):
        assert model(1e-3).coupling_G(K(1, 1, 1), K(1, 1, 2), 0.2) == 0.0

    def test_closed_form_and_quadrature_H_agree(self):
        s = ModeSolver(CavityConfig(1.0), MetricParams(chi=1e-3), MirrorMotion(1e-3, Sine(3.0)))
        closed = SectorCoupling(s, (1, 2), 8, "closed").H(1.0007)
        quad = SectorCoupling(s, (1, 2), 8, "quadrature").H(1.0007)
        assert_allclose(quad, closed, atol=1e-12 * np.max(np.abs(closed)))

    def test_diagonal_is_frequency_drift(self):
        # G_kk = (dw_k/dt) / (2 w_k) for normalised Dirichlet modes
        m = model(1e-3, order=2, gamma=1e-2)
        sc = m.sector((1, 1))
        H = sc.H(1.0)
        assert_allclose(np.diag(H), 0.5 * sc.domega_da(1.0) / sc.omega(1.0), rtol=1e-9)

    @pytest.mark.parametrize("eps", [1e-4, 1e-5])
    def test_quadrature_vs_first_order_reconstruction(self, eps):
        # G_(kk') ~ eps Lambda^(1) exp(-i[w_k + w_k'] t) up to O(eps) relative corrections
        m = model(eps, method="quadrature")
        worst = 0.0
        for t in np.linspace(0.0, PERIOD, 7):
            cm = m.coupling_matrix((1, 1), t)
            for i in range(8):
                for j in range(8):
                    lam, xi = m.lambda_xi_closed_form(K(i + 1), K(j + 1), t)
                    w = [m.solver.omega(K(n + 1), 1.0) for n in (i, j)]
                    rec_sym = (eps * lam * np.exp(-1j * (w[0] + w[1]) * t)).real
                    rec_anti = (eps * xi * np.exp(-1j * (w[0] - w[1]) * t)).real
                    scale = np.max(np.abs(cm.G))
                    worst = max(worst, abs(cm.sym[i, j] - rec_sym) / scale, abs(cm.antisym[i, j] - rec_anti) / scale)
        assert worst <= 3 * eps


class TestPhase:
    def test_static_phase_is_linear(self):
        m = model(eps=0.0)
        w = m.solver.omega(K(2), 1.0)
        assert m.phase_theta(K(2), 2.5) == w * 2.5

    def test_empty_interval(self):
        assert model().phase_theta(K(3), 0.0) == 0.0

    def test_first_order_series(self):
        eps, varpi = 1e-6, RESONANT_VARPI
        m = model(eps, varpi=varpi)
        k = K(2)
        w0 = m.solver.omega(k, 1.0)
        q = k.nz**2 / k.magnitude**2
        for t in (0.3, 1.7, 4.0):
            series = w0 * (t + eps * q * (math.cos(varpi * t) - 1) / varpi)
            assert abs(m.phase_theta(k, t) - series) < 1e-10

    def test_strictly_increasing(self):
        m = model(1e-2)
        values = [m.phase_theta(K(1), t) for t in np.linspace(0.0, 3.0, 13)]
        assert np.all(np.diff(values) > 0)


class TestClosedForm:
    def test_transverse_mismatch(self):
        assert model().lambda_xi_closed_form(K(1, 1, 1), K(1, 2, 1), 0.4) == (0j, 0j)

    def test_fundamental_at_origin(self):
        lam, xi = model().lambda_xi_closed_form(K(1), K(1), 0.0)
        assert lam == pytest.approx(-RESONANT_VARPI / 6)
        assert xi == 0

    def test_requires_sine_order_one(self):
        with pytest.raises(ValueError):
            model(order=2, gamma=1e-2).lambda_xi_closed_form(K(1), K(1), 0.0)

    def test_proportional_to_drive(self):
        m = model()
        w = [m.solver.omega(K(n), 1.0) for n in (2, 5)]
        t1, t2 = 0.11, 0.29
        values = []
        for t in (t1, t2):
            lam, xi = m.lambda_xi_closed_form(K(2), K(5), t)
            values.append((lam * np.exp(-1j * (w[0] + w[1]) * t), xi * np.exp(-1j * (w[0] - w[1]) * t)))
        ratio = math.cos(RESONANT_VARPI * t1) / math.cos(RESONANT_VARPI * t2)
        assert abs(values[0][0] / values[1][0] - ratio) < 1e-8 * abs(ratio)
        assert abs(values[0][1] / values[1][1] - ratio) < 1e-8 * abs(ratio)


class TestNumericExpansion:
    def test_matches_closed_form(self):
        m = model()
        for t in (0.05, 0.21, 0.33):
            lam, xi = m.lambda_xi_numeric_sector((1, 1), t)
            for i in range(8):
                for j in range(8):
                    cl, cx = m.lambda_xi_closed_form(K(i + 1), K(j + 1), t)
                    assert abs(lam[i, j] - cl) <= 1e-6 * abs(cl)
                    if i != j:
                        assert abs(xi[i, j] - cx) <= 1e-6 * abs(cx)

    def test_step_independence(self):
        m = model()
        a = m.lambda_xi_numeric(K(1), K(3), 0.17)
        b = m.lambda_xi_numeric(K(1), K(3), 0.17, base_step=2.0**-9)
        assert abs(a[0] - b[0]) <= 1e-8 * abs(a[0])
        assert abs(a[1] - b[1]) <= 1e-8 * abs(a[1])

    def test_selection_rule(self):
        assert model().lambda_xi_numeric(K(1, 1, 1), K(1, 2, 1), 0.2) == (0j, 0j)

    @pytest.mark.parametrize("order,metric", [(1, dict(chi=1e-3)), (2, dict(chi=1e-3, gamma=1e-2))])
    def test_factored_expansion_matches_numeric(self, order, metric):
        m = model(order=order, nz_max=5, **metric)
        times = np.array([0.1, 0.37])
        ec = expansion_coefficients(m.sector((1, 1)), times, 2)
        for lam_order in (1, 2):
            for n, t in enumerate(times):
                lam, xi = m.lambda_xi_numeric_sector((1, 1), t, lam_order)
                assert_allclose(ec.lam[lam_order - 1][n], lam, atol=1e-8 * np.max(np.abs(lam)))
                assert_allclose(ec.xi[lam_order - 1][n], xi, atol=1e-8 * np.max(np.abs(xi)))

    def test_rwa_keeps_corotating_half(self):
        m = model()
        sc = m.sector((1, 1))
        times = np.linspace(0.0, 5 * PERIOD, 401)
        full = expansion_coefficients(sc, times, 1).lam[0][:, 0, 0]
        rwa = expansion_coefficients(sc, times, 1, rwa=True).lam[0][:, 0, 0]
        # resonant diagonal: RWA term is constant, full term averages to it
        assert_allclose(rwa, rwa[0], rtol=1e-12)
        assert_allclose(np.mean(full[:-1]), rwa[0], rtol=1e-3)


@pytest.mark.parametrize("gamma_a0", [1e-3, 1e-2])
def test_second_order_diagonal_coefficient(gamma_a0):
    # (a0 H_kk)^2 from quadrature modes equals C2_nn to O((gamma a0)^2)
    s = ModeSolver(CavityConfig(1.0), MetricParams(gamma=gamma_a0), order=2)
    H = SectorCoupling(s, (1, 1), 3).H(1.0)
    for nz in (1, 2, 3):
        c2 = coupling_constant_second_parametric(K(nz), gamma_a0)
        assert_allclose(H[nz - 1, nz - 1] ** 2, c2, rtol=10 * gamma_a0**2)
