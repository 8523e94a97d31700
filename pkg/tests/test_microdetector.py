import numpy as np
import pytest

from photocount import (DetectorParams, FieldMode, PlateauUndefinedError,
                        bright_coeff, brightness_vs_wavelength, dark_coeff,
                        dressed_eval, emission_coeff, qjs_table, snr_scan)
from photocount.microdetector import _b_index, _detuning

REF = DetectorParams(lambda0_nm=500.0, g=1e11, b=380.0, nbar_det=1e-11,
                       upsilon=5e5)
RES = FieldMode(500.0)
OFF = FieldMode(1000.0)
FAR = FieldMode(1500.0)

# reduced averaging window keeps the 3-d quadrature cross-check affordable
SMALL = DetectorParams(lambda0_nm=500.0, g=1e11, b=20.0, nbar_det=1e-4,
                       upsilon=50.0)


class TestParams:
    @pytest.mark.parametrize("kw", [dict(lambda0_nm=-1.0), dict(g=0.0),
                                    dict(b=-2.0), dict(nbar_det=-1e-3),
                                    dict(upsilon=0.0)])
    def test_validation(self, kw):
        base = dict(lambda0_nm=500.0, g=1e11, b=10.0, nbar_det=1e-11,
                    upsilon=5e5)
        base.update(kw)
        with pytest.raises(ValueError):
            DetectorParams(**base)

    def test_weak_coupling_guard(self):
        with pytest.raises(ValueError):
            DetectorParams(lambda0_nm=500.0, g=1e14, b=1.0, nbar_det=0.0,
                           upsilon=1e3)
        with pytest.raises(ValueError):
            DetectorParams(lambda0_nm=500.0, g=1e11, b=5000.0, nbar_det=0.0,
                           upsilon=1e3)

    def test_derived(self):
        assert REF.gamma == pytest.approx(3.8e13)
        assert REF.t_avg == pytest.approx(5e5 / 3.8e13)
        assert REF.omega0 == pytest.approx(2 * np.pi * 2.99792458e8 / 500e-9)

    def test_mode_validation(self):
        with pytest.raises(ValueError):
            FieldMode(0.0)


class TestDressed:
    def test_time_zero(self):
        ev = dressed_eval(REF, RES, 3, 0.0)
        assert ev.c == pytest.approx(1.0)
        assert ev.s == pytest.approx(0.0)
        assert ev.chi == pytest.approx(1.0)
        assert ev.b_n ** 2 == pytest.approx(3 + ev.delta ** 2)

    def test_lossless_resonant_rabi(self):
        p = DetectorParams(lambda0_nm=500.0, g=1e11, b=1e-9, nbar_det=0.0,
                           upsilon=5e5)
        t = 3.3e-12
        ev = dressed_eval(p, RES, 1, t)
        assert ev.b_n == pytest.approx(1.0, rel=1e-9)
        assert ev.s == pytest.approx(np.sin(p.g * t), rel=1e-6)

    def test_overdamped_index(self):
        ev = dressed_eval(REF, RES, 1, 0.0)
        assert abs(ev.b_n) == pytest.approx(190.0, abs=1.0)

    def test_branch_flip_invariance(self):
        # C, S and chi are even under B -> -B, so the sqrt branch is moot
        _, delta = _detuning(REF, OFF)
        b_n = _b_index(5, delta)
        for x in (0.3, 1.7, -0.9):
            for bb in (b_n, -b_n):
                c = np.cos(bb * x)
                s = np.sin(bb * x) / bb
                assert c == pytest.approx(np.cos(b_n * x), rel=1e-12)
                assert s == pytest.approx(np.sin(b_n * x) / b_n, rel=1e-12)


class TestBright:
    def test_decoupled_detector(self):
        p = DetectorParams(lambda0_nm=500.0, g=1e11, b=0.0, nbar_det=1e-11,
                           upsilon=5e5)
        assert bright_coeff(p, RES, 1) == 0.0

    def test_needs_a_photon(self):
        with pytest.raises(ValueError):
            bright_coeff(REF, RES, 0)

    def test_resonant_inverse_n_law(self):
        ratio = bright_coeff(REF, RES, 4) / bright_coeff(REF, RES, 1)
        assert abs(ratio - 0.25) < 0.25 * 0.25

    def test_off_resonant_flat(self):
        ratio = bright_coeff(REF, OFF, 4) / bright_coeff(REF, OFF, 1)
        assert abs(ratio - 1.0) < 0.25

    @pytest.mark.parametrize("mode", [RES, OFF])
    def test_quadrature_agrees(self, mode):
        for n in (1, 4):
            exact = bright_coeff(REF, mode, n)
            quad = bright_coeff(REF, mode, n, method="quadrature")
            assert quad == pytest.approx(exact, rel=1e-7)

    def test_quadrature_step_halving(self):
        q1 = bright_coeff(REF, RES, 2, method="quadrature", refine=1)
        q2 = bright_coeff(REF, RES, 2, method="quadrature", refine=2)
        assert abs(q2 - q1) < 1e-6 * abs(q2)


class TestDark:
    def test_no_reservoir_no_darks(self):
        p = DetectorParams(lambda0_nm=500.0, g=1e11, b=380.0, nbar_det=0.0,
                           upsilon=5e5)
        assert dark_coeff(p, RES, 0) == 0.0

    def test_resonant_suppression(self):
        assert dark_coeff(REF, RES, 1) < dark_coeff(REF, RES, 0)

    def test_off_resonant_flat_in_n(self):
        jd0 = dark_coeff(REF, OFF, 0)
        for n in (1, 5, 20, 50):
            assert dark_coeff(REF, OFF, n) == pytest.approx(jd0, rel=0.10)

    def test_wavelength_independent(self):
        jd_res = dark_coeff(REF, RES, 0)
        assert dark_coeff(REF, FAR, 0) == pytest.approx(jd_res, rel=0.05)
        assert dark_coeff(REF, OFF, 0) == pytest.approx(jd_res, rel=0.05)

    def test_quadrature_agrees_at_resonance(self):
        for n in (0, 1):
            exact = dark_coeff(REF, RES, n)
            quad = dark_coeff(REF, RES, n, method="quadrature")
            assert quad == pytest.approx(exact, rel=1e-6)

    def test_quadrature_step_halving(self):
        q1 = dark_coeff(REF, RES, 0, method="quadrature", refine=1)
        q2 = dark_coeff(REF, RES, 0, method="quadrature", refine=2)
        assert abs(q2 - q1) < 1e-6 * abs(q2)


class TestEmission:
    def test_no_reservoir(self):
        p = DetectorParams(lambda0_nm=500.0, g=1e11, b=380.0, nbar_det=0.0,
                           upsilon=5e5)
        assert emission_coeff(p, RES, 0) == 0.0

    @pytest.mark.parametrize("mode", [RES, OFF])
    @pytest.mark.parametrize("n", [0, 1, 5])
    def test_far_below_darks(self, mode, n):
        assert emission_coeff(REF, mode, n) < 1e-10 * dark_coeff(REF, mode, n)

    def test_reservoir_scaling_quadratic(self):
        doubled = DetectorParams(lambda0_nm=500.0, g=1e11, b=380.0,
                                 nbar_det=2e-11, upsilon=5e5)
        r = emission_coeff(doubled, RES, 2) / emission_coeff(REF, RES, 2)
        assert r == pytest.approx(4.0, rel=1e-5)

    def test_quadrature_agrees_small_window(self):
        exact = emission_coeff(SMALL, RES, 1)
        quad = emission_coeff(SMALL, RES, 1, method="quadrature")
        assert quad == pytest.approx(exact, rel=1e-5)


class TestPositivityAndHierarchy:
    def test_positive(self):
        for b in (5.0, 120.0, 380.0):
            p = DetectorParams(lambda0_nm=500.0, g=1e11, b=b, nbar_det=1e-11,
                               upsilon=5e5)
            for mode in (RES, OFF):
                for n in (0, 1, 3):
                    if n >= 1:
                        assert bright_coeff(p, mode, n) >= 0.0
                    assert dark_coeff(p, mode, n) >= 0.0
                    assert emission_coeff(p, mode, n) >= 0.0

    def test_hierarchy(self):
        # first gap sits at ~7e5 at the reference operating point; the emission
        # gap is the ten-orders one
        for n in range(1, 11):
            jb = bright_coeff(REF, RES, n)
            jd = dark_coeff(REF, RES, n)
            je = emission_coeff(REF, RES, n)
            assert jb / jd > 1e5
            assert jd / je > 1e10


class TestTableAndScans:
    def test_beta_xi_resonance(self):
        table = qjs_table(REF, RES, 40)
        assert abs(table.beta_fit - 0.5) < 0.1
        assert table.xi_fit < 1.0
        assert table.rb == table.jb[1]
        assert table.rd == table.jd[0]
        assert table.snr == pytest.approx(table.rb / table.rd)

    def test_beta_xi_off_resonance(self):
        table = qjs_table(REF, OFF, 40)
        assert abs(table.beta_fit) < 0.1
        assert abs(table.xi_fit - 1.0) < 0.1

    def test_needs_two_points(self):
        with pytest.raises(ValueError):
            qjs_table(REF, RES, 1)

    def test_scan_machinery(self):
        grid = np.geomspace(20.0, 2400.0, 22)
        scan = snr_scan(REF, RES, grid)
        s0 = 1.0 / (2.0 * REF.upsilon * REF.nbar_det)
        assert scan.plateau == pytest.approx(s0, rel=0.01)
        # breakdown = first grid point under half plateau; the underlying
        # half-crossing of S(b) = plateau*(1 - exp(-2 upsilon / b^2)) sits
        # at sqrt(2 upsilon / ln 2)
        bstar = np.sqrt(2.0 * REF.upsilon / np.log(2.0))
        above = grid[grid >= bstar]
        assert scan.b_breakdown == pytest.approx(above[0])

    def test_rates_linear_below_reference_bias(self):
        grid = np.linspace(30.0, 380.0, 8)
        scan = snr_scan(REF, RES, grid)
        for col in (1, 2):
            y = scan.points[:, col]
            fit = np.polyfit(grid, y, 1)
            resid = y - np.polyval(fit, grid)
            r2 = 1.0 - np.sum(resid ** 2) / np.sum((y - y.mean()) ** 2)
            assert r2 > 0.95

    def test_short_grid_rejected(self):
        with pytest.raises(PlateauUndefinedError):
            snr_scan(REF, RES, [100.0])

    def test_unsorted_grid_rejected(self):
        with pytest.raises(ValueError):
            snr_scan(REF, RES, [100.0, 50.0, 200.0, 300.0])

    def test_threads_equivalent(self):
        grid = np.geomspace(50.0, 800.0, 6)
        a = snr_scan(REF, RES, grid, threads=1)
        b = snr_scan(REF, RES, grid, threads=3)
        np.testing.assert_array_equal(a.points, b.points)

    def test_brightness_peak_and_proportionality(self):
        grid = np.linspace(300.0, 2000.0, 35)
        rows = brightness_vs_wavelength(REF, grid)
        peak = rows[np.argmax(rows[:, 1]), 0]
        step = grid[1] - grid[0]
        assert abs(peak - 500.0) <= step
        half = DetectorParams(lambda0_nm=500.0, g=1e11, b=190.0,
                              nbar_det=1e-11, upsilon=5e5)
        rows_half = brightness_vs_wavelength(half, grid)
        ratio = rows[:, 1] / rows_half[:, 1]
        assert np.all(np.abs(ratio - 2.0) < 0.2)
        idx2000 = np.argmin(np.abs(grid - 2000.0))
        assert rows[idx2000, 1] < 0.1 * rows[:, 1].max()
