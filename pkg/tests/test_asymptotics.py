import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from floquet4.asymptotics import (bounded_trend, constant_p_resonance, eigenvalue_asymptote,
                                  eigenvalue_comparisons, fit_zero_mode_coefficient,
                                  in_exclusion_zone, locate_bottom, lyapunov_asymptote_check,
                                  lyapunov_ratios, measured_prefactors, perturbation_predictions,
                                  perturbation_sweep, resonance_asymptote, sweep_slopes)
from floquet4.coeffs import CoefficientSet, preset
from floquet4.errors import PreconditionError
from floquet4.zeros import enumerate_and_label, refine_zero

PI4 = math.pi ** 4
A_COS = 1 / (8 * math.pi ** 2)


@pytest.fixture(scope="module")
def sweep():
    return perturbation_sweep(preset("cos1"), [0.05, 0.1, 0.2])


class TestFormulas:
    def test_resonance_cos1(self):
        rm, rp = resonance_asymptote(preset("cos1"), 1)
        split = math.sqrt(2) * math.pi * math.pi   # |p̂₁'| = π
        assert rm == pytest.approx(-4 * PI4 - split)
        assert rp == pytest.approx(-4 * PI4 + split)

    def test_eigenvalue_cos1(self):
        lm, lp, gap = eigenvalue_asymptote(preset("cos1"), 1)
        assert lm == pytest.approx(PI4 - math.pi ** 2 / 2)
        assert gap == pytest.approx(math.pi ** 2)

    def test_free_exact(self):
        c = preset("zero")
        for n in (1, 2, 3):
            lm, lp, gap = eigenvalue_asymptote(c, n)
            assert lm == lp == (math.pi * n) ** 4 and gap == 0
            assert resonance_asymptote(c, n) == (-4 * (math.pi * n) ** 4,) * 2

    @pytest.mark.parametrize("p0", [2.0, -3.0])
    def test_constant_p_resonance_matches_zero(self, p0):
        c = CoefficientSet(p_const=p0)
        want = constant_p_resonance(p0, 1)
        got = refine_zero("rho", want + 1.0, c)
        assert got.lam.real == pytest.approx(want, rel=1e-9)

    def test_bad_n(self):
        with pytest.raises(PreconditionError):
            resonance_asymptote(preset("cos1"), 0)
        with pytest.raises(PreconditionError):
            eigenvalue_asymptote(preset("cos1"), 0)


class TestFits:
    def test_zero_mode_coefficient(self):
        # constant p shifts the eigenvalue pair by exactly -p0 (πn)²
        c = CoefficientSet(p_const=1.5)
        t = enumerate_and_label(c, 2, which=("Dplus", "Dminus"))
        assert fit_zero_mode_coefficient(t, [1, 2, 3]) == pytest.approx(-1.5, rel=1e-6)

    def test_fit_needs_two_points(self):
        t = enumerate_and_label(preset("zero"), 1, which=("Dplus", "Dminus"))
        with pytest.raises(PreconditionError):
            fit_zero_mode_coefficient(t, [7])

    def test_bounded_trend(self):
        assert bounded_trend([1.0, 2.0, 5.0, 0.5]) == (True, 2.0)
        assert bounded_trend([1.0, 1.0, 3.5])[0] is False

    def test_comparisons_free(self):
        t = enumerate_and_label(preset("zero"), 2, which=("Dplus", "Dminus"))
        cmps = eigenvalue_comparisons(preset("zero"), t, [1, 2, 3])
        assert len(cmps) == 6
        assert max(c.residual for c in cmps) < 1e-8 * (3 * math.pi) ** 4


class TestPredictions:
    def test_zero_eps(self):
        p = perturbation_predictions(preset("cos1"), 0.0)
        assert (p.r0_pred, p.l0_pred, p.gap_pred, p.T1_pred) == (0.0, 0.0, 0.0, 1.0)

    def test_cos1_values(self):
        # 4v₁ - v₂ = 0 for cos 2πt, so neither endpoint moves at order ε²
        p = perturbation_predictions(preset("cos1"), 0.1)
        assert abs(p.l0_pred) < 1e-14
        assert p.gap_pred == pytest.approx(4 * A_COS ** 2 * 1e-4, rel=1e-9)
        assert p.gap_pred == pytest.approx(6.416e-8, rel=1e-3)

    def test_preconditions(self):
        with pytest.raises(PreconditionError):
            perturbation_predictions(CoefficientSet(p_const=1.0, p_cos=[1.0]), 0.1)
        with pytest.raises(PreconditionError):
            perturbation_predictions(CoefficientSet(p_cos=[1.0], q_const=1.0), 0.1)
        with pytest.raises(PreconditionError):
            perturbation_predictions(preset("cos1"), 2.0)

    @settings(max_examples=30)
    @given(st.floats(-1, 1))
    def test_gap_prediction_quartic(self, eps):
        p = perturbation_predictions(preset("cos1"), eps)
        assert p.gap_pred == pytest.approx(4 * A_COS ** 2 * eps ** 4, rel=1e-9, abs=1e-300)


class TestSweep:
    def test_slopes(self, sweep):
        rows, slopes = sweep
        assert all(b.error is None for b, _ in rows)
        assert slopes["gap_slope"] == pytest.approx(4.0, abs=0.1)
        assert slopes["T1_defect_slope"] == pytest.approx(2.0, abs=0.05)

    def test_measured_gaps(self, sweep):
        # [DERIVED] frozen from independent 4x4 monodromy runs at these ε
        rows, _ = sweep
        gaps = [b.gap for b, _ in rows]
        for g, want in zip(gaps, [2.5117e-10, 4.0107e-9, 6.4165e-8]):
            assert g == pytest.approx(want, rel=2e-3)

    def test_prefactor_ratios(self, sweep):
        # [DERIVED] gap/ε⁴ comes out at A²/4 and (1 - T₁)/ε² at A/4: 1/16 and 1/4 of the
        # predicted coefficients (a Hill-reduction series in mpmath gives the same 1/4)
        rows, _ = sweep
        m = measured_prefactors(preset("cos1"), rows)
        assert m["eps"] == 0.05
        assert m["gap_ratio"] == pytest.approx(1 / 16, rel=0.02)
        assert m["T1_ratio"] == pytest.approx(1 / 4, rel=0.01)

    def test_bottom_eigenvalue_is_zero(self, sweep):
        for b, _ in sweep[0]:
            assert abs(b.lambda0_plus) < 1e-11
            assert b.r0_minus < 0

    def test_per_row_errors(self):
        rows, slopes = perturbation_sweep(preset("cos1"), [0.0, 3.0, 0.1])
        assert rows[0][0].gap == 0.0
        assert rows[1][1] is None and "PreconditionError" in rows[1][0].error
        assert rows[2][0].error is None
        assert slopes["gap_slope"] is None   # one usable point

    def test_bad_coefficients_fail_whole_sweep(self):
        with pytest.raises(PreconditionError):
            perturbation_sweep(CoefficientSet(p_const=1.0), [0.1])

    def test_slopes_of_synthetic_rows(self):
        from floquet4.asymptotics import BottomOfSpectrum
        rows = [(BottomOfSpectrum(e, -e ** 4, 0.0, 1 - e ** 2), None) for e in (0.1, 0.2, 0.4)]
        s = sweep_slopes(rows)
        assert s["gap_slope"] == pytest.approx(4.0)
        assert s["T1_defect_slope"] == pytest.approx(2.0)

    def test_locate_bottom_free(self):
        b = locate_bottom(preset("zero"))
        assert abs(b.r0_minus) < 1e-10 and abs(b.lambda0_plus) < 1e-10


class TestLyapunov:
    def test_ratios_bounded(self):
        c = preset("cos1")
        grid = [(-1) ** k * (1.5 + k) ** 4 * 10 for k in range(6)] + [2000 + 3000j]
        grid = [g for g in grid if not in_exclusion_zone(g, True)]
        cmps = lyapunov_asymptote_check(c, grid)
        r = lyapunov_ratios(cmps)
        assert len(r) == 2 * len(grid)
        assert max(r) < 10 * c.kappa

    def test_free_ratios_vanish(self):
        cmps = lyapunov_asymptote_check(preset("zero"), [3000.0, -2500.0 + 100j])
        assert max(lyapunov_ratios(cmps)) < 1e-8

    def test_exclusion_zone(self):
        assert in_exclusion_zone(PI4, True)
        assert not in_exclusion_zone(PI4, False)
        with pytest.raises(PreconditionError):
            lyapunov_asymptote_check(preset("cos1"), [-4 * PI4])
