import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from floquet4.errors import ClampError, PreconditionError
from floquet4.reference import (SpectralPoint, check_clamp, free_discriminants,
                                free_monodromy, free_phi_array, free_solutions,
                                free_spectrum_labels, quarter_root)

lams = st.complex_numbers(max_magnitude=1e5, allow_nan=False, allow_infinity=False)


class TestQuarterRoot:
    def test_negative_axis(self):
        z = quarter_root(-16.0)
        assert z == pytest.approx(math.sqrt(2) * (1 + 1j))

    def test_positive_axis(self):
        assert quarter_root(81.0) == pytest.approx(3.0)

    @settings(max_examples=50)
    @given(lams)
    def test_inverse_and_sector(self, lam):
        z = quarter_root(lam)
        assert abs(z ** 4 - lam) <= 1e-12 * max(1.0, abs(lam))
        if lam != 0:
            assert -math.pi / 4 < cmath.phase(z) <= math.pi / 4 + 1e-15

    def test_z1(self):
        assert SpectralPoint.of(0.01).z1 == 1.0


class TestFreeSolutions:
    def test_initial_conditions(self):
        pt = SpectralPoint.of(3.0 + 2j)
        M0 = np.array([[free_solutions(pt, 0.0, j - k) for j in range(4)] for k in range(4)])
        assert np.allclose(M0, np.eye(4))

    @settings(max_examples=30)
    @given(st.complex_numbers(max_magnitude=1e4, allow_nan=False, allow_infinity=False))
    def test_ode(self, lam):
        # φ'''' = λφ with φ_j^{(k)} = φ_{j-k}
        pt = SpectralPoint.of(lam)
        for j in range(1, 4):
            assert free_solutions(pt, 0.7, j - 4) == pytest.approx(lam * free_solutions(pt, 0.7, j),
                                                                 rel=1e-12, abs=1e-300)

    def test_series_matches_closed_form(self):
        pt = SpectralPoint.of(1e-6)
        t = np.array([0.5, 1.0])
        for j in range(4):
            a = free_phi_array(pt, t, j)
            b = [free_solutions(pt, float(x), j) for x in t]
            assert np.allclose(a, b, rtol=1e-13)

    def test_bad_index(self):
        with pytest.raises(PreconditionError):
            free_solutions(SpectralPoint.of(1.0), 0.5, 5)


class TestFreeDiscriminants:
    @settings(max_examples=40)
    @given(lams)
    def test_product_forms(self, lam):
        pt = SpectralPoint.of(lam)
        f = free_discriminants(pt)
        s = max(1.0, abs(f.T2))
        assert abs(f.rho - ((f.T2 + 1) / 2 - f.T1 ** 2)) <= 1e-12 * s
        assert abs(f.Dplus - (f.T - 4 * f.T1 + 1) / 2) <= 1e-12 * s

    def test_monodromy_traces(self):
        pt = SpectralPoint.of(-200.0 + 50j)
        M = free_monodromy(pt)
        f = free_discriminants(pt)
        assert np.trace(M) / 4 == pytest.approx(f.T1, rel=1e-13)
        assert np.linalg.det(M) == pytest.approx(1.0, abs=1e-10)

    def test_branches_at_81(self):
        # z = 3: Δ₁ = cosh 3, Δ₂ = cos 3
        f = free_discriminants(SpectralPoint.of(81.0))
        assert f.Delta1.real == pytest.approx(math.cosh(3.0), rel=1e-14)
        assert f.Delta2.real == pytest.approx(math.cos(3.0), rel=1e-13)

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_zeros(self, n):
        f = free_discriminants(SpectralPoint.of((2 * math.pi * n) ** 4))
        assert abs(f.Dplus) < 1e-20
        g = free_discriminants(SpectralPoint.of((math.pi * (2 * n - 1)) ** 4))
        assert abs(g.Dminus) < 1e-20
        h = free_discriminants(SpectralPoint.of(-4 * (math.pi * n) ** 4))
        assert abs(h.rho) < 1e-20


class TestLabels:
    def test_free_labels(self):
        per, anti, res = free_spectrum_labels(2)
        assert [z.labels for z in per][:2] == [((0, "+"),), ((2, "-"), (2, "+"))]
        assert anti[0].value == pytest.approx(math.pi ** 4)
        assert res[1].value == pytest.approx(-4 * math.pi ** 4)
        assert sum(z.multiplicity for z in per) == 5

    def test_bad_N(self):
        with pytest.raises(PreconditionError):
            free_spectrum_labels(0)


class TestClamp:
    def test_clamp(self):
        with pytest.raises(ClampError):
            check_clamp(SpectralPoint.of(26.0 ** 4))
        check_clamp(SpectralPoint.of(-(30.0 ** 4)))  # x = 30/√2 stays below the clamp
