import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from floquet4 import _kernels
from floquet4.coeffs import CoefficientSet, perturbation_moments, preset, random_coeffs
from floquet4.errors import ClampError, PreconditionError
from floquet4.monodromy import (eta_nu, integrate_batch, integrate_monodromy,
                                picard_series_traces, picard_tail_bound, shift_to_zero,
                                stated_picard_bound, zero_of_p)
from floquet4.reference import SpectralPoint, free_discriminants, free_monodromy


def constant_traces(p0, q0, lam):
    """T₁, T₂ for constant p, q from the roots of μ⁴ + p0 μ² + q0 - λ = 0."""
    disc = cmath.sqrt(p0 * p0 - 4 * (q0 - lam))
    mus = []
    for w in ((-p0 + disc) / 2, (-p0 - disc) / 2):
        r = cmath.sqrt(w)
        mus += [r, -r]
    return (sum(cmath.exp(m) for m in mus) / 4, sum(cmath.exp(2 * m) for m in mus) / 4)


class TestFreeCase:
    @pytest.mark.parametrize("lam", [0.0, 1.0, -389.6, 97.4 + 3j, 5000.0, -8000.0 + 2000j])
    def test_matches_closed_form(self, lam):
        r = integrate_monodromy(preset("zero"), SpectralPoint.of(lam))
        M0 = free_monodromy(SpectralPoint.of(lam))
        assert np.max(np.abs(r.M - M0)) <= 1e-11 * max(1.0, np.max(np.abs(M0)))
        assert r.det_residual < 1e-9

    def test_compound_trace(self):
        lam = -1234.5
        r = integrate_batch(preset("zero"), [lam], want_compound=True)[0]
        f = free_discriminants(SpectralPoint.of(lam))
        assert np.trace(r.compound) / 2 == pytest.approx(f.T, rel=1e-11)


class TestConstantCoefficients:
    @settings(max_examples=25)
    @given(st.floats(-20, 20), st.floats(-20, 20),
           st.complex_numbers(max_magnitude=3e3, allow_nan=False, allow_infinity=False))
    def test_traces(self, p0, q0, lam):
        # [DERIVED] exact exponentials of the constant-coefficient companion matrix
        c = CoefficientSet(p_const=p0, q_const=q0)
        M = integrate_monodromy(c, SpectralPoint.of(lam)).M
        T1, T2 = constant_traces(p0, q0, lam)
        s = max(1.0, abs(T2))
        assert abs(np.trace(M) / 4 - T1) <= 1e-10 * s
        assert abs(np.trace(M @ M) / 4 - T2) <= 1e-10 * s


class TestIntegrator:
    @settings(max_examples=15)
    @given(st.integers(0, 2 ** 31),
           st.complex_numbers(max_magnitude=1e4, allow_nan=False, allow_infinity=False))
    def test_det_one(self, seed, lam):
        c = random_coeffs(np.random.default_rng(seed))
        r = integrate_batch(c, [lam])[0]
        assert r.det_residual < 1e-9 * max(1.0, np.max(np.abs(r.M)))

    def test_backends_agree(self):
        c = CoefficientSet(p_cos=[1.0, 0.5], q_sin=[0.3])
        lams = np.array([-3000.0, -10.0, 50.0, 2000.0 + 500j])
        a = integrate_batch(c, lams, use_numba=False)
        b = integrate_batch(c, lams, use_numba=True)
        for x, y in zip(a, b):
            assert np.max(np.abs(x.M - y.M)) <= 1e-10 * np.max(np.abs(x.M))

    def test_derivative_matches_difference(self):
        c = preset("cos1")
        lam, h = 120.0, 1e-4
        r = integrate_monodromy(c, SpectralPoint.of(lam), want_derivative=True)
        hi = integrate_monodromy(c, SpectralPoint.of(lam + h)).M
        lo = integrate_monodromy(c, SpectralPoint.of(lam - h)).M
        fd = (hi - lo) / (2 * h)
        assert np.max(np.abs(r.dM_dlambda - fd)) <= 1e-6 * np.max(np.abs(fd))

    def test_real_lambda_gives_real_matrix(self):
        r = integrate_monodromy(preset("cos1"), SpectralPoint.of(-77.0))
        assert np.all(r.M.imag == 0)

    def test_error_estimate(self):
        r = integrate_monodromy(preset("cos1"), SpectralPoint.of(500.0))
        assert 0 <= r.err_est < 1e-9

    def test_clamp(self):
        with pytest.raises(ClampError):
            integrate_batch(preset("zero"), [26.0 ** 4])

    def test_layout_sizes(self):
        assert _kernels.layout(False, False)[0] == 4
        assert _kernels.layout(True, True)[0] == 20


class TestPicard:
    @pytest.mark.parametrize("lam", [-800.0, 0.5, 300.0, 400j])
    def test_within_certified_bound(self, lam):
        c = CoefficientSet(p_cos=[0.3], p_sin=[0.2], q_const=0.5, q_cos=[0.4])
        pt = SpectralPoint.of(lam)
        M = integrate_monodromy(c, pt).M
        T1, T2 = np.trace(M) / 4, np.trace(M @ M) / 4
        prev = math.inf
        for N in (3, 4, 5):
            p1, p2, (b1, b2) = picard_series_traces(c, pt, N)
            assert abs(T1 - p1) <= b1
            assert abs(T2 - p2) <= b2
            assert abs(T1 - p1) < prev
            prev = abs(T1 - p1)

    def test_free_case_exact(self):
        pt = SpectralPoint.of(-50.0)
        p1, p2, (b1, b2) = picard_series_traces(preset("zero"), pt, 2)
        f = free_discriminants(pt)
        assert p1 == pytest.approx(f.T1, rel=1e-13)
        assert b1 == 0.0

    def test_tail_below_stated_bound(self):
        pt = SpectralPoint.of(200.0)
        for N in (1, 3, 5):
            assert picard_tail_bound(2.0, pt, 1, N) <= stated_picard_bound(2.0, pt, 1, N)

    def test_bad_N(self):
        with pytest.raises(PreconditionError):
            picard_series_traces(preset("zero"), SpectralPoint.of(1.0), 7)


class TestEta:
    def test_small_lambda_limit(self):
        # p = sin 2πt has p(0) = 0; η_ν(λ) → v_ν as λ → 0
        c = CoefficientSet(p_sin=[1.0])
        v1, v2 = perturbation_moments(c)
        pt = SpectralPoint.of(1e-9)
        assert eta_nu(c, pt, 1).real == pytest.approx(v1, rel=1e-8)
        assert eta_nu(c, pt, 2).real == pytest.approx(v2, rel=1e-8)

    @pytest.mark.parametrize("lam", [-300.0, 40.0, 150j])
    def test_second_order_term(self, lam):
        c = CoefficientSet(p_sin=[1.0])
        eps = 0.05
        ce = c.scaled(eps)
        pt = SpectralPoint.of(lam)
        M = integrate_monodromy(ce, pt).M
        f = free_discriminants(pt)
        k = ce.kappa
        for nu, T, T0 in ((1, np.trace(M) / 4, f.T1), (2, np.trace(M @ M) / 4, f.T2)):
            bound = (nu * k) ** 3 * math.exp(pt.x * nu + k) / (6 * pt.z1 ** 3)
            assert abs(T - T0 - eps ** 2 * eta_nu(c, pt, nu)) <= bound

    def test_zero_of_p(self):
        c = CoefficientSet(p_cos=[1.0])
        t0 = zero_of_p(c)
        assert abs(c.p(t0)) < 1e-14
        s, shift = shift_to_zero(c)
        assert abs(s.p(0.0)) < 1e-14 and shift == t0

    def test_preconditions(self):
        with pytest.raises(PreconditionError):
            eta_nu(CoefficientSet(p_const=1.0), SpectralPoint.of(1.0), 1)
        with pytest.raises(PreconditionError):
            eta_nu(CoefficientSet(p_sin=[1.0], q_const=1.0), SpectralPoint.of(1.0), 1)
        with pytest.raises(PreconditionError):
            eta_nu(CoefficientSet(p_sin=[1.0]), SpectralPoint.of(1.0), 3)
