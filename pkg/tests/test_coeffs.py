import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from floquet4.coeffs import (CoefficientSet, amplitude_A, coeffs_from_sequences, eval_coeffs,
                             fourier_p0, fourier_p_n, fourier_pprime_n, fourier_q_n,
                             load_coeffs, perturbation_moments, preset, primitive,
                             random_coeffs)
from floquet4.errors import InputError, PreconditionError

finite = st.floats(min_value=-3, max_value=3, allow_nan=False, allow_infinity=False)
modes = st.lists(finite, min_size=0, max_size=3)


class TestPresets:
    def test_zero(self):
        c = preset("zero")
        assert c.is_zero
        assert c.kappa == 0.0

    def test_cos1(self):
        c = preset("cos1")
        assert c.p_cos == (1.0,)
        assert c.q_is_zero
        assert eval_coeffs(c, 0.0) == (1.0, 0.0, 0.0)

    def test_unknown_preset(self):
        with pytest.raises(InputError):
            preset("nope")


class TestFourier:
    def test_cos1_modes(self):
        c = preset("cos1")
        assert fourier_p0(c) == 0.0
        assert fourier_p_n(c, 1) == pytest.approx(0.5)
        assert fourier_p_n(c, -1) == pytest.approx(0.5)
        # p' = -2π sin 2πt, whose first mode is iπ
        assert abs(fourier_pprime_n(c, 1)) == pytest.approx(math.pi, rel=1e-14)
        assert fourier_pprime_n(c, 2) == 0

    def test_sin_mode(self):
        c = CoefficientSet(p_sin=[2.0], q_const=0.7)
        assert fourier_p_n(c, 1) == pytest.approx(-1j)
        assert fourier_q_n(c, 0) == pytest.approx(0.7)

    def test_kappa_cos1(self):
        # ∫|cos 2πt| = 2/π and ∫|2π sin 2πt| = 4
        assert preset("cos1").kappa == pytest.approx(4 + 2 / math.pi, rel=1e-8)

    @settings(max_examples=30, deadline=None)
    @given(modes, modes, finite)
    def test_modes_match_quadrature(self, pc, ps, p0):
        c = CoefficientSet(p0, pc, ps)
        t = np.arange(64) / 64
        for n in range(0, 4):
            want = np.mean(c.p(t) * np.exp(-2j * np.pi * n * t))
            assert abs(fourier_p_n(c, n) - want) < 1e-12


class TestMomentsAndAmplitude:
    def test_cos1_moments(self):
        # [DERIVED] mpmath double quadrature: v1 = -1/(8π²), v2 = -1/(2π²)
        v1, v2 = perturbation_moments(preset("cos1"))
        assert v1 == pytest.approx(-1 / (8 * math.pi ** 2), rel=1e-9)
        assert v2 == pytest.approx(-1 / (2 * math.pi ** 2), rel=1e-9)
        assert abs(4 * v1 - v2) < 1e-12

    def test_cos1_amplitude(self):
        a = amplitude_A(preset("cos1"))
        assert a.value == pytest.approx(1 / (8 * math.pi ** 2), rel=1e-9)
        assert a.via_moments == pytest.approx(a.via_correlation, rel=1e-8)
        assert not a.degenerate

    def test_amplitude_quadratic_in_scale(self):
        a1 = amplitude_A(CoefficientSet(p_sin=[1.0])).value
        a2 = amplitude_A(CoefficientSet(p_sin=[0.5])).value
        assert a2 == pytest.approx(a1 / 4, rel=1e-9)

    def test_amplitude_needs_zero_mean(self):
        with pytest.raises(PreconditionError):
            amplitude_A(CoefficientSet(p_const=1.0, p_cos=[1.0]))

    def test_zero_p_is_degenerate(self):
        assert amplitude_A(CoefficientSet(q_const=1.0)).degenerate

    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 2 ** 31))
    def test_three_routes_agree(self, seed):
        c = random_coeffs(np.random.default_rng(seed), kmax=2, with_q=False, zero_mean_p=True)
        a = amplitude_A(c)
        assert a.value >= 0
        assert a.via_moments == pytest.approx(a.via_primitive, rel=1e-7, abs=1e-14)

    def test_primitive(self):
        assert primitive(preset("cos1"), np.array([0.25]))[0] == pytest.approx(1 / (2 * math.pi))


class TestTransforms:
    @settings(max_examples=30, deadline=None)
    @given(modes, modes, st.floats(0, 1))
    def test_shift(self, pc, ps, t0):
        c = CoefficientSet(0.3, pc, ps, 0.1, ps, pc)
        s = c.shifted(t0)
        t = np.linspace(0, 1, 9)
        assert np.allclose(s.p(t), c.p(t + t0), atol=1e-12)
        assert np.allclose(s.q(t), c.q(t + t0), atol=1e-12)

    def test_scale(self):
        c = preset("cos1").scaled(0.25)
        assert c.p_cos == (0.25,)

    def test_sequences(self):
        c = coeffs_from_sequences([1.0, 2.0, 3.0], [0.5])
        assert (c.p_const, c.p_cos, c.p_sin, c.q_const) == (1.0, (2.0,), (3.0,), 0.5)


class TestSerialization:
    @settings(max_examples=30, deadline=None)
    @given(finite, modes, modes, finite, modes)
    def test_roundtrip(self, p0, pc, ps, q0, qc):
        c = CoefficientSet(p0, pc, ps, q0, qc)
        back = CoefficientSet.from_dict(json.loads(json.dumps(c.to_dict())))
        assert back == c
        assert back.digest() == c.digest()

    def test_load(self, tmp_path):
        f = tmp_path / "c.json"
        f.write_text(json.dumps({"p": {"cos": [1.0]}}))
        assert load_coeffs(str(f)) == preset("cos1")

    @pytest.mark.parametrize("payload", ['{"p": {"cos": [1, "x"]}}', '{"r": {}}', '[1, 2]',
                                         '{"p": {"amp": 1}}', "not json"])
    def test_bad_files(self, tmp_path, payload):
        f = tmp_path / "c.json"
        f.write_text(payload)
        with pytest.raises(InputError):
            load_coeffs(str(f))

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError):
            load_coeffs(str(tmp_path / "none.json"))

    def test_non_finite(self):
        with pytest.raises(InputError):
            CoefficientSet(p_cos=[float("nan")])
