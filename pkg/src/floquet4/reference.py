"""Closed forms for the free operator d⁴/dt⁴ (p = q = 0).

These serve as oracles for the integrator, as anchors for the asymptotic
formulas and as the reference terms of the perturbation bounds.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import ClampError, PreconditionError

CLAMP_X = 25.0  # reject Re λ^{1/4} beyond this (e^x near overflow of M² traces)
_TAYLOR_CUT = 1e-2
_TAYLOR_TERMS = 8


def quarter_root(lam: complex) -> complex:
    """λ^{1/4} with arg in (-π/4, π/4]; the negative real axis maps to arg π/4."""
    lam = complex(lam)
    if lam == 0:
        return 0j
    arg = math.atan2(lam.imag, lam.real)
    if arg == -math.pi or (lam.imag == 0.0 and lam.real < 0.0):
        arg = math.pi
    return abs(lam) ** 0.25 * cmath.exp(0.25j * arg)


@dataclass(frozen=True)
class SpectralPoint:
    """A spectral parameter with its principal quarter root."""

    lam: complex
    z: complex
    x: float
    y: float
    z1: float

    @classmethod
    def of(cls, lam) -> "SpectralPoint":
        lam = complex(lam)
        z = quarter_root(lam)
        return cls(lam, z, z.real, z.imag, max(1.0, abs(z)))

    @property
    def is_real(self) -> bool:
        return self.lam.imag == 0.0


def check_clamp(pt: SpectralPoint):
    if pt.x > CLAMP_X:
        raise ClampError(
            f"|λ| = {abs(pt.lam):.6g} exceeds the overflow clamp (Re λ^(1/4) = {pt.x:.3f} > {CLAMP_X})")


def _series(lam: complex, w: float, j: int) -> complex:
    """Σ_m λ^m w^{4m+j}/(4m+j)! ; exact expansion of φ_j⁰(w)."""
    total = 0j
    term = w ** j / math.factorial(j)
    for m in range(_TAYLOR_TERMS):
        total += term
        k = 4 * m + j
        term *= lam * w ** 4 / ((k + 1) * (k + 2) * (k + 3) * (k + 4))
    return total


def free_solutions(pt: SpectralPoint, t: float, j: int) -> complex:
    """φ_j⁰(t, λ), j = 0..3; negative j give derivatives via φ_{-m} = λφ_{4-m}."""
    if not -3 <= j <= 3:
        raise PreconditionError("j must lie in -3..3")
    if j < 0:
        return pt.lam * free_solutions(pt, t, j + 4)
    z = pt.z
    if abs(z * t) < _TAYLOR_CUT:
        return _series(pt.lam, t, j)
    zt = z * t
    if j == 0:
        return (cmath.cosh(zt) + cmath.cos(zt)) / 2
    if j == 1:
        return (cmath.sinh(zt) + cmath.sin(zt)) / (2 * z)
    if j == 2:
        return (cmath.cosh(zt) - cmath.cos(zt)) / (2 * z * z)
    return (cmath.sinh(zt) - cmath.sin(zt)) / (2 * z ** 3)


def free_phi_array(pt: SpectralPoint, t, j: int):
    """Vectorized φ_j⁰(t, λ) for an array of t (any sign), j = -3..3."""
    t = np.asarray(t, dtype=float)
    if j < 0:
        return pt.lam * free_phi_array(pt, t, j + 4)
    z = pt.z
    zt = z * t
    small = np.abs(zt) < _TAYLOR_CUT
    out = np.empty(t.shape, dtype=complex)
    if np.any(small):
        ts = t[small]
        acc = np.zeros(ts.shape, dtype=complex)
        term = ts ** j / math.factorial(j)
        for m in range(_TAYLOR_TERMS):
            acc = acc + term
            k = 4 * m + j
            term = term * pt.lam * ts ** 4 / ((k + 1) * (k + 2) * (k + 3) * (k + 4))
        out[small] = acc
    big = ~small
    if np.any(big):
        w = zt[big]
        if j == 0:
            out[big] = (np.cosh(w) + np.cos(w)) / 2
        elif j == 1:
            out[big] = (np.sinh(w) + np.sin(w)) / (2 * z)
        elif j == 2:
            out[big] = (np.cosh(w) - np.cos(w)) / (2 * z * z)
        else:
            out[big] = (np.sinh(w) - np.sin(w)) / (2 * z ** 3)
    return out


def free_monodromy(pt: SpectralPoint):
    """The 4x4 free monodromy matrix M[k][j] = (φ_j⁰)^{(k)}(1)."""
    return np.array([[free_solutions(pt, 1.0, j - k) for j in range(4)] for k in range(4)])


def free_discriminants(pt: SpectralPoint):
    """T₁⁰, T₂⁰, T⁰, ρ⁰, D±⁰ and the Lyapunov branches in closed form."""
    from .discriminants import make_bundle

    z = pt.z
    ch, c = cmath.cosh(z), cmath.cos(z)
    T1 = (ch + c) / 2
    T2 = (cmath.cosh(2 * z) + cmath.cos(2 * z)) / 2
    T = 1 + 2 * ch * c
    # product forms avoid the cancellation in cosh z - cos z and cos z ∓ 1
    a = cmath.sinh((1 + 1j) * z / 2) * cmath.sinh((1 - 1j) * z / 2)
    rho = a * a
    Dp = -4 * (cmath.sin(z / 2) * cmath.sinh(z / 2)) ** 2
    Dm = 4 * (cmath.cos(z / 2) * cmath.cosh(z / 2)) ** 2
    return make_bundle(pt, T1, T2, T, rho=rho, Dplus=Dp, Dminus=Dm)


@dataclass(frozen=True)
class FreeZero:
    value: float
    multiplicity: int
    labels: tuple


def free_spectrum_labels(N: int):
    """Free periodic, antiperiodic and resonance zeros for n ≤ N with labels."""
    if N < 1:
        raise PreconditionError("N must be a positive integer")
    periodic = [FreeZero(0.0, 1, ((0, "+"),))]
    periodic += [FreeZero((2 * math.pi * n) ** 4, 2, ((2 * n, "-"), (2 * n, "+")))
                 for n in range(1, N + 1)]
    antiperiodic = [FreeZero((math.pi * (2 * n + 1)) ** 4, 2, ((2 * n + 1, "-"), (2 * n + 1, "+")))
                    for n in range(N)]
    resonances = [FreeZero(0.0, 1, ((0, "-"),))]
    resonances += [FreeZero(-4 * (math.pi * n) ** 4, 2, ((n, "-"), (n, "+")))
                   for n in range(1, N + 1)]
    return periodic, antiperiodic, resonances
