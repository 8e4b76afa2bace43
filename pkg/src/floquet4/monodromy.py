"""Monodromy matrix M(λ) by adaptive DOP853, plus a Picard-series oracle.

``integrate_monodromy`` solves the companion system 𝓜' = A𝓜 on [0, 1] with
𝓜(0) = I₄. Optionally it co-integrates the λ-derivative (variational system)
and the second compound matrix Λ²𝓜, whose trace gives T accurately.

``picard_series_traces`` is an independent route to the traces: it sums the
iterated-kernel expansion of the fundamental solutions around the free ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.polynomial import legendre as leg
from scipy.optimize import brentq

from . import _kernels
from .coeffs import CoefficientSet, triangle_doubling
from .errors import IntegrationError, PreconditionError, ToleranceError
from .reference import SpectralPoint, check_clamp, free_phi_array

DEFAULT_RTOL = 1e-12


@dataclass
class MonodromyResult:
    """M(λ) with optional extras.

    ``compound`` is Λ²M (rows/columns ordered 01, 02, 03, 12, 13, 23) and
    ``dcompound`` its λ-derivative, when requested.
    """

    M: np.ndarray
    dM_dlambda: Optional[np.ndarray]
    err_est: float
    pt: SpectralPoint
    n_steps: int = 0
    compound: Optional[np.ndarray] = None
    dcompound: Optional[np.ndarray] = None

    @property
    def det_residual(self) -> float:
        return abs(np.linalg.det(self.M) - 1.0)


def _unpack(state, derivative, compound):
    _, o_dm, o_y, o_dy = _kernels.layout(derivative, compound)
    M = state[:4, :4].copy()
    dM = state[o_dm:o_dm + 4, :4].copy() if o_dm >= 0 else None
    Y = state[o_y:o_y + 6, :6].copy() if o_y >= 0 else None
    dY = state[o_dy:o_dy + 6, :6].copy() if o_dy >= 0 else None
    return M, dM, Y, dY


def integrate_batch(c: CoefficientSet, lams, want_derivative: bool = False,
                    want_compound: bool = False, rtol: float = DEFAULT_RTOL,
                    halving: bool = False, use_numba=None):
    """Monodromy data for many λ at once; returns a list of MonodromyResult."""
    pts = [SpectralPoint.of(l) for l in np.atleast_1d(lams)]
    for pt in pts:
        check_clamp(pt)
    states, errs, nsteps, status = _kernels.integrate_many(
        [pt.lam for pt in pts], c.arrays(), want_derivative, want_compound, rtol,
        h_max=min(0.0625, 0.25 / c.kmax), halving=halving, use_numba=use_numba)
    out = []
    for i, pt in enumerate(pts):
        if status[i] == _kernels.TOO_MANY_STEPS:
            raise IntegrationError(f"step cap exceeded at |λ| = {abs(pt.lam):.6g}")
        if status[i] == _kernels.NON_FINITE:
            raise IntegrationError(f"non-finite state at |λ| = {abs(pt.lam):.6g}")
        M, dM, Y, dY = _unpack(states[i], want_derivative, want_compound)
        if pt.is_real:
            # real λ gives a real system; drop the round-off imaginary parts
            M, dM, Y, dY = (None if a is None else a.real.astype(complex) for a in (M, dM, Y, dY))
        out.append(MonodromyResult(M, dM, float(errs[i]), pt, int(nsteps[i]), Y, dY))
    return out


def integrate_monodromy(c: CoefficientSet, pt: SpectralPoint, want_derivative: bool = False,
                        rtol: float = DEFAULT_RTOL, want_compound: bool = False,
                        halving: bool = True) -> MonodromyResult:
    """M(λ) for one spectral point; ``err_est`` from a step-halving comparison by default."""
    if not isinstance(pt, SpectralPoint):
        pt = SpectralPoint.of(pt)
    return integrate_batch(c, [pt.lam], want_derivative, want_compound, rtol, halving)[0]


# ---------------------------------------------------------------------------
# Picard series


def _panel_rule(length: float, panels: int, order: int):
    """Nodes, weights and the cumulative matrix Q with Q @ f ≈ ∫_0^{t_i} f."""
    x, w = leg.leggauss(order)
    # ∫_{-1}^{x_i} ℓ_m on the reference panel via the Legendre basis
    V = leg.legvander(x, order - 1)
    coef_inv = np.linalg.inv(V)
    I = np.empty((order, order))
    for k in range(order):
        e = np.zeros(order)
        e[k] = 1.0
        ik = leg.legint(e, lbnd=-1.0)
        I[:, k] = leg.legval(x, ik)
    W_ref = I @ coef_inv
    h = length / panels
    nodes = (np.arange(panels)[:, None] * h + 0.5 * h * (x[None, :] + 1.0)).ravel()
    weights = np.tile(0.5 * h * w, panels)
    n = panels * order
    Q = np.zeros((n, n))
    for P in range(panels):
        rows = slice(P * order, (P + 1) * order)
        Q[rows, :P * order] = weights[None, :P * order]
        Q[rows, P * order:(P + 1) * order] = 0.5 * h * W_ref
    return nodes, weights, Q


def _picard_terms(c: CoefficientSet, pt: SpectralPoint, nu: int, N: int, panels: int, order: int):
    """f_{ν n}/4 for n = 0..N-1 on a given grid."""
    t, w, Q = _panel_rule(float(nu), panels, order)
    p, pp, q = c.p(t), c.p_prime(t), c.q(t)
    phi = {j: free_phi_array(pt, t, j) for j in range(-2, 4)}
    d = t[:, None] - t[None, :]
    G = (p[:, None] * free_phi_array(pt, d, 1) + pp[:, None] * free_phi_array(pt, d, 2)
         + q[:, None] * free_phi_array(pt, d, 3))
    QG = Q * G
    terms = np.zeros(N, dtype=complex)
    if N == 0:
        return terms
    terms[0] = free_phi_array(pt, np.array([float(nu)]), 0)[0]  # (1/4)·4φ₀⁰(ν)
    for k in range(4):
        u = p * phi[k - 2] + pp * phi[k - 1] + q * phi[k]
        back = free_phi_array(pt, nu - t, 3 - k)
        for n in range(1, N):
            terms[n] += -np.sum(w * back * u) / 4.0
            if n + 1 < N:
                u = -(QG @ u)
    return terms


def picard_tail_bound(kappa: float, pt: SpectralPoint, nu: int, N: int) -> float:
    """Sum of the term majorants (νκ/|z|₁)ⁿ e^{xν}/n! over n ≥ N."""
    a = nu * kappa / pt.z1
    head = sum(a ** n / math.factorial(n) for n in range(N))
    tail = math.exp(a) - head
    if N > 0 and tail < 1e-3 * a ** N / math.factorial(N):
        # cancellation in exp(a) - head; sum the tail directly
        tail, term, n = 0.0, a ** N / math.factorial(N), N
        while term > 1e-18 * max(tail, 1e-300):
            tail += term
            n += 1
            term *= a / n
    return tail * math.exp(pt.x * nu)


def picard_series_traces(c: CoefficientSet, pt: SpectralPoint, N: int,
                         order: int = 16, rtol: float = 1e-12):
    """Partial sums of T₁, T₂ through N terms of the Picard expansion.

    Returns ``(T1_partial, T2_partial, bounds)`` where ``bounds = (b1, b2)``
    certify |T_ν - partial_ν| ≤ b_ν. The iterated integrals are evaluated
    as repeated Volterra quadrature on a Gauss-Legendre panel grid, refined
    until two grids agree.
    """
    if not isinstance(pt, SpectralPoint):
        pt = SpectralPoint.of(pt)
    if N < 0 or N > 6:
        raise PreconditionError("picard_series_traces supports 0 <= N <= 6")
    out = []
    for nu in (1, 2):
        # ≥ 8 nodes per wavelength of both the coefficients and e^{±zt}
        freq = max(c.kmax, abs(pt.z) / (2 * math.pi) + 1.0)
        panels = max(2, int(math.ceil(8 * freq * nu / order)))
        prev = _picard_terms(c, pt, nu, N, panels, order).sum()
        scale = math.exp(pt.x * nu)
        for _ in range(5):
            panels *= 2
            cur = _picard_terms(c, pt, nu, N, panels, order).sum()
            if abs(cur - prev) <= rtol * scale:
                break
            prev = cur
        else:
            raise ToleranceError("Picard quadrature did not settle")
        out.append(complex(cur))
    bounds = (picard_tail_bound(c.kappa, pt, 1, N), picard_tail_bound(c.kappa, pt, 2, N))
    return out[0], out[1], bounds


def stated_picard_bound(kappa: float, pt: SpectralPoint, nu: int, N: int) -> float:
    """4(νκ)^N e^{xν+κ}/(N!|z|₁^N), the closed-form truncation estimate."""
    return 4 * (nu * kappa) ** N * math.exp(pt.x * nu + kappa) / (math.factorial(N) * pt.z1 ** N)


# ---------------------------------------------------------------------------
# second-order term η_ν


def zero_of_p(c: CoefficientSet) -> float:
    """A point t₀ ∈ [0, 1) with p(t₀) = 0 (exists for zero-mean p)."""
    if abs(c.p(0.0)) == 0.0:
        return 0.0
    t = np.linspace(0.0, 1.0, 64 * c.kmax + 1)
    v = c.p(t)
    for i in range(len(t) - 1):
        if v[i] == 0.0:
            return float(t[i])
        if v[i] * v[i + 1] < 0:
            return float(brentq(c.p, t[i], t[i + 1], xtol=1e-15, rtol=1e-15))
    raise PreconditionError("p has no sign change on a period")


def shift_to_zero(c: CoefficientSet):
    """(shifted coefficients with p(0) = 0, shift t₀)."""
    t0 = zero_of_p(c)
    return (c.shifted(t0) if t0 else c), t0


def eta_nu(c: CoefficientSet, pt: SpectralPoint, nu: int, shift: bool = True) -> complex:
    """η_ν(λ) = ∫₀^ν dt ∫₀^t p(s)p(t)φ₁⁰(ν-t+s)φ₁⁰(t-s) ds.

    Requires q = 0 and zero-mean p; the origin is moved to a zero of p first
    unless ``shift`` is False.
    """
    if not isinstance(pt, SpectralPoint):
        pt = SpectralPoint.of(pt)
    if nu not in (1, 2):
        raise PreconditionError("nu must be 1 or 2")
    if not c.q_is_zero or abs(c.p_const) > 1e-14:
        raise PreconditionError("eta_nu needs q = 0 and a zero-mean p")
    if shift:
        c, _ = shift_to_zero(c)
    if not any(c.p_cos) and not any(c.p_sin):
        return 0j

    def g(s, t):
        return (c.p(s) * c.p(t) * free_phi_array(pt, nu - t + s, 1)
                * free_phi_array(pt, t - s, 1))

    kmax = max(c.kmax, int(math.ceil(abs(pt.z) / math.pi)) + 1)
    return complex(triangle_doubling(g, float(nu), kmax, rtol=1e-11, atol=1e-15))
