"""Closed-form large-n and small-ε predictions, compared with computed zeros.

Large n: resonances near -4(πn)⁴ and (anti)periodic eigenvalues near (πn)⁴
with zero-mode shifts and gaps set by the n-th Fourier mode of p'. Small ε
(p → εp with zero-mean p, q = 0): the bottom eigenvalue λ₀⁺ and the top real
resonance r₀⁻ both move by 2ε²(4v₁ - v₂) and separate by 4A²ε⁴.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .coeffs import (CoefficientSet, amplitude_A, fourier_p0, fourier_pprime_n,
                     perturbation_moments)
from .discriminants import bundles
from .errors import FloquetError, PreconditionError
from .monodromy import DEFAULT_RTOL
from .reference import SpectralPoint
from .zeros import ZeroTable, find_zeros


@dataclass
class AsymptoticComparison:
    param: float
    predicted: complex
    computed: complex
    expected_order: str
    label: str = ""

    @property
    def residual(self) -> float:
        return abs(self.predicted - self.computed)

    def to_dict(self):
        def num(v):
            v = complex(v)
            return v.real if v.imag == 0 else [v.real, v.imag]
        return {"param": self.param, "label": self.label, "predicted": num(self.predicted),
                "computed": num(self.computed), "residual": self.residual,
                "expected_order": self.expected_order}


# ---------------------------------------------------------------------------
# large n


def pprime_modulus(c: CoefficientSet, n: int) -> float:
    return abs(fourier_pprime_n(c, n))


def resonance_asymptote(c: CoefficientSet, n: int):
    """(r_n⁻, r_n⁺) ≈ -4(πn)⁴ + 2p̂₀(πn)² ∓ √2 πn|p̂ₙ'|."""
    if n < 1:
        raise PreconditionError("n must be at least 1")
    k = math.pi * n
    base = -4 * k ** 4 + 2 * fourier_p0(c) * k ** 2
    split = math.sqrt(2) * k * pprime_modulus(c, n)
    return base - split, base + split


def eigenvalue_asymptote(c: CoefficientSet, n: int):
    """(λₙ⁻, λₙ⁺, gap) with λₙ± ≈ (πn)⁴ - p̂₀(πn)² ± πn|p̂ₙ'|/2 and gap πn|p̂ₙ'|."""
    if n < 1:
        raise PreconditionError("n must be at least 1")
    k = math.pi * n
    base = k ** 4 - fourier_p0(c) * k ** 2
    half = k * pprime_modulus(c, n) / 2
    return base - half, base + half, 2 * half


def constant_p_resonance(p0: float, n: int) -> float:
    """Exact double resonance for constant p = p0, q = 0: -(2(πn)² - p0/2)²."""
    return -(2 * (math.pi * n) ** 2 - p0 / 2) ** 2


def eigenvalue_comparisons(c: CoefficientSet, table: ZeroTable, ns: Sequence[int]):
    out = []
    for n in ns:
        lm, lp, _ = eigenvalue_asymptote(c, n)
        for sign, pred in (("-", lm), ("+", lp)):
            got = table.eigenvalue(n, sign)
            if got is None:
                continue
            out.append(AsymptoticComparison(n, pred, got, "O(1)", f"lambda_{n}{sign}"))
    return out


def resonance_comparisons(c: CoefficientSet, table: ZeroTable, ns: Sequence[int]):
    out = []
    for n in ns:
        rm, rp = resonance_asymptote(c, n)
        for sign, pred in (("-", rm), ("+", rp)):
            got = table.resonance(n, sign)
            if got is None:
                continue
            out.append(AsymptoticComparison(n, pred, got, "O(1)", f"r_{n}{sign}"))
    return out


def fit_zero_mode_coefficient(table: ZeroTable, ns: Sequence[int], which: str = "eigen") -> float:
    """Least-squares α in mean(zero pair) - leading term ≈ α(πn)² + const.

    The predicted value is α = -p̂₀ for eigenvalues and α = 2p̂₀ for resonances.
    """
    xs, ys = [], []
    for n in ns:
        k = math.pi * n
        if which == "eigen":
            a, b = table.eigenvalue(n, "-"), table.eigenvalue(n, "+")
            lead = k ** 4
        else:
            a, b = table.resonance(n, "-"), table.resonance(n, "+")
            lead = -4 * k ** 4
            a = None if a is None else a.real
            b = None if b is None else b.real
        if a is None or b is None:
            continue
        xs.append(k ** 2)
        ys.append(0.5 * (a + b) - lead)
    if len(xs) < 2:
        raise PreconditionError("need at least two labeled pairs to fit")
    slope, _ = np.polyfit(xs, ys, 1)
    return float(slope)


def bounded_trend(residuals: Sequence[float], fit_from: Sequence[int] = (0, 1),
                  margin: float = 3.0):
    """(ok, C): every residual ≤ margin · max of the residuals at ``fit_from``."""
    C = max(residuals[i] for i in fit_from)
    return all(r <= margin * C for r in residuals), C


# ---------------------------------------------------------------------------
# small ε


@dataclass
class PerturbationPrediction:
    r0_pred: float
    l0_pred: float
    gap_pred: float
    T1_pred: float


def perturbation_predictions(c: CoefficientSet, eps: float) -> PerturbationPrediction:
    """Leading small-ε behaviour of r₀⁻, λ₀⁺, their gap and T₁(λ₀⁺)."""
    if abs(fourier_p0(c)) > 1e-14 or not c.q_is_zero:
        raise PreconditionError("perturbation predictions need a zero-mean p and q = 0")
    if abs(eps) > 1:
        raise PreconditionError("|eps| must not exceed 1")
    v1, v2 = perturbation_moments(c)
    A = amplitude_A(c).value
    shift = 2 * eps ** 2 * (4 * v1 - v2)
    return PerturbationPrediction(shift, shift, 4 * A * A * eps ** 4, 1 - eps ** 2 * A)


@dataclass
class BottomOfSpectrum:
    eps: float
    r0_minus: Optional[float]
    lambda0_plus: Optional[float]
    T1_at_lambda0: Optional[float]
    error: Optional[str] = None

    @property
    def gap(self):
        if self.r0_minus is None or self.lambda0_plus is None:
            return None
        return self.lambda0_plus - self.r0_minus


def locate_bottom(c: CoefficientSet, rtol: float = DEFAULT_RTOL, eps: float = 1.0) -> BottomOfSpectrum:
    """Top real resonance r₀⁻ and lowest periodic eigenvalue λ₀⁺ near the origin.

    Searches the innermost natural disks of ρ and D₊ (N = 0 regions).
    """
    try:
        rz, _ = find_zeros(c, "rho", 0, rtol)
        dz, _ = find_zeros(c, "Dplus", 0, rtol)
        rr = [z.lam.real for z in rz if z.lam.imag == 0]
        dr = [z.lam.real for z in dz if z.lam.imag == 0]
        if not rr or not dr:
            raise PreconditionError("no real zero near the origin")
        r0, l0 = max(rr), min(dr)
        t1 = bundles(c, [l0], rtol=rtol)[0].T1.real
        return BottomOfSpectrum(eps, r0, l0, t1)
    except FloquetError as exc:
        return BottomOfSpectrum(eps, None, None, None, f"{type(exc).__name__}: {exc}")


def perturbation_sweep(c: CoefficientSet, eps_list: Sequence[float], rtol: float = DEFAULT_RTOL):
    """Rows of (computed bottom, prediction) for p → εp, plus fitted log-log slopes.

    A failing ε gives a row with ``error`` set (and prediction None when ε
    is outside the prediction's range); the sweep continues.
    """
    perturbation_predictions(c, 0.0)  # coefficient preconditions fail the whole sweep
    rows = []
    for eps in eps_list:
        try:
            pred = perturbation_predictions(c, eps)
        except PreconditionError as exc:
            rows.append((BottomOfSpectrum(eps, None, None, None, f"PreconditionError: {exc}"), None))
            continue
        if eps == 0:
            rows.append((BottomOfSpectrum(0.0, 0.0, 0.0, 1.0), pred))
            continue
        rows.append((locate_bottom(c.scaled(eps), rtol, eps), pred))
    return rows, sweep_slopes(rows)


def sweep_slopes(rows):
    pts = [(b.eps, b.gap) for b, _ in rows if b.gap is not None and b.eps > 0 and b.gap > 0]
    out = {"gap_slope": None, "T1_defect_slope": None}
    if len(pts) >= 2:
        x = np.log([p[0] for p in pts])
        y = np.log([p[1] for p in pts])
        out["gap_slope"] = float(np.polyfit(x, y, 1)[0])
    pts = [(b.eps, 1 - b.T1_at_lambda0) for b, _ in rows
           if b.T1_at_lambda0 is not None and b.eps > 0 and 1 - b.T1_at_lambda0 > 0]
    if len(pts) >= 2:
        out["T1_defect_slope"] = float(np.polyfit(np.log([p[0] for p in pts]),
                                                  np.log([p[1] for p in pts]), 1)[0])
    return out


def measured_prefactors(c: CoefficientSet, rows) -> dict:
    """Gap/ε⁴ and (1 - T₁(λ₀⁺))/ε² at the smallest ε, next to the predicted 4A² and A.

    The ratios make any disagreement with the predicted leading coefficients
    visible instead of folding it into a tolerance.
    """
    ok = [b for b, _ in rows if b.eps > 0 and b.gap is not None]
    if not ok:
        return {}
    b = min(ok, key=lambda r: r.eps)
    A = amplitude_A(c).value
    gap_coef = b.gap / b.eps ** 4
    t1_coef = (1 - b.T1_at_lambda0) / b.eps ** 2
    return {"eps": b.eps, "A": A, "gap_over_eps4": gap_coef, "predicted_gap_coef": 4 * A * A,
            "gap_ratio": gap_coef / (4 * A * A) if A else None,
            "T1_defect_over_eps2": t1_coef, "predicted_T1_coef": A,
            "T1_ratio": t1_coef / A if A else None}


# ---------------------------------------------------------------------------
# Lyapunov branches for large |λ|


def in_exclusion_zone(lam: complex, for_delta2: bool) -> bool:
    z = SpectralPoint.of(lam).z
    n0 = int(round(abs(z) / math.pi))
    for n in range(max(0, n0 - 2), n0 + 3):
        for w in ((1 + 1j) * math.pi * n, (1 - 1j) * math.pi * n):
            if abs(z - w) <= 1:
                return True
        if for_delta2 and abs(z - math.pi * n) <= 1:
            return True
    return False


def lyapunov_asymptote_check(c: CoefficientSet, lambda_grid, rtol: float = DEFAULT_RTOL):
    """|Δ₁/cosh z - 1|·|z| and |Δ₂/cos z - 1|·|z| over the grid.

    On each point the branch nearer to cosh z is taken as Δ₁.
    """
    lams = [complex(l) for l in lambda_grid]
    for lam in lams:
        if in_exclusion_zone(lam, True):
            raise PreconditionError(f"λ = {lam} lies inside an exclusion zone")
    out = []
    for lam, b in zip(lams, bundles(c, lams, rtol=rtol)):
        z = b.pt.z
        ch, co = cmath.cosh(z), cmath.cos(z)
        d1, d2 = b.Delta1, b.Delta2
        if abs(d2 - ch) < abs(d1 - ch):
            d1, d2 = d2, d1
        out.append(AsymptoticComparison(lam.real if lam.imag == 0 else lam, ch, d1, "O(1/z)", "Delta1"))
        out.append(AsymptoticComparison(lam.real if lam.imag == 0 else lam, co, d2, "O(1/z)", "Delta2"))
    return out


def lyapunov_ratios(comparisons):
    """|computed/predicted - 1|·|z| for each comparison."""
    out = []
    for cmp in comparisons:
        z = SpectralPoint.of(cmp.param).z
        out.append(abs(cmp.computed / cmp.predicted - 1) * abs(z))
    return out
