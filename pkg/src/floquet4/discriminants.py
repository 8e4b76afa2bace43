"""Trace functions, ρ, D± and the two Lyapunov branches built from M(λ).

T₁ = tr M/4 and T₂ = tr M²/4 come straight from M. T = e₂(M)/2 is taken
from the co-integrated second compound matrix, so that D± = (T ∓ 4T₁ + 1)/2
keeps full relative accuracy near their zeros even when e^{2x} ≫ e^x. The
identity T = 4T₁² - T₂ is then a genuine check rather than a definition.
"""

from __future__ import annotations

import cmath
import csv
import io
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Optional

import numpy as np

from .coeffs import CoefficientSet
from .monodromy import DEFAULT_RTOL, MonodromyResult, integrate_batch
from .reference import SpectralPoint

CSV_HEADER = ["lambda", "T1", "T2", "rho", "Dplus", "Dminus",
              "Re_Delta1", "Im_Delta1", "Re_Delta2", "Im_Delta2"]


@dataclass
class DiscriminantBundle:
    pt: SpectralPoint
    T1: complex
    T2: complex
    T: complex
    rho: complex
    Dplus: complex
    Dminus: complex
    Delta1: complex
    Delta2: complex
    branch_real: bool
    # λ-derivatives, when the variational system was integrated
    dT1: Optional[complex] = None
    dT2: Optional[complex] = None
    dT: Optional[complex] = None
    M: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def lam(self) -> complex:
        return self.pt.lam

    @property
    def scale(self) -> float:
        """Magnitude used to make identity residuals relative."""
        return max(1.0, abs(self.T2))

    @property
    def drho(self):
        if self.dT1 is None:
            return None
        return self.dT2 / 2 - 2 * self.T1 * self.dT1

    @property
    def dDplus(self):
        if self.dT is None:
            return None
        return (self.dT - 4 * self.dT1) / 2

    @property
    def dDminus(self):
        if self.dT is None:
            return None
        return (self.dT + 4 * self.dT1) / 2

    def dDelta(self):
        """(dΔ₁/dλ, dΔ₂/dλ) on the current sheet; None at a branch point."""
        if self.dT1 is None:
            return None
        root = self.Delta1 - self.T1
        if root == 0:
            return None
        half = self.drho / (2 * root)
        return self.dT1 + half, self.dT1 - half


def _real_if(pt: SpectralPoint, v):
    return complex(v.real, 0.0) if pt.is_real else complex(v)


def make_bundle(pt: SpectralPoint, T1, T2, T, rho=None, Dplus=None, Dminus=None,
                dT1=None, dT2=None, dT=None, M=None) -> DiscriminantBundle:
    """Assemble a bundle; ρ and D± default to their trace formulas."""
    T1, T2, T = (_real_if(pt, complex(v)) for v in (T1, T2, T))
    if rho is None:
        rho = (T2 + 1) / 2 - T1 * T1
    if Dplus is None:
        Dplus = (T - 4 * T1 + 1) / 2
    if Dminus is None:
        Dminus = (T + 4 * T1 + 1) / 2
    rho, Dplus, Dminus = (_real_if(pt, complex(v)) for v in (rho, Dplus, Dminus))
    if pt.is_real:
        r = rho.real
        if r >= 0:
            root = complex(math.sqrt(r))
            branch_real = True
        else:
            root = complex(0.0, math.sqrt(-r))
            branch_real = False
    else:
        root = cmath.sqrt(rho)
        branch_real = False
    return DiscriminantBundle(pt, T1, T2, T, rho, Dplus, Dminus, T1 + root, T1 - root,
                              branch_real, dT1, dT2, dT, M)


def _from_result(r: MonodromyResult) -> DiscriminantBundle:
    M = r.M
    T1 = np.trace(M) / 4
    T2 = np.trace(M @ M) / 4
    T = np.trace(r.compound) / 2 if r.compound is not None else 4 * T1 * T1 - T2
    dT1 = dT2 = dT = None
    if r.dM_dlambda is not None:
        dT1 = np.trace(r.dM_dlambda) / 4
        dT2 = np.trace(M @ r.dM_dlambda) / 2
        if r.dcompound is not None:
            dT = np.trace(r.dcompound) / 2
        else:
            dT = 8 * T1 * dT1 - dT2
    return make_bundle(r.pt, T1, T2, T, dT1=dT1, dT2=dT2, dT=dT, M=M)


def bundles(c: CoefficientSet, lams: Iterable, derivative: bool = False,
            rtol: float = DEFAULT_RTOL) -> list:
    """Bundles for many λ (one integrator batch)."""
    lams = list(np.atleast_1d(lams))
    if not lams:
        return []
    res = integrate_batch(c, lams, want_derivative=derivative, want_compound=True, rtol=rtol)
    return [_from_result(r) for r in res]


def bundle(c: CoefficientSet, pt, derivative: bool = False,
           rtol: float = DEFAULT_RTOL) -> DiscriminantBundle:
    lam = pt.lam if isinstance(pt, SpectralPoint) else pt
    return bundles(c, [lam], derivative, rtol)[0]


# ---------------------------------------------------------------------------
# checks


def identity_residuals(b: DiscriminantBundle) -> dict:
    """Residuals of the seven bundle identities, each divided by max(1, |T₂|)."""
    s = b.scale
    res = {
        "T=4T1^2-T2": abs(b.T - (4 * b.T1 ** 2 - b.T2)),
        "rho=(T2+1)/2-T1^2": abs(b.rho - ((b.T2 + 1) / 2 - b.T1 ** 2)),
        "D+=(T-4T1+1)/2": abs(b.Dplus - (b.T - 4 * b.T1 + 1) / 2),
        "D-=(T+4T1+1)/2": abs(b.Dminus - (b.T + 4 * b.T1 + 1) / 2),
        "D+-D-=-4T1": abs(b.Dplus - b.Dminus + 4 * b.T1),
        "D+=(T1-1)^2-rho": abs(b.Dplus - ((b.T1 - 1) ** 2 - b.rho)),
        "D-=(T1+1)^2-rho": abs(b.Dminus - ((b.T1 + 1) ** 2 - b.rho)),
        "Delta1^2+Delta2^2=1+T2": abs(b.Delta1 ** 2 + b.Delta2 ** 2 - 1 - b.T2),
        "Delta1*Delta2=(T-1)/2": abs(b.Delta1 * b.Delta2 - (b.T - 1) / 2),
    }
    if b.M is not None:
        I = np.eye(4)
        res["D+=det(M-I)/4"] = abs(b.Dplus - np.linalg.det(b.M - I) / 4)
        res["D-=det(M+I)/4"] = abs(b.Dminus - np.linalg.det(b.M + I) / 4)
        res["detM=1"] = abs(np.linalg.det(b.M) - 1)
    return {k: float(v) / s for k, v in res.items()}


def branch_order_ok(b: DiscriminantBundle, tol: float = 0.0) -> bool:
    """Real λ: Δ₁ ≥ Δ₂ real when ρ ≥ 0, Δ₂ = conj Δ₁ when ρ < 0."""
    if not b.pt.is_real:
        return True
    if b.branch_real:
        return b.Delta1.imag == 0 and b.Delta2.imag == 0 and b.Delta1.real >= b.Delta2.real - tol
    return abs(b.Delta2 - b.Delta1.conjugate()) <= tol + 1e-15 * abs(b.Delta1)


def elementary_symmetric(M: np.ndarray):
    """(e1, e2, e3, e4) of the eigenvalues of a 4x4 matrix via principal minors."""
    idx = range(4)
    e1 = np.trace(M)
    e2 = sum(np.linalg.det(M[np.ix_(s, s)]) for s in combinations(idx, 2))
    e3 = sum(np.linalg.det(M[np.ix_(s, s)]) for s in combinations(idx, 3))
    e4 = np.linalg.det(M)
    return e1, e2, e3, e4


def char_poly_check(c: CoefficientSet, pt, rtol: float = DEFAULT_RTOL) -> float:
    """Max |coefficient difference| between det(M - τI) and [1, -4T₁, 2T, -4T₁, 1]."""
    b = bundle(c, pt, rtol=rtol)
    return char_poly_residual(b)


def char_poly_residual(b: DiscriminantBundle) -> float:
    e1, e2, e3, e4 = elementary_symmetric(b.M)
    have = np.array([1.0, -e1, e2, -e3, e4])
    want = np.array([1.0, -4 * b.T1, 2 * b.T, -4 * b.T1, 1.0])
    return float(np.max(np.abs(have - want)))


def _pair(delta: complex):
    root = cmath.sqrt(delta * delta - 1)
    tau = delta + root
    if abs(tau) < 1:
        tau = delta - root
    return tau, 1 / tau


def multipliers(b: DiscriminantBundle):
    """((τ₁, 1/τ₁), (τ₂, 1/τ₂)) from τ² - 2Δ_ν τ + 1 = 0, |τ_ν| ≥ 1."""
    return _pair(b.Delta1), _pair(b.Delta2)


def pairing_residual(b: DiscriminantBundle) -> float:
    """Distance from eig(M) to the Δ-derived multipliers, relative to max(1, |τ|)."""
    taus = [t for pair in multipliers(b) for t in pair]
    eig = list(np.linalg.eigvals(b.M))
    worst = 0.0
    for tau in taus:
        k = min(range(len(eig)), key=lambda i: abs(eig[i] - tau))
        worst = max(worst, abs(eig[k] - tau) / max(1.0, abs(tau)))
        eig.pop(k)
    return worst


def branches_inside(b: DiscriminantBundle):
    """(upper in [-1, 1], lower in [-1, 1]) for real λ with ρ ≥ 0, else None.

    Decided from the signs of D± = (T₁ ∓ 1)² - ρ rather than from T₁ ± √ρ,
    which keeps the answer right where ρ is tiny.
    """
    if not b.branch_real:
        return None
    t1, dp, dm = b.T1.real, b.Dplus.real, b.Dminus.real
    upper = (t1 <= 1.0 and dp >= 0.0) and (t1 >= -1.0 or dm <= 0.0)
    lower = (t1 >= -1.0 and dm >= 0.0) and (t1 <= 1.0 or dp <= 0.0)
    return upper, lower


def spectral_indicator(b: DiscriminantBundle) -> int:
    """0 (gap), 2 or 4: twice the number of real branches inside [-1, 1]."""
    inside = branches_inside(b)
    return 0 if inside is None else 2 * sum(inside)


# ---------------------------------------------------------------------------
# CSV


def bundle_row(b: DiscriminantBundle) -> list:
    lam = b.lam.real if b.pt.is_real else b.lam

    def fmt(v):
        if isinstance(v, complex):
            if v.imag == 0:
                return f"{v.real:.17g}"
            return f"{v.real:.17g}{v.imag:+.17g}j"
        return f"{v:.17g}"

    return [fmt(lam), fmt(b.T1), fmt(b.T2), fmt(b.rho), fmt(b.Dplus), fmt(b.Dminus),
            fmt(b.Delta1.real), fmt(b.Delta1.imag), fmt(b.Delta2.real), fmt(b.Delta2.imag)]


def write_csv(rows: Iterable[DiscriminantBundle], fh=None) -> str:
    own = fh is None
    fh = io.StringIO() if own else fh
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for b in rows:
        w.writerow(bundle_row(b))
    return fh.getvalue() if own else ""


def read_csv(text: str) -> list:
    """Rows of the CSV as dicts of complex values."""
    rdr = csv.DictReader(io.StringIO(text))
    out = []
    for row in rdr:
        out.append({k: complex(v.replace(" ", "")) for k, v in row.items()})
    return out


# ---------------------------------------------------------------------------
# perturbation bounds against the free case


def in_lambda_r(c: CoefficientSet, lam, r: float) -> bool:
    """λ ∈ Λ_r, i.e. |λ| > r⁴ max(1, κ⁴)."""
    return abs(lam) > r ** 4 * max(1.0, c.kappa ** 4)


def perturbation_bounds(c: CoefficientSet, b: DiscriminantBundle) -> dict:
    """Deviation from the free case versus its a-priori bound, per quantity.

    Each entry is ``(deviation, bound, applies)``; ``applies`` is False when
    λ lies outside the domain where the bound is asserted.
    """
    from .reference import free_discriminants

    pt, k = b.pt, c.kappa
    f = free_discriminants(pt)
    x, y, z1, za = pt.x, pt.y, pt.z1, abs(pt.z)
    grow = math.exp(x + abs(y))
    out = {
        "T1": (abs(b.T1 - f.T1), k / (2 * z1) * math.exp(x + k), True),
        "T2": (abs(b.T2 - f.T2), 2 * k / (2 * z1) * math.exp(2 * x + k), True),
        "rho": (abs(b.rho - f.rho), 3 * k / z1 * math.exp(2 * x + k), True),
    }
    lam4 = in_lambda_r(c, pt.lam, 4.0)
    lam3 = in_lambda_r(c, pt.lam, 3.0)
    zsafe = za if za > 0 else math.inf
    out["Dplus"] = (abs(b.Dplus - f.Dplus), 7 * k / zsafe * grow, lam4)
    out["Dminus"] = (abs(b.Dminus - f.Dminus), 7 * k / zsafe * grow, lam4)
    out["T"] = (abs(b.T - f.T), 9 * k / zsafe * grow, lam3)
    return out


def bound_violations(c: CoefficientSet, b: DiscriminantBundle, slack: float = 0.0) -> list:
    """Names of applicable bounds that fail (deviation > bound + slack·scale)."""
    bad = []
    for name, (dev, bound, applies) in perturbation_bounds(c, b).items():
        if applies and dev > bound + slack * b.scale:
            bad.append(name)
    return bad


def csv_row_residual(row: dict) -> float:
    """Largest identity residual among the columns of one reloaded CSV row.

    Uses Δ₁ + Δ₂ = 2T₁, Δ₁Δ₂ = T₁² - ρ, ρ = (T₂+1)/2 - T₁², and
    D± = (T₁ ∓ 1)² - ρ, each divided by max(1, |T₂|).
    """
    d1 = complex(row["Re_Delta1"].real, row["Im_Delta1"].real)
    d2 = complex(row["Re_Delta2"].real, row["Im_Delta2"].real)
    T1, T2, rho = row["T1"], row["T2"], row["rho"]
    s = max(1.0, abs(T2))
    res = (abs(d1 + d2 - 2 * T1), abs(d1 * d2 - (T1 * T1 - rho)),
           abs(rho - ((T2 + 1) / 2 - T1 * T1)),
           abs(row["Dplus"] - ((T1 - 1) ** 2 - rho)), abs(row["Dminus"] - ((T1 + 1) ** 2 - rho)))
    return max(res) / s
