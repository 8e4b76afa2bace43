"""Counting, locating and labeling zeros of ρ, D₊ and D₋.

Counting uses the argument principle on sampled contours (no derivatives).
Location works cell by cell: nested disks at the natural radii of each
function split the search region into annuli, annuli holding more than two
zeros are cut into annular sectors, and each cell with at most two zeros is
seeded from its contour moments ∮ λᵏ f'/f dλ and polished by Newton's
method with the variational derivative. Near-double zeros are handled by
locating the critical point of f first, which avoids the square-root loss
of accuracy that plain Newton suffers at a double root.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .coeffs import CoefficientSet
from .errors import ContourError, PreconditionError, RefinementError, SubdivisionError
from .monodromy import DEFAULT_RTOL, integrate_batch
from .reference import CLAMP_X

WHICH = ("rho", "Dplus", "Dminus")
NOISE_FACTOR = 20.0   # measured evaluation error stays below ~6 · rtol · magnitude of the terms
REFINE_RTOL = 1e-13   # refinement and multiplicity circles run at least this tight
INITIAL_NODES = 256
MAX_DOUBLINGS = 3
MAX_ARG_STEP = math.pi / 3


# ---------------------------------------------------------------------------
# function evaluation


def evaluate(c: CoefficientSet, which: str, lams, derivative: bool = False,
             rtol: float = DEFAULT_RTOL):
    """Values (and λ-derivatives) of ρ, D₊ or D₋ plus a noise estimate per point."""
    if which not in WHICH:
        raise PreconditionError(f"unknown function {which!r}")
    lams = np.atleast_1d(np.asarray(lams, dtype=complex))
    compound = which != "rho"
    res = integrate_batch(c, lams, want_derivative=derivative, want_compound=compound, rtol=rtol)
    n = len(res)
    f = np.empty(n, dtype=complex)
    df = np.empty(n, dtype=complex) if derivative else None
    noise = np.empty(n)
    for i, r in enumerate(res):
        M = r.M
        T1 = np.trace(M) / 4
        if which == "rho":
            T2 = np.trace(M @ M) / 4
            f[i] = (T2 + 1) / 2 - T1 * T1
            scale = (abs(T2) + 1) / 2 + abs(T1) ** 2
            if derivative:
                dT1 = np.trace(r.dM_dlambda) / 4
                dT2 = np.trace(M @ r.dM_dlambda) / 2
                df[i] = dT2 / 2 - 2 * T1 * dT1
        else:
            T = np.trace(r.compound) / 2
            sgn = -1.0 if which == "Dplus" else 1.0
            f[i] = (T + sgn * 4 * T1 + 1) / 2
            scale = (abs(T) + 4 * abs(T1) + 1) / 2
            if derivative:
                dT1 = np.trace(r.dM_dlambda) / 4
                dT = np.trace(r.dcompound) / 2
                df[i] = (dT + sgn * 4 * dT1) / 2
        noise[i] = NOISE_FACTOR * rtol * scale
        if lams[i].imag == 0:
            f[i] = f[i].real
            if derivative:
                df[i] = df[i].real
    return f, df, noise


# ---------------------------------------------------------------------------
# contours


@dataclass(frozen=True)
class ContourSpec:
    """A closed contour in the λ-plane.

    kinds: ``disk-lambda`` (center/radius in λ), ``disk-z`` (disk in the
    quarter-root variable w, mapped by λ = w⁴), ``resonance-domain`` (the disk
    |w - (1+i)πn| < π/(2√2), ``n`` given as ``center``), ``rect`` (center and
    half-sizes ``half_w``, ``half_h`` in λ), ``sector`` (r0 < |λ| < r1,
    th0 < arg λ < th1).
    """

    kind: str
    center: complex = 0j
    radius: float = 1.0
    node_count: int = INITIAL_NODES
    half_w: float = 0.0
    half_h: float = 0.0
    r0: float = 0.0
    r1: float = 0.0
    th0: float = 0.0
    th1: float = 2 * math.pi

    def with_nodes(self, n: int) -> "ContourSpec":
        return ContourSpec(self.kind, self.center, self.radius, n, self.half_w, self.half_h,
                           self.r0, self.r1, self.th0, self.th1)

    @property
    def conj_symmetric(self) -> bool:
        if self.kind == "disk-lambda":
            return self.center.imag == 0
        if self.kind == "sector":
            return abs(self.th1 - self.th0 - 2 * math.pi) < 1e-15
        return False


def disk_lambda(center, radius, n=INITIAL_NODES) -> ContourSpec:
    return ContourSpec("disk-lambda", complex(center), float(radius), n)


def disk_z(center, radius, n=INITIAL_NODES) -> ContourSpec:
    center = complex(center)
    if center == 0:
        return disk_lambda(0, float(radius) ** 4, n)
    if abs(center) <= radius or math.asin(min(1.0, radius / abs(center))) >= math.pi / 4:
        raise PreconditionError("w⁴ is not one-to-one on this disk-in-z")
    return ContourSpec("disk-z", center, float(radius), n)


def resonance_domain(n: int, nodes=INITIAL_NODES) -> ContourSpec:
    """The domain around -4(πn)⁴ bounded by |λ^{1/4} - (1+i)πn| = π/(2√2)."""
    return ContourSpec("resonance-domain", complex(n), math.pi / (2 * math.sqrt(2)), nodes)


def rect(center, half_w, half_h, n=INITIAL_NODES) -> ContourSpec:
    return ContourSpec("rect", complex(center), 0.0, n, float(half_w), float(half_h))


def sector(r0, r1, th0, th1, n=INITIAL_NODES) -> ContourSpec:
    return ContourSpec("sector", 0j, 0.0, n, r0=float(r0), r1=float(r1), th0=float(th0), th1=float(th1))


def _gl_piece(gamma, dgamma, n):
    x, w = np.polynomial.legendre.leggauss(n)
    u = 0.5 * (x + 1)
    return gamma(u), 0.5 * w * dgamma(u)


def discretize(spec: ContourSpec):
    """Ordered nodes λ_k and weights w_k with ∮ g dλ ≈ Σ w_k g(λ_k)."""
    n = spec.node_count
    if spec.kind in ("disk-lambda", "disk-z", "resonance-domain"):
        th = 2 * math.pi * np.arange(n) / n
        e = np.exp(1j * th)
        if spec.kind == "disk-lambda":
            lam = spec.center + spec.radius * e
            w = 1j * spec.radius * e * (2 * math.pi / n)
            return lam, w
        if spec.kind == "disk-z":
            c0 = spec.center
        else:
            c0 = (1 + 1j) * math.pi * spec.center.real
        om = c0 + spec.radius * e
        lam = om ** 4
        w = 4 * om ** 3 * 1j * spec.radius * e * (2 * math.pi / n)
        return lam, w
    if spec.kind == "rect":
        c0, a, b = spec.center, spec.half_w, spec.half_h
        corners = [c0 + complex(-a, -b), c0 + complex(a, -b), c0 + complex(a, b), c0 + complex(-a, b)]
        m = max(4, n // 4)
        lams, ws = [], []
        for k in range(4):
            p0, p1 = corners[k], corners[(k + 1) % 4]
            l, w = _gl_piece(lambda u: p0 + (p1 - p0) * u, lambda u: (p1 - p0) * np.ones_like(u), m)
            lams.append(l)
            ws.append(w)
        return np.concatenate(lams), np.concatenate(ws)
    if spec.kind == "sector":
        r0, r1, t0, t1 = spec.r0, spec.r1, spec.th0, spec.th1
        full = abs(t1 - t0 - 2 * math.pi) < 1e-15
        pieces = []
        if full:
            th = t0 + 2 * math.pi * np.arange(n) / n
            e = np.exp(1j * th)
            pieces.append((r1 * e, 1j * r1 * e * (2 * math.pi / n)))
            if r0 > 0:
                m = n  # same density keeps the inner circle as accurate as the outer one
                th = t0 - 2 * math.pi * np.arange(m) / m
                e = np.exp(1j * th)
                pieces.append((r0 * e, -1j * r0 * e * (2 * math.pi / m)))
            lam = np.concatenate([p[0] for p in pieces])
            w = np.concatenate([p[1] for p in pieces])
            return lam, w
        m = max(8, n // 4)
        dth = t1 - t0
        # outward radial edge, outer arc, inward radial edge, inner arc (reversed)
        pieces.append(_gl_piece(lambda u: (r0 + (r1 - r0) * u) * np.exp(1j * t0),
                                lambda u: (r1 - r0) * np.exp(1j * t0) * np.ones_like(u), m))
        pieces.append(_gl_piece(lambda u: r1 * np.exp(1j * (t0 + dth * u)),
                                lambda u: 1j * dth * r1 * np.exp(1j * (t0 + dth * u)), 2 * m))
        pieces.append(_gl_piece(lambda u: (r1 - (r1 - r0) * u) * np.exp(1j * t1),
                                lambda u: -(r1 - r0) * np.exp(1j * t1) * np.ones_like(u), m))
        if r0 > 0:
            pieces.append(_gl_piece(lambda u: r0 * np.exp(1j * (t1 - dth * u)),
                                    lambda u: -1j * dth * r0 * np.exp(1j * (t1 - dth * u)), 2 * m))
        lam = np.concatenate([p[0] for p in pieces])
        w = np.concatenate([p[1] for p in pieces])
        return lam, w
    raise PreconditionError(f"unknown contour kind {spec.kind!r}")


def _check_clamp_nodes(lams):
    x = np.abs(lams) ** 0.25 * np.cos(np.angle(lams) / 4)
    if np.any(x > CLAMP_X):
        raise PreconditionError("contour reaches beyond the overflow clamp")


@dataclass
class _Sampled:
    spec: ContourSpec
    lam: np.ndarray
    w: np.ndarray
    f: np.ndarray
    df: Optional[np.ndarray]
    noise: np.ndarray
    winding: int
    max_step: float


def _evaluate_nodes(c, which, spec, lam, derivative, rtol):
    _check_clamp_nodes(lam)
    if spec.conj_symmetric and spec.kind == "disk-lambda" and len(lam) % 2 == 0:
        # real coefficients: f(conj λ) = conj f(λ), evaluate the upper half only
        n = len(lam)
        half = lam[: n // 2 + 1].copy()
        half[0] = half[0].real
        half[-1] = half[-1].real
        f, df, nz = evaluate(c, which, half, derivative, rtol)
        mirror = slice(n // 2 - 1, 0, -1)
        f = np.concatenate([f, np.conj(f[mirror])])
        nz = np.concatenate([nz, nz[mirror]])
        if derivative:
            df = np.concatenate([df, np.conj(df[mirror])])
        return f, df, nz
    return evaluate(c, which, lam, derivative, rtol)


def _sample(c, which, spec, derivative=False, rtol=DEFAULT_RTOL, perturb=True) -> _Sampled:
    """Evaluate on the contour, doubling nodes until the phase is resolved."""
    for attempt in range(2):
        n = spec.node_count
        for _ in range(MAX_DOUBLINGS + 1):
            s = spec.with_nodes(n)
            lam, w = discretize(s)
            f, df, noise = _evaluate_nodes(c, which, s, lam, derivative, rtol)
            if np.any(np.abs(f) <= 10 * noise):
                break  # contour too close to a zero
            steps = np.angle(np.roll(f, -1) / f)
            total = steps.sum() / (2 * math.pi)
            wind = int(round(total))
            max_step = float(np.abs(steps).max())
            if max_step <= MAX_ARG_STEP and abs(total - wind) < 0.1:
                return _Sampled(s, lam, w, f, df, noise, wind, max_step)
            n *= 2
        else:
            raise ContourError(f"winding of {which} did not settle on {spec.kind} contour "
                               f"after {MAX_DOUBLINGS} doublings")
        if not perturb or attempt == 1:
            break
        spec = _perturbed(spec)
    raise ContourError(f"{which} is too small on the {spec.kind} contour (passes near a zero)")


def _perturbed(spec: ContourSpec) -> ContourSpec:
    d = dict(kind=spec.kind, center=spec.center, radius=spec.radius, node_count=spec.node_count,
             half_w=spec.half_w, half_h=spec.half_h, r0=spec.r0, r1=spec.r1, th0=spec.th0, th1=spec.th1)
    if spec.kind == "sector":
        d["r1"] = spec.r1 * 1.013
        d["th0"] = spec.th0 + 0.0137
        d["th1"] = spec.th1 + 0.0137 if spec.th1 - spec.th0 < 2 * math.pi - 1e-12 else spec.th1 + 0.0137
    elif spec.kind == "rect":
        d["half_w"] = spec.half_w * 1.013
        d["half_h"] = spec.half_h * 1.013
    else:
        d["radius"] = spec.radius * 1.013
    return ContourSpec(**d)


def count_zeros(which: str, contour: ContourSpec, c: CoefficientSet,
                rtol: float = DEFAULT_RTOL) -> int:
    """Number of zeros of ρ, D₊ or D₋ inside the contour (argument principle)."""
    return _sample(c, which, contour, derivative=False, rtol=rtol, perturb=False).winding


# ---------------------------------------------------------------------------
# Newton refinement


@dataclass
class LocatedZero:
    lam: complex
    multiplicity: int
    which: str
    labels: tuple = ()
    refine_residual: float = 0.0
    flags: tuple = ()
    uncertainty: float = 0.0   # cluster width for an unresolved double, noise/|f'| for a simple zero

    @property
    def label(self):
        return self.labels[0] if self.labels else None

    @property
    def is_real(self) -> bool:
        return self.lam.imag == 0.0

    def table_rows(self) -> list:
        labs = self.labels or (None,)
        rows = []
        for lab in labs:
            rows.append({"lambda_re": self.lam.real, "lambda_im": self.lam.imag, "which": self.which,
                         "multiplicity": self.multiplicity, "uncertainty": self.uncertainty,
                         "label": None if lab is None else f"{lab[0]}{lab[1]}"})
        return rows


def _f1(c, which, lam, rtol, derivative=True):
    f, df, nz = evaluate(c, which, [lam], derivative, min(rtol, REFINE_RTOL))
    return f[0], (df[0] if derivative else None), nz[0]


def winding_near(c, which, lam, radius, rtol=DEFAULT_RTOL, nodes=64) -> int:
    spec = disk_lambda(lam, radius, nodes)
    return _sample(c, which, spec, rtol=rtol, perturb=False).winding


def _newton(c, which, x, rtol, tol_root, keep_real, mult=1, max_iter=50):
    last = None
    for it in range(max_iter):
        f, df, nz = _f1(c, which, x, rtol)
        if abs(f) <= nz:
            return x, f, nz, it
        if df == 0:
            raise RefinementError("zero derivative during Newton", seed=x)
        step = mult * f / df
        if keep_real:
            step = complex(step.real, 0.0)
        x = x - step
        if abs(step) <= tol_root * max(1.0, abs(x)):
            f, _, nz = _f1(c, which, x, rtol, derivative=False)
            return x, f, nz, it
        if last is not None and abs(step) >= last and abs(step) <= 1e3 * tol_root * max(1.0, abs(x)):
            # stagnation at the noise floor
            return x, f, nz, it
        last = abs(step)
    raise RefinementError(f"Newton for {which} did not converge in {max_iter} steps", seed=x)


def _critical_point(c, which, x0, h, rtol, tol_root, keep_real, max_iter=50):
    """Secant iteration on f' (variational derivative) from x0, x0 + h."""
    xa, xb = complex(x0), complex(x0 + h)
    ga = _f1(c, which, xa, rtol)[1]
    gb = _f1(c, which, xb, rtol)[1]
    for _ in range(max_iter):
        if gb == ga:
            break
        step = gb * (xb - xa) / (gb - ga)
        if keep_real:
            step = complex(step.real, 0.0)
        xa, ga = xb, gb
        xb = xb - step
        gb = _f1(c, which, xb, rtol)[1]
        if abs(step) <= tol_root * max(1.0, abs(xb)):
            break
    else:
        raise RefinementError("critical-point search did not converge", seed=x0)
    return xb


def _refine_cluster(c, which, center, size, rtol, tol_root, keep_real):
    """Two zeros near ``center``: either a double zero or a close pair.

    The critical point of f between them is a simple zero of f' and is found
    accurately; the pair is then c ± sqrt(-2f(c)/f''(c)) polished by Newton.
    A split below the evaluation noise is reported as a double zero.
    """
    h = max(1e-3 * size, 1e-7 * max(1.0, abs(center)))
    xc = _critical_point(c, which, center, h, rtol, tol_root, keep_real)
    f, _, nz = _f1(c, which, xc, rtol, derivative=False)
    hd = max(0.25 * size, 1e-6 * max(1.0, abs(xc)))
    fpp = (_f1(c, which, xc + hd, rtol)[1] - _f1(c, which, xc - hd, rtol)[1]) / (2 * hd)
    width = math.sqrt(2 * nz / abs(fpp)) if fpp != 0 else math.inf
    unresolved = [(xc, 2, abs(f) / max(nz, 1e-300), width)]
    if fpp == 0 or abs(f) <= nz:
        return unresolved
    d2 = -2 * f / fpp
    if keep_real:
        d2 = complex(d2.real, 0.0)
        if d2.real < 0 and which != "rho":
            # a self-adjoint problem has no conjugate pairs: unresolved double zero
            return unresolved
    d = cmath.sqrt(d2)
    if keep_real and d2.real < 0:
        d = complex(0.0, math.sqrt(-d2.real))
    out = []
    for sgn in (1, -1):
        seed = xc + sgn * d
        real_pair = keep_real and d.imag == 0
        x, fx, nzx, _ = _newton(c, which, seed, rtol, tol_root, real_pair)
        out.append((x, 1, abs(fx) / max(nzx, 1e-300), 0.0))
    if abs(out[0][0] - out[1][0]) <= 1e-10 * max(1.0, abs(xc)):
        return unresolved
    if keep_real and d.imag != 0:
        # conjugate pair: make exact mirror images
        x = out[0][0]
        if x.imag < 0:
            x = x.conjugate()
        out = [(x, 1, out[0][2], 0.0), (x.conjugate(), 1, out[0][2], 0.0)]
    return out


def _cluster_zeros(c, which, center, size, rtol, tol_root, keep_real):
    out = []
    for x, m, res, width in _refine_cluster(c, which, center, size, rtol, tol_root, keep_real):
        flags = ("double within resolution",) if m == 2 and width > 1e-10 * max(1.0, abs(x)) else ()
        out.append(LocatedZero(complex(x), m, which, (), float(res), flags, float(width if m == 2 else 0.0)))
    return out


def refine_zero(which: str, seed: complex, c: CoefficientSet, rtol: float = DEFAULT_RTOL,
                tol_root: float = 1e-14, keep_real: Optional[bool] = None) -> LocatedZero:
    """Polish a zero from ``seed``; multiplicity from a winding number around it.

    Plain Newton first; if the converged point carries multiplicity 2 it is
    re-polished as a cluster, for higher multiplicity by Newton with the
    multiplicity as step factor.
    """
    seed = complex(seed)
    if keep_real is None:
        keep_real = seed.imag == 0
    x, fx, nz, _ = _newton(c, which, seed, rtol, tol_root, keep_real)
    res, width, flags = abs(fx) / max(nz, 1e-300), 0.0, ()
    mult = multiplicity_at(c, which, x, rtol)
    if mult == 2:
        r = 1e-3 * max(1.0, abs(x))
        z = min(_cluster_zeros(c, which, x, r, rtol, tol_root, keep_real), key=lambda z: abs(z.lam - seed))
        x, res, width, flags = z.lam, z.refine_residual, z.uncertainty, z.flags
        if z.multiplicity == 1:
            mult = multiplicity_at(c, which, x, rtol, radius=0.4 * _pair_gap(c, which, x, r, rtol))
    elif mult > 2:
        x, fx, nz, _ = _newton(c, which, x, rtol, tol_root, keep_real, mult=mult)
        res = abs(fx) / max(nz, 1e-300)
    if mult < 1:
        raise RefinementError(f"no zero of {which} found near the seed", seed=seed)
    out = LocatedZero(complex(x), mult, which, (), float(res), flags, float(width))
    return _attach_error_bars(c, which, [out], rtol)[0]


def _attach_error_bars(c, which, zeros, rtol):
    """Simple zeros get uncertainty = evaluation noise / |f'|, their conditioning limit."""
    simple = [z for z in zeros if z.multiplicity == 1]
    if not simple:
        return zeros
    _, df, nz = evaluate(c, which, [z.lam for z in simple], True, min(rtol, REFINE_RTOL))
    for z, d, n in zip(simple, df, nz):
        bar = float(n / abs(d)) if d != 0 else math.inf
        z.uncertainty = max(z.uncertainty, bar)
    return zeros


def _pair_gap(c, which, x, r, rtol):
    """Distance from x to the other member of its cluster (or r if none)."""
    zs = _cluster_zeros(c, which, x, r, rtol, 1e-14, x.imag == 0)
    d = [abs(z.lam - x) for z in zs if abs(z.lam - x) > 0]
    return min(d) if d else r


def multiplicity_at(c, which, lam, rtol=DEFAULT_RTOL, radius=None, others=()) -> int:
    """Winding number on a small circle; the radius stays below 0.4 × the nearest other zero."""
    r = 1e-3 * max(1.0, abs(lam)) if radius is None else radius
    for o in others:
        d = abs(o - lam)
        if 0 < d < 2.5 * r:
            r = 0.4 * d
    rt = min(rtol, REFINE_RTOL)
    try:
        return winding_near(c, which, lam, r, rt)
    except ContourError:
        # a neighbour keeps |f| near the noise floor; retry tighter
        return winding_near(c, which, lam, r, rt * 0.1)


# ---------------------------------------------------------------------------
# enumeration


def natural_radii(which: str, N: int):
    """Radii in |λ|^{1/4} of nested disks, the last one bounding the search region."""
    if which == "rho":
        return [math.sqrt(2) * math.pi * (k + 0.5) for k in range(N + 1)]
    if which == "Dplus":
        return [2 * math.pi * (k + 0.5) for k in range(N + 1)]
    return [2 * math.pi * k for k in range(1, N + 1)]


@dataclass
class _Cell:
    spec: ContourSpec
    count: int
    sampled: Optional[_Sampled] = None
    inner: Optional[_Sampled] = None   # for full annuli assembled from two disks
    depth: int = 0


def _moments(parts, center, scale):
    """(μ0, μ1, μ2) of the zeros in shifted/scaled coordinates."""
    mu = np.zeros(3, dtype=complex)
    for s, sign in parts:
        x = (s.lam - center) / scale
        g = s.df / s.f * s.w
        for k in range(3):
            mu[k] += sign * np.sum(x ** k * g)
    return mu / (2j * math.pi)


def _seeds(cell: _Cell, center, scale):
    if cell.inner is None:
        parts = [(cell.sampled, 1.0)]
    else:
        parts = [(cell.sampled, 1.0), (cell.inner, -1.0)]
    mu = _moments(parts, center, scale)
    m = cell.count
    if m == 1:
        return [center + scale * mu[1] / mu[0]]
    s1, s2 = mu[1], mu[2]
    e2 = (s1 * s1 - s2) / 2
    disc = cmath.sqrt(s1 * s1 - 4 * e2)
    return [center + scale * (s1 + disc) / 2, center + scale * (s1 - disc) / 2]


def _angle_cut(th0, th1, frac):
    tm = th0 + frac * (th1 - th0)
    if abs(math.remainder(tm, math.pi)) < 1e-3:
        tm = th0 + (frac - 0.07) * (th1 - th0)  # never cut along the real axis
    return tm


def _split_options(cell: _Cell):
    """Alternative ways to cut a cell in two, tried in order."""
    s = cell.spec
    full_turn = (math.pi / 2, math.pi / 2 + 2 * math.pi)
    if s.kind == "disk-lambda":
        r = s.radius
        return [[sector(0.0, r * f, *full_turn), sector(r * f, r, *full_turn)]
                for f in (1 / 16, 1 / 11, 1 / 23)]
    full = abs(s.th1 - s.th0 - 2 * math.pi) < 1e-12
    if full:
        # cut along the imaginary axis first, rotated slightly on failure
        return [[sector(s.r0, s.r1, s.th0 + d, s.th0 + d + math.pi),
                 sector(s.r0, s.r1, s.th0 + d + math.pi, s.th1 + d)] for d in (0.0, 0.13, -0.21)]
    lo = max(s.r0, s.r1 / 64)
    radial = [[sector(s.r0, rm, s.th0, s.th1), sector(rm, s.r1, s.th0, s.th1)]
              for rm in (lo ** (1 - f) * s.r1 ** f for f in (0.5, 0.43, 0.61))]
    angular = [[sector(s.r0, s.r1, s.th0, tm), sector(s.r0, s.r1, tm, s.th1)]
               for tm in (_angle_cut(s.th0, s.th1, f) for f in (0.5, 0.41, 0.63))]
    return radial + angular if cell.depth % 2 == 0 else angular + radial


def _subdivide(c, which, cell, rtol):
    problems = []
    for option in _split_options(cell):
        try:
            children = []
            for spec in option:
                sm = _sample(c, which, spec, derivative=True, rtol=rtol, perturb=False)
                children.append(_Cell(sm.spec, sm.winding, sm, None, cell.depth + 1))
        except ContourError as exc:
            problems.append(str(exc))
            continue
        if sum(ch.count for ch in children) == cell.count:
            return children
        problems.append(f"parent count {cell.count} != children {[ch.count for ch in children]}")
    raise SubdivisionError(f"{which}: every cut failed: " + "; ".join(problems))


def _locate_cell(c, which, cell, rtol, tol_root, found, depth_cap=12):
    if cell.count == 0:
        return
    if cell.count > 2:
        if cell.depth >= depth_cap:
            raise SubdivisionError(f"{which}: could not isolate zeros (count {cell.count})")
        for ch in _subdivide(c, which, cell, rtol):
            _locate_cell(c, which, ch, rtol, tol_root, found, depth_cap)
        return
    s = cell.spec
    if s.kind == "sector":
        rm = 0.5 * (s.r0 + s.r1)
        full = abs(s.th1 - s.th0 - 2 * math.pi) < 1e-12
        center = 0j if full else rm * cmath.exp(0.5j * (s.th0 + s.th1))
        size = s.r1
    else:
        center, size = s.center, s.radius
    symmetric = s.conj_symmetric
    seeds = _seeds(cell, center, size)
    if cell.count == 2 and abs(seeds[0] - seeds[1]) < 1e-3 * size:
        mid = 0.5 * (seeds[0] + seeds[1])
        keep_real = symmetric and abs(mid.imag) < 1e-6 * size
        if keep_real:
            mid = complex(mid.real, 0.0)
        found.extend(_cluster_zeros(c, which, mid, abs(seeds[0] - seeds[1]) + 1e-9 * size,
                                    rtol, tol_root, keep_real))
        return
    if cell.count == 1 and symmetric:
        seeds = [complex(seeds[0].real, 0.0)]
    if cell.count == 2 and symmetric and abs(seeds[0].imag + seeds[1].imag) < 1e-6 * size \
            and abs(seeds[0].imag) > 1e-6 * size:
        # conjugate pair in a symmetric cell: refine one, mirror the other
        up = seeds[0] if seeds[0].imag > 0 else seeds[1]
        x, fx, nz, _ = _newton(c, which, up, rtol, tol_root, False)
        found.append(LocatedZero(complex(x), 1, which, (), float(abs(fx) / nz)))
        found.append(LocatedZero(complex(x).conjugate(), 1, which, (), float(abs(fx) / nz)))
        return
    local = []
    for sd in seeds:
        keep_real = symmetric and abs(sd.imag) < 1e-6 * size
        if keep_real:
            sd = complex(sd.real, 0.0)
        x, fx, nz, _ = _newton(c, which, sd, rtol, tol_root, keep_real)
        local.append(LocatedZero(complex(x), 1, which, (), float(abs(fx) / nz)))
    if len(local) == 2 and abs(local[0].lam - local[1].lam) <= 1e-9 * max(1.0, abs(local[0].lam)):
        # both seeds fell into one basin: treat as a cluster around that point
        mid = local[0].lam
        keep_real = symmetric and mid.imag == 0
        local = _cluster_zeros(c, which, mid, 1e-6 * max(1.0, abs(mid)), rtol, tol_root, keep_real)
    found.extend(local)


def find_zeros(c: CoefficientSet, which: str, N: int, rtol: float = DEFAULT_RTOL,
               tol_root: float = 1e-14):
    """All zeros of one function in its natural search disk (unlabeled).

    Returns ``(zeros, counts)`` where ``counts`` lists the disk counts at the
    nested natural radii.
    """
    radii = natural_radii(which, N)
    disks = []
    for R in radii:
        sm = _sample(c, which, disk_lambda(0.0, R ** 4), derivative=True, rtol=rtol)
        disks.append(sm)
    counts = [d.winding for d in disks]
    found: list = []
    prev = None
    for k, d in enumerate(disks):
        if prev is None:
            cell = _Cell(d.spec, d.winding, d, None, 0)
        else:
            n_ann = d.winding - prev.winding
            if n_ann < 0:
                raise SubdivisionError(f"{which}: nested disk counts decrease ({counts})")
            cell = _Cell(sector(prev.spec.radius, d.spec.radius, math.pi / 2, math.pi / 2 + 2 * math.pi),
                         n_ann, d, prev, 0)
        _locate_cell(c, which, cell, rtol, tol_root, found)
        prev = d
    # one entry per distinct zero, multiplicity by winding on a small circle
    merged = _merge(found)
    lams = [z.lam for z in merged]
    for z in merged:
        if z.multiplicity == 1:
            m = multiplicity_at(c, which, z.lam, rtol, others=lams)
            if m != z.multiplicity:
                z.flags = z.flags + (f"winding multiplicity {m}",)
                z.multiplicity = max(m, 1)
    _attach_error_bars(c, which, merged, rtol)
    total = sum(z.multiplicity for z in merged)
    if total != counts[-1]:
        raise SubdivisionError(f"{which}: located multiplicity {total} != contour count {counts[-1]}")
    return merged, counts


def _merge(found, tol=1e-9):
    out: list = []
    for z in sorted(found, key=lambda z: (z.lam.real, z.lam.imag)):
        if out and abs(out[-1].lam - z.lam) <= tol * max(1.0, abs(z.lam)):
            prev = out[-1]
            prev.multiplicity += z.multiplicity
            continue
        out.append(z)
    return out


# ---------------------------------------------------------------------------
# labels


def _is_real(z: LocatedZero, tol=1e-9) -> bool:
    return abs(z.lam.imag) <= tol * max(1.0, abs(z.lam))


def label_eigenvalues(zeros, periodic: bool):
    """Periodic: λ0+, λ2-, λ2+, ...; antiperiodic: λ1-, λ1+, λ3-, ... (in place)."""
    real = sorted([z for z in zeros if _is_real(z)], key=lambda z: z.lam.real)
    for z in zeros:
        if not _is_real(z):
            z.flags = z.flags + ("non-real eigenvalue of a self-adjoint problem",)
        else:
            z.lam = complex(z.lam.real, 0.0)
    if periodic:
        seq = [(0, "+")]
        n = 2
    else:
        seq = []
        n = 1
    need = sum(z.multiplicity for z in real)
    while len(seq) < need:
        seq += [(n, "-"), (n, "+")]
        n += 2
    k = 0
    for z in real:
        z.labels = tuple(seq[k:k + z.multiplicity])
        k += z.multiplicity
    return zeros


def label_resonances(zeros):
    """r0-, then pairs r_n± by decreasing real part (in place); leftovers flagged."""
    pool = []
    for z in zeros:
        if _is_real(z):
            z.lam = complex(z.lam.real, 0.0)
        for _ in range(z.multiplicity):
            pool.append(z)
    for z in zeros:
        z.labels = ()
    reals = [z for z in pool if z.lam.imag == 0]
    if not reals:
        for z in zeros:
            z.flags = z.flags + ("no real resonance",)
        return zeros
    top = max(reals, key=lambda z: z.lam.real)
    pool.remove(top)
    assigned = {id(top): [(0, "-")]}
    pool.sort(key=lambda z: (-z.lam.real, z.lam.imag))
    n = 1
    while pool:
        z = pool.pop(0)
        if z.lam.imag != 0:
            partner = next((w for w in pool if w is not z and abs(w.lam - z.lam.conjugate())
                            <= 1e-8 * max(1.0, abs(z.lam))), None)
            if partner is None:
                z.flags = z.flags + ("unpaired complex resonance",)
                continue
            pool.remove(partner)
            lower, upper = (z, partner) if z.lam.imag < 0 else (partner, z)
            assigned.setdefault(id(lower), []).append((n, "+"))
            assigned.setdefault(id(upper), []).append((n, "-"))
        else:
            partner = next((w for w in pool if w.lam.imag == 0), None)
            if partner is None:
                z.flags = z.flags + ("unpaired real resonance (left unlabeled)",)
                continue
            pool.remove(partner)
            assigned.setdefault(id(z), []).append((n, "+"))
            assigned.setdefault(id(partner), []).append((n, "-"))
        n += 1
    for z in zeros:
        labs = assigned.get(id(z), [])
        z.labels = tuple(sorted(labs, key=lambda t: (t[0], t[1] == "+")))
    return zeros


@dataclass
class ZeroTable:
    periodic: list
    antiperiodic: list
    resonances: list
    counts: dict = field(default_factory=dict)
    N: int = 0

    def all(self):
        return self.periodic + self.antiperiodic + self.resonances

    def find(self, which: str, n: int, sign: str):
        table = {"Dplus": self.periodic, "Dminus": self.antiperiodic, "rho": self.resonances}[which]
        for z in table:
            if (n, sign) in z.labels:
                return z
        return None

    def eigenvalue(self, n: int, sign: str):
        z = self.find("Dplus" if n % 2 == 0 else "Dminus", n, sign)
        return None if z is None else z.lam.real

    def resonance(self, n: int, sign: str):
        z = self.find("rho", n, sign)
        return None if z is None else z.lam

    def to_json(self) -> str:
        rows = []
        for z in self.all():
            rows.extend(z.table_rows())
        return json.dumps(rows, indent=1)


def enumerate_and_label(c: CoefficientSet, N: int, rtol: float = DEFAULT_RTOL,
                        tol_root: float = 1e-14, which=WHICH, N_rho: Optional[int] = None) -> ZeroTable:
    """Zeros of D₊, D₋ and ρ in their search regions, with the standard labels.

    Regions: |λ|^{1/4} < 2π(N+½) for D₊, < 2πN for D₋, |λ| < 4(π(N+½))⁴ for ρ
    (with ``N_rho`` in place of N when given).
    """
    if N < 1 or (N_rho is not None and N_rho < 1):
        raise PreconditionError("N must be at least 1")
    out = {}
    counts = {}
    for w in which:
        zs, cnt = find_zeros(c, w, N if (w != "rho" or N_rho is None) else N_rho, rtol, tol_root)
        counts[w] = cnt
        if w == "Dplus":
            label_eigenvalues(zs, periodic=True)
        elif w == "Dminus":
            label_eigenvalues(zs, periodic=False)
        else:
            label_resonances(zs)
        out[w] = zs
    return ZeroTable(out.get("Dplus", []), out.get("Dminus", []), out.get("rho", []), counts, N)


# ---------------------------------------------------------------------------
# real-axis scan


def s_to_lambda(s):
    s = np.asarray(s, dtype=float)
    return np.sign(s) * s ** 4


def lambda_to_s(lam):
    lam = np.asarray(lam, dtype=float)
    return np.sign(lam) * np.abs(lam) ** 0.25


def real_sign_changes(c: CoefficientSet, which: str, lam_min: float, lam_max: float,
                      step: float = math.pi / 40, rtol: float = DEFAULT_RTOL,
                      xtol: float = 1e-14):
    """Odd-multiplicity real zeros on [lam_min, lam_max] by a scan in s = sign(λ)|λ|^{1/4}."""
    s0, s1 = float(lambda_to_s(lam_min)), float(lambda_to_s(lam_max))
    n = max(2, int(math.ceil((s1 - s0) / step)) + 1)
    s = np.linspace(s0, s1, n)
    lam = s_to_lambda(s)
    f = evaluate(c, which, lam, rtol=rtol)[0].real
    roots = []

    def g(x):
        return evaluate(c, which, [x], rtol=rtol)[0][0].real

    for i in range(n - 1):
        if f[i] == 0.0:
            roots.append(float(lam[i]))
        elif f[i] * f[i + 1] < 0:
            roots.append(brentq(g, lam[i], lam[i + 1], xtol=xtol * max(1.0, abs(lam[i])), rtol=1e-15))
    if f[-1] == 0.0:
        roots.append(float(lam[-1]))
    return roots


def zero_table_json(zeros) -> str:
    rows = []
    for z in zeros:
        rows.extend(z.table_rows())
    return json.dumps(rows, indent=1)
