"""Periodic coefficients p, q as finite real Fourier series.

A :class:`CoefficientSet` stores

    p(t) = p_const + sum_k p_cos[k-1] cos(2πkt) + p_sin[k-1] sin(2πkt)

and the same for q. Derivatives are exact termwise, so the companion system
sees an exact p'. The module also provides the Fourier data and moment
integrals the asymptotic formulas need.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConsistencyError, InputError, PreconditionError, ToleranceError

TWO_PI = 2.0 * math.pi

PRESETS = ("zero", "cos1")


# ---------------------------------------------------------------------------
# quadrature


def _gl(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def composite_gl(f: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                 panels: int, order: int = 16):
    """Composite Gauss-Legendre rule of ``panels`` equal panels on [a, b]."""
    x, w = _gl(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return np.sum(weights * f(nodes))


def panels_for(kmax: int, length: float = 1.0, order: int = 16) -> int:
    """Panel count giving at least 8 nodes per wavelength of mode ``kmax``."""
    per_unit = 8 * max(int(kmax), 1)
    return max(1, int(math.ceil(per_unit * length / order)))


def integrate_doubling(f, a: float, b: float, kmax: int, rtol: float = 1e-10,
                       order: int = 16, max_doublings: int = 12, atol: float = 1e-300):
    """Composite GL with panel doubling until successive values agree."""
    n = panels_for(kmax, b - a, order)
    prev = composite_gl(f, a, b, n, order)
    for _ in range(max_doublings):
        n *= 2
        cur = composite_gl(f, a, b, n, order)
        if abs(cur - prev) <= rtol * abs(cur) + atol:
            return cur
        prev = cur
    raise ToleranceError(f"quadrature on [{a}, {b}] did not settle to {rtol:g}")


def triangle_doubling(g, nu: float, kmax: int, rtol: float = 1e-10, order: int = 16,
                      max_doublings: int = 6, atol: float = 1e-300):
    """∫_0^ν dt ∫_0^t g(s, t) ds via s = t·u and a tensor composite GL rule."""
    x, w = _gl(order)

    def rule(panels):
        edges = np.linspace(0.0, 1.0, panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        return ((mid[:, None] + half[:, None] * x[None, :]).ravel(),
                (half[:, None] * w[None, :]).ravel())

    def value(panels):
        u, wu = rule(panels)
        t = nu * u
        wt = nu * wu
        s = t[:, None] * u[None, :]
        return np.sum(wt[:, None] * t[:, None] * wu[None, :] * g(s, t[:, None]))

    n = panels_for(kmax, nu, order)
    prev = value(n)
    for _ in range(max_doublings):
        n *= 2
        cur = value(n)
        if abs(cur - prev) <= rtol * abs(cur) + atol:
            return cur
        prev = cur
    raise ToleranceError(f"triangle quadrature (nu={nu}) did not settle to {rtol:g}")


# ---------------------------------------------------------------------------
# coefficient container


def _tup(xs) -> tuple:
    return tuple(float(v) for v in (xs if xs is not None else ()))


@dataclass(frozen=True)
class CoefficientSet:
    """Real 1-periodic p, q given by their Fourier coefficients."""

    p_const: float = 0.0
    p_cos: tuple = ()
    p_sin: tuple = ()
    q_const: float = 0.0
    q_cos: tuple = ()
    q_sin: tuple = ()
    kappa: float = field(default=float("nan"), compare=False)

    def __post_init__(self):
        for name in ("p_cos", "p_sin", "q_cos", "q_sin"):
            object.__setattr__(self, name, _tup(getattr(self, name)))
        object.__setattr__(self, "p_const", float(self.p_const))
        object.__setattr__(self, "q_const", float(self.q_const))
        # pad cos/sin lists to a common length per coefficient
        for a, b in (("p_cos", "p_sin"), ("q_cos", "q_sin")):
            u, v = getattr(self, a), getattr(self, b)
            n = max(len(u), len(v))
            object.__setattr__(self, a, u + (0.0,) * (n - len(u)))
            object.__setattr__(self, b, v + (0.0,) * (n - len(v)))
        vals = (self.p_const, self.q_const) + self.p_cos + self.p_sin + self.q_cos + self.q_sin
        if not all(math.isfinite(v) for v in vals):
            raise InputError("coefficients must be finite real numbers")
        object.__setattr__(self, "kappa", _kappa(self))

    # -- basic evaluation -------------------------------------------------
    @property
    def kmax(self) -> int:
        return max(len(self.p_cos), len(self.q_cos), 1)

    def arrays(self):
        """Tuple consumed by the integration kernels."""
        return (self.p_const, np.array(self.p_cos, dtype=float), np.array(self.p_sin, dtype=float),
                self.q_const, np.array(self.q_cos, dtype=float), np.array(self.q_sin, dtype=float))

    def p(self, t):
        return _series(self.p_const, self.p_cos, self.p_sin, t)

    def p_prime(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for k, (a, b) in enumerate(zip(self.p_cos, self.p_sin), start=1):
            w = TWO_PI * k
            out = out + w * (b * np.cos(w * t) - a * np.sin(w * t))
        return out

    def q(self, t):
        return _series(self.q_const, self.q_cos, self.q_sin, t)

    @property
    def q_is_zero(self) -> bool:
        return self.q_const == 0.0 and not any(self.q_cos) and not any(self.q_sin)

    @property
    def is_zero(self) -> bool:
        return self.q_is_zero and self.p_const == 0.0 and not any(self.p_cos) and not any(self.p_sin)

    # -- transformations --------------------------------------------------
    def scaled(self, s: float) -> "CoefficientSet":
        """Both p and q multiplied by ``s``."""
        s = float(s)
        return CoefficientSet(s * self.p_const, [s * v for v in self.p_cos], [s * v for v in self.p_sin],
                              s * self.q_const, [s * v for v in self.q_cos], [s * v for v in self.q_sin])

    def shifted(self, t0: float) -> "CoefficientSet":
        """Coefficients of t -> p(t + t0), q(t + t0)."""
        def rot(cs, ss):
            c2, s2 = [], []
            for k, (a, b) in enumerate(zip(cs, ss), start=1):
                ph = TWO_PI * k * t0
                c, s = math.cos(ph), math.sin(ph)
                c2.append(a * c + b * s)
                s2.append(b * c - a * s)
            return c2, s2

        pc, ps = rot(self.p_cos, self.p_sin)
        qc, qs = rot(self.q_cos, self.q_sin)
        return CoefficientSet(self.p_const, pc, ps, self.q_const, qc, qs)

    # -- serialization ----------------------------------------------------
    def to_dict(self) -> dict:
        return {"p": {"const": self.p_const, "cos": list(self.p_cos), "sin": list(self.p_sin)},
                "q": {"const": self.q_const, "cos": list(self.q_cos), "sin": list(self.q_sin)}}

    @classmethod
    def from_dict(cls, d: dict) -> "CoefficientSet":
        if not isinstance(d, dict):
            raise InputError("coefficient JSON must be an object with keys 'p' and 'q'")
        unknown = set(d) - {"p", "q"}
        if unknown:
            raise InputError(f"unknown coefficient keys: {sorted(unknown)}")

        def part(name):
            sub = d.get(name, {}) or {}
            if not isinstance(sub, dict):
                raise InputError(f"'{name}' must be an object with const/cos/sin")
            bad = set(sub) - {"const", "cos", "sin"}
            if bad:
                raise InputError(f"unknown keys in '{name}': {sorted(bad)}")
            try:
                const = float(sub.get("const", 0.0))
                cos = [float(v) for v in sub.get("cos", [])]
                sin = [float(v) for v in sub.get("sin", [])]
            except (TypeError, ValueError) as exc:
                raise InputError(f"non-numeric entry in '{name}': {exc}") from None
            return const, cos, sin

        pc, pcos, psin = part("p")
        qc, qcos, qsin = part("q")
        return cls(pc, pcos, psin, qc, qcos, qsin)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _series(c0, cs, ss, t):
    t = np.asarray(t, dtype=float)
    out = np.full_like(t, c0)
    for k, (a, b) in enumerate(zip(cs, ss), start=1):
        w = TWO_PI * k
        if a:
            out = out + a * np.cos(w * t)
        if b:
            out = out + b * np.sin(w * t)
    return out


def _kappa(c: CoefficientSet) -> float:
    """κ = ‖p‖₁ + ‖p'‖₁ + ‖q‖₁ by panel doubling (the integrand has kinks)."""
    if c.is_zero:
        return 0.0

    def f(t):
        return np.abs(c.p(t)) + np.abs(c.p_prime(t)) + np.abs(c.q(t))

    return float(integrate_doubling(f, 0.0, 1.0, c.kmax, rtol=1e-8, max_doublings=14))


def preset(name: str) -> CoefficientSet:
    if name == "zero":
        return CoefficientSet()
    if name == "cos1":
        return CoefficientSet(p_cos=[1.0])
    raise InputError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")


def load_coeffs(path: str) -> CoefficientSet:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read coefficient file {path}: {exc}") from None
    return CoefficientSet.from_dict(data)


def random_coeffs(rng: np.random.Generator, kmax: int = 3, amp: float = 1.0,
                  with_q: bool = True, zero_mean_p: bool = False) -> CoefficientSet:
    """Random trigonometric coefficients with mode amplitudes decaying like 1/k."""
    decay = 1.0 / np.arange(1, kmax + 1)
    pc = 0.0 if zero_mean_p else amp * rng.uniform(-1, 1)
    p_cos = amp * decay * rng.uniform(-1, 1, kmax)
    p_sin = amp * decay * rng.uniform(-1, 1, kmax)
    if with_q:
        qc = amp * rng.uniform(-1, 1)
        q_cos = amp * decay * rng.uniform(-1, 1, kmax)
        q_sin = amp * decay * rng.uniform(-1, 1, kmax)
    else:
        qc, q_cos, q_sin = 0.0, [], []
    return CoefficientSet(pc, p_cos, p_sin, qc, q_cos, q_sin)


# ---------------------------------------------------------------------------
# operations


def eval_coeffs(c: CoefficientSet, t: float):
    """(p(t), p'(t), q(t)) as floats."""
    return float(c.p(t)), float(c.p_prime(t)), float(c.q(t))


def fourier_p0(c: CoefficientSet) -> float:
    """Mean of p over one period."""
    return c.p_const


def fourier_p_n(c: CoefficientSet, n: int) -> complex:
    """∫₀¹ p(t) e^{-2πint} dt."""
    if n == 0:
        return complex(c.p_const)
    m = abs(n)
    if m > len(c.p_cos):
        return 0j
    a, b = c.p_cos[m - 1], c.p_sin[m - 1]
    return complex(a, -b) / 2 if n > 0 else complex(a, b) / 2


def fourier_pprime_n(c: CoefficientSet, n: int) -> complex:
    """∫₀¹ p'(t) e^{-2πint} dt for n ≥ 1 (equals 2πin times the mode of p)."""
    if n < 1:
        raise PreconditionError("fourier_pprime_n needs n >= 1")
    if n > len(c.p_cos):
        return 0j
    a, b = c.p_cos[n - 1], c.p_sin[n - 1]
    return math.pi * n * complex(b, a)


def fourier_q_n(c: CoefficientSet, n: int) -> complex:
    if n == 0:
        return complex(c.q_const)
    m = abs(n)
    if m > len(c.q_cos):
        return 0j
    a, b = c.q_cos[m - 1], c.q_sin[m - 1]
    return complex(a, -b) / 2 if n > 0 else complex(a, b) / 2


def perturbation_moments(c: CoefficientSet, rtol: float = 1e-10):
    """(v1, v2) with v_ν = ∫₀^ν dt ∫₀^t p(s)p(t)(ν-t+s)(t-s) ds, p extended periodically."""
    out = []
    for nu in (1.0, 2.0):
        def g(s, t, nu=nu):
            return c.p(s) * c.p(t) * (nu - t + s) * (t - s)

        out.append(float(triangle_doubling(g, nu, c.kmax, rtol=rtol, atol=1e-15)))
    return out[0], out[1]


def primitive(c: CoefficientSet, t):
    """P(t) = ∫₀ᵗ p for p with zero mean (closed form)."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t) + c.p_const * t
    for k, (a, b) in enumerate(zip(c.p_cos, c.p_sin), start=1):
        w = TWO_PI * k
        out = out + (a * np.sin(w * t) + b * (1.0 - np.cos(w * t))) / w
    return out


@dataclass(frozen=True)
class AmplitudeA:
    value: float
    via_moments: float
    via_primitive: float
    via_correlation: float
    degenerate: bool


def amplitude_A(c: CoefficientSet, rtol: float = 1e-8) -> AmplitudeA:
    """The ε⁴-gap amplitude A computed three independent ways.

    The primitive route uses the variance of P(t) = ∫₀ᵗ p over one period,
    which is the shift-invariant reading of ∫₀¹(∫₀ᵗ p)²; the two agree when
    P has zero mean (for instance p = cos 2πt).
    """
    if abs(c.p_const) > 1e-14:
        raise PreconditionError("amplitude_A requires a zero-mean p")
    if not any(c.p_cos) and not any(c.p_sin):
        return AmplitudeA(0.0, 0.0, 0.0, 0.0, True)

    v1, v2 = perturbation_moments(c)
    a_i = v2 / 12.0 - 4.0 * v1 / 3.0

    mean_p = float(integrate_doubling(lambda t: primitive(c, t), 0.0, 1.0, c.kmax, atol=1e-16))
    a_ii = float(integrate_doubling(lambda t: (primitive(c, t) - mean_p) ** 2, 0.0, 1.0,
                                    c.kmax, atol=1e-16))

    # ∫₀¹ u(u-1) ∫_u^1 p(t)p(t-u) dt du, inner variable t = u + (1-u)w
    def g(w, u):
        t = u + (1.0 - u) * w
        return u * (u - 1.0) * (1.0 - u) * c.p(t) * c.p(t - u)

    x, wts = _gl(16)
    a_iii = None
    n = panels_for(c.kmax)
    prev = None
    for _ in range(8):
        edges = np.linspace(0.0, 1.0, n + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        wq = (half[:, None] * wts[None, :]).ravel()
        cur = float(np.sum(wq[:, None] * wq[None, :] * g(nodes[None, :], nodes[:, None])))
        if prev is not None and abs(cur - prev) <= 1e-11 * abs(cur) + 1e-16:
            a_iii = cur
            break
        prev = cur
        n *= 2
    if a_iii is None:
        raise ToleranceError("correlation form of A did not converge")
    if a_iii < -rtol * abs(a_ii):
        raise ConsistencyError(f"correlation form of A has the wrong sign ({a_iii:.3e})")
    a_iii = abs(a_iii)

    ref = max(abs(a_ii), 1e-300)
    for name, val in (("moments", a_i), ("correlation", a_iii)):
        if abs(val - a_ii) > rtol * ref:
            raise ConsistencyError(
                f"A via {name} = {val:.15g} disagrees with primitive form {a_ii:.15g}")
    return AmplitudeA(a_ii, a_i, a_ii, a_iii, False)


def coeffs_from_sequences(p: Sequence[float] | None = None, q: Sequence[float] | None = None):
    """Convenience: p and q given as [const, cos1, sin1, cos2, sin2, ...]."""
    def split(v):
        v = list(v or [0.0])
        return v[0], v[1::2], v[2::2]

    return CoefficientSet(*split(p), *split(q))
