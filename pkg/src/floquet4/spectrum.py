"""Bands, gaps and the multiplicity-4 set on the real axis.

The real axis is cut at every real zero of D₊, D₋ and ρ. On each piece
between consecutive cuts ρ keeps its sign, and where ρ > 0 each of the two
real branches Δ₁ ≥ Δ₂ lies either entirely inside or entirely outside
[-1, 1] (crossing ±1 would be an eigenvalue, i.e. a cut). Branch pieces
inside the strip are linked across cuts: straight through ordinary cuts,
crosswise through even resonances, into a fold at odd resonances, and they
terminate where the branch reaches ±1. Each linked chain is one band σₙ;
its folds decide the case i₁ / i₂ / i₃.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .coeffs import CoefficientSet
from .discriminants import branches_inside, bundles, spectral_indicator
from .errors import ClassificationError, PreconditionError
from .monodromy import DEFAULT_RTOL
from .reference import CLAMP_X
from .zeros import (LocatedZero, ZeroTable, enumerate_and_label, evaluate, lambda_to_s,
                    multiplicity_at, s_to_lambda)

SCHEMA_VERSION = 1
MERGE_TOL = 1e-11        # cuts closer than this (relative) are one event
COINCIDE_TOL = 1e-7      # eigenvalue/resonance coincidence for endpoint precedence
SCAN_PER_Z = 40          # cross-check samples per unit of s = sign(λ)|λ|^{1/4}


@dataclass
class Endpoint:
    lam: float
    kind: str            # periodic | antiperiodic | resonance | cutoff
    label: Optional[str] = None

    def to_dict(self):
        return {"lambda": self.lam, "kind": self.kind, "label": self.label}


@dataclass
class Band:
    n: Optional[int]
    closure: tuple
    case_tags: tuple
    endpoints: tuple
    sub_arcs: dict = field(default_factory=dict)
    folds: tuple = ()

    @property
    def case_tag(self) -> str:
        return "+".join(self.case_tags)

    def to_dict(self):
        return {"n": self.n, "closure": list(self.closure), "case": self.case_tag,
                "endpoints": [e.to_dict() for e in self.endpoints],
                "sub_arcs": {k: list(v) for k, v in self.sub_arcs.items()},
                "folds": list(self.folds)}


@dataclass
class SpectrumReport:
    bands: list
    gaps: list
    mult4: list
    eigen_table: list
    resonance_table: list
    provenance: dict
    warnings: list = field(default_factory=list)
    scan_range: tuple = (0.0, 0.0)

    def to_dict(self):
        return {"schema_version": SCHEMA_VERSION,
                "bands": [b.to_dict() for b in self.bands],
                "gaps": [list(g) for g in self.gaps],
                "mult4": [list(g) for g in self.mult4],
                "eigen_table": self.eigen_table,
                "resonance_table": self.resonance_table,
                "scan_range": list(self.scan_range),
                "provenance": self.provenance,
                "warnings": list(self.warnings)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, default=_jsonable)

    def indicator_expected(self, lam: float) -> int:
        """Indicator implied by the report: 4 on 𝔖₄, 2 on other bands, else 0."""
        if any(a < lam < b for a, b in self.mult4):
            return 4
        if any(b.closure[0] < lam < b.closure[1] for b in self.bands):
            return 2
        return 0


def _jsonable(v):
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    raise TypeError(type(v))


# ---------------------------------------------------------------------------
# interval helpers


def merge_intervals(iv, tol=0.0):
    out = []
    for a, b in sorted(iv):
        if out and a <= out[-1][1] + tol:
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return out


def intersect_intervals(x, y):
    out = []
    for a, b in x:
        for c, d in y:
            lo, hi = max(a, c), min(b, d)
            if lo < hi:
                out.append((lo, hi))
    return merge_intervals(out)


def complement(iv, lo, hi):
    out, cur = [], lo
    for a, b in merge_intervals(iv):
        if a > cur:
            out.append((cur, min(a, hi)))
        cur = max(cur, b)
    if cur < hi:
        out.append((cur, hi))
    return [(a, b) for a, b in out if b > a]


# ---------------------------------------------------------------------------
# events and pieces


@dataclass
class _Event:
    lam: float
    periodic: list = field(default_factory=list)       # LocatedZero of D₊ here
    antiperiodic: list = field(default_factory=list)
    resonance: list = field(default_factory=list)
    cutoff: bool = False

    @property
    def rho_mult(self) -> int:
        return sum(z.multiplicity for z in self.resonance)


def _events(table: ZeroTable, lo: float, hi: float):
    pts = []
    for kind, zs in (("periodic", table.periodic), ("antiperiodic", table.antiperiodic),
                     ("resonance", table.resonances)):
        for z in zs:
            if z.lam.imag == 0 and lo < z.lam.real < hi:
                pts.append((z.lam.real, kind, z))
    pts.sort(key=lambda t: t[0])
    events: list = []
    for lam, kind, z in pts:
        if events and abs(lam - events[-1].lam) <= MERGE_TOL * max(1.0, abs(lam)):
            ev = events[-1]
        else:
            ev = _Event(lam)
            events.append(ev)
        getattr(ev, kind).append(z)
    return events


def _branch_values(b):
    """(upper, lower) real branch values, or None where ρ < 0."""
    r = b.rho.real
    if r < 0:
        return None
    s = math.sqrt(r)
    t1 = b.T1.real
    return t1 + s, t1 - s


@dataclass
class _Piece:
    idx: int           # interval index
    branch: int        # 0 upper, 1 lower
    a: float
    b: float


def _label_str(lab):
    return None if lab is None else f"{lab[0]}{lab[1]}"


class _Linker:
    """Union of branch pieces into chains with recorded terminals and folds."""

    def __init__(self):
        self.parent = {}
        self.terminals = {}   # piece key -> list of (Endpoint, side)
        self.folds = {}       # piece key -> list of (lam, opens) with opens 'right'|'left'

    def add(self, key):
        self.parent.setdefault(key, key)

    def find(self, k):
        while self.parent[k] != k:
            self.parent[k] = self.parent[self.parent[k]]
            k = self.parent[k]
        return k

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def assemble(c: CoefficientSet, lambda_max: float, rtol: float = DEFAULT_RTOL,
             table: Optional[ZeroTable] = None, tol_root: float = 1e-14,
             scan: bool = True) -> SpectrumReport:
    """Bands, gaps and 𝔖₄ below ``lambda_max`` from the zero tables and branch data."""
    if lambda_max <= 0:
        raise PreconditionError("lambda_max must be positive")
    if lambda_max ** 0.25 > CLAMP_X:
        raise PreconditionError("lambda_max beyond the overflow clamp")
    if table is None:
        s = lambda_max ** 0.25
        N = max(1, int(math.ceil(s / (2 * math.pi))))
        N_rho = max(1, int(math.ceil(s / (math.sqrt(2) * math.pi) - 0.5)))
        table = enumerate_and_label(c, N, rtol, tol_root, N_rho=N_rho)
    warnings = []
    for z in table.all():
        for fl in z.flags:
            if fl != "double within resolution":
                warnings.append(f"{z.which} zero at {z.lam}: {fl}")
    real_pts = [z.lam.real for z in table.all() if z.lam.imag == 0 and z.lam.real < lambda_max]
    if not real_pts:
        raise ClassificationError("no real zeros below lambda_max; raise lambda_max")
    lo = min(real_pts)
    lo = lo - max(1.0, 1e-3 * abs(lo))
    events = _events(table, lo, lambda_max)
    cuts = [lo] + [e.lam for e in events] + [lambda_max]
    nint = len(cuts) - 1

    # branch data at interval midpoints and at every event
    mids = [0.5 * (cuts[i] + cuts[i + 1]) for i in range(nint)]
    mb = bundles(c, mids, rtol=rtol)
    eb = bundles(c, [e.lam for e in events], rtol=rtol) if events else []
    inside = []      # per interval: (upper_in, lower_in) or None when ρ < 0
    for b in mb:
        inside.append(branches_inside(b))
    if inside[0] and any(inside[0]):
        raise ClassificationError("spectrum extends below the lowest tabulated zero; "
                                  "enlarge the search region")

    link = _Linker()
    pieces = {}
    for i in range(nint):
        if inside[i]:
            for br in (0, 1):
                if inside[i][br]:
                    key = (i, br)
                    pieces[key] = _Piece(i, br, cuts[i], cuts[i + 1])
                    link.add(key)
                    link.terminals[key] = []
                    link.folds[key] = []

    def terminal(key, ep, side):
        if key in pieces:
            link.terminals[key].append((ep, side))

    # link across each event
    for k, ev in enumerate(events):
        left, right = k, k + 1          # interval indices on each side
        b = eb[k]
        t1 = b.T1.real
        rho_left = inside[left] is not None
        rho_right = inside[right] is not None
        m = ev.rho_mult
        done = set()
        if m > 0 and -1.0 < t1 < 1.0:
            lab = _resonance_label(ev)
            ep = Endpoint(ev.lam, "resonance", lab)
            if ev.periodic or ev.antiperiodic:
                warnings.append(f"eigenvalue and resonance coincide at {ev.lam:.17g}; "
                                f"endpoint treated as a resonance")
            if rho_left and rho_right:
                # even-order touch: analytic continuation swaps the ordered branches
                for br in (0, 1):
                    a, bb = (left, br), (right, 1 - br)
                    if a in pieces and bb in pieces:
                        link.union(a, bb)
                    else:
                        terminal(a, ep, "res")
                        terminal(bb, ep, "res")
                    done.update({a, bb})
            else:
                side = left if rho_left else right
                a, bb = (side, 0), (side, 1)
                if a in pieces and bb in pieces:
                    link.union(a, bb)
                    opens = "left" if side == left else "right"
                    link.folds[a].append((ev.lam, opens, lab))
                else:
                    for p in (a, bb):
                        terminal(p, ep, "res")
                done.update({a, bb})
        else:
            # eigenvalue terminals: the branch nearest ±1 ends here
            vals = _branch_values(b)
            if vals is None:
                vals = (t1, t1)
            ends = set()
            for zs, target, kind in ((ev.periodic, 1.0, "periodic"), (ev.antiperiodic, -1.0, "antiperiodic")):
                if not zs:
                    continue
                br = 0 if abs(vals[0] - target) <= abs(vals[1] - target) else 1
                if m > 0 or abs(vals[0] - vals[1]) <= 1e-9 * max(1.0, abs(t1)):
                    brs = (0, 1)   # both branches meet at ±1
                else:
                    brs = (br,)
                labels = [lab for z in zs for lab in z.labels]
                for bi in brs:
                    lp, rp = (left, bi), (right, bi)
                    lab_left, lab_right = _side_labels(labels)
                    terminal(lp, Endpoint(ev.lam, kind, _label_str(lab_left)), "right-end")
                    terminal(rp, Endpoint(ev.lam, kind, _label_str(lab_right)), "left-end")
                    ends.update({lp, rp})
            if m > 0:
                # resonance at |Δ| ≥ 1: pieces there touch ±1 and end
                for bi in (0, 1):
                    for p in ((left, bi), (right, bi)):
                        if p in pieces and p not in ends:
                            kind = "periodic" if t1 > 0 else "antiperiodic"
                            terminal(p, Endpoint(ev.lam, kind, None), "res")
                            ends.add(p)
            done |= ends
            for bi in (0, 1):
                a, bb = (left, bi), (right, bi)
                if a in done or bb in done:
                    continue
                if a in pieces and bb in pieces:
                    link.union(a, bb)
                elif a in pieces or bb in pieces:
                    raise ClassificationError(
                        f"branch leaves [-1, 1] at {ev.lam:.17g} without a matching zero; "
                        "refine the zero tables")
    # the last interval ends at the cutoff
    for br in (0, 1):
        terminal((nint - 1, br), Endpoint(lambda_max, "cutoff", None), "right-end")

    bands = _bands_from_chains(link, pieces, warnings)
    mult4_direct = merge_intervals([(cuts[i], cuts[i + 1]) for i in range(nint)
                                    if inside[i] and all(inside[i])])
    mult4 = _mult4_from_bands(bands)
    sym = _symmetric_difference_length(mult4, mult4_direct)
    # both routes use the same cut values, so they agree exactly when consistent
    if sym > 1e-14 * max(1.0, lambda_max):
        raise ClassificationError("multiplicity-4 set from band overlaps disagrees with the "
                                  "pointwise two-branch test")
    spectrum = merge_intervals([b.closure for b in bands])
    gaps = complement(spectrum, spectrum[0][0] if spectrum else lo, lambda_max) if spectrum else []
    report = SpectrumReport(
        bands, gaps, mult4,
        eigen_table=[r for z in table.periodic + table.antiperiodic for r in z.table_rows()],
        resonance_table=[r for z in table.resonances for r in z.table_rows()],
        provenance={"coeffs": c.to_dict(), "coeffs_digest": c.digest(), "rtol": rtol,
                    "tol_root": tol_root, "lambda_max": lambda_max, "version": __version__},
        warnings=warnings, scan_range=(lo, lambda_max))
    if scan:
        _scan_check(c, report, cuts, rtol)
    return report


def _resonance_label(ev: _Event):
    labs = [lab for z in ev.resonance for lab in z.labels]
    return ",".join(_label_str(l) for l in labs) if labs else None


def _side_labels(labels):
    """Labels for the chain ending from the left and the one starting on the right."""
    if not labels:
        return None, None
    minus = [l for l in labels if l[1] == "-"]
    plus = [l for l in labels if l[1] == "+"]
    left = minus[0] if minus else labels[0]
    right = plus[0] if plus else labels[-1]
    return left, right


def _bands_from_chains(link: _Linker, pieces: dict, warnings: list):
    chains = {}
    for key in pieces:
        chains.setdefault(link.find(key), []).append(key)
    bands = []
    for members in chains.values():
        a = min(pieces[k].a for k in members)
        b = max(pieces[k].b for k in members)
        terms = []
        folds = []
        for k in members:
            terms += [t for t, _ in link.terminals[k]]
            folds += link.folds[k]
        terms.sort(key=lambda e: e.lam)
        tags = []
        if any(o == "right" for _, o, _ in folds):
            tags.append("i2")
        if any(o == "left" for _, o, _ in folds):
            tags.append("i3")
        if not tags:
            tags.append("i1")
        n = _band_index(terms)
        sub = {}
        for lam, opens, _ in folds:
            named = [(t, _sub_arc_name(t, n)) for t in terms if t.kind != "cutoff"]
            free = [x for x in ("minus", "plus") if x not in {nm for _, nm in named}]
            # an arc running into the cutoff takes the name its partner left free
            named += [(t, free[0]) for t in terms if t.kind == "cutoff" and free]
            for t, name in named:
                iv = (lam, t.lam) if opens == "right" else (t.lam, lam)
                if iv[0] <= iv[1]:
                    sub[name] = iv
        if len(terms) != 2:
            warnings.append(f"band on [{a:.17g}, {b:.17g}] has {len(terms)} terminals")
        ends = tuple(sorted(terms, key=lambda e: e.lam))
        left_ep = next((e for e in ends if e.lam == a), None)
        right_ep = next((e for e in ends if e.lam == b), None)
        for lam, opens, lab in folds:
            if lam == a and left_ep is None:
                left_ep = Endpoint(lam, "resonance", lab)
            if lam == b and right_ep is None:
                right_ep = Endpoint(lam, "resonance", lab)
        endpoints = tuple(e for e in (left_ep, right_ep) if e is not None)
        bands.append(Band(n, (a, b), tuple(tags), endpoints, sub,
                          tuple(lam for lam, _, _ in folds)))
    bands.sort(key=lambda b: (b.closure[0], b.closure[1]))
    # fill indices for chains whose labels were incomplete (cutoff, unlabeled)
    for i, b in enumerate(bands):
        if b.n is None:
            prev = bands[i - 1].n if i > 0 else None
            b.n = prev + 1 if prev is not None else None
    return bands


def _parse(label):
    if not label:
        return None
    return int(label[:-1]), label[-1]


def _band_index(terms):
    """n from the terminal labels λ_{n-1}^+ and λ_n^-."""
    cand = set()
    for t in terms:
        p = _parse(t.label) if t.kind in ("periodic", "antiperiodic") else None
        if p is None:
            continue
        k, sign = p
        cand.add(k + 1 if sign == "+" else k)
    return min(cand) if len(cand) >= 1 else None


def _sub_arc_name(t: Endpoint, n):
    p = _parse(t.label)
    if p is None or n is None:
        return "minus" if t.kind == "periodic" else "plus"
    return "minus" if p[0] == n - 1 else "plus"


def _mult4_from_bands(bands):
    """Union of σₙ′ ∩ σₘ′ over distinct bands and σₙ⁻ ∩ σₙ⁺ within folded bands."""
    out = []
    for i, b in enumerate(bands):
        for b2 in bands[i + 1:]:
            out += intersect_intervals([b.closure], [b2.closure])
        if "minus" in b.sub_arcs and "plus" in b.sub_arcs:
            out += intersect_intervals([b.sub_arcs["minus"]], [b.sub_arcs["plus"]])
    return merge_intervals(out)


def _symmetric_difference_length(x, y):
    xs = merge_intervals(x)
    ys = merge_intervals(y)
    both = intersect_intervals(xs, ys)
    length = lambda iv: sum(b - a for a, b in iv)
    return length(xs) + length(ys) - 2 * length(both)


def _scan_check(c, report: SpectrumReport, cuts, rtol):
    """Dense indicator scan between cuts; every sample must match the report."""
    lo, hi = report.scan_range
    s0, s1 = float(lambda_to_s(lo)), float(lambda_to_s(hi))
    n = max(16, int(math.ceil((s1 - s0) * SCAN_PER_Z)))
    lams = list(s_to_lambda(np.linspace(s0, s1, n + 1))[1:-1])
    cutset = np.array(cuts)
    keep = [l for l in lams if np.min(np.abs(cutset - l)) > 1e-9 * max(1.0, abs(l))]
    for lam, b in zip(keep, bundles(c, keep, rtol=rtol)):
        got = spectral_indicator(b)
        want = report.indicator_expected(lam)
        if got != want:
            raise ClassificationError(
                f"indicator {got} at λ = {lam:.17g} but the report implies {want}; "
                "a zero is missing from the tables (use a finer scan or larger N)")


# ---------------------------------------------------------------------------
# single resonances


@dataclass
class ResonanceClass:
    m: int
    side: Optional[str]     # 'a' (ρ' > 0, branches open to the right) or 'b'
    delta_at_r: float
    rho_second: Optional[float] = None


def classify_resonance(c: CoefficientSet, r, rtol: float = DEFAULT_RTOL) -> ResonanceClass:
    """Multiplicity and opening side of a real resonance with Δ(r) ∈ (-1, 1)."""
    lam = r.lam if isinstance(r, LocatedZero) else complex(r)
    if lam.imag != 0:
        raise PreconditionError("resonance must be real")
    lam = lam.real
    b = bundles(c, [lam], derivative=True, rtol=rtol)[0]
    delta = b.T1.real
    if not -1.0 < delta < 1.0:
        raise PreconditionError(f"Δ(r) = {delta:.6g} is not inside (-1, 1)")
    m = r.multiplicity if isinstance(r, LocatedZero) else multiplicity_at(c, "rho", lam, rtol)
    if m > 2:
        raise ClassificationError(f"resonance at {lam:.17g} has multiplicity {m} > 2")
    if m == 1:
        side = "a" if b.drho.real > 0 else "b"
        return ResonanceClass(1, side, delta)
    h = 1e-5 * max(1.0, abs(lam))
    d = evaluate(c, "rho", [lam - h, lam + h], derivative=True, rtol=rtol)[1]
    second = float(((d[1] - d[0]) / (2 * h)).real)
    if not second > 0:
        raise ClassificationError(f"double resonance at {lam:.17g} has ρ'' = {second:.3g} ≤ 0")
    return ResonanceClass(2, None, delta, second)


# ---------------------------------------------------------------------------
# report validation


def validate_report(d: dict, tol: float = 1e-9) -> list:
    """Problems found in a report dict (empty list when it is consistent).

    Checks the schema version, non-degenerate intervals, that gaps and bands
    do not overlap and tile the range above the spectrum bottom, and that 𝔖₄
    lies inside the union of bands.
    """
    problems = []
    if d.get("schema_version") != SCHEMA_VERSION:
        problems.append(f"schema_version {d.get('schema_version')!r} != {SCHEMA_VERSION}")
        return problems
    for key in ("bands", "gaps", "mult4", "eigen_table", "resonance_table", "scan_range", "provenance"):
        if key not in d:
            problems.append(f"missing key {key!r}")
    if problems:
        return problems
    bands = []
    for b in d["bands"]:
        lo, hi = b["closure"]
        if not lo < hi:
            problems.append(f"band {b.get('n')} has empty closure {b['closure']}")
        bands.append((lo, hi))
        ends = [e["lambda"] for e in b["endpoints"]]
        if ends and (abs(min(ends) - lo) > tol * max(1.0, abs(lo))
                     or abs(max(ends) - hi) > tol * max(1.0, abs(hi))):
            problems.append(f"band {b.get('n')} endpoints do not span its closure")
    union = merge_intervals(bands)
    for a, b in d["gaps"]:
        if not a < b:
            problems.append(f"empty gap ({a}, {b})")
        for lo, hi in union:
            if min(b, hi) - max(a, lo) > tol * max(1.0, abs(a), abs(b)):
                problems.append(f"gap ({a}, {b}) overlaps a band")
    for a, b in d["mult4"]:
        if not any(lo - tol * max(1.0, abs(lo)) <= a and b <= hi + tol * max(1.0, abs(hi))
                   for lo, hi in union):
            problems.append(f"multiplicity-4 interval ({a}, {b}) not inside a band")
    s1 = d["scan_range"][1]
    covered = merge_intervals(union + [tuple(g) for g in d["gaps"]],
                              tol * max(1.0, abs(s1)))
    # from the bottom of the spectrum up to the scan end there is no hole
    if union and (len(covered) != 1 or covered[0][1] < s1 - tol * max(1.0, abs(s1))):
        problems.append("bands and gaps leave a hole above the bottom of the spectrum")
    return problems
