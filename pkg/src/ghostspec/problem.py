"""Problem model: piecewise-polynomial coefficients and Dirichlet problems.

An :class:`SLProblem` describes

    -y'' + q(x) y = lambda r(x) y,     y(a) = y(b) = 0,

with the shooting normalisation ``y'(a) = init_slope``.  Coefficients are
:class:`PiecewisePoly` objects; every piece is a polynomial of degree at most
three written in the local variable ``x - x_j`` of its left breakpoint, and
the right-hand piece is used at interior breakpoints.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

MAX_DEGREE = 3


class ProblemFormatError(ValueError):
    """Raised for malformed problem definitions or problem files."""


def _taylor_shift(coeffs: Sequence[float], shift: float) -> np.ndarray:
    """Coefficients of p(s + shift) in powers of s, for p given in powers of s."""
    c = np.asarray(coeffs, dtype=float)
    out = np.zeros(1)
    # Horner in the polynomial ring: p(s + t) = c0 + (s + t)(c1 + (s + t)(...))
    for ck in c[::-1]:
        out = P.polyadd(P.polymul(out, [shift, 1.0]), [ck])
    res = np.zeros(len(c))
    res[: min(len(c), len(out))] = out[: len(c)]
    return res


@dataclass(frozen=True)
class PiecewisePoly:
    breakpoints: tuple[float, ...]
    pieces: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        bps = tuple(float(x) for x in self.breakpoints)
        pcs = tuple(tuple(float(c) for c in p) for p in self.pieces)
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "pieces", pcs)
        if len(bps) < 2:
            raise ProblemFormatError("need at least two breakpoints")
        if any(not math.isfinite(x) for x in bps):
            raise ProblemFormatError("breakpoints must be finite")
        if any(x1 <= x0 for x0, x1 in zip(bps, bps[1:])):
            raise ProblemFormatError("breakpoints must be strictly increasing")
        if len(pcs) != len(bps) - 1:
            raise ProblemFormatError(
                f"{len(bps) - 1} intervals but {len(pcs)} pieces")
        for p in pcs:
            if not 1 <= len(p) <= MAX_DEGREE + 1:
                raise ProblemFormatError(
                    f"piece {p!r}: need 1..{MAX_DEGREE + 1} coefficients")
            if any(not math.isfinite(c) for c in p):
                raise ProblemFormatError("coefficients must be finite")

    # -- construction -------------------------------------------------------

    @classmethod
    def constant(cls, value: float, a: float, b: float) -> "PiecewisePoly":
        return cls((a, b), ((value,),))

    @classmethod
    def step(cls, breakpoints: Sequence[float], values: Sequence[float]) -> "PiecewisePoly":
        """Piecewise-constant function taking ``values[j]`` on piece ``j``."""
        return cls(tuple(breakpoints), tuple((v,) for v in values))

    @classmethod
    def from_dict(cls, d: dict) -> "PiecewisePoly":
        try:
            return cls(tuple(d["breakpoints"]), tuple(tuple(p) for p in d["pieces"]))
        except (KeyError, TypeError) as exc:
            raise ProblemFormatError(f"bad piecewise polynomial: {exc}") from exc

    def to_dict(self) -> dict:
        return {"breakpoints": list(self.breakpoints),
                "pieces": [list(p) for p in self.pieces]}

    # -- queries ------------------------------------------------------------

    @property
    def a(self) -> float:
        return self.breakpoints[0]

    @property
    def b(self) -> float:
        return self.breakpoints[-1]

    @property
    def m(self) -> int:
        return len(self.pieces)

    def piece_index(self, x: float) -> int:
        """Index of the piece used at ``x`` (right-continuous, clipped)."""
        j = bisect_right(self.breakpoints, x) - 1
        return min(max(j, 0), self.m - 1)

    def __call__(self, x):
        xs = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(self.breakpoints, xs, side="right") - 1, 0, self.m - 1)
        out = np.empty_like(xs)
        for j, coeffs in enumerate(self.pieces):
            sel = idx == j
            if np.any(sel):
                out[sel] = P.polyval(xs[sel] - self.breakpoints[j], coeffs)
        return out if out.ndim else float(out)

    def piece_is_constant(self, j: int) -> bool:
        return all(c == 0.0 for c in self.pieces[j][1:])

    def local_coeffs(self, j: int, x0: float) -> np.ndarray:
        """Coefficients of piece ``j`` in powers of ``x - x0``."""
        c = np.trim_zeros(np.asarray(self.pieces[j], dtype=float), "b")
        if c.size == 0:
            return np.zeros(1)
        return _taylor_shift(c, x0 - self.breakpoints[j])

    def bounds(self) -> tuple[float, float]:
        """Exact (min, max) over [a, b], using piece endpoints and critical points."""
        lo, hi = math.inf, -math.inf
        for j, coeffs in enumerate(self.pieces):
            h = self.breakpoints[j + 1] - self.breakpoints[j]
            cands = [0.0, h]
            if len(coeffs) > 2:
                for root in P.polyroots(P.polyder(coeffs)):
                    if abs(root.imag) < 1e-14 and 0.0 < root.real < h:
                        cands.append(root.real)
            vals = P.polyval(np.array(cands), coeffs)
            lo, hi = min(lo, vals.min()), max(hi, vals.max())
        return float(lo), float(hi)

    def refine(self, points: Iterable[float]) -> "PiecewisePoly":
        """Same function with extra breakpoints inserted."""
        bps = sorted(set(self.breakpoints) | {float(p) for p in points if self.a < p < self.b})
        pieces = []
        for x0 in bps[:-1]:
            j = self.piece_index(x0)
            pieces.append(tuple(self.local_coeffs(j, x0)))
        return PiecewisePoly(tuple(bps), tuple(pieces))

    def __neg__(self) -> "PiecewisePoly":
        return PiecewisePoly(self.breakpoints, tuple(tuple(-c for c in p) for p in self.pieces))


@dataclass(frozen=True)
class Segment:
    """A maximal interval on which both coefficients are single polynomials.

    ``q`` and ``r`` hold ascending coefficients in the local variable ``x - x0``.
    """

    x0: float
    x1: float
    q: np.ndarray = field(repr=False)
    r: np.ndarray = field(repr=False)

    @property
    def length(self) -> float:
        return self.x1 - self.x0

    @property
    def constant(self) -> bool:
        return not (np.any(self.q[1:]) or np.any(self.r[1:]))

    @property
    def q0(self) -> float:
        return float(self.q[0])

    @property
    def r0(self) -> float:
        return float(self.r[0])


@dataclass(frozen=True)
class SLProblem:
    a: float
    b: float
    q: PiecewisePoly
    r: PiecewisePoly
    init_slope: complex = 1.0 + 0.0j
    name: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "init_slope", complex(self.init_slope))
        if not self.a < self.b:
            raise ProblemFormatError("need a < b")
        for name, f in (("q", self.q), ("r", self.r)):
            if not isinstance(f, PiecewisePoly):
                raise ProblemFormatError(f"{name} must be a PiecewisePoly")
            if f.a != self.a or f.b != self.b:
                raise ProblemFormatError(f"{name} must be defined on exactly [a, b]")
        if self.init_slope == 0:
            raise ProblemFormatError("init_slope must be non-zero")

    @property
    def length(self) -> float:
        return self.b - self.a

    @cached_property
    def segments(self) -> tuple[Segment, ...]:
        bps = sorted(set(self.q.breakpoints) | set(self.r.breakpoints))
        segs = []
        for x0, x1 in zip(bps, bps[1:]):
            segs.append(Segment(
                x0, x1,
                self.q.local_coeffs(self.q.piece_index(x0), x0),
                self.r.local_coeffs(self.r.piece_index(x0), x0),
            ))
        return tuple(segs)

    @cached_property
    def breakpoints(self) -> np.ndarray:
        return np.array([s.x0 for s in self.segments] + [self.b])

    def companion(self) -> "SLProblem":
        """Same potential with weight r = 1 (the problem defining the Richardson count)."""
        return SLProblem(self.a, self.b, self.q, PiecewisePoly.constant(1.0, self.a, self.b),
                         init_slope=1.0, name=None if self.name is None else self.name + "-companion")

    def with_slope(self, slope: complex) -> "SLProblem":
        return SLProblem(self.a, self.b, self.q, self.r, slope, self.name)

    # -- serialisation ------------------------------------------------------

    def to_dict(self) -> dict:
        d = {"a": self.a, "b": self.b,
             "init_slope": [self.init_slope.real, self.init_slope.imag],
             "q": self.q.to_dict(), "r": self.r.to_dict()}
        if self.name is not None:
            d["name"] = self.name
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SLProblem":
        from .schemas import PROBLEM_SCHEMA, validate

        validate(d, PROBLEM_SCHEMA, ProblemFormatError)
        slope = d.get("init_slope", [1.0, 0.0])
        return cls(d["a"], d["b"], PiecewisePoly.from_dict(d["q"]), PiecewisePoly.from_dict(d["r"]),
                   complex(slope[0], slope[1]), d.get("name"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SLProblem":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ProblemFormatError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(d)

    @classmethod
    def load(cls, path) -> "SLProblem":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


# -- weight classification --------------------------------------------------

DEFINITE = "definite"
SINGLE_TURNING_POINT = "single_turning_point"
TURNING_INTERVAL = "turning_interval"
MULTI_TURNING = "multi_turning"
DEGENERATE_ENDPOINT_ZERO = "degenerate_endpoint_zero"


@dataclass(frozen=True)
class WeightProfile:
    sign_pattern: tuple[tuple[tuple[float, float], int], ...]
    kind: str
    c: float | None = None
    d: float | None = None

    @property
    def signs(self) -> tuple[int, ...]:
        return tuple(s for _, s in self.sign_pattern)

    @property
    def separates(self) -> bool:
        """True when interior zeros of ghosts are guaranteed to interlace."""
        return self.kind in (SINGLE_TURNING_POINT, TURNING_INTERVAL)


def _chebyshev_points(lo: float, hi: float, n: int = 9) -> np.ndarray:
    k = np.arange(n)
    return 0.5 * (lo + hi) + 0.5 * (hi - lo) * np.cos((2 * k + 1) * np.pi / (2 * n))


def _piece_signs(coeffs, x0: float, x1: float, tol: float):
    """Sub-intervals of one piece with their constant signs."""
    c = np.asarray(coeffs, dtype=float)
    if np.all(np.abs(c) <= tol):
        return [((x0, x1), 0)]
    h = x1 - x0
    cuts = [0.0, h]
    ct = np.trim_zeros(c, "b")
    if ct.size > 1:
        for root in P.polyroots(ct):
            if abs(root.imag) <= 1e-12 * max(1.0, h) and 1e-14 * h < root.real < h * (1 - 1e-14):
                cuts.append(float(root.real))
    cuts = sorted(set(cuts))
    out = []
    for s0, s1 in zip(cuts, cuts[1:]):
        vals = P.polyval(_chebyshev_points(s0, s1), c)
        big = vals[np.abs(vals) > tol]
        if big.size == 0:
            sign = 0
        else:
            sign = int(np.sign(big[np.argmax(np.abs(big))]))
        out.append(((x0 + s0, x0 + s1), sign))
    return out


def classify_weight(r: PiecewisePoly, tol: float = 1e-12) -> WeightProfile:
    """Maximal sign pattern of ``r`` and its turning-point structure."""
    raw = []
    for j, coeffs in enumerate(r.pieces):
        raw.extend(_piece_signs(coeffs, r.breakpoints[j], r.breakpoints[j + 1], tol))
    pattern = []
    for (lo, hi), s in raw:
        if pattern and pattern[-1][1] == s:
            (plo, _), _ = pattern[-1]
            pattern[-1] = ((plo, hi), s)
        else:
            pattern.append(((lo, hi), s))
    pattern = tuple(pattern)
    signs = [s for _, s in pattern]

    if signs[0] == 0 or signs[-1] == 0:
        return WeightProfile(pattern, DEGENERATE_ENDPOINT_ZERO)
    nonzero = {s for s in signs if s != 0}
    if len(nonzero) == 1:
        return WeightProfile(pattern, DEFINITE)
    if len(signs) == 2:
        cpt = pattern[0][0][1]
        return WeightProfile(pattern, SINGLE_TURNING_POINT, cpt, cpt)
    if len(signs) == 3 and signs[1] == 0 and signs[0] == -signs[2]:
        c, d = pattern[1][0]
        return WeightProfile(pattern, TURNING_INTERVAL, c, d)
    return WeightProfile(pattern, MULTI_TURNING)


def is_nondefinite(r: PiecewisePoly, tol: float = 1e-12) -> bool:
    signs = set(classify_weight(r, tol).signs)
    return 1 in signs and -1 in signs
