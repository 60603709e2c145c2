"""Eigenvalue search on the miss distance D(lambda) = y(b; lambda).

Non-real eigenvalues are counted with the argument principle on rectangles
in the upper half-plane, isolated by bisection and polished by Newton's
method with the variational derivative.  Real eigenvalues come from sign
changes of the (real) miss distance on the real axis.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .integrator import DEFAULT_ATOL, DEFAULT_RTOL, Trajectory, integrate, shoot
from .problem import SLProblem

log = logging.getLogger(__name__)

EIGEN_TOL = 1e-9
MIN_BOX_DIAMETER = 1e-6
COUNT_RTOL = 1e-8
COUNT_ATOL = 1e-300
BOUNDARY_ZERO_TOL = 1e-13
MAX_PHASE_JUMP = math.pi / 4
DEFAULT_IM_MAX = 50.0
DEFAULT_RE_HALFWIDTH = 100.0
DEFAULT_IM_MIN = 1e-3


class BoundaryZero(RuntimeError):
    """|D| numerically vanishes on a contour; perturb the contour."""

    def __init__(self, point):
        super().__init__(f"miss distance vanishes near the contour point {point}")
        self.point = point


class NonConvergence(RuntimeError):
    """The eigenvalue search could not resolve every zero it counted."""

    def __init__(self, message, diagnostics=()):
        super().__init__(message)
        self.diagnostics = list(diagnostics)


class SpectralWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Rect:
    re0: float
    re1: float
    im0: float
    im1: float

    def __post_init__(self):
        if not (self.re0 < self.re1 and self.im0 < self.im1):
            raise ValueError(f"degenerate rectangle {self}")

    @classmethod
    def parse(cls, text: str) -> "Rect":
        parts = [float(p) for p in text.split(",")]
        if len(parts) != 4:
            raise ValueError("rectangle must be re0,re1,im0,im1")
        return cls(*parts)

    @property
    def center(self) -> complex:
        return complex(0.5 * (self.re0 + self.re1), 0.5 * (self.im0 + self.im1))

    @property
    def width(self) -> float:
        return self.re1 - self.re0

    @property
    def height(self) -> float:
        return self.im1 - self.im0

    @property
    def diameter(self) -> float:
        return math.hypot(self.width, self.height)

    def contains(self, z: complex, margin: float = 0.0) -> bool:
        return (self.re0 - margin <= z.real <= self.re1 + margin
                and self.im0 - margin <= z.imag <= self.im1 + margin)

    def split(self, frac: float = 0.5) -> tuple["Rect", "Rect"]:
        """Cut across the longer side at the given fraction."""
        if self.width >= self.height:
            x = self.re0 + frac * self.width
            return Rect(self.re0, x, self.im0, self.im1), Rect(x, self.re1, self.im0, self.im1)
        y = self.im0 + frac * self.height
        return Rect(self.re0, self.re1, self.im0, y), Rect(self.re0, self.re1, y, self.im1)

    def inflate(self, factor: float) -> "Rect":
        """Grow about the centre; the bottom edge moves towards (never across) Im = 0."""
        hw = 0.5 * self.width * factor
        c = 0.5 * (self.re0 + self.re1)
        im0 = self.im0 * (2.0 - factor) if self.im0 > 0 else self.im0 - (factor - 1) * self.height / 2
        return Rect(c - hw, c + hw, im0, self.im1 + (factor - 1) * self.height / 2)

    def boundary(self, s):
        """Counter-clockwise boundary point at arclength ``s`` (from re0 + i im0)."""
        s = np.mod(np.asarray(s, dtype=float), self.perimeter)
        w, h = self.width, self.height
        z = np.empty(s.shape, dtype=complex)
        m = s < w
        z[m] = self.re0 + s[m] + 1j * self.im0
        m2 = (s >= w) & (s < w + h)
        z[m2] = self.re1 + 1j * (self.im0 + s[m2] - w)
        m3 = (s >= w + h) & (s < 2 * w + h)
        z[m3] = self.re1 - (s[m3] - w - h) + 1j * self.im1
        m4 = s >= 2 * w + h
        z[m4] = self.re0 + 1j * (self.im1 - (s[m4] - 2 * w - h))
        return z

    @property
    def perimeter(self) -> float:
        return 2 * (self.width + self.height)

    def as_list(self) -> list[float]:
        return [self.re0, self.re1, self.im0, self.im1]


DEFAULT_RECT = Rect(-DEFAULT_RE_HALFWIDTH, DEFAULT_RE_HALFWIDTH, DEFAULT_IM_MIN, DEFAULT_IM_MAX)


# -- eigenpairs -------------------------------------------------------------------

SIMPLE = "simple"
SUSPECTED_MULTIPLE = "suspected_multiple"


@dataclass
class EigenPair:
    lam: complex
    trajectory: Trajectory
    residual: float
    multiplicity_flag: str = SIMPLE
    newton_steps: list = field(default_factory=list)

    def conjugate(self) -> "EigenPair":
        return EigenPair(self.lam.conjugate(), self.trajectory.conjugate(), self.residual,
                         self.multiplicity_flag, list(self.newton_steps))

    def to_dict(self) -> dict:
        return {"re": self.lam.real, "im": self.lam.imag, "residual": self.residual,
                "multiplicity": self.multiplicity_flag}


def miss_distance(problem: SLProblem, lam: complex, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL) -> complex:
    """D(lambda) = y(b) for y(a) = 0, y'(a) = init_slope."""
    shot = shoot(problem, [lam], rtol, atol)
    return complex(shot.unscaled(shot.y)[0])


def relative_miss(problem: SLProblem, lam: complex, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL,
                  slope=None) -> float:
    """|D(lambda)| / sup|y| (scale free)."""
    shot = shoot(problem, [lam], rtol, atol, slope=slope)
    return float(abs(shot.y[0]) / shot.sup[0])


def make_eigenpair(problem, lam, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL, flag=SIMPLE, steps=()):
    traj = integrate(problem, lam, rtol=rtol, atol=atol)
    res = abs(traj.end_value) / traj.sup_abs
    return EigenPair(complex(lam), traj, float(res), flag, list(steps))


# -- Newton -----------------------------------------------------------------------

@dataclass
class NewtonInfo:
    converged: bool
    iterations: int
    steps: list
    residual: float
    derivative_scale: float
    message: str = ""


def newton_refine(problem: SLProblem, lam0: complex, eigen_tol: float = EIGEN_TOL,
                  max_iter: int = 60, radius: float = math.inf,
                  rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL) -> tuple[complex, NewtonInfo]:
    """Newton's method on D with the variational derivative.

    Stops when the step falls to round-off level; ``radius`` bounds the
    distance from the starting point before giving up.
    """
    lam = complex(lam0)
    steps = []
    dscale = math.nan
    msg = ""
    for it in range(1, max_iter + 1):
        shot = shoot(problem, [lam], rtol, atol, derivative=True)
        D, Dp, sup = complex(shot.y[0]), complex(shot.z[0]), float(shot.sup[0])
        if not np.isfinite(abs(D)) or not np.isfinite(abs(Dp)):
            msg = "non-finite miss distance"
            break
        if D == 0:
            steps.append(0.0)
            break
        dscale = abs(Dp) * max(1.0, abs(lam)) / sup
        if Dp == 0:
            msg = "derivative vanished"
            break
        step = D / Dp
        steps.append(abs(step))
        lam -= step
        if abs(lam - lam0) > radius:
            msg = "left the search radius"
            break
        tiny = 4e-15 * max(1.0, abs(lam))
        if abs(step) <= tiny:
            break
        if len(steps) >= 3 and steps[-1] >= steps[-2] and steps[-1] < 1e-10 * max(1.0, abs(lam)):
            break
    else:
        msg = "iteration limit"
    res = relative_miss(problem, lam, rtol, atol)
    ok = res <= eigen_tol and not msg
    return lam, NewtonInfo(ok, len(steps), steps, res, dscale, msg)


def _multiplicity(info: NewtonInfo) -> str:
    st = [s for s in info.steps if s > 1e-11]
    if len(st) >= 4:
        ratios = [b / a for a, b in zip(st[-4:], st[-3:]) if a > 0]
        if ratios and all(0.25 < r < 0.9 for r in ratios):
            return SUSPECTED_MULTIPLE
    if info.derivative_scale < 1e-8:
        return SUSPECTED_MULTIPLE
    return SIMPLE


# -- argument principle -------------------------------------------------------------

def _wrap(d):
    return (d + np.pi) % (2 * np.pi) - np.pi


def count_in_box(problem: SLProblem, rect: Rect, n_boundary: int = 64,
                 rtol: float = COUNT_RTOL, atol: float = COUNT_ATOL,
                 max_points: int = 200000) -> int:
    """Winding number of D around the boundary of ``rect``.

    A boundary segment is refined until consecutive phases differ by less
    than pi/4 and |D'/D| |dz| <= 1/2 at both ends; the second condition
    keeps a pair of zeros just outside the contour (for instance real
    eigenvalues below a bottom edge close to the axis) from slipping
    between two samples unnoticed.  Raises :class:`BoundaryZero` when D is
    numerically zero on the contour or the refinement cannot resolve it.
    """
    if n_boundary < 64:
        raise ValueError("n_boundary must be >= 64")
    per = rect.perimeter
    sides = [rect.width, rect.height, rect.width, rect.height]
    s_list = []
    off = 0.0
    for L in sides:
        n = max(16, int(round(n_boundary * L / per)))
        s_list.append(off + L * np.arange(n) / n)
        off += L
    s = np.concatenate(s_list)

    def phase(ss):
        z = rect.boundary(ss)
        shot = shoot(problem, z, rtol, atol, derivative=True)
        rel = np.abs(shot.y) / shot.sup
        if np.any(rel < BOUNDARY_ZERO_TOL) or not np.all(np.isfinite(rel)):
            k = int(np.argmin(np.where(np.isfinite(rel), rel, -1)))
            raise BoundaryZero(complex(z[k]))
        return np.angle(shot.y), np.abs(shot.z / shot.y)

    ph, ld = phase(s)
    min_len = 1e-12 * per
    while True:
        d = _wrap(np.diff(np.append(ph, ph[0])))
        s_next = np.append(s[1:], per)
        seglen = s_next - s
        reach = np.maximum(ld, np.roll(ld, -1)) * seglen
        bad = np.nonzero((np.abs(d) >= MAX_PHASE_JUMP) | (reach > 0.5))[0]
        if bad.size == 0:
            break
        seglen = seglen[bad]
        if np.any(seglen < min_len):
            raise BoundaryZero(complex(rect.boundary(s[bad[np.argmin(seglen)]])))
        if s.size + bad.size > max_points:
            raise BoundaryZero(complex(rect.boundary(s[bad[0]])))
        mids = 0.5 * (s[bad] + s_next[bad])
        ph_mid, ld_mid = phase(mids)
        order = np.argsort(np.concatenate([s, mids]), kind="stable")
        s = np.concatenate([s, mids])[order]
        ph = np.concatenate([ph, ph_mid])[order]
        ld = np.concatenate([ld, ld_mid])[order]
    total = float(np.sum(d)) / (2 * np.pi)
    wn = int(round(total))
    if abs(total - wn) > 1e-6:
        raise BoundaryZero(rect.center)
    return wn


def count_with_retries(problem, rect, n_boundary=64, max_retries=8, **kw):
    """Count zeros; on a boundary zero inflate by 1 + 2**-k * 0.01 and retry."""
    try:
        return count_in_box(problem, rect, n_boundary, **kw), rect
    except BoundaryZero as exc:
        last = exc
    for k in range(max_retries):
        r2 = rect.inflate(1.0 + 2.0 ** -k * 0.01)
        try:
            return count_in_box(problem, r2, n_boundary, **kw), r2
        except BoundaryZero as exc:
            last = exc
    raise last


# -- non-real search ----------------------------------------------------------------

@dataclass
class NonrealSearch:
    pairs: list
    boxes: list
    rect: Rect
    total: int
    failures: list


def _split_counted(problem, box, n, n_boundary, kw):
    """Split ``box`` and count both halves, shifting the cut on boundary zeros."""
    for frac in (0.5, 0.45, 0.55, 0.4, 0.6, 0.35, 0.65):
        left, right = box.split(frac)
        try:
            c1 = count_in_box(problem, left, n_boundary, **kw)
            c2 = count_in_box(problem, right, n_boundary, **kw)
        except BoundaryZero:
            continue
        if c1 + c2 == n:
            return [(left, c1), (right, c2)]
        try:
            c1 = count_in_box(problem, left, 4 * n_boundary, **kw)
            c2 = count_in_box(problem, right, 4 * n_boundary, **kw)
        except BoundaryZero:
            continue
        if c1 + c2 == n:
            return [(left, c1), (right, c2)]
    return None


def search_nonreal(problem: SLProblem, rect: Rect, eigen_tol: float = EIGEN_TOL,
                   n_boundary: int = 64, min_diameter: float = MIN_BOX_DIAMETER,
                   rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL, count_kw=None) -> NonrealSearch:
    if rect.im0 <= 0:
        raise ValueError("search rectangle must lie in the open upper half-plane")
    count_kw = dict(count_kw or {})
    total, rect = count_with_retries(problem, rect, n_boundary, **count_kw)
    stack = [(rect, total)]
    pairs, boxes, failures = [], [], []
    while stack:
        box, n = stack.pop()
        if n == 0:
            continue
        if n < 0:
            failures.append({"box": box.as_list(), "count": n, "reason": "negative count"})
            continue
        if n == 1:
            lam, info = newton_refine(problem, box.center, eigen_tol, radius=2 * box.diameter,
                                      rtol=rtol, atol=atol)
            if info.converged and box.contains(lam, 1e-12 * max(1.0, abs(lam))):
                pairs.append(make_eigenpair(problem, lam, rtol, atol, _multiplicity(info), info.steps))
                boxes.append((box, 1))
                continue
        if box.diameter < min_diameter:
            lam, info = newton_refine(problem, box.center, eigen_tol, radius=1.0, rtol=rtol, atol=atol)
            if info.converged:
                flag = SUSPECTED_MULTIPLE if n > 1 else _multiplicity(info)
                for _ in range(n):
                    pairs.append(make_eigenpair(problem, lam, rtol, atol, flag, info.steps))
                boxes.append((box, n))
            else:
                failures.append({"box": box.as_list(), "count": n, "reason": info.message or
                                 f"residual {info.residual:.3g}"})
            continue
        halves = _split_counted(problem, box, n, n_boundary, count_kw)
        if halves is None:
            failures.append({"box": box.as_list(), "count": n, "reason": "counts not additive"})
            continue
        stack.extend(halves)
    pairs.sort(key=lambda p: (p.lam.real, p.lam.imag))
    return NonrealSearch(pairs, boxes, rect, total, failures)


def find_nonreal(problem: SLProblem, rect: Rect, eigen_tol: float = EIGEN_TOL, **kw) -> list[EigenPair]:
    """All eigenvalues inside ``rect`` (upper half-plane), sorted by real part."""
    res = search_nonreal(problem, rect, eigen_tol, **kw)
    if res.failures:
        raise NonConvergence(f"{len(res.failures)} box(es) unresolved", res.failures)
    return res.pairs


# -- real eigenvalues ---------------------------------------------------------------

def _real_sign_function(problem, rtol, atol):
    def f(mu):
        shot = shoot(problem, [mu], rtol, atol, slope=1.0)
        return float(shot.unscaled(shot.y).real[0])
    return f


def find_real(problem: SLProblem, lo: float, hi: float, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL,
              eigen_tol: float = EIGEN_TOL, n_initial: int = 256, max_levels: int = 8) -> list[float]:
    """Real eigenvalues in [lo, hi] from sign changes of the real miss distance."""
    if not lo < hi:
        raise ValueError("need lo < hi")
    n = n_initial
    prev = None
    for level in range(max_levels):
        grid = np.linspace(lo, hi, n + 1)
        shot = shoot(problem, grid, rtol, atol, slope=1.0)
        v = shot.y.real
        sgn = np.sign(v)
        brackets = np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]
        exact = np.nonzero(sgn == 0)[0]
        count = brackets.size + exact.size
        if prev is not None and count == prev:
            break
        prev = count
        n *= 2
    else:
        warnings.warn(f"real-eigenvalue count did not stabilise on [{lo}, {hi}]", SpectralWarning)
    f = _real_sign_function(problem, rtol, atol)
    roots = [float(grid[i]) for i in exact]
    for i in brackets:
        roots.append(brentq(f, grid[i], grid[i + 1], xtol=1e-14 * max(1.0, abs(grid[i])),
                            rtol=4 * np.finfo(float).eps, maxiter=200))
    roots.sort()
    rel = np.abs(v) / shot.sup
    interior_min = (rel[1:-1] < rel[:-2]) & (rel[1:-1] < rel[2:]) & (sgn[:-2] == sgn[2:])
    for i in np.nonzero(interior_min & (rel[1:-1] < 1e-6))[0]:
        warnings.warn(f"near-double real eigenvalue suspected near {grid[i + 1]:.6g}", SpectralWarning)
    dx = (hi - lo) / n
    for r0, r1 in zip(roots, roots[1:]):
        if r1 - r0 < 2 * dx:
            warnings.warn(f"real eigenvalues {r0:.8g}, {r1:.8g} closer than grid resolution",
                          SpectralWarning)
    good = []
    for r in roots:
        res = relative_miss(problem, r, rtol, atol, slope=1.0)
        if res > eigen_tol:
            warnings.warn(f"real root {r:.10g} has residual {res:.3g}", SpectralWarning)
        good.append(r)
    return good


def _interior_sign_changes(traj: Trajectory, n: int = 4001) -> int:
    xs = np.linspace(traj.a, traj.b, n)[1:-1]
    v = traj(xs)
    v = v.real if np.max(np.abs(v.real)) >= np.max(np.abs(v.imag)) else v.imag
    s = np.sign(v)
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def richardson_count_N(problem: SLProblem, n_initial: int = 256) -> int:
    """Number of negative Dirichlet eigenvalues of -y'' + q y = lambda y on [a, b].

    Uses the lower bound lambda_1 >= min q + (pi/(b - a))**2 to bound the search
    and checks Sturm oscillation: the k-th eigenfunction has k - 1 interior zeros,
    and y(.; 0) has as many interior zeros as there are negative eigenvalues.
    """
    comp = problem.companion()
    qmin = problem.q.bounds()[0]
    lower = qmin + (math.pi / problem.length) ** 2
    zero_traj = integrate(comp, 0.0)
    zeros_at_0 = _interior_sign_changes(zero_traj)
    at_zero = abs(zero_traj.end_value) / zero_traj.sup_abs < 1e-9
    if lower >= 0:
        if zeros_at_0 != 0 and not at_zero:
            raise RuntimeError("oscillation count contradicts the lower bound")
        return 0
    for attempt in range(3):
        eigs = [e for e in find_real(comp, lower - 1.0, 0.0, n_initial=n_initial * 4 ** attempt)
                if e < -1e-12]
        ok = all(_interior_sign_changes(integrate(comp, e)) == k for k, e in enumerate(eigs))
        if ok and (at_zero or zeros_at_0 == len(eigs)):
            return len(eigs)
    raise RuntimeError(f"Sturm oscillation check failed for the companion problem "
                       f"({len(eigs)} eigenvalues, {zeros_at_0} zeros at lambda = 0)")


# -- aggregate --------------------------------------------------------------------------

@dataclass
class SpectrumReport:
    real_eigs: list
    nonreal_pairs: list
    richardson_N: int
    bound_ok: bool
    search_region: Rect
    real_window: tuple
    warnings: list = field(default_factory=list)

    @property
    def M(self) -> int:
        return len(self.nonreal_pairs)

    def to_dict(self) -> dict:
        return {
            "real_eigs": [float(x) for x in self.real_eigs],
            "nonreal": [p.to_dict() for p in self.nonreal_pairs],
            "M": self.M,
            "N": self.richardson_N,
            "bound_ok": self.bound_ok,
            "search_region": self.search_region.as_list(),
            "real_window": [float(self.real_window[0]), float(self.real_window[1])],
            "warnings": list(self.warnings),
        }


def full_spectrum_report(problem: SLProblem, rect: Rect | None = None, real_window=None,
                         eigen_tol: float = EIGEN_TOL, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL) -> SpectrumReport:
    rect = rect or DEFAULT_RECT
    if real_window is None:
        real_window = (rect.re0, rect.re1)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", SpectralWarning)
        real = find_real(problem, real_window[0], real_window[1], rtol, atol, eigen_tol)
        pairs = find_nonreal(problem, rect, eigen_tol, rtol=rtol, atol=atol)
        N = richardson_count_N(problem)
    msgs = [str(w.message) for w in caught if issubclass(w.category, SpectralWarning)]
    return SpectrumReport(real, pairs, N, len(pairs) <= N, rect, tuple(real_window), msgs)
