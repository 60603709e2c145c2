"""Real/imaginary decomposition of non-real eigenfunctions ("complex ghosts").

For y = phi + i psi with eigenvalue lam, W = phi' psi - phi psi' satisfies
W(x) = Im(lam) G(x) with G(x) = int_a^x r |y|^2.  Everything here is built on
that identity: its sign drives the endpoint predictions and its numerical
residual is the main accuracy check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .integrator import DEFAULT_ATOL, Trajectory, integrate
from .problem import SLProblem, WeightProfile, classify_weight
from .spectrum import EIGEN_TOL, EigenPair, make_eigenpair, newton_refine

POSITIVE, NEGATIVE, INDEFINITE = "positive", "negative", "indefinite"
NONE, ONCE = "none", "once"

IDENTITY_TOL = 1e-7
G_END_TOL = 1e-8
G_SIGN_REL = 1e-9
ANALYSIS_RTOL = 1e-11

_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)


class InvariantViolation(RuntimeError):
    """A property that holds for every exact ghost failed numerically."""


# -- decomposition ------------------------------------------------------------

@dataclass(frozen=True)
class ComponentView:
    """Real or imaginary part of ``rotation * y`` for a trajectory (stored scale)."""

    traj: Trajectory
    rotation: complex
    part: str

    def _take(self, v):
        v = self.rotation * v
        return v.real if self.part == "re" else v.imag

    def __call__(self, xs):
        return self._take(self.traj(xs))

    def derivative(self, xs):
        return self._take(self.traj.evaluate(xs)[1])

    @property
    def a(self) -> float:
        return self.traj.a

    @property
    def b(self) -> float:
        return self.traj.b


@dataclass
class GhostDecomposition:
    eigenpair: EigenPair
    phi: ComponentView
    psi: ComponentView
    phase_rotation: complex
    dphi_a: float
    dpsi_a: float
    dphi_b: float
    dpsi_b: float

    @property
    def lam(self) -> complex:
        return self.eigenpair.lam

    @property
    def trajectory(self) -> Trajectory:
        return self.phi.traj

    def values(self, xs):
        """phi, psi, phi', psi' at ``xs`` (stored scale, rotation applied)."""
        y, dy = self.trajectory.evaluate(xs)
        y, dy = self.phase_rotation * y, self.phase_rotation * dy
        return y.real, y.imag, dy.real, dy.imag


def decompose(pair: EigenPair) -> GhostDecomposition:
    """Split the eigenfunction, conjugating into Im lam > 0 and rotating by i if phi'(a) = 0."""
    if pair.lam.imag == 0:
        raise ValueError("a ghost needs a non-real eigenvalue")
    if pair.lam.imag < 0:
        pair = pair.conjugate()
    traj = pair.trajectory
    unit = math.ldexp(1.0, traj.log2_scale)
    dya = complex(traj.dy[0])
    if dya == 0:
        raise ValueError("trivial eigenfunction: y'(a) = 0")
    rot = 1.0 + 0j
    if abs(dya.real) <= 1e-14 * abs(dya):
        rot = 1j
    dyb = complex(traj.dy[-1])
    da, db = rot * dya * unit, rot * dyb * unit
    return GhostDecomposition(pair, ComponentView(traj, rot, "re"), ComponentView(traj, rot, "im"),
                              rot, da.real, da.imag, db.real, db.imag)


# -- G and the identity ----------------------------------------------------------

@dataclass
class GSamples:
    x: np.ndarray
    G: np.ndarray

    @property
    def sup(self) -> float:
        return float(np.max(np.abs(self.G)))

    @property
    def end_relative(self) -> float:
        s = self.sup
        return float(abs(self.G[-1]) / s) if s > 0 else 0.0

    def pairs(self):
        return list(zip(self.x.tolist(), self.G.tolist()))


def _weighted_density(ghost: GhostDecomposition, xs, seg_idx):
    prob = ghost.trajectory.problem
    y = ghost.trajectory(xs)
    out = np.empty(xs.size)
    for k in np.unique(seg_idx):
        sel = seg_idx == k
        sg = prob.segments[int(k)]
        out[sel] = np.polynomial.polynomial.polyval(xs[sel] - sg.x0, sg.r) * np.abs(y[sel]) ** 2
    return out


def _gauss(ghost, lo, hi, seg_idx):
    """Gauss-Legendre(10) integrals of r|y|^2 over [lo_i, hi_i] (vectorized)."""
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    pts = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
    seg = np.repeat(seg_idx, _GL_X.size)
    f = _weighted_density(ghost, pts, seg).reshape(lo.size, _GL_X.size)
    return half * (f @ _GL_W)


def _kahan_cumsum(v):
    out = np.empty(v.size + 1)
    out[0] = 0.0
    s = c = 0.0
    for i, x in enumerate(v):
        t = s + x
        if abs(s) >= abs(x):
            c += (s - t) + x
        else:
            c += (x - t) + s
        s = t
        out[i + 1] = s + c
    return out


def g_sign_verdict(samples: GSamples, eps_frac: float = 1e-4) -> str:
    a, b = samples.x[0], samples.x[-1]
    eps = (b - a) * eps_frac
    inner = (samples.x > a + eps) & (samples.x < b - eps)
    tol = G_SIGN_REL * samples.sup
    g = samples.G[inner]
    pos, neg = bool(np.any(g > tol)), bool(np.any(g < -tol))
    if pos and not neg:
        return POSITIVE
    if neg and not pos:
        return NEGATIVE
    return INDEFINITE


def compute_G(problem: SLProblem, ghost: GhostDecomposition, n_samples: int = 2001,
              strict: bool = True) -> tuple[GSamples, str]:
    """G(x) = int_a^x r|y|^2 at the trajectory nodes and ``n_samples`` uniform points.

    With ``strict`` an indefinite verdict for a weight with one sign change
    (possibly through a zero interval) raises :class:`InvariantViolation`.
    """
    if n_samples < 100:
        raise ValueError("n_samples must be >= 100")
    traj = ghost.trajectory
    nodes = traj.x
    seg = np.asarray(traj.seg)
    at_nodes = _kahan_cumsum(_gauss(ghost, nodes[:-1], nodes[1:], seg))
    xs = np.union1d(np.linspace(traj.a, traj.b, n_samples), nodes)
    idx = traj.interval_index(xs)
    G = at_nodes[idx] + _gauss(ghost, nodes[idx], xs, seg[idx])
    G[0] = 0.0
    samples = GSamples(xs, G)
    verdict = g_sign_verdict(samples)
    if strict and verdict == INDEFINITE and classify_weight(problem.r).separates:
        raise InvariantViolation(f"G changes sign for lambda = {ghost.lam} although the weight "
                                 "changes sign only once")
    return samples, verdict


def identity_residual(ghost: GhostDecomposition, samples: GSamples) -> float:
    """sup |phi' psi - phi psi' - Im(lam) G| / sup |Im(lam) G| over the samples."""
    phi, psi, dphi, dpsi = ghost.values(samples.x)
    W = dphi * psi - phi * dpsi
    rhs = ghost.lam.imag * samples.G
    scale = float(np.max(np.abs(rhs)))
    diff = float(np.max(np.abs(W - rhs)))
    if scale == 0:
        return diff
    return diff / scale


# -- zeros --------------------------------------------------------------------------

@dataclass
class ZeroList:
    zeros: list
    endpoint_zero_a: bool
    endpoint_zero_b: bool
    cluster_warnings: list = field(default_factory=list)
    a: float = 0.0
    b: float = 1.0

    def __len__(self):
        return len(self.zeros)

    def with_endpoints(self) -> list:
        out = [self.a] if self.endpoint_zero_a else []
        return out + list(self.zeros) + ([self.b] if self.endpoint_zero_b else [])


def _sign_brackets(f, a, b, n):
    x = np.linspace(a, b, n + 1)
    v = f(x)
    s = np.sign(v)
    return x, v, s


def locate_zeros(component, endpoint_tol: float | None = None, n_initial: int = 1024,
                 max_levels: int = 6, flat_tol: float = 1e-8) -> ZeroList:
    """Zeros of a real function on [a, b] from sign changes on a doubling grid.

    ``component`` is any real callable with ``a`` and ``b`` attributes.  Roots
    within ``endpoint_tol`` of an end are reported as endpoint zeros.
    """
    a, b = float(component.a), float(component.b)
    L = b - a
    if endpoint_tol is None:
        endpoint_tol = 1e-6 * L
    if endpoint_tol <= 0:
        raise ValueError("endpoint_tol must be positive")

    def count(n):
        x, v, s = _sign_brackets(component, a, b, n)
        nz = s != 0
        xi, si = x[nz], s[nz]
        br = np.nonzero(si[:-1] != si[1:])[0]
        return x, v, s, [(xi[i], xi[i + 1]) for i in br]

    n = n_initial
    x, v, s, br = count(n)
    for _ in range(max_levels):
        x2, v2, s2, br2 = count(2 * n)
        n *= 2
        stable = len(br2) == len(br)
        x, v, s, br = x2, v2, s2, br2
        if stable:
            break
    sup = float(np.max(np.abs(v))) if v.size else 0.0
    xtol = 1e-12 * L
    roots = []
    for lo, hi in br:
        flo, fhi = float(component(lo)), float(component(hi))
        if flo == 0:
            roots.append(lo)
        elif fhi == 0:
            roots.append(hi)
        else:
            roots.append(brentq(component, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps))
    za = abs(v[0]) <= flat_tol * sup
    zb = abs(v[-1]) <= flat_tol * sup
    interior = []
    for r in roots:
        if r - a <= endpoint_tol:
            za = True
        elif b - r <= endpoint_tol:
            zb = True
        else:
            interior.append(float(r))
    warns = []
    av = np.abs(v)
    loc = np.nonzero((av[1:-1] <= av[:-2]) & (av[1:-1] <= av[2:]) & (av[1:-1] < 1e-3 * sup))[0] + 1
    for i in loc:
        if s[i - 1] == s[i + 1] and s[i] != 0 and min(x[i] - a, b - x[i]) > endpoint_tol:
            res = minimize_scalar(lambda t: abs(float(component(t))), bounds=(x[i - 1], x[i + 1]),
                                  method="bounded", options={"xatol": xtol})
            if res.fun < flat_tol * sup:
                warns.append(f"possible double zero near x = {res.x:.10g}")
    interior.sort()
    return ZeroList(interior, bool(za), bool(zb), warns, a, b)


def check_interior_interlacing(zphi, zpsi, coincide_tol: float | None = None):
    """Exactly one zero of each component between consecutive zeros of the other."""
    zp = list(getattr(zphi, "zeros", zphi))
    zs = list(getattr(zpsi, "zeros", zpsi))
    if coincide_tol is None:
        L = (getattr(zphi, "b", 1.0) - getattr(zphi, "a", 0.0))
        coincide_tol = 1e-10 * L
    violations = []
    for x in zp:
        for t in zs:
            if abs(x - t) <= coincide_tol:
                violations.append({"kind": "coincident", "x": x})
    for name, own, other in (("phi", zp, zs), ("psi", zs, zp)):
        for lo, hi in zip(own, own[1:]):
            k = sum(1 for t in other if lo < t < hi)
            if k != 1:
                violations.append({"kind": "gap", "component": name, "gap": [lo, hi], "count": k})
    return not violations, violations


# -- endpoint classification ----------------------------------------------------

@dataclass(frozen=True)
class LemmaRow:
    """One endpoint statement: which component is the reference, its hypothesised
    derivative sign, and the behaviour of the other component in case 1."""
    lemma: str
    side: str
    g_sign: str
    reference: str
    base_sign: int
    case1_sign: int
    case1: str


LEMMA_TABLE = (
    LemmaRow("lem1b", "a", NEGATIVE, "phi", +1, +1, NONE),
    LemmaRow("co4", "a", NEGATIVE, "psi", -1, +1, NONE),
    LemmaRow("lem3", "a", POSITIVE, "psi", -1, +1, ONCE),
    LemmaRow("co5", "a", POSITIVE, "phi", -1, +1, NONE),
    LemmaRow("lem5", "b", NEGATIVE, "phi", -1, +1, NONE),
    LemmaRow("lem5-corollary", "b", NEGATIVE, "psi", +1, +1, NONE),
    LemmaRow("lem6", "b", POSITIVE, "psi", +1, -1, NONE),
    LemmaRow("lem6-corollary", "b", POSITIVE, "phi", +1, +1, NONE),
)


def lemma_for(side: str, g_sign: str, reference: str) -> LemmaRow:
    for row in LEMMA_TABLE:
        if row.side == side and row.g_sign == g_sign and row.reference == reference:
            return row
    raise KeyError((side, g_sign, reference))


def wronskian_prediction(side: str, g_sign: str, reference: str, s_ref: int, s_other: int) -> str:
    """Prediction straight from the sign of W = Im(lam) G at the reference zero.

    Used as an independent check on the lemma table.
    """
    sigma = 1 if g_sign == POSITIVE else -1
    s_phi, s_psi = (s_ref, s_other) if reference == "phi" else (s_other, s_ref)
    if side == "a":
        none = s_psi == -sigma * s_phi if reference == "phi" else s_phi == sigma * s_psi
    else:
        none = s_psi == sigma * s_phi if reference == "phi" else sigma * s_psi == -s_phi
    return NONE if none else ONCE


def _flip(p):
    return ONCE if p == NONE else NONE


def classify_endpoint(side: str, g_sign: str, reference: str, d_ref: float, d_other: float,
                      ref_zeros, other_zeros, other_first_sign: int = 0, zero_tol: float = 0.0) -> dict:
    """Classification record for one (endpoint, reference component) pair.

    ``d_ref``/``d_other`` are the endpoint derivatives.  When ``d_other`` is
    (numerically) zero, ``other_first_sign`` is the sign the other component
    takes first when moving inward; it stands in for the derivative sign.
    """
    rec = {"lemma": None, "case": None, "respective": False, "reference": reference,
           "reference_zero": None, "predicted": None, "observed": None,
           "applicable": False, "match": None, "reason": None}
    ref_zeros, other_zeros = list(ref_zeros), list(other_zeros)
    if g_sign not in (POSITIVE, NEGATIVE):
        rec["reason"] = "G is not one-signed"
        return rec
    row = lemma_for(side, g_sign, reference)
    rec["lemma"] = row.lemma
    if not ref_zeros:
        rec["reason"] = f"{reference} has no interior zero"
        return rec
    if abs(d_ref) <= zero_tol:
        rec["reason"] = f"{reference}' vanishes at the endpoint"
        return rec
    s_ref = 1 if d_ref > 0 else -1
    if abs(d_other) > zero_tol:
        s_other, case3 = (1 if d_other > 0 else -1), False
    else:
        if other_first_sign == 0:
            rec["reason"] = "cannot resolve the sign of the other component"
            return rec
        # moving inward from b a positive first value means a negative derivative
        s_other = other_first_sign if side == "a" else -other_first_sign
        case3 = True
    mirror = s_ref * row.base_sign
    t = s_other * mirror
    pred = row.case1 if t == row.case1_sign else _flip(row.case1)
    rec["respective"] = mirror < 0
    rec["case"] = 3 if case3 else (1 if t == row.case1_sign else 2)
    rec["predicted"] = pred
    x0 = ref_zeros[0] if side == "a" else ref_zeros[-1]
    rec["reference_zero"] = float(x0)
    if side == "a":
        obs = sum(1 for t_ in other_zeros if t_ < x0)
    else:
        obs = sum(1 for t_ in other_zeros if t_ > x0)
    rec["observed"] = obs
    rec["applicable"] = True
    rec["match"] = (obs == 0) if pred == NONE else (obs == 1)
    return rec


def _first_sign(view: ComponentView, side: str, n: int = 4096, atol: float = DEFAULT_ATOL) -> int:
    xs = np.linspace(view.a, view.b, n + 1)
    if side == "b":
        xs = xs[::-1]
    v = view(xs[1:])
    big = np.nonzero(np.abs(v) > atol)[0]
    return 0 if big.size == 0 else int(np.sign(v[big[0]]))


def _classify_side(ghost, g_sign, zphi, zpsi, side):
    dphi, dpsi = (ghost.dphi_a, ghost.dpsi_a) if side == "a" else (ghost.dphi_b, ghost.dpsi_b)
    scale = max(abs(dphi), abs(dpsi))
    tol = 1e-9 * scale
    zp = list(getattr(zphi, "zeros", zphi))
    zs = list(getattr(zpsi, "zeros", zpsi))
    rows = [
        classify_endpoint(side, g_sign, "phi", dphi, dpsi, zp, zs,
                          _first_sign(ghost.psi, side) if abs(dpsi) <= tol else 0, tol),
        classify_endpoint(side, g_sign, "psi", dpsi, dphi, zs, zp,
                          _first_sign(ghost.phi, side) if abs(dphi) <= tol else 0, tol),
    ]
    used = [r["match"] for r in rows if r["applicable"]]
    return {"endpoint": side, "rows": rows, "match": all(used) if used else None}


def classify_left_endpoint(ghost: GhostDecomposition, g_sign: str, zphi, zpsi) -> dict:
    return _classify_side(ghost, g_sign, zphi, zpsi, "a")


def classify_right_endpoint(ghost: GhostDecomposition, g_sign: str, zphi, zpsi) -> dict:
    return _classify_side(ghost, g_sign, zphi, zpsi, "b")


def endpoint_nonseparation_audit(zphi: ZeroList, zpsi: ZeroList, coincide_tol: float | None = None) -> bool:
    """True when zeros counted *with* endpoint zeros fail to alternate strictly.

    For eigenfunctions this always holds (phi(a) = psi(a) = 0); a full
    alternation would contradict the theory and returns False.
    """
    L = zphi.b - zphi.a
    tol = 1e-10 * L if coincide_tol is None else coincide_tol
    merged = sorted([(x, 0) for x in zphi.with_endpoints()] + [(t, 1) for t in zpsi.with_endpoints()])
    if len(merged) < 2:
        return True
    for (x0, l0), (x1, l1) in zip(merged, merged[1:]):
        if l0 == l1 or x1 - x0 <= tol:
            return True
    return False


def interior_vanish_count(eigenpair, tol: float = 1e-6, n: int = 20001,
                          endpoint_tol: float | None = None) -> int:
    """Interior points where |y| has a local minimum below ``tol * sup|y|``."""
    traj = eigenpair.trajectory if isinstance(eigenpair, EigenPair) else eigenpair
    if tol <= 0:
        raise ValueError("tol must be positive")
    a, b = traj.a, traj.b
    etol = 1e-6 * (b - a) if endpoint_tol is None else endpoint_tol
    xs = np.linspace(a, b, n)
    av = np.abs(traj(xs))
    sup = max(float(np.max(av)), traj.sup_abs)
    cand = np.nonzero((av[1:-1] <= av[:-2]) & (av[1:-1] <= av[2:]) & (av[1:-1] < 1e-2 * sup))[0] + 1
    hits = []
    for i in cand:
        res = minimize_scalar(lambda t: float(np.abs(traj(t))), bounds=(xs[i - 1], xs[i + 1]),
                              method="bounded", options={"xatol": 1e-14 * (b - a)})
        if res.fun <= tol * sup and etol < res.x - a and etol < b - res.x:
            if not hits or res.x - hits[-1] > 1e-9 * (b - a):
                hits.append(res.x)
    return len(hits)


# -- report ---------------------------------------------------------------------------

@dataclass
class GhostReport:
    lam: complex
    decomposition: GhostDecomposition
    G_samples: GSamples
    G_sign: str
    identity_residual: float
    interlace_ok: bool
    interlace_violations: list
    phi_zeros: ZeroList
    psi_zeros: ZeroList
    left_case: dict
    right_case: dict
    endpoint_audit: bool
    interior_vanish_count: int
    weight: WeightProfile

    @property
    def G_b_relative(self) -> float:
        return self.G_samples.end_relative

    def failed_checks(self) -> list[str]:
        """Names of violated properties (asserted only for a single sign change of r)."""
        bad = []
        if self.identity_residual > IDENTITY_TOL:
            bad.append("identity_residual")
        if self.G_b_relative > G_END_TOL:
            bad.append("G(b)")
        if not self.endpoint_audit:
            bad.append("endpoint_audit")
        if self.weight.separates:
            if self.G_sign == INDEFINITE:
                bad.append("G_sign")
            if not self.interlace_ok:
                bad.append("interlacing")
            if self.left_case["match"] is False:
                bad.append("left_endpoint")
            if self.right_case["match"] is False:
                bad.append("right_endpoint")
            if self.interior_vanish_count != 0:
                bad.append("interior_vanish_count")
        return bad

    @property
    def ok(self) -> bool:
        return not self.failed_checks()

    def to_dict(self) -> dict:
        return {
            "lambda": [self.lam.real, self.lam.imag],
            "G_sign": self.G_sign,
            "G_b_relative": self.G_b_relative,
            "identity_residual": self.identity_residual,
            "interlace_ok": self.interlace_ok,
            "interlace_violations": self.interlace_violations,
            "phi_zeros": list(self.phi_zeros.zeros),
            "psi_zeros": list(self.psi_zeros.zeros),
            "left": self.left_case,
            "right": self.right_case,
            "endpoint_audit": self.endpoint_audit,
            "interior_vanish_count": self.interior_vanish_count,
            "weight_kind": self.weight.kind,
        }

    def plot_rows(self, n: int = 2001):
        """Rows (x, phi, psi, G) on a uniform grid, G interpolated from the samples."""
        xs = np.linspace(self.G_samples.x[0], self.G_samples.x[-1], n)
        phi, psi, _, _ = self.decomposition.values(xs)
        G = np.interp(xs, self.G_samples.x, self.G_samples.G)
        unit = math.ldexp(1.0, self.decomposition.trajectory.log2_scale)
        return np.column_stack([xs, phi * unit, psi * unit, G * unit * unit])


def analyze_ghost(problem: SLProblem, target, eigen_tol: float = EIGEN_TOL, n_samples: int = 2001,
                  endpoint_tol: float | None = None, rtol: float = ANALYSIS_RTOL) -> GhostReport:
    """Full ghost analysis for an eigenpair or an approximate eigenvalue.

    A bare number is first polished by Newton's method; the trajectory is
    recomputed at ``rtol`` so that the identity check is not limited by the
    search tolerance.
    """
    if isinstance(target, EigenPair):
        lam = target.lam
    else:
        lam, info = newton_refine(problem, complex(target), eigen_tol)
        if not info.converged:
            raise ValueError(f"no eigenvalue found near {target} ({info.message or info.residual})")
    if abs(lam.imag) <= eigen_tol * max(1.0, abs(lam)):
        raise ValueError(f"eigenvalue {lam} is real to within the tolerance; no ghost to analyse")
    if lam.imag < 0:
        lam = lam.conjugate()
    pair = make_eigenpair(problem, lam, rtol=rtol, atol=1e-300)
    ghost = decompose(pair)
    samples, sign = compute_G(problem, ghost, n_samples, strict=False)
    res = identity_residual(ghost, samples)
    zphi = locate_zeros(ghost.phi, endpoint_tol)
    zpsi = locate_zeros(ghost.psi, endpoint_tol)
    ok, viol = check_interior_interlacing(zphi, zpsi)
    left = classify_left_endpoint(ghost, sign, zphi, zpsi)
    right = classify_right_endpoint(ghost, sign, zphi, zpsi)
    audit = endpoint_nonseparation_audit(zphi, zpsi)
    vanish = interior_vanish_count(pair)
    return GhostReport(lam, ghost, samples, sign, res, ok, viol, zphi, zpsi, left, right, audit,
                       vanish, classify_weight(problem.r))
