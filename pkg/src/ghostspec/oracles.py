"""Closed-form cross-checks for the four worked examples.

Everything here is written without touching the integrator: the entire
functions ``cos(sqrt w)`` and ``sin(sqrt w)/sqrt w`` are re-derived locally
and the Airy functions are summed from their Maclaurin series.

Sign conventions.  exa1 and exa4 are ``-y'' - q y = lambda sgn(x) y`` on
[-1, 1], which in standard form has potential ``-q``; with that potential
q = 40 gives the reference eigenvalue 26.9376 + 6.9215i.  The eigenfunction
used for plots is ``sin(sqrt(q - lambda)(1 + x))``, so the registered
problems carry ``init_slope = sqrt(q - lambda_ref)``.  exa3 solves
``-y'' - q y = lambda rho y`` on [-2, 2] with ``rho = (-1, 0, +1)``, the
sign choice under which the closed-form piecewise solutions solve the
equation.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .problem import PiecewisePoly, SLProblem


class DomainExceeded(ValueError):
    """Argument outside the region where the Airy series is trusted."""


def _cos_sqrt(w):
    return np.cos(np.sqrt(np.asarray(w, dtype=complex)))


def _sinc_sqrt(w):
    w = np.asarray(w, dtype=complex)
    root = np.sqrt(w)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(root == 0, 1.0 + 0j, np.sin(root) / np.where(root == 0, 1, root))
    return out


# -- exa1 / exa4 -----------------------------------------------------------------

def dispersion_exa1_terms(z, q):
    """The two products whose sum vanishes at the eigenvalues of exa1."""
    left = q - np.asarray(z, dtype=complex)    # r = -1 on [-1, 0]
    right = q + np.asarray(z, dtype=complex)   # r = +1 on [0, 1]
    return _cos_sqrt(right) * _sinc_sqrt(left), _sinc_sqrt(right) * _cos_sqrt(left)


def dispersion_exa1(z, q=40.0):
    """Entire form of the exa1 dispersion relation.

    Equals y(1) for y(-1) = 0, y'(-1) = 1; multiplying by
    sqrt(q - z) sqrt(q + z) gives back the usual product form.
    """
    t1, t2 = dispersion_exa1_terms(z, q)
    return t1 + t2


def dispersion_exa1_scaled(z, q=40.0):
    t1, t2 = dispersion_exa1_terms(z, q)
    return np.abs(t1 + t2) / (np.abs(t1) + np.abs(t2))


# -- exa3 -----------------------------------------------------------------------

def dispersion_exa3_terms(lam, q=8.0):
    """The four groups A', B', C', D' divided by sqrt(q+l) sqrt(q) sqrt(q-l), times
    the sin/cos of 2 sqrt(q + lambda) they multiply, written branch-free.

    With k = sqrt(q - lam), s = sqrt(q), m = sqrt(q + lam):
    A'/(m s k) = sin(m) Y1,  B'/(m s k) = cos(m) P1 / m,
    C'/(m s k) = cos(m) Y1,  D'/(m s k) = -(sin(m)/m) P1,
    where Y1 = y(1) and P1 = y'(1) after the zero-weight middle piece.
    """
    lam = np.asarray(lam, dtype=complex)
    kk, mm, ss = q - lam, q + lam, complex(q)
    sk, ck = _sinc_sqrt(kk), _cos_sqrt(kk)
    s2, c2 = 2.0 * _sinc_sqrt(4 * ss), _cos_sqrt(4 * ss)     # sin(2s)/s, cos(2s)
    y1 = c2 * sk + s2 * ck
    p1 = c2 * ck - q * s2 * sk
    sm, cm = _sinc_sqrt(mm), _cos_sqrt(mm)
    sin2m_over_m, cos2m = 2.0 * _sinc_sqrt(4 * mm), _cos_sqrt(4 * mm)
    a_term = mm * sm * sin2m_over_m * y1     # sin(m) sin(2m) Y1
    b_term = cm * sin2m_over_m * p1          # cos(m) sin(2m)/m P1
    c_term = cm * cos2m * y1
    d_term = -sm * cos2m * p1
    return a_term, b_term, c_term, d_term


def dispersion_exa3(lam, q=8.0):
    """y(2) for the exa3 problem with y(-2) = 0, y'(-2) = 1 (entire in lambda)."""
    return sum(dispersion_exa3_terms(lam, q))


def dispersion_exa3_scaled(lam, q=8.0):
    terms = dispersion_exa3_terms(lam, q)
    return np.abs(sum(terms)) / sum(np.abs(t) for t in terms)


# -- exa2: Airy functions ------------------------------------------------------

AIRY_MAX_ABS = 8.0
_AIRY_DPS = 40


def airy_pair(z, derivatives: bool = False):
    """Ai(z), Bi(z) (and Ai', Bi' if asked) from the Maclaurin series.

    Ai = c1 f - c2 g and Bi = sqrt(3)(c1 f + c2 g) with the basis series
    f = sum 3^k (1/3)_k z^(3k)/(3k)!, g = sum 3^k (2/3)_k z^(3k+1)/(3k+1)!.
    The sums run in 40-digit arithmetic: near the positive real axis Ai is
    exponentially smaller than f and g, and double precision would lose
    about 14 digits to cancellation at |z| = 8.
    """
    z = complex(z)
    if abs(z) > AIRY_MAX_ABS:
        raise DomainExceeded(f"|z| = {abs(z):.3g} > {AIRY_MAX_ABS}")
    with mpmath.workdps(_AIRY_DPS):
        zz = mpmath.mpc(z.real, z.imag)
        z3 = zz ** 3
        eps = mpmath.mpf(10) ** (-_AIRY_DPS)
        f = tf = mpmath.mpc(1)
        g = tg = zz
        fp = tfp = zz * zz / 2
        gp = tgp = mpmath.mpc(1)
        k = 1
        while True:
            tf = tf * z3 / ((3 * k - 1) * (3 * k))
            tg = tg * z3 / ((3 * k) * (3 * k + 1))
            tgp = tgp * z3 / ((3 * k) * (3 * k - 2))
            f += tf
            g += tg
            gp += tgp
            if k > 1:
                tfp = tfp * z3 / ((3 * k - 1) * (3 * k - 3))
                fp += tfp
            k += 1
            if k > 3 and max(abs(tf), abs(tg), abs(tfp), abs(tgp)) < eps * (1 + abs(f) + abs(g)):
                break
        c1 = mpmath.mpf(3) ** (mpmath.mpf(-2) / 3) / mpmath.gamma(mpmath.mpf(2) / 3)
        c2 = mpmath.mpf(3) ** (mpmath.mpf(-1) / 3) / mpmath.gamma(mpmath.mpf(1) / 3)
        r3 = mpmath.sqrt(3)
        ai = complex(c1 * f - c2 * g)
        bi = complex(r3 * (c1 * f + c2 * g))
        if not derivatives:
            return ai, bi
        aip = complex(c1 * fp - c2 * gp)
        bip = complex(r3 * (c1 * fp + c2 * gp))
    return ai, aip, bi, bip


def _cbrt(lam: complex) -> complex:
    """Principal cube root, argument in (-pi/3, pi/3]."""
    return cmath.exp(cmath.log(lam) / 3)


def eigenfunction_exa2(x, lam: complex, slope: complex = 1 - 1j, derivative: bool = False):
    """Solution of -y'' - (7 + lam x) y = 0 with y(-1) = 0, y'(-1) = slope.

    y = slope * pi * (Bi(t0) Ai(t) - Ai(t0) Bi(t)) / lam^(1/3) with
    t = -(lam x + 7)/lam^(2/3) and t0 = (lam - 7)/lam^(2/3); the principal
    cube root is used and any other fixed branch gives the same function.
    """
    lam = complex(lam)
    if lam == 0:
        raise ValueError("lambda must be non-zero")
    l13 = _cbrt(lam)
    l23 = l13 * l13
    ai0, bi0 = airy_pair((lam - 7) / l23)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.empty(xs.size, dtype=complex)
    dy = np.empty(xs.size, dtype=complex)
    for i, xv in enumerate(xs):
        ai, aip, bi, bip = airy_pair(-(lam * xv + 7) / l23, derivatives=True)
        y[i] = slope * math.pi * (bi0 * ai - ai0 * bi) / l13
        dy[i] = -slope * math.pi * (bi0 * aip - ai0 * bip)
    if np.ndim(x) == 0:
        y, dy = y[0], dy[0]
    return (y, dy) if derivative else y


# -- constant potential, unit weight ---------------------------------------------

def constant_weight_eigs(q_const: float, a: float, b: float, k_max: int) -> list[float]:
    """Dirichlet eigenvalues (k pi/(b - a))^2 + q_const, k = 1..k_max."""
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    L = b - a
    return [(k * math.pi / L) ** 2 + q_const for k in range(1, k_max + 1)]


def negative_count_constant(q_const: float, a: float, b: float) -> int:
    """Number of negative Dirichlet eigenvalues for a constant potential."""
    if q_const >= 0:
        return 0
    k_max = int(math.sqrt(-q_const) * (b - a) / math.pi) + 2
    return sum(1 for v in constant_weight_eigs(q_const, a, b, k_max) if v < 0)


# -- registry --------------------------------------------------------------------

@dataclass(frozen=True)
class OracleProblem:
    id: str
    params: dict
    problem: SLProblem
    quoted: complex
    quoted_label: str
    box: tuple[float, float, float, float]
    notes: str = field(default="", compare=False)


def _sgn_problem(q: float, name: str, slope: complex) -> SLProblem:
    return SLProblem(-1.0, 1.0, PiecewisePoly.constant(-q, -1.0, 1.0),
                     PiecewisePoly.step((-1.0, 0.0, 1.0), (-1.0, 1.0)), slope, name)


def example_problem(eid: str) -> OracleProblem:
    if eid == "exa1":
        q, lam = 40.0, 26.9376 + 6.9215j
        return OracleProblem("exa1", {"q": q}, _sgn_problem(q, "exa1", cmath.sqrt(q - lam)),
                             lam, "26.9376+6.9215i", (0.0, 60.0, 0.5, 30.0), "q=40")
    if eid == "exa2":
        prob = SLProblem(-1.0, 1.0, PiecewisePoly.constant(-7.0, -1.0, 1.0),
                         PiecewisePoly((-1.0, 1.0), ((-1.0, 1.0),)), 1 - 1j, "exa2")
        return OracleProblem("exa2", {}, prob, 12.3076j, "12.3076i", (-5.0, 5.0, 0.5, 30.0),
                             "r=x, potential -7")
    if eid == "exa3":
        q = 8.0
        prob = SLProblem(-2.0, 2.0, PiecewisePoly.constant(-q, -2.0, 2.0),
                         PiecewisePoly.step((-2.0, -1.0, 1.0, 2.0), (-1.0, 0.0, 1.0)), 1.0, "exa3")
        return OracleProblem("exa3", {"q": q}, prob, 6.29625j, "6.29625i", (-5.0, 5.0, 0.5, 30.0),
                             "q=8")
    if eid == "exa4":
        q, lam = math.pi ** 2 / 4 + 2, 3.8741j
        return OracleProblem("exa4", {"q": q}, _sgn_problem(q, "exa4", cmath.sqrt(q - lam)),
                             lam, "±3.8741i", (-5.0, 5.0, 0.5, 20.0), "q=π²/4+2")
    raise KeyError(f"unknown example {eid!r}")


EXAMPLE_IDS = ("exa1", "exa2", "exa3", "exa4")


def registry() -> list[OracleProblem]:
    return [example_problem(e) for e in EXAMPLE_IDS]
