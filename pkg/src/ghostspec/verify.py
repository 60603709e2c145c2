"""Invariant pipelines for the built-in examples and random indefinite problems."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import oracles
from .ghosts import analyze_ghost
from .integrator import convergence_order, integrate, shoot
from .problem import PiecewisePoly, SLProblem
from .spectrum import (NonConvergence, Rect, count_in_box, richardson_count_N,
                       search_nonreal)

RANDOM_RECT = Rect(-100.0, 100.0, 1e-3, 50.0)
PROPERTY_IDENTITY_TOL = 1e-6
CONJ_TOL = 1e-10
MIN_ORDER = 4.0


def random_th3_problem(rng: np.random.Generator, a: float = -1.0, b: float = 1.0,
                       name: str | None = None) -> SLProblem:
    """Indefinite problem whose weight changes sign once, possibly through a zero piece.

    q is piecewise constant (1-3 pieces, values in [-50, 10]); r takes values
    in {1, 2} times the block sign, with an optional zero piece of length at
    most (b - a)/3 strictly inside the interval.
    """
    L = b - a
    nq = int(rng.integers(1, 4))
    qcuts = np.sort(rng.uniform(a + 0.05 * L, b - 0.05 * L, nq - 1))
    q = PiecewisePoly.step((a, *qcuts, b), rng.uniform(-50.0, 10.0, nq).round(6))

    s = 1 if rng.random() < 0.5 else -1
    c = float(rng.uniform(a + 0.2 * L, b - 0.2 * L))
    zero_len = float(rng.uniform(0.02, 1 / 3) * L) if rng.random() < 0.5 else 0.0
    d = min(c + zero_len, b - 0.1 * L)
    bps, vals = [a], []
    if rng.random() < 0.3:  # split the first sign block
        m = float(rng.uniform(a + 0.05 * L, c - 0.05 * L))
        bps.append(m)
        vals.append(s * int(rng.integers(1, 3)))
    vals.append(s * int(rng.integers(1, 3)))
    bps.append(c)
    if d > c:
        vals.append(0)
        bps.append(d)
    vals.append(-s * int(rng.integers(1, 3)))
    bps.append(b)
    r = PiecewisePoly.step(tuple(round(x, 6) for x in bps), vals)
    return SLProblem(a, b, q, r, 1.0, name)


def random_problems(count: int, seed: int) -> list[SLProblem]:
    rng = np.random.default_rng(seed)
    return [random_th3_problem(rng, name=f"random-{seed}-{i}") for i in range(count)]


def with_linear_ramp(problem: SLProblem, slope: float = 5.0) -> SLProblem:
    """Same problem with ``slope * (x - a)`` added to q (forces the Runge-Kutta route)."""
    q = problem.q
    pieces = []
    for j, p in enumerate(q.pieces):
        c = list(p) + [0.0] * (2 - len(p)) if len(p) < 2 else list(p)
        c[0] += slope * (q.breakpoints[j] - problem.a)
        c[1] += slope
        pieces.append(tuple(c))
    return SLProblem(problem.a, problem.b, PiecewisePoly(q.breakpoints, tuple(pieces)),
                     problem.r, problem.init_slope, problem.name)


@dataclass
class CheckResult:
    label: str
    checks: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)
    ghosts: int = 0
    problem: dict | None = None
    error: str | None = None

    def record(self, name: str, ok: bool, detail=None):
        self.checks[name] = bool(self.checks.get(name, True) and ok)
        if detail is not None:
            self.details.setdefault(name, []).append(detail)

    @property
    def ok(self) -> bool:
        return self.error is None and all(self.checks.values())

    @property
    def failed(self) -> list[str]:
        return [k for k, v in self.checks.items() if not v] + (["error"] if self.error else [])


def conjugate_symmetry_error(problem: SLProblem, lams) -> float:
    """max |D(conj l) - conj D(l)| / max(|D|, sup|y|) over the given points."""
    lams = np.asarray(lams, dtype=complex)
    s1 = shoot(problem, lams, slope=1.0)
    s2 = shoot(problem, np.conj(lams), slope=1.0)
    # same trajectory structure, so exponents agree up to the conjugation
    d1 = s1.unscaled(s1.y)
    d2 = s2.unscaled(s2.y)
    scale = np.maximum(s1.unscaled(s1.sup), np.abs(d1))
    return float(np.max(np.abs(d2 - np.conj(d1)) / scale))


def check_problem(problem: SLProblem, rect: Rect = RANDOM_RECT, label: str | None = None,
                  identity_tol: float = PROPERTY_IDENTITY_TOL, seed: int = 0) -> CheckResult:
    """Run the property suite on one problem; every found ghost is analysed."""
    res = CheckResult(label or problem.name or "problem", problem=problem.to_dict())
    try:
        search = search_nonreal(problem, rect)
    except NonConvergence as exc:
        res.error = str(exc)
        return res
    res.record("search_resolved", not search.failures, search.failures or None)
    found = len(search.pairs)
    res.record("count_matches_roots", search.total == found, {"count": search.total, "roots": found})
    for box, n in search.boxes[:3]:
        res.record("box_recount", count_in_box(problem, box) == n)
    res.ghosts = found
    rng = np.random.default_rng(seed)
    pts = rng.uniform(rect.re0, rect.re1, 4) + 1j * rng.uniform(0.1, rect.im1, 4)
    err = conjugate_symmetry_error(problem, pts)
    res.record("conjugate_symmetry", err <= CONJ_TOL, err)
    for pair in search.pairs:
        rep = analyze_ghost(problem, pair)
        tag = f"{pair.lam.real:.6g}{pair.lam.imag:+.6g}i"
        res.record("G_one_signed", rep.G_sign in ("positive", "negative"), tag)
        res.record("G_end", rep.G_b_relative <= 1e-8, rep.G_b_relative)
        res.record("identity", rep.identity_residual <= identity_tol, rep.identity_residual)
        res.record("interlacing", rep.interlace_ok, rep.interlace_violations or None)
        for side in (rep.left_case, rep.right_case):
            res.record("endpoint_" + side["endpoint"], side["match"] is not False,
                       [r for r in side["rows"] if r["match"] is False] or None)
        res.record("endpoint_audit", rep.endpoint_audit)
        res.record("no_interior_vanishing", rep.interior_vanish_count == 0, rep.interior_vanish_count)
    lam0 = search.pairs[0].lam if search.pairs else complex(0.5 * (rect.re0 + rect.re1), 5.0)
    ramp = with_linear_ramp(problem)
    co = convergence_order(ramp, lam0)
    at_floor = all(e <= co["floor"] for e in co["errors"][1:])
    res.record("convergence_order", co["order"] >= MIN_ORDER or at_floor, co["order"])
    return res


def _check_random(args):
    idx, seed, problem = args
    return idx, check_problem(problem, seed=seed + idx)


def thread_count(default: int = 1) -> int:
    try:
        return max(1, int(os.environ.get("GHOSTSPEC_THREADS", default)))
    except ValueError:
        return default


def verify_random(count: int, seed: int, threads: int | None = None) -> list[CheckResult]:
    """Property suite on ``count`` generated problems, ordered by index."""
    probs = random_problems(count, seed)
    jobs = [(i, seed, p) for i, p in enumerate(probs)]
    threads = thread_count() if threads is None else threads
    if threads <= 1:
        out = [_check_random(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            out = list(ex.map(_check_random, jobs))
    out.sort(key=lambda t: t[0])
    return [r for _, r in out]


def verify_example(eid: str) -> CheckResult:
    """Examples: oracle agreement, Richardson count and the ghost invariants."""
    op = oracles.example_problem(eid)
    prob = op.problem
    res = CheckResult(eid, problem=prob.to_dict())
    try:
        search = search_nonreal(prob, Rect(*op.box))
    except NonConvergence as exc:
        res.error = str(exc)
        return res
    res.ghosts = len(search.pairs)
    near = [p for p in search.pairs if abs(p.lam - op.quoted) <= 5e-3]
    res.record("quoted_eigenvalue", len(near) == 1, [complex(p.lam) for p in search.pairs])
    expected_N = oracles.negative_count_constant(prob.q.bounds()[0], prob.a, prob.b)
    N = richardson_count_N(prob)
    res.record("richardson_N", N == expected_N, {"N": N, "closed_form": expected_N})
    full = search_nonreal(prob, RANDOM_RECT)
    res.record("M_le_N", len(full.pairs) <= N, {"M": len(full.pairs), "N": N})
    if near:
        lam = near[0].lam
        if eid == "exa1":
            v = oracles.dispersion_exa1_scaled(lam, op.params["q"])
            res.record("oracle_dispersion", v <= 1e-6, float(v))
        elif eid == "exa3":
            v = oracles.dispersion_exa3_scaled(lam, op.params["q"])
            res.record("oracle_dispersion", v <= 1e-6, float(v))
        elif eid == "exa2":
            traj = integrate(prob, lam, rtol=1e-12, atol=1e-300)
            xs = np.linspace(prob.a, prob.b, 101)
            yo = oracles.eigenfunction_exa2(xs, lam, complex(prob.init_slope))
            yi = traj(xs) * math.ldexp(1.0, traj.log2_scale)
            err = float(np.max(np.abs(yo - yi)) / np.max(np.abs(yo)))
            res.record("oracle_eigenfunction", err <= 1e-8, err)
        rep = analyze_ghost(prob, near[0])
        res.record("identity", rep.identity_residual <= 1e-7, rep.identity_residual)
        res.record("G_end", rep.G_b_relative <= 1e-8, rep.G_b_relative)
        res.record("interlacing", rep.interlace_ok, rep.interlace_violations or None)
        res.record("endpoints", rep.left_case["match"] is not False and rep.right_case["match"] is not False)
        res.record("no_interior_vanishing", rep.interior_vanish_count == 0)
        res.details["identity_residual"] = rep.identity_residual
    return res


def summarize(results) -> tuple[int, int]:
    passed = sum(1 for r in results if r.ok)
    return passed, len(results)
