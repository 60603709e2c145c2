import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ghostspec import oracles
from ghostspec.integrator import integrate
from ghostspec.spectrum import Rect, find_nonreal, find_real, newton_refine

AI0 = 0.35502805388781723926
BI0 = 0.61492662744600073515
AIP0 = -0.25881940379280679840


def test_airy_values_at_origin():
    ai, aip, bi, bip = oracles.airy_pair(0.0, derivatives=True)
    assert ai == pytest.approx(AI0, rel=1e-15)
    assert bi == pytest.approx(BI0, rel=1e-15)
    assert aip == pytest.approx(AIP0, rel=1e-15)
    assert bip == pytest.approx(-math.sqrt(3) * AIP0, rel=1e-15)


@given(st.complex_numbers(max_magnitude=6.0, allow_nan=False, allow_infinity=False))
@settings(max_examples=40, deadline=None)
def test_airy_wronskian(z):
    ai, aip, bi, bip = oracles.airy_pair(z, derivatives=True)
    assert abs(ai * bip - aip * bi - 1 / math.pi) <= 1e-10 * max(1.0, abs(ai * bip))


def test_airy_ode_by_differences():
    z, h = 1.0 + 1.0j, 1e-4
    f = lambda t: oracles.airy_pair(t)[0]
    second = (f(z + h) - 2 * f(z) + f(z - h)) / h ** 2
    assert abs(second - z * f(z)) <= 1e-6


def test_airy_domain_guard():
    with pytest.raises(oracles.DomainExceeded):
        oracles.airy_pair(9.0)


def test_dispersion_conjugate_symmetry_and_reality():
    z = 10 + 2j
    assert oracles.dispersion_exa1(np.conj(z)) == pytest.approx(np.conj(oracles.dispersion_exa1(z)))
    assert oracles.dispersion_exa3(np.conj(z)) == pytest.approx(np.conj(oracles.dispersion_exa3(z)))
    for f in (oracles.dispersion_exa1, oracles.dispersion_exa3):
        assert abs(np.imag(f(3.7))) <= 1e-14 * max(1.0, abs(f(3.7)))


def test_dispersion_equals_shooting_value(examples):
    for eid, f in (("exa1", oracles.dispersion_exa1), ("exa3", oracles.dispersion_exa3)):
        p = examples[eid].problem.with_slope(1.0)
        for lam in (3 + 1j, -12 + 4j, 40 + 0.5j):
            t = integrate(p, lam, rtol=1e-12, atol=1e-300)
            d = t.end_value * math.ldexp(1.0, t.log2_scale)
            assert d == pytest.approx(complex(f(lam)), rel=1e-9, abs=1e-12)


def test_constant_weight_eigs():
    vals = oracles.constant_weight_eigs(-40.0, -1.0, 1.0, 5)
    assert vals == pytest.approx([-37.5326, -30.1304, -17.7933, -0.5216, 21.6850], abs=1e-4)
    assert oracles.negative_count_constant(-40.0, -1.0, 1.0) == 4
    assert oracles.negative_count_constant(2.0, -1.0, 1.0) == 0
    with pytest.raises(ValueError):
        oracles.constant_weight_eigs(0.0, 0.0, 1.0, 0)


def test_constant_weight_roots_match_solver():
    from ghostspec.problem import PiecewisePoly, SLProblem
    p = SLProblem(-1, 1, PiecewisePoly.constant(-40.0, -1, 1), PiecewisePoly.constant(1.0, -1, 1))
    got = find_real(p, -45, 25)
    assert got == pytest.approx(oracles.constant_weight_eigs(-40.0, -1, 1, 5), abs=1e-8)


def test_exa2_eigenfunction_properties(examples):
    op = examples["exa2"]
    lam, _ = newton_refine(op.problem, op.quoted)
    y0 = oracles.eigenfunction_exa2(-1.0, lam)
    y1 = oracles.eigenfunction_exa2(1.0, lam)
    _, dy0 = oracles.eigenfunction_exa2(-1.0, lam, derivative=True)
    assert abs(y0) <= 1e-12 and abs(y1) <= 1e-8
    assert dy0 == pytest.approx(1 - 1j, rel=1e-12)
    x, h = 0.3, 1e-4
    f = lambda s: oracles.eigenfunction_exa2(s, lam)
    ypp = (f(x + h) - 2 * f(x) + f(x - h)) / h ** 2
    assert abs(-ypp - (7 + lam * x) * f(x)) <= 1e-5 * abs(f(x))
    with pytest.raises(ValueError):
        oracles.eigenfunction_exa2(0.0, 0.0)


def test_exa2_eigenfunction_matches_integrator(examples):
    op = examples["exa2"]
    lam, _ = newton_refine(op.problem, op.quoted)
    xs = np.linspace(-1, 1, 101)
    t = integrate(op.problem, lam, rtol=1e-12, atol=1e-300)
    yi = t(xs) * math.ldexp(1.0, t.log2_scale)
    yo = oracles.eigenfunction_exa2(xs, lam)
    assert np.max(np.abs(yi - yo)) / np.max(np.abs(yo)) <= 1e-8


@pytest.mark.parametrize("eid,f", [("exa1", oracles.dispersion_exa1_scaled),
                                   ("exa3", oracles.dispersion_exa3_scaled)])
def test_solver_roots_solve_dispersion(examples, eid, f):
    op = examples[eid]
    pairs = find_nonreal(op.problem, Rect(*op.box))
    assert pairs
    for pr in pairs:
        assert f(pr.lam, op.params["q"]) <= 1e-6
    assert min(abs(pr.lam - op.quoted) for pr in pairs) <= 1e-4


def test_registry():
    ids = [o.id for o in oracles.registry()]
    assert ids == list(oracles.EXAMPLE_IDS)
    with pytest.raises(KeyError):
        oracles.example_problem("exa9")
