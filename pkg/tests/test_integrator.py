import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ghostspec.integrator import (IntegrationError, State, convergence_order, entire_cs,
                                  entire_ds, integrate, propagate_constant, shoot,
                                  variational_integrate)
from ghostspec.problem import PiecewisePoly, SLProblem
from ghostspec.spectrum import miss_distance


def unscaled_end(t):
    return t.end_value * math.ldexp(1.0, t.log2_scale)


def airy_problem():
    return SLProblem(-1.0, 1.0, PiecewisePoly.constant(-7.0, -1.0, 1.0),
                     PiecewisePoly((-1.0, 1.0), ((-1.0, 1.0),)), 1 - 1j)


@pytest.mark.parametrize("w", [0.0, 1e-8, 0.1 + 0.2j, -0.24, 0.26, 3.0 - 4j, -50.0, 400.0 + 1j])
def test_entire_functions_match_trig(w):
    c, s = entire_cs(np.array([w]))
    if w == 0:
        assert c[0] == 1 and s[0] == 1
        return
    root = cmath.sqrt(w)
    assert c[0] == pytest.approx(cmath.cos(root), rel=1e-14, abs=1e-15)
    assert s[0] == pytest.approx(cmath.sin(root) / root, rel=1e-14, abs=1e-15)


@pytest.mark.parametrize("w", [0.3 + 0.1j, -0.9, 2.0, -30.0 + 5j])
def test_entire_ds_is_derivative(w):
    d = 1e-6
    _, sp = entire_cs(np.array([w + d]))
    _, sm = entire_cs(np.array([w - d]))
    fd = (sp[0] - sm[0]) / (2 * d)
    assert entire_ds(np.array([w]))[0] == pytest.approx(fd, rel=1e-7)


def test_free_particle_step():
    s = propagate_constant(0.0, 0.0, 3 + 4j, State(0.5, 1 + 1j, 2 - 1j), 0.25)
    assert s.x == 0.75
    assert s.y == pytest.approx(1 + 1j + 0.25 * (2 - 1j), rel=1e-15)
    assert s.dy == pytest.approx(2 - 1j, rel=1e-15)


def test_constant_step_matches_closed_form_eigenfunction():
    lam = 26.9376 + 6.9215j
    s = propagate_constant(-40.0, -1.0, lam, State(-1.0, 0.0, 1.0), 1.0)
    k = cmath.sqrt(40 - lam)
    assert s.y == pytest.approx(cmath.sin(k) / k, rel=1e-12)
    assert s.dy == pytest.approx(cmath.cos(k), rel=1e-12)


@given(st.floats(-50, 50), st.floats(-2, 2), st.complex_numbers(max_magnitude=60),
       st.floats(0.01, 1.0))
@settings(max_examples=200, deadline=None)
def test_half_steps_compose(q0, r0, lam, h):
    s0 = State(0.0, 0.3 - 0.1j, 1.0 + 0.5j)
    full = propagate_constant(q0, r0, lam, s0, h)
    half = propagate_constant(q0, r0, lam, propagate_constant(q0, r0, lam, s0, h / 2), h / 2)
    scale = max(abs(full.y), abs(full.dy), 1.0)
    assert abs(full.y - half.y) <= 1e-12 * scale
    assert abs(full.dy - half.dy) <= 1e-12 * scale


def test_overflow_guard():
    with pytest.raises(OverflowError):
        propagate_constant(1e6, 0.0, 0.0, State(0.0, 0.0, 1.0), 1.0)
    with pytest.raises(ValueError):
        propagate_constant(0.0, 0.0, 0.0, State(0.0, 0.0, 1.0), 0.0)


def test_airy_eigenvalue_miss_distance_is_small():
    t = integrate(airy_problem(), 12.3076j)
    assert abs(t.end_value) <= 1e-3 * t.sup_abs
    assert t.y[0] == 0 and t.dy[0] == 1 - 1j
    assert "adaptive" in t.methods


def test_trajectory_nodes_include_breakpoints():
    q = PiecewisePoly((-1.0, 0.3, 1.0), ((2.0, 1.0), (-3.0,)))
    p = SLProblem(-1.0, 1.0, q, PiecewisePoly.step((-1.0, 0.0, 1.0), (-1.0, 1.0)))
    t = integrate(p, 4 + 2j)
    for bp in (-1.0, 0.0, 0.3, 1.0):
        assert np.any(t.x == bp)
    assert np.all(np.diff(t.x) > 0)
    y_nodes = t(t.x)
    assert np.allclose(y_nodes, t.y, rtol=1e-13, atol=1e-15)


def test_real_lambda_gives_real_trajectory():
    t = integrate(airy_problem().with_slope(1.0), 3.5)
    xs = np.linspace(-1, 1, 301)
    assert np.max(np.abs(t(xs).imag)) <= 1e-12


def test_conjugation_and_linearity():
    p = airy_problem()
    t = integrate(p, 4 + 9j)
    tc = integrate(p.with_slope(np.conj(p.init_slope)), 4 - 9j)
    assert np.allclose(tc.y, np.conj(t.y), rtol=1e-12, atol=1e-14)
    t2 = integrate(p.with_slope(3 * p.init_slope), 4 + 9j)
    xs = np.linspace(-1, 1, 77)
    assert np.allclose(t2(xs), 3 * t(xs), rtol=1e-8, atol=1e-10)


def test_wronskian_constant():
    p = airy_problem()
    lam = 2 + 5j
    t1 = integrate(p, lam, State(-1.0, 0.0, 1.0), rtol=1e-12, atol=1e-14)
    t2 = integrate(p, lam, State(-1.0, 1.0, 0.0), rtol=1e-12, atol=1e-14)
    xs = np.linspace(-1, 1, 501)
    y1, d1 = t1.evaluate(xs)
    y2, d2 = t2.evaluate(xs)
    W = y1 * d2 - d1 * y2
    assert np.max(np.abs(W - W[0])) <= 1e-10 * abs(W[0])


def test_dense_output_against_tight_run():
    p = airy_problem()
    t = integrate(p, 12.3076j)
    ref = integrate(p, 12.3076j, rtol=1e-13, atol=1e-300)
    xs = np.linspace(-1, 1, 1001)
    err = np.max(np.abs(t(xs) - ref(xs)))
    assert err <= 1e-8 * ref.sup_abs
    assert t.error_bound < 1e-6 * t.sup_abs


def test_defect_falls_with_tolerance_and_order():
    p = airy_problem()
    ref = unscaled_end(integrate(p, 12j, rtol=1e-13, atol=1e-300))
    errs = [abs(unscaled_end(integrate(p, 12j, rtol=tol, atol=tol * 1e-2)) - ref)
            for tol in (1e-6, 1e-8, 1e-10)]
    assert errs[0] > errs[1] > errs[2]
    co = convergence_order(p, 12j)
    assert co["order"] >= 4


def test_convergence_order_undefined_for_closed_form():
    p = SLProblem(0.0, 1.0, PiecewisePoly.constant(1.0, 0.0, 1.0), PiecewisePoly.constant(1.0, 0.0, 1.0))
    assert math.isnan(convergence_order(p, 3.0)["order"])


def test_rescaling_keeps_large_solutions_finite():
    p = SLProblem(0.0, 1.0, PiecewisePoly.constant(4e5, 0.0, 1.0), PiecewisePoly.constant(1.0, 0.0, 1.0))
    t = integrate(p, 0.0)
    assert t.log2_scale > 0
    k = math.sqrt(4e5)
    expected_log2 = (k - math.log(2 * k)) / math.log(2)   # y = sinh(kx)/k
    got = math.log2(abs(t.end_value)) + t.log2_scale
    assert got == pytest.approx(expected_log2, rel=1e-10)
    shot = shoot(p, [0.0, 1.0])
    assert np.all(np.isfinite(shot.y))


def test_step_underflow_is_reported():
    p = SLProblem(0.0, 1.0, PiecewisePoly((0.0, 1.0), ((0.0, 0.0, 0.0, 1e30),)),
                  PiecewisePoly.constant(1.0, 0.0, 1.0))
    with pytest.raises((IntegrationError, OverflowError)):
        integrate(p, 0.0)


def _fd(problem, lam, d=1e-6):
    return (miss_distance(problem, lam + d) - miss_distance(problem, lam - d)) / (2 * d)


@pytest.mark.parametrize("eid,lam", [("exa1", 26 + 7j), ("exa4", 3.8741j), ("exa2", 12.3j)])
def test_variational_matches_finite_differences(examples, eid, lam):
    p = examples[eid].problem
    base = integrate(p, lam)
    dd = variational_integrate(p, lam, base)
    assert dd == pytest.approx(_fd(p, lam), rel=1e-5)


def test_variational_zero_without_weight():
    p = SLProblem(0.0, 1.0, PiecewisePoly.constant(2.0, 0.0, 1.0), PiecewisePoly.constant(0.0, 0.0, 1.0))
    base = integrate(p, 1 + 1j)
    assert abs(variational_integrate(p, 1 + 1j, base)) <= 1e-12


def test_variational_rejects_foreign_trajectory(examples):
    p = examples["exa1"].problem
    base = integrate(p, 1.0)
    with pytest.raises(ValueError):
        variational_integrate(p, 2.0, base)


def test_batch_equals_single():
    p = airy_problem()
    lams = np.array([1 + 1j, 12.3j, -5 + 20j])
    batch = shoot(p, lams, rtol=1e-12, atol=1e-300)
    for i, lam in enumerate(lams):
        single = integrate(p, lam, rtol=1e-12, atol=1e-300)
        assert batch.unscaled(batch.y)[i] == pytest.approx(unscaled_end(single), rel=1e-9)
