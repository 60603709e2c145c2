import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ghostspec.ghosts import (INDEFINITE, NEGATIVE, NONE, ONCE, POSITIVE, ComponentView,
                              GhostDecomposition, InvariantViolation, ZeroList, analyze_ghost,
                              check_interior_interlacing, classify_endpoint, compute_G, decompose,
                              endpoint_nonseparation_audit, identity_residual,
                              interior_vanish_count, lemma_for, locate_zeros,
                              wronskian_prediction)
from ghostspec.integrator import integrate
from ghostspec.problem import PiecewisePoly, SLProblem
from ghostspec.spectrum import Rect, find_nonreal, make_eigenpair, newton_refine


class Func:
    def __init__(self, f, a, b):
        self.f, self.a, self.b = f, a, b

    def __call__(self, x):
        return self.f(np.asarray(x, dtype=float))


@pytest.fixture(scope="module")
def exa4_pair(examples):
    p = examples["exa4"].problem
    return p, find_nonreal(p, Rect(-5, 5, 0.5, 20))[0]


def test_decompose_exa2_no_rotation(examples):
    p = examples["exa2"].problem
    pair = find_nonreal(p, Rect(-5, 5, 0.5, 30))[0]
    g = decompose(pair)
    assert g.phase_rotation == 1
    assert (g.dphi_a, g.dpsi_a) == pytest.approx((1.0, -1.0))


def test_decompose_rotates_when_phi_slope_vanishes(exa4_pair):
    p, pair = exa4_pair
    q = p.with_slope(1j)
    g = decompose(make_eigenpair(q, pair.lam))
    assert g.phase_rotation == 1j
    assert g.dphi_a == pytest.approx(-1.0)
    assert g.dpsi_a == pytest.approx(0.0, abs=1e-15)


def test_decompose_conjugates_and_is_idempotent(exa4_pair):
    _, pair = exa4_pair
    g1 = decompose(pair)
    g2 = decompose(pair.conjugate())
    assert g2.lam.imag > 0
    assert g2.lam == g1.lam
    assert (g2.dphi_a, g2.dpsi_a, g2.dphi_b, g2.dpsi_b) == pytest.approx(
        (g1.dphi_a, g1.dpsi_a, g1.dphi_b, g1.dpsi_b))


def test_decompose_rejects_real(examples):
    pair = make_eigenpair(examples["exa1"].problem, 5.0)
    with pytest.raises(ValueError):
        decompose(pair)


def test_linear_independence(exa4_pair):
    p, pair = exa4_pair
    g = decompose(pair)
    xs = np.linspace(p.a, p.b, 501)
    phi, psi, dphi, dpsi = g.values(xs)
    W = dphi * psi - phi * dpsi
    samples, _ = compute_G(p, g)
    assert np.max(np.abs(W)) > 0
    assert np.max(np.abs(W)) == pytest.approx(g.lam.imag * samples.sup, rel=1e-6)


def test_G_exa4_negative_and_vanishing_at_b(exa4_pair):
    p, pair = exa4_pair
    g = decompose(pair)
    samples, sign = compute_G(p, g)
    assert sign == NEGATIVE
    assert samples.x[0] == p.a and samples.G[0] == 0.0
    assert samples.end_relative <= 1e-8
    with pytest.raises(ValueError):
        compute_G(p, g, n_samples=10)
    H = samples.G[-1] - samples.G
    inner = (samples.x > p.a + 1e-3) & (samples.x < p.b - 1e-3)
    assert np.all(H[inner] > 0)


def test_G_flat_where_weight_vanishes(examples):
    p = examples["exa3"].problem
    pair = find_nonreal(p, Rect(-5, 5, 0.5, 30))[0]
    samples, _ = compute_G(p, decompose(pair))
    sel = (samples.x >= -1) & (samples.x <= 1)
    assert np.ptp(samples.G[sel]) <= 1e-12 * samples.sup


def test_strict_G_rejects_indefinite_for_single_turning_point(exa4_pair):
    p, pair = exa4_pair
    bogus = decompose(make_eigenpair(p, 10 + 5j))       # not an eigenvalue
    assert compute_G(p, bogus, strict=False)[1] == INDEFINITE
    with pytest.raises(InvariantViolation):
        compute_G(p, bogus, strict=True)
    assert compute_G(p, decompose(pair))[1] == NEGATIVE


def test_identity_on_real_solution(examples):
    p = examples["exa1"].problem.with_slope(1.0)
    t = integrate(p, 5.491711180424647)
    pair = make_eigenpair(p, 5.491711180424647)
    g = GhostDecomposition(pair, ComponentView(t, 1.0, "re"), ComponentView(t, 1.0, "im"), 1.0,
                           1.0, 0.0, 0.0, 0.0)
    samples, _ = compute_G(p, g, strict=False)
    assert identity_residual(g, samples) <= 1e-12


@pytest.mark.parametrize("eid", ["exa1", "exa3"])
def test_identity_examples(examples, eid):
    op = examples[eid]
    pair = find_nonreal(op.problem, Rect(*op.box))[0]
    g = decompose(pair)
    samples, _ = compute_G(op.problem, g)
    assert identity_residual(g, samples) <= 1e-7


def test_locate_zeros_sine():
    z = locate_zeros(Func(lambda x: np.sin(np.pi * x), 0.0, 3.0))
    assert np.allclose(z.zeros, [1.0, 2.0], atol=1e-11)
    assert z.endpoint_zero_a and z.endpoint_zero_b
    assert not z.cluster_warnings
    with pytest.raises(ValueError):
        locate_zeros(Func(np.sin, 0.0, 1.0), endpoint_tol=0.0)


def test_locate_zeros_flags_double_zero():
    z = locate_zeros(Func(lambda x: (x - 0.3) ** 2 * (1 + x), 0.0, 1.0))
    assert z.zeros == []
    assert z.cluster_warnings


def test_zero_lists_stable_under_doubling(examples):
    op = examples["exa1"]
    pair = find_nonreal(op.problem, Rect(*op.box))[0]
    g = decompose(pair)
    for comp in (g.phi, g.psi):
        z1 = locate_zeros(comp)
        z2 = locate_zeros(comp, n_initial=2048)
        assert len(z1) == len(z2)
        assert np.allclose(z1.zeros, z2.zeros, atol=1e-10 * 2)
        xs = np.linspace(-1, 1, 20001)[1:-1]
        v = comp(xs)
        brute = int(np.count_nonzero(np.sign(v[1:]) != np.sign(v[:-1])))
        assert brute == len(z1)
        for x in z1.zeros:
            assert comp(x - 1e-6) * comp(x + 1e-6) < 0


def test_exa4_phi_positive(exa4_pair):
    _, pair = exa4_pair
    g = decompose(pair)
    assert locate_zeros(g.phi).zeros == []


def test_interlacing_synthetic():
    ok, viol = check_interior_interlacing([0.3, 0.7], [])
    assert not ok and viol[0]["gap"] == [0.3, 0.7]
    assert check_interior_interlacing([0.1, 0.5], [0.3, 0.8])[0]
    assert check_interior_interlacing([], [])[0]
    ok, viol = check_interior_interlacing([0.2, 0.6], [0.2, 0.4])
    assert not ok and viol[0]["kind"] == "coincident"


def test_classification_rows_synthetic():
    rec = classify_endpoint("a", NEGATIVE, "phi", 1.0, 1.0, [0.5], [])
    assert (rec["lemma"], rec["case"], rec["predicted"], rec["match"]) == ("lem1b", 1, NONE, True)
    rec = classify_endpoint("b", POSITIVE, "psi", 1.0, -1.0, [0.5], [])
    assert (rec["lemma"], rec["case"], rec["predicted"], rec["match"]) == ("lem6", 1, NONE, True)
    rec = classify_endpoint("a", NEGATIVE, "phi", -1.0, -1.0, [0.5], [0.2])
    assert rec["respective"] and rec["case"] == 1 and rec["match"] is False
    rec = classify_endpoint("a", NEGATIVE, "phi", 1.0, -1.0, [0.5], [0.2])
    assert rec["case"] == 2 and rec["predicted"] == ONCE and rec["match"]
    assert not classify_endpoint("a", NEGATIVE, "phi", 1.0, 1.0, [], [0.2])["applicable"]
    assert not classify_endpoint("a", INDEFINITE, "phi", 1.0, 1.0, [0.5], [])["applicable"]
    rec = classify_endpoint("a", NEGATIVE, "phi", 1.0, 0.0, [0.5], [], other_first_sign=1, zero_tol=1e-12)
    assert rec["case"] == 3 and rec["predicted"] == NONE


_signs = st.sampled_from([-1, 1])


@given(st.sampled_from(["a", "b"]), st.sampled_from([POSITIVE, NEGATIVE]),
       st.sampled_from(["phi", "psi"]), _signs, _signs)
@settings(max_examples=200, deadline=None)
def test_lemma_table_agrees_with_wronskian_sign(side, g, ref, s_ref, s_other):
    rec = classify_endpoint(side, g, ref, float(s_ref), float(s_other), [0.0], [])
    assert rec["predicted"] == wronskian_prediction(side, g, ref, s_ref, s_other)
    assert rec["lemma"] == lemma_for(side, g, ref).lemma


def test_endpoint_audit():
    z = ZeroList([0.4], True, True, [], 0.0, 1.0)
    w = ZeroList([0.2, 0.6], True, True, [], 0.0, 1.0)
    assert endpoint_nonseparation_audit(z, w)
    alt_phi = ZeroList([0.5], True, False, [], 0.0, 1.0)
    alt_psi = ZeroList([0.25], False, True, [], 0.0, 1.0)
    assert not endpoint_nonseparation_audit(alt_phi, alt_psi)


def test_interior_vanish_count():
    p = SLProblem(-1.0, 1.0, PiecewisePoly.constant(0.0, -1.0, 1.0),
                  PiecewisePoly.step((-1.0, -1 / 3, 1 / 3, 1.0), (1.0, -1.0, 1.0)))
    lam, info = newton_refine(p, 13.4)
    assert info.converged
    assert interior_vanish_count(make_eigenpair(p, lam.real)) == 1
    with pytest.raises(ValueError):
        interior_vanish_count(make_eigenpair(p, lam.real), tol=0)


@pytest.mark.parametrize("eid", ["exa1", "exa3"])
def test_no_interior_vanishing_examples(examples, eid):
    op = examples[eid]
    pair = find_nonreal(op.problem, Rect(*op.box))[0]
    assert interior_vanish_count(pair) == 0


def test_analyze_report(examples):
    rep = analyze_ghost(examples["exa1"].problem, 26.9376 + 6.9215j)
    assert rep.ok
    d = rep.to_dict()
    rows = rep.plot_rows()
    assert rows.shape == (2001, 4)
    assert d["left"]["match"] and d["right"]["match"]
    definite = SLProblem(0.0, 1.0, PiecewisePoly.constant(0.0, 0.0, 1.0),
                         PiecewisePoly.constant(1.0, 0.0, 1.0))
    with pytest.raises(ValueError):
        analyze_ghost(definite, 10.0 + 0.5j)
