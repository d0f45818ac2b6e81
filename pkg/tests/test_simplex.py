import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import kl_objective, prox_bisection
from simcal.simplex import (
    InfiniteDivergenceError,
    IntervalProjector,
    check_probability_vector,
    entropic_prox_step,
    kl_divergence,
    project_interval,
    project_to_restricted_simplex,
    sup_norm_distance,
)


def test_kl_identity_and_value():
    p = np.array([0.2, 0.3, 0.5])
    assert kl_divergence(p, p) == 0.0
    # 0.75 log 1.5 + 0.25 log 0.5
    ref = 0.75 * math.log(0.75 / 0.5) + 0.25 * math.log(0.25 / 0.5)
    assert abs(ref - 0.130812) < 1e-6
    assert kl_divergence([0.5, 0.5], [0.75, 0.25]) == pytest.approx(0.130812, abs=1e-6)


def test_kl_argument_order():
    # second argument in the numerator: V(p, q) = sum q log(q/p)
    p, q = np.array([0.9, 0.1]), np.array([0.5, 0.5])
    assert kl_divergence(p, q) == pytest.approx(0.5 * math.log(0.5 / 0.9) + 0.5 * math.log(5.0))
    assert kl_divergence(p, q) != pytest.approx(kl_divergence(q, p))


def test_kl_zero_terms_and_errors():
    assert kl_divergence([0.5, 0.5], [1.0, 0.0]) == pytest.approx(math.log(2.0))
    with pytest.raises(InfiniteDivergenceError):
        kl_divergence([1.0, 0.0], [0.5, 0.5])
    with pytest.raises(ValueError):
        kl_divergence([0.5, 0.5], [1.0])


def test_project_interval_examples():
    proj = IntervalProjector(0.2, 0.8)
    assert project_interval(0.5, proj) == 0.5
    assert project_interval(0.1, proj) == 0.2
    assert project_interval(0.9, proj) == 0.8
    assert proj(np.array([0.0, 0.5, 1.0])).tolist() == [0.2, 0.5, 0.8]
    with pytest.raises(ValueError):
        IntervalProjector(0.9, 0.1)


def test_sup_norm_examples():
    assert sup_norm_distance([0.3, 0.7], [0.3, 0.7]) == 0.0
    assert sup_norm_distance([1, 0], [0, 1]) == 1.0
    assert sup_norm_distance([0.6, 0.4], [0.5, 0.5]) == pytest.approx(0.1)
    with pytest.raises(ValueError):
        sup_norm_distance([1.0], [0.5, 0.5])


def test_check_probability_vector():
    check_probability_vector([0.25, 0.75], eps=0.2)
    with pytest.raises(ValueError):
        check_probability_vector([0.5, 0.6])
    with pytest.raises(ValueError):
        check_probability_vector([0.1, 0.9], eps=0.2)


def test_prox_hand_instance():
    p = np.full(3, 1 / 3)
    xi = np.array([0.0, 0.0, math.log(4.0)])
    q = entropic_prox_step(p, xi, 0.15)
    ref, eta = prox_bisection(p, xi, 0.15)
    # eta relative to the unshifted v = p e^{-xi}
    assert eta == pytest.approx(0.15 * (2 / 3) / 0.85, abs=1e-9)
    assert eta == pytest.approx(0.117647, abs=1e-6)
    np.testing.assert_allclose(q, [0.425, 0.425, 0.150], atol=1e-12)
    np.testing.assert_allclose(q, ref, atol=1e-12)


def test_prox_eps_zero_is_plain_entropic_step():
    rng = np.random.default_rng(1)
    p = rng.dirichlet(np.ones(6))
    xi = rng.normal(size=6)
    v = p * np.exp(-xi)
    np.testing.assert_allclose(entropic_prox_step(p, xi, 0.0), v / v.sum(), rtol=1e-13)


def test_prox_zero_step_is_identity():
    p = np.array([0.1, 0.2, 0.3, 0.4])
    np.testing.assert_allclose(entropic_prox_step(p, np.zeros(4), 0.05), p, atol=1e-15)


def test_prox_errors():
    p = np.full(4, 0.25)
    with pytest.raises(ValueError):
        entropic_prox_step(p, np.zeros(4), 0.25)
    with pytest.raises(ValueError):
        entropic_prox_step(p, np.array([0, np.inf, 0, 0]), 0.1)
    with pytest.raises(ValueError):
        entropic_prox_step([0.5, 0.5, 0.0], np.zeros(3), 0.1)


def test_prox_duplicated_knots():
    p = np.full(5, 0.2)
    xi = np.array([1.0, 1.0, 1.0, 0.0, 0.0])
    for eps in (0.0, 0.05, 0.1, 0.15, 0.19):
        q = entropic_prox_step(p, xi, eps)
        np.testing.assert_allclose(q, prox_bisection(p, xi, eps)[0], atol=1e-10)
        # ties are treated identically
        assert q[0] == q[1] == q[2]


def test_prox_large_gradients_do_not_underflow():
    p = np.full(4, 0.25)
    xi = np.array([0.0, 800.0, 1500.0, -900.0])
    q = entropic_prox_step(p, xi, 0.01)
    assert np.all(np.isfinite(q))
    assert q.sum() == pytest.approx(1.0, abs=1e-12)
    assert q.min() >= 0.01 - 1e-12
    np.testing.assert_allclose(q, [0.01, 0.01, 0.01, 0.97], atol=1e-12)


def test_prox_kkt_optimality():
    rng = np.random.default_rng(7)
    for _ in range(20):
        m = int(rng.integers(2, 9))
        p = rng.dirichlet(np.ones(m))
        xi = rng.normal(scale=2.0, size=m)
        eps = float(rng.uniform(0, 1 / m) * 0.99)
        q_star = entropic_prox_step(p, xi, eps)
        best = kl_objective(p, q_star, xi)
        # random feasible points of P(eps)
        cand = eps + (1 - m * eps) * rng.dirichlet(np.ones(m), size=1000)
        values = np.array([kl_objective(p, q, xi) for q in cand])
        assert np.all(best <= values + 1e-12)


def test_restricted_projection():
    q = project_to_restricted_simplex(np.array([0.9, 0.1, 1e-9]), 0.05)
    assert q.min() == pytest.approx(0.05)
    assert q.sum() == pytest.approx(1.0)


prob_vectors = st.integers(2, 12).flatmap(
    lambda m: st.tuples(
        st.lists(st.floats(1e-6, 1.0), min_size=m, max_size=m),
        st.lists(st.floats(-30.0, 30.0), min_size=m, max_size=m),
        st.floats(0.0, 0.999),
    )
)


@settings(max_examples=5000)
@given(prob_vectors)
def test_prox_stays_in_restricted_simplex(case):
    w, xi, frac = case
    p = np.array(w) / np.sum(w)
    eps = frac / p.size
    q = entropic_prox_step(p, np.array(xi), eps)
    assert abs(q.sum() - 1.0) <= 1e-12
    assert q.min() >= eps - 1e-12


@settings(max_examples=2000)
@given(prob_vectors)
def test_prox_matches_bisection(case):
    w, xi, frac = case
    p = np.array(w) / np.sum(w)
    eps = frac / p.size
    xi = np.array(xi) / 5  # keep the plain-space oracle away from underflow
    np.testing.assert_allclose(entropic_prox_step(p, xi, eps), prox_bisection(p, xi, eps)[0], atol=1e-8, rtol=0)


intervals = st.tuples(st.floats(-5, 5), st.floats(0, 5)).map(lambda t: IntervalProjector(t[0], t[0] + t[1]))


@settings(max_examples=2000)
@given(intervals, st.floats(-10, 10), st.floats(-10, 10))
def test_projection_idempotent_and_lipschitz(proj, x, y):
    px, py = project_interval(x, proj), project_interval(y, proj)
    assert project_interval(px, proj) == px
    assert abs(px - py) <= abs(x - y) + 1e-15
    assert proj.lower <= px <= proj.upper
