import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crowdbp import (
    CrowdMoments, Population, ReliabilitySpec, approx_first_moments, asymptotic_decision,
    convergence_condition, degree_regular_assignment, exact_first_moments, make_population,
    series_mean, series_variance_bound,
)
from crowdbp.theory import (
    asymptotic_decisions, exact_first_moments_all, fan_in, series_mean_exchangeable,
    series_relative_error, series_variance_recursion,
)


def test_crowd_moments():
    c = CrowdMoments.from_reliabilities([0.5, 1.0])
    assert c.e_p == 0.75 and c.phi == 0.5 and c.bias == 0.5
    assert CrowdMoments.from_spec(ReliabilitySpec.from_phi_squared(0.75, 0.09)).phi == \
        pytest.approx(0.3)
    with pytest.raises(ValueError):
        CrowdMoments(0.9, 0.1)


def test_loop_and_vector_exact_moments_agree(small_graph, small_population):
    M, V = exact_first_moments_all(small_graph, small_population, 0.4, 2.0)
    for e, (a, i) in enumerate(small_graph.edges()):
        pred = exact_first_moments(small_graph, small_population, a, i, 0.4, 2.0)
        assert pred.mean == pytest.approx(M[e], rel=1e-12, abs=1e-12)
        assert pred.variance == pytest.approx(V[e], rel=1e-12, abs=1e-12)
    with pytest.raises(KeyError):
        q = next(q for q in range(12) if q not in small_graph.questions_of(0))
        exact_first_moments(small_graph, small_population, 0, q)


def test_exact_moments_with_homogeneous_crowd():
    # every neighbour has the same p, so the approximation is exact
    asg = degree_regular_assignment(20, 20, 5, 5, 1)
    pop = Population(np.full(20, 0.8), np.ones(20))
    M, V = exact_first_moments_all(asg, pop)
    approx = approx_first_moments(0.8, CrowdMoments.from_population(pop), 5, 5)
    np.testing.assert_allclose(M, approx.mean, rtol=1e-12)
    np.testing.assert_allclose(V, approx.variance, rtol=1e-12)


def test_approx_first_moments_values():
    crowd = CrowdMoments(0.75, 0.3)
    pred = approx_first_moments(0.9, crowd, 10, 10)
    assert pred.mean == pytest.approx(81 * 0.8 * 0.5)
    assert pred.variance == pytest.approx(81 * ((2 - 0.3) + (1 - 0.64) * 9 * 0.25))
    with pytest.raises(ValueError):
        approx_first_moments(0.9, crowd, 1, 10)


def test_series_mean_geometric():
    crowd = CrowdMoments(0.75, 0.3)
    vals = [series_mean(0.8, crowd, k) for k in range(1, 6)]
    assert vals[0] == pytest.approx(0.6 * 0.5)
    np.testing.assert_allclose(np.array(vals[1:]) / vals[:-1], 0.3)
    with pytest.raises(ValueError):
        series_mean(0.8, crowd, 0)


def test_exchangeable_mean_tends_to_closed_form():
    rng = np.random.default_rng(0)
    p = np.clip(rng.normal(0.75, 0.1, 20000), 0, 1)
    crowd = CrowdMoments.from_reliabilities(p)
    ex = series_mean_exchangeable(p, 4)
    closed = np.array([series_mean(x, crowd, 4) for x in p])
    np.testing.assert_allclose(ex, closed, rtol=1e-3, atol=1e-6)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.integers(2, 12), st.integers(2, 12),
       st.integers(1, 10), st.floats(0.0, 5.0))
def test_variance_bound_matches_its_series_form(e_p, extra, r, s, k, v0):
    bias2 = (2 * e_p - 1) ** 2
    crowd = CrowdMoments(e_p, bias2 + extra * (1 - bias2))
    d = fan_in(r, s)
    phi2 = crowd.phi ** 2
    # geometric sum written out term by term
    series = v0 * d ** -k + r * bias2 / d * sum(phi2 ** m * d ** -(k - 1 - m) for m in range(k))
    assert series_variance_bound(v0, crowd, r, s, k) == pytest.approx(series, rel=1e-9, abs=1e-300)


def test_variance_bound_at_singular_point():
    r = s = 10
    phi = math.sqrt(1 / 81)
    e_p = 0.5 + math.sqrt(phi * 0.5) / 2
    crowd = CrowdMoments(e_p, phi)
    at = series_variance_bound(1.0, crowd, r, s, 5)
    near = series_variance_bound(1.0, CrowdMoments(e_p, phi * (1 + 1e-7)), r, s, 5)
    assert math.isfinite(at)
    assert at == pytest.approx(near, rel=1e-5)


def test_variance_recursion():
    crowd = CrowdMoments(0.75, 0.3)
    assert series_variance_recursion(1.0, crowd, 10, 10, 1) == pytest.approx(
        1 / 81 + 10 * 0.25 * 0.09 / 81)
    assert series_variance_recursion(1.0, crowd, 10, 10, 0) == 1.0


def test_relative_error_shrinks_under_condition():
    crowd = CrowdMoments(0.75, 0.3)
    assert convergence_condition(crowd, 10, 10)
    rel = [series_relative_error(0.8, crowd, 10, 10, k) for k in range(1, 9)]
    assert rel[-1] < rel[0]
    assert series_relative_error(0.5, crowd, 10, 10, 2) == math.inf


@pytest.mark.parametrize("phi, holds", [(math.sqrt(0.008), False), (0.3, True),
                                        (math.sqrt(1 / 81), True), (1.0, False)])
def test_convergence_condition(phi, holds):
    e_p = 0.5 + math.sqrt(min(phi, 0.25) * 0.5) / 2
    assert convergence_condition(CrowdMoments(e_p, phi), 10, 10) is holds


def test_asymptotic_decision():
    assert asymptotic_decision([1, -1, 1], [0.9, 0.6, 0.7], 0.75) == 1
    assert asymptotic_decision([1, -1], [0.8, 0.8], 0.75) == 0
    assert asymptotic_decision([1, 1], [0.9, 0.9], 0.3) == -1
    with pytest.raises(ValueError):
        asymptotic_decision([1], [0.5, 0.5], 0.7)


def test_asymptotic_decisions_vectorized(small_graph, small_population):
    rng = np.random.default_rng(0)
    A = rng.choice([-1, 1], (3, small_graph.n_edges))
    out = asymptotic_decisions(small_graph, A, small_population.reliabilities, 0.7)
    for b in range(3):
        for i in range(small_graph.n_questions):
            row = A[b, i * small_graph.r:(i + 1) * small_graph.r]
            users = small_graph.users_of(i)
            assert out[b, i] == asymptotic_decision(row, small_population.reliabilities[users], 0.7)
