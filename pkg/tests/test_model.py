import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from adaptive_gainsched.model import (
    PolytopicSystem,
    as_delta_point,
    as_simplex_point,
    closed_loop_matrix,
    evaluate_combination,
    example_system,
    random_delta_point,
    random_simplex_point,
)

import oracles


def test_vertex_selection():
    sys = example_system(3.0)
    A, B = evaluate_combination(sys, [1, 0, 0, 0])
    assert np.array_equal(A, sys.A[0]) and np.array_equal(B, sys.B[0])


def test_symmetric_vertices_cancel():
    sys = PolytopicSystem([np.eye(2), -np.eye(2)], [np.ones((2, 1)), np.ones((2, 1))])
    A, _ = evaluate_combination(sys, [0.5, 0.5])
    assert np.array_equal(A, np.zeros((2, 2)))


def test_combination_matches_frozen(frozen):
    c = frozen["combination"]
    sys = PolytopicSystem(c["A"], c["B"])
    A, B = evaluate_combination(sys, c["alpha"])
    np.testing.assert_allclose(A, c["A_alpha"], rtol=0, atol=1e-14)
    np.testing.assert_allclose(B, c["B_alpha"], rtol=0, atol=1e-14)


def test_combination_rejects_bad_weights():
    sys = example_system(1.0)
    with pytest.raises(ValueError):
        evaluate_combination(sys, [0.5, 0.5, 0.1, 0.0])
    with pytest.raises(ValueError):
        evaluate_combination(sys, [1.0, 0.0])
    with pytest.raises(ValueError):
        evaluate_combination(sys, [1.5, -0.5, 0, 0])


def test_closed_loop_vertex_and_frozen(frozen):
    c = frozen["closed_loop"]
    sys = PolytopicSystem(c["A"], c["B"])
    got = closed_loop_matrix(sys, c["K"], c["alpha"], c["ahat"])
    np.testing.assert_allclose(got, c["expected"], rtol=0, atol=1e-13)
    e1 = [1.0, 0.0, 0.0]
    K = np.array(c["K"])
    np.testing.assert_allclose(closed_loop_matrix(sys, K, e1, e1),
                               sys.A[0] + sys.B[0] @ K[0], atol=1e-15)


def test_closed_loop_rejects_wrong_gain_count():
    sys = example_system(1.0)
    with pytest.raises(ValueError):
        closed_loop_matrix(sys, [np.zeros((1, 2))] * 3, [0.25] * 4, [0.25] * 4)


simplex_weights = st.lists(st.floats(0.0, 1.0), min_size=4, max_size=4).filter(
    lambda w: sum(w) > 1e-3).map(lambda w: list(np.array(w) / sum(w)))


@given(simplex_weights, simplex_weights, st.floats(0.0, 1.0))
def test_combination_is_linear(a, b, lam):
    sys = example_system(7.0)
    a, b = np.array(a), np.array(b)
    a[-1], b[-1] = 1 - a[:-1].sum(), 1 - b[:-1].sum()
    mix = lam * a + (1 - lam) * b
    mix[-1] = 1 - mix[:-1].sum()
    if min(a.min(), b.min(), mix.min()) < 0:
        return
    Am, Bm = evaluate_combination(sys, mix)
    Aa, Ba = evaluate_combination(sys, a)
    Ab, Bb = evaluate_combination(sys, b)
    np.testing.assert_allclose(Am, lam * Aa + (1 - lam) * Ab, atol=1e-12)
    np.testing.assert_allclose(Bm, lam * Ba + (1 - lam) * Bb, atol=1e-12)


@given(simplex_weights, st.integers(0, 2**31 - 1))
def test_equal_gains_collapse(alpha, seed):
    sys = example_system(50.0)
    alpha = np.array(alpha)
    alpha[-1] = 1 - alpha[:-1].sum()
    if alpha.min() < 0:
        return
    K = np.random.default_rng(seed).standard_normal((1, 2))
    A, B = evaluate_combination(sys, alpha)
    got = closed_loop_matrix(sys, [K] * 4, alpha, alpha)
    np.testing.assert_allclose(got, A + B @ K, atol=1e-12)


def test_closed_loop_against_loop(rng):
    A = rng.standard_normal((3, 2, 2))
    B = rng.standard_normal((3, 2, 1))
    K = rng.standard_normal((3, 1, 2))
    sys = PolytopicSystem(A, B)
    a, h = random_simplex_point(3, 1), random_simplex_point(3, 2)
    np.testing.assert_allclose(closed_loop_matrix(sys, K, a, h),
                               oracles.closed_loop_sum(A, B, K, a, h), atol=1e-13)


def test_example_at_k1_matches_printed():
    sys = example_system(1.0)
    np.testing.assert_allclose(sys.A[2], [[0, 0], [0.5, 0]], atol=1e-15)
    np.testing.assert_allclose(sys.B[2], [[-10], [0.5]], atol=1e-15)
    np.testing.assert_allclose(sys.A[3], [[0, 0], [0.5, 0]], atol=1e-15)
    np.testing.assert_allclose(sys.B[3], [[-2], [0.5]], atol=1e-15)


@given(st.floats(0.1, 1000.0))
def test_example_closed_forms(k):
    sys = example_system(k)
    kp = k + 1
    np.testing.assert_array_equal(sys.A[0], [[-8.1818, 0], [0.0909, 0]])
    np.testing.assert_array_equal(sys.A[1], [[-1.6364, 0], [0.0909, 0]])
    np.testing.assert_array_equal(sys.B[0], [[-18.1818], [0.0909]])
    np.testing.assert_array_equal(sys.B[1], [[-3.6364], [0.0909]])
    want = {
        (2, "A"): [[10 * (k - 1) / kp, 0], [k / kp, 0]],
        (3, "A"): [[2 * (k - 1) / kp, 0], [k / kp, 0]],
        (2, "B"): [[-20 / kp], [k / kp]],
        (3, "B"): [[-4 / kp], [k / kp]],
    }
    for (i, name), m in want.items():
        np.testing.assert_allclose(getattr(sys, name)[i], m, rtol=1e-12, atol=1e-300)


def test_example_rejects_nonpositive_k():
    with pytest.raises(ValueError):
        example_system(0.0)


def test_system_validation_and_json(tmp_path):
    with pytest.raises(ValueError):
        PolytopicSystem([np.eye(2)], [np.ones((3, 1))])
    with pytest.raises(ValueError):
        PolytopicSystem([np.eye(2), np.eye(3)], [np.ones((2, 1))] * 2)
    with pytest.raises(ValueError):
        PolytopicSystem([np.full((2, 2), np.nan)], [np.ones((2, 1))])
    sys = example_system(12.0)
    sys.save(tmp_path / "s.json")
    back = PolytopicSystem.load(tmp_path / "s.json")
    assert all(np.array_equal(a, b) for a, b in zip(sys.A, back.A))
    assert (back.r, back.n_x, back.n_u) == (4, 2, 1)


def test_singleton_points():
    assert random_simplex_point(1, 0).tolist() == [1.0]
    assert random_delta_point(1, 0).tolist() == [0.0]


def test_seeded_draws_are_deterministic():
    assert np.array_equal(random_simplex_point(4, 9), random_simplex_point(4, 9))
    assert np.array_equal(random_delta_point(4, 9), random_delta_point(4, 9))


def test_thousand_draws_satisfy_invariants():
    rng = np.random.default_rng(5)
    for _ in range(1000):
        a = random_simplex_point(5, rng)
        d = random_delta_point(5, rng, a)
        as_simplex_point(a)
        as_delta_point(d)
        assert np.all(a + d >= -1e-12)
        assert abs((a + d).sum() - 1) <= 1e-12
