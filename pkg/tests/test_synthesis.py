import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from adaptive_gainsched import (
    FEASIBLE,
    INFEASIBLE,
    ControllerRealization,
    PolytopicSystem,
    SynthesisOptions,
    example_system,
    hurwitz_check,
    synthesize,
    verify_certificate,
)
from adaptive_gainsched.model import random_delta_point, random_simplex_point
from adaptive_gainsched.synthesis import certificate_matrix, certificate_samples

import oracles


def _random_certificate(seed, r=3, nx=2):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((r, nx, nx))
    B = rng.standard_normal((r, nx, 1))
    P = rng.standard_normal((r, nx, nx))
    P = P + P.transpose(0, 2, 1)
    N = rng.standard_normal((nx, nx))
    X = rng.standard_normal((r, 1, nx))
    L = rng.standard_normal((r, r, nx, nx))
    L = L + L.transpose(0, 1, 3, 2)
    return PolytopicSystem(A, B), P, N, X, L


def test_vertex_sample_reduces_to_single_block(frozen):
    b = frozen["blocks"]
    sys = example_system(b["k"])
    r, nx = sys.r, sys.n_x
    P = np.stack([np.array(b["P1"])] + [np.eye(nx)] * (r - 1))
    X = np.stack([np.array(b["X1"])] + [np.zeros((1, nx))] * (r - 1))
    L = np.zeros((r, r, nx, nx))
    L[0, 0] = b["L1_1"]
    N = np.array(b["N"])
    e1 = np.eye(r)[0]
    Q = np.array(b["Qhat11"])
    np.testing.assert_allclose(certificate_matrix(sys, P, N, X, L, b["mu"], e1, 0 * e1), Q,
                               atol=1e-13)
    both = Q - np.array(b["Psi11"]) - np.array(b["Phi11"])
    both = 0.5 * (both + both.T)
    np.testing.assert_allclose(certificate_matrix(sys, P, N, X, L, b["mu"], e1, e1), both,
                               atol=1e-13)


@given(st.integers(0, 2**31 - 1), st.floats(1e-6, 1.0))
def test_certificate_matches_double_sum(seed, mu):
    sys, P, N, X, L = _random_certificate(seed)
    rng = np.random.default_rng(seed + 1)
    a = random_simplex_point(sys.r, rng)
    d = random_delta_point(sys.r, rng, a)
    z = rng.standard_normal(2 * sys.n_x)
    Q = [[oracles.qhat(sys.A[i], sys.B[i], P[i], N, X[j], mu) for j in range(sys.r)]
         for i in range(sys.r)]
    pp = [[oracles.psi_phi(sys.B[i], X[j], L[i, j], mu) for j in range(sys.r)]
          for i in range(sys.r)]
    Psi = [[p[0] for p in row] for row in pp]
    Phi = [[p[1] for p in row] for row in pp]
    W = certificate_matrix(sys, P, N, X, L, mu, a, d)
    want = oracles.double_sum_form(Q, Psi, Phi, a, d, z)
    assert z @ W @ z == pytest.approx(want, rel=1e-9, abs=1e-9)


def test_samples_start_with_vertex_pairs():
    pts = certificate_samples(4, 40, seed=3)
    assert len(pts) == 40
    for a, d in pts[:16]:
        assert set(a) <= {0.0, 1.0} and set(a + d) <= {0.0, 1.0}
    for a, d in pts:
        assert np.all(a >= 0) and np.all(a + d >= -1e-12)
        assert abs(d.sum()) <= 1e-12


def test_k1_is_feasible_and_verified(solved_k1):
    res = solved_k1
    assert res.status == FEASIBLE
    assert res.report.passed and res.report.samples == 1000
    assert "PASS" in res.message


def test_realization_invariants(solved_k1):
    R = solved_k1.realization
    for k, x in zip(R.K, R.X):
        np.testing.assert_allclose(k @ R.N, x, atol=1e-8 * max(1.0, np.abs(x).max()))
    assert R.n_condition < 1e12
    for p in R.Pcal:
        np.testing.assert_array_equal(p, p.T)
        assert np.linalg.eigvalsh(p)[0] > 0
    rng = np.random.default_rng(0)
    for _ in range(100):
        a = random_simplex_point(R.r, rng)
        assert np.linalg.eigvalsh(np.tensordot(a, R.Pcal, axes=1))[0] > 0
    want = oracles.adaptation_matrices(R.system.A, R.system.B, R.K, R.N, R.L)
    np.testing.assert_allclose(R.M, want, rtol=1e-9, atol=1e-9 * np.abs(want).max())


def test_vertices_are_hurwitz(solved_k1):
    R = solved_k1.realization
    assert max(hurwitz_check(R.system, R)) < 0


def test_scaled_gains_fail_verification(solved_k1):
    R = solved_k1.realization
    K = R.K.copy()
    K[0] *= 10.0
    bad = R.with_gains(K)
    rep = verify_certificate(R.system, bad, 1000, seed=0)
    assert not rep.passed and rep.worst > 0
    assert verify_certificate(R.system, R, 1000, seed=0).passed


def test_zero_gains_are_rejected(solved_k1):
    R = solved_k1.realization
    zero = R.with_gains(np.zeros_like(R.K))
    assert max(hurwitz_check(R.system, zero)) >= 0
    assert not verify_certificate(R.system, zero, 200).passed


def test_hurwitz_on_stable_free_system():
    sys = PolytopicSystem([-np.eye(2)] * 2, [np.zeros((2, 1))] * 2)
    n = np.eye(2)
    R = ControllerRealization(sys, 1.0, np.zeros((2, 1, 2)), n, np.stack([n, n]),
                              np.zeros((2, 2, 2, 2)), np.zeros((2, 1, 2)), np.zeros(1))
    assert hurwitz_check(sys, R) == [-1.0, -1.0]


def test_unstable_unactuated_system_is_infeasible():
    sys = PolytopicSystem([np.eye(2)] * 2, [np.zeros((2, 1))] * 2)
    res = synthesize(sys, mu=1e-3)
    assert res.status == INFEASIBLE
    assert res.realization is None


def test_single_vertex_is_rejected():
    with pytest.raises(ValueError):
        synthesize(PolytopicSystem([-np.eye(2)], [np.ones((2, 1))]))


@pytest.mark.parametrize("field,value", [("mu", 0.0), ("eps", -1.0), ("annihilator", "x"),
                                         ("mismatch", "x"), ("theta_form", "x"),
                                         ("certificate_samples", -1)])
def test_option_validation(field, value):
    with pytest.raises(ValueError):
        SynthesisOptions(**{field: value})


def test_options_roundtrip():
    o = SynthesisOptions(mu=1e-3, seed=4)
    assert SynthesisOptions(**o.to_dict()) == o


def test_realization_json_roundtrip(solved_k1, tmp_path):
    R = solved_k1.realization
    R.save(tmp_path / "r.json")
    back = ControllerRealization.load(tmp_path / "r.json")
    for name in ("K", "N", "P", "L", "X"):
        np.testing.assert_array_equal(getattr(back, name), getattr(R, name))
    assert back.mu == R.mu and back.digest() == R.digest()
    assert verify_certificate(back.system, back, 50).passed


@pytest.mark.slow
def test_benchmark_at_k775(solved_k775):
    res = solved_k775
    assert res.status == FEASIBLE, res.message
    R = res.realization
    assert max(hurwitz_check(R.system, R)) < 0
    assert verify_certificate(R.system, R, 1000).passed
