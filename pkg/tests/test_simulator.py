import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from adaptive_gainsched import ControllerRealization, PolytopicSystem
from adaptive_gainsched.model import evaluate_combination, random_simplex_point
from adaptive_gainsched.simulator import (
    SimulationConfig,
    adaptation_rhs,
    control_input,
    g_values,
    lyapunov_value,
    read_trace_csv,
    simulate,
)

import oracles


def _realization(A, B, K, N, P, L, mu=1.0):
    K, N = np.asarray(K, float), np.asarray(N, float)
    sys = PolytopicSystem(A, B)
    X = np.stack([k @ N for k in K])
    return ControllerRealization(sys, mu, K, N, np.asarray(P, float), np.asarray(L, float), X,
                                 np.zeros(1))


@pytest.fixture(scope="module")
def frozen_real(frozen):
    d = frozen["adaptation"]
    r, nx = len(d["K"]), len(d["N"])
    return d, _realization(np.zeros((r, nx, nx)), d["B"], d["K"], d["N"], d["P"], d["L"])


def test_adaptation_matrices_match_frozen(frozen_real):
    d, R = frozen_real
    np.testing.assert_allclose(R.M, d["M"], rtol=1e-12, atol=1e-12)


def test_g_u_v_match_frozen(frozen_real):
    d, R = frozen_real
    np.testing.assert_allclose(g_values(R, d["x"], d["ahat"], d["gamma"]), d["g"], rtol=1e-12)
    np.testing.assert_allclose(control_input(R, d["x"], d["ahat"]), d["u"], rtol=1e-12)
    v = lyapunov_value(R, d["x"], d["alpha"], d["ahat"], d["gamma"])
    assert v == pytest.approx(d["V"], rel=1e-12)


@given(st.integers(0, 2**31 - 1), st.one_of(st.just(0.0), st.floats(1e-3, 50.0)))
def test_g_and_v_against_loops(frozen_real, seed, gamma):
    _, R = frozen_real
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(2)
    h = random_simplex_point(3, rng)
    a = random_simplex_point(3, rng)
    np.testing.assert_allclose(g_values(R, x, h, gamma), oracles.g_loop(R.M, x, h, gamma),
                               rtol=1e-10, atol=1e-10)
    want = oracles.lyapunov_scratch(R.P, R.N, x, a, h, gamma)
    assert lyapunov_value(R, x, a, h, gamma) == pytest.approx(want, rel=1e-10, abs=1e-12)
    u = sum(h[j] * R.K[j] @ x for j in range(3))
    np.testing.assert_allclose(control_input(R, x, h), u, rtol=1e-12, atol=1e-14)


def test_g_small_cases(frozen_real):
    _, R = frozen_real
    assert np.all(g_values(R, [0.0, 0.0], [0.2, 0.3, 0.5], 4.0) == 0)
    M = np.zeros((2, 2, 2, 2))
    M[0, 0] = np.eye(2)
    M[0, 1] = 2 * np.eye(2)
    np.testing.assert_array_equal(g_values(R, [1.0, 0.0], [1.0, 0.0], 3.0, M=M), [-3.0, -6.0])


def test_adaptation_rhs_cases():
    assert np.all(adaptation_rhs([2.5] * 4) == 0)
    np.testing.assert_array_equal(adaptation_rhs([1.0, -1.0]), [1.0, -1.0])


@given(st.lists(st.floats(-1e3, 1e3), min_size=5, max_size=5))
def test_adaptation_rhs_sums_to_zero(g):
    assert abs(adaptation_rhs(g).sum()) <= 1e-15 * max(1.0, np.abs(g).max()) * 5


def test_control_input_cases(frozen_real):
    _, R = frozen_real
    x = np.array([0.3, -2.0])
    np.testing.assert_allclose(control_input(R, x, [0, 1, 0]), R.K[1] @ x, rtol=1e-15)
    same = R.with_gains(np.stack([R.K[0]] * 3))
    np.testing.assert_allclose(control_input(same, x, [0.1, 0.6, 0.3]), R.K[0] @ x, rtol=1e-14)


def test_lyapunov_cases():
    R = _realization(np.zeros((2, 1, 1)), np.zeros((2, 1, 1)), np.zeros((2, 1, 1)), [[1.0]],
                     np.ones((2, 1, 1)), np.zeros((2, 2, 1, 1)))
    assert lyapunov_value(R, [0.0], [0.5, 0.5], [0.5, 0.5], 1.0) == 0.0
    assert lyapunov_value(R, [0.0], [1.0, 0.0], [0.0, 1.0], 1.0) == 1.0


def _cfg(**kw):
    base = dict(x0=[1.0, 1.0], alpha=[0.4, 0.3, 0.2, 0.1], ahat0=[0.25] * 4, gamma=1.0,
                t_end=1.0, dt=1e-4)
    base.update(kw)
    return SimulationConfig(**base)


def test_origin_is_an_equilibrium(solved_k1):
    R = solved_k1.realization
    tr = simulate(R.system, R, _cfg(x0=[0.0, 0.0], ahat0=[0.1, 0.2, 0.3, 0.4]))
    assert np.all(tr.x == 0) and np.all(tr.ahat == [0.1, 0.2, 0.3, 0.4])
    assert tr.summary()["norm_ratio"] == 0.0


def test_frozen_adaptation_matches_lti(solved_k1):
    R = solved_k1.realization
    cfg = _cfg(gamma=0.0, ahat0=[0.1, 0.2, 0.3, 0.4], t_end=0.5, dt=1e-4)
    tr = simulate(R.system, R, cfg)
    assert tr.summary()["adaptation_frozen"]
    A, B = evaluate_combination(R.system, cfg.alpha)
    Acl = A + B @ np.tensordot(cfg.ahat0, R.K, axes=1)
    for s in (1000, 2500, 5000):
        np.testing.assert_allclose(tr.x[s], oracles.lti_exact(Acl, cfg.x0, tr.t[s]), atol=1e-8)


def test_trace_matches_scalar_rk4(solved_k1):
    R = solved_k1.realization
    cfg = _cfg(t_end=0.2)
    tr = simulate(R.system, R, cfg)
    A, B = evaluate_combination(R.system, cfg.alpha)
    x, h = oracles.rk4_loop(A, B, R.K, R.M, cfg.x0, cfg.ahat0, cfg.gamma, cfg.dt, cfg.nsteps)
    np.testing.assert_allclose(tr.x[-1], x, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(tr.ahat[-1], h, rtol=1e-10, atol=1e-12)


def test_sum_preserved_with_fast_adaptation(solved_k1):
    R = solved_k1.realization
    tr = simulate(R.system, R, _cfg(t_end=2.0))
    s = tr.summary()
    assert s["max_sum_drift"] <= 1e-9
    assert not s["diverged"]
    assert s["lyapunov_increases"] == 0


@pytest.mark.parametrize("seed", range(4))
def test_lyapunov_nonincreasing_inside_simplex(solved_k1, seed):
    R = solved_k1.realization
    alpha = random_simplex_point(4, seed)
    tr = simulate(R.system, R, _cfg(alpha=alpha, gamma=0.01, t_end=2.0))
    assert tr.in_simplex.all()
    assert tr.sum_drift <= 1e-9
    assert np.all(np.diff(tr.V) <= 1e-8 * tr.V[:-1])
    assert tr.summary()["norm_ratio"] < 1.0


def test_fourth_order_convergence(solved_k1):
    R = solved_k1.realization
    ends = [simulate(R.system, R, _cfg(dt=dt, t_end=0.4)).x[-1] for dt in (4e-4, 2e-4, 1e-4)]
    ratio = np.linalg.norm(ends[0] - ends[1]) / np.linalg.norm(ends[1] - ends[2])
    assert 12.0 < ratio < 20.0


def test_clamp_keeps_estimates_in_simplex(solved_k1):
    R = solved_k1.realization
    cfg = _cfg(gamma=10.0, ahat0=[0.7, 0.1, 0.1, 0.1], alpha=[0.0, 0.0, 0.0, 1.0], t_end=0.5,
               clamp_simplex=True)
    tr = simulate(R.system, R, cfg)
    assert tr.in_simplex.all()
    assert tr.sum_drift <= 1e-12


def test_piecewise_schedule(solved_k1):
    R = solved_k1.realization
    e = np.eye(4)
    tr = simulate(R.system, R, _cfg(alpha=[(0.0, e[0]), (0.5, e[2])]))
    assert tr.x.shape[0] == 10001
    np.testing.assert_array_equal(tr.alpha[5000], e[0])
    np.testing.assert_array_equal(tr.alpha[5001], e[2])


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
@pytest.mark.parametrize("impl", ["python", None])
def test_blow_up_truncates_and_flags(impl):
    R = _realization(np.full((2, 1, 1), 300.0), np.zeros((2, 1, 1)), np.zeros((2, 1, 1)),
                     [[1.0]], np.ones((2, 1, 1)), np.zeros((2, 2, 1, 1)))
    cfg = SimulationConfig(x0=[1.0], alpha=[0.5, 0.5], ahat0=[0.5, 0.5], gamma=1.0,
                           t_end=10.0, dt=0.01)
    tr = simulate(R.system, R, cfg, implementation=impl)
    assert tr.diverged and tr.summary()["diverged"]
    assert tr.x.shape[0] < cfg.nsteps + 1
    assert np.all(np.isfinite(tr.x))


def test_csv_and_manifest_roundtrip(solved_k1, tmp_path):
    R = solved_k1.realization
    tr = simulate(R.system, R, _cfg(t_end=0.05))
    man = tr.write(tmp_path / "run.csv")
    cols = read_trace_csv(tmp_path / "run.csv")
    assert list(cols) == ["t", "x_1", "x_2", "ahat_1", "ahat_2", "ahat_3", "ahat_4", "u_1", "V"]
    np.testing.assert_array_equal(cols["x_2"], tr.x[:, 1])
    np.testing.assert_array_equal(cols["V"], tr.V)
    meta = json.loads(man.read_text())
    assert meta["realization"] == R.digest()
    assert meta["summary"] == tr.summary()
    assert SimulationConfig(**meta["config"]) == _cfg(t_end=0.05)


@pytest.mark.parametrize("kw", [dict(ahat0=[0.5, 0.6, 0.0, 0.0]), dict(dt=0.0), dict(gamma=-1.0),
                                dict(t_end=1e-5), dict(alpha=[(0.1, [1, 0, 0, 0])])])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        _cfg(**kw)


def test_dimension_mismatch(solved_k1):
    R = solved_k1.realization
    with pytest.raises(ValueError):
        simulate(R.system, R, _cfg(x0=[1.0, 1.0, 1.0]))
