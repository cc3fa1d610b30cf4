import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from ofspi import oracle
from ofspi.learner import run_spi
from ofspi.plant import IOPlant, LtiSystem, spectral_radius


def random_schur(rng, n, rho=0.95):
    A = rng.standard_normal((n, n))
    return A * (rho * rng.uniform(0.1, 1.0) / spectral_radius(A))


def test_dlyap_scalar():
    assert oracle.dlyap([[0.5]], [[1.0]])[0, 0] == pytest.approx(4 / 3, rel=1e-15)


def test_dlyap_zero_dynamics():
    W = np.array([[2.0, 0.5], [0.5, 1.0]])
    np.testing.assert_allclose(oracle.dlyap(np.zeros((2, 2)), W), W, atol=1e-15)


def test_dlyap_diagonal():
    P = oracle.dlyap(np.diag([0.5, 0.2]), np.eye(2))
    np.testing.assert_allclose(P, np.diag([4 / 3, 25 / 24]), rtol=1e-14, atol=1e-16)


def test_dlyap_against_scipy(rng):
    for n in range(1, 9):
        A = random_schur(rng, n)
        G = rng.standard_normal((n, n))
        W = G @ G.T
        P = oracle.dlyap(A, W)
        # scipy solves A X A' - X + Q = 0, so pass A'
        np.testing.assert_allclose(P, scipy.linalg.solve_discrete_lyapunov(A.T, W),
                                   rtol=1e-8, atol=1e-10)
        assert oracle.lyap_residual(A, P, W) <= 1e-10 * max(1.0, np.linalg.norm(W))


def test_dlyap_rejects_non_schur():
    with pytest.raises(ValueError, match="Schur"):
        oracle.dlyap([[1.0]], [[1.0]])
    with pytest.raises(ValueError, match="Schur"):
        oracle.dlyap(np.diag([0.5, 1.2]), np.eye(2))


def test_scalar_initial_value():
    sys = LtiSystem([[2.0]], [[1.0]], [[1.0]])
    it = oracle.initial_iterate(sys, 0.4)
    P = oracle.model_evaluate(sys, it, [[1.0]], [[1.0]], [[0.0]])
    assert P[0, 0] == pytest.approx(25 / 9, rel=1e-14)


def test_classical_iteration_is_monotone_and_reaches_riccati(power, mbar, demo_run):
    # fixed unit scale and zero extra cost: plain policy iteration from a stabilizing gain
    Q, R = np.eye(1), np.eye(1)
    K0 = demo_run.gain @ mbar.pinv
    it = oracle.initial_iterate(power, 1.0, K0)
    Qc = np.zeros((3, 3))
    prev = None
    for _ in range(12):
        P = oracle.model_evaluate(power, it, Q, R, Qc)
        if prev is not None:
            assert np.linalg.eigvalsh(prev - P).min() >= -1e-8 * np.abs(prev).max()
        prev = P
        it = oracle.model_spi_step(power, oracle.ModelIterate(it.j, it.K, 1.0, it.A_tilde, P),
                                   Q, R, Qc, 0.0, check=False)
        it = oracle.ModelIterate(it.j, it.K, 1.0, it.A_tilde)
    X = scipy.linalg.solve_discrete_are(power.A, power.B, power.C.T @ Q @ power.C, R)
    np.testing.assert_allclose(prev, X, rtol=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(0.05, 0.95))
def test_admissible_step_keeps_scaled_loop_schur(seed, frac):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((3, 3))
    B = rng.standard_normal((3, 1))
    sys = LtiSystem(A, B, np.eye(3))
    c0 = 0.9 / spectral_radius(A)
    it = oracle.initial_iterate(sys, c0)
    P = oracle.model_evaluate(sys, it, np.eye(3), [[1.0]], np.zeros((3, 3)))
    K1 = oracle.model_improve(sys, P, [[1.0]], c0)
    bound = oracle.step_size_bound(sys, K1, c0)
    assert bound > 0
    step = frac * min(bound, 10.0)
    nxt = oracle.model_spi_step(sys, oracle.ModelIterate(0, it.K, c0, it.A_tilde, P),
                                np.eye(3), [[1.0]], np.zeros((3, 3)), step)
    assert spectral_radius(nxt.A_tilde) < 1.0


def test_step_bound_violation_raises(power):
    it = oracle.initial_iterate(power, 0.9)
    Qc = np.zeros((3, 3))
    P = oracle.model_evaluate(power, it, [[1.0]], [[1.0]], Qc)
    K1 = oracle.model_improve(power, P, [[1.0]], 0.9)
    bound = oracle.step_size_bound(power, K1, 0.9)
    with pytest.raises(oracle.StepSizeBoundError):
        oracle.model_spi_step(power, it, [[1.0]], [[1.0]], Qc, bound + 0.1)
    with pytest.raises(oracle.StepSizeBoundError):
        oracle.model_spi_step(power, it, [[1.0]], [[1.0]], Qc, 0.0)


def test_mbar_shape_and_right_inverse(mbar):
    assert mbar.M.shape == (3, 6)
    np.testing.assert_allclose(mbar.M @ mbar.pinv, np.eye(3), atol=1e-10)
    assert mbar.residual <= 1e-10


def test_mbar_exact_on_fresh_trajectory(power, demo_fb, mbar, rng):
    X, R = oracle.simulate_with_filters(power, demo_fb, rng.uniform(-1, 1, (50, 1)))
    assert np.abs(X - R @ mbar.M.T).max() <= 1e-9 * max(1.0, np.abs(X).max())


def test_mbar_too_few_samples(power, demo_fb):
    with pytest.raises(ValueError, match="rank deficient"):
        oracle.construct_mbar(power, demo_fb, n_samples=4)


def test_verify_iteration_examples(power, mbar):
    zero = oracle.verify_iteration(power, mbar, np.zeros((1, 6)), 0.9)
    assert zero.rho_actual == pytest.approx(1.017558, abs=1e-6)
    assert zero.rho_bound == pytest.approx(1 / 0.9)
    assert zero.passed
    assert not oracle.verify_iteration(power, mbar, np.zeros((1, 6)), 1.0).passed


def test_verify_iteration_certifies_demo_history(power, mbar, demo_run):
    for rec in demo_run.history:
        assert oracle.verify_iteration(power, mbar, rec.gain, rec.c).passed


def test_unwrap_returns_copy(power):
    plant = IOPlant(power, [1.0, 2.0, 3.0])
    sys, x = oracle.unwrap(plant)
    x[0] = 99.0
    assert sys is power and oracle.unwrap(plant)[1][0] == 1.0


def test_learner_tracks_model_from_rest(zero_ic_data, power, mbar):
    cfg, log, reg = zero_ic_data
    res = run_spi(cfg.spi_config(1, 1), log, reg)
    Q_c = mbar.pinv.T @ res.Qc @ mbar.pinv
    alphas = [h.alpha for h in res.history[1:]]
    model = oracle.replay_model(power, cfg.Q, cfg.R, res.beta_tilde, alphas, Q_c)
    assert len(model) == len(res.history)
    for rec, it in zip(res.history, model):
        K_hat = rec.gain @ mbar.pinv
        assert np.linalg.norm(K_hat - it.K) <= 1e-3 * max(1.0, np.linalg.norm(it.K))
        if rec.learned is not None:
            P_hat = mbar.pinv.T @ rec.learned.P @ mbar.pinv
            assert np.linalg.norm(P_hat - it.P) <= 1e-4 * np.linalg.norm(it.P)


def test_closed_loop_trajectory_open_loop_matches_plant(power, demo_fb):
    X, U = oracle.closed_loop_trajectory(power, demo_fb, np.zeros((1, 6)), [1.0, 0.0, 0.0], 5)
    assert X.shape == (6, 3) and U.shape == (5, 1) and not U.any()
    np.testing.assert_allclose(X[5], np.linalg.matrix_power(power.A, 5) @ [1.0, 0.0, 0.0])
