from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from intermittent_dse import _kernels
from intermittent_dse.errors import OutOfSensingRange
from intermittent_dse.estimator import (
    Belief,
    CircularProfile,
    CostContext,
    LinearProfile,
    MeasurementRecord,
    NodeBelief,
    PredictedTrack,
    SensorModel,
    StackedModel,
    StaticProfile,
    TargetModel,
    block_diag,
    diag_blocks,
    initial_belief,
    kalman_update,
    path_cost,
    predict,
    sigma,
    uncertainty,
    update,
)


def power_iteration(C, iters=5000):
    """Largest eigenvalue of an SPD matrix by plain power iteration."""
    v = np.ones(C.shape[0]) / np.sqrt(C.shape[0])
    lam = 0.0
    for _ in range(iters):
        w = C @ v
        lam_new = float(v @ w)
        v = w / np.linalg.norm(w)
        if abs(lam_new - lam) < 1e-15:
            break
        lam = lam_new
    return float(v @ C @ v)


def random_spd(rng, n, lo=0.05, hi=1.0):
    Qm, _ = np.linalg.qr(rng.normal(size=(n, n)))
    return Qm @ np.diag(rng.uniform(lo, hi, n)) @ Qm.T


# -- sensor -------------------------------------------------------------------


def test_sigma_branches():
    assert sigma(0.5) == 0.01
    assert sigma(2.0) == 0.055
    assert sigma(4.0) == 0.1


def test_sigma_continuity_exact():
    s = SensorModel()
    assert s.affine(1.0) == s.sigma_near == sigma(1.0)
    assert s.affine(3.0) == s.sigma_far == sigma(3.0)
    assert sigma(np.nextafter(1.0, 2.0)) - sigma(1.0) < 1e-15
    assert sigma(3.0) - sigma(np.nextafter(3.0, 0.0)) < 1e-15


def test_sigma_out_of_range():
    with pytest.raises(OutOfSensingRange):
        sigma(5.0001)
    with pytest.raises(ValueError):
        sigma(-0.1)
    assert sigma(5.0) == 0.1


@given(st.floats(0.0, 5.0))
def test_sigma_bounded_and_monotone(ell):
    v = sigma(ell)
    assert 0.01 <= v <= 0.1
    assert sigma(min(5.0, ell + 0.01)) >= v


# -- targets ------------------------------------------------------------------


def test_linear_profile_speed_and_loop():
    p = LinearProfile(((0.0, 0.0, 1.0), (3.0, 4.0, 1.0)), 0.5)
    for t in range(0, 9):
        assert np.linalg.norm(p.u(t)) == pytest.approx(0.5)
    # the loop is 10 m long: back at the start after 20 steps
    np.testing.assert_allclose(p.nominal(20), [0.0, 0.0, 1.0], atol=1e-12)
    np.testing.assert_allclose(p.nominal(10), [3.0, 4.0, 1.0], atol=1e-12)


def test_circular_profile_through_start():
    c = CircularProfile.through((2.0, 3.0, 1.0), 0.5, 40, phase=1.0)
    np.testing.assert_allclose(c.nominal(0), [2.0, 3.0, 1.0], atol=1e-12)
    np.testing.assert_allclose(c.nominal(40), [2.0, 3.0, 1.0], atol=1e-12)
    assert np.linalg.norm(c.nominal(10) - np.array(c.center)) == pytest.approx(0.5)


def test_target_model_rejects_bad_q():
    with pytest.raises(ValueError):
        TargetModel(Q=np.diag([1.0, 0.0, 1.0]))
    with pytest.raises(ValueError):
        TargetModel(Q=np.array([[1.0, 0.5, 0], [0, 1.0, 0], [0, 0, 1.0]]))


# -- prediction -----------------------------------------------------------------


def _zero_noise_model():
    # duck-typed: the stacked model only needs A, B, Q and u(t)
    return SimpleNamespace(A=np.eye(3), B=np.eye(3), Q=np.zeros((3, 3)), u=lambda t: np.zeros(3))


def test_predict_identity_no_noise():
    b = initial_belief([1.0, 2.0, 3.0])
    out = predict(b, [_zero_noise_model()], 1)
    np.testing.assert_array_equal(out.xhat, b.xhat)
    np.testing.assert_array_equal(out.C, b.C)
    assert out.t == 1


def test_predict_additive_noise():
    q = 0.003
    b = initial_belief([1.0, 2.0, 3.0, 0.0, 0.0, 1.0])
    m = TargetModel(Q=q * np.eye(3))
    out = predict(b, [m, m], 1)
    np.testing.assert_allclose(out.C, b.C + q * np.eye(6), atol=1e-15)


def test_predict_same_time_unchanged_and_backwards_rejected():
    b = initial_belief([1.0, 2.0, 3.0], t=4)
    assert predict(b, [TargetModel()], 4) is b
    with pytest.raises(ValueError):
        predict(b, [TargetModel()], 3)


def test_predict_applies_input():
    m = TargetModel(profile=LinearProfile(((0.0, 0.0, 1.0), (10.0, 0.0, 1.0)), 0.1))
    out = predict(initial_belief([0.0, 0.0, 1.0]), [m], 5)
    np.testing.assert_allclose(out.xhat, [0.5, 0.0, 1.0], atol=1e-12)


# -- update -------------------------------------------------------------------


def test_scalar_kalman_algebra():
    b = Belief(0, np.array([0.0]), np.array([[1.0]]))
    out = kalman_update(b, np.array([[1.0]]), np.array([2.0]), np.array([[1.0]]))
    assert out.C[0, 0] == pytest.approx(0.5)
    assert out.xhat[0] == pytest.approx(1.0)


def test_empty_batch_unchanged():
    b = initial_belief([1.0, 1.0, 1.0])
    assert update(b, []) is b


def test_batch_time_mismatch():
    b = initial_belief([1.0, 1.0, 1.0], t=3)
    with pytest.raises(ValueError):
        update(b, [MeasurementRecord(0, 4, 0, 1.0, (0.0, 0.0))])


def test_update_reduces_uncertainty_along_ray():
    b = initial_belief([3.0, 0.0, 0.0])
    out = update(b, [MeasurementRecord(0, 0, 0, 2.9, (0.0, 0.0))])
    # range from the origin observes only the x direction here
    R = sigma(3.0) ** 2
    assert out.C[0, 0] == pytest.approx(0.25 * R / (0.25 + R), rel=1e-12)
    assert out.C[1, 1] == pytest.approx(0.25)
    assert out.xhat[0] < 3.0


def test_concurrent_measurements_equal_sequential():
    rng = np.random.default_rng(5)
    xhat = np.array([2.0, 1.0, 1.5, 6.0, 6.0, 1.0])
    C = block_diag(np.stack([random_spd(rng, 3, 0.1, 0.3) for _ in range(2)]))
    b = Belief(7, xhat, C)
    recs = [
        MeasurementRecord(1, 7, 0, 2.6, (0.5, -0.2)),
        MeasurementRecord(2, 7, 0, 1.9, (3.0, 2.0)),
    ]
    batch = update(b, recs)

    # sequential scalar updates, linearized once at the prior mean
    x0 = xhat.copy()
    x, P = xhat.copy(), C.copy()
    for r in recs:
        d = x0[:3] - np.array([r.q[0], r.q[1], 0.0])
        ell = np.linalg.norm(d)
        h = np.zeros(6)
        h[:3] = d / ell
        innov = r.y - ell - h @ (x - x0)
        s = h @ P @ h + sigma(ell) ** 2
        k = P @ h / s
        x = x + k * innov
        P = P - np.outer(k, h @ P)
    np.testing.assert_allclose(batch.xhat, x, atol=1e-9)
    np.testing.assert_allclose(batch.C, P, atol=1e-9)


def test_predicted_only_keeps_mean():
    b = initial_belief([2.0, 2.0, 1.0])
    out = update(b, [MeasurementRecord(0, 0, 0, 99.0, (0.0, 0.0))], predicted_only=True)
    np.testing.assert_array_equal(out.xhat, b.xhat)
    assert uncertainty(out) <= uncertainty(b)


def test_measurement_at_target_position_skipped():
    b = initial_belief([1.0, 1.0, 0.0])
    assert update(b, [MeasurementRecord(0, 0, 0, 0.0, (1.0, 1.0))]) is b


def test_uninformative_measurement():
    huge = SensorModel(sigma_near=1e6, slope=0.0, intercept=1e6, sigma_far=1e6)
    b = initial_belief([2.0, 1.0, 1.0])
    out = update(b, [MeasurementRecord(0, 0, 0, 2.5, (0.0, 0.0))], huge)
    np.testing.assert_allclose(out.C, b.C, atol=1e-6)


def test_linear_system_matches_batch_least_squares():
    rng = np.random.default_rng(11)
    n = 6
    x0 = rng.normal(size=n)
    C0 = random_spd(rng, n, 0.2, 1.0)
    b = Belief(0, x0, C0)
    info = np.linalg.inv(C0)
    vec = info @ x0
    for _ in range(12):
        m = int(rng.integers(1, 4))
        H = rng.normal(size=(m, n))
        R = random_spd(rng, m, 0.1, 0.5)
        y = rng.normal(size=m)
        b = kalman_update(b, H, y - H @ b.xhat, R)
        Ri = np.linalg.inv(R)
        info += H.T @ Ri @ H
        vec += H.T @ Ri @ y
    C_ls = np.linalg.inv(info)
    np.testing.assert_allclose(b.C, C_ls, atol=1e-9)
    np.testing.assert_allclose(b.xhat, C_ls @ vec, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_covariance_stays_symmetric_pd(seed):
    rng = np.random.default_rng(seed)
    models = [TargetModel(Q=1e-3 * np.eye(3)) for _ in range(2)]
    b = initial_belief(rng.uniform(0, 5, 6) + np.array([0, 0, 1, 0, 0, 1]))
    for t in range(1, 30):
        b = predict(b, models, t)
        recs = []
        for robot in range(3):
            q = tuple(rng.uniform(0, 5, 2))
            a = int(rng.integers(0, 2))
            ell = np.linalg.norm(b.xhat[3 * a:3 * a + 3] - np.array([*q, 0.0]))
            if ell <= 5.0:
                recs.append(MeasurementRecord(robot, t, a, ell + rng.normal(0, 0.05), q))
        b = update(b, recs)
        assert np.abs(b.C - b.C.T).max() <= 1e-10
        assert np.linalg.eigvalsh(b.C)[0] > 0


# -- uncertainty --------------------------------------------------------------


def test_uncertainty_examples():
    assert uncertainty(initial_belief(np.zeros(6))) == pytest.approx(0.25)
    assert uncertainty(Belief(0, np.zeros(2), np.diag([0.1, 0.9]))) == pytest.approx(0.9)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 9))
def test_uncertainty_matches_power_iteration(seed, n):
    rng = np.random.default_rng(seed)
    eig = np.sort(rng.uniform(0.01, 1.0, n))
    eig[-1] = eig[-2] + 0.1  # spectral gap so the oracle converges
    Qm, _ = np.linalg.qr(rng.normal(size=(n, n)))
    C = Qm @ np.diag(eig) @ Qm.T
    assert uncertainty(Belief(0, np.zeros(n), C)) == pytest.approx(power_iteration(C), abs=1e-8)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["random", "isotropic", "pair"]))
def test_kernel_eigenvalue(seed, kind):
    rng = np.random.default_rng(seed)
    if kind == "random":
        P = random_spd(rng, 3)
    else:
        Qm, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        v = rng.uniform(0.01, 1.0)
        eig = [v, v, v] if kind == "isotropic" else [v, v, v * rng.uniform(0.1, 2.0)]
        P = Qm @ np.diag(eig) @ Qm.T
    assert _kernels.lam_max_sym3(P) == pytest.approx(np.linalg.eigvalsh(P)[-1], rel=1e-13, abs=1e-15)


def test_block_roundtrip():
    rng = np.random.default_rng(0)
    blocks = np.stack([random_spd(rng, 3) for _ in range(4)])
    np.testing.assert_array_equal(diag_blocks(block_diag(blocks)), blocks)
    b = Belief(0, np.zeros(12), block_diag(blocks))
    np.testing.assert_allclose(b.target_uncertainty(), np.linalg.eigvalsh(blocks)[:, -1])


# -- planning cost -------------------------------------------------------------


def _ctx(xhat, q=1e-3, obstacles=None, offsets=None):
    models = [TargetModel(Q=q * np.eye(3), profile=StaticProfile(tuple(xhat[a])))
              for a in range(len(xhat))]
    b = initial_belief(np.asarray(xhat).reshape(-1))
    obs = np.zeros((0, 2, 2)) if obstacles is None else obstacles
    return CostContext(models, PredictedTrack(b, models), obstacles=obs, offsets=offsets), b


def test_zero_length_segment():
    ctx, b = _ctx([[5.0, 5.0, 1.0]])
    nb = NodeBelief(0, diag_blocks(b.C))
    pos = np.array([[1.0, 1.0], [2.0, 2.0]])
    t = np.array([0, 0])
    inc, child = path_cost(nb, pos, t, pos, t, ctx)
    assert inc == 0.0
    np.testing.assert_array_equal(child.P, nb.P)


def test_cost_without_measurements_is_prediction_sum():
    q = 2e-3
    ctx, b = _ctx([[20.0, 20.0, 1.0], [25.0, 20.0, 1.0]], q=q)
    nb = NodeBelief(0, diag_blocks(b.C))
    start = np.array([[0.0, 0.0]])
    inc, child = path_cost(nb, start, np.array([0]), np.array([[1.0, 0.0]]), np.array([10]), ctx)
    # oracle: step-by-step prediction of the full covariance
    C = b.C.copy()
    vals = []
    for _ in range(10):
        C = C + q * np.eye(6)
        vals.append(np.linalg.eigvalsh(C)[-1])
    assert inc == pytest.approx(sum(vals), abs=1e-12)
    assert np.all(np.diff(vals) > 0)
    assert child.t == 10


def _random_edge(rng, ctx, nb, n_agents=2):
    t0 = nb.t + rng.integers(0, 4, n_agents)
    t1 = t0.max() + rng.integers(1, 15, n_agents)
    p0 = rng.uniform(0, 10, (n_agents, 2))
    p1 = np.clip(p0 + rng.normal(0, 1.0, (n_agents, 2)), 0, 10)
    return p0, t0, p1, t1


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_kernel_matches_reference_filter(seed):
    rng = np.random.default_rng(seed)
    xhat = np.column_stack([rng.uniform(0, 10, (3, 2)), rng.uniform(0.2, 3, 3)])
    walls = np.array([[[5.0, 0.0], [5.0, 6.0]], [[1.0, 8.0], [7.0, 8.0]]])
    ctx, b = _ctx(xhat, q=1e-3, obstacles=walls)
    nb = NodeBelief(0, diag_blocks(b.C))
    for _ in range(3):
        p0, t0, p1, t1 = _random_edge(rng, ctx, nb)
        fast, c_fast = path_cost(nb, p0, t0, p1, t1, ctx)
        ref, c_ref = path_cost(nb, p0, t0, p1, t1, ctx, reference=True)
        assert fast == pytest.approx(ref, rel=1e-9, abs=1e-12)
        np.testing.assert_allclose(c_fast.P, c_ref.P, atol=1e-12)
        np.testing.assert_array_equal(c_fast.pending_t, c_ref.pending_t)
        nb = c_fast


def test_cost_additivity_and_pending_measurements():
    rng = np.random.default_rng(3)
    ctx, b = _ctx([[2.0, 2.0, 1.0], [7.0, 6.0, 1.5]])
    root = NodeBelief(0, diag_blocks(b.C))
    a_pos = np.array([[1.0, 1.0], [6.0, 6.0]])
    a_t = np.array([10, 14])  # agent 2 is ahead; its measurements stay pending
    inc_a, node_a = path_cost(root, np.array([[0.0, 0.0], [5.0, 5.0]]), np.array([0, 0]),
                              a_pos, a_t, ctx)
    assert node_a.t == 10 and np.all(node_a.pending_t > 10)
    b_pos = np.array([[1.5, 2.5], [6.5, 7.0]])
    b_t = np.array([20, 20])
    inc_b, node_b = path_cost(node_a, a_pos, a_t, b_pos, b_t, ctx)
    # the same motion accumulated in a single pass over (0, 20]
    ts, qs = [], []
    for r, (s, e) in enumerate([((0.0, 0.0), a_pos[0]), ((5.0, 5.0), a_pos[1])]):
        ts.extend(range(1, a_t[r] + 1))
        qs.extend(np.asarray(s) + (np.arange(1, a_t[r] + 1)[:, None] / a_t[r]) * (e - np.asarray(s)))
        ts.extend(range(a_t[r] + 1, 21))
        k = np.arange(a_t[r] + 1, 21)[:, None]
        qs.extend(a_pos[r] + (k - a_t[r]) / (20 - a_t[r]) * (b_pos[r] - a_pos[r]))
    order = np.argsort(ts, kind="stable")
    merged = NodeBelief(0, diag_blocks(b.C))
    from intermittent_dse.estimator import _reference_cost
    total, P = _reference_cost(merged, np.array(ts)[order], np.array(qs)[order], 20, ctx)
    assert inc_a + inc_b == pytest.approx(total, rel=1e-9)
    np.testing.assert_allclose(node_b.P, P, atol=1e-12)
    assert inc_a > 0 and inc_b > 0
