import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from doco import algo, metrics, scenarios, theory
from doco.metrics import CheckResult
from doco.objective import QuadraticSensing
from doco.theory import TheoryParams


def test_dynamic_regret_examples():
    assert metrics.dynamic_regret(np.full((4, 3), 2.0), np.full(4, 2.0))[-1] == 0
    # n=1, f(x) = x^2/2, x_0 = 1, x* = 0
    obj = QuadraticSensing(np.ones((1, 1, 1)), np.zeros((1, 1, 1)))
    losses = metrics.agent_losses(obj, np.ones((1, 1, 1)))
    opt = metrics.optimal_losses(obj, np.zeros((1, 1)))
    assert metrics.dynamic_regret(losses, opt)[-1] == 0.5


def test_dynamic_regret_brute_force():
    scen = scenarios.build_sinusoidal(scenarios.SinusoidalConfig(seed=5), 60)
    rec = algo.run(scen, "doco", 0.02, 60)
    obj = scen.objective
    total = 0.0
    for t in range(61):
        total += sum(obj.loss(t, rec.x[t, i]) for i in range(obj.n)) / obj.n
        total -= obj.loss(t, rec.x_star[t])
    assert rec.regret[-1] == pytest.approx(total, rel=1e-10)


def test_static_regret_hand_case():
    # f_0 = (x-1)^2/2, f_1 = (x-3)^2/2, iterates 0, 0, hindsight point 2
    obj = QuadraticSensing(np.ones((1, 1, 1)), np.array([[[1.0]], [[3.0]]]))
    xs = np.zeros((2, 1, 1))
    assert metrics.static_regret(obj, xs) == pytest.approx(4.0)
    losses = metrics.agent_losses(obj, xs)
    assert metrics.dynamic_regret(losses, metrics.optimal_losses(obj, obj.optimizers()))[-1] == 5.0


def test_static_regret_zero_at_optimum_and_below_dynamic():
    rng = np.random.default_rng(0)
    obj = QuadraticSensing(rng.standard_normal((3, 2, 2)), np.tile(rng.standard_normal((1, 3, 2)), (5, 1, 1)))
    xs = np.tile(obj.exact_optimizer(0), (5, 3, 1))
    assert metrics.static_regret(obj, xs) == pytest.approx(0.0, abs=1e-12)
    scen = scenarios.build_sinusoidal(scenarios.SinusoidalConfig(seed=1), 100)
    rec = algo.run(scen, "doco", 0.05, 100)
    assert metrics.static_regret(scen.objective, rec.x) <= rec.regret[-1] + 1e-9


def test_static_regret_singular():
    obj = QuadraticSensing(np.array([[[1.0, 0.0]]]), np.zeros((3, 1, 1)))
    with pytest.raises(ValueError):
        metrics.static_regret(obj, np.zeros((3, 1, 2)))


def test_path_length_examples():
    assert metrics.path_length(np.ones((10, 3)), np.eye(3))[-1] == 0
    a, b = np.array([1.0, 0.0]), np.array([0.0, 2.0])
    stream = np.array([a, b] * 4)
    assert metrics.path_length(stream, np.eye(2))[-1] == pytest.approx(7 * math.sqrt(5))


def test_gradient_variation_static_is_zero():
    rng = np.random.default_rng(1)
    obj = QuadraticSensing(rng.standard_normal((3, 1, 2)), np.tile(rng.standard_normal((1, 3, 1)), (6, 1, 1)))
    assert metrics.gradient_variation(obj.optimizers(), obj, np.eye(2))[-1] == pytest.approx(0, abs=1e-12)


def test_gradient_variation_hand_case():
    # agents: f_1 = (x - y_1t)^2/2, f_2 = (2x - y_2t)^2/2, scalar, A = 1
    meas = np.array([[[1.0], [0.0]], [[2.0], [1.0]]])
    obj = QuadraticSensing(np.array([[[1.0]], [[2.0]]]), meas)
    x_star = np.array([[0.2], [0.8]])
    # g_1 at x*_0 per agent: (0.2 - 2, 2 (0.4 - 1)); g_0: (0.2 - 1, 2 (0.4 - 0))
    diff = np.array([(0.2 - 2.0) - (0.2 - 1.0), 2 * (0.4 - 1.0) - 2 * 0.4])
    got = metrics.gradient_variations(x_star, obj, np.eye(1))
    assert got[0] == pytest.approx(np.linalg.norm(diff))


def test_error_vector_examples():
    xs = np.tile([1.0, 2.0], (3, 1))
    assert tuple(metrics.error_vector(xs, np.ones((3, 2)), [1.0, 2.0])) == (0, 0, 0)
    z = metrics.error_vector(np.array([[1.0], [3.0]]), np.zeros((2, 1)), [2.0])
    assert z.tracking == 0 and z.consensus_x == pytest.approx(math.sqrt(2))


@given(st.integers(0, 2**31))
def test_error_vectors_recompute(seed):
    rng = np.random.default_rng(seed)
    xs, ys = rng.standard_normal((2, 4, 3, 2))
    x_star = rng.standard_normal((5, 2))
    z = metrics.error_vectors(xs, ys, x_star)
    for t in range(4):
        xb, yb = xs[t].mean(axis=0), ys[t].mean(axis=0)
        ref = (math.sqrt(((xb - x_star[t]) ** 2).sum()), math.sqrt(((xs[t] - xb) ** 2).sum()),
               math.sqrt(((ys[t] - yb) ** 2).sum()))
        np.testing.assert_allclose(z[t], ref, rtol=1e-12, atol=1e-14)
        assert np.all(z[t] >= 0)


def test_perturbation_vectors():
    scen = scenarios.build_sinusoidal(scenarios.SinusoidalConfig(seed=1), 30)
    d = metrics.perturbation_vectors(scen.x_star, scen.objective, scen.A, 0.1)
    assert np.all(d[:, 1] == 0)
    assert np.all(d[:, 0] < 1e-12)
    np.testing.assert_allclose(d[:, 2], 0.1 * metrics.gradient_variations(scen.x_star, scen.objective, scen.A))


def _compliant_run(seed):
    scen = scenarios.build_sinusoidal(scenarios.SinusoidalConfig(seed=seed, prediction=False), 800)
    L, mu = scen.objective.convexity_constants()
    n, s = scen.objective.n, scen.topology.sigma_W
    alpha = theory.stepsize_upper_bound(L, mu, n, s) / 2
    rec = algo.run(scen, "doco", alpha, 800, init="random", seed=seed)
    return rec, TheoryParams(L, mu, n, s, alpha)


def test_inequalities_hold_on_compliant_run():
    rec, p = _compliant_run(2)
    report = metrics.verify_step_inequalities(rec.z, rec.d, p)
    for name, res in report.items():
        assert res.status == "ok", name
        assert res.checked == 800 or (name == "z_recursion" and res.checked == 2400)
    assert report.total_violations == 0


def test_single_node_consensus_checks_trivial():
    obj = QuadraticSensing(np.eye(2)[None], np.random.default_rng(0).standard_normal((40, 1, 2)))

    class One:
        objective = obj
        topology = type("T", (), {"W": np.eye(1)})
        A = np.eye(2)
        meta = {}

    rec = algo.run(One, "doco", 0.5, 30)
    assert np.all(rec.z[:, 1:] == 0)
    report = metrics.verify_step_inequalities(rec.z, rec.d, TheoryParams(1.0, 1.0, 1, 0.0, 0.5))
    assert report.consensus_x.violations == 0 and report.consensus_y.violations == 0


def test_preconditions_reported():
    rec, p = _compliant_run(3)
    big = TheoryParams(p.L_g, p.mu, p.n, p.sigma_W, 1.5 / p.L_g)
    report = metrics.verify_step_inequalities(rec.z, rec.d, big)
    assert report.tracking.status == "precondition unmet"
    assert report.recursion.status == "precondition unmet"
    unstable = metrics.verify_step_inequalities(rec.z, rec.d, p, norm_A=1.01)
    assert all(r.status == "precondition unmet" for _, r in unstable.items())


def test_violation_is_detected():
    rec, p = _compliant_run(4)
    z = rec.z.copy()
    z[10, 1] = 10 * (z[9, 1] + z[9, 2]) + 1.0
    report = metrics.verify_step_inequalities(z, rec.d, p)
    assert report.consensus_x.status == "violated"
    assert report.consensus_x.violations >= 1 and report.consensus_x.worst_excess > 0
    assert isinstance(report.consensus_x, CheckResult)


def test_conservation_residuals_small():
    scen = scenarios.build_sinusoidal(scenarios.SinusoidalConfig(seed=1), 300)
    rec = algo.run(scen, "doco", 0.1, 300, init="random", seed=1)
    assert rec.conservation.max() <= 1e-9


def test_cross_gradient_bound_oracle():
    scen = scenarios.build_rods(scenarios.RodsConfig(), 20)
    rec = algo.run(scen, "doco", 0.3, 20, init="random", seed=0)
    obj = scen.objective
    ref = max(np.linalg.norm(obj.local_gradient(j, t, rec.x[t, i]))
              for t in range(21) for i in range(4) for j in range(4))
    assert rec.G == pytest.approx(ref, rel=1e-12)
