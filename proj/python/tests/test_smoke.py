import numpy as np
import pytest

import betaips as bi


def two_sample():
    return bi.LoggedDataset(
        contexts=np.array([[1.0], [-1.0]]),
        actions=[0, 1],
        rewards=[1.0, 0.0],
        propensities=[0.25, 1.0],
        num_actions=2,
    )


def random_instance(seed=0, n=200):
    cfg = bi.EnvironmentConfig()
    cfg.context_dim, cfg.num_actions, cfg.dataset_size, cfg.seed = 3, 5, n, seed
    env = bi.generate_environment(cfg)
    data = bi.generate_logged_dataset(env, cfg)
    rng = np.random.default_rng(seed)
    policy = bi.LinearSoftmaxPolicy(rng.normal(scale=0.5, size=(5, 3)))
    return env, data, policy


def test_two_sample_estimates():
    data, uniform = two_sample(), bi.LinearSoftmaxPolicy(2, 1)
    assert bi.ips_value(data, uniform) == pytest.approx(1.0)
    assert bi.snips_value(data, uniform) == pytest.approx(0.8)
    assert bi.beta_ips_value(data, uniform, beta=0.5) == pytest.approx(0.875)
    assert bi.beta_estimator_optimal(data, uniform) == pytest.approx(8 / 7)
    est = bi.estimate(data, uniform, "beta_ips")
    assert est["beta_used"] == pytest.approx(8 / 7)
    np.testing.assert_allclose(est["weights"], [2.0, 0.5])


def test_softmax_and_gradients():
    policy = bi.LinearSoftmaxPolicy(2, 1)
    np.testing.assert_allclose(policy.grad_prob(np.array([1.0]), 0), [[0.25], [-0.25]])
    np.testing.assert_allclose(policy.grad_log_prob(np.array([1.0]), 0), [[0.5], [-0.5]])
    policy.weights = np.array([[np.log(2.0)], [0.0]])
    np.testing.assert_allclose(policy.action_probabilities(np.array([1.0])), [2 / 3, 1 / 3])


def test_three_way_equivalence_and_shift_invariance():
    _, data, policy = random_instance(1)
    g_beta = bi.beta_ips_gradient(data, policy, beta=0.4)
    g_lambda = bi.lambda_ips_gradient(data, policy, lam=0.4)
    assert np.max(np.abs(g_beta - g_lambda)) < 1e-12
    g = bi.snips_gradient(data, policy)
    g_shift = bi.snips_gradient(data.with_reward_shift(7.0), policy)
    assert np.linalg.norm(g - g_shift) / np.linalg.norm(g) < 1e-8


def test_grad_optimal_baseline_has_lowest_variance():
    _, data, policy = random_instance(2, n=500)
    beta = bi.beta_grad_optimal(data, policy)
    v = bi.gradient_sample_variance(data, policy, beta=beta)
    assert v <= bi.gradient_sample_variance(data, policy, beta=0.0) + 1e-9


def test_training_improves_value():
    env, data, _ = random_instance(3, n=2000)
    cfg = bi.OptimizerConfig()
    cfg.epochs, cfg.batch_size = 10, 256
    report = bi.train_mini_batch(data, "beta_ips_grad", cfg, env=env, test_contexts=5000)
    assert len(report.epochs) == 10
    uniform = bi.true_policy_value(env, bi.LinearSoftmaxPolicy(5, 3), 5000)
    final = bi.true_policy_value(env, report.final_policy, 5000)
    assert final > uniform
    cfg.batch_size = None
    full = bi.train_full_batch(data, "snips", cfg)
    assert np.isnan(full.epochs[0].test_policy_value)


def test_ope_grid_rows():
    rows = bi.run_ope_experiment([5], [1.0], [100, 200], replications=5, true_value_contexts=2000)
    assert len(rows) == 4 * 2
    for r in rows:
        assert r.mse == pytest.approx(r.bias_squared + r.variance * 4 / 5, abs=1e-9)


def test_dataset_round_trip_and_errors(tmp_path):
    _, data, policy = random_instance(4, n=50)
    bi.write_dataset(tmp_path / "d.csv", data)
    assert bi.read_dataset(tmp_path / "d.csv", 5) == data
    bi.write_policy(tmp_path / "p.csv", policy)
    np.testing.assert_array_equal(bi.read_policy(tmp_path / "p.csv").weights, policy.weights)
    (tmp_path / "bad.csv").write_text("x_0,action,reward,propensity\n1,0,1,0\n")
    with pytest.raises(bi.ParseError):
        bi.read_dataset(tmp_path / "bad.csv")
    with pytest.raises(ValueError):
        bi.estimate(data, policy, "bogus")


def test_cli(tmp_path):
    out = tmp_path / "d.csv"
    code, _, err = bi.cli(["simulate", "--out", str(out), "--seed", "3"])
    assert code == 0
    assert "digest" in err
    first = out.read_bytes()
    bi.cli(["simulate", "--out", str(out), "--seed", "3"])
    assert out.read_bytes() == first
    assert bi.cli(["simulate"])[0] == 2
