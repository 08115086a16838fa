import math

import numpy as np
import pytest

from uavmec.nets import (
    Adam,
    GaussianPolicy,
    MlpSpec,
    ReplayBuffer,
    TransitionBatch,
    VectorCritic,
    backprop,
    extended_advantage,
    gae_per_objective,
    gaussian_logprob,
    load_checkpoint,
    mlp_forward,
    policy_forward,
    sample_and_logprob,
    save_checkpoint,
    softplus,
)


def random_spec(rng, in_dim=None, out_dim=None, max_width=32, max_hidden=3):
    widths = [in_dim or int(rng.integers(2, 8))]
    for _ in range(int(rng.integers(1, max_hidden + 1))):
        widths.append(int(rng.integers(2, max_width + 1)))
    widths.append(out_dim or int(rng.integers(1, 5)))
    return MlpSpec(tuple(widths))


def numeric_grad(loss_fn, params, indices, h=1e-5):
    grads = {}
    for i in indices:
        up = params.copy()
        up[i] += h
        down = params.copy()
        down[i] -= h
        grads[i] = (loss_fn(up) - loss_fn(down)) / (2 * h)
    return grads


def make_policy(rng, obs_dim=4, action_dim=3, hidden=(8, 8), phi=1.0, global_std=None):
    mean_spec = MlpSpec((obs_dim, *hidden, action_dim))
    std_spec = MlpSpec((obs_dim, *hidden, action_dim))
    return GaussianPolicy(
        mean_spec=mean_spec,
        mean_params=mean_spec.init_params(int(rng.integers(0, 2**31))),
        std_spec=std_spec,
        std_params=std_spec.init_params(int(rng.integers(0, 2**31))),
        global_std=np.ones(action_dim) if global_std is None else np.asarray(global_std, dtype=float),
        phi=phi,
    )


class TestMlpSpec:
    def test_requires_hidden_layer(self):
        with pytest.raises(ValueError):
            MlpSpec((4, 2))

    def test_param_count(self):
        spec = MlpSpec((3, 5, 2))
        assert spec.n_params == 3 * 5 + 5 + 5 * 2 + 2

    def test_init_deterministic_per_seed(self):
        spec = MlpSpec((3, 5, 2))
        assert np.array_equal(spec.init_params(1), spec.init_params(1))
        assert not np.array_equal(spec.init_params(1), spec.init_params(2))

    def test_init_bounds_and_zero_biases(self):
        spec = MlpSpec((10, 6, 2))
        params = spec.init_params(0)
        w1 = params[: 10 * 6]
        bound = math.sqrt(6.0 / 16.0)
        assert np.all(np.abs(w1) <= bound)
        b1 = params[10 * 6 : 10 * 6 + 6]
        assert np.all(b1 == 0.0)


class TestBackprop:
    def test_matches_central_differences(self):
        rng = np.random.default_rng(0)
        for trial in range(5):
            spec = random_spec(rng)
            params = spec.init_params(trial) * 1.5
            x = rng.standard_normal((4, spec.layer_widths[0]))
            w_out = rng.standard_normal((4, spec.layer_widths[-1]))

            def loss(p):
                out, _ = mlp_forward(spec, p, x)
                return float(np.sum(w_out * out))

            analytic = backprop(spec, params, x, w_out)
            picks = rng.choice(spec.n_params, size=min(20, spec.n_params), replace=False)
            numeric = numeric_grad(loss, params, picks)
            for i, g in numeric.items():
                scale = max(abs(g), abs(analytic[i]), 1e-8)
                assert abs(analytic[i] - g) / scale < 1e-4

    def test_constant_loss_zero_gradient(self):
        spec = MlpSpec((3, 4, 2))
        params = spec.init_params(7)
        grad = backprop(spec, params, np.ones((5, 3)), np.zeros((5, 2)))
        assert np.all(grad == 0.0)

    def test_gradient_linearity(self):
        rng = np.random.default_rng(1)
        spec = random_spec(rng)
        params = spec.init_params(3)
        x = rng.standard_normal((6, spec.layer_widths[0]))
        g1 = rng.standard_normal((6, spec.layer_widths[-1]))
        g2 = rng.standard_normal((6, spec.layer_widths[-1]))
        a, b = 0.7, -2.3
        combined = backprop(spec, params, x, a * g1 + b * g2)
        separate = a * backprop(spec, params, x, g1) + b * backprop(spec, params, x, g2)
        assert np.allclose(combined, separate, rtol=1e-12, atol=1e-12)


class TestPolicyForward:
    def test_zero_params(self):
        spec = MlpSpec((4, 8, 3))
        policy = GaussianPolicy(
            mean_spec=spec,
            mean_params=np.zeros(spec.n_params),
            std_spec=spec,
            std_params=np.zeros(spec.n_params),
            global_std=np.full(3, 2.0),
            phi=1.0,
        )
        mean, std = policy_forward(policy, np.ones(4))
        assert np.allclose(mean, 0.0)
        expected = 2.0 ** 0.5 * softplus(np.zeros(1))[0] ** 0.5
        assert np.allclose(std, expected)

    def test_large_phi_limit(self):
        rng = np.random.default_rng(2)
        policy = make_policy(rng, phi=1e9, global_std=[5.0, 5.0, 5.0])
        state = rng.standard_normal(4)
        _, _, composed, _, _ = policy.forward_full(state[None, :])
        _, state_std, _, _, _ = policy.forward_full(state[None, :])
        assert np.allclose(composed, state_std, rtol=1e-6)

    def test_fixed_point_when_global_equals_state(self):
        spec = MlpSpec((4, 8, 3))
        target = 0.8
        bias = np.full(3, float(np.log(np.expm1(target))))
        policy = GaussianPolicy(
            mean_spec=spec,
            mean_params=np.zeros(spec.n_params),
            std_spec=spec,
            std_params=spec.init_params(0, output_bias=bias) * 0.0 + np.concatenate(
                [np.zeros(spec.n_params - 3), bias]
            ),
            global_std=np.full(3, target),
            phi=3.7,
        )
        _, std = policy_forward(policy, np.zeros(4))
        assert np.allclose(std, target, rtol=1e-12)

    def test_composed_std_positive(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            policy = make_policy(rng, global_std=rng.uniform(0.1, 5.0, 3))
            states = rng.standard_normal((10, 4)) * 3
            _, std = policy_forward(policy, states)
            assert np.all(std > 0)

    def test_dimension_mismatch_rejected(self):
        rng = np.random.default_rng(4)
        policy = make_policy(rng)
        with pytest.raises(ValueError):
            policy_forward(policy, np.ones(7))


class TestSampleAndLogprob:
    def test_tiny_std_collapses_to_mean(self):
        rng = np.random.default_rng(5)
        policy = make_policy(rng, global_std=[1e-12, 1e-12, 1e-12], phi=1e-9)
        state = np.zeros(4)
        mean, _ = policy_forward(policy, state)
        action, _ = sample_and_logprob(policy, state, np.random.default_rng(0))
        assert np.allclose(action, mean, atol=1e-9)

    def test_logprob_at_mode(self):
        rng = np.random.default_rng(6)
        policy = make_policy(rng)
        state = rng.standard_normal(4)
        mean, std = policy_forward(policy, state)
        logp = gaussian_logprob(mean[None, :], mean[None, :], std[None, :])[0]
        expected = -np.sum(np.log(std)) - 0.5 * 3 * np.log(2 * np.pi)
        assert logp == pytest.approx(expected, rel=1e-12)

    def test_monte_carlo_mean(self):
        rng = np.random.default_rng(7)
        policy = make_policy(rng)
        state = rng.standard_normal(4)
        mean, std = policy_forward(policy, state)
        draw = np.random.default_rng(123)
        samples = np.array([sample_and_logprob(policy, state, draw)[0] for _ in range(100_000)])
        stderr = std / math.sqrt(len(samples))
        assert np.all(np.abs(samples.mean(axis=0) - mean) < 3 * stderr + 1e-12)

    def test_density_integrates_to_one_1d(self):
        rng = np.random.default_rng(8)
        policy = make_policy(rng, obs_dim=3, action_dim=1, hidden=(6,))
        state = rng.standard_normal(3)
        mean, std = policy_forward(policy, state)
        grid = np.linspace(mean[0] - 8 * std[0], mean[0] + 8 * std[0], 20_001)
        dens = np.exp(gaussian_logprob(grid[:, None], np.full((len(grid), 1), mean[0]), np.full((len(grid), 1), std[0])))
        integral = np.trapezoid(dens, grid)
        assert integral == pytest.approx(1.0, abs=1e-3)


def make_batch(rewards, dones, values_fn=None, obs_dim=2):
    n = len(rewards)
    states = np.arange(n * obs_dim, dtype=float).reshape(n, obs_dim) / 10.0
    return TransitionBatch(
        states=states,
        actions=np.zeros((n, 1)),
        rewards=np.asarray(rewards, dtype=float),
        dones=np.asarray(dones, dtype=float),
        next_states=states + 0.05,
        means=np.zeros((n, 1)),
        stds=np.ones((n, 1)),
        logprobs=np.zeros(n),
    )


class FixedCritic:
    """Critic stub returning preset values keyed by state rows."""

    def __init__(self, table):
        self.table = {tuple(np.round(k, 9)): np.asarray(v, dtype=float) for k, v in table.items()}

    def values(self, states):
        return np.stack([self.table[tuple(np.round(s, 9))] for s in np.atleast_2d(states)])


class TestGae:
    def test_lambda_zero_is_td_error(self):
        rewards = [[1.0, -1.0], [0.5, 2.0], [0.0, 1.0]]
        batch = make_batch(rewards, [0, 0, 1])
        critic = FixedCritic(
            {tuple(s): [0.1 * i, -0.2 * i] for i, s in enumerate(batch.states)}
            | {tuple(s): [0.3, 0.4] for s in batch.next_states}
        )
        adv, _ = gae_per_objective(batch, critic, (0.9, 0.5), lam=0.0)
        values = critic.values(batch.states)
        nxt = critic.values(batch.next_states)
        for t in range(3):
            nonterminal = 1.0 - batch.dones[t]
            expected = batch.rewards[t] + np.array([0.9, 0.5]) * nxt[t] * nonterminal - values[t]
            assert np.allclose(adv[t], expected)

    def test_gamma_zero_is_reward_minus_value(self):
        batch = make_batch([[1.0, 2.0], [3.0, 4.0]], [0, 1])
        critic = FixedCritic(
            {tuple(s): [0.5, 0.25] for s in batch.states} | {tuple(s): [9.0, 9.0] for s in batch.next_states}
        )
        adv, _ = gae_per_objective(batch, critic, (0.0, 0.0), lam=0.7)
        assert np.allclose(adv, batch.rewards - 0.5 * np.array([[1.0, 0.5], [1.0, 0.5]]))

    def test_three_step_hand_recursion(self):
        gamma, lam = 0.9, 0.8
        rewards = [[1.0, 0.0], [2.0, 0.0], [3.0, 0.0]]
        batch = make_batch(rewards, [0, 0, 1])
        v = {tuple(s): [float(i + 1), 0.0] for i, s in enumerate(batch.states)}
        v_next = {tuple(s): [float(i + 2), 0.0] for i, s in enumerate(batch.next_states)}
        critic = FixedCritic(v | v_next)
        adv, ret = gae_per_objective(batch, critic, (gamma, gamma), lam)
        # deltas: r_t + gamma * V(s'_t) * (1 - done_t) - V(s_t)
        d2 = 3.0 + gamma * 4.0 * 0.0 - 3.0
        d1 = 2.0 + gamma * 3.0 - 2.0
        d0 = 1.0 + gamma * 2.0 - 1.0
        a2 = d2
        a1 = d1 + gamma * lam * a2
        a0 = d0 + gamma * lam * a1
        assert np.allclose(adv[:, 0], [a0, a1, a2])
        assert np.allclose(ret[:, 0], adv[:, 0] + [1.0, 2.0, 3.0])

    def test_episode_boundary_isolation(self):
        rng = np.random.default_rng(9)
        rewards = rng.standard_normal((6, 2))
        ep1 = make_batch(rewards[:3], [0, 0, 1])
        spec = MlpSpec((2, 4, 2))
        critic = VectorCritic(spec=spec, params=spec.init_params(11))
        full = make_batch(rewards, [0, 0, 1, 0, 0, 1])
        # re-slice so both halves carry the same states as the full batch
        ep1 = TransitionBatch(
            states=full.states[:3], actions=full.actions[:3], rewards=full.rewards[:3],
            dones=full.dones[:3], next_states=full.next_states[:3], means=full.means[:3],
            stds=full.stds[:3], logprobs=full.logprobs[:3],
        )
        ep2 = TransitionBatch(
            states=full.states[3:], actions=full.actions[3:], rewards=full.rewards[3:],
            dones=full.dones[3:], next_states=full.next_states[3:], means=full.means[3:],
            stds=full.stds[3:], logprobs=full.logprobs[3:],
        )
        adv_full, ret_full = gae_per_objective(full, critic, (0.95, 0.9), 0.9)
        adv_1, ret_1 = gae_per_objective(ep1, critic, (0.95, 0.9), 0.9)
        adv_2, ret_2 = gae_per_objective(ep2, critic, (0.95, 0.9), 0.9)
        assert np.allclose(adv_full, np.vstack([adv_1, adv_2]))
        assert np.allclose(ret_full, np.vstack([ret_1, ret_2]))


class TestExtendedAdvantage:
    def test_basis_weight(self):
        adv = np.array([[-3.0, 5.0]])
        assert extended_advantage(adv, np.array([1.0, 0.0]))[0] == -3.0

    def test_average_weight(self):
        adv = np.array([[-2.0, 4.0]])
        assert extended_advantage(adv, np.array([0.5, 0.5]))[0] == pytest.approx(1.0)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            extended_advantage(np.zeros((3, 2)), np.array([1.0, 0.0, 0.0]))


class TestAdam:
    def test_zero_gradient_is_identity(self):
        opt = Adam(4, lr=0.1)
        params = np.array([1.0, -2.0, 3.0, 0.0])
        assert np.array_equal(opt.step(params, np.zeros(4)), params)

    def test_descends_quadratic(self):
        opt = Adam(1, lr=0.05)
        x = np.array([3.0])
        for _ in range(500):
            x = opt.step(x, 2 * x)
        assert abs(x[0]) < 0.5

    def test_maximize_flag_flips_direction(self):
        a, b = Adam(1, lr=0.1), Adam(1, lr=0.1)
        x = np.array([1.0])
        g = np.array([0.7])
        down = a.step(x, g, maximize=False)
        up = b.step(x, g, maximize=True)
        assert down[0] < 1.0 < up[0]


class TestReplayBuffer:
    def test_bounded(self):
        buf = ReplayBuffer(10)
        for i in range(25):
            buf.append(i)
        assert len(buf) == 10
        assert buf.sample(3, np.random.default_rng(0))


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(10)
        policy = make_policy(rng, global_std=[0.3, 2.0, 1.1], phi=2.5)
        spec = MlpSpec((4, 6, 2))
        critic = VectorCritic(spec=spec, params=spec.init_params(5))
        weight = np.array([0.25, 0.75])
        path = tmp_path / "task.ckpt"
        save_checkpoint(path, weight, policy, critic)
        w2, p2, c2 = load_checkpoint(path)
        assert np.array_equal(w2, weight)
        assert np.array_equal(p2.mean_params, policy.mean_params)
        assert np.array_equal(p2.std_params, policy.std_params)
        assert np.array_equal(p2.global_std, policy.global_std)
        assert p2.phi == policy.phi
        assert p2.mean_spec == policy.mean_spec
        assert np.array_equal(c2.params, critic.params)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(ValueError):
            load_checkpoint(path)
