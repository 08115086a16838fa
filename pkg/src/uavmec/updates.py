"""Multi-objective policy updates: clipped-surrogate PPO and target-distribution learning.

Both rules scalarize the per-objective advantage vector with the task's
weight vector.  The TDL rule regresses the policy toward per-step target
means and variances; the target mean shift is capped so its KL from the old
action distribution (at unchanged variance) never exceeds the budget, and the
global variance multiplier is refreshed from the batch mean of the target
variances after the minibatch loop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nets import (
    Adam,
    GaussianPolicy,
    TransitionBatch,
    VectorCritic,
    entropy_diag_gaussian,
    extended_advantage,
    gae_per_objective,
    gaussian_logprob,
    mlp_backward,
    mlp_forward,
    sigmoid,
    softplus,
)


class UpdateError(RuntimeError):
    """Raised when an update produces non-finite losses; carries diagnostics."""

    def __init__(self, message: str, diagnostics: dict):
        super().__init__(f"{message}: {diagnostics}")
        self.diagnostics = diagnostics


def make_weight(values) -> np.ndarray:
    """Validate and return an objective weight vector on the simplex."""
    w = np.asarray(values, dtype=float)
    if w.ndim != 1 or w.shape[0] < 2:
        raise ValueError("weight must be a vector of at least two components")
    if np.any(w < 0):
        raise ValueError("weight components must be non-negative")
    if abs(float(w.sum()) - 1.0) > 1e-9:
        raise ValueError("weight components must sum to one")
    return w


@dataclass
class TaskTuple:
    """A weight vector paired with the policy and critic trained for it."""

    weight: np.ndarray
    policy: GaussianPolicy
    critic: VectorCritic

    def copy(self) -> "TaskTuple":
        return TaskTuple(weight=self.weight.copy(), policy=self.policy.copy(), critic=self.critic.copy())


@dataclass(frozen=True)
class PpoConfig:
    clip_eps: float = 0.2
    epochs: int = 10
    minibatch: int = 64
    steps_per_iter: int = 2048
    entropy_coef: float = 0.0

    def __post_init__(self):
        if self.clip_eps <= 0:
            raise ValueError("clip_eps must be positive")
        if min(self.epochs, self.minibatch, self.steps_per_iter) < 1:
            raise ValueError("epochs, minibatch, steps_per_iter must be >= 1")


@dataclass(frozen=True)
class TdlConfig:
    kl_budget: float = 0.01
    phi: float = 1.0
    improve_old_prob: float = 0.2

    def __post_init__(self):
        if self.kl_budget <= 0:
            raise ValueError("kl_budget must be positive")
        if self.phi <= 0:
            raise ValueError("phi must be positive")
        if not 0.0 <= self.improve_old_prob <= 1.0:
            raise ValueError("improve_old_prob must lie in [0, 1]")


@dataclass(frozen=True)
class OptimConfig:
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def kl_diag_gaussian(mu0, std0, mu1, std1) -> np.ndarray:
    """KL(N(mu0, std0^2) || N(mu1, std1^2)) per row, summed over dimensions."""
    mu0, std0, mu1, std1 = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (mu0, std0, mu1, std1))
    ratio = std0 / std1
    return np.sum(np.log(std1 / std0) + (std0 ** 2 + (mu0 - mu1) ** 2) / (2.0 * std1 ** 2) - 0.5, axis=1)


def mean_shift_kl(mu_old, std_old, target_mean) -> np.ndarray:
    """KL of the target mean shift at unchanged variance; this is the quantity
    the capped shift keeps within the budget."""
    mu_old = np.atleast_2d(mu_old)
    std_old = np.atleast_2d(std_old)
    target_mean = np.atleast_2d(target_mean)
    return np.sum(((target_mean - mu_old) / std_old) ** 2, axis=1) / 2.0


def _minibatch_slices(n: int, minibatch: int, epochs: int, rng: np.random.Generator):
    for _ in range(epochs):
        perm = rng.permutation(n)
        for start in range(0, n, minibatch):
            yield perm[start : start + minibatch]


def _check_finite(diagnostics: dict, **values) -> None:
    for name, value in values.items():
        if not np.all(np.isfinite(value)):
            diagnostics["failed_on"] = name
            raise UpdateError("non-finite value in update", diagnostics)


def critic_grads(critic: VectorCritic, states, returns) -> tuple[float, np.ndarray]:
    """Mean squared error over all (step, objective) entries and its gradient."""
    values, cache = mlp_forward(critic.spec, critic.params, states)
    err = values - returns
    loss = float(np.mean(err ** 2))
    grad_out = 2.0 * err / err.size
    return loss, mlp_backward(critic.spec, critic.params, cache, grad_out)


def _critic_update(critic: VectorCritic, states, returns, idx, opt: Adam) -> float:
    loss, grad = critic_grads(critic, states[idx], returns[idx])
    critic.params = opt.step(critic.params, grad, maximize=False)
    return loss


def ppo_surrogate_grads(
    policy: GaussianPolicy,
    states: np.ndarray,
    actions: np.ndarray,
    scalar_adv: np.ndarray,
    old_logprobs: np.ndarray,
    clip_eps: float,
    entropy_coef: float,
) -> tuple[float, float, np.ndarray, np.ndarray]:
    """Clipped surrogate (plus entropy bonus) and its exact gradients w.r.t.
    the policy mean and variance-head parameters.

    The gradient flows through the probability ratio only on steps where the
    unclipped branch attains the minimum; the global variance multiplier is
    a constant of the update (it changes only through the variance-pooling
    rule of the target-distribution update).
    """
    mean, mean_cache = mlp_forward(policy.mean_spec, policy.mean_params, states)
    raw_std, std_cache = mlp_forward(policy.std_spec, policy.std_params, states)
    state_std = softplus(raw_std)
    std = policy.compose_std(state_std)
    logprobs = gaussian_logprob(actions, mean, std)
    ratio = np.exp(logprobs - old_logprobs)
    unclipped = ratio * scalar_adv
    clipped = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * scalar_adv
    surrogate = float(np.mean(np.minimum(unclipped, clipped)))
    entropy = float(np.mean(entropy_diag_gaussian(std)))

    n = len(states)
    active = (unclipped <= clipped).astype(float)
    dsurr_dlogp = active * ratio * scalar_adv / n
    z = (actions - mean) / std
    grad_mean_out = dsurr_dlogp[:, None] * (z / std)
    dstd_total = dsurr_dlogp[:, None] * ((z ** 2 - 1.0) / std)
    if entropy_coef != 0.0:
        dstd_total = dstd_total + entropy_coef / (std * n)
    k_global = 1.0 / (policy.phi + 1.0)
    k_state = policy.phi / (policy.phi + 1.0)
    dstd_dstate = policy.global_std ** k_global * k_state * state_std ** (k_state - 1.0)
    grad_std_out = dstd_total * dstd_dstate * sigmoid(std_cache[-1])

    grad_mean = mlp_backward(policy.mean_spec, policy.mean_params, mean_cache, grad_mean_out)
    grad_std = mlp_backward(policy.std_spec, policy.std_params, std_cache, grad_std_out)
    return surrogate, entropy, grad_mean, grad_std


def tdl_regression_grads(
    policy: GaussianPolicy,
    states: np.ndarray,
    target_mean: np.ndarray,
    target_std: np.ndarray,
) -> tuple[float, np.ndarray, np.ndarray]:
    """MSE of the mean head to the target means plus MSE of the state
    variance head to the target stds, with exact parameter gradients."""
    mean, mean_cache = mlp_forward(policy.mean_spec, policy.mean_params, states)
    raw_std, std_cache = mlp_forward(policy.std_spec, policy.std_params, states)
    state_std = softplus(raw_std)
    mean_err = mean - target_mean
    std_err = state_std - target_std
    loss = float(np.mean(mean_err ** 2) + np.mean(std_err ** 2))
    grad_mean_out = 2.0 * mean_err / mean_err.size
    grad_std_out = 2.0 * std_err / std_err.size * sigmoid(std_cache[-1])
    grad_mean = mlp_backward(policy.mean_spec, policy.mean_params, mean_cache, grad_mean_out)
    grad_std = mlp_backward(policy.std_spec, policy.std_params, std_cache, grad_std_out)
    return loss, grad_mean, grad_std


def mopg_ppo_update(
    task: TaskTuple,
    batch: TransitionBatch,
    cfg: PpoConfig,
    optim: OptimConfig,
    gammas,
    gae_lambda: float,
    seed: int,
    policy_opt: tuple[Adam, Adam] | None = None,
    critic_opt: Adam | None = None,
) -> dict:
    """Ascend the clipped surrogate on the weighted advantage; descend the
    per-objective critic MSE.  Returns update diagnostics."""
    policy, critic = task.policy, task.critic
    advantages, returns = gae_per_objective(batch, critic, gammas, gae_lambda)
    ext_adv = extended_advantage(advantages, task.weight)
    old_logprobs = batch.logprobs
    diagnostics = {"rule": "ppo", "n_steps": len(batch)}
    _check_finite(diagnostics, advantages=advantages, ext_adv=ext_adv)

    if policy_opt is None:
        policy_opt = (
            Adam(policy.mean_params.size, optim.learning_rate, optim.beta1, optim.beta2, optim.eps),
            Adam(policy.std_params.size, optim.learning_rate, optim.beta1, optim.beta2, optim.eps),
        )
    if critic_opt is None:
        critic_opt = Adam(critic.params.size, optim.learning_rate, optim.beta1, optim.beta2, optim.eps)
    mean_opt, std_opt = policy_opt

    rng = np.random.default_rng(seed)
    last_surrogate = 0.0
    last_critic_loss = 0.0
    for idx in _minibatch_slices(len(batch), cfg.minibatch, cfg.epochs, rng):
        surrogate, entropy, grad_mean, grad_std = ppo_surrogate_grads(
            policy,
            batch.states[idx],
            batch.actions[idx],
            ext_adv[idx],
            old_logprobs[idx],
            cfg.clip_eps,
            cfg.entropy_coef,
        )
        _check_finite(diagnostics, surrogate=surrogate, entropy=entropy, grad_mean=grad_mean, grad_std=grad_std)
        policy.mean_params = mean_opt.step(policy.mean_params, grad_mean, maximize=True)
        policy.std_params = std_opt.step(policy.std_params, grad_std, maximize=True)

        last_critic_loss = _critic_update(critic, batch.states, returns, idx, critic_opt)
        _check_finite(diagnostics, critic_loss=last_critic_loss)
        last_surrogate = surrogate

    new_mean, new_std = _policy_outputs(policy, batch.states)
    kl = kl_diag_gaussian(batch.means, batch.stds, new_mean, new_std)
    diagnostics.update(
        surrogate=last_surrogate,
        critic_loss=last_critic_loss,
        mean_kl=float(np.mean(kl)),
        mean_ext_advantage=float(np.mean(ext_adv)),
    )
    return diagnostics


def _policy_outputs(policy: GaussianPolicy, states):
    mean, _, std, _, _ = policy.forward_full(states)
    return mean, std


def tdl_targets(
    batch: TransitionBatch,
    weight: np.ndarray,
    critic: VectorCritic,
    cfg: TdlConfig,
    gammas,
    gae_lambda: float,
    use_indicator: bool = False,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-step regression targets (mean, variance) plus the weighted advantages.

    The mean shift is the standardized action direction capped at
    sqrt(2*kl_budget) in L2 norm, signed by the weighted advantage; with
    ``use_indicator`` the sign is replaced by the positive-advantage
    indicator, so non-positive steps keep the old mean.  The target variance
    is (action - old_mean)^2 on positive-advantage steps and the old variance
    elsewhere.
    """
    advantages, _ = gae_per_objective(batch, critic, gammas, gae_lambda)
    ext_adv = extended_advantage(advantages, weight)
    mu_old = batch.means
    std_old = batch.stds
    if np.any(std_old <= 0.0):
        raise ValueError("old stds must be positive")

    y = (batch.actions - mu_old) / std_old
    norms = np.linalg.norm(y, axis=1)
    cap = np.ones_like(norms)
    nonzero = norms > 0
    cap[nonzero] = np.minimum(1.0, np.sqrt(2.0 * cfg.kl_budget) / norms[nonzero])
    factor = (ext_adv > 0).astype(float) if use_indicator else np.sign(ext_adv)
    target_mean = mu_old + factor[:, None] * cap[:, None] * y * std_old
    target_var = np.where((ext_adv > 0)[:, None], (batch.actions - mu_old) ** 2, std_old ** 2)
    return target_mean, target_var, ext_adv


def tdl_update(
    task: TaskTuple,
    batch: TransitionBatch,
    cfg: TdlConfig,
    ppo_cfg: PpoConfig,
    optim: OptimConfig,
    gammas,
    gae_lambda: float,
    seed: int,
    policy_opt: tuple[Adam, Adam] | None = None,
    critic_opt: Adam | None = None,
) -> dict:
    """Regress the policy onto the target distribution and refresh the global
    variance multiplier from the batch mean of the target variances."""
    policy, critic = task.policy, task.critic
    rng = np.random.default_rng(seed)
    use_indicator = bool(rng.random() < cfg.improve_old_prob)
    target_mean, target_var, ext_adv = tdl_targets(
        batch, task.weight, critic, cfg, gammas, gae_lambda, use_indicator=use_indicator
    )
    target_std = np.sqrt(target_var)
    _, returns = gae_per_objective(batch, critic, gammas, gae_lambda)
    diagnostics = {"rule": "tdl", "n_steps": len(batch), "indicator_targets": use_indicator}
    _check_finite(diagnostics, target_mean=target_mean, target_var=target_var, ext_adv=ext_adv)

    if policy_opt is None:
        policy_opt = (
            Adam(policy.mean_params.size, optim.learning_rate, optim.beta1, optim.beta2, optim.eps),
            Adam(policy.std_params.size, optim.learning_rate, optim.beta1, optim.beta2, optim.eps),
        )
    if critic_opt is None:
        critic_opt = Adam(critic.params.size, optim.learning_rate, optim.beta1, optim.beta2, optim.eps)
    mean_opt, std_opt = policy_opt

    last_policy_loss = 0.0
    last_critic_loss = 0.0
    for idx in _minibatch_slices(len(batch), ppo_cfg.minibatch, ppo_cfg.epochs, rng):
        loss, grad_mean, grad_std = tdl_regression_grads(
            policy, batch.states[idx], target_mean[idx], target_std[idx]
        )
        _check_finite(diagnostics, policy_loss=loss, grad_mean=grad_mean, grad_std=grad_std)
        policy.mean_params = mean_opt.step(policy.mean_params, grad_mean, maximize=False)
        policy.std_params = std_opt.step(policy.std_params, grad_std, maximize=False)

        last_critic_loss = _critic_update(critic, batch.states, returns, idx, critic_opt)
        _check_finite(diagnostics, critic_loss=last_critic_loss)
        last_policy_loss = loss

    policy.global_std = np.sqrt(np.mean(target_var, axis=0))
    _check_finite(diagnostics, global_std=policy.global_std)

    budget_kl = mean_shift_kl(batch.means, batch.stds, target_mean)
    diagnostics.update(
        policy_loss=last_policy_loss,
        critic_loss=last_critic_loss,
        mean_kl=float(np.mean(budget_kl)),
        max_kl=float(np.max(budget_kl)),
        mean_ext_advantage=float(np.mean(ext_adv)),
        surrogate=-last_policy_loss,
    )
    return diagnostics
