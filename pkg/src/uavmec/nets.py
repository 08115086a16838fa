"""Minimal differentiable function approximators on flat parameter vectors.

Networks are tanh MLPs with identity outputs.  Parameters live in one flat
float64 array laid out layer by layer as row-major weight matrix
(fan_in x fan_out) followed by the bias vector; ``MlpSpec`` fixes the layout.
Gradients are exact reverse-mode and validated against finite differences in
the test suite.
"""

from __future__ import annotations

import struct
from collections import deque
from dataclasses import dataclass, field

import numpy as np

CHECKPOINT_MAGIC = b"EMOT"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class MlpSpec:
    """Layer widths (input, hidden..., output); tanh hiddens, identity output."""

    layer_widths: tuple[int, ...]

    def __post_init__(self):
        if len(self.layer_widths) < 3:
            raise ValueError("need at least one hidden layer")
        if any(w < 1 for w in self.layer_widths):
            raise ValueError("all widths must be >= 1")

    @property
    def n_params(self) -> int:
        total = 0
        for fan_in, fan_out in zip(self.layer_widths[:-1], self.layer_widths[1:]):
            total += fan_in * fan_out + fan_out
        return total

    def init_params(self, seed: int, output_bias: np.ndarray | None = None) -> np.ndarray:
        """Uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases.

        ``output_bias`` optionally pins the final layer's bias (used to start
        the variance head at a chosen scale).
        """
        rng = np.random.default_rng(seed)
        chunks = []
        n_layers = len(self.layer_widths) - 1
        for idx, (fan_in, fan_out) in enumerate(zip(self.layer_widths[:-1], self.layer_widths[1:])):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            chunks.append(rng.uniform(-bound, bound, size=fan_in * fan_out))
            bias = np.zeros(fan_out)
            if output_bias is not None and idx == n_layers - 1:
                bias = np.asarray(output_bias, dtype=float).copy()
                if bias.shape != (fan_out,):
                    raise ValueError("output_bias shape mismatch")
            chunks.append(bias)
        return np.concatenate(chunks)


def _unpack(spec: MlpSpec, params: np.ndarray):
    if params.shape != (spec.n_params,):
        raise ValueError(f"expected {spec.n_params} parameters, got {params.shape}")
    layers = []
    offset = 0
    for fan_in, fan_out in zip(spec.layer_widths[:-1], spec.layer_widths[1:]):
        w = params[offset : offset + fan_in * fan_out].reshape(fan_in, fan_out)
        offset += fan_in * fan_out
        b = params[offset : offset + fan_out]
        offset += fan_out
        layers.append((w, b))
    return layers


def mlp_forward(spec: MlpSpec, params: np.ndarray, x: np.ndarray):
    """Return (output, cache); x is (batch, in_dim)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != spec.layer_widths[0]:
        raise ValueError(f"input dim {x.shape[1]} does not match spec {spec.layer_widths[0]}")
    layers = _unpack(spec, params)
    activations = [x]
    h = x
    for i, (w, b) in enumerate(layers):
        z = h @ w + b
        h = np.tanh(z) if i < len(layers) - 1 else z
        activations.append(h)
    return h, activations


def mlp_backward(spec: MlpSpec, params: np.ndarray, cache, grad_out: np.ndarray) -> np.ndarray:
    """Exact gradient of sum(grad_out * output) w.r.t. the flat parameters."""
    layers = _unpack(spec, params)
    grads = [None] * len(layers)
    delta = np.atleast_2d(np.asarray(grad_out, dtype=float))
    for i in reversed(range(len(layers))):
        w, _ = layers[i]
        h_in = cache[i]
        h_out = cache[i + 1]
        if i < len(layers) - 1:
            delta = delta * (1.0 - h_out ** 2)  # tanh'
        grads[i] = (h_in.T @ delta, delta.sum(axis=0))
        if i > 0:
            delta = delta @ w.T
    flat = []
    for gw, gb in grads:
        flat.append(gw.ravel())
        flat.append(gb)
    return np.concatenate(flat)


def backprop(spec: MlpSpec, params: np.ndarray, x: np.ndarray, dloss_dout: np.ndarray) -> np.ndarray:
    """Gradient of a scalar loss w.r.t. params, given dloss/doutput."""
    _, cache = mlp_forward(spec, params, x)
    return mlp_backward(spec, params, cache, dloss_dout)


def softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=float)))


@dataclass
class GaussianPolicy:
    """Diagonal Gaussian policy with state-dependent and global variance parts.

    The sampling std composes a global per-dimension multiplier with the
    softplus state head: std = global^(1/(phi+1)) * state_std^(phi/(phi+1)).
    """

    mean_spec: MlpSpec
    mean_params: np.ndarray
    std_spec: MlpSpec
    std_params: np.ndarray
    global_std: np.ndarray
    phi: float

    def __post_init__(self):
        self.global_std = np.asarray(self.global_std, dtype=float)
        if np.any(self.global_std <= 0):
            raise ValueError("global_std must be positive")
        if self.phi <= 0:
            raise ValueError("phi must be positive")
        if self.mean_spec.layer_widths[-1] != self.std_spec.layer_widths[-1]:
            raise ValueError("mean and std heads must share the action dimension")

    @property
    def action_dim(self) -> int:
        return self.mean_spec.layer_widths[-1]

    @property
    def obs_dim(self) -> int:
        return self.mean_spec.layer_widths[0]

    def compose_std(self, state_std: np.ndarray) -> np.ndarray:
        a = 1.0 / (self.phi + 1.0)
        b = self.phi / (self.phi + 1.0)
        return self.global_std ** a * state_std ** b

    def forward_full(self, states: np.ndarray):
        """Return (mean, state_std, composed_std, mean_cache, std_cache)."""
        mean, mean_cache = mlp_forward(self.mean_spec, self.mean_params, states)
        raw, std_cache = mlp_forward(self.std_spec, self.std_params, states)
        state_std = softplus(raw)
        return mean, state_std, self.compose_std(state_std), mean_cache, std_cache

    def copy(self) -> "GaussianPolicy":
        return GaussianPolicy(
            mean_spec=self.mean_spec,
            mean_params=self.mean_params.copy(),
            std_spec=self.std_spec,
            std_params=self.std_params.copy(),
            global_std=self.global_std.copy(),
            phi=self.phi,
        )


@dataclass
class VectorCritic:
    """MLP state-value function with one output per objective."""

    spec: MlpSpec
    params: np.ndarray

    @property
    def n_objectives(self) -> int:
        return self.spec.layer_widths[-1]

    def values(self, states: np.ndarray) -> np.ndarray:
        out, _ = mlp_forward(self.spec, self.params, states)
        return out

    def copy(self) -> "VectorCritic":
        return VectorCritic(spec=self.spec, params=self.params.copy())


def policy_forward(policy: GaussianPolicy, state: np.ndarray):
    """Composed (mean, std) for one state or a batch of states."""
    state = np.asarray(state, dtype=float)
    single = state.ndim == 1
    mean, _, std, _, _ = policy.forward_full(np.atleast_2d(state))
    if single:
        return mean[0], std[0]
    return mean, std


def gaussian_logprob(actions: np.ndarray, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    """Diagonal Gaussian log density, summed over action dimensions."""
    actions = np.atleast_2d(actions)
    mean = np.atleast_2d(mean)
    std = np.atleast_2d(std)
    z = (actions - mean) / std
    return -0.5 * np.sum(z ** 2, axis=1) - np.sum(np.log(std), axis=1) - 0.5 * actions.shape[1] * np.log(2.0 * np.pi)


def sample_and_logprob(policy: GaussianPolicy, state: np.ndarray, rng: np.random.Generator):
    """Sample an unclipped action and its log density."""
    mean, std = policy_forward(policy, state)
    noise = rng.standard_normal(policy.action_dim)
    action = mean + std * noise
    logprob = float(gaussian_logprob(action[None, :], mean[None, :], std[None, :])[0])
    return action, logprob


def entropy_diag_gaussian(std: np.ndarray) -> np.ndarray:
    std = np.atleast_2d(std)
    d = std.shape[1]
    return np.sum(np.log(std), axis=1) + 0.5 * d * (1.0 + np.log(2.0 * np.pi))


@dataclass
class TransitionBatch:
    """Stacked on-policy transitions; episode ends are flagged in ``dones``."""

    states: np.ndarray       # (T, obs_dim)
    actions: np.ndarray      # (T, action_dim), raw samples
    rewards: np.ndarray      # (T, m)
    dones: np.ndarray        # (T,) float 0/1
    next_states: np.ndarray  # (T, obs_dim)
    means: np.ndarray        # (T, action_dim) under the collecting policy
    stds: np.ndarray         # (T, action_dim)
    logprobs: np.ndarray     # (T,)

    def __post_init__(self):
        n = len(self.states)
        for name in ("actions", "rewards", "dones", "next_states", "means", "stds", "logprobs"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"batch field {name} is misaligned")
        if np.any(self.stds <= 0):
            raise ValueError("stds must be positive")

    def __len__(self) -> int:
        return len(self.states)


def batch_from_transitions(transitions) -> TransitionBatch:
    return TransitionBatch(
        states=np.stack([t.obs for t in transitions]),
        actions=np.stack([t.action for t in transitions]),
        rewards=np.stack([t.reward for t in transitions]),
        dones=np.array([1.0 if t.done else 0.0 for t in transitions]),
        next_states=np.stack([t.next_obs for t in transitions]),
        means=np.stack([t.mean for t in transitions]),
        stds=np.stack([t.std for t in transitions]),
        logprobs=np.array([t.logprob for t in transitions]),
    )


def gae_per_objective(
    batch: TransitionBatch,
    critic: VectorCritic,
    gammas,
    lam: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimates and lambda-returns per objective.

    Episode boundaries (dones) truncate the recursion, so a batch of
    concatenated episodes decomposes into independent per-episode passes.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    gammas = np.asarray(gammas, dtype=float)
    values = critic.values(batch.states)
    next_values = critic.values(batch.next_states)
    n, m = values.shape
    advantages = np.zeros((n, m))
    last = np.zeros(m)
    for t in reversed(range(n)):
        nonterminal = 1.0 - batch.dones[t]
        delta = batch.rewards[t] + gammas * next_values[t] * nonterminal - values[t]
        last = delta + gammas * lam * nonterminal * last
        advantages[t] = last
    returns = advantages + values
    return advantages, returns


def extended_advantage(vector_adv: np.ndarray, weight: np.ndarray) -> np.ndarray:
    """Scalarize per-step advantage vectors with an objective weight vector."""
    vector_adv = np.asarray(vector_adv, dtype=float)
    weight = np.asarray(weight, dtype=float)
    if vector_adv.ndim != 2 or vector_adv.shape[1] != weight.shape[0]:
        raise ValueError("weight dimension does not match advantage vectors")
    return vector_adv @ weight


@dataclass
class Adam:
    """Adaptive-moment estimation; float64, eps inside the square root denominator.

    m <- b1*m + (1-b1)*g ; v <- b2*v + (1-b2)*g^2 ; bias-corrected step
    lr * mhat / (sqrt(vhat) + eps), subtracted for descent, added when
    ``maximize`` is set.
    """

    n_params: int
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: np.ndarray = field(init=False)
    v: np.ndarray = field(init=False)
    t: int = field(init=False, default=0)

    def __post_init__(self):
        self.m = np.zeros(self.n_params)
        self.v = np.zeros(self.n_params)

    def step(self, params: np.ndarray, grad: np.ndarray, maximize: bool = False) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad ** 2
        mhat = self.m / (1.0 - self.beta1 ** self.t)
        vhat = self.v / (1.0 - self.beta2 ** self.t)
        update = self.lr * mhat / (np.sqrt(vhat) + self.eps)
        return params + update if maximize else params - update


class ReplayBuffer:
    """Bounded transition store kept for logging; on-policy updates never read it."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self._items = deque(maxlen=capacity)

    def append(self, transition) -> None:
        self._items.append(transition)

    def __len__(self) -> int:
        return len(self._items)

    def sample(self, n: int, rng: np.random.Generator):
        idx = rng.integers(0, len(self._items), size=n)
        items = list(self._items)
        return [items[i] for i in idx]


def _pack_widths(widths: tuple[int, ...]) -> bytes:
    return struct.pack("<I", len(widths)) + struct.pack(f"<{len(widths)}I", *widths)


def save_checkpoint(path, weight: np.ndarray, policy: GaussianPolicy, critic: VectorCritic) -> None:
    """Serialize a (weight, policy, critic) triple.

    Layout, all little-endian: magic 'EMOT', u32 version, u32 m, u32
    action_dim, u32-prefixed width lists for mean/std/critic nets, f64 phi,
    then f64 arrays in order: weight, global_std, mean params, std params,
    critic params.
    """
    weight = np.asarray(weight, dtype=float)
    header = CHECKPOINT_MAGIC
    header += struct.pack("<I", CHECKPOINT_VERSION)
    header += struct.pack("<I", weight.shape[0])
    header += struct.pack("<I", policy.action_dim)
    header += _pack_widths(policy.mean_spec.layer_widths)
    header += _pack_widths(policy.std_spec.layer_widths)
    header += _pack_widths(critic.spec.layer_widths)
    header += struct.pack("<d", policy.phi)
    body = b"".join(
        arr.astype("<f8").tobytes()
        for arr in (weight, policy.global_std, policy.mean_params, policy.std_params, critic.params)
    )
    with open(path, "wb") as fh:
        fh.write(header + body)


def load_checkpoint(path) -> tuple[np.ndarray, GaussianPolicy, VectorCritic]:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != CHECKPOINT_MAGIC:
        raise ValueError("not a policy checkpoint (bad magic)")
    offset = 4

    def read_u32() -> int:
        nonlocal offset
        (val,) = struct.unpack_from("<I", data, offset)
        offset += 4
        return val

    version = read_u32()
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    m = read_u32()
    action_dim = read_u32()

    def read_widths() -> tuple[int, ...]:
        n = read_u32()
        nonlocal offset
        widths = struct.unpack_from(f"<{n}I", data, offset)
        offset += 4 * n
        return tuple(widths)

    mean_widths = read_widths()
    std_widths = read_widths()
    critic_widths = read_widths()
    (phi,) = struct.unpack_from("<d", data, offset)
    offset += 8

    def read_f64(count: int) -> np.ndarray:
        nonlocal offset
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=offset).copy()
        offset += 8 * count
        return arr

    mean_spec = MlpSpec(mean_widths)
    std_spec = MlpSpec(std_widths)
    critic_spec = MlpSpec(critic_widths)
    weight = read_f64(m)
    global_std = read_f64(action_dim)
    mean_params = read_f64(mean_spec.n_params)
    std_params = read_f64(std_spec.n_params)
    critic_params = read_f64(critic_spec.n_params)
    policy = GaussianPolicy(
        mean_spec=mean_spec,
        mean_params=mean_params,
        std_spec=std_spec,
        std_params=std_params,
        global_std=global_std,
        phi=phi,
    )
    critic = VectorCritic(spec=critic_spec, params=critic_params)
    return weight, policy, critic
