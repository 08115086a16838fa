"""Population-based training over objective weight vectors.

The run proceeds in three stages: a warm-up that trains one randomly
initialized policy per weight vector, an evolutionary loop that reseeds each
weight with the population member maximizing its weighted objectives and
trains again, and a final Pareto analysis that clusters the external archive
and interpolates each cluster into a polyline front.

Objective points are stored as (f1 seconds, f2 joules) and compared in
maximization coordinates (-f1, -f2).
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .env import EnvConfig, rollout, episode_objectives
from .nets import (
    GaussianPolicy,
    MlpSpec,
    ReplayBuffer,
    VectorCritic,
    batch_from_transitions,
    gaussian_logprob,
    policy_forward,
)
from .seeding import derive
from .updates import (
    Adam,
    OptimConfig,
    PpoConfig,
    TaskTuple,
    TdlConfig,
    make_weight,
    mopg_ppo_update,
    tdl_update,
)

UPDATE_RULES = ("ppo", "tdl")


@dataclass(frozen=True)
class EvoConfig:
    n_tasks: int
    warmup_iters: int
    generations: int
    buffer_size: int
    reference_point: str | tuple[float, float]  # "auto" or explicit (f1, f2)
    kmeans_k: int
    eval_rollouts: int = 3
    archive_cap: int = 0  # >0: prune the archive by crowding distance past this size; 0: unbounded

    def __post_init__(self):
        if self.n_tasks < 2:
            raise ValueError("n_tasks must be >= 2")
        if self.warmup_iters < 1:
            raise ValueError("warmup_iters must be >= 1")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        if self.buffer_size < 1:
            raise ValueError("buffer_size must be >= 1")
        if self.kmeans_k < 1:
            raise ValueError("kmeans_k must be >= 1")
        if self.eval_rollouts < 1:
            raise ValueError("eval_rollouts must be >= 1")
        if self.archive_cap < 0:
            raise ValueError("archive_cap must be >= 0")
        if isinstance(self.reference_point, str) and self.reference_point != "auto":
            raise ValueError("reference_point must be 'auto' or an explicit (f1, f2) pair")


@dataclass(frozen=True)
class NetsConfig:
    policy_hidden: tuple[int, ...] = (64, 64)
    critic_hidden: tuple[int, ...] = (64, 64)
    init_std: tuple[float, ...] = (1.5, 7.5, 0.25)
    init_mean_bias: tuple[float, ...] = (math.pi, 15.0, 0.5)  # start at the action-box centers
    replay_capacity: int = 100_000


@dataclass(frozen=True)
class ObjectivePoint:
    f1: float  # total task delay, seconds
    f2: float  # total UAV energy, joules

    def max_coords(self) -> np.ndarray:
        return np.array([-self.f1, -self.f2])


def dominates(p: ObjectivePoint, q: ObjectivePoint) -> bool:
    """Pareto dominance in maximization coordinates; a point never dominates itself."""
    pc, qc = p.max_coords(), q.max_coords()
    return bool(np.all(pc >= qc) and np.any(pc > qc))


def init_weights(n: int, m: int = 2) -> list[np.ndarray]:
    """Evenly spaced weight vectors on the 2-simplex edge."""
    if n < 2:
        raise ValueError("need at least two weight vectors")
    if m != 2:
        raise ValueError("only two objectives are supported")
    return [make_weight((i / (n - 1), 1.0 - i / (n - 1))) for i in range(n)]


@dataclass
class PopulationMember:
    task: TaskTuple
    point: ObjectivePoint


@dataclass
class ArchiveEntry:
    point: ObjectivePoint
    weight: np.ndarray
    task: TaskTuple


def archive_update(archive: list[ArchiveEntry], candidates: list[PopulationMember]) -> list[ArchiveEntry]:
    """Non-dominated set of archive plus candidates.

    Exact duplicate points keep the earliest entry; output is sorted by
    (f1, f2) for a canonical order.
    """
    combined: list[ArchiveEntry] = list(archive)
    combined.extend(
        ArchiveEntry(point=m.point, weight=m.task.weight.copy(), task=m.task.copy()) for m in candidates
    )
    kept: list[ArchiveEntry] = []
    for i, entry in enumerate(combined):
        dominated = any(dominates(other.point, entry.point) for other in combined)
        duplicate = any(
            other.point == entry.point for other in combined[:i]
        )
        if not dominated and not duplicate:
            kept.append(entry)
    kept.sort(key=lambda e: (e.point.f1, e.point.f2))
    return kept


def crowding_distances(points: list[ObjectivePoint]) -> np.ndarray:
    """Per-point crowding distance over the two objectives; extremes get inf."""
    n = len(points)
    coords = np.array([[p.f1, p.f2] for p in points])
    dist = np.zeros(n)
    for k in range(2):
        order = np.argsort(coords[:, k], kind="stable")
        span = coords[order[-1], k] - coords[order[0], k]
        dist[order[0]] = dist[order[-1]] = np.inf
        if span <= 0:
            continue
        for pos in range(1, n - 1):
            i = order[pos]
            dist[i] += (coords[order[pos + 1], k] - coords[order[pos - 1], k]) / span
    return dist


def crowding_prune(archive: list[ArchiveEntry], keep: int) -> list[ArchiveEntry]:
    """Keep the ``keep`` entries with the largest crowding distance.

    Ties and infinities favor earlier (canonical-order) entries; output stays
    in canonical (f1, f2) order.
    """
    if len(archive) <= keep:
        return list(archive)
    dist = crowding_distances([e.point for e in archive])
    ranked = sorted(range(len(archive)), key=lambda i: (-dist[i], i))
    chosen = sorted(ranked[:keep])
    return [archive[i] for i in chosen]


def task_update(n: int, population: list[PopulationMember], weights: list[np.ndarray]) -> list[TaskTuple]:
    """Pair each weight with the population member maximizing its weighted
    objectives (ties favor the lowest population index)."""
    if not population:
        raise ValueError("population must not be empty")
    if len(weights) != n:
        raise ValueError("need one weight vector per task")
    scores = np.array([m.point.max_coords() for m in population])
    selected = []
    for w in weights:
        idx = int(np.argmax(scores @ w))
        chosen = population[idx].task
        selected.append(TaskTuple(weight=w.copy(), policy=chosen.policy.copy(), critic=chosen.critic.copy()))
    return selected


def buffer_prune(
    population: list[PopulationMember],
    weights: list[np.ndarray],
    z_ref: ObjectivePoint,
    b_size: int,
) -> list[PopulationMember]:
    """Per-weight-direction buffers keeping the b_size members farthest from
    the reference point.

    Members are assigned to the weight maximizing cosine similarity between
    the reference-shifted objective vector and the weight vector.
    """
    if not population:
        return []
    ref = z_ref.max_coords()
    buffers: list[list[tuple[float, int]]] = [[] for _ in weights]
    for idx, member in enumerate(population):
        vec = member.point.max_coords() - ref
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            best = 0
        else:
            sims = [float(vec @ w) / (norm * float(np.linalg.norm(w))) for w in weights]
            best = int(np.argmax(sims))
        buffers[best].append((norm, idx))
    pruned: list[PopulationMember] = []
    for bucket in buffers:
        bucket.sort(key=lambda pair: -pair[0])  # stable: ties keep population order
        for _, idx in bucket[:b_size]:
            pruned.append(population[idx])
    return pruned


def hypervolume(points, ref: ObjectivePoint) -> float:
    """Exact 2-D dominated area (union of boxes) relative to the reference.

    Every point must weakly dominate the reference in both coordinates.
    """
    coords = [p.max_coords() for p in points]
    ref_c = ref.max_coords()
    for c in coords:
        if not np.all(c >= ref_c):
            raise ValueError(f"point {c} does not dominate the reference {ref_c}")
    ordered = sorted(coords, key=lambda c: (-c[0], -c[1]))
    area = 0.0
    y_prev = ref_c[1]
    for x, y in ordered:
        if y > y_prev:
            area += float((x - ref_c[0]) * (y - y_prev))
            y_prev = y
    return area


def archive_hypervolume(points, ref: ObjectivePoint) -> float:
    """Hypervolume of the subset of points inside the reference box."""
    ref_c = ref.max_coords()
    inside = [p for p in points if np.all(p.max_coords() >= ref_c)]
    if not inside:
        return 0.0
    return hypervolume(inside, ref)


def sparsity(points) -> float | None:
    """Mean squared consecutive gap per objective over the sorted front;
    undefined (None) for fewer than two points."""
    if len(points) < 2:
        return None
    coords = np.array([p.max_coords() for p in points])
    total = 0.0
    for k in range(coords.shape[1]):
        col = np.sort(coords[:, k])
        total += float(np.sum(np.diff(col) ** 2))
    return total / (len(points) - 1)


def auto_reference(points) -> ObjectivePoint:
    """Componentwise worst objective values pushed out by 10% of the range."""
    if not points:
        raise ValueError("cannot derive a reference point from no points")
    f1s = np.array([p.f1 for p in points])
    f2s = np.array([p.f2 for p in points])

    def pad(worst: float, span: float) -> float:
        margin = 0.1 * span if span > 0 else max(1.0, 0.1 * abs(worst))
        return worst + margin

    return ObjectivePoint(pad(float(f1s.max()), float(np.ptp(f1s))), pad(float(f2s.max()), float(np.ptp(f2s))))


def kmeans_farthest(points: np.ndarray, k: int, max_iter: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic k-means: first centroid is the first point, the rest are
    farthest-point picks; Lloyd iterations cap at ``max_iter``."""
    points = np.asarray(points, dtype=float)
    n = len(points)
    k = max(1, min(k, n))
    centroid_idx = [0]
    for _ in range(1, k):
        dists = np.min(
            np.linalg.norm(points[:, None, :] - points[centroid_idx][None, :, :], axis=2), axis=1
        )
        centroid_idx.append(int(np.argmax(dists)))
    centroids = points[centroid_idx].copy()
    labels = np.zeros(n, dtype=int)
    for _ in range(max_iter):
        dists = np.linalg.norm(points[:, None, :] - centroids[None, :, :], axis=2)
        new_labels = np.argmin(dists, axis=1)
        if np.array_equal(new_labels, labels) and _ > 0:
            break
        labels = new_labels
        for j in range(k):
            mask = labels == j
            if np.any(mask):
                centroids[j] = points[mask].mean(axis=0)
    return labels, centroids


@dataclass
class Cluster:
    member_indices: list[int]              # indices into the archive
    vertices: list[tuple[float, float]]    # (f1, f2) sorted by f1


@dataclass
class ClusteredFront:
    clusters: list[Cluster]


def pareto_analysis(archive: list[ArchiveEntry], k: int) -> ClusteredFront:
    """Cluster archive points in objective space and connect each cluster's
    points, sorted by f1, into a piecewise-linear polyline."""
    if not archive:
        raise ValueError("archive must not be empty")
    points = np.array([[e.point.f1, e.point.f2] for e in archive])
    labels, _ = kmeans_farthest(points, k)
    clusters = []
    for j in sorted(set(int(l) for l in labels)):
        members = [i for i in range(len(archive)) if labels[i] == j]
        members.sort(key=lambda i: (archive[i].point.f1, archive[i].point.f2))
        vertices = [(archive[i].point.f1, archive[i].point.f2) for i in members]
        clusters.append(Cluster(member_indices=members, vertices=vertices))
    return ClusteredFront(clusters=clusters)


@dataclass
class TrainingRecord:
    generation: int     # 0 is the warm-up pass
    task_index: int
    iteration: int
    weighted_return: float
    surrogate: float
    critic_loss: float
    mean_kl: float


@dataclass
class GenerationRecord:
    generation: int
    task_returns: list[float]
    archive_size: int
    hypervolume: float
    sparsity: float | None
    archive_points: list[tuple[float, float]]  # (f1, f2) snapshot after the update


@dataclass
class RunResult:
    archive: list[ArchiveEntry]
    generation_log: list[GenerationRecord]
    training_log: list[TrainingRecord]
    reference_point: ObjectivePoint
    population: list[PopulationMember]


def softplus_inv(y: float) -> float:
    return float(y + math.log1p(-math.exp(-y)))


def build_task(weight: np.ndarray, env_cfg: EnvConfig, nets: NetsConfig, phi: float, seed: int) -> TaskTuple:
    obs_dim = env_cfg.obs_dim
    action_dim = 3
    init_std = np.asarray(nets.init_std, dtype=float)
    if init_std.shape != (action_dim,):
        raise ValueError("init_std must have one entry per action dimension")
    init_mean_bias = np.asarray(nets.init_mean_bias, dtype=float)
    if init_mean_bias.shape != (action_dim,):
        raise ValueError("init_mean_bias must have one entry per action dimension")
    mean_spec = MlpSpec((obs_dim, *nets.policy_hidden, action_dim))
    std_spec = MlpSpec((obs_dim, *nets.policy_hidden, action_dim))
    critic_spec = MlpSpec((obs_dim, *nets.critic_hidden, 2))
    std_bias = np.array([softplus_inv(s) for s in init_std])
    policy = GaussianPolicy(
        mean_spec=mean_spec,
        mean_params=mean_spec.init_params(derive(seed, "mean"), output_bias=init_mean_bias),
        std_spec=std_spec,
        std_params=std_spec.init_params(derive(seed, "std"), output_bias=std_bias),
        global_std=init_std.copy(),
        phi=phi,
    )
    critic = VectorCritic(spec=critic_spec, params=critic_spec.init_params(derive(seed, "critic")))
    return TaskTuple(weight=make_weight(weight), policy=policy, critic=critic)


def sampling_policy(task: TaskTuple):
    """Rollout callable drawing from the Gaussian and recording its stats."""

    def act(obs, state, rng):
        mean, std = policy_forward(task.policy, obs)
        action = mean + std * rng.standard_normal(mean.shape[0])
        logp = float(gaussian_logprob(action[None, :], mean[None, :], std[None, :])[0])
        return action, (mean, std, logp)

    return act


def deterministic_policy(task: TaskTuple):
    """Rollout callable playing the policy mean."""

    def act(obs, state, rng):
        mean, _ = policy_forward(task.policy, obs)
        return mean, None

    return act


def collect_batch(task: TaskTuple, env_cfg: EnvConfig, steps: int, seed: int, buffer: ReplayBuffer | None = None):
    """Gather whole episodes until at least ``steps`` transitions exist.

    Returns (batch, mean weighted undiscounted episode return).
    """
    policy = sampling_policy(task)
    transitions = []
    episode_returns = []
    ep = 0
    while len(transitions) < steps:
        ledger, eps = rollout(policy, env_cfg, derive(seed, "episode", ep))
        transitions.extend(eps)
        rewards = np.stack([t.reward for t in eps])
        episode_returns.append(float((rewards @ task.weight).sum()))
        if buffer is not None:
            for t in eps:
                buffer.append(t)
        ep += 1
    return batch_from_transitions(transitions), float(np.mean(episode_returns))


def evaluate_policy(policy_fn, env_cfg: EnvConfig, eval_seeds) -> ObjectivePoint:
    """Mean episode objectives of a deterministic policy over fixed seeds."""
    f1s, f2s = [], []
    for s in eval_seeds:
        ledger, _ = rollout(policy_fn, env_cfg, s)
        f1, f2 = episode_objectives(ledger)
        f1s.append(f1)
        f2s.append(f2)
    return ObjectivePoint(float(np.mean(f1s)), float(np.mean(f2s)))


def evaluate_task(task: TaskTuple, env_cfg: EnvConfig, eval_seeds) -> ObjectivePoint:
    return evaluate_policy(deterministic_policy(task), env_cfg, eval_seeds)


def train_task(
    task: TaskTuple,
    env_cfg: EnvConfig,
    update_rule: str,
    ppo_cfg: PpoConfig,
    tdl_cfg: TdlConfig,
    optim: OptimConfig,
    gae_lambda: float,
    iters: int,
    master_seed: int,
    generation: int,
    task_index: int,
    replay_capacity: int,
) -> tuple[TaskTuple, list[TrainingRecord]]:
    """One training pass: ``iters`` iterations of collect-then-update.

    Optimizer moments persist across the iterations of the pass and reset
    between passes.
    """
    if update_rule not in UPDATE_RULES:
        raise ValueError(f"update_rule must be one of {UPDATE_RULES}")
    gammas = env_cfg.reward.discounts
    policy_opt = (
        Adam(task.policy.mean_params.size, optim.learning_rate, optim.beta1, optim.beta2, optim.eps),
        Adam(task.policy.std_params.size, optim.learning_rate, optim.beta1, optim.beta2, optim.eps),
    )
    critic_opt = Adam(task.critic.params.size, optim.learning_rate, optim.beta1, optim.beta2, optim.eps)
    buffer = ReplayBuffer(replay_capacity)
    records = []
    for it in range(iters):
        batch, weighted_return = collect_batch(
            task, env_cfg, ppo_cfg.steps_per_iter, derive(master_seed, "rollout", generation, task_index, it), buffer
        )
        update_seed = derive(master_seed, "update", generation, task_index, it)
        if update_rule == "ppo":
            diag = mopg_ppo_update(
                task, batch, ppo_cfg, optim, gammas, gae_lambda, update_seed, policy_opt, critic_opt
            )
        else:
            diag = tdl_update(
                task, batch, tdl_cfg, ppo_cfg, optim, gammas, gae_lambda, update_seed, policy_opt, critic_opt
            )
        records.append(
            TrainingRecord(
                generation=generation,
                task_index=task_index,
                iteration=it,
                weighted_return=weighted_return,
                surrogate=float(diag["surrogate"]),
                critic_loss=float(diag["critic_loss"]),
                mean_kl=float(diag["mean_kl"]),
            )
        )
    return task, records


def _train_and_eval(args):
    (
        task,
        env_cfg,
        update_rule,
        ppo_cfg,
        tdl_cfg,
        optim,
        gae_lambda,
        iters,
        master_seed,
        generation,
        task_index,
        replay_capacity,
        eval_seeds,
    ) = args
    task, records = train_task(
        task,
        env_cfg,
        update_rule,
        ppo_cfg,
        tdl_cfg,
        optim,
        gae_lambda,
        iters,
        master_seed,
        generation,
        task_index,
        replay_capacity,
    )
    point = evaluate_task(task, env_cfg, eval_seeds)
    return task, records, point


def _mopg_pass(tasks, generation, run_args, workers):
    (env_cfg, update_rule, ppo_cfg, tdl_cfg, optim, gae_lambda, iters, master_seed, replay_capacity, eval_seeds) = run_args
    jobs = [
        (
            task,
            env_cfg,
            update_rule,
            ppo_cfg,
            tdl_cfg,
            optim,
            gae_lambda,
            iters,
            master_seed,
            generation,
            i,
            replay_capacity,
            eval_seeds,
        )
        for i, task in enumerate(tasks)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_train_and_eval, jobs))
    else:
        results = [_train_and_eval(job) for job in jobs]
    members = [PopulationMember(task=task, point=point) for task, _, point in results]
    records = [r for _, recs, _ in results for r in recs]
    return members, records


def run(
    evo: EvoConfig,
    env_cfg: EnvConfig,
    update_rule: str,
    ppo_cfg: PpoConfig,
    tdl_cfg: TdlConfig,
    optim: OptimConfig,
    nets: NetsConfig,
    gae_lambda: float,
    seed: int,
    workers: int = 1,
) -> RunResult:
    """Full three-stage run; deterministic for a fixed seed and config."""
    weights = init_weights(evo.n_tasks)
    eval_seeds = [derive(seed, "eval", j) for j in range(evo.eval_rollouts)]
    run_args = (
        env_cfg,
        update_rule,
        ppo_cfg,
        tdl_cfg,
        optim,
        gae_lambda,
        evo.warmup_iters,
        seed,
        nets.replay_capacity,
        eval_seeds,
    )

    tasks = [build_task(w, env_cfg, nets, tdl_cfg.phi, derive(seed, "init", i)) for i, w in enumerate(weights)]
    offspring, training_log = _mopg_pass(tasks, 0, run_args, workers)
    population = list(offspring)
    archive = archive_update([], offspring)

    if evo.reference_point == "auto":
        pinned_ref = auto_reference([e.point for e in archive])
    else:
        pinned_ref = ObjectivePoint(*evo.reference_point)

    generation_log = [
        GenerationRecord(
            generation=0,
            task_returns=[float(m.point.max_coords() @ m.task.weight) for m in offspring],
            archive_size=len(archive),
            hypervolume=archive_hypervolume([e.point for e in archive], pinned_ref),
            sparsity=sparsity([e.point for e in archive]),
            archive_points=[(e.point.f1, e.point.f2) for e in archive],
        )
    ]

    for g in range(1, evo.generations + 1):
        tasks = task_update(evo.n_tasks, population, weights)
        offspring, records = _mopg_pass(tasks, g, run_args, workers)
        training_log.extend(records)
        archive = archive_update(archive, offspring)
        if evo.archive_cap and len(archive) > evo.archive_cap:
            archive = crowding_prune(archive, max(2, evo.archive_cap // 4))
        prune_ref = (
            auto_reference([e.point for e in archive]) if evo.reference_point == "auto" else pinned_ref
        )
        population = buffer_prune(population + offspring, weights, prune_ref, evo.buffer_size)
        generation_log.append(
            GenerationRecord(
                generation=g,
                task_returns=[float(m.point.max_coords() @ m.task.weight) for m in offspring],
                archive_size=len(archive),
                hypervolume=archive_hypervolume([e.point for e in archive], pinned_ref),
                sparsity=sparsity([e.point for e in archive]),
                archive_points=[(e.point.f1, e.point.f2) for e in archive],
            )
        )

    return RunResult(
        archive=archive,
        generation_log=generation_log,
        training_log=training_log,
        reference_point=pinned_ref,
        population=population,
    )
