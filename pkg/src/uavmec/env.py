"""Episodic vector-reward environment for UAV-assisted task offloading.

One episode covers ``horizon`` slots of ``slot_seconds`` each.  Per slot the
agent picks a flight direction, a travel distance, and an acceptance scalar;
accepted in-coverage uploads share the uplink band (mutual interference),
enter the onboard queue, and are executed serially at a fixed CPU speed.
Rewards are the negated per-slot task delay and task energy; the episode
ledger additionally tracks waiting, scheduling, and flight terms so the two
episode objectives can be recomputed exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import physics, scheduling
from .physics import (
    ChannelParams,
    ComputeParams,
    ComputeTask,
    GroundDevice,
    Position3,
    PropulsionParams,
    UavLimits,
)
from .scheduling import QueueEntry, SaConfig
from .seeding import derive

SCHEDULER_KINDS = ("sa", "fcfs", "sjf", "ps")
ENQUEUE_ORDERS = ("gd_id", "nearest")


@dataclass(frozen=True)
class TaskGenConfig:
    period_slots: int
    size_range: tuple[float, float]        # bits
    cycles_per_bit_range: tuple[float, float]

    def __post_init__(self):
        if self.period_slots < 1:
            raise ValueError("period_slots must be >= 1")
        lo, hi = self.size_range
        if not 0 < lo <= hi:
            raise ValueError("size_range must be positive and ordered")
        lo, hi = self.cycles_per_bit_range
        if not 0 < lo <= hi:
            raise ValueError("cycles_per_bit_range must be positive and ordered")


@dataclass(frozen=True)
class RewardConfig:
    penalty_w: float
    discounts: tuple[float, float]

    def __post_init__(self):
        if self.penalty_w <= 0:
            raise ValueError("penalty_w must be positive")
        for g in self.discounts:
            if not 0.0 <= g <= 1.0:
                raise ValueError("discount factors must lie in [0, 1]")


@dataclass(frozen=True)
class EnvConfig:
    n_gds: int
    horizon: int
    limits: UavLimits
    channel: ChannelParams
    propulsion: PropulsionParams
    compute: ComputeParams
    task_gen: TaskGenConfig
    reward: RewardConfig
    scheduler_kind: str
    rng_seed: int
    sa: SaConfig
    gd_transmit_power_w: float
    enqueue_order: str = "gd_id"

    def __post_init__(self):
        if self.n_gds < 1:
            raise ValueError("n_gds must be >= 1")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.scheduler_kind not in SCHEDULER_KINDS:
            raise ValueError(f"scheduler_kind must be one of {SCHEDULER_KINDS}")
        if self.enqueue_order not in ENQUEUE_ORDERS:
            raise ValueError(f"enqueue_order must be one of {ENQUEUE_ORDERS}")
        if self.gd_transmit_power_w <= 0:
            raise ValueError("gd_transmit_power_w must be positive")

    @property
    def obs_dim(self) -> int:
        return 4 + 2 * self.n_gds


@dataclass(frozen=True)
class ActionTuple:
    theta: float   # radians in [0, 2*pi]
    dist: float    # meters in [0, d_max]
    accept: float  # unit interval


@dataclass(frozen=True)
class VectorReward:
    r_delay: float
    r_energy: float

    def as_array(self) -> np.ndarray:
        return np.array([self.r_delay, self.r_energy], dtype=float)


@dataclass(frozen=True)
class EnvState:
    uav_pose: Position3
    queue_len: int
    gd_status: tuple[tuple[float, float], ...]  # (arrival seconds, bits); zeros when idle
    clock: int
    invalid: bool = False


@dataclass
class EpisodeLedger:
    """Per-slot accounting from which both episode objectives derive."""

    horizon: int
    slot_delay: list[float] = field(default_factory=list)        # upload + compute delay of the slot's uploads
    slot_task_energy: list[float] = field(default_factory=list)  # compute + receive energy of uploads
    slot_compute_energy: list[float] = field(default_factory=list)
    slot_receive_energy: list[float] = field(default_factory=list)
    slot_wait: list[float] = field(default_factory=list)         # accrued waiting of pending tasks
    slot_sched: list[float] = field(default_factory=list)        # queueing delays booked at start
    slot_flight_energy: list[float] = field(default_factory=list)
    slot_uploads: list[tuple[str, ...]] = field(default_factory=list)
    slot_penalty: list[bool] = field(default_factory=list)
    poses: list[tuple[float, float]] = field(default_factory=list)
    task_wait: dict[str, float] = field(default_factory=dict)
    task_sched: dict[str, float] = field(default_factory=dict)
    complete: bool = False


def episode_objectives(ledger: EpisodeLedger) -> tuple[float, float]:
    """Return (total delay seconds, total energy joules) of a finished episode."""
    if not ledger.complete:
        raise ValueError("episode is not complete")
    f1 = sum(ledger.slot_delay) + sum(ledger.slot_wait) + sum(ledger.slot_sched)
    f2 = sum(ledger.slot_task_energy) + sum(ledger.slot_flight_energy)
    return f1, f2


def decode_action(raw, limits: UavLimits) -> ActionTuple:
    """Clip three unbounded reals into the action box."""
    theta = float(min(max(raw[0], 0.0), 2.0 * math.pi))
    dist = float(min(max(raw[1], 0.0), limits.d_max))
    accept = float(min(max(raw[2], 0.0), 1.0))
    return ActionTuple(theta, dist, accept)


class _QueueItem:
    __slots__ = ("task", "task_id", "enqueue_abs", "processing", "remaining", "started")

    def __init__(self, task: ComputeTask, task_id: str, enqueue_abs: float, processing: float):
        self.task = task
        self.task_id = task_id
        self.enqueue_abs = enqueue_abs
        self.processing = processing
        self.remaining = processing
        self.started = False


class UavMecEnv:
    """Single-UAV offloading environment; one instance owns one episode at a time."""

    def __init__(self, cfg: EnvConfig):
        self.cfg = cfg
        self.gds = self._place_gds()
        self._state: EnvState | None = None
        self._done = True
        self.ledger: EpisodeLedger | None = None

    def _place_gds(self) -> list[GroundDevice]:
        rng = np.random.default_rng(derive(self.cfg.rng_seed, "gd-layout"))
        x_max, y_max = self.cfg.limits.area
        gds = []
        for i in range(self.cfg.n_gds):
            pos = Position3(rng.uniform(0.0, x_max), rng.uniform(0.0, y_max), 0.0)
            gds.append(GroundDevice(id=i, position=pos, transmit_power=self.cfg.gd_transmit_power_w))
        return gds

    def _generate_timelines(self, seed: int) -> list[dict[int, tuple[float, float]]]:
        """Per device: slot -> (bits, cycles_per_bit) for every periodic slot."""
        gen = self.cfg.task_gen
        timelines: list[dict[int, tuple[float, float]]] = []
        for i in range(self.cfg.n_gds):
            rng = np.random.default_rng(derive(seed, "tasks", i))
            phase = int(rng.integers(0, gen.period_slots))
            slots = {}
            for slot in range(phase, self.cfg.horizon, gen.period_slots):
                bits = rng.uniform(*gen.size_range)
                cycles = rng.uniform(*gen.cycles_per_bit_range)
                slots[slot] = (bits, cycles)
            timelines.append(slots)
        return timelines

    def reset(self, seed: int) -> EnvState:
        cfg = self.cfg
        rng = np.random.default_rng(derive(seed, "reset"))
        x_max, y_max = cfg.limits.area
        pose = Position3(rng.uniform(0.0, x_max), rng.uniform(0.0, y_max), cfg.limits.altitude_m)

        self._episode_seed = seed
        self._timelines = self._generate_timelines(seed)
        self._pending: list[ComputeTask | None] = [None] * cfg.n_gds
        self._queue: list[_QueueItem] = []
        self._clock = 0
        self._done = False
        self.ledger = EpisodeLedger(horizon=cfg.horizon)
        self.ledger.poses.append((pose.x, pose.y))
        self._materialize_arrivals(slot=0)
        self._state = self._snapshot(pose, invalid=False)
        return self._state

    def _materialize_arrivals(self, slot: int) -> None:
        tau = self.cfg.limits.slot_seconds
        for i in range(self.cfg.n_gds):
            if self._pending[i] is None and slot in self._timelines[i]:
                bits, cycles = self._timelines[i][slot]
                self._pending[i] = ComputeTask(
                    source_gd=i, data_bits=bits, cycles_per_bit=cycles, arrival_time=slot * tau
                )

    def _snapshot(self, pose: Position3, invalid: bool) -> EnvState:
        status = []
        for task in self._pending:
            if task is None:
                status.append((0.0, 0.0))
            else:
                status.append((task.arrival_time, task.data_bits))
        return EnvState(
            uav_pose=pose,
            queue_len=len(self._queue),
            gd_status=tuple(status),
            clock=self._clock,
            invalid=invalid,
        )

    def encode_obs(self, state: EnvState) -> np.ndarray:
        """Fixed affine feature map: positions by area extents, sizes by the
        max task size, times by the episode length."""
        cfg = self.cfg
        x_max, y_max = cfg.limits.area
        total_seconds = cfg.horizon * cfg.limits.slot_seconds
        max_bits = cfg.task_gen.size_range[1]
        feats = [
            state.uav_pose.x / x_max,
            state.uav_pose.y / y_max,
            state.queue_len / cfg.n_gds,
            state.clock / cfg.horizon,
        ]
        for arrival, bits in state.gd_status:
            feats.append(arrival / total_seconds)
            feats.append(bits / max_bits)
        return np.array(feats, dtype=float)

    def _reorder_queue(self, slot_start: float) -> None:
        """Re-run the configured scheduler on the not-yet-started queue suffix."""
        offset = 1 if self._queue and self._queue[0].started else 0
        suffix = self._queue[offset:]
        if len(suffix) < 2:
            return
        entries = [
            QueueEntry(
                task=item.task,
                enqueue_time=item.enqueue_abs - slot_start,
                processing_time=item.processing,
            )
            for item in suffix
        ]
        kind = self.cfg.scheduler_kind
        if kind == "sa":
            sa_cfg = replace(self.cfg.sa, rng_seed=derive(self._episode_seed, "sa", self._clock))
            order = scheduling.sa_schedule(entries, sa_cfg)
        else:
            order = scheduling.SCHEDULERS[kind](entries)
        self._queue[offset:] = [suffix[k] for k in order]

    def _execute_queue(self, slot_start: float, slot_end: float) -> float:
        """Advance the serial processor through this slot; returns booked
        scheduling delay (time from enqueue to computation start)."""
        booked = 0.0
        now = slot_start
        while self._queue and now < slot_end - 1e-12:
            head = self._queue[0]
            if not head.started:
                head.started = True
                delay = now - head.enqueue_abs
                booked += delay
                self.ledger.task_sched[head.task_id] = delay
            consume = min(head.remaining, slot_end - now)
            head.remaining -= consume
            now += consume
            if head.remaining <= 1e-12:
                self._queue.pop(0)
        return booked

    def step(self, action: ActionTuple) -> tuple[EnvState, VectorReward, bool]:
        if self._state is None or self._done:
            raise RuntimeError("step called on a finished or unreset episode")
        cfg = self.cfg
        tau = cfg.limits.slot_seconds
        t = self._clock
        slot_start = t * tau
        slot_end = slot_start + tau

        pose = physics.move_uav(self._state.uav_pose, action.theta, action.dist, cfg.limits)
        violated = not physics.in_area(pose, cfg.limits)
        if violated:
            pose = physics.clamp_to_area(pose, cfg.limits)
        flight_e = physics.flight_energy_step(action.dist / tau, cfg.propulsion, tau)

        slot_delay = 0.0
        compute_e = 0.0
        receive_e = 0.0
        uploaded_ids: list[str] = []
        new_items: list[_QueueItem] = []
        if action.accept > 0.5:
            chosen = [
                i
                for i in range(cfg.n_gds)
                if self._pending[i] is not None
                and physics.in_coverage(pose, self.gds[i].position, cfg.limits)
            ]
            if chosen:
                powers = [physics.received_power_w(self.gds[i], pose, cfg.channel) for i in chosen]
                for k, i in enumerate(chosen):
                    task = self._pending[i]
                    ratio = physics.sinr_from_powers(powers, k, cfg.channel.noise_power_w)
                    rate = physics.uplink_rate(ratio, cfg.channel)
                    up_delay = physics.g2a_delay(task, rate)
                    proc = physics.compute_delay(task, cfg.compute)
                    slot_delay += up_delay + proc
                    compute_e += physics.compute_energy(task, cfg.compute)
                    receive_e += physics.receive_energy(task, rate, cfg.compute)
                    task_id = f"{i}-{int(round(task.arrival_time / tau))}"
                    uploaded_ids.append(task_id)
                    new_items.append(_QueueItem(task, task_id, slot_start, proc))
                    self._pending[i] = None

        if new_items:
            if cfg.enqueue_order == "nearest":
                new_items.sort(
                    key=lambda it: physics.horizontal_distance(pose, self.gds[it.task.source_gd].position)
                )
            self._queue.extend(new_items)
            self._reorder_queue(slot_start)

        booked_sched = self._execute_queue(slot_start, slot_end)

        wait_accrued = 0.0
        for i in range(cfg.n_gds):
            task = self._pending[i]
            if task is not None:
                wait_accrued += tau
                task_id = f"{i}-{int(round(task.arrival_time / tau))}"
                self.ledger.task_wait[task_id] = self.ledger.task_wait.get(task_id, 0.0) + tau

        ledger = self.ledger
        ledger.slot_delay.append(slot_delay)
        ledger.slot_compute_energy.append(compute_e)
        ledger.slot_receive_energy.append(receive_e)
        ledger.slot_task_energy.append(compute_e + receive_e)
        ledger.slot_wait.append(wait_accrued)
        ledger.slot_sched.append(booked_sched)
        ledger.slot_flight_energy.append(flight_e)
        ledger.slot_uploads.append(tuple(uploaded_ids))
        ledger.slot_penalty.append(violated)
        ledger.poses.append((pose.x, pose.y))

        if violated:
            reward = VectorReward(-cfg.reward.penalty_w, -cfg.reward.penalty_w)
        else:
            reward = VectorReward(-slot_delay, -(compute_e + receive_e))

        self._clock += 1
        done = self._clock == cfg.horizon
        if done:
            # Entries that never started still spent their queue time waiting.
            for item in self._queue:
                if not item.started:
                    delay = cfg.horizon * tau - item.enqueue_abs
                    ledger.slot_sched[-1] += delay
                    ledger.task_sched[item.task_id] = delay
            ledger.complete = True
        else:
            self._materialize_arrivals(self._clock)

        self._done = done
        self._state = self._snapshot(pose, invalid=violated)
        return self._state, reward, done


@dataclass
class Transition:
    obs: np.ndarray
    action: np.ndarray          # raw (unclipped) action fed to decode_action
    reward: np.ndarray          # (-delay, -energy) vector
    next_obs: np.ndarray
    done: bool
    mean: np.ndarray | None = None
    std: np.ndarray | None = None
    logprob: float | None = None


def rollout(policy, cfg: EnvConfig, seed: int) -> tuple[EpisodeLedger, list[Transition]]:
    """Run one full episode.

    ``policy(obs, state, rng) -> (raw_action, stats)`` where stats is either
    None or a (mean, std, logprob) triple recorded into the transitions.
    """
    env = UavMecEnv(cfg)
    state = env.reset(seed)
    rng = np.random.default_rng(derive(seed, "actions"))
    obs = env.encode_obs(state)
    transitions: list[Transition] = []
    done = False
    while not done:
        raw, stats = policy(obs, state, rng)
        raw = np.asarray(raw, dtype=float)
        action = decode_action(raw, cfg.limits)
        state, reward, done = env.step(action)
        next_obs = env.encode_obs(state)
        tr = Transition(obs=obs, action=raw, reward=reward.as_array(), next_obs=next_obs, done=done)
        if stats is not None:
            tr.mean, tr.std, tr.logprob = stats
        transitions.append(tr)
        obs = next_obs
    return env.ledger, transitions
