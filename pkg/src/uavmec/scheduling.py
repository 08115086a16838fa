"""Queue-ordering strategies for the onboard task queue.

A schedule is a permutation of queue indices (a plain list of ints).  The
cost of a schedule is the total in-queue waiting time when the tasks run
serially on one processor starting at time zero: enqueue times are measured
relative to that execution start, so entries already waiting carry enqueue
times <= 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .physics import ComputeTask


@dataclass(frozen=True)
class QueueEntry:
    task: ComputeTask
    enqueue_time: float      # relative to execution start
    processing_time: float   # seconds of CPU time

    def __post_init__(self):
        if self.processing_time <= 0:
            raise ValueError("processing_time must be positive")


@dataclass(frozen=True)
class SaConfig:
    t_init: float
    t_min: float
    cooling: float
    max_iters: int
    inner_moves: int
    rng_seed: int

    def __post_init__(self):
        if not 0 < self.t_min < self.t_init:
            raise ValueError("temperatures must satisfy 0 < t_min < t_init")
        if not 0 < self.cooling < 1:
            raise ValueError("cooling must lie in (0, 1)")
        if self.inner_moves < 1:
            raise ValueError("inner_moves must be >= 1")


def schedule_cost(queue: list[QueueEntry], order: list[int]) -> float:
    """Total waiting time (start - enqueue) of the serially chained schedule."""
    if sorted(order) != list(range(len(queue))):
        raise ValueError("order is not a permutation of the queue indices")
    start = 0.0
    total = 0.0
    for idx in order:
        entry = queue[idx]
        total += start - entry.enqueue_time
        start += entry.processing_time
    return total


def sa_schedule(queue: list[QueueEntry], cfg: SaConfig) -> list[int]:
    """Simulated-annealing permutation search minimizing ``schedule_cost``.

    Starts from a random permutation, swaps two random positions per move,
    always accepts improving moves and accepts worse-or-equal moves with
    probability exp(-delta/T).  Returns the best permutation visited.
    """
    if not queue:
        raise ValueError("queue must not be empty")
    n = len(queue)
    rng = np.random.default_rng(cfg.rng_seed)
    current = list(rng.permutation(n))
    current_cost = schedule_cost(queue, current)
    best = list(current)
    best_cost = current_cost
    if n == 1:
        return best

    temperature = cfg.t_init
    iters = 0
    while temperature > cfg.t_min and iters < cfg.max_iters:
        for _ in range(cfg.inner_moves):
            i, j = rng.choice(n, size=2, replace=False)
            candidate = list(current)
            candidate[i], candidate[j] = candidate[j], candidate[i]
            candidate_cost = schedule_cost(queue, candidate)
            delta = candidate_cost - current_cost
            if delta < 0 or rng.random() <= math.exp(-delta / temperature):
                current = candidate
                current_cost = candidate_cost
                if current_cost < best_cost:
                    best = list(current)
                    best_cost = current_cost
        temperature *= cfg.cooling
        iters += 1
    return best


def fcfs_schedule(queue: list[QueueEntry]) -> list[int]:
    """First-come-first-served: stable sort by enqueue time."""
    if not queue:
        raise ValueError("queue must not be empty")
    return sorted(range(len(queue)), key=lambda i: queue[i].enqueue_time)


def sjf_schedule(queue: list[QueueEntry]) -> list[int]:
    """Shortest job first: stable sort by processing time."""
    if not queue:
        raise ValueError("queue must not be empty")
    return sorted(range(len(queue)), key=lambda i: queue[i].processing_time)


def priority_schedule(queue: list[QueueEntry]) -> list[int]:
    """Largest total cycle demand (data_bits * cycles_per_bit) first."""
    if not queue:
        raise ValueError("queue must not be empty")
    return sorted(
        range(len(queue)),
        key=lambda i: -queue[i].task.data_bits * queue[i].task.cycles_per_bit,
    )


SCHEDULERS = {
    "fcfs": fcfs_schedule,
    "sjf": sjf_schedule,
    "ps": priority_schedule,
}
