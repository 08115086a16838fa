"""Experiment configuration: YAML tree <-> typed config objects.

Every physical constant lives in the config file; nothing numeric is
hard-coded in the simulator.  Loading validates types and reports the full
field path of anything missing, unknown, or malformed.  ``to_dict`` followed
by ``from_dict`` is an exact round trip.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import yaml

from .env import EnvConfig, RewardConfig, TaskGenConfig
from .evolve import EvoConfig, NetsConfig, UPDATE_RULES
from .physics import ChannelParams, ComputeParams, PropulsionParams, UavLimits
from .scheduling import SaConfig
from .updates import OptimConfig, PpoConfig, TdlConfig


class ConfigError(ValueError):
    """Configuration problem with the offending field path in the message."""


@dataclass(frozen=True)
class ExperimentConfig:
    env: EnvConfig
    evo: EvoConfig
    update_rule: str
    ppo: PpoConfig
    tdl: TdlConfig
    optim: OptimConfig
    nets: NetsConfig
    gae_lambda: float
    seed: int
    output_dir: str

    def __post_init__(self):
        if self.update_rule not in UPDATE_RULES:
            raise ConfigError(f"update_rule must be one of {UPDATE_RULES}")
        if not 0.0 <= self.gae_lambda <= 1.0:
            raise ConfigError("gae_lambda must lie in [0, 1]")

    @property
    def scheduler_kind(self) -> str:
        return self.env.scheduler_kind


def _section(data: dict, key: str, path: str) -> dict:
    if key not in data:
        raise ConfigError(f"missing required field: {path}{key}")
    value = data[key]
    if not isinstance(value, dict):
        raise ConfigError(f"expected a mapping at {path}{key}")
    return value


def _scalar(data: dict, key: str, path: str, kind):
    if key not in data:
        raise ConfigError(f"missing required field: {path}{key}")
    value = data[key]
    try:
        if kind is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise TypeError
            return float(value)
        if kind is int:
            if isinstance(value, bool) or not isinstance(value, int):
                raise TypeError
            return int(value)
        if kind is str:
            if not isinstance(value, str):
                raise TypeError
            return value
    except TypeError:
        raise ConfigError(f"expected {kind.__name__} at {path}{key}, got {value!r}") from None
    raise ConfigError(f"unsupported scalar kind for {path}{key}")


def _float_tuple(data: dict, key: str, path: str, length: int | None = None) -> tuple[float, ...]:
    if key not in data:
        raise ConfigError(f"missing required field: {path}{key}")
    value = data[key]
    if not isinstance(value, (list, tuple)):
        raise ConfigError(f"expected a list at {path}{key}")
    if length is not None and len(value) != length:
        raise ConfigError(f"expected {length} entries at {path}{key}")
    try:
        return tuple(float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"expected numbers at {path}{key}") from None


def _int_tuple(data: dict, key: str, path: str) -> tuple[int, ...]:
    if key not in data:
        raise ConfigError(f"missing required field: {path}{key}")
    value = data[key]
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(f"expected a non-empty list at {path}{key}")
    try:
        return tuple(int(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"expected integers at {path}{key}") from None


def _check_unknown(data: dict, allowed: set[str], path: str) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown field: {path}{sorted(unknown)[0]}")


def _make(cls, path: str, **kwargs):
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"invalid value under {path.rstrip('.')}: {exc}") from None


def _env_from_dict(data: dict, path: str = "env.") -> EnvConfig:
    _check_unknown(
        data,
        {
            "n_gds", "horizon", "rng_seed", "scheduler_kind", "enqueue_order",
            "gd_transmit_power_w", "limits", "channel", "propulsion", "compute",
            "task_gen", "reward", "sa",
        },
        path,
    )
    lim = _section(data, "limits", path)
    _check_unknown(lim, {"altitude_m", "v_max", "theta_max", "slot_seconds", "area"}, path + "limits.")
    limits = _make(UavLimits, path + "limits",
        
        altitude_m=_scalar(lim, "altitude_m", path + "limits.", float),
        v_max=_scalar(lim, "v_max", path + "limits.", float),
        theta_max=_scalar(lim, "theta_max", path + "limits.", float),
        slot_seconds=_scalar(lim, "slot_seconds", path + "limits.", float),
        area=_float_tuple(lim, "area", path + "limits.", 2),
    )
    chan = _section(data, "channel", path)
    _check_unknown(
        chan,
        {"a_env", "b_env", "carrier_hz", "light_speed", "loss_los_db", "loss_nlos_db", "bandwidth_hz", "noise_power_w"},
        path + "channel.",
    )
    channel = _make(ChannelParams, path + "channel",
        
        a_env=_scalar(chan, "a_env", path + "channel.", float),
        b_env=_scalar(chan, "b_env", path + "channel.", float),
        carrier_hz=_scalar(chan, "carrier_hz", path + "channel.", float),
        light_speed=_scalar(chan, "light_speed", path + "channel.", float),
        loss_los_db=_scalar(chan, "loss_los_db", path + "channel.", float),
        loss_nlos_db=_scalar(chan, "loss_nlos_db", path + "channel.", float),
        bandwidth_hz=_scalar(chan, "bandwidth_hz", path + "channel.", float),
        noise_power_w=_scalar(chan, "noise_power_w", path + "channel.", float),
    )
    prop = _section(data, "propulsion", path)
    _check_unknown(
        prop, {"p1_w", "p2_w", "v_tip", "v_induced", "d0", "rho", "solidity", "disc_area"}, path + "propulsion."
    )
    propulsion = _make(PropulsionParams, path + "propulsion",
        
        p1_w=_scalar(prop, "p1_w", path + "propulsion.", float),
        p2_w=_scalar(prop, "p2_w", path + "propulsion.", float),
        v_tip=_scalar(prop, "v_tip", path + "propulsion.", float),
        v_induced=_scalar(prop, "v_induced", path + "propulsion.", float),
        d0=_scalar(prop, "d0", path + "propulsion.", float),
        rho=_scalar(prop, "rho", path + "propulsion.", float),
        solidity=_scalar(prop, "solidity", path + "propulsion.", float),
        disc_area=_scalar(prop, "disc_area", path + "propulsion.", float),
    )
    comp = _section(data, "compute", path)
    _check_unknown(comp, {"kappa", "cpu_hz", "rx_power_w"}, path + "compute.")
    compute = _make(ComputeParams, path + "compute",
        
        kappa=_scalar(comp, "kappa", path + "compute.", float),
        cpu_hz=_scalar(comp, "cpu_hz", path + "compute.", float),
        rx_power_w=_scalar(comp, "rx_power_w", path + "compute.", float),
    )
    gen = _section(data, "task_gen", path)
    _check_unknown(gen, {"period_slots", "size_range", "cycles_per_bit_range"}, path + "task_gen.")
    task_gen = _make(TaskGenConfig, path + "task_gen",
        
        period_slots=_scalar(gen, "period_slots", path + "task_gen.", int),
        size_range=_float_tuple(gen, "size_range", path + "task_gen.", 2),
        cycles_per_bit_range=_float_tuple(gen, "cycles_per_bit_range", path + "task_gen.", 2),
    )
    rew = _section(data, "reward", path)
    _check_unknown(rew, {"penalty_w", "discounts"}, path + "reward.")
    reward = _make(RewardConfig, path + "reward",
        
        penalty_w=_scalar(rew, "penalty_w", path + "reward.", float),
        discounts=_float_tuple(rew, "discounts", path + "reward.", 2),
    )
    sa = _section(data, "sa", path)
    _check_unknown(sa, {"t_init", "t_min", "cooling", "max_iters", "inner_moves", "rng_seed"}, path + "sa.")
    sa_cfg = _make(SaConfig, path + "sa",
        
        t_init=_scalar(sa, "t_init", path + "sa.", float),
        t_min=_scalar(sa, "t_min", path + "sa.", float),
        cooling=_scalar(sa, "cooling", path + "sa.", float),
        max_iters=_scalar(sa, "max_iters", path + "sa.", int),
        inner_moves=_scalar(sa, "inner_moves", path + "sa.", int),
        rng_seed=_scalar(sa, "rng_seed", path + "sa.", int),
    )
    try:
        return EnvConfig(
            n_gds=_scalar(data, "n_gds", path, int),
            horizon=_scalar(data, "horizon", path, int),
            limits=limits,
            channel=channel,
            propulsion=propulsion,
            compute=compute,
            task_gen=task_gen,
            reward=reward,
            scheduler_kind=_scalar(data, "scheduler_kind", path, str),
            rng_seed=_scalar(data, "rng_seed", path, int),
            sa=sa_cfg,
            gd_transmit_power_w=_scalar(data, "gd_transmit_power_w", path, float),
            enqueue_order=_scalar(data, "enqueue_order", path, str),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid value under {path.rstrip('.')}: {exc}") from None


def from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("top-level config must be a mapping")
    _check_unknown(
        data,
        {"env", "evo", "update_rule", "ppo", "tdl", "optim", "nets", "gae_lambda", "seed", "output_dir"},
        "",
    )
    env = _env_from_dict(_section(data, "env", ""))

    evo_d = _section(data, "evo", "")
    _check_unknown(
        evo_d,
        {
            "n_tasks", "warmup_iters", "generations", "buffer_size",
            "reference_point", "kmeans_k", "eval_rollouts", "archive_cap",
        },
        "evo.",
    )
    ref = evo_d.get("reference_point")
    if ref is None:
        raise ConfigError("missing required field: evo.reference_point")
    if isinstance(ref, (list, tuple)):
        ref = _float_tuple(evo_d, "reference_point", "evo.", 2)
    elif not isinstance(ref, str):
        raise ConfigError("evo.reference_point must be 'auto' or a pair [f1, f2]")
    try:
        evo = EvoConfig(
            n_tasks=_scalar(evo_d, "n_tasks", "evo.", int),
            warmup_iters=_scalar(evo_d, "warmup_iters", "evo.", int),
            generations=_scalar(evo_d, "generations", "evo.", int),
            buffer_size=_scalar(evo_d, "buffer_size", "evo.", int),
            reference_point=ref,
            kmeans_k=_scalar(evo_d, "kmeans_k", "evo.", int),
            eval_rollouts=_scalar(evo_d, "eval_rollouts", "evo.", int),
            archive_cap=_scalar(evo_d, "archive_cap", "evo.", int),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid value under evo: {exc}") from None

    ppo_d = _section(data, "ppo", "")
    _check_unknown(ppo_d, {"clip_eps", "epochs", "minibatch", "steps_per_iter", "entropy_coef"}, "ppo.")
    try:
        ppo = PpoConfig(
            clip_eps=_scalar(ppo_d, "clip_eps", "ppo.", float),
            epochs=_scalar(ppo_d, "epochs", "ppo.", int),
            minibatch=_scalar(ppo_d, "minibatch", "ppo.", int),
            steps_per_iter=_scalar(ppo_d, "steps_per_iter", "ppo.", int),
            entropy_coef=_scalar(ppo_d, "entropy_coef", "ppo.", float),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid value under ppo: {exc}") from None

    tdl_d = _section(data, "tdl", "")
    _check_unknown(tdl_d, {"kl_budget", "phi", "improve_old_prob"}, "tdl.")
    try:
        tdl = TdlConfig(
            kl_budget=_scalar(tdl_d, "kl_budget", "tdl.", float),
            phi=_scalar(tdl_d, "phi", "tdl.", float),
            improve_old_prob=_scalar(tdl_d, "improve_old_prob", "tdl.", float),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid value under tdl: {exc}") from None

    opt_d = _section(data, "optim", "")
    _check_unknown(opt_d, {"learning_rate", "beta1", "beta2", "eps"}, "optim.")
    optim = OptimConfig(
        learning_rate=_scalar(opt_d, "learning_rate", "optim.", float),
        beta1=_scalar(opt_d, "beta1", "optim.", float),
        beta2=_scalar(opt_d, "beta2", "optim.", float),
        eps=_scalar(opt_d, "eps", "optim.", float),
    )

    nets_d = _section(data, "nets", "")
    _check_unknown(
        nets_d, {"policy_hidden", "critic_hidden", "init_std", "init_mean_bias", "replay_capacity"}, "nets."
    )
    nets = NetsConfig(
        policy_hidden=_int_tuple(nets_d, "policy_hidden", "nets."),
        critic_hidden=_int_tuple(nets_d, "critic_hidden", "nets."),
        init_std=_float_tuple(nets_d, "init_std", "nets.", 3),
        init_mean_bias=_float_tuple(nets_d, "init_mean_bias", "nets.", 3),
        replay_capacity=_scalar(nets_d, "replay_capacity", "nets.", int),
    )

    return ExperimentConfig(
        env=env,
        evo=evo,
        update_rule=_scalar(data, "update_rule", "", str),
        ppo=ppo,
        tdl=tdl,
        optim=optim,
        nets=nets,
        gae_lambda=_scalar(data, "gae_lambda", "", float),
        seed=_scalar(data, "seed", "", int),
        output_dir=_scalar(data, "output_dir", "", str),
    )


def to_dict(cfg: ExperimentConfig) -> dict:
    env = cfg.env
    return {
        "seed": cfg.seed,
        "output_dir": cfg.output_dir,
        "update_rule": cfg.update_rule,
        "gae_lambda": cfg.gae_lambda,
        "env": {
            "n_gds": env.n_gds,
            "horizon": env.horizon,
            "rng_seed": env.rng_seed,
            "scheduler_kind": env.scheduler_kind,
            "enqueue_order": env.enqueue_order,
            "gd_transmit_power_w": env.gd_transmit_power_w,
            "limits": {
                "altitude_m": env.limits.altitude_m,
                "v_max": env.limits.v_max,
                "theta_max": env.limits.theta_max,
                "slot_seconds": env.limits.slot_seconds,
                "area": list(env.limits.area),
            },
            "channel": {
                "a_env": env.channel.a_env,
                "b_env": env.channel.b_env,
                "carrier_hz": env.channel.carrier_hz,
                "light_speed": env.channel.light_speed,
                "loss_los_db": env.channel.loss_los_db,
                "loss_nlos_db": env.channel.loss_nlos_db,
                "bandwidth_hz": env.channel.bandwidth_hz,
                "noise_power_w": env.channel.noise_power_w,
            },
            "propulsion": {
                "p1_w": env.propulsion.p1_w,
                "p2_w": env.propulsion.p2_w,
                "v_tip": env.propulsion.v_tip,
                "v_induced": env.propulsion.v_induced,
                "d0": env.propulsion.d0,
                "rho": env.propulsion.rho,
                "solidity": env.propulsion.solidity,
                "disc_area": env.propulsion.disc_area,
            },
            "compute": {
                "kappa": env.compute.kappa,
                "cpu_hz": env.compute.cpu_hz,
                "rx_power_w": env.compute.rx_power_w,
            },
            "task_gen": {
                "period_slots": env.task_gen.period_slots,
                "size_range": list(env.task_gen.size_range),
                "cycles_per_bit_range": list(env.task_gen.cycles_per_bit_range),
            },
            "reward": {
                "penalty_w": env.reward.penalty_w,
                "discounts": list(env.reward.discounts),
            },
            "sa": {
                "t_init": env.sa.t_init,
                "t_min": env.sa.t_min,
                "cooling": env.sa.cooling,
                "max_iters": env.sa.max_iters,
                "inner_moves": env.sa.inner_moves,
                "rng_seed": env.sa.rng_seed,
            },
        },
        "evo": {
            "n_tasks": cfg.evo.n_tasks,
            "warmup_iters": cfg.evo.warmup_iters,
            "generations": cfg.evo.generations,
            "buffer_size": cfg.evo.buffer_size,
            "reference_point": (
                cfg.evo.reference_point
                if isinstance(cfg.evo.reference_point, str)
                else list(cfg.evo.reference_point)
            ),
            "kmeans_k": cfg.evo.kmeans_k,
            "eval_rollouts": cfg.evo.eval_rollouts,
            "archive_cap": cfg.evo.archive_cap,
        },
        "ppo": {
            "clip_eps": cfg.ppo.clip_eps,
            "epochs": cfg.ppo.epochs,
            "minibatch": cfg.ppo.minibatch,
            "steps_per_iter": cfg.ppo.steps_per_iter,
            "entropy_coef": cfg.ppo.entropy_coef,
        },
        "tdl": {
            "kl_budget": cfg.tdl.kl_budget,
            "phi": cfg.tdl.phi,
            "improve_old_prob": cfg.tdl.improve_old_prob,
        },
        "optim": {
            "learning_rate": cfg.optim.learning_rate,
            "beta1": cfg.optim.beta1,
            "beta2": cfg.optim.beta2,
            "eps": cfg.optim.eps,
        },
        "nets": {
            "policy_hidden": list(cfg.nets.policy_hidden),
            "critic_hidden": list(cfg.nets.critic_hidden),
            "init_std": list(cfg.nets.init_std),
            "init_mean_bias": list(cfg.nets.init_mean_bias),
            "replay_capacity": cfg.nets.replay_capacity,
        },
    }


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
    return from_dict(data)


def save_config(cfg: ExperimentConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(to_dict(cfg), fh, sort_keys=False)


def config_hash(cfg: ExperimentConfig) -> str:
    """Platform-stable content hash of the canonical JSON form."""
    canon = json.dumps(to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def default_config() -> ExperimentConfig:
    """Full-scale defaults mirroring the published simulation settings."""
    env = EnvConfig(
        n_gds=20,
        horizon=200,
        limits=UavLimits(
            altitude_m=100.0,
            v_max=30.0,
            theta_max=math.pi / 4.0,
            slot_seconds=1.0,
            area=(1000.0, 1000.0),
        ),
        channel=ChannelParams(
            a_env=9.61,
            b_env=0.16,
            carrier_hz=2.0e9,
            light_speed=3.0e8,
            loss_los_db=0.1,
            loss_nlos_db=21.0,
            bandwidth_hz=1.0e7,
            noise_power_w=1.0e-13,
        ),
        propulsion=PropulsionParams(
            p1_w=79.8563,
            p2_w=88.6279,
            v_tip=120.0,
            v_induced=4.03,
            d0=0.6,
            rho=1.225,
            solidity=0.05,
            disc_area=0.503,
        ),
        compute=ComputeParams(kappa=1.0e-28, cpu_hz=3.0e9, rx_power_w=0.1),
        task_gen=TaskGenConfig(
            period_slots=20,
            size_range=(5.0e5, 2.0e6),
            cycles_per_bit_range=(500.0, 1500.0),
        ),
        reward=RewardConfig(penalty_w=1.0e4, discounts=(0.99, 0.99)),
        scheduler_kind="sa",
        rng_seed=7,
        sa=SaConfig(t_init=10.0, t_min=0.01, cooling=0.95, max_iters=200, inner_moves=20, rng_seed=0),
        gd_transmit_power_w=0.1,
        enqueue_order="gd_id",
    )
    return ExperimentConfig(
        env=env,
        evo=EvoConfig(
            n_tasks=10,
            warmup_iters=60,
            generations=500,
            buffer_size=2,
            reference_point="auto",
            kmeans_k=3,
            eval_rollouts=3,
        ),
        update_rule="tdl",
        ppo=PpoConfig(clip_eps=0.2, epochs=10, minibatch=64, steps_per_iter=2048, entropy_coef=0.0),
        tdl=TdlConfig(kl_budget=0.01, phi=1.0, improve_old_prob=0.2),
        optim=OptimConfig(learning_rate=1.0e-4, beta1=0.9, beta2=0.999, eps=1.0e-8),
        nets=NetsConfig(
            policy_hidden=(64, 64),
            critic_hidden=(64, 64),
            init_std=(1.5, 7.5, 0.25),
            init_mean_bias=(math.pi, 15.0, 0.5),
            replay_capacity=100_000,
        ),
        gae_lambda=0.95,
        seed=1,
        output_dir="runs/full",
    )


def desk_config() -> ExperimentConfig:
    """Desk-scale settings: 5 devices, 60 slots, 4 tasks, 10+10 iterations."""
    base = default_config()
    env = base.env
    env = EnvConfig(
        n_gds=5,
        horizon=60,
        limits=UavLimits(
            altitude_m=100.0,
            v_max=30.0,
            theta_max=math.pi / 4.0,
            slot_seconds=1.0,
            area=(400.0, 400.0),
        ),
        channel=env.channel,
        propulsion=env.propulsion,
        compute=env.compute,
        task_gen=TaskGenConfig(
            period_slots=10,
            size_range=(5.0e5, 2.0e6),
            cycles_per_bit_range=(500.0, 1500.0),
        ),
        reward=env.reward,
        scheduler_kind="sa",
        rng_seed=7,
        sa=SaConfig(t_init=10.0, t_min=0.05, cooling=0.9, max_iters=30, inner_moves=4, rng_seed=0),
        gd_transmit_power_w=0.1,
        enqueue_order="gd_id",
    )
    return ExperimentConfig(
        env=env,
        evo=EvoConfig(
            n_tasks=4,
            warmup_iters=10,
            generations=10,
            buffer_size=2,
            reference_point="auto",
            kmeans_k=3,
            eval_rollouts=3,
        ),
        update_rule="tdl",
        ppo=PpoConfig(clip_eps=0.2, epochs=4, minibatch=60, steps_per_iter=120, entropy_coef=0.0),
        tdl=base.tdl,
        optim=base.optim,
        nets=NetsConfig(
            policy_hidden=(32, 32),
            critic_hidden=(32, 32),
            init_std=(1.5, 7.5, 0.25),
            init_mean_bias=(math.pi, 15.0, 0.5),
            replay_capacity=20_000,
        ),
        gae_lambda=0.95,
        seed=1,
        output_dir="runs/desk",
    )
