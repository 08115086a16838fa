"""Air-to-ground channel, task computation, and rotary-wing flight formulas.

All functions are pure and operate on scalar SI quantities: meters, seconds,
bits, Hz, watts, joules.  Angles for the line-of-sight logistic model are in
degrees; everything else uses radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class Position3:
    """A point in 3-D space; ground devices sit at z=0, the UAV at z=H."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise ValueError("position components must be finite")


@dataclass(frozen=True)
class GroundDevice:
    id: int
    position: Position3
    transmit_power: float  # watts

    def __post_init__(self):
        if self.transmit_power <= 0:
            raise ValueError("transmit_power must be positive")


@dataclass(frozen=True)
class ComputeTask:
    source_gd: int
    data_bits: float
    cycles_per_bit: float
    arrival_time: float  # seconds

    def __post_init__(self):
        if self.data_bits <= 0:
            raise ValueError("data_bits must be positive")
        if self.cycles_per_bit <= 0:
            raise ValueError("cycles_per_bit must be positive")
        if self.arrival_time < 0:
            raise ValueError("arrival_time must be non-negative")


@dataclass(frozen=True)
class ChannelParams:
    a_env: float
    b_env: float
    carrier_hz: float
    light_speed: float
    loss_los_db: float
    loss_nlos_db: float
    bandwidth_hz: float
    noise_power_w: float

    def __post_init__(self):
        for name in ("a_env", "b_env", "carrier_hz", "light_speed", "bandwidth_hz", "noise_power_w"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.loss_los_db < 0 or self.loss_nlos_db < 0:
            raise ValueError("excess loss terms must be non-negative")


@dataclass(frozen=True)
class PropulsionParams:
    p1_w: float          # blade profile power at hover
    p2_w: float          # induced power at hover
    v_tip: float         # rotor blade tip speed, m/s
    v_induced: float     # mean rotor induced speed at hover, m/s
    d0: float            # fuselage drag ratio
    rho: float           # air density, kg/m^3
    solidity: float      # rotor solidity
    disc_area: float     # rotor disc area, m^2

    def __post_init__(self):
        for name in ("p1_w", "p2_w", "v_tip", "v_induced", "d0", "rho", "solidity", "disc_area"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class ComputeParams:
    kappa: float       # effective switched capacitance
    cpu_hz: float      # onboard CPU frequency, cycles/s
    rx_power_w: float  # receive power, watts

    def __post_init__(self):
        if self.kappa <= 0 or self.cpu_hz <= 0 or self.rx_power_w <= 0:
            raise ValueError("compute parameters must be positive")


@dataclass(frozen=True)
class UavLimits:
    altitude_m: float
    v_max: float
    theta_max: float     # max azimuth half-angle of the coverage cone, radians
    slot_seconds: float
    area: tuple[float, float]  # (x_max, y_max)

    def __post_init__(self):
        if self.altitude_m <= 0:
            raise ValueError("altitude_m must be positive")
        if not 0.0 < self.theta_max < math.pi / 2:
            raise ValueError("theta_max must lie in (0, pi/2)")
        if self.slot_seconds <= 0:
            raise ValueError("slot_seconds must be positive")
        if self.v_max <= 0:
            raise ValueError("v_max must be positive")
        if any(extent <= 0 for extent in self.area):
            raise ValueError("area extents must be positive")

    @property
    def d_max(self) -> float:
        """Maximum travel distance in one slot."""
        return self.v_max * self.slot_seconds

    @property
    def coverage_radius(self) -> float:
        """Maximum horizontal distance at which a device can upload."""
        return self.altitude_m * math.tan(self.theta_max)


def horizontal_distance(uav: Position3, gd: Position3) -> float:
    """Euclidean distance between the (x, y) projections."""
    return math.hypot(uav.x - gd.x, uav.y - gd.y)


def link_distance(uav: Position3, gd: Position3) -> float:
    """3-D distance between UAV and device."""
    return math.sqrt((uav.x - gd.x) ** 2 + (uav.y - gd.y) ** 2 + (uav.z - gd.z) ** 2)


def in_coverage(uav: Position3, gd: Position3, limits: UavLimits) -> bool:
    """True when the device lies inside the coverage disc (boundary inclusive).

    A relative epsilon keeps the boundary inclusive despite the rounding of
    H * tan(theta_max).
    """
    radius = limits.coverage_radius
    return horizontal_distance(uav, gd) <= radius + 1e-9 * max(1.0, radius)


def elevation_angle_deg(uav: Position3, gd: Position3) -> float:
    """Elevation of the UAV seen from the device, degrees in [0, 90]."""
    d_h = horizontal_distance(uav, gd)
    return math.degrees(math.atan2(uav.z - gd.z, d_h))


def los_probability(uav: Position3, gd: Position3, ch: ChannelParams) -> float:
    """Logistic line-of-sight probability as a function of elevation angle."""
    angle = elevation_angle_deg(uav, gd)
    return 1.0 / (1.0 + ch.a_env * math.exp(-ch.b_env * (angle - ch.a_env)))


def path_loss_db(
    uav: Position3,
    gd: Position3,
    ch: ChannelParams,
    los_prob: float | None = None,
) -> float:
    """Mean path loss in dB over the 3-D link distance.

    ``los_prob`` overrides the computed LoS probability; tests use it to pin
    the pure-LoS and pure-NLoS branches.
    """
    dist = link_distance(uav, gd)
    if dist <= 0:
        raise ValueError("link distance must be positive")
    delta = los_probability(uav, gd, ch) if los_prob is None else los_prob
    return (
        20.0 * math.log10(dist)
        + delta * (ch.loss_los_db - ch.loss_nlos_db)
        + 20.0 * math.log10(4.0 * math.pi * ch.carrier_hz / ch.light_speed)
        + ch.loss_nlos_db
    )


def received_power_w(gd: GroundDevice, uav: Position3, ch: ChannelParams) -> float:
    """Power received at the UAV from one transmitting device."""
    loss = path_loss_db(uav, gd.position, ch)
    return gd.transmit_power * 10.0 ** (-loss / 10.0)


def sinr_from_powers(received: Sequence[float], target_index: int, noise_power_w: float) -> float:
    """SINR given the received powers of all simultaneous transmitters."""
    signal = received[target_index]
    interference = sum(received) - signal
    return signal / (interference + noise_power_w)


def sinr(
    target_gd: int,
    transmitting: Sequence[int],
    uav: Position3,
    gds: Sequence[GroundDevice],
    ch: ChannelParams,
) -> float:
    """Signal-to-interference-and-noise ratio for one uplink.

    All devices in ``transmitting`` share the band; every non-target member
    contributes interference.
    """
    transmitting = list(transmitting)
    if target_gd not in transmitting:
        raise ValueError(f"target device {target_gd} is not transmitting")
    by_id = {gd.id: gd for gd in gds}
    powers = [received_power_w(by_id[i], uav, ch) for i in transmitting]
    return sinr_from_powers(powers, transmitting.index(target_gd), ch.noise_power_w)


def uplink_rate(sinr_value: float, ch: ChannelParams) -> float:
    """Shannon uplink rate in bits/s."""
    if sinr_value < 0:
        raise ValueError("sinr must be non-negative")
    return ch.bandwidth_hz * math.log2(1.0 + sinr_value)


def g2a_delay(task: ComputeTask, rate: float) -> float:
    """Upload delay of a task at the given rate."""
    if rate <= 0:
        raise ValueError("uplink rate must be positive")
    return task.data_bits / rate


def compute_delay(task: ComputeTask, cp: ComputeParams) -> float:
    """Onboard processing time of a task."""
    return task.data_bits * task.cycles_per_bit / cp.cpu_hz


def compute_energy(task: ComputeTask, cp: ComputeParams) -> float:
    """CPU energy for processing a task: kappa * O * mu * f^2."""
    return cp.kappa * task.data_bits * task.cycles_per_bit * cp.cpu_hz ** 2


def receive_energy(task: ComputeTask, rate: float, cp: ComputeParams) -> float:
    """Radio energy spent receiving a task upload."""
    if rate <= 0:
        raise ValueError("uplink rate must be positive")
    return cp.rx_power_w * task.data_bits / rate


def move_uav(pose: Position3, theta: float, dist: float, limits: UavLimits) -> Position3:
    """Displace the UAV horizontally; altitude is preserved.

    The returned pose may lie outside the mission rectangle; the caller is
    responsible for boundary handling (see ``in_area``).
    """
    if not 0.0 <= theta <= 2.0 * math.pi:
        raise ValueError("theta must lie in [0, 2*pi]")
    if not 0.0 <= dist <= limits.d_max * (1.0 + 1e-12):
        raise ValueError("dist must lie in [0, d_max]")
    return Position3(pose.x + dist * math.cos(theta), pose.y + dist * math.sin(theta), pose.z)


def in_area(pose: Position3, limits: UavLimits) -> bool:
    """True when the pose projects inside the mission rectangle."""
    x_max, y_max = limits.area
    return 0.0 <= pose.x <= x_max and 0.0 <= pose.y <= y_max


def clamp_to_area(pose: Position3, limits: UavLimits) -> Position3:
    x_max, y_max = limits.area
    return Position3(min(max(pose.x, 0.0), x_max), min(max(pose.y, 0.0), y_max), pose.z)


def propulsion_power(v: float, pp: PropulsionParams) -> float:
    """Rotary-wing propulsion power at horizontal speed v.

    Blade-profile, induced, and parasite terms; at v=0 the induced radical
    equals one, so the hover power is exactly p1_w + p2_w.
    """
    if v < 0:
        raise ValueError("speed must be non-negative")
    blade = pp.p1_w * (1.0 + 3.0 * v ** 2 / pp.v_tip ** 2)
    induced = pp.p2_w * math.sqrt(
        math.sqrt(1.0 + v ** 4 / (4.0 * pp.v_induced ** 4)) - v ** 2 / (2.0 * pp.v_induced ** 2)
    )
    parasite = 0.5 * pp.d0 * pp.rho * pp.solidity * pp.disc_area * v ** 3
    return blade + induced + parasite


def flight_energy_step(v: float, pp: PropulsionParams, tau: float) -> float:
    """Flight energy for one slot at constant speed v."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    return propulsion_power(v, pp) * tau
