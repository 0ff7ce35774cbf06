"""Benchmark dynamics and costs.

All step and cost functions are vectorized over leading axes: a state of shape
``(..., n_x)`` and controls of shape ``(..., n_u)`` give a next state of shape
``(..., n_x)``. Integration is explicit Euler throughout.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import partial
from typing import Callable

import numpy as np

StepFn = Callable[[np.ndarray, np.ndarray, float], np.ndarray]
CostFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class System:
    """Dynamics, costs and metadata consumed by the controller."""

    name: str
    state_labels: tuple[str, ...]
    control_labels: tuple[str, ...]
    step: StepFn
    running_cost: CostFn
    terminal_cost: CostFn | None = None
    control_bounds: tuple[np.ndarray, np.ndarray] | None = None
    default_x0: tuple[float, ...] | None = None

    @property
    def state_dim(self) -> int:
        return len(self.state_labels)

    @property
    def control_dim(self) -> int:
        return len(self.control_labels)

    def clamp(self, controls: np.ndarray) -> np.ndarray:
        if self.control_bounds is None:
            return controls
        low, high = self.control_bounds
        return np.clip(controls, low, high)


# -- double integrator ---------------------------------------------------------

def double_integrator_step(state: np.ndarray, u: np.ndarray, dt: float) -> np.ndarray:
    """One Euler step of ``pos' = vel``, ``vel' = u``."""
    state = np.asarray(state, dtype=float)
    u = np.asarray(u, dtype=float)
    if u.ndim == state.ndim:
        u = u[..., 0]
    out = np.empty_like(state)
    out[..., 0] = state[..., 0] + state[..., 1] * dt
    out[..., 1] = state[..., 1] + u * dt
    return out


def double_integrator_cost(state: np.ndarray) -> np.ndarray:
    """Quadratic state cost ``5 (pos + 4)^2 + 0.5 vel^2``, zero only at ``(-4, 0)``."""
    state = np.asarray(state, dtype=float)
    return 5.0 * (state[..., 0] + 4.0) ** 2 + 0.5 * state[..., 1] ** 2


def double_integrator() -> System:
    return System(
        name="double_integrator",
        state_labels=("position", "velocity"),
        control_labels=("accel",),
        step=double_integrator_step,
        running_cost=double_integrator_cost,
        terminal_cost=None,
        default_x0=(-9.0, 0.0),
    )


# -- lagged kinematic vehicle ----------------------------------------------------

@dataclass(frozen=True)
class VehicleParams:
    """Lagged kinematic bicycle; the steering lag makes a full lock-to-lock swing take about 2 s."""

    tau_steer: float = 1.0
    tau_throttle: float = 0.4
    wheelbase: float = 3.0
    max_steer: float = 0.35
    accel_gain: float = 4.0
    # lane-change task used by the closed-loop cost
    lane_offset: float = 3.0
    target_speed: float = 5.0


def wrap_angle(angle: np.ndarray) -> np.ndarray:
    """Wrap to ``(-pi, pi]``."""
    return np.pi - np.mod(np.pi - angle, 2.0 * np.pi)


def lagged_vehicle_step(
    state: np.ndarray,
    controls: np.ndarray,
    dt: float,
    params: VehicleParams = VehicleParams(),
) -> np.ndarray:
    """Advance ``[px, py, heading, speed, steer, throttle]`` by one step.

    Commands are clamped to ``[-1, 1]``; the actuators follow them with
    first-order lags, then speed, heading and position are integrated in that
    order, each using the freshly updated quantities.
    """
    if dt > min(params.tau_steer, params.tau_throttle):
        raise ValueError("dt must not exceed the actuator time constants")
    state = np.asarray(state, dtype=float)
    cmd = np.clip(np.asarray(controls, dtype=float), -1.0, 1.0)
    px, py, heading, speed, steer, throttle = np.moveaxis(state, -1, 0)

    steer = steer + (cmd[..., 0] - steer) * (dt / params.tau_steer)
    throttle = throttle + (cmd[..., 1] - throttle) * (dt / params.tau_throttle)
    yaw_rate = speed / params.wheelbase * np.tan(params.max_steer * steer)
    speed = speed + params.accel_gain * throttle * dt
    heading = wrap_angle(heading + yaw_rate * dt)
    px = px + speed * np.cos(heading) * dt
    py = py + speed * np.sin(heading) * dt
    return np.stack([px, py, heading, speed, steer, throttle], axis=-1)


def lagged_vehicle_cost(state: np.ndarray, params: VehicleParams = VehicleParams()) -> np.ndarray:
    state = np.asarray(state, dtype=float)
    lateral = state[..., 1] - params.lane_offset
    return lateral**2 + 0.5 * (state[..., 3] - params.target_speed) ** 2 + state[..., 2] ** 2


def lagged_vehicle(params: VehicleParams | None = None) -> System:
    params = params or VehicleParams()
    return System(
        name="lagged_vehicle",
        state_labels=("px", "py", "heading", "speed", "steer", "throttle"),
        control_labels=("steer_cmd", "throttle_cmd"),
        step=partial(lagged_vehicle_step, params=params),
        running_cost=partial(lagged_vehicle_cost, params=params),
        terminal_cost=None,
        control_bounds=(np.array([-1.0, -1.0]), np.array([1.0, 1.0])),
        default_x0=(0.0, 0.0, 0.0, params.target_speed, 0.0, 0.0),
    )


SYSTEMS = {
    "double_integrator": double_integrator,
    "lagged_vehicle": lagged_vehicle,
}


def make_system(name: str) -> System:
    try:
        return SYSTEMS[name]()
    except KeyError:
        raise ValueError(f"unknown system {name!r}; expected one of {sorted(SYSTEMS)}") from None
