r"""Model Predictive Path Integral control with pluggable samplers.

One solver iteration:

1. draw a perturbation batch ``z`` of shape ``(M, T, n_u)``;
2. roll out ``v = clamp(u + z^m)`` for every sample and accumulate
   ``J^m = sum_t q(x_{t+1}) + phi(x_T)``;
3. weight samples by ``w_m = exp(-(J^m - rho) / lambda) / eta`` with
   ``rho = min J``;
4. update ``u <- clamp(u + alpha * sum_m w_m z^m)``.

The update is applied in the time domain, which for colored noise is the
inverse transform of the frequency-domain mean step.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._rng import derive_seed
from .noise import NoiseBatch
from .samplers import SamplerConfig, SamplerState, draw, new_state, update_state
from .systems import System


@dataclass(frozen=True)
class MppiConfig:
    """Solver hyperparameters.

    ``alpha_decay`` enables the schedule ``alpha_k = alpha / (1 + alpha_decay * k)``
    over solver iterations ``k``; ``None`` keeps ``alpha`` fixed.
    """

    num_samples: int = 4096
    num_iterations: int = 1
    horizon: int = 65
    dt: float = 0.015
    lambda_: float = 1.0
    alpha: float = 1.0
    sampler: SamplerConfig = field(default_factory=lambda: SamplerConfig("gaussian", (1.0,)))
    alpha_decay: float | None = None

    def __post_init__(self) -> None:
        if self.num_samples < 1:
            raise ValueError(f"num_samples must be >= 1, got {self.num_samples}")
        if self.num_iterations < 1:
            raise ValueError(f"num_iterations must be >= 1, got {self.num_iterations}")
        if self.horizon < 2:
            raise ValueError(f"horizon must be >= 2, got {self.horizon}")
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if not self.lambda_ > 0:
            raise ValueError(f"lambda must be > 0, got {self.lambda_}")
        if not 0 <= self.alpha <= 1:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.alpha_decay is not None and self.alpha_decay < 0:
            raise ValueError(f"alpha_decay must be >= 0, got {self.alpha_decay}")

    def step_size(self, iteration: int) -> float:
        if self.alpha_decay is None:
            return self.alpha
        return self.alpha / (1.0 + self.alpha_decay * iteration)


@dataclass(frozen=True)
class RolloutCosts:
    costs: np.ndarray
    rho: float
    eta: float
    weights: np.ndarray


def rollout(
    system: System,
    x0: np.ndarray,
    nominal: np.ndarray,
    noise: NoiseBatch | np.ndarray,
    dt: float,
    disturbance: Callable[[np.ndarray, int], np.ndarray] | None = None,
) -> np.ndarray:
    """Cost of every perturbed trajectory, shape ``(M,)``.

    Samples whose state or cost goes non-finite get ``+inf``. ``disturbance``,
    if given, maps ``(states, t)`` to an additive state perturbation; the
    default plant is undisturbed.
    """
    values = noise.values if isinstance(noise, NoiseBatch) else np.asarray(noise)
    nominal = np.asarray(nominal, dtype=float)
    num_samples, horizon, _ = values.shape
    if nominal.shape != values.shape[1:]:
        raise ValueError(f"nominal shape {nominal.shape} does not match noise {values.shape}")

    controls = system.clamp(nominal + values)
    # time-major so each step reads a contiguous slab
    controls = np.ascontiguousarray(controls.transpose(1, 0, 2))
    x = np.broadcast_to(np.asarray(x0, dtype=float), (num_samples, system.state_dim)).copy()
    costs = np.zeros(num_samples)
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(horizon):
            x = system.step(x, controls[t], dt)
            if disturbance is not None:
                x = x + disturbance(x, t)
            costs += system.running_cost(x)
        if system.terminal_cost is not None:
            costs += system.terminal_cost(x)
        bad = ~np.isfinite(costs) | ~np.all(np.isfinite(x), axis=-1)
    costs[bad] = np.inf
    if np.all(bad):
        raise FloatingPointError("every rollout produced a non-finite cost")
    return costs


def compute_weights(costs: np.ndarray, lambda_: float) -> RolloutCosts:
    """Exponential weights with minimum-cost baseline subtraction."""
    costs = np.asarray(costs, dtype=float)
    if not lambda_ > 0:
        raise ValueError(f"lambda must be > 0, got {lambda_}")
    finite = np.isfinite(costs)
    if not finite.any():
        raise FloatingPointError("all rollout costs are non-finite")
    rho = float(costs[finite].min())
    shifted = np.where(finite, costs - rho, np.inf)
    unnormalized = np.exp(-shifted / lambda_)
    eta = float(unnormalized.sum())
    return RolloutCosts(costs=costs, rho=rho, eta=eta, weights=unnormalized / eta)


def update_mean(
    nominal: np.ndarray,
    weights: np.ndarray,
    noise: NoiseBatch | np.ndarray,
    alpha: float,
    system: System | None = None,
) -> np.ndarray:
    """``u + alpha * sum_m w_m z^m``, clamped to the system's control bounds if any."""
    values = noise.values if isinstance(noise, NoiseBatch) else np.asarray(noise)
    updated = np.asarray(nominal, dtype=float) + alpha * np.tensordot(weights, values, axes=1)
    return system.clamp(updated) if system is not None else updated


def mppi_step(
    config: MppiConfig,
    system: System,
    x0: np.ndarray,
    nominal: np.ndarray,
    seed: int,
    state: SamplerState | None = None,
    threads: int = 1,
) -> np.ndarray:
    """Run ``config.num_iterations`` MPPI iterations and return the optimized sequence.

    ``state`` is the sampler carry for the smooth kinds; a fresh one is made
    when omitted. Iteration ``i`` draws with ``derive_seed(seed, i)``.
    """
    nominal = np.array(nominal, dtype=float)
    if nominal.shape != (config.horizon, system.control_dim):
        raise ValueError(
            f"nominal must have shape ({config.horizon}, {system.control_dim}), got {nominal.shape}"
        )
    if config.sampler.control_dim != system.control_dim:
        raise ValueError("sampler and system disagree on the control dimension")
    if state is None:
        state = new_state(config.sampler, config.horizon)

    for i in range(config.num_iterations):
        batch = draw(
            config.sampler, state, config.num_samples, config.horizon,
            derive_seed(seed, i), threads=threads,
        )
        costs = rollout(system, x0, nominal, batch, config.dt)
        weights = compute_weights(costs, config.lambda_).weights
        weighted = np.tensordot(weights, batch.values, axes=1)
        nominal = system.clamp(nominal + config.step_size(i) * weighted)
        update_state(config.sampler, state, weighted)
    return nominal


def shift_sequence(sequence: np.ndarray) -> np.ndarray:
    """Warm start: drop the first entry and repeat the last."""
    return np.concatenate([sequence[1:], sequence[-1:]], axis=0)


@dataclass
class RunLog:
    """Closed-loop trajectory. Row ``k`` holds control ``u_k`` applied at
    ``k * dt`` and the state reached afterwards, stamped ``(k + 1) * dt``."""

    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    step_costs: np.ndarray
    solve_seconds: np.ndarray
    x0: np.ndarray
    dt: float

    def __len__(self) -> int:
        return len(self.times)

    @property
    def accumulated_cost(self) -> float:
        return float(np.sum(self.step_costs))


def num_steps(duration: float, dt: float) -> int:
    steps = int(round(duration / dt))
    if steps < 1 or not np.isclose(steps * dt, duration, rtol=1e-9, atol=1e-12):
        raise ValueError(f"duration {duration} is not a positive multiple of dt {dt}")
    return steps


def receding_horizon_run(
    config: MppiConfig,
    system: System,
    x0: np.ndarray,
    duration: float,
    seed: int,
    nominal: np.ndarray | None = None,
    threads: int = 1,
) -> RunLog:
    """Closed-loop MPC: optimize, apply the first control, shift, repeat.

    Plant step ``k`` solves with ``derive_seed(seed, k)``, so a run is fully
    determined by ``(config, system, x0, duration, seed)``. The smooth samplers'
    carry integrates over the iterations of one solve and is cleared before
    the next; the warm-started nominal already holds what it accumulated.
    """
    steps = num_steps(duration, config.dt)
    x = np.array(x0, dtype=float)
    if nominal is None:
        nominal = np.zeros((config.horizon, system.control_dim))
    state = new_state(config.sampler, config.horizon)

    states = np.empty((steps, system.state_dim))
    controls = np.empty((steps, system.control_dim))
    step_costs = np.empty(steps)
    solve_seconds = np.empty(steps)
    for k in range(steps):
        if state is not None:
            state.reset()
        start = time.perf_counter()
        nominal = mppi_step(config, system, x, nominal, derive_seed(seed, k), state, threads)
        solve_seconds[k] = time.perf_counter() - start
        u = nominal[0].copy()
        x = system.step(x, u, config.dt)
        states[k] = x
        controls[k] = u
        step_costs[k] = system.running_cost(x)
        nominal = shift_sequence(nominal)

    return RunLog(
        times=config.dt * np.arange(1, steps + 1),
        states=states,
        controls=controls,
        step_costs=step_costs,
        solve_seconds=solve_seconds,
        x0=np.array(x0, dtype=float),
        dt=config.dt,
    )
