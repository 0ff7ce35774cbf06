"""Sampling distributions for MPPI control perturbations.

Every sampler returns a :class:`~colored_mppi.noise.NoiseBatch` already scaled
by its standard deviation, so the controller forms ``v = u + z`` directly.

Kinds
-----
``gaussian``
    i.i.d. ``N(0, sigma**2)`` per sample, step and dimension.
``colored``
    Frequency-domain power-law noise (see :mod:`colored_mppi.noise`).
``nln``
    Normal times log-normal: ``n * exp(l)`` with ``n ~ N(0, nu**2)``,
    ``l ~ N(0, s**2)``. ``nu = sigma * exp(-s**2)`` keeps the variance at
    ``sigma**2``; the tails are much heavier than Gaussian. This is a
    behavioral stand-in for the log-MPPI baseline, not a faithful port.
``smooth``
    Gaussian noise in a derivative action space. Each draw emits
    ``carry + dt * eps``; after the update the carry becomes the weighted
    mean perturbation, so increments integrate over solver iterations rather
    than over time.
``smooth_star``
    ``smooth`` with the derivative deviation ``sigma / dt``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from ._rng import block_normals
from .noise import ColoredSpec, NoiseBatch, sample_noise_batch

KINDS = ("gaussian", "colored", "nln", "smooth", "smooth_star")
SMOOTH_KINDS = ("smooth", "smooth_star")

_STREAMS = {"gaussian": 0, "nln": 2, "smooth": 3, "smooth_star": 3}


def _floats(values) -> tuple[float, ...] | None:
    if values is None:
        return None
    if np.isscalar(values):
        return (float(values),)
    return tuple(float(v) for v in values)


@dataclass(frozen=True)
class SamplerConfig:
    """Which distribution to sample from and its per-dimension parameters.

    ``gamma`` and ``f_min`` only apply to ``colored``; ``dt`` only to the
    smooth kinds; ``nln_scale`` (the log-normal factor's ``s``, default 1) only
    to ``nln``. ``label`` is a display name for reports.
    """

    kind: str
    sigma: tuple[float, ...]
    gamma: tuple[float, ...] | None = None
    f_min: float | None = None
    nln_scale: tuple[float, ...] | None = None
    dt: float | None = None
    label: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "sigma", _floats(self.sigma))
        object.__setattr__(self, "gamma", _floats(self.gamma))
        object.__setattr__(self, "nln_scale", _floats(self.nln_scale))

        if self.kind not in KINDS:
            raise ValueError(f"unknown sampler kind {self.kind!r}; expected one of {KINDS}")
        if not self.sigma:
            raise ValueError("sigma needs at least one control dimension")
        if any(not np.isfinite(s) or s < 0 for s in self.sigma):
            raise ValueError(f"sigma must be finite and >= 0, got {self.sigma}")

        colored = self.kind == "colored"
        if colored != (self.gamma is not None):
            raise ValueError("gamma must be given exactly when kind is 'colored'")
        if self.f_min is not None and not colored:
            raise ValueError("f_min only applies to the colored sampler")
        if colored:
            self._check_dims("gamma", self.gamma)
            if any(g < 0 for g in self.gamma):
                raise ValueError(f"gamma must be >= 0, got {self.gamma}")

        smooth = self.kind in SMOOTH_KINDS
        if smooth != (self.dt is not None):
            raise ValueError("dt must be given exactly when kind is smooth or smooth_star")
        if smooth and not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")

        if self.nln_scale is not None:
            if self.kind != "nln":
                raise ValueError("nln_scale only applies to the nln sampler")
            self._check_dims("nln_scale", self.nln_scale)
            if any(s < 0 for s in self.nln_scale):
                raise ValueError(f"nln_scale must be >= 0, got {self.nln_scale}")

    def _check_dims(self, name: str, values: tuple[float, ...]) -> None:
        if len(values) != len(self.sigma):
            raise ValueError(
                f"{name} has {len(values)} entries but sigma has {len(self.sigma)}"
            )

    @property
    def control_dim(self) -> int:
        return len(self.sigma)

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        if self.kind == "colored":
            return "colored(" + ",".join(f"{g:g}" for g in self.gamma) + ")"
        return self.kind

    def effective_sigma(self) -> np.ndarray:
        """Deviation of the underlying Gaussian draw (derivative space for smooth kinds)."""
        sigma = np.asarray(self.sigma)
        if self.kind == "smooth_star":
            return sigma / self.dt
        return sigma

    def with_sigma(self, sigma: float | Sequence[float]) -> "SamplerConfig":
        values = _floats(sigma)
        if len(values) == 1:
            values = values * self.control_dim
        return replace(self, sigma=values)

    def with_gamma(self, gamma: float | Sequence[float]) -> "SamplerConfig":
        if self.kind != "colored":
            return self
        values = _floats(gamma)
        if len(values) == 1:
            values = values * self.control_dim
        return replace(self, gamma=values)


@dataclass
class SamplerState:
    """Carry trajectory ``(T, n_u)`` kept across solver iterations by the smooth kinds."""

    carry: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def shift(self) -> None:
        """Advance one step in time: drop the first entry, repeat the last."""
        if self.carry.shape[0] > 1:
            self.carry[:-1] = self.carry[1:].copy()

    def reset(self) -> None:
        self.carry[:] = 0.0


def new_state(config: SamplerConfig, horizon: int) -> SamplerState | None:
    """Fresh (zero) state for smooth kinds, ``None`` for the stateless ones."""
    if config.kind not in SMOOTH_KINDS:
        return None
    return SamplerState(carry=np.zeros((horizon, config.control_dim)))


def draw(
    config: SamplerConfig,
    state: SamplerState | None,
    num_samples: int,
    horizon: int,
    seed: int,
    threads: int = 1,
) -> NoiseBatch:
    """Draw a ``(num_samples, horizon, n_u)`` perturbation batch."""
    if horizon < 2:
        raise ValueError(f"horizon must be >= 2, got {horizon}")
    if num_samples < 1:
        raise ValueError(f"num_samples must be >= 1, got {num_samples}")
    n_u = config.control_dim
    sigma = np.asarray(config.sigma)

    if config.kind == "colored":
        specs = [
            ColoredSpec(horizon, gamma=g, sigma=s, f_min=config.f_min)
            for g, s in zip(config.gamma, config.sigma)
        ]
        return sample_noise_batch(specs, num_samples, seed, threads=threads)

    key = (_STREAMS[config.kind],)
    if config.kind == "gaussian":
        values = block_normals(seed, num_samples, (horizon, n_u), key, threads)
        values *= sigma
    elif config.kind == "nln":
        scale = np.asarray(config.nln_scale) if config.nln_scale else np.ones(n_u)
        normals = block_normals(seed, num_samples, (2, horizon, n_u), key, threads)
        nu = sigma * np.exp(-(scale**2))
        values = nu * normals[:, 0] * np.exp(scale * normals[:, 1])
    else:
        if state is None or state.carry.shape != (horizon, n_u):
            raise ValueError(
                f"{config.kind} sampler needs a SamplerState with carry shape ({horizon}, {n_u})"
            )
        values = block_normals(seed, num_samples, (horizon, n_u), key, threads)
        values *= config.effective_sigma() * config.dt
        values += state.carry
    return NoiseBatch(values=values, seed=int(seed))


def update_state(
    config: SamplerConfig, state: SamplerState | None, weighted_noise: np.ndarray
) -> None:
    """Fold the weighted mean perturbation into the carry (smooth kinds only)."""
    if state is None or config.kind not in SMOOTH_KINDS:
        return
    state.carry[:] = weighted_noise
