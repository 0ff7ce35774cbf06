r"""Colored (power-law) noise sampled in the frequency domain.

A trajectory of ``T`` steps is represented by ``N = T // 2 + 1`` complex
frequency coefficients ``Z[n]``. Real and imaginary parts are independent
Gaussians with variance

.. math::

    \max(n / N, f_{min})^{-\gamma} \, \sigma^2 / \zeta,
    \qquad
    \zeta = T^{-2} N^{\gamma} \Big(1 + 4 \sum_{n=1}^{N-1} n^{-\gamma}\Big),

and the time signal is the inverse DFT of the Hermitian-symmetric extension
of ``Z``. The normalization ``zeta`` makes the time-domain variance equal to
``sigma**2`` (exactly for odd ``T``; the Nyquist bin of even ``T`` carries
only a real part, so there the variance is slightly below target).

``gamma = 0`` gives (nearly) white noise; larger ``gamma`` moves power to low
frequencies and yields smoother trajectories.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._rng import block_normals

# stream tag reserved for colored noise, keeps it independent of other samplers
COLORED_STREAM = 1


def num_frequencies(horizon: int) -> int:
    return horizon // 2 + 1


def zeta(horizon: int, gamma: float) -> float:
    """Normalization constant making the time-domain variance equal ``sigma**2``."""
    if horizon < 2:
        raise ValueError(f"horizon must be >= 2, got {horizon}")
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    n_freq = num_frequencies(horizon)
    n = np.arange(1, n_freq, dtype=float)
    tail = np.sum(n ** (-gamma)) if n.size else 0.0
    return float(horizon ** -2.0 * n_freq**gamma * (1.0 + 4.0 * tail))


@dataclass(frozen=True)
class ColoredSpec:
    """Parameters of colored noise for one control dimension.

    :param horizon: trajectory length ``T`` in steps (``>= 2``).
    :param gamma: power-law exponent (``0`` is white).
    :param sigma: target time-domain standard deviation.
    :param f_min: cutoff applied to the normalized frequency ``n / N``;
        ``None`` means ``1 / N``.
    """

    horizon: int
    gamma: float = 0.0
    sigma: float = 1.0
    f_min: float | None = None

    def __post_init__(self) -> None:
        if int(self.horizon) != self.horizon or self.horizon < 2:
            raise ValueError(f"horizon must be an integer >= 2, got {self.horizon}")
        if not np.isfinite(self.gamma) or self.gamma < 0:
            raise ValueError(f"gamma must be finite and >= 0, got {self.gamma}")
        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise ValueError(f"sigma must be finite and >= 0, got {self.sigma}")
        if self.f_min is not None and not self.f_min > 0:
            raise ValueError(f"f_min must be > 0, got {self.f_min}")

    @property
    def n_freq(self) -> int:
        return num_frequencies(self.horizon)

    @property
    def cutoff(self) -> float:
        return 1.0 / self.n_freq if self.f_min is None else float(self.f_min)

    def frequency_variance(self) -> np.ndarray:
        """Variance of each real and imaginary coefficient part, length ``N``."""
        freq = np.maximum(np.arange(self.n_freq) / self.n_freq, self.cutoff)
        return freq ** (-self.gamma) * self.sigma**2 / zeta(self.horizon, self.gamma)


def _enforce_hermitian(coeffs: np.ndarray, horizon: int) -> np.ndarray:
    coeffs[..., 0] = coeffs[..., 0].real
    if horizon % 2 == 0:
        coeffs[..., -1] = coeffs[..., -1].real
    return coeffs


def sample_frequency(
    spec: ColoredSpec,
    rng: np.random.Generator,
    mean: np.ndarray | None = None,
) -> np.ndarray:
    """Draw one frequency-domain sample (length-``N`` complex array).

    ``mean`` holds the complex per-frequency means; zero if omitted. The DC
    coefficient, and the Nyquist coefficient for even horizons, are made
    purely real after sampling.
    """
    n_freq = spec.n_freq
    if mean is None:
        mean = np.zeros(n_freq, dtype=complex)
    mean = np.asarray(mean, dtype=complex)
    if mean.shape != (n_freq,):
        raise ValueError(f"mean must have shape ({n_freq},), got {mean.shape}")
    std = np.sqrt(spec.frequency_variance())
    parts = rng.standard_normal((2, n_freq))
    coeffs = (mean.real + std * parts[0]) + 1j * (mean.imag + std * parts[1])
    return _enforce_hermitian(coeffs, spec.horizon)


def hermitian_extension(coeffs: np.ndarray, horizon: int) -> np.ndarray:
    """Full length-``T`` spectrum ``Z'`` from the ``N`` stored coefficients."""
    coeffs = np.asarray(coeffs, dtype=complex)
    n_freq = num_frequencies(horizon)
    if coeffs.shape[-1] != n_freq:
        raise ValueError(
            f"expected {n_freq} coefficients for horizon {horizon}, "
            f"got {coeffs.shape[-1]}"
        )
    full = np.empty((*coeffs.shape[:-1], horizon), dtype=complex)
    full[..., :n_freq] = coeffs
    mirror = np.arange(n_freq, horizon)
    full[..., mirror] = np.conj(coeffs[..., horizon - mirror])
    return full


def inverse_transform(coeffs: np.ndarray, horizon: int) -> np.ndarray:
    """Real time signal of length ``T`` from Hermitian-packed coefficients.

    Works on the last axis, so batches of samples are accepted. Raises if the
    coefficients do not describe a real signal (imaginary residual >= 1e-9).
    """
    signal = np.fft.ifft(hermitian_extension(coeffs, horizon), axis=-1)
    residual = np.max(np.abs(signal.imag), initial=0.0)
    if residual >= 1e-9:
        raise ValueError(
            f"coefficients are not Hermitian-consistent (imaginary residual {residual:.3g})"
        )
    return signal.real.copy()


def _matrix_layout(horizon: int) -> list[tuple[int, str]]:
    n_freq = num_frequencies(horizon)
    layout = [(0, "real")]
    for n in range(1, n_freq):
        layout.append((n, "real"))
        if not (horizon % 2 == 0 and n == n_freq - 1):
            layout.append((n, "imag"))
    return layout


def build_ifft_matrix(horizon: int) -> np.ndarray:
    """Dense ``T x T`` real matrix mapping stacked coefficients to the signal.

    Column order is ``[Re Z[0], Re Z[1], Im Z[1], ..., Re Z[N-1], (Im Z[N-1])]``,
    the last imaginary column present only for odd ``T``. Meant as a
    verification oracle for :func:`inverse_transform`, not for speed.
    """
    if horizon < 2:
        raise ValueError(f"horizon must be >= 2, got {horizon}")
    n_freq = num_frequencies(horizon)
    t = np.arange(horizon)
    columns = []
    for n, part in _matrix_layout(horizon):
        single = n == 0 or (horizon % 2 == 0 and n == n_freq - 1)
        weight = 1.0 if single else 2.0
        angle = 2.0 * np.pi * n * t / horizon
        if part == "real":
            columns.append(weight * np.cos(angle))
        else:
            columns.append(-weight * np.sin(angle))
    return np.column_stack(columns) / horizon


def stack_coefficients(coeffs: np.ndarray, horizon: int) -> np.ndarray:
    """Stack complex coefficients into the real vector used by :func:`build_ifft_matrix`."""
    coeffs = np.asarray(coeffs, dtype=complex)
    return np.array(
        [coeffs[n].real if part == "real" else coeffs[n].imag
         for n, part in _matrix_layout(horizon)]
    )


@dataclass(frozen=True)
class NoiseBatch:
    """Time-domain noise trajectories, shape ``(M, T, n_u)``, plus the seed that produced them."""

    values: np.ndarray
    seed: int

    @property
    def num_samples(self) -> int:
        return self.values.shape[0]

    @property
    def horizon(self) -> int:
        return self.values.shape[1]


def sample_noise_batch(
    specs: ColoredSpec | Sequence[ColoredSpec],
    num_samples: int,
    seed: int,
    threads: int = 1,
) -> NoiseBatch:
    """Draw ``num_samples`` zero-mean colored trajectories, one spec per control dimension.

    Deterministic in ``(specs, num_samples, seed)`` and independent of ``threads``.
    """
    if isinstance(specs, ColoredSpec):
        specs = [specs]
    if not specs:
        raise ValueError("at least one ColoredSpec is required")
    if num_samples < 1:
        raise ValueError(f"num_samples must be >= 1, got {num_samples}")
    horizon = specs[0].horizon
    if any(s.horizon != horizon for s in specs):
        raise ValueError("all specs must share the same horizon")

    n_freq = num_frequencies(horizon)
    values = np.empty((num_samples, horizon, len(specs)))
    for dim, spec in enumerate(specs):
        normals = block_normals(
            seed, num_samples, (2, n_freq), key=(COLORED_STREAM, dim), threads=threads
        )
        std = np.sqrt(spec.frequency_variance())
        coeffs = std * (normals[:, 0] + 1j * normals[:, 1])
        _enforce_hermitian(coeffs, horizon)
        values[:, :, dim] = np.fft.irfft(coeffs, n=horizon, axis=-1)
    return NoiseBatch(values=values, seed=int(seed))
