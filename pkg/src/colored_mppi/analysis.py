"""Post-hoc metrics: periodograms, PSD slope fits, cost ensembles, exploration variance."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .controller import RunLog


@dataclass(frozen=True)
class Periodogram:
    """One-sided, unwindowed periodogram.

    ``power`` has the frequency bins on its last axis; any leading axes index
    ensemble members.
    """

    frequencies: np.ndarray
    power: np.ndarray
    segment_seconds: float
    segment_length: int

    def mean_power(self) -> np.ndarray:
        return self.power.reshape(-1, self.power.shape[-1]).mean(axis=0)


def periodogram(signal: np.ndarray, dt: float) -> Periodogram:
    """``|DFT(x)[n]|^2 / K`` at frequencies ``n / (K dt)``, ``n = 0 .. K // 2``.

    ``signal`` may be batched with time on the last axis.
    """
    signal = np.asarray(signal, dtype=float)
    k = signal.shape[-1]
    if k < 4:
        raise ValueError(f"need at least 4 samples for a periodogram, got {k}")
    spectrum = np.fft.rfft(signal, axis=-1)
    power = (spectrum.real**2 + spectrum.imag**2) / k
    return Periodogram(
        frequencies=np.fft.rfftfreq(k, d=dt),
        power=power,
        segment_seconds=k * dt,
        segment_length=k,
    )


def stack_periodograms(periodograms: Sequence[Periodogram]) -> Periodogram:
    first = periodograms[0]
    for p in periodograms[1:]:
        if not np.array_equal(p.frequencies, first.frequencies):
            raise ValueError("periodograms must share a frequency grid")
    return Periodogram(
        frequencies=first.frequencies,
        power=np.stack([p.power for p in periodograms]),
        segment_seconds=first.segment_seconds,
        segment_length=first.segment_length,
    )


def folded_power(pgram: Periodogram) -> np.ndarray:
    """Per-member sum of the two-sided spectrum (interior bins counted twice).

    By Parseval this equals ``sum(x**2)`` of the original signal.
    """
    weights = np.full(pgram.power.shape[-1], 2.0)
    weights[0] = 1.0
    if pgram.segment_length % 2 == 0:
        weights[-1] = 1.0
    return np.sum(pgram.power * weights, axis=-1)


def fit_psd_exponent(
    periodograms: Periodogram | Sequence[Periodogram],
    band: tuple[float, float],
    min_members: int = 100,
) -> float:
    """Estimate ``gamma`` in ``PSD ~ f^-gamma`` from an ensemble.

    Fits a least-squares line to ``log(mean power)`` against ``log(f)`` over
    the closed frequency ``band`` and returns minus the slope.
    """
    pgram = periodograms if isinstance(periodograms, Periodogram) else stack_periodograms(periodograms)
    members = int(np.prod(pgram.power.shape[:-1]))
    if members < min_members:
        raise ValueError(f"need at least {min_members} periodograms, got {members}")
    low, high = band
    if low <= 0:
        raise ValueError("band must exclude the DC bin (low > 0)")
    mask = (pgram.frequencies >= low) & (pgram.frequencies <= high)
    if mask.sum() < 2:
        raise ValueError(f"band {band} contains fewer than two frequency bins")
    mean = pgram.mean_power()[mask]
    slope, _ = np.polyfit(np.log(pgram.frequencies[mask]), np.log(mean), 1)
    return float(-slope)


def band_power(pgram: Periodogram, low: float, high: float = np.inf) -> np.ndarray:
    """Mean power over bins with ``low < f <= high``, per ensemble member."""
    mask = (pgram.frequencies > low) & (pgram.frequencies <= high)
    if not mask.any():
        raise ValueError(f"no bins in ({low}, {high}]")
    return pgram.power[..., mask].mean(axis=-1)


@dataclass(frozen=True)
class EnsembleStats:
    mean: float
    std: float
    count: int
    values: tuple[float, ...]


def ensemble_stats(values: Sequence[float]) -> EnsembleStats:
    """Mean and sample standard deviation (``ddof=1``; ``0`` for a single value)."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValueError("no values")
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return EnsembleStats(mean=float(arr.mean()), std=std, count=int(arr.size),
                         values=tuple(float(v) for v in arr))


def accumulated_cost(log: RunLog, cost: Callable[[np.ndarray], np.ndarray] | None = None) -> float:
    """Sum of the running state cost over the plant steps of a run.

    Uses the logged step costs, or re-evaluates ``cost`` on the logged states.
    """
    if len(log) == 0:
        raise ValueError("empty run log")
    if cost is None:
        return float(np.sum(log.step_costs))
    return float(np.sum(cost(log.states)))


def control_window(log: RunLog, seconds: float = 2.0) -> np.ndarray:
    """Controls applied during the first ``seconds`` of a run, shape ``(K, n_u)``."""
    count = int(round(seconds / log.dt))
    if count > len(log):
        raise ValueError(f"run lasts {len(log) * log.dt:g} s, shorter than the {seconds:g} s window")
    return log.controls[:count]


def exploration_variance(rollouts: np.ndarray, coordinate: int | None = None) -> np.ndarray:
    """Unbiased variance across rollouts at each time step.

    ``rollouts`` is ``(R, T)`` or ``(R, T, n_x)``; for the latter pick a
    state ``coordinate``.
    """
    rollouts = np.asarray(rollouts, dtype=float)
    if rollouts.ndim == 3:
        if coordinate is None:
            raise ValueError("coordinate is required for (R, T, n_x) input")
        rollouts = rollouts[..., coordinate]
    if rollouts.ndim != 2:
        raise ValueError(f"expected (R, T) or (R, T, n_x) rollouts, got shape {rollouts.shape}")
    if rollouts.shape[0] < 2:
        raise ValueError("need at least 2 rollouts")
    return rollouts.var(axis=0, ddof=1)


def mean_abs_first_difference(signals: np.ndarray) -> float:
    """Average ``|x[t+1] - x[t]|`` along the time axis (axis 1); a roughness measure."""
    return float(np.mean(np.abs(np.diff(np.asarray(signals), axis=1))))
