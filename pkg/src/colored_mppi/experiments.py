"""Declarative experiments: JSON configs, seeded repetitions, sweeps and CSV artifacts.

Every output byte except the wall-clock columns is a function of the config
and its seed. Floats are written with ``repr`` so files do not depend on the
locale and survive a round trip exactly.
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from ._rng import derive_seed
from .analysis import control_window, ensemble_stats, periodogram
from .controller import MppiConfig, RunLog, num_steps, receding_horizon_run
from .noise import ColoredSpec, sample_noise_batch
from .samplers import SMOOTH_KINDS, SamplerConfig
from .systems import SYSTEMS, make_system

SUMMARY_COLUMNS = (
    "sampler", "kind", "sigma", "gamma", "repetitions", "failures",
    "accumulated_cost_mean", "accumulated_cost_std", "solve_ms_mean", "solve_ms_std",
)
# columns that hold wall-clock measurements and are exempt from determinism
TIMING_COLUMNS = ("solve_ms_mean", "solve_ms_std")


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: a system, solver settings and the samplers to compare.

    Each sampler in ``samplers`` gets ``repetitions`` closed-loop runs. Run
    ``r`` of every sampler uses the same seed ``derive_seed(seed, r)``, so
    results are paired across samplers.
    """

    system: str
    controller: MppiConfig
    samplers: tuple[SamplerConfig, ...]
    duration_seconds: float = 3.0
    repetitions: int = 1
    seed: int = 0
    output_dir: str = "results"
    x0: tuple[float, ...] | None = None
    analysis_window: float = 2.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "samplers", tuple(self.samplers))
        if self.x0 is not None:
            object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))
        if self.system not in SYSTEMS:
            raise ValueError(f"unknown system {self.system!r}; expected one of {sorted(SYSTEMS)}")
        if not self.samplers:
            raise ValueError("at least one sampler is required")
        labels = [s.name for s in self.samplers]
        if len(set(labels)) != len(labels):
            raise ValueError(f"sampler labels must be unique, got {labels}")
        if self.repetitions < 1:
            raise ValueError(f"repetitions must be >= 1, got {self.repetitions}")
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")
        num_steps(self.duration_seconds, self.controller.dt)
        if not self.analysis_window > 0:
            raise ValueError(f"analysis_window must be > 0, got {self.analysis_window}")
        system = make_system(self.system)
        for sampler in self.samplers:
            if sampler.control_dim != system.control_dim:
                raise ValueError(
                    f"sampler {sampler.name} has {sampler.control_dim} dims, "
                    f"system {self.system} needs {system.control_dim}"
                )
        if self.x0 is not None and len(self.x0) != system.state_dim:
            raise ValueError(f"x0 needs {system.state_dim} entries, got {len(self.x0)}")

    def initial_state(self) -> np.ndarray:
        x0 = self.x0 if self.x0 is not None else make_system(self.system).default_x0
        return np.array(x0, dtype=float)

    def mppi_config(self, sampler: SamplerConfig) -> MppiConfig:
        return replace(self.controller, sampler=sampler)

    # -- serialization ---------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        controller = {f.name: getattr(self.controller, f.name)
                      for f in fields(self.controller) if f.name != "sampler"}
        return {
            "system": self.system,
            "controller": controller,
            "samplers": [_sampler_to_dict(s) for s in self.samplers],
            "duration_seconds": self.duration_seconds,
            "repetitions": self.repetitions,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "x0": list(self.x0) if self.x0 is not None else None,
            "analysis_window": self.analysis_window,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        controller_data = dict(data.pop("controller", {}))
        allowed = {f.name for f in fields(MppiConfig)} - {"sampler"}
        bad = set(controller_data) - allowed
        if bad:
            raise ValueError(f"unknown controller keys: {sorted(bad)}")
        controller = MppiConfig(**controller_data)
        samplers = tuple(
            _sampler_from_dict(s, controller.dt) for s in data.pop("samplers", ())
        )
        return cls(controller=controller, samplers=samplers, **data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_json(Path(path).read_text())


def _sampler_to_dict(sampler: SamplerConfig) -> dict[str, Any]:
    out = {}
    for key, value in asdict(sampler).items():
        if value is None:
            continue
        out[key] = list(value) if isinstance(value, tuple) else value
    return out


def _sampler_from_dict(data: dict[str, Any], dt: float) -> SamplerConfig:
    data = dict(data)
    # smooth samplers integrate at the controller's time step unless told otherwise
    if data.get("kind") in SMOOTH_KINDS and "dt" not in data:
        data["dt"] = dt
    return SamplerConfig(**data)


# -- running -------------------------------------------------------------------

@dataclass
class SamplerResult:
    sampler: SamplerConfig
    logs: dict[int, RunLog] = field(default_factory=dict)
    failures: dict[int, str] = field(default_factory=dict)

    @property
    def costs(self) -> np.ndarray:
        return np.array([self.logs[r].accumulated_cost for r in sorted(self.logs)])


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    results: list[SamplerResult]

    def by_label(self, label: str) -> SamplerResult:
        for result in self.results:
            if result.sampler.name == label:
                return result
        raise KeyError(label)


def repetition_seed(seed: int, rep: int) -> int:
    return derive_seed(seed, rep)


def run_experiment(
    config: ExperimentConfig,
    output_dir: str | Path | None = None,
    threads: int = 1,
) -> ExperimentResult:
    """Run every sampler for every repetition; write artifacts if ``output_dir`` is given.

    A repetition whose solver raises ``FloatingPointError`` is recorded as a
    failure and excluded from the cost statistics.
    """
    system = make_system(config.system)
    x0 = config.initial_state()
    results = []
    for sampler in config.samplers:
        mppi = config.mppi_config(sampler)
        result = SamplerResult(sampler)
        for rep in range(config.repetitions):
            try:
                result.logs[rep] = receding_horizon_run(
                    mppi, system, x0, config.duration_seconds,
                    repetition_seed(config.seed, rep), threads=threads,
                )
            except FloatingPointError as exc:
                result.failures[rep] = str(exc)
        results.append(result)
    experiment = ExperimentResult(config, results)
    if output_dir is not None:
        write_artifacts(experiment, output_dir)
    return experiment


def _fmt(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (tuple, list)):
        return " ".join(_fmt(v) for v in value)
    if value is None:
        return ""
    return str(value)


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def summary_rows(experiment: ExperimentResult) -> list[tuple]:
    rows = []
    for result in experiment.results:
        sampler = result.sampler
        if result.logs:
            stats = ensemble_stats(result.costs)
            solve_ms = np.concatenate([log.solve_seconds for log in result.logs.values()]) * 1e3
            cost_mean, cost_std = stats.mean, stats.std
            ms_mean, ms_std = float(solve_ms.mean()), float(solve_ms.std(ddof=1)) if solve_ms.size > 1 else 0.0
        else:
            cost_mean = cost_std = ms_mean = ms_std = float("nan")
        rows.append((
            sampler.name, sampler.kind, sampler.sigma, sampler.gamma,
            len(result.logs), len(result.failures),
            cost_mean, cost_std, ms_mean, ms_std,
        ))
    return rows


def write_artifacts(experiment: ExperimentResult, output_dir: str | Path) -> Path:
    """Write ``config.json``, ``runs.csv``, ``summary.csv`` and ``psd.csv``."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    config = experiment.config
    system = make_system(config.system)
    (out / "config.json").write_text(config.to_json())

    def run_rows():
        for result in experiment.results:
            for rep in sorted(result.logs):
                log = result.logs[rep]
                for k in range(len(log)):
                    yield (result.sampler.name, rep, log.times[k], *log.states[k],
                           *log.controls[k], log.step_costs[k])

    _write_csv(
        out / "runs.csv",
        ("sampler", "rep", "t_seconds", *system.state_labels, *system.control_labels, "step_cost"),
        run_rows(),
    )
    _write_csv(out / "summary.csv", SUMMARY_COLUMNS, summary_rows(experiment))
    _write_csv(out / "psd.csv", ("sampler", "rep", "control", "frequency_hz", "power"),
               _psd_rows(experiment, system.control_labels))
    return out


def _psd_rows(experiment: ExperimentResult, control_labels: Sequence[str]):
    window = experiment.config.analysis_window
    for result in experiment.results:
        for rep in sorted(result.logs):
            log = result.logs[rep]
            if len(log) * log.dt < window - 1e-9:
                continue
            pgram = periodogram(control_window(log, window).T, log.dt)
            for dim, label in enumerate(control_labels):
                for f, p in zip(pgram.frequencies, pgram.power[dim]):
                    yield (result.sampler.name, rep, label, f, p)


# -- sweeps --------------------------------------------------------------------

def apply_axis(config: ExperimentConfig, axis: str, value: float) -> ExperimentConfig:
    """Return ``config`` with one numeric parameter replaced.

    ``sigma`` and ``gamma`` apply to every sampler (``gamma`` only changes
    colored ones); anything else is a dotted path such as
    ``controller.lambda_`` or ``duration_seconds``.
    """
    if axis == "sigma":
        return replace(config, samplers=tuple(s.with_sigma(value) for s in config.samplers))
    if axis == "gamma":
        if not any(s.kind == "colored" for s in config.samplers):
            raise ValueError("gamma sweep needs at least one colored sampler")
        return replace(config, samplers=tuple(s.with_gamma(value) for s in config.samplers))
    head, _, tail = axis.partition(".")
    if head == "controller" and tail:
        names = {f.name for f in fields(MppiConfig)} - {"sampler"}
        if tail not in names:
            raise ValueError(f"unknown axis {axis!r}")
        current = getattr(config.controller, tail)
        return replace(config, controller=replace(config.controller, **{tail: _like(current, value)}))
    numeric = {"duration_seconds", "repetitions", "seed", "analysis_window"}
    if tail or head not in numeric:
        raise ValueError(f"unknown axis {axis!r}")
    return replace(config, **{head: _like(getattr(config, head), value)})


def _like(current: Any, value: float) -> Any:
    if isinstance(current, int) and not isinstance(current, bool):
        if float(value) != int(value):
            raise ValueError(f"expected an integer value, got {value}")
        return int(value)
    return float(value)


def run_sweep(
    config: ExperimentConfig,
    axis: str,
    values: Sequence[float],
    output_dir: str | Path | None = None,
    threads: int = 1,
) -> list[ExperimentResult]:
    """One experiment per value; writes ``<out>/<axis>=<value>/`` plus a combined ``summary.csv``."""
    if not values:
        raise ValueError("sweep needs at least one value")
    configs = [apply_axis(config, axis, v) for v in values]
    experiments = []
    for value, cfg in zip(values, configs):
        sub = None if output_dir is None else Path(output_dir) / f"{axis}={_fmt(float(value))}"
        experiments.append(run_experiment(cfg, sub, threads=threads))
    if output_dir is not None:
        rows = [(axis, float(v), *row)
                for v, exp in zip(values, experiments) for row in summary_rows(exp)]
        _write_csv(Path(output_dir) / "summary.csv", ("axis", "value", *SUMMARY_COLUMNS), rows)
    return experiments


# -- analysis of stored runs ------------------------------------------------------

def analyze_directory(output_dir: str | Path) -> Path:
    """Recompute per-run and per-sampler metrics from a stored ``runs.csv``.

    Writes ``analysis.csv`` (one row per run) and returns its path.
    """
    out = Path(output_dir)
    config = ExperimentConfig.load(out / "config.json")
    system = make_system(config.system)
    runs: dict[tuple[str, int], list[list[str]]] = {}
    with (out / "runs.csv").open(newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        expected = ["sampler", "rep", "t_seconds", *system.state_labels,
                    *system.control_labels, "step_cost"]
        if header != expected:
            raise ValueError(f"unexpected runs.csv header {header}")
        for row in reader:
            runs.setdefault((row[0], int(row[1])), []).append(row)

    n_x, n_u = system.state_dim, system.control_dim
    window = int(round(config.analysis_window / config.controller.dt))
    rows = []
    for (label, rep), table in runs.items():
        values = np.array([[float(v) for v in r[2:]] for r in table])
        states = values[:, 1:1 + n_x]
        controls = values[:, 1 + n_x:1 + n_x + n_u]
        cost = float(np.sum(system.running_cost(states)))
        first = controls[:window]
        peak = float(np.max(np.abs(controls[: int(round(0.5 / config.controller.dt))])))
        roughness = float(np.mean(np.abs(np.diff(first, axis=0)))) if len(first) > 1 else 0.0
        rows.append((label, rep, len(table), cost, peak, roughness))
    path = out / "analysis.csv"
    _write_csv(path, ("sampler", "rep", "steps", "accumulated_cost", "peak_abs_control_0p5s",
                      "mean_abs_control_difference"), rows)
    return path


# -- noise samples -----------------------------------------------------------------

def sample_noise_artifacts(
    spec: ColoredSpec,
    num_samples: int,
    seed: int,
    output_dir: str | Path,
    dt: float = 1.0,
    threads: int = 1,
) -> Path:
    """Write ``noise.csv`` (sample_id, t, dim, value) and the ensemble ``periodogram.csv``."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    batch = sample_noise_batch(spec, num_samples, seed, threads=threads)
    values = batch.values[:, :, 0]
    _write_csv(
        out / "noise.csv", ("sample_id", "t", "dim", "value"),
        ((m, t, 0, values[m, t]) for m in range(num_samples) for t in range(spec.horizon)),
    )
    if spec.horizon >= 4:
        pgram = periodogram(values, dt)
        _write_csv(out / "periodogram.csv", ("frequency_hz", "mean_power"),
                   zip(pgram.frequencies, pgram.mean_power()))
    return out

