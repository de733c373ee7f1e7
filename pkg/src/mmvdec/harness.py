"""Monte-Carlo NMSE experiments and their delimited-file contract.

A run sweeps (method, grid size, SNR) cells over independent trials.  Each
trial draws one signal batch and one projection set (shared across SNR
points to reduce cross-SNR variance) and fresh noise per SNR point.  Trial
t uses the generator seeded with ``base_seed XOR t``, so identical configs
reproduce results bit for bit; wall-clock columns are the only
non-deterministic output.

CSV schema: per-trial rows ``method,grid_size,snr_db,trial,nmse,wall_ms,sweeps``
and aggregate rows ``method,grid_size,snr_db,mean_nmse,stderr,trials`` in a
companion file suffixed ``.agg.csv``.  Floats are serialized with 17
significant digits so parsing an emitted file reproduces the table exactly.
``grid_size`` is 0 for the dictionary-free oracle baseline.
"""

import csv
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import covsolve, estimate, model

KNOWN_METHODS = ("oracle-mmse", "l21-cd", "l21-direct", "ml")


def nmse(truth: model.SignalBatch, est: estimate.EstimateBatch) -> float:
    """Squared estimation error normalized by the batch signal energy."""
    if truth.samples.shape != est.signals.shape:
        raise ValueError("truth and estimate dimensions differ")
    energy = float(np.sum(np.abs(truth.samples) ** 2))
    if energy == 0.0:
        raise ValueError("signal batch has zero energy")
    err = float(np.sum(np.abs(est.signals - truth.samples) ** 2))
    return err / energy


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one NMSE-vs-SNR experiment."""

    n: int = 16
    m_fraction: float = 0.5
    samples_per_trial: int = 20
    trials: int = 5
    snr_db: tuple = (0.0, 10.0, 20.0, 30.0, 40.0)
    angular_support: tuple[float, float] = (-0.1, 0.1)
    grid_sizes: tuple = (16, 32)
    methods: tuple = ("oracle-mmse", "l21-cd")
    base_seed: int = 1
    g_options: covsolve.SolveOptions = field(default_factory=covsolve.SolveOptions)
    ml_options: covsolve.SolveOptions = field(default_factory=covsolve.SolveOptions)
    direct_options: estimate.DirectOptions = field(
        default_factory=estimate.DirectOptions
    )

    def __post_init__(self):
        if not 0.0 < self.m_fraction <= 1.0:
            raise ValueError("m_fraction must be in (0, 1]")
        if not 1 <= self.m <= self.n:
            raise ValueError("derived sketch size must be in [1, n]")
        if self.trials < 1:
            raise ValueError("need at least one trial")
        if self.samples_per_trial < 1:
            raise ValueError("need at least one sample per trial")
        if not self.methods:
            raise ValueError("method list must be nonempty")
        for method in self.methods:
            if method not in KNOWN_METHODS:
                raise ValueError(f"unknown method {method!r}")
        if not self.snr_db:
            raise ValueError("need at least one SNR point")
        if any(g < 1 for g in self.grid_sizes):
            raise ValueError("grid sizes must be positive")
        if not self.grid_sizes and set(self.methods) != {"oracle-mmse"}:
            raise ValueError("dictionary methods require at least one grid size")

    @property
    def m(self) -> int:
        return int(round(self.m_fraction * self.n))


@dataclass(frozen=True)
class TrialRecord:
    method: str
    grid_size: int
    snr_db: float
    trial: int
    nmse: float
    wall_ms: float
    sweeps: int


@dataclass(frozen=True)
class AggregateRecord:
    method: str
    grid_size: int
    snr_db: float
    mean_nmse: float
    stderr: float
    trials: int


@dataclass(frozen=True)
class CellFailure:
    method: str
    grid_size: int
    snr_db: float
    trial: int
    message: str


TRIAL_HEADER = ("method", "grid_size", "snr_db", "trial", "nmse", "wall_ms", "sweeps")
AGG_HEADER = ("method", "grid_size", "snr_db", "mean_nmse", "stderr", "trials")


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


@dataclass
class ResultTable:
    """Per-trial NMSE records, their aggregates, and any failed cells."""

    records: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    def aggregates(self) -> list:
        """Mean and standard error per cell, folded in a fixed sorted order."""
        groups: dict = {}
        for rec in self.records:
            groups.setdefault((rec.method, rec.grid_size, rec.snr_db), []).append(
                rec.nmse
            )
        out = []
        for key in sorted(groups):
            values = np.asarray(groups[key])
            stderr = (
                float(np.std(values, ddof=1) / np.sqrt(values.size))
                if values.size > 1
                else 0.0
            )
            out.append(
                AggregateRecord(
                    method=key[0],
                    grid_size=key[1],
                    snr_db=key[2],
                    mean_nmse=float(np.mean(values)),
                    stderr=stderr,
                    trials=values.size,
                )
            )
        return out

    def mean_nmse(self, method: str, grid_size: int, snr_db: float) -> float:
        for agg in self.aggregates():
            if (agg.method, agg.grid_size, agg.snr_db) == (method, grid_size, snr_db):
                return agg.mean_nmse
        raise KeyError(f"no records for ({method}, {grid_size}, {snr_db})")

    def write_csv(self, path) -> Path:
        """Write per-trial rows to ``path`` and aggregates to the .agg.csv twin."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRIAL_HEADER)
            for rec in self.records:
                writer.writerow(
                    (
                        rec.method,
                        rec.grid_size,
                        _fmt(rec.snr_db),
                        rec.trial,
                        _fmt(rec.nmse),
                        _fmt(rec.wall_ms),
                        rec.sweeps,
                    )
                )
        agg_path = aggregate_path(path)
        with agg_path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(AGG_HEADER)
            for agg in self.aggregates():
                writer.writerow(
                    (
                        agg.method,
                        agg.grid_size,
                        _fmt(agg.snr_db),
                        _fmt(agg.mean_nmse),
                        _fmt(agg.stderr),
                        agg.trials,
                    )
                )
        return agg_path

    @classmethod
    def read_csv(cls, path) -> "ResultTable":
        table = cls()
        with Path(path).open(newline="") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader))
            if header != TRIAL_HEADER:
                raise ValueError(f"unexpected header {header!r}")
            for row in reader:
                table.records.append(
                    TrialRecord(
                        method=row[0],
                        grid_size=int(row[1]),
                        snr_db=float(row[2]),
                        trial=int(row[3]),
                        nmse=float(row[4]),
                        wall_ms=float(row[5]),
                        sweeps=int(row[6]),
                    )
                )
        return table


def aggregate_path(path) -> Path:
    path = Path(path)
    if path.suffix == ".csv":
        return path.with_suffix(".agg.csv")
    return path.with_name(path.name + ".agg.csv")


def _estimate_cell(
    method: str,
    grid_size: int,
    config: ExperimentConfig,
    cov: model.CovarianceModel,
    dictionary: model.Dictionary | None,
    signals: model.SignalBatch,
    proj: model.ProjectionSet,
    sketches: model.SketchSet,
    noise_variance: float,
):
    """One (method, grid, SNR, trial) cell; returns (estimates, sweeps)."""
    if method == "oracle-mmse":
        return estimate.oracle_mmse(cov, proj, sketches, noise_variance), 0
    if method == "l21-cd":
        gamma = covsolve.solve_g(sketches, proj, dictionary, config.g_options)
        est = estimate.plug_in_mmse(gamma, dictionary, proj, sketches)
        return est, gamma.info.sweeps
    if method == "ml":
        gamma = covsolve.solve_ml(
            sketches, proj, dictionary, noise_variance, config.ml_options
        )
        est = estimate.plug_in_mmse(gamma, dictionary, proj, sketches)
        return est, gamma.info.sweeps
    if method == "l21-direct":
        coeffs = estimate.l21_ls_direct(
            sketches, proj, dictionary, opts=config.direct_options
        )
        return estimate.coefficients_to_signals(coeffs, dictionary), coeffs.iterations
    raise ValueError(f"unknown method {method!r}")


def run_experiment(config: ExperimentConfig) -> ResultTable:
    """Run the Monte-Carlo sweep described by ``config``.

    Per-cell solver failures are recorded in ``failures`` and the run
    continues; callers decide how to surface them (the CLI exits nonzero).
    """
    cov = model.diffuse_covariance(config.n, config.angular_support)
    dictionaries = {g: model.build_grid_dictionary(config.n, g) for g in config.grid_sizes}
    table = ResultTable()
    for trial in range(config.trials):
        rng = np.random.default_rng(config.base_seed ^ trial)
        signals = model.sample_signals(cov, config.samples_per_trial, rng)
        proj = model.sample_selection_projections(
            config.n, config.m, config.samples_per_trial, rng
        )
        for snr_db in config.snr_db:
            noise_variance = 10.0 ** (-snr_db / 10.0)
            sketches = model.sketch(signals, proj, noise_variance, rng)
            for method in config.methods:
                grid_list = (0,) if method == "oracle-mmse" else config.grid_sizes
                for grid_size in grid_list:
                    dictionary = dictionaries.get(grid_size)
                    start = time.perf_counter()
                    try:
                        est, sweeps = _estimate_cell(
                            method,
                            grid_size,
                            config,
                            cov,
                            dictionary,
                            signals,
                            proj,
                            sketches,
                            noise_variance,
                        )
                        value = nmse(signals, est)
                    except (covsolve.SolverError, np.linalg.LinAlgError) as exc:
                        table.failures.append(
                            CellFailure(method, grid_size, snr_db, trial, str(exc))
                        )
                        continue
                    wall_ms = (time.perf_counter() - start) * 1e3
                    table.records.append(
                        TrialRecord(
                            method=method,
                            grid_size=grid_size,
                            snr_db=float(snr_db),
                            trial=trial,
                            nmse=value,
                            wall_ms=wall_ms,
                            sweeps=int(sweeps),
                        )
                    )
    return table


def full_benchmark_config(**overrides) -> ExperimentConfig:
    """The full NMSE-vs-SNR benchmark configuration (64 antennas, 50% sampling).

    One hundred samples per trial, SNR from 0 to 40 dB in 5 dB steps, grids
    of size n, 2n and 8n, diffuse signals spanning a tenth of the angular
    range.  The support is (-0.2, 0.2) in the sine-angle units used by
    :func:`mmvdec.model.array_response`, i.e. (-0.1, 0.1) in per-antenna
    cycles.  Keyword overrides are applied on top.
    """
    base = ExperimentConfig(
        n=64,
        m_fraction=0.5,
        samples_per_trial=100,
        trials=100,
        snr_db=tuple(float(v) for v in range(0, 45, 5)),
        angular_support=(-0.2, 0.2),
        grid_sizes=(64, 128, 512),
        methods=("oracle-mmse", "l21-cd", "ml"),
        base_seed=1,
        g_options=covsolve.SolveOptions(
            max_sweeps=300,
            coordinate_tolerance=1e-5,
            full_sweep_period=5,
            final_polish=False,
        ),
        ml_options=covsolve.SolveOptions(
            max_sweeps=300, coordinate_tolerance=1e-5, full_sweep_period=5
        ),
    )
    return replace(base, **overrides) if overrides else base
