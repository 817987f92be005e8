"""Synthetic benchmark protocol: data generation, sweeps, aggregation.

Reproducibility contract
------------------------
All randomness flows through PCG64 (numpy's documented, versioned bit
generator) seeded explicitly. Normal variates are produced by inverse-CDF
sampling of a 53-bit uniform rather than numpy's ziggurat so the draw
sequence is pinned by this module, not by numpy internals: the ziggurat
tables are an implementation detail numpy is free to change, ndtri is not.
Support sets come from a partial Fisher-Yates shuffle driven by the same
generator. Trial t uses seed + t for its dictionary and
seed + t + SIGNAL_SEED_OFFSET for its signal, so the two streams never
overlap and the shared-dictionary mode can reuse the base seed without
touching the signal sequence.

Aggregation is an ordered reduction over trial indices, so running the
trials in a process pool cannot change any reported number.
"""

from __future__ import annotations

import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.special import ndtri

from .errors import DimensionMismatch
from .feasibility import _as_vector
from .operators import Dictionary, DistortionSpec
from .solvers import (
    AdmmConfig,
    SolverConfig,
    solve_admm_constrained,
    solve_fista,
    solve_ista,
)

SIGNAL_SEED_OFFSET = 1 << 32

SOLVER_NAMES = ("ista", "fista", "admm")

SNR_CAP_DB = 300.0

CSV_HEADER = "task,solver,distortion_param,mean_snr_db,std_snr_db,mean_iters,mean_time_s"


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def standard_normal(rng: np.random.Generator, size) -> np.ndarray:
    """Standard normal draws via inverse CDF of (k + 1/2) / 2^53."""
    k = rng.integers(0, 1 << 53, size=size, dtype=np.uint64)
    u = (k.astype(np.float64) + 0.5) * 2.0**-53
    return ndtri(u)


def sample_support(rng: np.random.Generator, m: int, k: int) -> np.ndarray:
    """k distinct indices from range(m), uniform, by partial Fisher-Yates."""
    if not 1 <= k <= m:
        raise ValueError(f"need 1 <= k <= m, got k={k}, m={m}")
    idx = np.arange(m)
    for i in range(k):
        j = i + int(rng.integers(0, m - i))
        idx[i], idx[j] = idx[j], idx[i]
    return np.sort(idx[:k])


def gen_dictionary(seed: int, n: int, m: int) -> Dictionary:
    """Dictionary with i.i.d. standard normal entries, no column scaling."""
    if n < 1 or m < 1:
        raise ValueError("n and m must be at least 1")
    rng = make_rng(seed)
    return Dictionary(standard_normal(rng, (n, m)))


def gen_sparse_signal(seed: int, dictionary: Dictionary, k_sparse: int):
    """A k-sparse coefficient vector and its synthesized signal.

    The support is uniform without replacement, the nonzeros are standard
    normal, and both alpha and x = D alpha are divided by the peak magnitude
    of x so that the signal has unit infinity norm. The zero-signal draw has
    probability zero but would poison the scaling, so it is resampled.
    """
    rng = make_rng(seed)
    m = dictionary.m
    while True:
        support = sample_support(rng, m, k_sparse)
        values = standard_normal(rng, k_sparse)
        alpha = np.zeros(m)
        alpha[support] = values
        x = dictionary.synthesize(alpha)
        peak = float(np.max(np.abs(x)))
        if peak > 0.0:
            return alpha / peak, x / peak


def snr_db(reference, estimate) -> float:
    """Reconstruction quality 20 log10(||ref|| / ||ref - est||), capped at 300."""
    reference = _as_vector(reference, "reference")
    estimate = _as_vector(estimate, "estimate")
    if reference.shape != estimate.shape:
        raise DimensionMismatch(
            f"reference has length {reference.shape[0]}, estimate {estimate.shape[0]}"
        )
    ref_norm = float(np.linalg.norm(reference))
    if ref_norm == 0.0:
        raise ValueError("reference signal must be nonzero")
    err_norm = float(np.linalg.norm(reference - estimate))
    if err_norm == 0.0:
        return SNR_CAP_DB
    return min(20.0 * math.log10(ref_norm / err_norm), SNR_CAP_DB)


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything needed to reproduce one sweep, including the seed."""

    n: int = 256
    m: int = 512
    k_sparse: int = 16
    trials: int = 100
    seed: int = 0
    distortion_grid: tuple = ()
    solvers: tuple = ("ista", "fista")
    solver_config: SolverConfig = SolverConfig()
    admm_config: AdmmConfig = AdmmConfig()
    shared_dictionary: bool = False

    def __post_init__(self):
        object.__setattr__(self, "distortion_grid", tuple(self.distortion_grid))
        object.__setattr__(self, "solvers", tuple(self.solvers))
        if self.n < 1 or self.m < 1:
            raise ValueError("n and m must be at least 1")
        if not 1 <= self.k_sparse <= self.m:
            raise ValueError("k_sparse must lie in [1, m]")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.distortion_grid:
            raise ValueError("distortion_grid must be non-empty")
        if not self.solvers:
            raise ValueError("solvers must be non-empty")
        for name in self.solvers:
            if name not in SOLVER_NAMES:
                raise ValueError(f"unknown solver {name!r}, expected one of {SOLVER_NAMES}")


@dataclass(frozen=True)
class PointSummary:
    """Aggregate of one (distortion point, solver) cell across trials."""

    distortion: DistortionSpec
    solver: str
    mean_snr_db: float
    std_snr_db: float
    mean_iterations: float
    mean_wall_time_s: float
    failures: int


@dataclass(frozen=True)
class AggregateResult:
    grid: tuple
    input_snr_db: tuple
    per_point: tuple
    trials: int
    failure_count: int


def _run_single_solver(dictionary, iset, name, spec):
    if name == "ista":
        return solve_ista(dictionary, iset, spec.solver_config)
    if name == "fista":
        return solve_fista(dictionary, iset, spec.solver_config)
    if name == "admm":
        return solve_admm_constrained(dictionary, iset, spec.admm_config)
    raise ValueError(f"unknown solver {name!r}")


def _trial_worker(args):
    """One full trial: generate data, sweep the grid, run every solver.

    Top level so it pickles into worker processes. Returns, per grid point,
    the input SNR and per-solver (snr, iterations, wall_time, ok) tuples;
    a solver that raises is recorded as failed and the sweep continues.
    """
    spec, trial = args
    dict_seed = spec.seed if spec.shared_dictionary else spec.seed + trial
    dictionary = gen_dictionary(dict_seed, spec.n, spec.m)
    _, x = gen_sparse_signal(spec.seed + trial + SIGNAL_SEED_OFFSET, dictionary, spec.k_sparse)

    points = []
    for dspec in spec.distortion_grid:
        y = dspec.apply(x)
        iset = dspec.preimage(y)
        input_snr = snr_db(x, y)
        cells = {}
        for name in spec.solvers:
            try:
                coeffs, trace = _run_single_solver(dictionary, iset, name, spec)
                x_hat = dictionary.synthesize(coeffs)
                cells[name] = (
                    snr_db(x, x_hat),
                    float(trace.iterations_run),
                    float(trace.wall_time_seconds),
                    True,
                )
            except Exception:
                cells[name] = (0.0, 0.0, 0.0, False)
        points.append((input_snr, cells))
    return points


def run_experiment(spec: ExperimentSpec, jobs: int = 1) -> AggregateResult:
    """Run the sweep and reduce across trials in index order.

    ``jobs`` sizes the process pool; 1 runs everything in this process. The
    reduction is identical either way.
    """
    if jobs < 1:
        raise ValueError("jobs must be at least 1")
    work = [(spec, t) for t in range(spec.trials)]
    if jobs == 1 or spec.trials == 1:
        trial_results = [_trial_worker(w) for w in work]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, spec.trials)) as pool:
            trial_results = list(pool.map(_trial_worker, work))

    input_means = []
    summaries = []
    total_failures = 0
    for p, dspec in enumerate(spec.distortion_grid):
        input_means.append(float(np.mean([trial_results[t][p][0] for t in range(spec.trials)])))
        for name in spec.solvers:
            cells = [trial_results[t][p][1][name] for t in range(spec.trials)]
            good = [c for c in cells if c[3]]
            failures = len(cells) - len(good)
            total_failures += failures
            if good:
                snrs = np.asarray([c[0] for c in good])
                mean_snr = float(np.mean(snrs))
                std_snr = float(np.std(snrs))
                mean_iters = float(np.mean([c[1] for c in good]))
                mean_time = float(np.mean([c[2] for c in good]))
            else:
                mean_snr = std_snr = mean_iters = mean_time = float("nan")
            summaries.append(
                PointSummary(
                    distortion=dspec,
                    solver=name,
                    mean_snr_db=mean_snr,
                    std_snr_db=std_snr,
                    mean_iterations=mean_iters,
                    mean_wall_time_s=mean_time,
                    failures=failures,
                )
            )
    return AggregateResult(
        grid=spec.distortion_grid,
        input_snr_db=tuple(input_means),
        per_point=tuple(summaries),
        trials=spec.trials,
        failure_count=total_failures,
    )


@dataclass(frozen=True)
class TimingRow:
    task: str
    solver: str
    mean_wall_time_s: float
    total_wall_time_s: float


def run_timing_table(
    base: ExperimentSpec,
    clip_thetas=(0.6,),
    quant_bits=(4,),
    jobs: int = 1,
):
    """Mean solver wall time per task, in the two-task three-solver layout.

    Runs a declipping sweep over ``clip_thetas`` and a dequantization sweep
    over ``quant_bits`` with the solver set of ``base``; each row averages
    over every (grid point, trial) run of one solver on one task.
    """
    rows = []
    for task_grid in (
        tuple(DistortionSpec.clipping(t) for t in clip_thetas),
        tuple(DistortionSpec.quantization(b) for b in quant_bits),
    ):
        spec = replace(base, distortion_grid=task_grid)
        result = run_experiment(spec, jobs=jobs)
        task = task_grid[0].task
        for name in spec.solvers:
            cells = [s for s in result.per_point if s.solver == name]
            runs = sum(spec.trials - s.failures for s in cells)
            total = sum(
                s.mean_wall_time_s * (spec.trials - s.failures)
                for s in cells
                if spec.trials > s.failures
            )
            mean = total / runs if runs else float("nan")
            rows.append(TimingRow(task, name, mean, total))
    return rows


# ----------------------------------------------------------------------
# result files


def _atomic_write_text(path, text: str) -> None:
    """Write whole-file-or-nothing via a temp file and rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _fmt(value: float) -> str:
    # repr of a python float is the shortest round-trip form, which is both
    # exact and stable across runs; never let numpy scalars reach here, their
    # repr carries the dtype.
    return repr(float(value))


def write_results_csv(path, result: AggregateResult, include_times: bool = False) -> None:
    """Emit the sweep CSV. Wall times are measurements, so by default the
    time column holds NA to keep repeated runs byte-identical; pass
    ``include_times=True`` to record them."""
    lines = [CSV_HEADER]
    for s in result.per_point:
        time_field = _fmt(s.mean_wall_time_s) if include_times else "NA"
        lines.append(
            ",".join(
                [
                    s.distortion.task,
                    s.solver,
                    _fmt(s.distortion.param),
                    _fmt(s.mean_snr_db),
                    _fmt(s.std_snr_db),
                    _fmt(s.mean_iterations),
                    time_field,
                ]
            )
        )
    _atomic_write_text(path, "\n".join(lines) + "\n")


def write_plot_data(path, result: AggregateResult) -> list:
    """Two-column (param, mean SNR dB) file per solver, for any plot tool.

    ``path`` acts as a stem: solver names are appended before the suffix.
    Returns the paths written.
    """
    path = Path(path)
    solvers = []
    for s in result.per_point:
        if s.solver not in solvers:
            solvers.append(s.solver)
    written = []
    for name in solvers:
        rows = [s for s in result.per_point if s.solver == name]
        rows.sort(key=lambda s: s.distortion.param)
        lines = ["# distortion_param mean_snr_db"]
        lines += [f"{_fmt(s.distortion.param)} {_fmt(s.mean_snr_db)}" for s in rows]
        target = path.with_name(f"{path.stem}_{name}{path.suffix or '.dat'}")
        _atomic_write_text(target, "\n".join(lines) + "\n")
        written.append(target)
    return written


def write_timing_csv(path, rows) -> None:
    lines = ["task,solver,mean_wall_time_s,total_wall_time_s"]
    for r in rows:
        lines.append(
            ",".join([r.task, r.solver, _fmt(r.mean_wall_time_s), _fmt(r.total_wall_time_s)])
        )
    _atomic_write_text(path, "\n".join(lines) + "\n")
