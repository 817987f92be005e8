"""Release gate: the package's headline guarantees, one check per test.

Every test prints one ``ACCEPTANCE <num> <name>: PASS/FAIL`` line (visible
with ``pytest -s``, or in the captured output of a failing test) and then
asserts, so a plain pytest run also reports each criterion by test name.
Seeds are pinned; every number here reproduces exactly.
"""

import subprocess
import sys
import time

import numpy as np
import pytest
from scipy.optimize import linprog

from sparse_consist import (
    SIGNAL_SEED_OFFSET,
    AdmmConfig,
    DistortionSpec,
    ExperimentSpec,
    IntervalSet,
    SolverConfig,
    gen_dictionary,
    gen_sparse_signal,
    run_experiment,
    run_timing_table,
    solve_admm_constrained,
    solve_fista,
    solve_fista_bpdn,
    solve_ista,
)

PROTOCOL = dict(n=256, m=512, k_sparse=16)


def _verdict(num: int, name: str, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {num:02d} {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"criterion {num} {name}: {detail}"


def _protocol_instance(trial: int, dspec: DistortionSpec, seed: int = 0):
    """One benchmark-protocol trial: per-trial dictionary and signal seeds."""
    dic = gen_dictionary(seed + trial, PROTOCOL["n"], PROTOCOL["m"])
    _, x = gen_sparse_signal(
        seed + trial + SIGNAL_SEED_OFFSET, dic, PROTOCOL["k_sparse"]
    )
    return dic, dspec.preimage(dspec.apply(x))


def test_01_distance_gradient_matches_finite_differences():
    t0 = time.perf_counter()
    worst = 0.0
    h = 1e-5
    for t in range(100):
        dic = gen_dictionary(3000 + t, 16, 32)
        rng = np.random.Generator(np.random.PCG64(9000 + t))
        clean = rng.standard_normal(16)
        clean /= max(1e-9, float(np.max(np.abs(clean))))
        dspec = DistortionSpec.clipping(0.6)
        iset = dspec.preimage(dspec.apply(clean))
        alpha = rng.standard_normal(32) * 0.3

        grad = dic.correlate(iset.grad_half_distance_sq(dic.synthesize(alpha)))
        fd = np.empty(32)
        for j in range(32):
            e = np.zeros(32)
            e[j] = h
            f_plus = 0.5 * iset.distance_sq(dic.synthesize(alpha + e))
            f_minus = 0.5 * iset.distance_sq(dic.synthesize(alpha - e))
            fd[j] = (f_plus - f_minus) / (2 * h)
        rel = float(np.max(np.abs(fd - grad))) / max(float(np.max(np.abs(grad))), 1e-12)
        worst = max(worst, rel)
    elapsed = time.perf_counter() - t0
    _verdict(
        1,
        "gradient-oracle",
        worst < 1e-6 and elapsed < 5.0,
        f"worst rel err {worst:.2e}, {elapsed:.1f}s",
    )


def test_02_projection_idempotent_and_non_expansive():
    t0 = time.perf_counter()
    rng = np.random.Generator(np.random.PCG64(42))
    idempotence_failures = 0
    worst_expansion = 0.0
    for t in range(1000):
        n = int(rng.integers(1, 40))
        kind = t % 3
        if kind == 0:
            dspec = DistortionSpec.clipping(float(rng.uniform(0.1, 0.9)))
            iset = dspec.preimage(dspec.apply(rng.standard_normal(n)))
        elif kind == 1:
            dspec = DistortionSpec.quantization(int(rng.integers(2, 7)))
            iset = dspec.preimage(dspec.apply(np.clip(rng.standard_normal(n), -0.999, 0.999)))
        else:
            iset = IntervalSet.singleton(rng.standard_normal(n))
        x = rng.standard_normal(n) * 3
        z = rng.standard_normal(n) * 3
        px, pz = iset.project(x), iset.project(z)
        if not np.array_equal(iset.project(px), px):
            idempotence_failures += 1
        worst_expansion = max(
            worst_expansion,
            float(np.linalg.norm(px - pz)) - float(np.linalg.norm(x - z)),
        )
    elapsed = time.perf_counter() - t0
    _verdict(
        2,
        "projection-properties",
        idempotence_failures == 0 and worst_expansion <= 1e-12 and elapsed < 1.0,
        f"{idempotence_failures} idempotence failures, "
        f"worst expansion {worst_expansion:.2e}, {elapsed:.2f}s",
    )


def test_03_plain_solver_descends_monotonically():
    t0 = time.perf_counter()
    worst_rise = -np.inf
    config = SolverConfig(lam=1e-2, max_iter=400, rel_tol=0.0)
    for t in range(20):
        dic, iset = _protocol_instance(t, DistortionSpec.clipping(0.6), seed=700)
        _, trace = solve_ista(dic, iset, config)
        assert trace.iterations_run == 400
        worst_rise = max(worst_rise, float(np.max(np.diff(trace.objective_per_iter))))
    elapsed = time.perf_counter() - t0
    _verdict(
        3,
        "monotone-descent",
        worst_rise <= 1e-12 and elapsed < 30.0,
        f"worst objective rise {worst_rise:.2e}, {elapsed:.1f}s",
    )


def test_04_both_solvers_agree_at_tight_tolerance():
    t0 = time.perf_counter()
    worst_gap = 0.0
    worst_kkt = 0.0
    config = SolverConfig(lam=1e-2, max_iter=100000, rel_tol=1e-10)
    dspec = DistortionSpec.quantization(3)
    for t in range(20):
        dic = gen_dictionary(500 + t, 4, 6)
        _, x = gen_sparse_signal(500 + t + SIGNAL_SEED_OFFSET, dic, 2)
        iset = dspec.preimage(dspec.apply(x))
        _, tr_ista = solve_ista(dic, iset, config)
        _, tr_fista = solve_fista(dic, iset, config)
        gap = abs(
            float(tr_ista.objective_per_iter[-1]) - float(tr_fista.objective_per_iter[-1])
        )
        worst_gap = max(worst_gap, gap)
        worst_kkt = max(worst_kkt, tr_ista.kkt_residual_final, tr_fista.kkt_residual_final)
    elapsed = time.perf_counter() - t0
    _verdict(
        4,
        "solver-agreement",
        worst_gap < 1e-6 and worst_kkt < 1e-5 and elapsed < 10.0,
        f"worst objective gap {worst_gap:.2e}, worst kkt {worst_kkt:.2e}, {elapsed:.1f}s",
    )


def test_05_singleton_set_degenerates_to_denoiser_bitwise():
    identical = True
    config = SolverConfig(lam=1e-2, max_iter=200, rel_tol=0.0)
    for seed in (40, 41, 42, 43, 44):
        dic = gen_dictionary(seed, 10, 20)
        _, x = gen_sparse_signal(seed + SIGNAL_SEED_OFFSET, dic, 4)
        a_set, tr_set = solve_fista(dic, IntervalSet.singleton(x), config)
        a_direct, tr_direct = solve_fista_bpdn(dic, x, config)
        identical = identical and np.array_equal(a_set, a_direct)
        identical = identical and np.array_equal(
            tr_set.objective_per_iter, tr_direct.objective_per_iter
        )
    _verdict(5, "denoiser-degeneration", identical, "5/5 seeds bitwise identical"
             if identical else "iterates diverged")


def test_06_constrained_baseline_matches_linear_program():
    t0 = time.perf_counter()
    config = AdmmConfig(
        max_iter=12000, inner_iters=100, inner_tol=1e-10, abs_tol=1e-8, rel_tol=1e-8
    )
    dspec = DistortionSpec.clipping(0.5)
    worst_gap = 0.0
    worst_violation = 0.0
    for seed in range(100, 110):
        dic = gen_dictionary(seed, 6, 12)
        _, x = gen_sparse_signal(seed + SIGNAL_SEED_OFFSET, dic, 2)
        iset = dspec.preimage(dspec.apply(x))
        beta, _ = solve_admm_constrained(dic, iset, config)

        rows, rhs = [], []
        D = dic.matrix
        for i in range(dic.n):
            if np.isfinite(iset.upper[i]):
                rows.append(np.concatenate([D[i], -D[i]]))
                rhs.append(iset.upper[i])
            if np.isfinite(iset.lower[i]):
                rows.append(np.concatenate([-D[i], D[i]]))
                rhs.append(-iset.lower[i])
        lp = linprog(
            np.ones(2 * dic.m),
            A_ub=np.asarray(rows),
            b_ub=np.asarray(rhs),
            bounds=[(0, None)] * (2 * dic.m),
            method="highs",
        )
        assert lp.success, lp.message

        worst_gap = max(worst_gap, abs(float(np.abs(beta).sum()) - float(lp.fun)))
        image = dic.synthesize(beta)
        violation = float(
            np.max(
                np.maximum(iset.lower - image, 0.0) + np.maximum(image - iset.upper, 0.0)
            )
        )
        worst_violation = max(worst_violation, violation)
    elapsed = time.perf_counter() - t0
    _verdict(
        6,
        "baseline-optimality",
        worst_gap <= 1e-4 and worst_violation <= 1e-4,
        f"worst l1 gap {worst_gap:.2e}, worst violation {worst_violation:.2e}, {elapsed:.0f}s",
    )


def test_07_wall_time_ordering_across_solvers():
    t0 = time.perf_counter()
    base = ExperimentSpec(
        **PROTOCOL,
        trials=10,
        seed=0,
        distortion_grid=(DistortionSpec.clipping(0.6),),
        solvers=("ista", "fista", "admm"),
        solver_config=SolverConfig(lam=1e-2, max_iter=1500, rel_tol=1e-6),
        admm_config=AdmmConfig(max_iter=400),
    )
    rows = run_timing_table(base, clip_thetas=(0.6,), quant_bits=(4,), jobs=1)
    totals = {name: 0.0 for name in ("ista", "fista", "admm")}
    for r in rows:
        totals[r.solver] += r.total_wall_time_s
    ratio = totals["admm"] / totals["fista"]
    elapsed = time.perf_counter() - t0
    _verdict(
        7,
        "solver-time-ordering",
        totals["fista"] < totals["ista"] < totals["admm"]
        and ratio >= 20.0
        and elapsed < 900.0,
        f"fista {totals['fista']:.2f}s < ista {totals['ista']:.2f}s < "
        f"admm {totals['admm']:.2f}s, ratio {ratio:.0f}x, {elapsed:.0f}s",
    )


def test_08_accelerated_solver_near_optimal_by_iteration_150():
    t0 = time.perf_counter()
    config = SolverConfig(lam=1e-2, max_iter=400, rel_tol=0.0)
    dspec = DistortionSpec.clipping(0.6)
    within = 0
    for t in range(20):
        dic, iset = _protocol_instance(t, dspec)
        _, trace = solve_fista(dic, iset, config)
        f150 = float(trace.objective_per_iter[149])
        f400 = float(trace.objective_per_iter[399])
        if (f150 - f400) / f400 <= 0.01:
            within += 1
    elapsed = time.perf_counter() - t0
    _verdict(
        8,
        "early-convergence",
        within >= 15 and elapsed < 120.0,
        f"{within}/20 instances within 1% at iteration 150, {elapsed:.0f}s",
    )


def test_09_recovery_curves_have_the_expected_shape():
    t0 = time.perf_counter()
    base = dict(
        **PROTOCOL,
        trials=25,
        seed=0,
        solvers=("ista", "fista"),
        solver_config=SolverConfig(lam=1e-2, max_iter=400, rel_tol=1e-6),
    )
    declip = ExperimentSpec(
        distortion_grid=tuple(DistortionSpec.clipping(t) for t in (0.2, 0.4, 0.6, 0.8)),
        **base,
    )
    dequant = ExperimentSpec(
        distortion_grid=tuple(DistortionSpec.quantization(b) for b in (2, 3, 4, 5, 6)),
        **base,
    )
    problems = []
    min_gain = np.inf
    for result in (run_experiment(declip), run_experiment(dequant)):
        by_solver = {}
        for s in result.per_point:
            by_solver.setdefault(s.solver, []).append(s)
        for i, dspec in enumerate(result.grid):
            ista = by_solver["ista"][i]
            fista = by_solver["fista"][i]
            if fista.mean_snr_db < ista.mean_snr_db:
                problems.append(f"fista below ista at {dspec.label()}")
            gain = fista.mean_snr_db - result.input_snr_db[i]
            min_gain = min(min_gain, gain)
            if gain < 0.5:
                problems.append(f"fista below input+0.5dB at {dspec.label()}")
        for name, cells in by_solver.items():
            snrs = [s.mean_snr_db for s in cells]  # grid is sorted ascending
            for a, b in zip(snrs, snrs[1:]):
                if b < a - 1.0:
                    problems.append(f"{name} drops {a - b:.1f}dB along the grid")
    elapsed = time.perf_counter() - t0
    _verdict(
        9,
        "curve-shape",
        not problems and elapsed < 600.0,
        "; ".join(problems) if problems else
        f"monotone curves, min fista gain {min_gain:.2f}dB, {elapsed:.0f}s",
    )


def test_10_benchmark_reruns_are_byte_identical(tmp_path):
    outputs = []
    for name in ("one.csv", "two.csv"):
        proc = subprocess.run(
            [
                sys.executable, "-m", "sparse_consist", "declip-bench",
                "--trials", "5", "--seed", "7", "--out", str(tmp_path / name),
            ],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        outputs.append((tmp_path / name).read_bytes())
    _verdict(
        10,
        "byte-identical-reruns",
        outputs[0] == outputs[1],
        f"{len(outputs[0])} bytes each",
    )
