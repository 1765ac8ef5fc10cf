"""Acceptance criteria, one test per criterion.

Each test appends a PASS/FAIL line that pytest prints in an
"acceptance criteria" section at the end of the run.
"""

import math
import time

import numpy as np
import pytest

from tgi3d import (
    build_integral_table,
    correlation_profile,
    estimate_integration_time,
    generate_reference,
    io,
    make_bar_scene_1d,
)
from tgi3d.backend import NAME as BACKEND
from tgi3d.experiments import (
    DSNR_GRID,
    K_GRID,
    SweepSpec,
    run_phantom_experiment,
    run_pipeline,
    sweep_dsnr,
    sweep_measurements,
)
from tgi3d.reconstruct import correlate_block
from tgi3d.backend import kernels

SEEDS = [1, 2, 3, 4, 5]
BAR_PIXELS = 1000


def record(report, number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] C{number} {title}: {detail}"
    report.append(line)
    print(line)
    return ok


# -- shared runs ----------------------------------------------------------

def c1_run(workers):
    scene = make_bar_scene_1d(201, 200, 50, 300)
    return run_pipeline(scene, 2000, None, 1, 1, P=300, workers=workers)


def c2_runs(workers):
    scene = make_bar_scene_1d(BAR_PIXELS, 800, 100, 1200)
    return [run_pipeline(scene, 6000, 20.0, s, s, P=1200, workers=workers) for s in SEEDS]


def c2_csv(runs):
    lines = ["variable,value,seed,rmse_ticks,wallclock_s"]
    lines += [f"dsnr_db,20.0,{s},{r.rmse!r},0.0" for s, r in zip(SEEDS, runs)]
    return "\n".join(lines) + "\n"


def c3_run(workers):
    return run_phantom_experiment(K=6000, dsnr_db=15.0, workers=workers)


_cache = {}


def cached(key, fn):
    if key not in _cache:
        start = time.perf_counter()
        value = fn()
        _cache[key] = (value, time.perf_counter() - start)
    return _cache[key]


# -- criteria -------------------------------------------------------------

def test_c1_noise_free_exact_recovery(acceptance_report):
    run, elapsed = cached(("c1", 1), lambda: c1_run(1))
    err = np.abs(run.estimate.t_hat - run.truth)[run.scored]
    exact = float(np.mean(err == 0))
    ok = exact >= 0.99 and err.max() <= 1 and run.rmse <= 0.1 and elapsed <= 10
    record(acceptance_report, 1, "noise-free exact recovery", ok,
           f"exact on {exact:.2%} of {err.size} px, max err {err.max()}, RMSE {run.rmse:.3g}, {elapsed:.2f}s (limit 10s, 1 worker)")
    assert ok


def test_c2_high_dsnr_operating_point(acceptance_report):
    runs, elapsed = cached(("c2", 4), lambda: c2_runs(4))
    rmses = [r.rmse for r in runs]
    med = float(np.median(rmses))
    ok = med <= 1.0 and elapsed <= 120
    record(acceptance_report, 2, "20 dB, K=6000, paper-scale bar", ok,
           f"median RMSE {med:.4g} ticks over seeds {SEEDS} (per seed {[round(v, 4) for v in rmses]}), {elapsed:.1f}s (limit 120s)")
    assert ok


PHANTOM_NOMINAL = {"cone": 200, "l_shape": 400, "cuboid": 600, "cylinder": 800}


def test_c3_phantom_reproduction(acceptance_report):
    run, elapsed = cached(("c3", 8), lambda: c3_run(8))
    shapes = run.summary()["shapes"]
    rel = {name: shapes[name]["median_top"] / nominal - 1 for name, nominal in PHANTOM_NOMINAL.items()}
    est = run.estimate
    background_clean = bool(
        np.all(est.t_hat[~est.mask] == 0) and np.all(np.isnan(est.range[~est.mask]))
        and not np.any(est.mask & ~run.scene.support)
    )
    madds = int(est.estimated.sum()) * 6000 * 1200
    ok = all(abs(v) <= 0.05 for v in rel.values()) and background_clean and elapsed <= 900
    detail = ", ".join(f"{n} {shapes[n]['median_top']:.0f} ({rel[n]:+.1%})" for n in PHANTOM_NOMINAL)
    record(acceptance_report, 3, "Fig. 2 phantom at 15 dB", ok,
           f"{detail}; background unestimated={background_clean}; {elapsed:.1f}s end to end "
           f"(limit 900s), {madds / elapsed / 1e9:.1f} G multiply-adds/s, backend={BACKEND}")
    assert ok


def test_c4_dsnr_trend(acceptance_report):
    result = sweep_dsnr(SweepSpec("dsnr_db", DSNR_GRID, K=6000, seeds=SEEDS, N=BAR_PIXELS))
    med = result.medians()
    ok = all(b < a for a, b in zip(med, med[1:]))
    record(acceptance_report, 4, "DSNR trend", ok,
           "median RMSE " + ", ".join(f"{g:g} dB: {m:.4g}" for g, m in zip(DSNR_GRID, med)))
    assert ok


def test_c5_measurement_trend(acceptance_report):
    result = sweep_measurements(SweepSpec("num_measurements", K_GRID, dsnr_db=10.0, seeds=SEEDS, N=BAR_PIXELS))
    med = dict(zip(K_GRID, result.medians()))
    vals = list(med.values())
    ok = all(b <= a for a, b in zip(vals, vals[1:])) and med[200] > med[2000] > med[32000]
    record(acceptance_report, 5, "measurement-count trend", ok,
           "median RMSE " + ", ".join(f"K={k}: {m:.4g}" for k, m in med.items()))
    assert ok


def _naive_column(y, x):
    my, mx = y.mean(), x.mean()
    dy, dx = y - my, x - mx
    vy, vx = np.sum(dy * dy), np.sum(dx * dx)
    if vy == 0 or vx == 0:
        return math.nan
    return float(np.sum(dy * dx) / math.sqrt(vy * vx))


def _first_max(values):
    best = -1
    for t, v in enumerate(values):
        if not math.isnan(v) and (best < 0 or v > values[best]):
            best = t
    return best


def test_c6_kernel_oracle_equivalence(acceptance_report):
    rng = np.random.default_rng(2024)
    worst_rel, worst_abs, mismatched = 0.0, 0.0, 0
    for inst in range(50):
        K = int(rng.integers(8, 201))
        P = int(rng.integers(1, 101))
        n = int(rng.integers(1, 65))
        table = build_integral_table(generate_reference(K, P, seed=1000 + inst))
        cols = rng.integers(0, P, size=n)
        Y = rng.uniform(0.2, 1.0, n) * table.integrals[:, cols] + rng.normal(0, rng.uniform(0, 3), size=(K, n))
        if n > 2:
            Y[:, 0] = 5.0
        C = correlate_block(Y, table)
        idx, _ = kernels.masked_argmax(C, table.valid_columns.astype(np.uint8))
        for j in range(n):
            naive = np.array([_naive_column(Y[:, j], table.integrals[:, t]) for t in range(P)])
            fast = C[j]
            if not np.array_equal(np.isnan(naive), np.isnan(fast)):
                mismatched += 1
                continue
            ok_vals = ~np.isnan(naive)
            diff = np.abs(fast[ok_vals] - naive[ok_vals])
            if diff.size:
                worst_abs = max(worst_abs, float(diff.max()))
                worst_rel = max(worst_rel, float((diff / np.maximum(np.abs(naive[ok_vals]), 1e-300)).max()))
            if idx[j] != _first_max(list(naive)):
                mismatched += 1
    ok = worst_rel <= 1e-9 and mismatched == 0
    record(acceptance_report, 6, "kernel vs naive two-pass Pearson", ok,
           f"50 instances, worst relative diff {worst_rel:.2e} (abs {worst_abs:.2e}), argmax/undefined mismatches {mismatched}")
    assert ok


def test_c7_affine_invariance(acceptance_report):
    rng = np.random.default_rng(7)
    table = build_integral_table(generate_reference(500, 100, seed=77))
    worst, changed = 0.0, 0
    for trial in range(20):
        y = table.integrals[:, rng.integers(0, 100)] * rng.uniform(0.1, 1) + rng.normal(0, 2, 500)
        base = correlation_profile(y, table)
        t0 = estimate_integration_time(base)[0]
        for alpha in (0.5, 2, 10):
            for beta in (-3, 0, 7):
                prof = correlation_profile(alpha * y + beta, table)
                worst = max(worst, float(np.nanmax(np.abs(prof.values - base.values))))
                changed += estimate_integration_time(prof)[0] != t0
    ok = worst <= 1e-12 and changed == 0
    record(acceptance_report, 7, "affine invariance of the estimator", ok,
           f"max |dC| {worst:.2e} over 20 series x 9 (alpha, beta), t_hat changes {changed}")
    assert ok


def _depth_bytes(run, tmp):
    io.write_depth(tmp, run.estimate, run.summary())
    return {name: (tmp / name).read_bytes() for name in io.DEPTH_FILES + ("summary.json",)}


def test_c8_determinism_across_workers(acceptance_report, tmp_path):
    diffs = []
    for label, key, fn, counts in [
        ("C1", ("c1", 1), c1_run, (2, 8)),
        ("C3", ("c3", 8), c3_run, (1, 2)),
    ]:
        ref = _depth_bytes(cached(key, lambda: fn(key[1]))[0], tmp_path / f"{label}_ref")
        for w in counts:
            got = _depth_bytes(fn(w), tmp_path / f"{label}_{w}")
            diffs += [f"{label} w={w} {n}" for n in ref if ref[n] != got[n]]
    base_runs = cached(("c2", 4), lambda: c2_runs(4))[0]
    base_csv = c2_csv(base_runs)
    base_depth = [_depth_bytes(r, tmp_path / f"C2_ref_{s}") for s, r in zip(SEEDS, base_runs)]
    for w in (1, 2, 8):
        runs = c2_runs(w)
        if c2_csv(runs) != base_csv:
            diffs.append(f"C2 w={w} csv")
        for s, r, ref in zip(SEEDS, runs, base_depth):
            got = _depth_bytes(r, tmp_path / f"C2_{w}_{s}")
            diffs += [f"C2 w={w} seed={s} {n}" for n in ref if ref[n] != got[n]]
    ok = not diffs
    record(acceptance_report, 8, "bit-identical outputs for workers {1,2,8}", ok,
           "all depth files and CSVs identical" if ok else f"differences: {diffs[:5]}")
    assert ok


def test_c9_expected_profile_shape(acceptance_report):
    T_star, K, runs = 900, 100_000, 20
    windows = (100, 225, 400, 900)
    acc = np.zeros(len(windows))
    for seed in range(1, runs + 1):
        table = build_integral_table(generate_reference(K, T_star, seed=seed))
        prof = correlation_profile(table.integrals[:, T_star - 1], table)
        acc += prof.values[[t - 1 for t in windows]]
        del table, prof
    mean = acc / runs
    expected = np.sqrt(np.array(windows) / T_star)
    dev = np.abs(mean - expected)
    ok = bool(np.all(dev <= 0.02))
    record(acceptance_report, 9, "expected profile sqrt(t'/T*)", ok,
           ", ".join(f"t'={t}: {m:.4f} vs {e:.4f}" for t, m, e in zip(windows, mean, expected)))
    assert ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
