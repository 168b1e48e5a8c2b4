"""Acceptance suite: one PASS/FAIL line per criterion in the terminal summary."""

import math
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.optimize import brentq

from misocoal.beamforming import mrt, singletons, wf, zf
from misocoal.combinatorics import merge_count, split_count, worst_case_iters
from misocoal.core_analysis import (bruteforce_verdicts, deviation_gains, make_params,
                                    per_pair_condition_set, singleton_threshold,
                                    strong_core_report, weak_core_report,
                                    zero_overhead_threshold)
from misocoal.experiments import SWEEP_COLUMNS, SweepConfig, load_config, rows_to_csv, run_sweep
from misocoal.formation import Game, OverheadModel, run_formation, verify_stable
from conftest import random_channels, record_criterion
from test_combinatorics import count_merges, count_partitions

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def near_threshold(report, s2, rtol=1e-9):
    thr = report.thresholds()
    return any(abs(t - s2) <= rtol * t for t in thr)


def test_criterion_1_threshold_oracle_equivalence():
    rng = np.random.default_rng(101)
    grid = np.logspace(-6, 3, 200)
    start = time.perf_counter()
    checked = mismatches = inexact = 0
    for n in range(50):
        k = int(rng.integers(2, 6))
        ch = random_channels(k, 5, 1000 + n)
        eps = rng.uniform(0, 2, k)
        gains = deviation_gains(ch, "ZF")
        for flavor, build in (("weak", weak_core_report), ("strong", strong_core_report)):
            rep = build(ch, eps)
            brute = bruteforce_verdicts(ch, eps, grid, flavor, gains=gains)
            inexact += not rep.summary_exact
            for s2, b in zip(grid, brute):
                if near_threshold(rep, s2):
                    continue
                checked += 1
                mismatches += rep.nonempty_at(s2) != bool(b)
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and elapsed < 60
    record_criterion(1, ok, f"{mismatches} mismatches over {checked} points, "
                            f"{inexact}/100 reports need the per-pair verdict, {elapsed:.1f} s")
    assert ok


def margin(A, B, C, eps, s2):
    return math.log2(1 + C / s2) + eps - math.log2(1 + A / (B + s2))


def test_criterion_2_case_coverage():
    checks = []
    b = per_pair_condition_set(make_params(4, 1, 2, 0))
    checks.append(b.case == "I" and (b.lower, b.upper) == (0.0, 1.0))
    b = per_pair_condition_set(make_params(1, 1, 2, 0))
    checks.append(b.case == "I" and b.unconditional)
    b = per_pair_condition_set(make_params(3, 1, 1, 1))
    checks.append(b.case == "II" and b.unconditional)
    b = per_pair_condition_set(make_params(0, 1, 1, 1))
    checks.append(b.case == "III" and b.unconditional)

    A, B, C, e = 10.0, 1.0, 1.0, 1.0
    b = per_pair_condition_set(make_params(A, B, C, e))
    r1, r2 = (7 - math.sqrt(41)) / 2, (7 + math.sqrt(41)) / 2
    grid = np.logspace(-4, 3, 400001)
    vals = np.array([margin(A, B, C, e, s) for s in grid])
    idx = np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]
    roots = [brentq(lambda s: margin(A, B, C, e, s), grid[i], grid[i + 1], xtol=1e-15)
             for i in idx]
    case4 = (b.case == "IV" and b.complement and len(roots) == 2
             and abs(b.upper - roots[0]) <= 1e-9 * roots[0]
             and abs(b.lower - roots[1]) <= 1e-9 * roots[1]
             and abs(b.upper - r1) <= 1e-12 * r1 and abs(b.lower - r2) <= 1e-12 * r2)
    checks.append(case4)
    ok = all(checks)
    record_criterion(2, ok, f"cases I-IV {checks}; case IV boundaries "
                            f"({b.upper:.10f}, {b.lower:.10f}) vs scan "
                            f"({roots[0]:.10f}, {roots[1]:.10f})")
    assert ok


def test_criterion_3_corollary_consistency():
    rng = np.random.default_rng(303)
    worst = 0.0
    agree = 0
    n_global = 0
    wide = np.logspace(-8, 6, 60)
    for n in range(50):
        k = int(rng.integers(2, 6))
        ch = random_channels(k, 5, 3000 + n)
        zero = weak_core_report(ch, [0.0] * k)
        s_hat = zero_overhead_threshold(ch)
        assert zero.sigma_lower == 0.0
        worst = max(worst, abs(zero.sigma_upper - s_hat) / s_hat)

        eps = rng.uniform(0, 8, k)
        rep = weak_core_report(ch, eps)
        predicate = all(e.params.delta < 0 or e.params.psi >= 0 for e in rep.entries)
        pair = rep.sigma_lower == 0.0 and rep.sigma_upper == math.inf
        consistent = predicate == pair == rep.globally_nonempty
        if predicate:
            n_global += 1
            consistent &= bool(bruteforce_verdicts(ch, eps, wide).all())
        agree += consistent
    ok = worst <= 1e-12 and agree == 50
    record_criterion(3, ok, f"max rel. gap to sigma_hat {worst:.2e}; global predicate agrees "
                            f"on {agree}/50 ({n_global} globally nonempty)")
    assert ok


def test_criterion_4_singleton_regime():
    singles = 0
    thresholds = []
    for n in range(20):
        ch = random_channels(4, 4, 4000 + n)
        s = singleton_threshold(ch)
        thresholds.append(s)
        res = run_formation(ch, 2 * s, OverheadModel.zero(), q=4, scheme="ZF")
        singles += res.final == singletons(4)
    ok = singles == 20 and min(thresholds) > 0
    record_criterion(4, ok, f"{singles}/20 all-singleton outcomes at twice the threshold "
                            f"(threshold range {min(thresholds):.3g}..{max(thresholds):.3g})")
    assert ok


def test_criterion_5_output_stability():
    rng = np.random.default_rng(505)
    models = (OverheadModel.zero(), OverheadModel.size_proportional(), OverheadModel.uniform())
    runs = failures = 0
    for n in range(50):
        k = int(rng.integers(3, 7))
        ch = random_channels(k, 4, 5000 + n)
        for s2 in (1e-3, 1e-1, 10.0):
            for scheme in ("ZF", "WF"):
                game = Game(ch, s2, scheme)
                for q in sorted({2, 3, k}):
                    for model in models:
                        res = run_formation(ch, s2, model, q, scheme, record=False, game=game)
                        runs += 1
                        stable = verify_stable(res.final, q, model, ch, s2, scheme, game=game)
                        failures += not (stable and res.n_iter <= worst_case_iters(k, q))
    ok = failures == 0
    record_criterion(5, ok, f"{runs - failures}/{runs} runs stable and within the iteration bound")
    assert ok


def test_criterion_6_combinatorial_exactness():
    values = (merge_count(8, 2), merge_count(8, 8), split_count(3, 3), worst_case_iters(8, 2),
              worst_case_iters(2, 2))
    brute = all(merge_count(n, q) == count_merges(n, q)
                and split_count(n, q) == sum(count_partitions(n, j) for j in range(2, q + 1))
                for n in range(1, 9) for q in range(2, max(n, 2) + 1))
    dominance = all(split_count(n, q) >= merge_count(n, q)
                    for n in range(4, 31) for q in range(3, n + 1))
    ok = values == (28, 247, 4, 84, 1) and brute and dominance
    record_criterion(6, ok, f"D(8,2),D(8,8),T(3,3),W(8,2),W(2,2) = {values}; "
                            f"enumeration agreement {brute}; T >= D {dominance}")
    assert ok


def test_criterion_7_beamforming_limits():
    worst_mrt = worst_zf = worst_res = 0.0
    nonzero = 0
    for n in range(100):
        ch = random_channels(4, 4, 7000 + n)
        rng = np.random.default_rng(n)
        size = int(rng.integers(2, 5))
        coalition = tuple(sorted(rng.choice(4, size, replace=False)))
        i = coalition[0]
        worst_mrt = max(worst_mrt, np.linalg.norm(wf(i, coalition, ch, 1e8) - mrt(ch.direct(i))))
        w_zf = zf(i, coalition, ch)
        if np.linalg.norm(w_zf) > 0:
            nonzero += 1
            worst_zf = max(worst_zf, np.linalg.norm(wf(i, coalition, ch, 1e-8) - w_zf))
            for j in coalition:
                if j != i:
                    h = ch.h[i][j]
                    worst_res = max(worst_res, abs(np.vdot(h, w_zf)) / np.linalg.norm(h))
    ok = worst_mrt <= 1e-3 and worst_zf <= 1e-3 and worst_res <= 1e-10
    record_criterion(7, ok, f"max |wf-mrt| {worst_mrt:.2e}, max |wf-zf| {worst_zf:.2e} "
                            f"({nonzero} nonzero ZF), max ZF leakage {worst_res:.2e}")
    assert ok


@pytest.mark.slow
def test_criterion_8_qualitative_figures():
    config = SweepConfig.from_dict(load_config(CONFIGS / "sweep_k8.json"))
    assert config.scenario.n_links == 8 and config.realizations == 100
    start = time.perf_counter()
    rows = run_sweep(config, jobs=1)
    elapsed = time.perf_counter() - start
    at = {(r["snr_db"], r["scheme"], r["q"]): r for r in rows}

    a = (all(at[-10, "ZF", q]["avg_num_coalitions"] == 8 for q in (2, 3, 8))
         and at[40, "ZF", 8]["avg_num_coalitions"] <= 1.05
         and at[40, "WF", 8]["avg_num_coalitions"] <= 1.05)
    zf40, ne40 = at[40, "ZF", 8]["avg_user_rate"], at[40, "ZF", 8]["avg_ne_rate"]
    ne25 = at[25, "ZF", 8]["avg_ne_rate"]
    b = zf40 - ne40 >= 1.0 and ne40 - ne25 < 0.05
    r25 = [at[25, "ZF", q]["avg_user_rate"] for q in (2, 3, 8)]
    c = all(y >= x - 0.02 for x, y in zip(r25, r25[1:]))
    th_wf = [at[10, "WF", q]["avg_theta"] for q in (2, 3, 8)]
    th_zf = [at[10, "ZF", q]["avg_theta"] for q in (2, 3, 8)]
    d = np.mean(th_wf) <= np.mean(th_zf)
    ok = a and b and c and d and elapsed < 600
    record_criterion(8, ok, (
        f"(a) coalitions -10dB ZF {at[-10, 'ZF', 8]['avg_num_coalitions']:g}, 40dB q=8 "
        f"ZF {at[40, 'ZF', 8]['avg_num_coalitions']:g} WF {at[40, 'WF', 8]['avg_num_coalitions']:g} "
        f"{a}; (b) ZF {zf40:.2f} vs NE {ne40:.2f} (NE 25->40dB +{ne40 - ne25:.3f}) {b}; "
        f"(c) 25dB ZF q=2,3,8 {[round(x, 3) for x in r25]} {c}; "
        f"(d) 10dB theta WF {[round(x, 1) for x in th_wf]} vs ZF "
        f"{[round(x, 1) for x in th_zf]} {d}; {elapsed:.0f} s"))
    assert ok


def test_criterion_9_determinism():
    config = SweepConfig.from_dict(load_config(CONFIGS / "sweep_small.json"))
    serial = rows_to_csv(run_sweep(config, jobs=1), SWEEP_COLUMNS)
    again = rows_to_csv(run_sweep(config, jobs=1), SWEEP_COLUMNS)
    parallel = rows_to_csv(run_sweep(config, jobs=8), SWEEP_COLUMNS)
    ok = serial == again == parallel
    record_criterion(9, ok, f"serial x2 and 8 workers byte-identical: {ok} "
                            f"({len(serial.splitlines()) - 1} rows)")
    assert ok
