"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Expensive Monte-Carlo runs are cached at module level so the SDR integrity
check can reuse every TPMin solve made by the other criteria.
"""

import functools
import math
import time

import numpy as np
import pytest

from noma_backscatter.channel import sample_channels, trial_seed
from noma_backscatter.harness import builtin, run_scenario, write_outputs
from noma_backscatter.model import PowerAllocation, constraint_violations, tag_rate_exact, tag_rate_lb
from noma_backscatter.special import exp_integral_ei
from noma_backscatter.tpmin import TpStatus, solve_tpmin
from noma_backscatter.wsrmax import WsrStatus, solve_wsrmax
from oracles import brute_force_min_power, ei_quadrature, ergodic_tag_rate_quadrature

EI_GRID = -np.geomspace(1e-3, 50.0, 1000)
TAG_GRID = np.geomspace(1e-3, 100.0, 1000)
TPMIN_RUNS = []  # (params, channels, TpResult) from criteria 4 and 5


@pytest.fixture
def report(capsys):
    def _report(num, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {num}: {'PASS' if ok else 'FAIL'} - {detail}")
        assert ok, detail
    return _report


def _mean(vals):
    return math.fsum(vals) / len(vals)


def _ok_table(rows, field, key=("series", "sweep")):
    """{trial: {key: value}} for Ok rows; value is float(field)."""
    out = {}
    for r in rows:
        if r["status"] == "Ok":
            out.setdefault(r["trial"], {})[tuple(r[k] for k in key)] = float(r[field])
    return out


def _common_means(rows, field, points):
    """Means over trials that are Ok at every point, plus that trial count."""
    table = _ok_table(rows, field)
    common = [t for t, v in table.items() if all(p in v for p in points)]
    return {p: _mean([table[t][p] for t in common]) for p in points} if common else {}, len(common)


# ---------------------------------------------------------------------------


def test_c1_special_function_accuracy(report):
    t0 = time.perf_counter()
    ei = [exp_integral_ei(x) for x in EI_GRID]
    r0 = [tag_rate_exact(g) for g in TAG_GRID]
    elapsed = time.perf_counter() - t0
    ei_err = max(abs(a - b) / abs(b) for a, b in zip(ei, (ei_quadrature(x) for x in EI_GRID)))
    r0_err = max(abs(a - b) for a, b in zip(r0, (ergodic_tag_rate_quadrature(g) for g in TAG_GRID)))
    ok = ei_err <= 1e-10 and r0_err <= 1e-8 and elapsed < 5.0
    report(1, ok, f"Ei max rel err {ei_err:.2e} (<=1e-10), tag rate max err {r0_err:.2e} (<=1e-8), "
                  f"{elapsed:.3f} s (<5 s)")


def test_c2_lower_bound_never_exceeds_exact(report):
    bad = [g for g in TAG_GRID if tag_rate_lb(g) > tag_rate_exact(g)]
    report(2, not bad, f"{len(bad)} violations of R0lb <= R0 on {TAG_GRID.size} points")


def test_c3_wsrmax_monotone_ascent(report):
    cfg = builtin("fig4").point(20.0)
    params = cfg.system_params()
    nonmono, fast, solved, worst = 0, 0, 0, 0.0
    for trial in range(100):
        seed = trial_seed(cfg.base_seed, trial)
        ch = sample_channels(seed, params, cfg.geometry())
        res = solve_wsrmax(params, ch, cfg.p_t, seed=seed)
        if res.w is None:
            continue
        solved += 1
        tr = res.objective_trace
        drops = [a - b for a, b in zip(tr, tr[1:])]
        worst = max([worst] + drops)
        nonmono += any(d > 1e-6 for d in drops)
        fast += res.status is WsrStatus.CONVERGED and res.outer_iterations <= 8
    ok = solved == 100 and nonmono == 0 and fast >= 90
    report(3, ok, f"{solved}/100 solved, {nonmono} nonmonotone traces (largest drop {worst:.1e}), "
                  f"{fast}/100 converged within 8 outer iterations (>=90)")


def test_c4_tpmin_trace_and_recheck(report):
    cfg = builtin("fig6").point(0.3, 0.5)
    params = cfg.system_params()
    increases, recheck_fail, infeasible = 0, 0, 0
    for trial in range(100):
        seed = trial_seed(cfg.base_seed, trial)
        ch = sample_channels(seed, params, cfg.geometry())
        res = solve_tpmin(params, ch, seed=seed)
        TPMIN_RUNS.append((params, ch, res))
        if res.w is None or res.status is TpStatus.INFEASIBLE:
            infeasible += 1
            continue
        tr = res.p_trace
        increases += any(b > a for a, b in zip(tr, tr[1:]))
        recheck_fail += bool(constraint_violations(params, ch, res.w, res.alloc, 1e-6))
    ok = increases == 0 and recheck_fail == 0 and infeasible < 100
    report(4, ok, f"{100 - infeasible}/100 solved, {increases} traces with an increase, "
                  f"{recheck_fail} failed core-model rechecks at 1e-6")


def test_c5_tpmin_matches_brute_force(report):
    cfg = builtin("fig10", num_antennas=2, rate_thresholds=(0.3, 2.0, 1.0)).point(1.0, 0.5)
    params = cfg.system_params()
    t0 = time.perf_counter()
    worst, mismatched, both_inf = 0.0, [], 0
    for trial in range(20):
        seed = trial_seed(cfg.base_seed, trial)
        ch = sample_channels(seed, params, cfg.geometry())
        res = solve_tpmin(params, ch, seed=seed)
        TPMIN_RUNS.append((params, ch, res))
        bf = brute_force_min_power(ch.h, ch.g, ch.f, ch.q, params.noise_power, params.reflection_coeff,
                                   params.eh_efficiency, params.eh_threshold, params.sic_quality,
                                   params.sinr_thresholds, params.max_power)
        tp = res.p_t if res.w is not None and res.status is not TpStatus.INFEASIBLE else math.inf
        if math.isinf(tp) and math.isinf(bf):
            both_inf += 1
            continue
        rel = abs(tp - bf) / bf if math.isfinite(tp) and math.isfinite(bf) else math.inf
        worst = max(worst, rel)
        if rel > 0.02:
            mismatched.append(trial)
    elapsed = time.perf_counter() - t0
    ok = not mismatched and elapsed < 600
    report(5, ok, f"worst relative gap {worst:.2e} (<=2%), mismatched trials {mismatched}, "
                  f"{both_inf} infeasible for both, {elapsed:.0f} s")


@functools.lru_cache(maxsize=None)
def _fig6_rows():
    return run_scenario(builtin("fig6", trials=200)).rows


def test_c6_min_power_trends(report):
    cfg = builtin("fig6")
    rows = _fig6_rows()
    points = [(a, r) for a in cfg.series_values for r in cfg.sweep_values]
    means, n = _common_means(rows, "min_power_dbm", points)
    if not means:
        report(6, False, "no trial feasible at every point")
    inc_r = all(means[(a, r1)] < means[(a, r2)] for a in cfg.series_values
                for r1, r2 in zip(cfg.sweep_values, cfg.sweep_values[1:]))
    dec_a = all(means[(a1, r)] > means[(a2, r)] for r in cfg.sweep_values
                for a1, a2 in zip(cfg.series_values, cfg.series_values[1:]))
    delta = means[(0.5, 0.5)] - means[(0.5, 0.3)]
    ok = inc_r and dec_a and abs(delta - 2.4) <= 0.7
    levels = ", ".join(f"a={a}: " + "/".join(f"{means[(a, r)]:.2f}" for r in cfg.sweep_values)
                       for a in cfg.series_values)
    report(6, ok, f"{n} common trials; increasing in R0th {inc_r}, decreasing in alpha {dec_a}; "
                  f"delta(0.3->0.5, alpha=0.5) {delta:.2f} dB (2.4 +- 0.7); dBm means {levels}")


def test_c7_tag_ordering_and_levels(report):
    cfg = builtin("fig3", trials=200, sweep_values=(0.01, 0.6, 0.99))
    rows = run_scenario(cfg).rows
    order = ("wsrmax-digital", "wsrmax-analog", "baseline-mrt")
    stats, failures = {}, []
    for alpha in cfg.sweep_values:
        for field in ("tag_rate_exact", "harvested_power_dbm"):
            m = {}
            for method in order + ("baseline-random",):
                vals = [r[field] for r in rows if r["method"] == method and r["sweep"] == alpha
                        and r["status"] == "Ok"]
                m[method] = _mean(vals) if vals else math.nan
            stats[(alpha, field)] = m
            chain = [m[x] for x in order]
            if not all(a >= b for a, b in zip(chain, chain[1:])):
                failures.append(f"order {field}@{alpha}")
            if not (m["wsrmax-analog"] >= m["baseline-random"] and m["baseline-mrt"] >= m["baseline-random"]):
                failures.append(f"random {field}@{alpha}")
    eh = stats[(0.01, "harvested_power_dbm")]["wsrmax-digital"]
    rate = stats[(0.99, "tag_rate_exact")]["wsrmax-digital"]
    if abs(eh - 4.5) > 1.5:
        failures.append("harvested-power band")
    if abs(rate - 4.0) > 1.0:
        failures.append("tag-rate band")
    detail = "; ".join(f"{f}@{a}: " + "/".join(f"{v:.3g}" for v in m.values()) for (a, f), m in stats.items())
    report(7, not failures, f"failed checks {failures}; digital harvested {eh:.2f} dBm (4.5 +- 1.5), "
                            f"digital tag rate {rate:.3f} (4.0 +- 1.0); "
                            f"means digital/analog/MRT/random {detail}")


def test_c8_imperfect_sic_sensitivity(report):
    wsr_cfg = builtin("fig9", trials=200, methods=("wsrmax-digital",), series_values=(0.5,))
    tp_cfg = builtin("fig10", trials=200, series_values=(0.5,))
    xs = wsr_cfg.sweep_values
    wrows = run_scenario(wsr_cfg).rows
    wsr, n_w = _common_means(wrows, "wsr", [(0.5, x) for x in xs])
    trows = run_scenario(tp_cfg).rows
    tp = {}
    for x in tp_cfg.sweep_values:
        vals = [r["min_power_dbm"] for r in trows if r["sweep"] == x and r["status"] == "Ok"]
        if vals:
            tp[x] = _mean(vals)
    wsr_up = bool(wsr) and all(wsr[(0.5, a)] <= wsr[(0.5, b)] for a, b in zip(xs, xs[1:]))
    tp_keys = sorted(tp)
    tp_down = len(tp_keys) == len(tp_cfg.sweep_values) and all(
        tp[a] >= tp[b] for a, b in zip(tp_keys, tp_keys[1:]))
    gap = wsr[(0.5, 1.0)] - wsr[(0.5, 0.9)] if wsr else math.nan
    ok = wsr_up and tp_down and abs(gap - 1.9) <= 0.6
    feas = {x: sum(r["status"] == "Ok" for r in trows if r["sweep"] == x) for x in tp_cfg.sweep_values}
    report(8, ok, f"WSR nondecreasing in xi {wsr_up} ({n_w} common trials: "
                  + "/".join(f"{wsr.get((0.5, x), math.nan):.3f}" for x in xs)
                  + f"); TPMin nonincreasing {tp_down} (feasible trials per xi {feas}); "
                  f"gap(0.9->1.0) {gap:.2f} bps/Hz (1.9 +- 0.6)")


def test_c9_sdr_integrity(report):
    if not TPMIN_RUNS:
        # run on its own: build the same TPMin sample the other criteria use
        cfg = builtin("fig6").point(0.3, 0.5)
        params = cfg.system_params()
        for trial in range(100):
            seed = trial_seed(cfg.base_seed, trial)
            ch = sample_channels(seed, params, cfg.geometry())
            TPMIN_RUNS.append((params, ch, solve_tpmin(params, ch, seed=seed)))
    below, rank1_gap, rank1, randomized, recheck_fail = 0, 0.0, 0, 0, 0
    for params, ch, res in TPMIN_RUNS:
        for step in res.sdr_steps:
            if step.p_t < step.sdr_lower_bound - 1e-8:
                below += 1
            if step.singular_ratio <= 1e-6:
                rank1 += 1
                rank1_gap = max(rank1_gap, abs(step.p_t - step.sdr_lower_bound) / step.sdr_lower_bound)
            if not step.rank_one:
                randomized += 1
                alloc = PowerAllocation(step.rho, step.p_t)
                recheck_fail += bool(constraint_violations(params, ch, step.w, alloc, 1e-6))
    steps = sum(len(r.sdr_steps) for _, _, r in TPMIN_RUNS)
    ok = steps > 0 and below == 0 and rank1_gap <= 1e-6 and recheck_fail == 0
    report(9, ok, f"{steps} SDR steps over {len(TPMIN_RUNS)} runs: {below} below the relaxation bound, "
                  f"{rank1} rank-one with max gap {rank1_gap:.1e} (<=1e-6), "
                  f"{randomized} randomized with {recheck_fail} recheck failures")


def test_c10_byte_identical_reruns(report, tmp_path):
    cfgs = [builtin("fig4", trials=4, sweep_values=(10.0, 20.0)),
            builtin("fig6", trials=3, sweep_values=(0.1, 0.5), series_values=(0.3, 0.7))]
    same = []
    for cfg in cfgs:
        blobs = []
        for j, threads in enumerate((1, 1, 2)):
            paths = write_outputs(run_scenario(cfg, threads=threads), tmp_path / f"{cfg.scenario_id}_{j}",
                                  cfg.scenario_id)
            blobs.append((open(paths["rows"], "rb").read(), open(paths["summary"], "rb").read()))
        same.append(blobs[0] == blobs[1] == blobs[2])
    report(10, all(same), f"serial/serial/2-process CSV and summary identical per scenario: {same}")
