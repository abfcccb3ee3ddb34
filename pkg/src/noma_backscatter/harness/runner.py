"""Monte-Carlo runner: one row per (method, series, sweep point, trial).

CSV header (fixed)::

    scenario_id,method,series,sweep,trial,seed,status,wsr,wsr_exact,
    tag_rate_lb,tag_rate_exact,user_rates,harvested_power_dbm,
    min_power_dbm,iterations,rejected_steps,violations

``user_rates`` is a ';'-joined list (U_1 first).  ``series`` is empty when
the scenario has no series axis.  Numbers are written with ``repr`` so a
rerun with the same seed produces byte-identical files.

Channels depend only on the trial seed (``base_seed XOR trial``), so every
method, sweep point and series value sees the same draws.
"""

from concurrent.futures import ProcessPoolExecutor
import csv
import io
import json
import math
import os
import subprocess
import time
from dataclasses import dataclass

import numpy as np

from .. import __version__
from ..baselines import OrderingUnsatisfiable, baseline_split, random_beamformer, weighted_mrt
from ..channel import sample_channels, trial_seed
from ..model import BeamMode, PowerAllocation, constraint_violations, rate_report
from ..tpmin import solve_tpmin
from ..units import watts_to_dbm
from ..wsrmax import WsrStatus, solve_wsrmax

HEADER = ["scenario_id", "method", "series", "sweep", "trial", "seed", "status", "wsr", "wsr_exact",
          "tag_rate_lb", "tag_rate_exact", "user_rates", "harvested_power_dbm", "min_power_dbm",
          "iterations", "rejected_steps", "violations"]
SUMMARY_FIELDS = ["wsr", "wsr_exact", "tag_rate_lb", "tag_rate_exact", "harvested_power_dbm", "min_power_dbm"]
OK = "Ok"
RANDOM_STREAM = 0x9E3779B97F4A7C15


@dataclass
class RunResult:
    rows: list
    summary: list
    metadata: dict

    @property
    def infeasible_fraction(self):
        solved = [r for r in self.rows if not r["method"].startswith("baseline")]
        if not solved:
            return 0.0
        return sum(r["status"] != OK for r in solved) / len(solved)


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(float(x)) if math.isfinite(x) else ("nan" if math.isnan(x) else repr(x))
    return str(x)


def _row(cfg, method, series, sweep, trial, seed, **vals):
    row = dict.fromkeys(HEADER, None)
    row.update(scenario_id=cfg.scenario_id, method=method, series=series, sweep=float(sweep),
               trial=int(trial), seed=int(seed), status=OK)
    row.update(vals)
    return row


def _report_cols(rep, p_t=None):
    return dict(
        wsr=rep.wsr, wsr_exact=rep.wsr_exact,
        tag_rate_lb=rep.tag_rate_lb, tag_rate_exact=rep.tag_rate_exact,
        user_rates=";".join(repr(float(r)) for r in rep.user_rates),
        harvested_power_dbm=float(watts_to_dbm(rep.harvested_power)),
        min_power_dbm=None if p_t is None else float(watts_to_dbm(p_t)),
    )


def _viol(v):
    return ";".join(sorted(v)) if v else ""


def run_method(cfg, method, channels, seed, with_trace=False):
    """Evaluate one method on one channel draw; returns (row values, trace or None)."""
    params = cfg.system_params()
    if method.startswith("wsrmax"):
        mode = BeamMode.CONSTANT_MODULUS if method.endswith("analog") else BeamMode.DIGITAL
        res = solve_wsrmax(params, channels, cfg.p_t, mode=mode, seed=seed)
        trace = res.trace if with_trace else None
        if res.w is None:
            return dict(status=str(res.status.value), iterations=res.outer_iterations,
                        rejected_steps=res.rejected_steps), trace
        ok = res.status in (WsrStatus.CONVERGED, WsrStatus.MAX_ITER) or (
            mode is BeamMode.CONSTANT_MODULUS and res.status is WsrStatus.CONSTRAINT_VIOLATION)
        vals = _report_cols(rate_report(params, channels, res.w, res.alloc))
        vals.update(status=OK if ok else res.status.value, iterations=res.outer_iterations,
                    rejected_steps=res.rejected_steps, violations=_viol(res.violations))
        return vals, trace
    if method == "tpmin":
        res = solve_tpmin(params, channels, seed=seed)
        trace = res.trace if with_trace else None
        if res.w is None or res.status.value == "Infeasible":
            return dict(status="Infeasible", iterations=res.outer_iterations,
                        rejected_steps=res.rejected_steps), trace
        vals = _report_cols(rate_report(params, channels, res.w, res.alloc), res.p_t)
        vals.update(iterations=res.outer_iterations, rejected_steps=res.rejected_steps)
        return vals, trace
    if method.startswith("baseline"):
        rho = baseline_split(params.num_users, cfg.baseline_rho1)
        if method == "baseline-mrt":
            w = weighted_mrt(channels)
        else:
            try:
                w = random_beamformer(trial_seed(seed, RANDOM_STREAM), channels)
            except OrderingUnsatisfiable:
                return dict(status="OrderingUnsatisfiable"), None
        alloc = PowerAllocation(rho, cfg.p_t)
        vals = _report_cols(rate_report(params, channels, w, alloc))
        vals.update(iterations=0, rejected_steps=0,
                    violations=_viol(constraint_violations(params, channels, w, alloc)))
        return vals, None
    raise ValueError(f"unknown method {method!r}")


def _points(cfg):
    series = list(cfg.series_values) if cfg.series_param else [None]
    return [(s, x) for s in series for x in cfg.sweep_values]


def run_trial(cfg, trial):
    """All rows for one trial index (every method, series and sweep point)."""
    seed = trial_seed(cfg.base_seed, trial)
    rows = []
    for series, sweep in _points(cfg):
        pc = cfg.point(sweep, series)
        channels = sample_channels(seed, pc.system_params(), pc.geometry(),
                                   pc.shadowing_std_db, pc.path_loss)
        for method in cfg.methods:
            vals, _ = run_method(pc, method, channels, seed)
            rows.append(_row(cfg, method, "" if series is None else float(series), sweep, trial, seed, **vals))
    return rows


def _trial_job(args):
    cfg, trial = args
    return run_trial(cfg, trial)


def _sort_key(cfg):
    morder = {m: j for j, m in enumerate(cfg.methods)}
    return lambda r: (morder[r["method"]], r["series"] if r["series"] != "" else -math.inf,
                      r["sweep"], r["trial"])


def run_scenario(cfg, threads=1):
    t0 = time.time()
    jobs = [(cfg, t) for t in range(int(cfg.trials))]
    if threads and threads > 1:
        with ProcessPoolExecutor(max_workers=int(threads)) as pool:
            chunks = list(pool.map(_trial_job, jobs))
    else:
        chunks = [_trial_job(j) for j in jobs]
    rows = sorted((r for c in chunks for r in c), key=_sort_key(cfg))
    summary = summarize(rows)
    meta = {
        "scenario": cfg.to_dict(),
        "version": version_string(),
        "wall_time_s": time.time() - t0,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "rows": len(rows),
        "threads": int(threads or 1),
    }
    return RunResult(rows, summary, meta)


def version_string():
    try:
        here = os.path.dirname(os.path.abspath(__file__))
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=here,
                             capture_output=True, text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


# ----------------------------------------------------------------------------
# aggregation


def _mean_ci(vals):
    vals = np.asarray([v for v in vals if v is not None and math.isfinite(v)], dtype=float)
    if vals.size == 0:
        return math.nan, math.nan
    mean = math.fsum(vals) / vals.size
    if vals.size < 2:
        return mean, math.nan
    return mean, 1.96 * float(np.std(vals, ddof=1)) / math.sqrt(vals.size)


def summarize(rows):
    """Per (method, series, sweep) means and 95% CI half-widths over Ok rows."""
    groups = {}
    for r in rows:
        groups.setdefault((r["method"], r["series"], r["sweep"]), []).append(r)
    out = []
    for (method, series, sweep), rs in groups.items():
        ok = [r for r in rs if r["status"] == OK]
        entry = {"method": method, "series": series, "sweep": sweep, "trials": len(rs), "ok": len(ok)}
        for f in SUMMARY_FIELDS:
            entry[f + "_mean"], entry[f + "_ci95"] = _mean_ci([r[f] for r in ok])
        users = [[float(x) for x in r["user_rates"].split(";")] for r in ok if r["user_rates"]]
        if users:
            arr = np.array(users)
            entry["user_rates_mean"] = ";".join(repr(float(math.fsum(c) / len(c))) for c in arr.T)
        else:
            entry["user_rates_mean"] = ""
        out.append(entry)
    return out


def summary_lookup(summary, method, sweep, series=""):
    for s in summary:
        if s["method"] == method and s["sweep"] == float(sweep) and (s["series"] == series or
                                                                      (series != "" and s["series"] == float(series))):
            return s
    raise KeyError((method, sweep, series))


# ----------------------------------------------------------------------------
# I/O


def rows_to_csv(rows):
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(HEADER)
    for r in rows:
        wr.writerow([_fmt(r[h]) for h in HEADER])
    return buf.getvalue()


def summary_to_csv(summary):
    if not summary:
        return ""
    keys = list(summary[0])
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(keys)
    for s in summary:
        wr.writerow([_fmt(s[k]) for k in keys])
    return buf.getvalue()


def write_outputs(result, out_dir, name):
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "rows": os.path.join(out_dir, f"{name}.csv"),
        "summary": os.path.join(out_dir, f"{name}_summary.csv"),
        "metadata": os.path.join(out_dir, f"{name}_meta.json"),
    }
    with open(paths["rows"], "w", newline="") as fh:
        fh.write(rows_to_csv(result.rows))
    with open(paths["summary"], "w", newline="") as fh:
        fh.write(summary_to_csv(result.summary))
    with open(paths["metadata"], "w") as fh:
        json.dump(result.metadata, fh, indent=2, sort_keys=True)
    return paths


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run_trace(cfg, trial=0):
    """Per-iteration records for every method / point of one trial."""
    seed = trial_seed(cfg.base_seed, trial)
    out = []
    for series, sweep in _points(cfg):
        pc = cfg.point(sweep, series)
        channels = sample_channels(seed, pc.system_params(), pc.geometry(), pc.shadowing_std_db, pc.path_loss)
        for method in cfg.methods:
            if method.startswith("baseline"):
                continue
            _, trace = run_method(pc, method, channels, seed, with_trace=True)
            for t in trace or []:
                rec = {"method": method, "series": "" if series is None else series, "sweep": sweep,
                       "iteration": t.iteration}
                if hasattr(t, "wsr"):
                    rec.update(block=t.block, objective=t.wsr, accepted=t.accepted,
                               sinrs=";".join(repr(float(x)) for x in t.sinrs))
                else:
                    rec.update(block=t.step, objective=float(watts_to_dbm(t.p_t)), accepted=t.accepted,
                               sinrs="", rank_one=t.rank_one, randomizations=t.randomizations)
                out.append(rec)
    return out
