"""Diff two result tables and compute paired deltas between methods."""

import math

KEY = ("method", "series", "sweep", "trial")
IGNORE = ("scenario_id",)


def _key(row):
    return tuple(str(row[k]) for k in KEY)


def _same(a, b, rel_tol):
    if a == b:
        return True
    try:
        x, y = float(a), float(b)
    except (TypeError, ValueError):
        return False
    if math.isnan(x) and math.isnan(y):
        return True
    return math.isclose(x, y, rel_tol=rel_tol, abs_tol=rel_tol)


def compare_runs(rows_a, rows_b, rel_tol=0.0):
    """Row-level differences between two tables (lists of dicts keyed by the CSV header).

    Returns a list of ``{"key", "kind", "fields"}`` entries; empty when the
    tables agree.  ``kind`` is ``changed``, ``only_a`` or ``only_b``.
    """
    a = {_key(r): r for r in rows_a}
    b = {_key(r): r for r in rows_b}
    diffs = []
    for k in sorted(set(a) | set(b)):
        if k not in b:
            diffs.append({"key": k, "kind": "only_a", "fields": {}})
        elif k not in a:
            diffs.append({"key": k, "kind": "only_b", "fields": {}})
        else:
            changed = {f: (a[k][f], b[k][f]) for f in a[k]
                       if f not in IGNORE and not _same(a[k][f], b[k].get(f), rel_tol)}
            if changed:
                diffs.append({"key": k, "kind": "changed", "fields": changed})
    return diffs


def paired_deltas(rows, method_a, method_b, field="wsr"):
    """Per (series, sweep) mean of field(method_a) - field(method_b) over trials where both are Ok."""
    by = {}
    for r in rows:
        by[(r["method"], str(r["series"]), str(r["sweep"]), str(r["trial"]))] = r
    out = {}
    for (m, s, x, t), ra in by.items():
        if m != method_a:
            continue
        rb = by.get((method_b, s, x, t))
        if rb is None or ra["status"] != "Ok" or rb["status"] != "Ok":
            continue
        out.setdefault((s, x), []).append(float(ra[field]) - float(rb[field]))
    return {k: (math.fsum(v) / len(v), min(v), len(v)) for k, v in sorted(out.items())}
