"""Command-line entry point.

Exit codes: 0 ok, 2 configuration error, 3 too many infeasible trials.
"""

import argparse
import csv
import sys

from .harness.compare import compare_runs
from .harness.runner import read_csv, run_scenario, run_trace, write_outputs
from .harness.scenarios import ConfigError, list_scenarios, load_config

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 2, 3


def build_parser():
    ap = argparse.ArgumentParser(prog="noma-bsc", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and write CSV + metadata")
    run.add_argument("--scenario", required=True, help="built-in id or YAML/JSON file")
    run.add_argument("--trials", type=int)
    run.add_argument("--seed", type=int, help="64-bit base seed")
    run.add_argument("--out", default="results")
    run.add_argument("--threads", type=int, default=1)
    run.add_argument("--max-infeasible", type=float, default=0.05,
                     help="fraction of infeasible solver trials that triggers exit code 3")

    sub.add_parser("list-scenarios", help="print the built-in scenarios")

    cmp_ = sub.add_parser("compare", help="diff two result CSV files")
    cmp_.add_argument("a")
    cmp_.add_argument("b")
    cmp_.add_argument("--rel-tol", type=float, default=0.0)

    tr = sub.add_parser("trace", help="per-iteration convergence dump for one trial")
    tr.add_argument("--scenario", required=True)
    tr.add_argument("--trial", type=int, default=0)
    tr.add_argument("--seed", type=int)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "list-scenarios":
            for sid, desc in list_scenarios().items():
                print(f"{sid:8s} {desc}")
            return EXIT_OK
        if args.command == "compare":
            diffs = compare_runs(read_csv(args.a), read_csv(args.b), args.rel_tol)
            for d in diffs:
                print(d["kind"], "/".join(d["key"]), d["fields"])
            print(f"{len(diffs)} differing rows")
            return EXIT_OK
        overrides = {}
        if getattr(args, "trials", None) is not None:
            overrides["trials"] = args.trials
        if args.seed is not None:
            overrides["seed_override"] = args.seed
        seed = overrides.pop("seed_override", None)
        cfg = load_config(args.scenario, **overrides)
        if seed is not None:
            cfg.base_seed = seed
            cfg.validate()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, csv.Error) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "trace":
        recs = run_trace(cfg, args.trial)
        if recs:
            keys = list(dict.fromkeys(k for r in recs for k in r))
            wr = csv.DictWriter(sys.stdout, fieldnames=keys, lineterminator="\n")
            wr.writeheader()
            wr.writerows(recs)
        return EXIT_OK

    result = run_scenario(cfg, threads=args.threads)
    paths = write_outputs(result, args.out, cfg.scenario_id)
    frac = result.infeasible_fraction
    print(f"{cfg.scenario_id}: {len(result.rows)} rows -> {paths['rows']} "
          f"(infeasible fraction {frac:.3f})")
    return EXIT_INFEASIBLE if frac > args.max_infeasible else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
