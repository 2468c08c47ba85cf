"""Command line entry point: ``pruneopt bench {run,truth,tables}``."""
from __future__ import annotations

import argparse
import csv
import glob
import json
import logging
import os
import sys
from typing import Dict, List, Optional

from . import config as cfgmod
from .drug import ground_truth, DrugParams
from .orchestrator import Aggregate, run_replications
from .tables import emit_tables

log = logging.getLogger("pruneopt")

REPLICATION_FIELDS = ["replication", "selected", "epsOptimal", "gradEvals", "funcEvals"]
AGGREGATE_FIELDS = ["objective", "method", "T", "replications", "probability", "probability_hw",
                    "gradient", "gradient_hw", "function", "function_hw", "best_survival"]


def _num(v) -> str:
    return "" if v is None else repr(v)


def cell_name(cfg) -> str:
    return f"{cfg.objective}_{cfg.method}_T{cfg.T}"


def write_cell(out: str, cfg, reports, agg: Aggregate, verbose: bool = False) -> Dict[str, str]:
    os.makedirs(out, exist_ok=True)
    base = os.path.join(out, cell_name(cfg))
    paths = {"replications": base + "_replications.csv", "aggregate": base + "_aggregate.csv"}
    with open(paths["replications"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPLICATION_FIELDS)
        for r in reports:
            eo = "" if r.eps_optimal is None else int(r.eps_optimal)
            w.writerow([r.replication, r.selected, eo, r.grad_evals, r.func_evals])
    with open(paths["aggregate"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGGREGATE_FIELDS)
        w.writerow([cfg.objective, cfg.method, cfg.T, agg.replications, _num(agg.probability),
                    _num(agg.probability_hw), _num(agg.gradient), _num(agg.gradient_hw),
                    _num(agg.function), _num(agg.function_hw), _num(agg.best_survival)])
    if verbose:
        paths["reports"] = base + "_reports.jsonl"
        with open(paths["reports"], "w", encoding="utf-8") as fh:
            for r in reports:
                fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")
    return paths


def read_aggregates(out: str) -> Dict[str, Dict]:
    """``{objective: {(method, T): Aggregate}}`` from every aggregate CSV under ``out``."""
    grids: Dict[str, Dict] = {}
    for path in sorted(glob.glob(os.path.join(out, "*_aggregate.csv"))):
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                def val(key):
                    return float(row[key]) if row.get(key) else None
                agg = Aggregate(int(row["replications"]), val("probability"), val("probability_hw"),
                                val("gradient"), val("gradient_hw"), val("function"),
                                val("function_hw"), val("best_survival"))
                grids.setdefault(row["objective"], {})[(row["method"], int(row["T"]))] = agg
    return grids


def write_tables(out: str, stages=None) -> List[str]:
    written = []
    for objective, grid in sorted(read_aggregates(out).items()):
        rendered = emit_tables(grid, stages=stages)
        for ext, key in (("csv", "csv"), ("md", "markdown")):
            path = os.path.join(out, f"table_{objective}.{ext}")
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(rendered[key])
            written.append(path)
    return written


def _settings(args) -> tuple:
    if args.config:
        run, drug, output = cfgmod.load_config(args.config)
    else:
        run, drug, output = {}, {}, None
    if args.preset:
        run, drug = cfgmod.apply_preset(args.preset, run, drug)
    overrides = {"method": args.method, "objective": args.objective, "T": args.stages,
                 "seed": args.seed, "replications": args.reps, "K": args.K}
    run.update({k: v for k, v in overrides.items() if v is not None})
    if args.crn:
        run["use_crn"] = True
    return run, drug, args.out or output or "out"


def cmd_run(args) -> int:
    run, drug, out = _settings(args)
    if args.grid:
        cells = [(m, T) for m in ("exact", "asymptotic") for T in range(1, 6)]
    else:
        cells = [(run.get("method", "exact"), run.get("T", 1))]
    for method, T in cells:
        cfg = cfgmod.build({**run, "method": method, "T": T}, drug)

        def progress(rep, rpt, cfg=cfg):
            log.info("%s rep %d: selected %d grad %d func %d", cell_name(cfg), rep,
                     rpt.selected, rpt.grad_evals, rpt.func_evals)

        reports, agg = run_replications(cfg, cfgmod.DrugFactory(cfg), jobs=args.jobs, progress=progress)
        paths = write_cell(out, cfg, reports, agg, args.verbose)
        print(f"{cell_name(cfg)}: P={agg.probability} grad={agg.gradient:.6g} "
              f"func={agg.function:.6g} -> {paths['aggregate']}")
    if args.grid:
        for path in write_tables(out):
            print(f"table -> {path}")
    return 0


def cmd_truth(args) -> int:
    _, drug, _ = cfgmod.load_config(args.config) if args.config else ({}, {}, None)
    if args.K is not None:
        drug["K"] = args.K
    params = DrugParams(**drug)
    objectives = ["same", "different"] if args.objective is None else [args.objective]
    payload = {m: ground_truth(m, args.eps, params) for m in objectives}
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def cmd_tables(args) -> int:
    written = write_tables(args.out)
    if not written:
        print(f"no aggregate CSVs under {args.out}", file=sys.stderr)
        return 1
    for path in written:
        print(f"table -> {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pruneopt", description="Multi-stage pruning and optimisation benchmark")
    top = p.add_subparsers(dest="group", required=True)
    bench = top.add_parser("bench", help="drug-dosage benchmark")
    sub = bench.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one benchmark cell or the full grid")
    r.add_argument("--config", help="INI configuration file")
    r.add_argument("--preset", choices=sorted(cfgmod.PRESETS))
    r.add_argument("--method", choices=["exact", "asymptotic"])
    r.add_argument("--objective", choices=["same", "different"])
    r.add_argument("--stages", type=int, help="number of stages T")
    r.add_argument("--seed", type=int)
    r.add_argument("--reps", type=int, help="macro-replications")
    r.add_argument("--K", type=int, help="number of systems")
    r.add_argument("--crn", action="store_true", help="common random numbers in pruning")
    r.add_argument("--grid", action="store_true", help="T=1..5 for both methods, then tables")
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--out", help="output directory")
    r.add_argument("--verbose", action="store_true", help="also write per-replication reports (JSON lines)")
    r.set_defaults(func=cmd_run)

    t = sub.add_parser("truth", help="print analytic ground truth")
    t.add_argument("--config")
    t.add_argument("--objective", choices=["same", "different"])
    t.add_argument("--eps", type=float, default=0.1)
    t.add_argument("--K", type=int)
    t.set_defaults(func=cmd_truth)

    tb = sub.add_parser("tables", help="aggregate CSVs to tables")
    tb.add_argument("--out", default="out")
    tb.set_defaults(func=cmd_tables)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    verbose = getattr(args, "verbose", False)
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
