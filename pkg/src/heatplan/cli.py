"""Command-line entry point: ``heatplan {solve,sweep,validate,export-lp,synth}``."""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path

from . import analysis
from . import io as hio
from .model import TECHNOLOGIES, InvalidInputError
from .optimizer import GranularityError, Plan, build_plan, export_lp, solve_deterministic, solve_robust
from .uncertainty import UncertaintyBox, worst_case_prices

EXIT_OK, EXIT_INVALID, EXIT_USAGE = 0, 1, 2


def _budget(text: str) -> float:
    if text.strip().lower() in ("inf", "infinity", "unlimited"):
        return math.inf
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number or 'inf': {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--params", type=Path, default=None, help="parameter JSON (default: bundled reference set)")
    common.add_argument("--cells", type=Path, default=None, help="cell CSV")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("--seed", type=int, default=0, help="random seed")

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--delta-el", type=float, default=None, help="electricity price deviation (fraction)")
    model.add_argument("--delta-h2", type=float, default=None, help="hydrogen price deviation (fraction)")
    model.add_argument("--budget", type=_budget, default=None, help="DE expansion budget in kW, or 'inf'")
    model.add_argument("--generator-lifetime", type=float, default=None, help="years")
    model.add_argument("--grid-amortization", type=float, default=None, help="years")
    model.add_argument("--solver", choices=["dp", "bb", "brute"], default="dp")

    parser = argparse.ArgumentParser(prog="heatplan", description="Robust heating technology planning per grid cell")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common, model], help="solve the robust (default) or nominal problem")
    p.add_argument("--nominal", action="store_true", help="deterministic solve at nominal prices")

    p = sub.add_parser("sweep", parents=[common, model], help="sweep the hydrogen price deviation")
    p.add_argument("--h2-from", type=float, default=0.0)
    p.add_argument("--h2-to", type=float, default=2.0)
    p.add_argument("--step", type=float, default=0.1)

    p = sub.add_parser("validate", parents=[common, model], help="Monte Carlo check of a robust plan")
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--plan", type=Path, default=None, help="plan CSV to check (default: solve robust)")

    p = sub.add_parser("export-lp", parents=[common, model], help="write the MILP as an LP file")
    p.add_argument("--nominal", action="store_true", help="use nominal instead of worst-case prices")
    p.add_argument("--lockin-threshold", type=float, default=0.0, help="Q of the big-M lock-in rows (kW)")

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic cell CSV")
    p.add_argument("--n", type=int, default=750)
    p.add_argument("--profile", choices=["hamburg_like", "uniform"], default="hamburg_like")
    return parser


def _resolve(args) -> tuple[hio.ParamsBundle, UncertaintyBox]:
    bundle = hio.load_params(args.params) if args.params else hio.table1()
    params = bundle.params
    changes = {}
    if args.budget is not None:
        changes["expansion_budget"] = args.budget
    if args.generator_lifetime is not None:
        changes["generator_lifetime"] = args.generator_lifetime
    if args.grid_amortization is not None:
        changes["grid_amortization"] = args.grid_amortization
    if changes:
        params = dataclasses.replace(params, **changes)
    box = UncertaintyBox(
        bundle.nominal,
        bundle.delta_electricity if args.delta_el is None else args.delta_el,
        bundle.delta_hydrogen if args.delta_h2 is None else args.delta_h2,
    )
    bundle = dataclasses.replace(bundle, params=params, delta_electricity=box.delta_electricity,
                                 delta_hydrogen=box.delta_hydrogen)
    return bundle, box


def _print_config(args, bundle: hio.ParamsBundle, extra: dict | None = None) -> None:
    p = bundle.params
    items = {
        "command": args.command,
        "params": str(args.params) if args.params else "table1 (bundled)",
        "cells": str(args.cells),
        "delta_el": bundle.delta_electricity,
        "delta_h2": bundle.delta_hydrogen,
        "budget_kw": p.expansion_budget,
        "generator_lifetime_a": p.generator_lifetime,
        "grid_amortization_a": p.grid_amortization,
        "solver": args.solver,
        "seed": args.seed,
    }
    items.update(extra or {})
    print("config: " + " ".join(f"{k}={v}" for k, v in items.items()))


def _print_summary(plan: Plan, cells) -> None:
    capacity = analysis.capacity_by_technology(plan, cells)
    print(f"{'tech':<5}{'cells':>7}{'capacity_MW':>14}{'annual_MEUR':>14}{'capex_MEUR':>13}")
    for tech in TECHNOLOGIES:
        ids = [cid for cid, t in plan.assignment.items() if t is tech]
        annual = math.fsum(plan.breakdowns[c].total for c in ids)
        capex = math.fsum(plan.breakdowns[c].infrastructure_capex for c in ids)
        print(f"{tech.value:<5}{len(ids):>7}{capacity[tech] / 1e3:>14.3f}{annual / 1e6:>14.3f}{capex / 1e6:>13.3f}")
    budget = plan.expansion_budget
    used = f"{plan.de_capacity_used / budget:.1%}" if 0 < budget < math.inf else "n/a"
    print(f"objective_EUR_a={plan.objective!r} de_capacity_kW={plan.de_capacity_used!r} budget_utilization={used}")


def _need_cells(parser, args):
    if args.cells is None:
        parser.error(f"{args.command}: --cells is required")
    return hio.load_cells(args.cells)


def _run(parser, args) -> int:
    out: Path = args.out

    if args.command == "synth":
        print(f"config: command=synth n={args.n} profile={args.profile} seed={args.seed}")
        cells = hio.synthesize_instance(args.n, args.seed, args.profile)
        path = hio.write_text(out / "cells.csv", hio.format_cells(cells))
        print(f"wrote {path}")
        return EXIT_OK

    cells = _need_cells(parser, args)
    bundle, box = _resolve(args)
    params = bundle.params

    if args.command == "solve":
        _print_config(args, bundle, {"mode": "nominal" if args.nominal else "robust"})
        if args.nominal:
            plan = solve_deterministic(cells, params, bundle.nominal, args.solver)
        else:
            plan = solve_robust(cells, params, box, args.solver)
        written = [hio.write_text(out / "plan.csv", hio.export_plan(plan, cells, "csv"))]
        if cells and all(cell.centroid is not None for cell in cells):
            written.append(hio.write_text(out / "plan.geojson", hio.export_plan(plan, cells, "geojson")))
        _print_summary(plan, cells)
        for path in written:
            print(f"wrote {path}")
        return EXIT_OK

    if args.command == "sweep":
        deltas = analysis.deviation_grid(args.h2_from, args.h2_to, args.step)
        workers = analysis.resolve_workers(None)
        _print_config(args, bundle, {"h2_deltas": f"{deltas[0]}..{deltas[-1]}/{len(deltas)}",
                                     "threads": workers})
        records = analysis.sweep_deviation(cells, params, bundle.nominal, deltas, box.delta_electricity,
                                           args.solver, workers)
        print(f"{'d_h2':>6}" + "".join(f"{t.value + '_MW':>10}" for t in TECHNOLOGIES)
              + f"{'capex_MEUR':>13}{'objective_MEUR':>16}")
        for r in records:
            print(f"{r.delta_hydrogen:>6.2f}" + "".join(f"{r.capacity_by_tech[t] / 1e3:>10.1f}" for t in TECHNOLOGIES)
                  + f"{r.infrastructure_capex_total / 1e6:>13.2f}{r.objective / 1e6:>16.3f}")
        path = hio.write_text(out / "sweep.csv", analysis.sweep_to_csv(records))
        print(f"wrote {path}")
        return EXIT_OK

    if args.command == "validate":
        _print_config(args, bundle, {"samples": args.samples, "plan": str(args.plan)})
        if args.plan is not None:
            plan = build_plan(cells, hio.load_assignment(args.plan), params, worst_case_prices(box))
        else:
            plan = solve_robust(cells, params, box, args.solver)
        report = analysis.validate_plan(plan, cells, params, box, args.samples, args.seed)
        text = json.dumps(report.to_dict(), indent=2) + "\n"
        path = hio.write_text(out / "validation.json", text)
        print(f"robust_objective={report.robust_objective!r} max_realized={report.max_realized_cost!r} "
              f"margin={report.margin!r} violations={report.violations}")
        print(f"nominal_plan_max_realized={report.nominal_plan_max_realized!r} "
              f"nominal_regret_max={report.nominal_regret_max!r}")
        print(f"wrote {path}")
        return EXIT_OK if report.margin >= 0 else EXIT_INVALID

    if args.command == "export-lp":
        prices = bundle.nominal if args.nominal else worst_case_prices(box)
        _print_config(args, bundle, {"prices": "nominal" if args.nominal else "worst-case",
                                     "lockin_threshold": args.lockin_threshold})
        path = hio.write_text(out / "model.lp", export_lp(cells, params, prices, args.lockin_threshold))
        print(f"wrote {path}")
        return EXIT_OK

    parser.error(f"unknown command {args.command}")
    return EXIT_USAGE


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _run(parser, args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except (InvalidInputError, GranularityError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
