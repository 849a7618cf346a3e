"""Command-line entry point: solve, sweep, synth-sf, certify, theil."""

from __future__ import annotations

import argparse
import json
import os
import sys
from contextlib import nullcontext
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .equilibrium import best_response_iterate, default_initial_strategies
from .equity import equity_report
from .errors import ConfigError, ModalGameError, ParseError, SchemaVersionError, ValidationError
from .scenario import load_scenario, save_scenario
from .strategies import TncStrategy, TransitStrategy
from .sweep import (
    AXES, CSV_COLUMNS, SweepConfig, SweepResults, _flat_row, certificate_dict, export_results, run_sweep, solve_point,
)
from .synthetic import SyntheticConfig, synthesize_sf_scenario
from .transit import certify_concavity

EXIT_OK, EXIT_INVALID, EXIT_NOT_CONVERGED = 0, 2, 3
SOLUTION_SCHEMA_VERSION = 1


def _threads(arg: int | None) -> int:
    if arg is not None:
        return max(1, int(arg))
    env = os.environ.get("MODALGAME_THREADS")
    return max(1, int(env)) if env and env.isdigit() else 1


def _thread_limit(n: int):
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return nullcontext()
    return threadpool_limits(limits=n)


def _parse_values(text: str) -> list[float]:
    out = []
    for tok in text.replace(" ", "").split(","):
        if not tok:
            continue
        if tok.lower() in ("inf", "none", "off"):
            out.append(float("inf"))
            continue
        try:
            out.append(float(tok))
        except ValueError:
            raise ValidationError(f"not a number: {tok!r}", "values") from None
    if not out:
        raise ValidationError("no values given", "values")
    return out


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load_solution(path):
    try:
        d = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read solution {path}: {exc}") from exc
    try:
        return TncStrategy.from_dict(d["tnc"]), TransitStrategy.from_dict(d["transit"])
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"solution file lacks strategies: {exc}", "tnc") from None


def _sweep_config(args, expost=True) -> SweepConfig:
    return SweepConfig(sigma=args.sigma, max_iter=args.max_iter, partition=args.partition, expost=expost,
                       initial_variant=args.initial_variant)


def cmd_solve(args) -> int:
    scenario = load_scenario(args.scenario)
    rec, _ = solve_point(scenario, None, _sweep_config(args, expost=not args.no_expost))
    if rec.status == "failed":
        print(f"solve failed: {rec.error}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    if args.format == "csv":
        res = SweepResults("none", [rec], rec.theil.get("shift", 0.0), scenario.name)
        if args.out:
            export_results(res, args.out, "csv")
        else:
            row = _flat_row("none", rec)
            print(",".join(CSV_COLUMNS))
            print(",".join(str(row.get(c, "")) for c in CSV_COLUMNS))
    else:
        body = {"schema_version": SOLUTION_SCHEMA_VERSION, "kind": "solution", "scenario": scenario.name}
        body.update({k: v for k, v in asdict(rec).items() if k != "value"})
        _emit(json.dumps(body, indent=1) + "\n", args.out)
    eps = rec.epsilon.get("epsilon_rel", float("nan"))
    print(f"converged={rec.converged} iterations={rec.iterations} profit={rec.metrics['tnc_profit']:.2f} "
          f"ridership={rec.metrics['transit_ridership']:.2f} epsilon_rel={eps:.4g}", file=sys.stderr)
    return EXIT_OK if rec.converged else EXIT_NOT_CONVERGED


def cmd_sweep(args) -> int:
    scenario = load_scenario(args.scenario)
    res = run_sweep(scenario, args.axis, _parse_values(args.values), _sweep_config(args, expost=not args.no_expost))
    if args.out:
        export_results(res, args.out, args.format)
    elif args.format == "json":
        print(json.dumps(res.to_dict(), indent=1))
    else:
        print(",".join(CSV_COLUMNS))
        for r in res.records:
            row = _flat_row(res.axis, r)
            print(",".join(str(row.get(c, "")) for c in CSV_COLUMNS))
    bad = [r for r in res.records if r.status != "ok"]
    for r in bad:
        print(f"point {r.value}: {r.status} {r.error or ''}", file=sys.stderr)
    return EXIT_OK if not bad else EXIT_NOT_CONVERGED


def cmd_synth(args) -> int:
    cfg = SyntheticConfig(c_av=args.c_av) if args.c_av is not None else SyntheticConfig()
    scenario = synthesize_sf_scenario(args.seed, cfg)
    if args.out:
        save_scenario(scenario, args.out)
    else:
        from .scenario import dumps_scenario

        sys.stdout.write(dumps_scenario(scenario))
    return EXIT_OK


def _strategies_for(args, scenario):
    if args.solution:
        return _load_solution(args.solution), True
    tnc0, tr0 = default_initial_strategies(scenario, args.initial_variant)
    cand = best_response_iterate(tnc0, tr0, scenario, args.sigma, args.max_iter)
    return (cand.tnc, cand.transit), cand.converged


def cmd_certify(args) -> int:
    scenario = load_scenario(args.scenario)
    (tnc, _), converged = _strategies_for(args, scenario)
    cert = certify_concavity(scenario, tnc)
    body = {"schema_version": SOLUTION_SCHEMA_VERSION, "kind": "certificate", "scenario": scenario.name,
            **certificate_dict(cert), "n_bar_per_hour": np.asarray(cert.n_bar).tolist()}
    _emit(json.dumps(body, indent=1) + "\n", args.out)
    print(f"holds={cert.holds} n_bar_max={np.max(cert.n_bar):.4g} threshold={cert.threshold:.4g}", file=sys.stderr)
    return EXIT_OK if converged else EXIT_NOT_CONVERGED


def cmd_theil(args) -> int:
    scenario = load_scenario(args.scenario)
    (tnc, transit), converged = _strategies_for(args, scenario)
    agg, rep = equity_report(scenario, tnc, transit, shift=args.shift)
    body = {
        "schema_version": SOLUTION_SCHEMA_VERSION,
        "kind": "theil",
        "scenario": scenario.name,
        **rep.to_dict(),
        "accessibility_by_class": agg.A_k.tolist(),
        "accessibility_by_zone_class": agg.A_ik.tolist(),
        "empty_strata": agg.empty_strata,
    }
    _emit(json.dumps(body, indent=1) + "\n", args.out)
    print(f"T={rep.T:.6g} within={rep.within:.6g} between={rep.between:.6g} shift={rep.shift:.4g}", file=sys.stderr)
    return EXIT_OK if converged else EXIT_NOT_CONVERGED


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="modalgame", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--threads", type=int, default=None, help="worker threads (env MODALGAME_THREADS)")
    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--scenario", required=True, help="scenario JSON file")
    solver.add_argument("--sigma", type=float, default=1e-3)
    solver.add_argument("--max-iter", type=int, default=50)
    solver.add_argument("--partition", choices=("pairwise", "singleton", "whole"), default="pairwise")
    solver.add_argument("--initial-variant", type=int, default=0, help="which preset initial guess to start from")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", parents=[common, solver], help="one equilibrium plus epsilon report")
    s.add_argument("--format", choices=("json", "csv"), default="json")
    s.add_argument("--no-expost", action="store_true", help="skip the ex-post bounds")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("sweep", parents=[common, solver], help="equilibria over one parameter axis")
    s.add_argument("--axis", choices=AXES, required=True)
    s.add_argument("--values", required=True, help="comma-separated values, 'inf' disables w_a_max")
    s.add_argument("--format", choices=("json", "csv"), default="csv")
    s.add_argument("--no-expost", action="store_true")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("synth-sf", parents=[common], help="write the synthetic San Francisco scenario")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--c-av", type=float, default=None)
    s.set_defaults(func=cmd_synth)

    for name, func, extra in (("certify", cmd_certify, "concavity certificate"), ("theil", cmd_theil, "equity")):
        s = sub.add_parser(name, parents=[common, solver], help=f"{extra} report at a solved state")
        s.add_argument("--solution", help="solution JSON from `solve` (default: solve first)")
        s.add_argument("--format", choices=("json",), default="json")
        if name == "theil":
            s.add_argument("--shift", type=float, default=None, help="accessibility shift (default: scenario-level)")
        s.set_defaults(func=func)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with _thread_limit(_threads(args.threads)):
            return args.func(args)
    except (ValidationError, ParseError, SchemaVersionError, ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ModalGameError as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED


if __name__ == "__main__":
    sys.exit(main())
