"""Command line front-end: ``tsloc {validate,simulate,estimate,montecarlo}``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from tsloc.dataset import Dataset
from tsloc.errors import LocalizationError, ScenarioError
from tsloc.estimate.refine import EstimatorConfig, localize
from tsloc.harness import report
from tsloc.harness.runner import run_trials, simulate_trial, summarize
from tsloc.harness.scenario import SCHEMA_HELP, bundled_scenario_path, load_scenario
from tsloc.simulate import NoisyPrior

EXIT_OK, EXIT_SCENARIO, EXIT_RUNTIME = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _scenario(args, trials=None):
    src = args.scenario
    if src is None:
        raise ScenarioError("--scenario is required")
    if not Path(src).exists() and bundled_scenario_path(src).exists():
        src = bundled_scenario_path(src)
    scenario = load_scenario(Path(src))
    if trials is not None or getattr(args, "seed", None) is not None:
        scenario = scenario.with_overrides(trials=trials, seed=args.seed)
    return scenario


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _priors_path(args) -> Path | None:
    if args.priors:
        return Path(args.priors)
    if args.out:
        out = Path(args.out)
        return out.with_name(out.stem + ".priors.json")
    return None


def cmd_validate(args) -> int:
    scenario = _scenario(args)
    scene = scenario.scene
    sys.stdout.write(
        json.dumps(
            {
                "valid": True,
                "name": scenario.name,
                "nodes": len(scene.ids),
                "dimension": scene.dimension,
                "links": len(scenario.reach),
                "trials": scenario.trials,
                "seed": scenario.seed,
            },
            sort_keys=True,
        )
        + "\n"
    )
    return EXIT_OK


def cmd_simulate(args) -> int:
    scenario = _scenario(args)
    sim = simulate_trial(scenario, args.trial)
    if args.format == "json":
        _emit(sim.dataset.to_json(), args.out)
    else:
        _emit(sim.dataset.to_csv(), args.out)
    priors_doc = json.dumps({"priors": [p.to_dict() for p in sim.priors]}, indent=2) + "\n"
    path = _priors_path(args)
    if path is not None:
        path.write_text(priors_doc, encoding="utf-8")
    else:
        sys.stderr.write(priors_doc)
    return EXIT_OK


def _load_priors(path) -> list[NoisyPrior]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    items = doc["priors"] if isinstance(doc, dict) else doc
    return [NoisyPrior.from_dict(d) for d in items]


def cmd_estimate(args) -> int:
    if not args.dataset or not args.priors:
        raise _UsageError("estimate needs --dataset and --priors")
    try:
        dataset = Dataset.load(args.dataset)
        priors = _load_priors(args.priors)
    except (OSError, KeyError, ValueError) as exc:
        raise ScenarioError(f"cannot read inputs: {exc}") from None
    config = _scenario(args).estimator if args.scenario else EstimatorConfig()
    result = localize(dataset, priors, config)
    estimates = [result.estimates[n].to_dict() for n in sorted(result.estimates)]
    if args.format == "csv":
        dim = len(estimates[0]["pos"]) if estimates else 0
        header = ["node", *"xyz"[:dim], "bias", "residual_rms", "iterations", "converged", "excluded_anchors"]
        rows = [
            [e["node"], *(repr(v) for v in e["pos"]), repr(e["bias"]), repr(e["residual_rms"]),
             e["iterations"], int(e["converged"]), ";".join(e["excluded_anchors"])]
            for e in estimates
        ]
        _emit(_csv(rows, header), args.out)
    else:
        doc = {
            "estimates": estimates,
            "drift_reference": result.drift_reference,
            "drifts": {k: v.relative_drift for k, v in sorted(result.drifts.items())},
        }
        _emit(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def cmd_montecarlo(args) -> int:
    scenario = _scenario(args, trials=args.trials)
    trials = run_trials(scenario, concurrency=args.concurrency)
    summary = summarize(scenario, trials)
    if args.format == "csv":
        rows = [
            [n, s["role"], s["n"], repr(s["rmse_m"]), repr(s["median_m"]), repr(s["p95_m"])]
            for n, s in summary.nodes.items()
        ]
        _emit(_csv(rows, ["node", "role", "n", "rmse_m", "median_m", "p95_m"]), args.out)
    else:
        _emit(summary.to_json(), args.out)
    if args.report:
        report.write_report(args.report, scenario, trials, summary)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tsloc", description="Cooperative localization from reception timestamps.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, scenario_required=True):
        sp.add_argument("--scenario", required=scenario_required, help="scenario JSON path or bundled name")
        sp.add_argument("--seed", type=int, default=None, help="override the master seed")
        sp.add_argument("--out", default=None, help="output file (default: stdout)")
        sp.add_argument("--format", choices=("csv", "json"), default="json")

    v = sub.add_parser("validate", help="check a scenario file")
    v.add_argument("--scenario", required=True)
    v.add_argument("--seed", type=int, default=None)

    s = sub.add_parser("simulate", help="simulate one trial and write its reception dataset")
    common(s)
    s.set_defaults(format="csv")
    s.add_argument("--trial", type=int, default=0, help="trial index (default 0)")
    s.add_argument("--priors", default=None, help="where to write the priors (default: next to --out)")

    e = sub.add_parser("estimate", help="localize from a dataset and priors")
    common(e, scenario_required=False)
    e.add_argument("--dataset", required=True)
    e.add_argument("--priors", required=True)

    m = sub.add_parser("montecarlo", help="run seeded trials and summarize")
    common(m)
    m.add_argument("--trials", type=int, default=None, help="override the trial count")
    m.add_argument("--concurrency", type=int, default=1, help="worker processes")
    m.add_argument("--report", default=None, help="directory for tables and figures")
    return p


_COMMANDS = {
    "validate": cmd_validate,
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "montecarlo": cmd_montecarlo,
}


def _error_report(exc: Exception, code: int) -> None:
    doc = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    sys.stdout.write(json.dumps(doc, sort_keys=True) + "\n")


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n\n{SCHEMA_HELP}")
        return EXIT_SCENARIO
    try:
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n\n{SCHEMA_HELP}")
        return EXIT_SCENARIO
    except ScenarioError as exc:
        _error_report(exc, EXIT_SCENARIO)
        sys.stderr.write(SCHEMA_HELP)
        return EXIT_SCENARIO
    except LocalizationError as exc:
        _error_report(exc, EXIT_RUNTIME)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
