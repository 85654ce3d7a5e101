"""Command-line front end.

Exit codes: 0 success / identified / consistent, 1 input error,
2 not identified or a lint finding, 3 unknown.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import engine, oracle
from .examples import resolve_graph
from .graph import GraphFormatError, UnknownVertexError, VertexKind, to_dot, validate
from .law import (ConsistencyError, DiscreteLaw, LawFormatError, ObservedLaw,
                  observed_law)
from .model import check_membership
from .swig import (SwigError, build_swig, detect_stitch_cycle, has_undefined_counterfactual,
                   split_treatment)

OK, INPUT_ERROR, NEGATIVE, UNKNOWN = 0, 1, 2, 3
VERDICT_CODE = {engine.IDENTIFIED: OK, engine.NOT_IDENTIFIED: NEGATIVE, engine.UNKNOWN: UNKNOWN}


class InputError(Exception):
    pass


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False)


def _graph(path):
    try:
        return resolve_graph(path)
    except FileNotFoundError:
        raise InputError(f"{path}: no such file or bundled example") from None
    except GraphFormatError as err:
        raise InputError(str(err)) from None


def _counterfactual(graph, name: str) -> str:
    """Accept either a counterfactual name or its proxy's name."""
    if name not in graph:
        raise InputError(f"unknown vertex {name!r}")
    if graph.kind(name) is VertexKind.PROXY:
        return graph.counterfactual_of(name)
    return name


def _require_valid(graph):
    problems = validate(graph)
    if problems:
        raise InputError("invalid m-DAG: " + "; ".join(v.message for v in problems))


# -- subcommands -------------------------------------------------------------------

def cmd_validate(args, out) -> int:
    graph = _graph(args.graph)
    problems = validate(graph)
    if not problems:
        print(f"{graph.name or args.graph}: valid m-DAG "
              f"({len(graph.vertices)} vertices, {len(graph.edges)} edges)", file=out)
        return OK
    for v in problems:
        print(f"[violation: {v.rule}] {v.message}", file=out)
    return NEGATIVE


def cmd_id(args, out) -> int:
    graph = _graph(args.graph)
    _require_valid(graph)
    report = engine.identify_target_law(graph, budget=args.budget, seed=args.seed)
    payload = report.to_json(full_certificate=False)
    functional = report.functional
    if args.marginal:
        target = _counterfactual(graph, args.marginal)
        transcript = engine.sequential_swig_attempt(graph, target)
        payload["sequential_swig_attempt"] = {
            "success": transcript.success,
            "steps": transcript.steps,
            "residuals": [{"term": r.term, "vertex": r.vertex, "reason": r.reason}
                          for r in transcript.residuals],
        }
        if functional is not None:
            functional = engine.marginal_functional(report, target)
            payload["marginal"] = {"target": functional.target,
                                   "functional_ascii": functional.ascii()}
    if report.certificate is not None:
        obs_tv, tgt_tv = oracle.verify_certificate(report.certificate)
        payload["certificate"]["oracle_observed_tv"] = obs_tv
        payload["certificate"]["oracle_target_tv"] = tgt_tv
        if args.certificate:
            Path(args.certificate).write_text(_dump(report.certificate.to_json()) + "\n")
    print(_dump(payload), file=out)
    if functional is not None:
        print(str(functional), file=out)
    if report.certificate is not None:
        print("not identified: " + report.certificate.summary(), file=out)
    if args.marginal:
        print(transcript.render(), file=out)
    return VERDICT_CODE[report.verdict]


def cmd_effect(args, out) -> int:
    graph = _graph(args.graph)
    _require_valid(graph)
    a = _counterfactual(graph, args.treatment)
    y = _counterfactual(graph, args.outcome)
    try:
        report = engine.identify_causal_effect(graph, a, y)
    except engine.IdentificationError as err:
        print(_dump({"verdict": engine.UNKNOWN, "reason": str(err)}), file=out)
        return UNKNOWN
    payload = report.to_json()
    if args.law:
        law = _law(args.law, graph)
        if isinstance(law, DiscreteLaw):
            law = observed_law(law)
        payload["ace"] = engine.average_causal_effect(report, law, graph)
    print(_dump(payload), file=out)
    print(str(report.functional), file=out)
    return OK


def _swig_lint(swig) -> list[str]:
    findings = []
    cycle = detect_stitch_cycle(swig)
    if cycle:
        findings.append("stitch-back cycle: " + "→".join(cycle))
    if has_undefined_counterfactual(swig):
        findings.append("undefined counterfactual under R=0")
    return findings


def cmd_swig(args, out) -> int:
    graph = _graph(args.graph)
    split = [s for s in args.split.split(",") if s] if args.split else None
    try:
        swig = build_swig(graph, split)
        for item in args.treatment or []:
            name, _, value = item.partition("=")
            if not value:
                raise InputError(f"--treatment expects NAME=VALUE, got {item!r}")
            if name in graph and graph.kind(name) is VertexKind.PROXY:
                name = graph.counterfactual_of(name)
            node = name
            for n in swig.nodes:
                if name in n.origin and not n.fixed:
                    node = n.name
            swig = split_treatment(swig, node, value)
    except (SwigError, UnknownVertexError) as err:
        raise InputError(str(err).strip("'\"")) from None
    print(swig.to_dot(graph.name or "swig"), end="", file=out)
    findings = _swig_lint(swig)
    for f in findings:
        print(f"lint: {f}", file=out)
    if not findings:
        print("lint: none", file=out)
    return NEGATIVE if findings else OK


def cmd_oracle(args, out) -> int:
    graph = _graph(args.graph)
    _require_valid(graph)
    try:
        config = oracle.TrialConfig(graph.name or args.graph,
                                    range(args.seed, args.seed + args.trials),
                                    args.floor, args.tolerance)
    except ValueError as err:
        raise InputError(str(err)) from None
    if args.treatment or args.outcome:
        if not (args.treatment and args.outcome):
            raise InputError("--treatment and --outcome go together")
        try:
            report = engine.identify_causal_effect(graph, _counterfactual(graph, args.treatment),
                                                   _counterfactual(graph, args.outcome))
        except engine.IdentificationError as err:
            print(f"unknown: {err}", file=out)
            return UNKNOWN
        result = oracle.verify_effect(graph, report, config)
    else:
        report = engine.identify_target_law(graph, seed=args.seed)
        if report.verdict != engine.IDENTIFIED:
            payload = {"graph": config.graph_id, "verdict": report.verdict}
            if report.certificate is not None:
                obs_tv, tgt_tv = oracle.verify_certificate(report.certificate)
                payload.update(observed_tv=obs_tv, target_tv=tgt_tv)
            print(_dump(payload), file=out)
            return VERDICT_CODE[report.verdict]
        result = oracle.verify_functional(graph, report.functional, config)
    print(result.summary(), file=out)
    print(_dump(result.to_json() if args.verbose else
                {k: v for k, v in result.to_json().items() if k != "trials"}), file=out)
    if args.out:
        _write_outputs(Path(args.out), [result])
    return OK if result.passed else NEGATIVE


def _write_outputs(directory: Path, reports) -> None:
    from .plotting import plot_trial_errors
    directory.mkdir(parents=True, exist_ok=True)
    oracle.write_json_report(reports, directory / "trials.json")
    oracle.write_junit_report(reports, directory / "junit.xml")
    with open(directory / "trials.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["graph", "seed", "max_error", "verdict"])
        for r in reports:
            for t in r.trials:
                w.writerow([r.graph, t.seed, repr(t.max_error), t.verdict])
    plot_trial_errors(reports, directory / "errors.png")


def _law(path, graph):
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise InputError(f"{path}: no such file") from None
    except json.JSONDecodeError as err:
        raise InputError(f"{path}: line {err.lineno}, column {err.colno}: {err.msg}") from None
    try:
        if isinstance(data, dict) and "observed" in data:
            return ObservedLaw.from_json(data)
        return DiscreteLaw.from_json(data, graph)
    except (LawFormatError, ValueError) as err:
        raise InputError(f"{path}: {err}") from None


def cmd_member(args, out) -> int:
    graph = _graph(args.graph)
    _require_valid(graph)
    law = _law(args.law, graph)
    obs = observed_law(law) if isinstance(law, DiscreteLaw) else law
    try:
        result = check_membership(graph, obs, tolerance=args.tolerance,
                                  starts=args.starts, seed=args.seed)
    except ConsistencyError as err:
        raise InputError(str(err)) from None
    except ValueError as err:
        raise InputError(str(err)) from None
    print(_dump(result.to_json()), file=out)
    print(f"residual {result.residual:.3e} "
          f"({'consistent' if result.consistent else 'inconsistent'} with the model)", file=out)
    return OK if result.consistent else NEGATIVE


def cmd_render(args, out) -> int:
    graph = _graph(args.graph)
    if args.format == "dot":
        print(to_dot(graph, graph.name or None), end="", file=out)
        return OK
    _require_valid(graph)
    report = engine.identify_target_law(graph, certify=False)
    if report.functional is None:
        print(f"% {report.verdict}", file=out)
        return VERDICT_CODE[report.verdict]
    fn = report.functional
    print(fn.latex() if args.format == "latex" else fn.ascii(), file=out)
    return OK


# -- entry points -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mdag-id",
                                description="Identification in missing-data DAGs.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", help="check the m-DAG well-formedness rules")
    s.add_argument("graph")
    s.set_defaults(run=cmd_validate)

    s = sub.add_parser("id", help="identify the target law")
    s.add_argument("graph")
    s.add_argument("--marginal", help="one counterfactual; also runs the sequential SWIG argument")
    s.add_argument("--budget", type=int, default=20, help="certificate search trials")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--certificate", help="write the full certificate laws to this file")
    s.set_defaults(run=cmd_id)

    s = sub.add_parser("effect", help="identify p(Y(a)) with missing treatment and outcome")
    s.add_argument("graph")
    s.add_argument("--treatment", required=True)
    s.add_argument("--outcome", required=True)
    s.add_argument("--law", help="law JSON; also prints the average causal effect")
    s.set_defaults(run=cmd_effect)

    s = sub.add_parser("swig", help="build the R=1 SWIG and lint it")
    s.add_argument("graph")
    s.add_argument("--split", help="comma-separated indicators (default: all)")
    s.add_argument("--treatment", action="append", help="NAME=VALUE, split after the indicators")
    s.set_defaults(run=cmd_swig)

    s = sub.add_parser("oracle", help="check the identified functional on random laws")
    s.add_argument("graph")
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--floor", type=float, default=1e-3)
    s.add_argument("--tolerance", type=float, default=1e-10)
    s.add_argument("--treatment")
    s.add_argument("--outcome")
    s.add_argument("--out", help="directory for trials.json, junit.xml, trials.csv, errors.png")
    s.add_argument("--verbose", action="store_true", help="include every trial in the JSON")
    s.set_defaults(run=cmd_oracle)

    s = sub.add_parser("member", help="distance from an observed law to the model")
    s.add_argument("graph")
    s.add_argument("law")
    s.add_argument("--tolerance", type=float, default=1e-6)
    s.add_argument("--starts", type=int, default=6)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(run=cmd_member)

    s = sub.add_parser("render", help="print the graph as DOT, or the functional")
    s.add_argument("graph")
    s.add_argument("--format", choices=("dot", "ascii", "latex"), default="dot")
    s.set_defaults(run=cmd_render)
    return p


def run(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return INPUT_ERROR if exc.code else OK
    try:
        return args.run(args, out)
    except InputError as err:
        print(f"error: {err}", file=sys.stderr)
        return INPUT_ERROR
    except (engine.InvalidGraphError, UnknownVertexError) as err:
        print(f"error: {err}", file=sys.stderr)
        return INPUT_ERROR


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
