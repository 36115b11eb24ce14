"""Command-line front end.

Verbs: validate a topology document, build and dump the diagnosis
network, diagnose an offline evidence document, run a scenario through
the closed loop, or batch a directory of scenarios.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bndiag, healloop, netmodel


def _add_loop_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="override scenario seed")
    parser.add_argument("--params", default=None, help="network parameter document")
    parser.add_argument("--strategy", default=None, help="strategy table override document")
    parser.add_argument("--window", type=int, default=None, help="evidence window in ticks")
    parser.add_argument("--threshold", type=float, default=None, help="diagnosis threshold")
    parser.add_argument("--verify-timeout", type=int, default=None, help="recovery verification ticks")
    parser.add_argument(
        "--policy", choices=["closed-world", "open-world"], default=None,
        help="evidence policy",
    )
    parser.add_argument("--max-widenings", type=int, default=None)
    parser.add_argument(
        "--suggest-only", action="store_true", default=False,
        help="record plans without executing them",
    )


def _config_overrides(args: argparse.Namespace) -> dict:
    overrides = {}
    if args.window is not None:
        overrides["evidence-window"] = args.window
    if args.threshold is not None:
        overrides["threshold"] = args.threshold
    if args.verify_timeout is not None:
        overrides["verify-timeout"] = args.verify_timeout
    if args.policy is not None:
        overrides["evidence-policy"] = args.policy
    if args.max_widenings is not None:
        overrides["max-widenings"] = args.max_widenings
    if args.suggest_only:
        overrides["suggest-only"] = True
    return overrides


def _cmd_validate(args: argparse.Namespace) -> int:
    try:
        text = Path(args.topology).read_text()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        print(f"error: malformed topology document: {exc}", file=sys.stderr)
        return 1
    try:
        topology = netmodel.load_topology(doc)
    except netmodel.TopologyError as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return 1
    print(
        f"valid: {len(topology.nodes)} nodes, {len(topology.links)} links, "
        f"{len(topology.services)} services"
    )
    return 0


def _cmd_build_bn(args: argparse.Namespace) -> int:
    try:
        topology = netmodel.load_topology(Path(args.topology).read_text())
        params_doc = json.loads(Path(args.params).read_text()) if args.params else None
        params = bndiag.params_from_dict(params_doc)
        bn = bndiag.build_bn(topology, params)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    rendered = json.dumps(bndiag.bn_to_dict(bn), indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(rendered)
    else:
        sys.stdout.write(rendered)
    return 0


def _cmd_diagnose(args: argparse.Namespace) -> int:
    try:
        bn = bndiag.load_bn(Path(args.network).read_text())
        evidence_doc = json.loads(Path(args.evidence).read_text())
        if not isinstance(evidence_doc, dict):
            raise bndiag.BnError("evidence document must map symptom ids to booleans")
        evidence = {str(k): bool(v) for k, v in evidence_doc.items()}
        threshold = args.threshold if args.threshold is not None else 0.5
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        posterior = bndiag.posterior_marginals(bn, evidence)
        diagnosis = bndiag.map_diagnosis(posterior, threshold, bn.priors)
    except Exception as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    doc = {
        "verdict": diagnosis.verdict.value,
        "threshold": diagnosis.threshold,
        "ranked": [[fid, p] for fid, p in diagnosis.ranked],
        "posterior": dict(sorted(posterior.marginals.items())),
    }
    sys.stdout.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    return healloop.run_scenario(
        args.scenario,
        seed=args.seed,
        params_path=args.params,
        strategy_path=args.strategy,
        config_overrides=_config_overrides(args),
        out_path=args.out,
        fmt=args.format,
    )


def _cmd_batch(args: argparse.Namespace) -> int:
    return healloop.run_batch(
        args.directory,
        out_path=args.out,
        seed=args.seed,
        params_path=args.params,
        strategy_path=args.strategy,
        config_overrides=_config_overrides(args),
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sdnheal",
        description="Self-healing closed loop over a simulated SDN",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a topology document")
    p.add_argument("topology")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("build-bn", help="build and dump the diagnosis network")
    p.add_argument("topology")
    p.add_argument("--params", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_build_bn)

    p = sub.add_parser("diagnose", help="diagnose an offline evidence document")
    p.add_argument("network", help="network dump produced by build-bn")
    p.add_argument("--evidence", required=True, help="symptom id to boolean map")
    p.add_argument("--threshold", type=float, default=None)
    p.set_defaults(func=_cmd_diagnose)

    p = sub.add_parser("run", help="run a scenario through the closed loop")
    p.add_argument("scenario")
    p.add_argument("--format", choices=["json", "table"], default="json")
    p.add_argument("--out", default=None)
    _add_loop_flags(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("batch", help="run every *.scenario.json in a directory")
    p.add_argument("directory")
    p.add_argument("--out", default=None)
    _add_loop_flags(p)
    p.set_defaults(func=_cmd_batch)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
