"""Command-line front end: experiments, verification suites, oracle queries.

Exit codes: 0 success, 1 verification failure (a FAIL line or a budget
violation), 2 usage or config error.  Every subcommand is deterministic
given its flags; there are no environment knobs.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from importlib import resources

import jsonschema
import numpy as np

from .geometry import Completion, CompletionStrategy
from .quantum import EntanglementParam
from .runtime import ExperimentConfig, load_settings_csv, run_experiment, write_report
from .verify import (
    DEFAULT_SEED,
    branch_correlation_claim,
    exact_mu_average,
    suite_epr2,
    suite_flip,
    suite_kernel,
    suite_mbox,
    suite_oracle,
)

__all__ = ["build_parser", "main", "report_schema"]

_COMPLETION_TAGS = tuple(c.value for c in Completion)


def report_schema() -> dict:
    """The JSON schema every written report is validated against."""
    text = resources.files("mboxsim").joinpath("schemas/report.schema.json").read_text()
    return json.loads(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mboxsim",
        description="Classical simulation of two-qubit measurement statistics "
        "from shared randomness, one cbit, and one comparison-box call per round.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run an experiment and write a report")
    sim.add_argument("--protocol", required=True, choices=("p1", "p2", "tb"))
    sim.add_argument("--gamma", required=True, type=float, help="state angle in radians")
    sim.add_argument(
        "--settings",
        required=True,
        help="settings CSV path, or random:N for a seeded draw",
    )
    sim.add_argument("--rounds", required=True, type=int, help="rounds per setting")
    sim.add_argument("--seed", required=True, type=int)
    sim.add_argument("--completion", required=True, choices=_COMPLETION_TAGS)
    sim.add_argument("--out", required=True, help="JSON report path")
    sim.add_argument("--csv", default=None, help="optional flat CSV report path")
    sim.set_defaults(func=cmd_simulate)

    ver = sub.add_parser("verify", help="run a named verification suite")
    ver.add_argument("suite", choices=("kernel", "flip", "epr2", "mbox", "oracle"))
    ver.add_argument("--gamma", type=float, default=None)
    ver.add_argument("--grid", type=int, default=20)
    ver.add_argument("--rounds", type=int, default=None)
    ver.add_argument("--seed", type=int, default=DEFAULT_SEED)
    ver.set_defaults(func=cmd_verify)

    orc = sub.add_parser("oracle", help="query the exact enumeration oracle")
    orc.add_argument("query", choices=("mu-average",))
    orc.add_argument("--protocol", required=True, choices=("p1", "p2"))
    orc.add_argument("--gamma", required=True, type=float)
    orc.add_argument("--a", required=True, help="Alice setting as x,y,z")
    orc.add_argument("--b", required=True, help="Bob setting as x,y,z")
    orc.add_argument("--branch", required=True, choices=("pq+", "pq-"))
    orc.add_argument("--completion", default=Completion.NORMALIZE.value, choices=_COMPLETION_TAGS)
    orc.set_defaults(func=cmd_oracle)

    return parser


def _parse_vec(parser: argparse.ArgumentParser, text: str, flag: str) -> np.ndarray:
    parts = text.split(",")
    if len(parts) != 3:
        parser.error(f"{flag} must be three comma-separated numbers, got {text!r}")
    try:
        v = np.array([float(x) for x in parts])
    except ValueError:
        parser.error(f"{flag} must be three comma-separated numbers, got {text!r}")
    norm = float(np.linalg.norm(v))
    if not math.isfinite(norm) or norm <= 0.0:
        parser.error(f"{flag} is not a direction: {text!r}")
    return v / norm


def cmd_simulate(args, parser) -> int:
    if args.settings.startswith("random:"):
        try:
            n = int(args.settings.split(":", 1)[1])
        except ValueError:
            n = 0
        if n < 1:
            parser.error(f"--settings random:N needs integer N >= 1, got {args.settings!r}")
        source = {"random_settings": n}
    else:
        try:
            source = {"settings": load_settings_csv(args.settings)}
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
    try:
        config = ExperimentConfig(
            protocol=args.protocol,
            gamma=args.gamma,
            rounds=args.rounds,
            seed=args.seed,
            completion=args.completion,
            out_path=args.out,
            csv_path=args.csv,
            **source,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    report = run_experiment(config)
    payload = write_report(report, args.out, args.csv)
    try:
        jsonschema.validate(payload, report_schema())
    except jsonschema.ValidationError as exc:
        print(f"internal error: report failed schema self-check: {exc.message}", file=sys.stderr)
        return 1
    print(
        f"wrote {args.out}: {len(report.records)} settings x {config.rounds} rounds, "
        f"max TV distance {report.max_tv:.6f}"
    )
    if report.budget_violations:
        print(f"budget violations: {report.budget_violations}", file=sys.stderr)
        return 1
    return 0


def cmd_verify(args, parser) -> int:
    if args.suite == "mbox":
        checks = suite_mbox(rounds=args.rounds or 200_000, seed=args.seed)
    elif args.suite == "kernel":
        checks = suite_kernel(rounds=args.rounds or 200_000, seed=args.seed)
    elif args.suite == "flip":
        checks = suite_flip(trials=args.rounds or 1000, seed=args.seed)
    elif args.suite == "epr2":
        if args.gamma is not None and args.gamma <= 0.0:
            parser.error("the epr2 suite requires gamma > 0")
        checks = suite_epr2(gamma=args.gamma, grid_n=args.grid)
    else:
        checks = suite_oracle(
            gamma=args.gamma if args.gamma is not None else math.pi / 8,
            rounds=args.rounds or 200_000,
            seed=args.seed,
        )
    for check in checks:
        print(check)
    return 0 if all(c.passed for c in checks) else 1


def cmd_oracle(args, parser) -> int:
    a = _parse_vec(parser, args.a, "--a")
    b = _parse_vec(parser, args.b, "--b")
    try:
        param = EntanglementParam(args.gamma)
    except ValueError as exc:
        parser.error(str(exc))
    if args.protocol == "p2" and args.gamma <= 0.0:
        parser.error("protocol 2 requires gamma > 0")
    # The branch average lives in the reflected frame (both z >= 0).
    reflected = []
    if a[2] < 0.0:
        a = -a
        reflected.append("a")
    if b[2] < 0.0:
        b = -b
        reflected.append("b")
    if reflected:
        print(f"note: reflected {', '.join(reflected)} into the upper hemisphere")
    p, q = (1, 1) if args.branch == "pq+" else (1, -1)
    strategy = CompletionStrategy(Completion(args.completion))
    oracle = exact_mu_average(param, a, b, strategy, p, q, args.protocol)
    claim = branch_correlation_claim(param, a, b, p, q, args.protocol)
    print(f"oracle ({args.completion}): {oracle!r}")
    print(f"claimed scalar product: {claim!r}")
    print(f"residual: {abs(oracle - claim)!r}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args, parser)


if __name__ == "__main__":
    raise SystemExit(main())
