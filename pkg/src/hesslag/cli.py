"""Command-line entry point: ``hesslag run|inspect|corpus|fd-audit``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import harness
from .errors import (
    DomainError,
    HessLagError,
    NotPositiveDefiniteError,
    NullConeError,
    SingularMetricError,
    ValidationError,
)

NUMERIC_ERRORS = (DomainError, SingularMetricError, NotPositiveDefiniteError, NullConeError)


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--report", metavar="PATH", help="write the JSON report here instead of stdout")
    common.add_argument("--dump-tensors", action="store_true", help="include per-point tensor dumps")
    common.add_argument("--tolerance-scale", type=float, default=1.0, metavar="F",
                        help="multiply every tolerance by F")
    common.add_argument("--seed", type=int, default=None, metavar="N",
                        help="override the sample-box seed")

    parser = argparse.ArgumentParser(prog="hesslag", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", parents=[common], help="run a scenario's checks")
    p.add_argument("scenario", help="scenario JSON file or built-in name")
    p = sub.add_parser("inspect", parents=[common], help="full tensor dump at one point")
    p.add_argument("scenario", help="scenario JSON file or built-in name")
    p.add_argument("--point", type=float, nargs="+", required=True,
                   help="coordinates (y, or x then y for tangent-bundle scenarios)")
    sub.add_parser("corpus", parents=[common], help="run every built-in scenario")
    p = sub.add_parser("fd-audit", parents=[common], help="jet versus finite-difference audit")
    p.add_argument("scenario", help="scenario JSON file or built-in name")
    return parser


def _summary(report: dict) -> list[str]:
    name = report["scenario"].get("name", report["scenario"]["kind"])
    lines = []
    for c in report["checks"]:
        status = "PASS" if c["pass"] else "FAIL"
        lines.append(f"{name:32s} {c['name']:20s} {status}  residual={c['max_residual']:.3e}"
                     f"  tol={c['tolerance']:.1e}")
    return lines


def _emit(report: dict, path: str | None) -> None:
    text = harness.dumps(report)
    if path is None:
        sys.stdout.write(text)
        return
    Path(path).write_text(text)
    reports = report.get("reports", [report])
    for r in reports:
        for line in _summary(r):
            print(line)
    print(f"verdict: {report['verdict']}")


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "corpus":
            report = harness.run_corpus(args.seed, args.tolerance_scale, args.dump_tensors)
        else:
            scenario = harness.resolve_scenario(args.scenario)
            kwargs = dict(seed=args.seed, tolerance_scale=args.tolerance_scale,
                          dump_tensors=args.dump_tensors)
            if args.command == "run":
                report = harness.run(scenario, **kwargs)
            elif args.command == "fd-audit":
                report = harness.run(scenario, checks=["fd-audit"], **kwargs)
            else:
                if len(args.point) != scenario.point_length:
                    raise ValidationError("--point", f"expected {scenario.point_length} coordinates")
                kwargs["dump_tensors"] = True
                report = harness.run(scenario, points=[list(args.point)], **kwargs)
    except ValidationError as exc:
        sys.stderr.write(harness.dumps(harness.error_record(exc)))
        return harness.EXIT_VALIDATION
    except NUMERIC_ERRORS as exc:
        sys.stderr.write(harness.dumps(harness.error_record(exc)))
        return harness.EXIT_NUMERIC
    except HessLagError as exc:
        sys.stderr.write(harness.dumps(harness.error_record(exc)))
        return harness.EXIT_VALIDATION
    _emit(report, args.report)
    return harness.EXIT_OK if report["verdict"] == "pass" else harness.EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
