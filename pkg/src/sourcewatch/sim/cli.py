"""simulate: run, validate and sweep scenario files.

    simulate run scenarios/shed-and-run.scn --report csv
    simulate validate scenarios/quiet-week.scn
    simulate sweep scenarios/shed-and-run.scn --param path_loss_dB --from 120 --to 155 --step 0.5
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace

from .engine import HttpGateway, run
from .report import emit_report
from .scenario import ParseError, ValidationError, load_scenario


def _cmd_run(args) -> int:
    scenario = load_scenario(args.file)
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    gateway = None
    if args.platform != "inprocess":
        if not args.platform.startswith("http://") and not args.platform.startswith("https://"):
            print(f"--platform must be 'inprocess' or an http URL, got {args.platform!r}", file=sys.stderr)
            return 2
        gateway = HttpGateway(args.platform)
    started = time.monotonic()  # wall clock is for operator logging only
    result = run(scenario, gateway=gateway)
    payload = emit_report(result.report, args.report)
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(payload)
    else:
        sys.stdout.buffer.write(payload)
    print(f"run completed in {time.monotonic() - started:.2f}s wall", file=sys.stderr)
    return 0


def _cmd_validate(args) -> int:
    try:
        scenario = load_scenario(args.file)
    except (ParseError, ValidationError) as exc:
        print(f"INVALID: {exc}", file=sys.stderr)
        return 1
    print(
        f"OK: {scenario.name!r}: {len(scenario.devices)} device(s), "
        f"{len(scenario.events)} event(s), {scenario.duration_s}s"
    )
    return 0


def _frange(start: float, stop: float, step: float):
    # integer stepping avoids accumulated float drift across the sweep
    n = 0
    while True:
        value = start + n * step
        if value > stop + 1e-9:
            return
        yield round(value, 6)
        n += 1


def _cmd_sweep(args) -> int:
    if args.param != "path_loss_dB":
        print(f"unsupported sweep parameter {args.param!r}", file=sys.stderr)
        return 2
    scenario = load_scenario(args.file)
    out = sys.stdout
    out.write("path_loss_dB,gprs_delivery_fraction,nbiot_delivery_fraction\n")
    for loss in _frange(args.start, args.stop, args.step):
        fractions = {}
        for tech in ("gprs", "nbiot"):
            variant = replace(
                scenario.with_path_loss(loss),
                radio=replace(scenario.radio, tech=tech),
            )
            report = run(variant).report
            sent = sum(d.frames_sent for d in report.devices)
            delivered = sum(d.frames_delivered for d in report.devices)
            fractions[tech] = delivered / sent if sent else 0.0
        out.write(f"{loss},{fractions['gprs']:.4f},{fractions['nbiot']:.4f}\n")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="simulate", description="scenario simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario and emit its report")
    p_run.add_argument("file")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--report", choices=("human", "csv", "json-lines"), default="human")
    p_run.add_argument("--platform", default="inprocess",
                       help="'inprocess' or the base URL of a running platform server")
    p_run.add_argument("--out", default=None, help="write the report to a file")
    p_run.set_defaults(func=_cmd_run)

    p_val = sub.add_parser("validate", help="check a scenario file")
    p_val.add_argument("file")
    p_val.set_defaults(func=_cmd_validate)

    p_sweep = sub.add_parser("sweep", help="vary a channel parameter, tabulate delivery")
    p_sweep.add_argument("file")
    p_sweep.add_argument("--param", required=True)
    p_sweep.add_argument("--from", dest="start", type=float, required=True)
    p_sweep.add_argument("--to", dest="stop", type=float, required=True)
    p_sweep.add_argument("--step", type=float, required=True)
    p_sweep.set_defaults(func=_cmd_sweep)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
