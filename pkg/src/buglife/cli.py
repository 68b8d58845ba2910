"""Operator command line: serve the API, run simulations, audit event logs.

Exit codes are a stable contract: 0 success, 1 operational error, 2 usage
error, 3 the exact-enumeration path bound was exceeded, 4 a corrupt event
log. With ``--json`` the machine-readable result goes to stdout and all
diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import socket
import sys
from pathlib import Path
from typing import Optional

from . import persistence as ps
from . import simulator as sim

EXIT_OK = 0
EXIT_OPERATIONAL = 1
EXIT_USAGE = 2
EXIT_PATH_BOUND = 3
EXIT_CORRUPT = 4

CONFIG_ENV_VAR = "BUGLIFE_CONFIG"


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _load_json(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)


def _config_path(explicit: Optional[str]) -> Optional[str]:
    return explicit or os.environ.get(CONFIG_ENV_VAR)


# ---------------------------------------------------------------------------
# serve

def cmd_serve(args: argparse.Namespace) -> int:
    from .http_api import create_app
    from .service import BugTracker, ServiceConfig

    path = _config_path(args.config)
    try:
        if path:
            config = ServiceConfig.from_dict(_load_json(path))
        else:
            config = ServiceConfig.demo()
        if args.store is not None:
            config.store_dir = args.store
        tracker = BugTracker(config)
    except Exception as exc:  # noqa: BLE001 - config errors end the process
        return _fail(f"cannot load config: {exc}", EXIT_OPERATIONAL)

    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((args.host, args.port))
    except OSError as exc:
        return _fail(f"cannot bind port {args.port}: {exc}", EXIT_OPERATIONAL)
    finally:
        probe.close()

    print(f"buglife API ready on port {args.port}", flush=True)
    import uvicorn

    uvicorn.run(create_app(tracker), host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate

def _metrics_table(rows: list[tuple[str, str, str]]) -> str:
    width = max(len(name) for name, _, _ in rows)
    lines = [f"{'metric'.ljust(width)}  {'simulated':>14}  {'exact':>14}"]
    for name, simulated, exact in rows:
        lines.append(f"{name.ljust(width)}  {simulated:>14}  {exact:>14}")
    return "\n".join(lines)


def cmd_simulate(args: argparse.Namespace) -> int:
    path = _config_path(args.config)
    try:
        if path:
            config = sim.SimConfig.from_dict(_load_json(path))
        elif args.workflow == "traditional":
            config = sim.default_traditional_config()
        else:
            config = sim.default_proposed_config()
        if args.seed is not None:
            config = sim.SimConfig.from_dict({**config.as_dict(), "seed": args.seed})
        if args.replications < 1:
            raise sim.InvalidConfig("replications must be >= 1")
        metrics, traces = sim.simulate(
            config, replications=args.replications,
            collect_traces=args.traces or 0,
        )
    except sim.InvalidConfig as exc:
        return _fail(str(exc), EXIT_OPERATIONAL)
    except (OSError, json.JSONDecodeError) as exc:
        return _fail(f"cannot load config: {exc}", EXIT_OPERATIONAL)

    result = {"config": config.as_dict(), "metrics": metrics.as_dict()}
    exact = None
    if args.exact:
        try:
            exact = sim.enumerate_exact(config)
        except sim.PathSpaceTooLarge as exc:
            return _fail(str(exc), EXIT_PATH_BOUND)
        except sim.InvalidConfig as exc:
            return _fail(str(exc), EXIT_OPERATIONAL)
        result["exact"] = exact.as_dict()

    if args.out:
        Path(args.out).write_text(json.dumps(result, indent=2) + "\n", encoding="utf-8")
        print(f"metrics written to {args.out}", file=sys.stderr)
    if args.traces and traces:
        trace_path = args.traces_out or "traces.csv"
        Path(trace_path).write_text(sim.traces_to_csv(traces), encoding="utf-8")
        print(f"traces written to {trace_path}", file=sys.stderr)

    if args.json:
        print(json.dumps(result))
        return EXIT_OK

    scalars = metrics.scalars()
    exact_scalars = exact.scalars() if exact else {}
    rows = [
        (name, f"{value:.4f}", f"{exact_scalars[name]:.4f}" if exact else "-")
        for name, value in scalars.items()
    ]
    for stage, value in metrics.attempts.items():
        exact_value = exact.attempts.get(stage) if exact else None
        rows.append(
            (f"attempts[{stage}]", f"{value:.4f}",
             f"{exact_value:.4f}" if exact_value is not None else "-")
        )
    for stage, value in metrics.escalation_rates.items():
        exact_value = exact.escalation_rates.get(stage) if exact else None
        rows.append(
            (f"escalations[{stage}]", f"{value:.4f}",
             f"{exact_value:.4f}" if exact_value is not None else "-")
        )
    print(f"workflow={config.workflow.value} replications={args.replications} "
          f"cases={metrics.cases} seed={config.seed}")
    print(_metrics_table(rows))
    return EXIT_OK


# ---------------------------------------------------------------------------
# replay / inspect / export

def _read_log(path: str) -> bytes:
    with open(path, "rb") as handle:
        return handle.read()


def _load_records(args: argparse.Namespace):
    data = _read_log(args.log)
    records = ps.parse_log(data)
    ps.verify_chain(records)
    if args.case and records and records[0].case_id != args.case:
        raise ps.UnknownCaseLog(args.case)
    return records


def cmd_replay(args: argparse.Namespace) -> int:
    try:
        records = _load_records(args)
        case = ps.fold_records(records)
    except ps.CorruptChain as exc:
        print(f"error: corrupt chain at seq {exc.seq}: {exc.reason}", file=sys.stderr)
        return EXIT_CORRUPT
    except (OSError, ps.UnknownCaseLog) as exc:
        return _fail(str(exc), EXIT_OPERATIONAL)
    if args.json:
        print(json.dumps({
            "case_id": case.case_id,
            "stage": case.stage_label(),
            "counters": case.counters(),
            "restart_count": case.restart_count,
            "responsible_human": case.responsible_human,
            "events": len(records),
        }))
    else:
        print(f"case {case.case_id}: {case.stage_label()}")
        print(f"counters: {case.counters()}")
        print(f"restarts: {case.restart_count} "
              f"responsible: {case.responsible_human or '-'} events: {len(records)}")
    return EXIT_OK


def cmd_inspect(args: argparse.Namespace) -> int:
    try:
        records = _load_records(args)
    except ps.CorruptChain as exc:
        print(f"error: corrupt chain at seq {exc.seq}: {exc.reason}", file=sys.stderr)
        return EXIT_CORRUPT
    except (OSError, ps.UnknownCaseLog) as exc:
        return _fail(str(exc), EXIT_OPERATIONAL)
    if args.json:
        print(json.dumps([record.as_dict() for record in records]))
        return EXIT_OK
    for record in records:
        actor = record.actor
        if actor.get("type") == "agent":
            who = f"agent:{actor.get('kind')}"
        else:
            who = f"{actor.get('role', actor.get('type'))}:{actor.get('actor_id', '-')}"
        stage = record.stage_before or "-"
        print(f"{record.seq:4d}  {stage:<26} {record.outcome['kind']:<16} {who}")
    return EXIT_OK


def cmd_export(args: argparse.Namespace) -> int:
    try:
        store = ps.EventStore(args.store)
        if not store.exists(args.case):
            return _fail(f"unknown case {args.case!r} in {args.store}", EXIT_OPERATIONAL)
        data = store.export_log(args.case)
    except ps.CorruptChain as exc:
        print(f"error: corrupt chain at seq {exc.seq}: {exc.reason}", file=sys.stderr)
        return EXIT_CORRUPT
    except OSError as exc:
        return _fail(str(exc), EXIT_OPERATIONAL)
    if args.out:
        Path(args.out).write_bytes(data)
        print(f"log written to {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(data.decode("utf-8"))
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="buglife",
        description="Bug-tracking lifecycle engine, simulator, and log tools.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    serve = commands.add_parser("serve", help="run the HTTP API")
    serve.add_argument("--config", help=f"service config JSON (or ${CONFIG_ENV_VAR})")
    serve.add_argument("--store", help="event-log directory for durability")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8080)
    serve.set_defaults(func=cmd_serve)

    simulate = commands.add_parser("simulate", help="run workflow simulations")
    simulate.add_argument("--config", help=f"SimConfig JSON (or ${CONFIG_ENV_VAR})")
    simulate.add_argument("--workflow", choices=["proposed", "traditional"],
                          default="proposed", help="default config when none is given")
    simulate.add_argument("--replications", "-r", type=int, default=1000)
    simulate.add_argument("--seed", type=int)
    simulate.add_argument("--out", help="write metrics JSON here")
    simulate.add_argument("--exact", action="store_true",
                          help="also run the exact enumeration oracle")
    simulate.add_argument("--traces", type=int, default=0,
                          help="collect up to N case traces")
    simulate.add_argument("--traces-out", help="CSV path for collected traces")
    simulate.add_argument("--json", action="store_true")
    simulate.set_defaults(func=cmd_simulate)

    replay = commands.add_parser("replay", help="fold an event log to its final state")
    replay.add_argument("--log", required=True)
    replay.add_argument("--case")
    replay.add_argument("--json", action="store_true")
    replay.set_defaults(func=cmd_replay)

    inspect = commands.add_parser("inspect", help="print a human-readable timeline")
    inspect.add_argument("--log", required=True)
    inspect.add_argument("--case")
    inspect.add_argument("--json", action="store_true")
    inspect.set_defaults(func=cmd_inspect)

    export = commands.add_parser("export", help="export one case log from a store")
    export.add_argument("--store", required=True)
    export.add_argument("--case", required=True)
    export.add_argument("--out")
    export.set_defaults(func=cmd_export)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
