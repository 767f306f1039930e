"""Command line entry point: run the twin, query it, replay captures,
generate scenarios, post milestones, render reports.

Exit codes: 0 success, 1 user error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import signal
import sys
from pathlib import Path

import requests

from .broker import BrokerClient
from .model import timefmt
from .pipeline import (
    FlowRecord,
    Pipeline,
    chroma_pipeline_config,
    positions_pipeline_config,
)
from .runtime import AirportTwin, ConfigError, RuntimeConfig, StartupError
from .sim.scenario import generate_scenario, save_script

log = logging.getLogger(__name__)

OK, USER_ERROR, RUNTIME_FAILURE = 0, 1, 2

DEFAULT_BROKER = "http://127.0.0.1:8026"
DEFAULT_ENGINE = "http://127.0.0.1:8027"
DEFAULT_HISTORY = "http://127.0.0.1:8028"


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad usage; that code is reserved for runtime
    failures here, so downgrade usage problems to the user-error code."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(USER_ERROR, f"{self.prog}: error: {message}\n")


def fail(message: str, code: int) -> int:
    print(message, file=sys.stderr)
    return code


def parse_user_time(text: str) -> _dt.datetime:
    try:
        return timefmt.parse_wire(text)
    except ValueError:
        pass
    value = _dt.datetime.fromisoformat(text.replace("Z", "+00:00"))
    if value.tzinfo is None:
        value = value.replace(tzinfo=timefmt.UTC)
    return value.astimezone(timefmt.UTC)


def format_table(headers: list[str], rows: list[list[str]]) -> str:
    widths = [len(h) for h in headers]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(c.ljust(w)
                               for c, w in zip(row, widths)).rstrip())
    return "\n".join(lines)


def _render_value(value) -> str:
    if isinstance(value, _dt.datetime):
        return timefmt.format_wire(value)
    if isinstance(value, (dict, list)):
        return json.dumps(value, sort_keys=True)
    return str(value)


# --- run ---------------------------------------------------------------------


def cmd_run(args: argparse.Namespace) -> int:
    try:
        config = RuntimeConfig.load(args.config)
        for name in ("mode", "scenario_path", "clock_scale", "duration_s",
                     "log_level"):
            value = getattr(args, name)
            if value is not None:
                setattr(config, name, value)
        config.validate()
        if config.mode == "lockstep" and config.duration_s is None:
            raise ConfigError("lockstep runs need duration_s")
    except ConfigError as exc:
        return fail(f"bad configuration: {exc}", USER_ERROR)
    _setup_logging(config.log_level)
    twin = AirportTwin(config)

    def on_signal(signum, frame) -> None:
        log.info("received %s, shutting down", signal.Signals(signum).name)
        twin.request_stop()

    signal.signal(signal.SIGINT, on_signal)
    signal.signal(signal.SIGTERM, on_signal)
    try:
        twin.start()
    except StartupError as exc:
        return fail(f"startup failed in component {exc.component!r}: "
                    f"{exc.cause}", RUNTIME_FAILURE)
    print(json.dumps(twin.endpoints()), flush=True)
    try:
        twin.run()
        log.info("final status: %s", json.dumps(twin.status()))
    finally:
        twin.stop()
    return OK


# --- query -------------------------------------------------------------------


def cmd_query(args: argparse.Namespace) -> int:
    try:
        if args.target == "entity":
            return _query_entity(args)
        if args.target == "flights":
            return _query_flights(args)
        return _query_history(args)
    except requests.RequestException as exc:
        return fail(f"cannot reach service: {exc}", RUNTIME_FAILURE)


def _query_entity(args: argparse.Namespace) -> int:
    entity = BrokerClient(args.broker).get_or_none(args.id)
    if entity is None:
        return fail(f"entity {args.id} not found", USER_ERROR)
    if args.json:
        print(json.dumps(entity.to_document(), sort_keys=True, indent=2))
        return OK
    rows = [[name, attr.kind, _render_value(attr.value)]
            for name, attr in sorted(entity.attributes.items())]
    print(f"{entity.id} ({entity.type})")
    print(format_table(["ATTRIBUTE", "KIND", "VALUE"], rows))
    return OK


def _query_flights(args: argparse.Namespace) -> int:
    flights = BrokerClient(args.broker).query("Flight")
    if args.number:
        flights = [f for f in flights
                   if f.attr_value("flightNumber") == args.number]
    flights.sort(key=lambda f: (f.attr_value("flightNumber") or "", f.id))
    if args.json:
        print(json.dumps([f.to_document() for f in flights],
                         sort_keys=True, indent=2))
        return OK

    def airport(value) -> str:
        return value.rsplit("-", 1)[-1] if value else ""

    rows = []
    for flight in flights:
        scheduled = flight.attr_value("dateScheduled")
        rows.append([
            flight.attr_value("flightNumber") or "",
            airport(flight.attr_value("departsFromAirport")),
            airport(flight.attr_value("arrivesToAirport")),
            _render_value(scheduled) if scheduled else "",
            flight.attr_value("state") or "",
            flight.attr_value("standCode") or "",
            airport(flight.attr_value("hasAircraft")),
        ])
    print(format_table(
        ["FLIGHT", "FROM", "TO", "SCHEDULED", "STATE", "STAND", "AIRCRAFT"],
        rows))
    return OK


def _query_history(args: argparse.Namespace) -> int:
    params = {}
    if getattr(args, "from"):
        params["from"] = getattr(args, "from")
    if args.to:
        params["to"] = args.to
    response = requests.get(f"{args.history}/history/{args.id}",
                            params=params, timeout=30)
    if response.status_code == 400:
        return fail(f"bad query: {response.json().get('error')}", USER_ERROR)
    response.raise_for_status()
    document = response.json()
    if args.json:
        print(json.dumps(document, sort_keys=True, indent=2))
        return OK
    rows = [[str(event["sequence"]), event["recordedAt"],
             ",".join(event["changedAttributes"])]
            for event in document["events"]]
    print(format_table(["SEQ", "RECORDED", "CHANGED"], rows))
    return OK


# --- replay ------------------------------------------------------------------

_BUILTIN_PIPELINES = {
    "chroma": lambda: chroma_pipeline_config("http://replay.invalid"),
    "positions": lambda: positions_pipeline_config("http://replay.invalid"),
}


def _load_capture(path: Path) -> list[FlowRecord]:
    records = []
    with path.open() as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                payload = json.loads(line)
            except ValueError as exc:
                raise ValueError(f"{path}: line {line_no}: {exc}") from exc
            records.append(FlowRecord(payload=payload, source=path.stem,
                                      sequence=(line_no,)))
    return records


def cmd_replay(args: argparse.Namespace) -> int:
    capture = Path(args.capture)
    if not capture.exists():
        return fail(f"capture file {capture} does not exist", USER_ERROR)
    try:
        records = _load_capture(capture)
    except ValueError as exc:
        return fail(str(exc), USER_ERROR)
    builtin = _BUILTIN_PIPELINES.get(args.pipeline)
    try:
        config = builtin() if builtin else json.loads(
            Path(args.pipeline).read_text())
    except (OSError, ValueError) as exc:
        return fail(f"cannot load pipeline config {args.pipeline}: {exc}",
                    USER_ERROR)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def sink(record: FlowRecord) -> None:
        target = out_dir / f"{len(written) + 1:04d}.json"
        target.write_text(json.dumps(record.payload, sort_keys=True,
                                     indent=2) + "\n")
        written.append(target)

    try:
        pipeline = Pipeline(config, sink=sink)
    except Exception as exc:
        return fail(f"bad pipeline config: {exc}", USER_ERROR)
    for record in records:
        pipeline.feed(record)
    counters = pipeline.counters()
    print(f"replayed {len(records)} records through {pipeline.name}: "
          f"{len(written)} outputs in {out_dir}, "
          f"{len(pipeline.dead_letters)} dead-lettered")
    if args.verbose:
        print(json.dumps(counters, indent=2))
    return OK


# --- simulate ------------------------------------------------------------------


def cmd_simulate(args: argparse.Namespace) -> int:
    start = None
    if args.start:
        try:
            start = parse_user_time(args.start)
        except ValueError as exc:
            return fail(f"bad start time: {exc}", USER_ERROR)
    script = generate_scenario(seed=args.seed, pairs=args.pairs,
                               airport_iata=args.airport, start=start)
    save_script(script, args.out)
    span = max((f.scheduled_offset for f in script.flights), default=0.0)
    print(f"wrote {args.out}: {len(script.flights)} flights at "
          f"{script.airport_iata}, spanning {span / 3600.0:.1f}h")
    return OK


# --- milestone ------------------------------------------------------------------


def _resolve_flight(engine_url: str, number: str) -> str:
    response = requests.get(f"{engine_url}/flights", timeout=30)
    response.raise_for_status()
    matches = [view["flight"]["id"] for view in response.json()
               if view["flight"].get("flightNumber", {}).get("value")
               == number]
    if not matches:
        raise LookupError(f"no tracked flight with number {number}")
    if len(matches) > 1:
        raise LookupError(f"flight number {number} is ambiguous: "
                          f"{', '.join(matches)}")
    return matches[0]


def cmd_milestone(args: argparse.Namespace) -> int:
    try:
        at = parse_user_time(args.at)
    except ValueError as exc:
        return fail(f"bad timestamp {args.at!r}: {exc}", USER_ERROR)
    try:
        flight_id = args.flight or _resolve_flight(args.engine, args.number)
        response = requests.post(
            f"{args.engine}/flights/{flight_id}/milestones",
            json={"milestone": args.milestone,
                  "at": timefmt.format_wire(at)},
            timeout=30)
    except LookupError as exc:
        return fail(str(exc), USER_ERROR)
    except requests.RequestException as exc:
        return fail(f"cannot reach engine: {exc}", RUNTIME_FAILURE)
    if response.status_code != 200:
        detail = response.json().get("error", response.text)
        return fail(f"milestone rejected: {detail}", USER_ERROR)
    view = response.json()
    state = view["flight"].get("state", {}).get("value", "scheduled")
    delay = view["delay"]["classification"]
    print(f"applied {args.milestone} to {flight_id}; "
          f"state={state} delay={delay}")
    return OK


# --- report ------------------------------------------------------------------


def cmd_report(args: argparse.Namespace) -> int:
    from . import report  # matplotlib import deferred until needed
    try:
        written = report.render_report(args.broker, args.history, args.out,
                                       threshold_s=args.threshold)
    except requests.RequestException as exc:
        return fail(f"cannot reach service: {exc}", RUNTIME_FAILURE)
    for path in written:
        print(path)
    return OK


# --- wiring ------------------------------------------------------------------


def _setup_logging(level: str) -> None:
    logging.basicConfig(
        stream=sys.stderr,
        level=getattr(logging, str(level).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s %(message)s")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="aerotwin",
                     description="airport digital twin toolkit")
    parser.add_argument("--log-level", default=None,
                        help="override the configured log level")
    commands = parser.add_subparsers(dest="command", required=True,
                                     parser_class=_Parser)

    run = commands.add_parser("run", help="start the configured components")
    run.add_argument("--config", default=None,
                     help="JSON config file; AEROTWIN_* env vars override")
    run.add_argument("--mode", choices=("live", "lockstep"), default=None)
    run.add_argument("--scenario", dest="scenario_path", default=None)
    run.add_argument("--clock-scale", dest="clock_scale", type=float,
                     default=None)
    run.add_argument("--duration", dest="duration_s", type=float,
                     default=None, help="simulated seconds to run")
    run.set_defaults(handler=cmd_run)

    query = commands.add_parser("query", help="inspect broker or history")
    targets = query.add_subparsers(dest="target", required=True,
                                   parser_class=_Parser)
    entity = targets.add_parser("entity", help="one entity by id")
    entity.add_argument("--id", required=True)
    entity.add_argument("--broker", default=DEFAULT_BROKER)
    entity.add_argument("--json", action="store_true",
                        help="raw JSON instead of a table")
    flights = targets.add_parser("flights", help="flight table")
    flights.add_argument("--number", default=None,
                         help="filter by flight number")
    flights.add_argument("--broker", default=DEFAULT_BROKER)
    flights.add_argument("--json", action="store_true")
    history = targets.add_parser("history", help="recorded changes")
    history.add_argument("--id", required=True)
    history.add_argument("--from", default=None,
                         help="inclusive lower bound, ISO-8601")
    history.add_argument("--to", default=None,
                         help="exclusive upper bound, ISO-8601")
    history.add_argument("--history", default=DEFAULT_HISTORY)
    history.add_argument("--json", action="store_true")
    query.set_defaults(handler=cmd_query)

    replay = commands.add_parser(
        "replay", help="run a capture file through a pipeline offline")
    replay.add_argument("--capture", required=True,
                        help="NDJSON file, one feed payload per line")
    replay.add_argument("--pipeline", required=True,
                        help="pipeline config path, or builtin name "
                             f"({', '.join(sorted(_BUILTIN_PIPELINES))})")
    replay.add_argument("--out", required=True, help="output directory")
    replay.add_argument("--verbose", action="store_true")
    replay.set_defaults(handler=cmd_replay)

    simulate = commands.add_parser("simulate",
                                   help="generate a scenario script")
    simulate.add_argument("--seed", type=int, required=True)
    simulate.add_argument("--pairs", type=int, default=5,
                          help="inbound/outbound flight pairs")
    simulate.add_argument("--airport", default="ABZ")
    simulate.add_argument("--start", default=None,
                          help="scenario start, ISO-8601")
    simulate.add_argument("--out", required=True)
    simulate.set_defaults(handler=cmd_simulate)

    milestone = commands.add_parser("milestone",
                                    help="record a turnaround milestone")
    who = milestone.add_mutually_exclusive_group(required=True)
    who.add_argument("--flight", help="flight entity URN")
    who.add_argument("--number", help="flight number, resolved via engine")
    milestone.add_argument("--milestone", required=True,
                           help="e.g. AOBT, ATOT, ALDT, AIBT, TOBT")
    milestone.add_argument("--at", required=True, help="ISO-8601 timestamp")
    milestone.add_argument("--engine", default=DEFAULT_ENGINE)
    milestone.set_defaults(handler=cmd_milestone)

    report = commands.add_parser(
        "report", help="render Gantt and track figures plus a CSV")
    report.add_argument("--broker", default=DEFAULT_BROKER)
    report.add_argument("--history", default=DEFAULT_HISTORY,
                        help="history service URL, or 'none' to skip tracks")
    report.add_argument("--out", required=True, help="output directory")
    report.add_argument("--threshold", type=float, default=300.0,
                        help="delay threshold in seconds")
    report.set_defaults(handler=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command != "run":  # run configures from its own config
        _setup_logging(args.log_level or "WARNING")
    if getattr(args, "history", None) == "none":
        args.history = None
    try:
        return args.handler(args)
    except Exception as exc:  # noqa: BLE001 - last resort, keep the contract
        log.debug("unhandled failure", exc_info=True)
        return fail(f"{type(exc).__name__}: {exc}", RUNTIME_FAILURE)


if __name__ == "__main__":
    sys.exit(main())
