"""Wires the whole twin together: simulator feeds, pipelines, broker,
engine, history. One class owns startup order, shutdown order, and the two
ways of driving time (scaled wall clock or deterministic lockstep)."""
from __future__ import annotations

import dataclasses
import datetime as _dt
import json
import logging
import os
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import requests

from .broker import BrokerClient, BrokerServer, ContextBroker
from .engine import EngineService
from .feeds import RestPoller, TcpStreamClient
from .history import HistoryService, HistoryStore
from .model import AirlineRecord, AirportRecord, make_entity_id, timefmt
from .pipeline import (
    FlowRecord,
    Pipeline,
    chroma_pipeline_config,
    positions_pipeline_config,
)
from .sim import TOKEN_HEADER, SimClock, SimulatorServer
from .sim.feedgen import frame_at
from .sim.scenario import (
    AIRPORTS,
    ScenarioScript,
    demo_turnaround_script,
    load_script,
)

log = logging.getLogger(__name__)

ENV_PREFIX = "AEROTWIN_"
_TRUE_WORDS = {"1", "true", "yes", "on"}


class StartupError(RuntimeError):
    """A component failed to come up; carries which one."""

    def __init__(self, component: str, cause: Exception):
        super().__init__(f"{component}: {cause}")
        self.component = component
        self.cause = cause


class ConfigError(ValueError):
    pass


@dataclass
class RuntimeConfig:
    mode: str = "live"  # live | lockstep
    host: str = "127.0.0.1"
    broker: bool = True
    broker_port: int = 8026
    engine: bool = True
    engine_port: int = 8027
    history: bool = True
    history_port: int = 8028
    history_dir: str = "./history"
    simulator: bool = True
    sim_rest_port: int = 8029
    sim_tcp_port: int = 8030
    sim_token: Optional[str] = None
    pipelines: bool = True
    scenario_path: Optional[str] = None  # bundled demo when unset
    clock_scale: float = 60.0
    tick_seconds: float = 5.0  # sim seconds between position frames
    poll_seconds: float = 60.0  # sim seconds between schedule polls
    step_seconds: float = 30.0  # lockstep advance per iteration
    duration_s: Optional[float] = None  # sim seconds; None runs until stopped
    delay_threshold_s: float = 300.0
    log_level: str = "INFO"

    @classmethod
    def from_document(cls, document: dict) -> "RuntimeConfig":
        known = {f.name: f for f in dataclasses.fields(cls)}
        unknown = set(document) - set(known)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**document)

    @classmethod
    def load(cls, path: Optional[str | Path] = None,
             env: Optional[dict] = None) -> "RuntimeConfig":
        """File values, then AEROTWIN_* environment overrides on top."""
        document = {}
        if path is not None:
            try:
                document = json.loads(Path(path).read_text())
            except (OSError, ValueError) as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
        config = cls.from_document(document)
        config.apply_env(env if env is not None else os.environ)
        return config

    def apply_env(self, env: dict) -> None:
        for field in dataclasses.fields(self):
            raw = env.get(ENV_PREFIX + field.name.upper())
            if raw is None:
                continue
            setattr(self, field.name, _coerce_env(field.name, raw,
                                                  getattr(self, field.name)))

    def problems(self) -> list[str]:
        found = []
        if self.mode not in ("live", "lockstep"):
            found.append(f"mode must be live or lockstep, not {self.mode!r}")
        for name in ("clock_scale", "tick_seconds", "poll_seconds",
                     "step_seconds"):
            if getattr(self, name) <= 0:
                found.append(f"{name} must be positive")
        if self.duration_s is not None and self.duration_s <= 0:
            found.append("duration_s must be positive when set")
        if not self.broker and (self.engine or self.history
                                or self.pipelines):
            found.append("engine, history and pipelines all need the broker")
        if self.pipelines and not self.simulator:
            found.append("pipelines need the simulator as their feed source")
        ports = {}
        for name, enabled in (("broker_port", self.broker),
                              ("engine_port", self.engine),
                              ("history_port", self.history),
                              ("sim_rest_port", self.simulator),
                              ("sim_tcp_port", self.simulator)):
            port = getattr(self, name)
            if not enabled or port == 0:
                continue
            if port in ports:
                found.append(f"{name} and {ports[port]} share port {port}")
            ports[port] = name
        if self.scenario_path and not Path(self.scenario_path).exists():
            found.append(f"scenario file {self.scenario_path} does not exist")
        return found

    def validate(self) -> "RuntimeConfig":
        found = self.problems()
        if found:
            raise ConfigError("; ".join(found))
        return self


def _coerce_env(name: str, raw: str, current: Any) -> Any:
    if isinstance(current, bool):
        return raw.strip().lower() in _TRUE_WORDS
    if isinstance(current, int) and not isinstance(current, bool):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    if current is None and name in ("duration_s",):
        return float(raw)
    return raw


class TowerFeed:
    """Posts scripted take-off times to the engine, the one milestone the
    schedule feed does not carry."""

    def __init__(self, script: ScenarioScript, engine_url: str,
                 session: Optional[requests.Session] = None):
        self.engine_url = engine_url.rstrip("/")
        self._session = session or requests.Session()
        self._pending: list[tuple[_dt.datetime, str, _dt.datetime]] = []
        for index, flight in enumerate(script.flights):
            if "ATOT" not in flight.milestones:
                continue
            when = flight.milestone_at(script.start, "ATOT")
            urn = make_entity_id("Flight", str(index + 1))
            self._pending.append((when, urn, when))
        self._pending.sort()
        self.posted = 0
        self.rejected = 0

    @property
    def pending(self) -> int:
        return len(self._pending)

    def next_due(self) -> Optional[_dt.datetime]:
        return self._pending[0][0] if self._pending else None

    def step(self, now: _dt.datetime) -> int:
        """Deliver every due milestone; returns how many were posted."""
        sent = 0
        while self._pending and self._pending[0][0] <= now:
            when, urn, stamp = self._pending[0]
            response = self._session.post(
                f"{self.engine_url}/flights/{urn}/milestones",
                json={"milestone": "ATOT",
                      "at": timefmt.format_wire(stamp)},
                timeout=10)
            if response.status_code == 404:
                # the schedule feed has not created the flight yet; retry
                break
            self._pending.pop(0)
            if response.status_code == 200:
                self.posted += 1
                sent += 1
            else:
                self.rejected += 1
                log.warning("tower milestone for %s rejected: %s", urn,
                            response.text[:200])
        return sent

    def counters(self) -> dict:
        return {"posted": self.posted, "rejected": self.rejected,
                "pending": self.pending}


class AirportTwin:
    """The running system. Components start in dependency order and stop in
    reverse; any startup failure names the component and unwinds."""

    def __init__(self, config: RuntimeConfig,
                 script: Optional[ScenarioScript] = None):
        self.config = config.validate()
        if script is not None:
            self.script = script
        elif config.scenario_path:
            self.script = load_script(config.scenario_path)
        else:
            self.script = demo_turnaround_script()
        self.clock = SimClock(self.script.start, scale=config.clock_scale,
                              manual=(config.mode == "lockstep"))
        self.broker_core: Optional[ContextBroker] = None
        self.broker: Optional[BrokerServer] = None
        self.history_store: Optional[HistoryStore] = None
        self.history: Optional[HistoryService] = None
        self.engine: Optional[EngineService] = None
        self.simulator: Optional[SimulatorServer] = None
        self.chroma: Optional[Pipeline] = None
        self.positions: Optional[Pipeline] = None
        self.poller: Optional[RestPoller] = None
        self.stream: Optional[TcpStreamClient] = None
        self.tower: Optional[TowerFeed] = None
        self._tower_thread: Optional[threading.Thread] = None
        self._stop = threading.Event()
        self._started = False
        self._frames_injected = 0

    # --- lifecycle -----------------------------------------------------------

    def start(self) -> "AirportTwin":
        config = self.config
        live = config.mode == "live"
        try:
            component = "broker"
            if config.broker:
                self.broker_core = ContextBroker(clock=self.clock.now)
                self.broker = BrokerServer(
                    self.broker_core, host=config.host,
                    port=config.broker_port,
                    dispatch="thread" if live else "manual")
                self.broker.start()

            component = "history"
            if config.history:
                self.history_store = HistoryStore(config.history_dir)
                self.history = HistoryService(
                    self.history_store, broker_url=self.broker.url,
                    host=config.host, port=config.history_port)
                self.history.start()

            component = "engine"
            if config.engine:
                self.engine = EngineService(
                    self.broker.url, airport_iata=self.script.airport_iata,
                    clock=self.clock.now,
                    delay_threshold_s=config.delay_threshold_s,
                    host=config.host, port=config.engine_port)
                self.engine.start()

            component = "reference-data"
            if config.broker:
                self.seed_reference_entities()

            component = "simulator"
            if config.simulator:
                self.simulator = SimulatorServer(
                    self.script, self.clock,
                    tick_seconds=config.tick_seconds,
                    token=config.sim_token, host=config.host,
                    rest_port=config.sim_rest_port,
                    tcp_port=config.sim_tcp_port)
                self.simulator.start()

            component = "pipelines"
            if config.pipelines:
                self.chroma = Pipeline(chroma_pipeline_config(
                    self.broker.url, source_url=self.simulator.schedule_url,
                    airport_iata=self.script.airport_iata,
                    poll_seconds=config.poll_seconds))
                self.positions = Pipeline(positions_pipeline_config(
                    self.broker.url, host=config.host,
                    airport_iata=self.script.airport_iata))
                headers = ({TOKEN_HEADER: config.sim_token}
                           if config.sim_token else None)
                self.poller = RestPoller(
                    self.simulator.schedule_url,
                    interval_seconds=max(
                        config.poll_seconds / config.clock_scale, 0.01),
                    emit=self.chroma.feed, headers=headers,
                    source_name="chroma")
                if live:
                    self.poller.start()
                    host, port = self.simulator.tcp_address
                    self.stream = TcpStreamClient(
                        host, port, emit=self.positions.feed,
                        source_name="planefinder")
                    self.stream.start()

            component = "tower"
            if config.engine and config.simulator:
                self.tower = TowerFeed(self.script, self.engine.url)
                if live:
                    self._tower_thread = threading.Thread(
                        target=self._tower_loop, name="tower", daemon=True)
                    self._tower_thread.start()
        except Exception as exc:
            self.stop()
            raise StartupError(component, exc) from exc
        self._started = True
        log.info("twin up: %s", json.dumps(self.endpoints()))
        return self

    def request_stop(self) -> None:
        """Make run_for/run_lockstep return; safe from signal handlers."""
        self._stop.set()

    def stop(self) -> None:
        self._stop.set()
        for piece, closer in (
                (self.poller, lambda p: p.stop()),
                (self.stream, lambda s: s.stop()),
                (self._tower_thread, lambda t: t.join(timeout=10)),
                (self.engine, lambda e: e.stop()),
                (self.history, lambda h: h.stop()),
                (self.history_store, lambda s: s.close()),
                (self.simulator, lambda s: s.stop()),
                (self.broker, lambda b: b.stop()),
        ):
            if piece is None:
                continue
            try:
                closer(piece)
            except Exception:  # noqa: BLE001 - shutdown must not cascade
                log.exception("error stopping %r", piece)
        self._started = False

    def __enter__(self) -> "AirportTwin":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.stop()

    # --- reference data ----------------------------------------------------

    def seed_reference_entities(self) -> None:
        """Airports and airlines are static context; the feeds only carry
        them as relationships, so the runtime creates the entities."""
        client = BrokerClient(self.broker.url)
        airports = {self.script.airport_iata}
        airlines = set()
        icao_by_iata = {}
        for flight in self.script.flights:
            airports.add(flight.other_airport_iata)
            icao_by_iata[flight.other_airport_iata] = \
                flight.other_airport_icao
            airlines.add(flight.airline_iata)
        for iata in sorted(airports):
            known = AIRPORTS.get(iata)
            record = AirportRecord(
                key=iata, iataCode=iata,
                icaoCode=known[0] if known else icao_by_iata.get(iata),
                name=iata,
                location={"type": "Point",
                          "coordinates": [known[1], known[2]]}
                if known else None)
            client.upsert(record.to_entity())
        for iata in sorted(airlines):
            client.upsert(AirlineRecord(key=iata, iataCode=iata,
                                        name=iata).to_entity())

    # --- live driving ---------------------------------------------------------

    def _tower_loop(self) -> None:
        while not self._stop.is_set() and self.tower.pending:
            self.tower.step(self.clock.now())
            due = self.tower.next_due()
            if due is None:
                return
            gap = (due - self.clock.now()).total_seconds()
            self.clock.sleep(max(min(gap, 30.0), 1.0), stop=self._stop)

    def run_for(self, sim_seconds: Optional[float] = None) -> None:
        """Block until the scenario clock has advanced sim_seconds (or the
        configured duration), or until stop() is called elsewhere."""
        target = sim_seconds if sim_seconds is not None \
            else self.config.duration_s
        while not self._stop.is_set():
            if target is not None and self.clock.elapsed() >= target:
                return
            self._stop.wait(0.05)

    # --- lockstep driving -------------------------------------------------------

    def pump(self) -> int:
        """Drain broker notifications to a fixpoint; lockstep mode only."""
        drained = 0
        while True:
            count = self.broker_core.flush_notifications()
            if count == 0:
                return drained
            drained += count

    def lockstep_tick(self) -> None:
        """One deterministic step: advance time, poll the schedule, inject
        one position frame, fire due tower milestones, settle the broker."""
        self.clock.advance(self.config.step_seconds)
        now = self.clock.now()
        if self.poller is not None:
            self.poller.poll_once()
            self.pump()
        if self.positions is not None:
            frame = frame_at(self.script, now)
            if frame:
                self._frames_injected += 1
                self.positions.feed(FlowRecord(
                    payload=frame, source="planefinder",
                    sequence=(self._frames_injected,)))
                self.pump()
        if self.tower is not None:
            if self.tower.step(now):
                self.pump()

    def run_lockstep(self, sim_seconds: Optional[float] = None) -> None:
        if self.config.mode != "lockstep":
            raise RuntimeError("run_lockstep needs mode=lockstep")
        target = sim_seconds if sim_seconds is not None \
            else self.config.duration_s
        if target is None:
            raise ConfigError("lockstep runs need a duration")
        while self.clock.elapsed() < target and not self._stop.is_set():
            self.lockstep_tick()
        self.pump()

    def run(self) -> None:
        if self.config.mode == "lockstep":
            self.run_lockstep()
        else:
            self.run_for()

    # --- introspection -----------------------------------------------------------

    def endpoints(self) -> dict:
        doc = {"mode": self.config.mode}
        if self.broker:
            doc["broker"] = self.broker.url
        if self.engine:
            doc["engine"] = self.engine.url
        if self.history:
            doc["history"] = self.history.url
        if self.simulator:
            doc["schedule"] = self.simulator.schedule_url
            host, port = self.simulator.tcp_address
            doc["positions"] = f"tcp://{host}:{port}"
        return doc

    def status(self) -> dict:
        doc = {
            "mode": self.config.mode,
            "clock": timefmt.format_wire(self.clock.now()),
            "endpoints": self.endpoints(),
        }
        if self.broker_core:
            doc["broker"] = self.broker_core.metrics_snapshot()
        if self.engine:
            doc["engine"] = self.engine.metrics_snapshot()
        if self.history:
            doc["history"] = self.history.metrics_snapshot()
        if self.chroma:
            doc["chroma"] = self.chroma.counters()
        if self.positions:
            doc["positions"] = self.positions.counters()
        if self.poller:
            doc["schedulePoller"] = {"polls": self.poller.polls,
                                     "records": self.poller.records,
                                     "failures": self.poller.failures}
        if self.stream:
            doc["positionStream"] = {"frames": self.stream.frames}
        if self.tower:
            doc["tower"] = self.tower.counters()
        return doc
