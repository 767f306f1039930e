"""Renders operational summaries from a running broker/history pair: a
stand-occupancy Gantt, aircraft ground tracks, and a flight table CSV."""
from __future__ import annotations

import csv
import datetime as _dt
import logging
from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")  # file output only, no display
import matplotlib.dates as mdates  # noqa: E402
import matplotlib.pyplot as plt  # noqa: E402
import requests  # noqa: E402

from .broker import BrokerClient  # noqa: E402
from .engine import acdm  # noqa: E402
from .model import timefmt  # noqa: E402
from .model.records import FlightRecord  # noqa: E402

log = logging.getLogger(__name__)

STATUS_COLOURS = {
    "late": "#d0342c",
    "onTime": "#3a923a",
    "future": "#3274a1",
    "unknown": "#8c8c8c",
}

_TIME_FIELDS = ("dateScheduled", "dateSOBT", "dateSIBT", "dateAOBT",
                "dateTOBT", "dateEOBT", "dateATOT", "dateETOT", "dateALDT",
                "dateELDT", "dateAIBT", "dateEIBT")


def _flight_times(record: FlightRecord) -> list[_dt.datetime]:
    return [value for name in _TIME_FIELDS
            if (value := getattr(record, name)) is not None]


def _bar_window(record: FlightRecord) -> Optional[tuple[_dt.datetime,
                                                        _dt.datetime]]:
    times = _flight_times(record)
    if not times:
        return None
    low, high = min(times), max(times)
    if low == high:  # give a zero-span flight a visible sliver
        pad = _dt.timedelta(seconds=300)
        return low - pad, high + pad
    return low, high


def _iata(urn: Optional[str]) -> str:
    # urn:ngsi-ld:Airport:airport-ABZ -> ABZ
    if not urn:
        return ""
    return urn.rsplit("-", 1)[-1]


def collect_flights(broker_url: str,
                    threshold_s: float = 300.0) -> list[dict]:
    """One row per Flight entity with its classification at report time."""
    client = BrokerClient(broker_url)
    records = [FlightRecord.from_entity(entity)
               for entity in client.query("Flight")]
    records.sort(key=lambda r: (r.flightNumber or "", r.key))
    all_times = [t for record in records for t in _flight_times(record)]
    now = max(all_times) if all_times else _dt.datetime.now(timefmt.UTC)
    rows = []
    for record in records:
        status = acdm.classify_delay(record, now,
                                     threshold_seconds=threshold_s)
        rows.append({"record": record, "status": status,
                     "window": _bar_window(record)})
    return rows


def render_gantt(rows: list[dict], path: Path) -> None:
    stands = sorted({row["record"].standCode or "?" for row in rows})
    index = {stand: i for i, stand in enumerate(stands)}
    fig, ax = plt.subplots(figsize=(11, max(2.5, 0.8 * len(stands) + 1.5)))
    latest = None
    for row in rows:
        window = row["window"]
        if window is None:
            continue
        start, end = window
        latest = end if latest is None else max(latest, end)
        y = index[row["record"].standCode or "?"]
        left = mdates.date2num(start)
        width = mdates.date2num(end) - left
        colour = STATUS_COLOURS.get(row["status"].classification,
                                    STATUS_COLOURS["unknown"])
        ax.barh(y, width, left=left, height=0.6, color=colour,
                edgecolor="black", linewidth=0.5)
        ax.text(left + width / 2, y, row["record"].flightNumber or "?",
                ha="center", va="center", fontsize=8, color="white")
    if latest is not None:
        ax.axvline(mdates.date2num(latest), color="#28367d", linewidth=1.2)
    ax.set_yticks(range(len(stands)), stands)
    ax.set_ylabel("stand")
    ax.xaxis.set_major_formatter(mdates.DateFormatter("%H:%M"))
    ax.set_xlabel("time (UTC)")
    ax.set_title("Stand occupancy")
    handles = [plt.Rectangle((0, 0), 1, 1, color=colour)
               for colour in STATUS_COLOURS.values()]
    ax.legend(handles, list(STATUS_COLOURS), loc="upper left", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def _track_points(history_url: str, entity_id: str) -> list[tuple[float,
                                                                  float]]:
    response = requests.get(f"{history_url}/history/{entity_id}", timeout=30)
    response.raise_for_status()
    points = []
    for event in response.json()["events"]:
        location = event["snapshot"].get("location")
        if not location:
            continue
        coordinates = location["value"].get("coordinates")
        if coordinates and len(coordinates) >= 2:
            points.append((coordinates[0], coordinates[1]))  # [lat, lon]
    return points


def render_tracks(broker_url: str, history_url: str, path: Path) -> int:
    """Ground-track polylines per aircraft; returns how many were drawn."""
    client = BrokerClient(broker_url)
    fig, ax = plt.subplots(figsize=(8, 8))
    drawn = 0
    for entity in sorted(client.query("Aircraft"), key=lambda e: e.id):
        points = _track_points(history_url, entity.id)
        if len(points) < 2:
            continue
        lats = [p[0] for p in points]
        lons = [p[1] for p in points]
        label = entity.attr_value("registration") or \
            entity.id.rsplit("-", 1)[-1]
        ax.plot(lons, lats, linewidth=1.0, label=label)
        ax.plot(lons[-1], lats[-1], marker="o", markersize=4)
        drawn += 1
    for airport in client.query("Airport"):
        location = airport.attr_value("location")
        if not location:
            continue
        lat, lon = location["coordinates"][:2]
        ax.plot(lon, lat, marker="^", markersize=9, color="black")
        ax.annotate(airport.attr_value("iataCode") or "", (lon, lat),
                    textcoords="offset points", xytext=(6, 6), fontsize=9)
    ax.set_xlabel("longitude")
    ax.set_ylabel("latitude")
    ax.set_title("Aircraft ground tracks")
    if drawn:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return drawn


def write_flight_csv(rows: list[dict], path: Path) -> None:
    columns = ["flight", "from", "to", "stand", "state", "scheduled",
               "sobt", "sibt", "aobt", "atot", "aldt", "aibt",
               "taxi_out_s", "taxi_in_s", "turnaround_s",
               "classification", "delay_s", "reference"]
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(columns)
        for row in rows:
            record = row["record"]
            status = row["status"]
            stamp = lambda v: timefmt.format_wire(v) if v else ""  # noqa: E731
            writer.writerow([
                record.flightNumber or "", _iata(record.departsFromAirport),
                _iata(record.arrivesToAirport), record.standCode or "",
                record.state or "", stamp(record.dateScheduled),
                stamp(record.dateSOBT), stamp(record.dateSIBT),
                stamp(record.dateAOBT), stamp(record.dateATOT),
                stamp(record.dateALDT), stamp(record.dateAIBT),
                record.dateAXOT if record.dateAXOT is not None else "",
                record.dateAXIT if record.dateAXIT is not None else "",
                record.dateATTT if record.dateATTT is not None else "",
                status.classification,
                status.delay_seconds if status.delay_seconds is not None
                else "",
                status.reference_milestone or "",
            ])


def render_report(broker_url: str, history_url: Optional[str],
                  out_dir: str | Path,
                  threshold_s: float = 300.0) -> list[Path]:
    """Write gantt.png, flights.csv and (with history) tracks.png."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = collect_flights(broker_url, threshold_s)
    written = []
    gantt = out / "gantt.png"
    render_gantt(rows, gantt)
    written.append(gantt)
    table = out / "flights.csv"
    write_flight_csv(rows, table)
    written.append(table)
    if history_url:
        tracks = out / "tracks.png"
        render_tracks(broker_url, history_url, tracks)
        written.append(tracks)
    else:
        log.warning("no history service configured; skipping tracks figure")
    return written
