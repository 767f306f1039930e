"""Command line behaviour: exit codes, output shapes, offline replay, and
process-level run/shutdown, driven against an in-process twin where a live
socket is enough and real subprocesses where signals are involved."""
import json
import signal
import socket
import subprocess
import sys
import time
from pathlib import Path

import pytest

from aerotwin.cli import main
from aerotwin.model import timefmt
from aerotwin.runtime import AirportTwin, RuntimeConfig

CHROMA_CAPTURE = Path(__file__).parent / "data/captures/chroma_capture.ndjson"
POSITIONS_CAPTURE = Path(__file__).parent / \
    "data/captures/positions_capture.ndjson"
REPO_ROOT = Path(__file__).resolve().parent.parent


@pytest.fixture(scope="module")
def twin(tmp_path_factory):
    """A finished lockstep run whose services stay up for querying."""
    tmp = tmp_path_factory.mktemp("cli-twin")
    config = RuntimeConfig(mode="lockstep", history_dir=str(tmp / "history"),
                           step_seconds=30.0, duration_s=9000.0,
                           broker_port=0, engine_port=0, history_port=0,
                           sim_rest_port=0, sim_tcp_port=0)
    running = AirportTwin(config).start()
    try:
        running.run_lockstep()
        yield running
    finally:
        running.stop()


def run_cli(*argv) -> tuple[int, str, str]:
    proc = subprocess.run(
        [sys.executable, "-m", "aerotwin.cli", *argv],
        capture_output=True, text=True, timeout=120, cwd=REPO_ROOT)
    return proc.returncode, proc.stdout, proc.stderr


class TestArgumentHandling:
    def test_usage_errors_exit_with_the_user_code(self):
        with pytest.raises(SystemExit) as caught:
            main(["query", "flights", "--no-such-flag"])
        assert caught.value.code == 1

    def test_missing_command_is_a_user_error(self):
        with pytest.raises(SystemExit) as caught:
            main([])
        assert caught.value.code == 1


class TestQueryFlights:
    def test_number_filter_yields_one_row(self, twin, capsys):
        assert main(["query", "flights", "--number", "1234",
                     "--broker", twin.broker.url]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 3  # header, rule, one flight
        assert "1234" in lines[2]
        assert "SVG" in lines[2] and "ABZ" in lines[2]

    def test_all_flights_listed(self, twin, capsys):
        assert main(["query", "flights",
                     "--broker", twin.broker.url]) == 0
        out = capsys.readouterr().out
        assert "1234" in out and "1235" in out

    def test_json_output_parses(self, twin, capsys):
        assert main(["query", "flights", "--json",
                     "--broker", twin.broker.url]) == 0
        documents = json.loads(capsys.readouterr().out)
        assert len(documents) == 2
        assert {d["type"] for d in documents} == {"Flight"}

    def test_unreachable_broker_is_a_runtime_failure(self, capsys):
        assert main(["query", "flights",
                     "--broker", "http://127.0.0.1:1"]) == 2
        assert "cannot reach" in capsys.readouterr().err


class TestQueryEntity:
    def test_table_lists_attributes(self, twin, capsys):
        assert main(["query", "entity",
                     "--id", "urn:ngsi-ld:Aircraft:aircraft-OYAAA",
                     "--broker", twin.broker.url]) == 0
        out = capsys.readouterr().out
        assert "urn:ngsi-ld:Aircraft:aircraft-OYAAA (Aircraft)" in out
        assert "GeoProperty" in out

    def test_unknown_entity_exits_nonzero(self, twin, capsys):
        assert main(["query", "entity", "--id", "urn:ngsi-ld:Flight:ghost",
                     "--broker", twin.broker.url]) == 1
        assert "not found" in capsys.readouterr().err

    def test_json_matches_broker_document(self, twin, capsys):
        assert main(["query", "entity", "--json",
                     "--id", "urn:ngsi-ld:Flight:flight-1",
                     "--broker", twin.broker.url]) == 0
        document = json.loads(capsys.readouterr().out)
        assert document["id"] == "urn:ngsi-ld:Flight:flight-1"
        assert document["dateAXIT"]["value"] == 300.0


class TestQueryHistory:
    def test_rows_match_the_http_api(self, twin, capsys):
        import requests
        api = requests.get(
            f"{twin.history.url}/history/urn:ngsi-ld:Flight:flight-2",
            timeout=10).json()
        assert main(["query", "history",
                     "--id", "urn:ngsi-ld:Flight:flight-2",
                     "--history", twin.history.url]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) - 2 == len(api["events"])

    def test_window_narrows_the_rows(self, twin, capsys):
        full_args = ["query", "history", "--id",
                     "urn:ngsi-ld:Flight:flight-2",
                     "--history", twin.history.url, "--json"]
        assert main(full_args) == 0
        events = json.loads(capsys.readouterr().out)["events"]
        pivot = events[1]["recordedAt"]
        assert main(full_args + ["--to", pivot]) == 0
        windowed = json.loads(capsys.readouterr().out)["events"]
        assert [e["sequence"] for e in windowed] == \
            [e["sequence"] for e in events if e["recordedAt"] < pivot]

    def test_bad_timestamp_is_a_user_error(self, twin, capsys):
        assert main(["query", "history", "--id", "urn:ngsi-ld:Flight:flight-2",
                     "--history", twin.history.url,
                     "--from", "yesterday-ish"]) == 1
        assert "bad query" in capsys.readouterr().err


class TestReplay:
    def test_chroma_capture_produces_the_flight_entity(self, tmp_path,
                                                       capsys):
        out = tmp_path / "out"
        assert main(["replay", "--capture", str(CHROMA_CAPTURE),
                     "--pipeline", "chroma", "--out", str(out)]) == 0
        files = sorted(out.iterdir())
        assert [f.name for f in files] == ["0001.json"]
        document = json.loads(files[0].read_text())
        assert document["id"] == "urn:ngsi-ld:Flight:flight-1"
        assert document["dateAIBT"]["value"]["@value"] == \
            "2021-02-04T17:20:00.00Z"
        assert "1 outputs" in capsys.readouterr().out

    def test_positions_capture_produces_aircraft(self, tmp_path):
        out = tmp_path / "out"
        assert main(["replay", "--capture", str(POSITIONS_CAPTURE),
                     "--pipeline", "positions", "--out", str(out)]) == 0
        first = json.loads((out / "0001.json").read_text())
        assert first["type"] == "Aircraft"
        assert first["id"] == "urn:ngsi-ld:Aircraft:aircraft-AAAAAA"

    def test_config_file_equals_builtin(self, tmp_path):
        by_name = tmp_path / "by-name"
        by_path = tmp_path / "by-path"
        config = REPO_ROOT / "configs/pipelines/chroma.json"
        main(["replay", "--capture", str(CHROMA_CAPTURE),
              "--pipeline", "chroma", "--out", str(by_name)])
        main(["replay", "--capture", str(CHROMA_CAPTURE),
              "--pipeline", str(config), "--out", str(by_path)])
        assert (by_name / "0001.json").read_text() == \
            (by_path / "0001.json").read_text()

    def test_two_runs_are_identical(self, tmp_path):
        first = tmp_path / "a"
        second = tmp_path / "b"
        for target in (first, second):
            main(["replay", "--capture", str(POSITIONS_CAPTURE),
                  "--pipeline", "positions", "--out", str(target)])
        names = sorted(p.name for p in first.iterdir())
        assert names == sorted(p.name for p in second.iterdir())
        for name in names:
            assert (first / name).read_bytes() == (second / name).read_bytes()

    def test_empty_capture_writes_nothing(self, tmp_path, capsys):
        capture = tmp_path / "empty.ndjson"
        capture.write_text("")
        out = tmp_path / "out"
        assert main(["replay", "--capture", str(capture),
                     "--pipeline", "chroma", "--out", str(out)]) == 0
        assert list(out.iterdir()) == []

    def test_malformed_line_is_reported_with_its_number(self, tmp_path,
                                                        capsys):
        capture = tmp_path / "bad.ndjson"
        capture.write_text('{"ok": 1}\n{broken\n')
        assert main(["replay", "--capture", str(capture),
                     "--pipeline", "chroma", "--out",
                     str(tmp_path / "out")]) == 1
        assert "line 2" in capsys.readouterr().err

    def test_missing_capture_file(self, tmp_path, capsys):
        assert main(["replay", "--capture", str(tmp_path / "nope.ndjson"),
                     "--pipeline", "chroma", "--out",
                     str(tmp_path / "out")]) == 1
        assert "does not exist" in capsys.readouterr().err


class TestSimulate:
    def test_same_seed_same_script(self, tmp_path, capsys):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert main(["simulate", "--seed", "99", "--pairs", "4",
                     "--out", str(a)]) == 0
        assert main(["simulate", "--seed", "99", "--pairs", "4",
                     "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        assert "8 flights" in capsys.readouterr().out

    def test_script_is_loadable(self, tmp_path):
        from aerotwin.sim.scenario import load_script
        path = tmp_path / "s.json"
        main(["simulate", "--seed", "7", "--pairs", "2", "--out", str(path)])
        script = load_script(path)
        assert len(script.flights) == 4


class TestMilestone:
    def test_resolves_flight_number_and_accepts_repeat(self, twin, capsys):
        # reposting the tower time it already holds is a no-op, not an error
        atot = twin.script.flights[1].milestone_at(twin.script.start, "ATOT")
        assert main(["milestone", "--number", "1235", "--milestone", "ATOT",
                     "--at", timefmt.format_wire(atot),
                     "--engine", twin.engine.url]) == 0
        out = capsys.readouterr().out
        assert "applied ATOT" in out and "state=active" in out

    def test_out_of_order_milestone_is_rejected(self, twin, capsys):
        assert main(["milestone", "--flight", "urn:ngsi-ld:Flight:flight-2",
                     "--milestone", "ATOT",
                     "--at", "2020-01-01T00:00:00Z",
                     "--engine", twin.engine.url]) == 1
        assert "rejected" in capsys.readouterr().err

    def test_unknown_number(self, twin, capsys):
        assert main(["milestone", "--number", "0000", "--milestone", "AOBT",
                     "--at", "2021-02-04T10:00:00Z",
                     "--engine", twin.engine.url]) == 1
        assert "no tracked flight" in capsys.readouterr().err

    def test_bad_timestamp(self, twin, capsys):
        assert main(["milestone", "--number", "1235", "--milestone", "ATOT",
                     "--at", "ten to eight",
                     "--engine", twin.engine.url]) == 1
        assert "bad timestamp" in capsys.readouterr().err

    def test_unreachable_engine(self, capsys):
        assert main(["milestone", "--flight", "urn:ngsi-ld:Flight:flight-2",
                     "--milestone", "ATOT", "--at", "2021-02-04T10:00:00Z",
                     "--engine", "http://127.0.0.1:1"]) == 2


class TestReport:
    def test_writes_figures_and_csv(self, twin, tmp_path, capsys):
        out = tmp_path / "report"
        assert main(["report", "--broker", twin.broker.url,
                     "--history", twin.history.url, "--out", str(out)]) == 0
        names = {p.name for p in out.iterdir()}
        assert names == {"gantt.png", "tracks.png", "flights.csv"}
        for name in names:
            assert (out / name).stat().st_size > 0
        rows = (out / "flights.csv").read_text().strip().splitlines()
        assert len(rows) == 3
        header = rows[0].split(",")
        by_name = [dict(zip(header, row.split(","))) for row in rows[1:]]
        inbound = next(r for r in by_name if r["flight"] == "1234")
        outbound = next(r for r in by_name if r["flight"] == "1235")
        assert inbound["taxi_in_s"] == "300.0"
        assert outbound["taxi_out_s"] == "300.0"
        assert outbound["turnaround_s"] == "1800.0"

    def test_skipping_history_skips_tracks(self, twin, tmp_path):
        out = tmp_path / "report"
        assert main(["report", "--broker", twin.broker.url,
                     "--history", "none", "--out", str(out)]) == 0
        assert {p.name for p in out.iterdir()} == {"gantt.png",
                                                   "flights.csv"}


class TestRunCommand:
    def test_bad_config_is_a_user_error(self, tmp_path, capsys):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"mode": "warp"}))
        assert main(["run", "--config", str(path)]) == 1
        assert "bad configuration" in capsys.readouterr().err

    def test_startup_failure_names_the_component(self, tmp_path):
        blocker = socket.socket()
        blocker.bind(("127.0.0.1", 0))
        blocker.listen(1)
        port = blocker.getsockname()[1]
        try:
            code, _, err = run_cli(
                "run", "--mode", "lockstep", "--duration", "60",
                *_env_ports(broker=port))
        finally:
            blocker.close()
        assert code == 2
        assert "'broker'" in err

    def test_lockstep_run_completes_by_itself(self, tmp_path):
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps({
            "mode": "lockstep", "duration_s": 9000.0, "step_seconds": 30.0,
            "history_dir": str(tmp_path / "history"),
            "broker_port": 0, "engine_port": 0, "history_port": 0,
            "sim_rest_port": 0, "sim_tcp_port": 0}))
        code, out, err = run_cli("run", "--config", str(config))
        assert code == 0, err
        endpoints = json.loads(out.splitlines()[0])
        assert endpoints["mode"] == "lockstep"
        assert "final status" in err

    def test_sigint_shuts_down_cleanly(self, tmp_path):
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps({
            "mode": "live", "clock_scale": 600.0, "tick_seconds": 60.0,
            "poll_seconds": 120.0,
            "history_dir": str(tmp_path / "history"),
            "broker_port": 0, "engine_port": 0, "history_port": 0,
            "sim_rest_port": 0, "sim_tcp_port": 0}))
        proc = subprocess.Popen(
            [sys.executable, "-m", "aerotwin.cli", "run",
             "--config", str(config)],
            stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True,
            cwd=REPO_ROOT)
        try:
            line = proc.stdout.readline()  # endpoints mean startup finished
            assert json.loads(line)["mode"] == "live"
            time.sleep(2.0)
            proc.send_signal(signal.SIGINT)
            code = proc.wait(timeout=30)
        finally:
            if proc.poll() is None:
                proc.kill()
                proc.wait(timeout=10)
        assert code == 0
        assert "shutting down" in proc.stderr.read()


def _env_ports(broker: int) -> list[str]:
    # run_cli passes flags only; ports ride on the config file normally,
    # so for the port-clash case write them through a throwaway config
    import tempfile
    path = Path(tempfile.mkdtemp()) / "cfg.json"
    path.write_text(json.dumps({
        "broker_port": broker, "engine_port": 0, "history_port": 0,
        "sim_rest_port": 0, "sim_tcp_port": 0,
        "history_dir": str(path.parent / "history")}))
    return ["--config", str(path)]
