from __future__ import annotations

import csv
import json

import pytest

from linstab.checkers import ConnectivityObserver, Status
from linstab.cli import EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, bundled_scenarios, main
from linstab.messages import TempDelegate
from linstab.model import SystemState
from linstab.sim import Action, EventKind, Simulator


@pytest.fixture(autouse=True)
def _in_tmp(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)


def test_bundled_scenarios_present():
    assert {"figure1", "converge_n8", "depart_n8"} <= set(bundled_scenarios())


@pytest.mark.parametrize("name", ["figure1", "converge_n8", "depart_n8"])
def test_bundled_scenarios_pass(name, tmp_path, capsys):
    assert main(["run", name, "--out-dir", str(tmp_path)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "EstablishedAt" in out and "violated" not in out


@pytest.mark.parametrize("name", ["figure1", "converge_n8", "depart_n8"])
def test_mutant_is_caught(name, tmp_path, capsys):
    assert main(["run", name, "--mutant", "no-self-intro", "--out-dir", str(tmp_path)]) == EXIT_VIOLATION
    assert "replay with: linstab run" in capsys.readouterr().out


def test_drop_delegate_mutant_is_caught():
    # node 3 hangs off the rest only through the delegated reference
    s = SystemState.empty([1, 2, 3])
    s.nodes[1].right.add(2)
    s.channels[1].append(TempDelegate(3))
    conn = ConnectivityObserver()
    sim = Simulator(s, "mutant:drop-delegate", observers=[conn])
    sim.step(Action(EventKind.DELIVER, 1, index=0))
    assert conn.verdict().status is Status.VIOLATED


def test_figure1_outputs(tmp_path, capsys):
    main(["run", "figure1", "--out-dir", str(tmp_path)])
    out = capsys.readouterr().out
    assert "search #1 from node 1 Failed" in out
    lines = (tmp_path / "figure1.trace.ndjson").read_text().splitlines()
    assert json.loads(lines[0])["type"] == "header"
    rows = list(csv.DictReader(open(tmp_path / "figure1.summary.csv")))
    assert {r["property"] for r in rows} >= {"connectivity", "convergence", "searchability"}


def test_search_race(capsys):
    assert main(["search-race"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "failed before the earlier one was delivered: yes" in out


def test_snapshot(tmp_path, capsys):
    main(["run", "figure1", "--out-dir", str(tmp_path)])
    trace = str(tmp_path / "figure1.trace.ndjson")
    assert main(["snapshot", trace, "--step", "0", "-o", str(tmp_path / "s.dot")]) == EXIT_OK
    assert (tmp_path / "s.dot").read_text().startswith("digraph")
    assert main(["snapshot", trace, "--step", "999999"]) == EXIT_USAGE
    assert "out of range" in capsys.readouterr().err


def test_fuzz_writes_report(tmp_path, capsys):
    out = tmp_path / "rep"
    code = main(["fuzz", "--n", "4..6", "--runs", "3", "--seed", "5", "--out-dir", str(out)])
    assert code == EXIT_OK
    rows = list(csv.DictReader(open(out / "fuzz_plus_summary.csv")))
    assert len(rows) == 3 and all(r["converged_at"] for r in rows)
    for png in ("fuzz_plus_phi.png", "fuzz_plus_convergence.png"):
        assert (out / png).read_bytes()[:4] == b"\x89PNG"


def test_fuzz_star(tmp_path):
    code = main(["fuzz", "--n", "5", "--runs", "2", "--protocol", "star",
                 "--leaving-fraction", "0.2..0.4", "--out-dir", str(tmp_path)])
    assert code == EXIT_OK


@pytest.mark.parametrize("argv", [
    ["fuzz", "--n", "9..4", "--runs", "1"],
    ["fuzz", "--n", "4", "--runs", "0"],
    ["fuzz", "--n", "4", "--runs", "1", "--leaving-fraction", "0.3"],
    ["fuzz", "--n", "4", "--runs", "1", "--protocol", "star", "--leaving-fraction", "1.5"],
    ["run", "no-such-scenario"],
    ["run", "figure1", "--mutant", "nope"],
    ["bogus"],
])
def test_usage_errors(argv):
    assert main(argv) == EXIT_USAGE


def test_schema_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema_version": 99, "protocol": "plus"}))
    assert main(["run", str(bad)]) == EXIT_USAGE
    bad.write_text("{not json")
    assert main(["run", str(bad)]) == EXIT_USAGE
    doc = {"schema_version": 1, "protocol": "plus",
           "initial_state": {"state": {"nodes": [{"id": 1, "right": [7]}], "channels": {}}}}
    bad.write_text(json.dumps(doc))
    assert main(["run", str(bad)]) == EXIT_USAGE


def test_scenario_file_path(tmp_path):
    doc = {"schema_version": 1, "name": "tiny", "protocol": "plus", "seed": 3,
           "initial_state": {"generate": {"n": 5, "corrupted": 2}},
           "properties": ["connectivity", "convergence", "phi_monotone", "determinism"]}
    p = tmp_path / "tiny.json"
    p.write_text(json.dumps(doc))
    assert main(["run", str(p), "--out-dir", str(tmp_path)]) == EXIT_OK
