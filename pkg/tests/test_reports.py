"""Tests for the result directory."""

import csv
import json
from dataclasses import replace
from pathlib import Path

import pytest

from stl_decomposition.config import SolverConfig
from stl_decomposition.errors import ScenarioError
from stl_decomposition.harness import decompose, verify_directory
from stl_decomposition.reports import STRUCTURE_COLUMNS, TRACE_COLUMNS, emit_reports
from stl_decomposition.scenario import load_scenario

TOY = Path(__file__).resolve().parent.parent / "scenarios" / "toy_chain.json"


@pytest.fixture(scope="module")
def centralized_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("centralized")
    written = emit_reports(decompose(load_scenario(TOY)), out)
    return out, written


def _rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def _header(path):
    with open(path, newline="") as f:
        return next(csv.reader(f))


class TestEmitReports:
    """Tests for the files of one run."""

    def test_files(self, centralized_dir):
        out, written = centralized_dir
        names = sorted(p.name for p in written)
        assert names == ["decomposition.json", "graphs.json", "graphs.png", "structure.csv",
                         "trace.csv", "truth_sets.png", "verification.json"]
        assert all((out / name).exists() for name in names)

    def test_structure_table(self, centralized_dir):
        out, _ = centralized_dir
        assert _header(out / "structure.csv") == STRUCTURE_COLUMNS
        rows = _rows(out / "structure.csv")
        assert [r["edge"] for r in rows] == ["1-2", "2-3"]
        assert all(r["pi"] == "1" and r["chi_dim"] == "3" for r in rows)
        assert all(abs(float(r["sum_alpha"]) - 0.5) < 1e-4 for r in rows)

    def test_centralized_trace_is_empty(self, centralized_dir):
        out, _ = centralized_dir
        assert _header(out / "trace.csv") == TRACE_COLUMNS
        assert _rows(out / "trace.csv") == []

    def test_decomposition_record(self, centralized_dir):
        out, _ = centralized_dir
        data = json.loads((out / "decomposition.json").read_text())
        assert data["name"] == "toy_chain"
        assert data["status"] == "Optimal"
        assert abs(data["accuracy"]["phi_1_3"] - 1.0) < 1e-4
        assert len(data["psi_bar"]) == 2
        assert data["decomposed"][0]["path"] == [1, 2, 3]

    def test_graphs_record(self, centralized_dir):
        out, _ = centralized_dir
        data = json.loads((out / "graphs.json").read_text())
        assert data["comm_edges"] == [[1, 2], [2, 3]]
        assert data["task_edges"] == [[1, 3]]
        assert data["rewritten_task_edges"] == [[1, 2], [2, 3]]
        assert data["theta_edges"] == [[[1, 2], [2, 3]]]

    def test_verification_record(self, centralized_dir):
        out, _ = centralized_dir
        data = json.loads((out / "verification.json").read_text())
        assert data["ok"] is True
        assert data["tasks"][0]["passed"] == data["tasks"][0]["total"]

    def test_directory_reverifies(self, centralized_dir):
        out, _ = centralized_dir
        report = verify_directory(out, samples=300, seed=5)
        assert report.ok
        assert report.tasks[0].total == 300

    def test_in_memory_scenario_cannot_be_reverified(self, tmp_path):
        scenario = replace(load_scenario(TOY), source=None)
        emit_reports(decompose(scenario), tmp_path)
        assert json.loads((tmp_path / "decomposition.json").read_text())["scenario"] is None
        with pytest.raises(ScenarioError) as info:
            verify_directory(tmp_path)
        assert info.value.exit_code == 2

    def test_decentralized_run_adds_convergence(self, tmp_path):
        scenario = load_scenario(TOY)
        result = decompose(scenario, SolverConfig(mode="decentralized", max_iter=200))
        written = emit_reports(result, tmp_path)
        assert (tmp_path / "convergence.png") in written
        rows = _rows(tmp_path / "trace.csv")
        assert len(rows) == 2 * len(result.solution.rounds)
        assert {r["edge"] for r in rows} == {"1-2", "2-3"}

    def test_identity_run(self, tmp_path):
        data = json.loads(TOY.read_text())
        data["tasks"][0]["edge"] = [1, 2]
        data["tasks"][0]["shape"]["center"] = [5, 0]
        path = tmp_path / "identity.json"
        path.write_text(json.dumps(data))
        written = emit_reports(decompose(load_scenario(path)), tmp_path / "out")
        assert not (tmp_path / "out" / "truth_sets.png").exists()
        assert len(written) == 5
        record = json.loads((tmp_path / "out" / "decomposition.json").read_text())
        assert record["status"] == "Identity"
        assert _rows(tmp_path / "out" / "structure.csv") == []
