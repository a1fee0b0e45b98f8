"""Tests for the stl-decomp command line."""

import json
from pathlib import Path

import pytest

from stl_decomposition import __version__
from stl_decomposition.cli import build_parser, main

TOY = Path(__file__).resolve().parent.parent / "scenarios" / "toy_chain.json"


def _write(tmp_path, name, data):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


class TestParser:
    """Tests for argument parsing."""

    def test_decompose_overrides(self):
        args = build_parser().parse_args(["decompose", "toy_chain", "--mode", "decentralized",
                                          "--max-iter", "10", "--workers", "2"])
        assert args.command == "decompose"
        assert (args.mode, args.max_iter, args.workers) == ("decentralized", 10, 2)
        assert args.out is None

    def test_unknown_mode(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["decompose", "toy_chain", "--mode", "gossip"])

    def test_version(self, capsys):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["--version"])
        assert __version__ in capsys.readouterr().out


class TestCommands:
    """Tests for exit codes and printed summaries."""

    def test_check(self, capsys):
        assert main(["-q", "check", "toy_chain"]) == 0
        out = capsys.readouterr().out
        assert "CHECK: toy_chain" in out
        assert "phi_1_3" in out

    def test_decompose_then_verify(self, tmp_path, capsys):
        out_dir = tmp_path / "toy"
        assert main(["-q", "decompose", str(TOY), "--out", str(out_dir),
                     "--verify-samples", "300"]) == 0
        printed = capsys.readouterr().out
        assert "DECOMPOSITION: toy_chain" in printed
        assert "PASS" in printed
        assert (out_dir / "decomposition.json").exists()

        assert main(["-q", "verify", str(out_dir), "--verify-samples", "200"]) == 0
        assert "200/200" in capsys.readouterr().out

    def test_invalid_scenario(self, tmp_path, capsys):
        path = _write(tmp_path, "bad.json", {"schema_version": 1, "radius": -2, "agents": []})
        assert main(["-q", "decompose", str(path), "--out", str(tmp_path / "r")]) == 2
        assert "issues" in capsys.readouterr().err

    def test_conflicting_input_fails_check(self, tmp_path):
        data = json.loads(TOY.read_text())
        data["tasks"] = [
            {"name": "a", "operator": "G", "interval": [0, 10], "edge": [1, 2],
             "shape": {"sides": 4, "beta": 1.0, "center": [5, 0]}},
            {"name": "b", "operator": "G", "interval": [5, 15], "edge": [1, 2],
             "shape": {"sides": 4, "beta": 1.0, "center": [2, 0]}},
        ]
        path = _write(tmp_path, "conflict.json", data)
        assert main(["-q", "check", str(path)]) == 2
        assert main(["-q", "decompose", str(path), "--out", str(tmp_path / "r")]) == 2

    def test_infeasible(self, tmp_path, capsys):
        data = json.loads(TOY.read_text())
        data["tasks"][0]["shape"]["center"] = [30, 0]
        path = _write(tmp_path, "far.json", data)
        assert main(["-q", "decompose", str(path), "--out", str(tmp_path / "r")]) == 3
        err = capsys.readouterr().err
        details = json.loads(err[err.index("{"):])
        assert details["infeasible_alone"] == ["phi_1_3"]
