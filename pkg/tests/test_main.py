"""Tests for sss_kv/__main__.py.

Covers:
  - exit codes of the bench, check and scenario subcommands (including short scenario names)
  - configuration errors reported as exit code 2
"""

from __future__ import annotations

import json

from sss_kv.__main__ import main
from sss_kv.scenarios import run_scenario


class TestCommandLine:
    """Tests for main() and its exit codes."""

    def test_scenario_passes(self, capsys):
        assert main(["scenario", "single-key-wait"]) == 0
        assert "t=2101 N1 reply T2" in capsys.readouterr().out

    def test_scenario_short_names(self, capsys):
        assert main(["scenario", "fig3"]) == 0
        assert "t=2101 N1 reply T2" in capsys.readouterr().out
        assert main(["scenario", "fig4"]) == 0
        assert "t=1101 N2 reply T3" in capsys.readouterr().out

    def test_bench_writes_report(self, tmp_path, capsys):
        cfg = tmp_path / "small.yaml"
        cfg.write_text("cluster:\n  num_keys: 40\nworkload:\n  clients_per_node: 2\n  duration: 40\n", encoding="utf-8")
        out = tmp_path / "report.json"
        code = main(
            [
                "bench",
                "--config",
                str(cfg),
                "--seed",
                "3",
                "--latency",
                "0.1",
                "--out",
                str(out),
                "--samples",
                str(tmp_path / "samples.csv"),
            ]
        )
        capsys.readouterr()
        assert code == 0
        assert json.loads(out.read_text())["seed"] == 3

    def test_check_exit_codes(self, tmp_path, capsys):
        good = run_scenario("read-skew").cluster.trace.write(tmp_path / "good.ndjson")
        bad = run_scenario("read-skew-unvalidated").cluster.trace.write(tmp_path / "bad.ndjson")
        assert main(["check", str(good)]) == 0
        assert main(["check", str(bad)]) == 1
        capsys.readouterr()

    def test_unreadable_trace(self, tmp_path):
        path = tmp_path / "trace.ndjson"
        path.write_text('{"seq":0,"time":0,"event":"read","node":0,"txn":{"$txn":[0,1]},"data":{}}\n')
        assert main(["check", str(path)]) == 2

    def test_bad_config(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("num_nodes: zero\n", encoding="utf-8")
        assert main(["bench", "--config", str(path)]) == 2
