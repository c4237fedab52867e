from __future__ import annotations

import io
import subprocess
import sys

import pytest

from latflow.cli import EXIT_DIVERGED, main
from latflow.ir import deployments_isomorphic, graphs_isomorphic, load_deployment, parse_dsl


def run_cli(*argv):
    out = io.StringIO()
    code = main(list(argv), out)
    return code, out.getvalue()


class TestRun:
    def test_original_on_apples(self):
        code, out = run_cli("run", "--variant", "orig", "--scenario", "apples")
        assert code == 0
        assert out == 'client=1 class=Basic cart=[("apple",2), ("apple",2), ("apple",-4)]\n'

    def test_network_seed_does_not_change_lattice_output(self):
        a = run_cli("run", "--variant", "ssiv", "--scenario", "apples", "--net-seed", "7")
        b = run_cli("run", "--variant", "ssiv", "--scenario", "apples", "--net-seed", "8")
        assert a == b and a[0] == 0

    @pytest.mark.parametrize("variant", ["decoupled_server", "replicated"])
    def test_repeat_is_byte_identical(self, tmp_path, variant):
        runs = []
        for i in range(2):
            trace, sched = tmp_path / f"t{i}", tmp_path / f"s{i}"
            code, out = run_cli("run", "--variant", variant, "--scenario", "gen:3:4:5", "--net-seed", "11",
                                "--trace", str(trace), "--dump-schedules", str(sched))
            assert code == 0
            runs.append((out, trace.read_bytes(), sched.read_bytes()))
        assert runs[0] == runs[1]
        assert runs[0][1] and runs[0][2]

    def test_replicas_print_equal_states(self):
        code, out = run_cli("run", "--variant", "replicated", "--scenario", "gen:2:3:4", "--net-seed", "5")
        states = [line.split("state=", 1)[1] for line in out.splitlines() if line.startswith("replica=")]
        assert code == 0 and len(states) == 3 and len(set(states)) == 1

    def test_scenario_file(self, corpus):
        assert run_cli("run", "--variant", "orig", "--scenario", str(corpus("apples.yaml"))) == \
            run_cli("run", "--variant", "orig", "--scenario", "apples")

    def test_missing_scenario_file(self, tmp_path):
        code, _ = run_cli("run", "--variant", "orig", "--scenario", str(tmp_path / "none.yaml"))
        assert code == 1

    def test_console_script(self):
        proc = subprocess.run([sys.executable, "-m", "latflow.cli", "run", "--variant", "bp"],
                              capture_output=True, text=True, check=True)
        assert proc.stdout.startswith("client=1 class=Basic")


class TestTransform:
    def test_walkthrough_reaches_server_state(self, tmp_path, corpus, figures):
        target = tmp_path / "out.yaml"
        code, out = run_cli("transform", str(corpus("fig2.yaml")), "--script", str(corpus("fig2_to_fig6.txt")),
                            "-o", str(target))
        assert code == 0
        assert [line.split()[1] for line in out.splitlines() if line.startswith("applied")] == [
            "upgrade_to_bp", "upgrade_to_ssiv", "push_groupby_through_join", "cut_flow"]
        assert "new channel reqs (network)" in out
        assert deployments_isomorphic(load_deployment(target), figures["fig6"])

    def test_single_graph_output(self, tmp_path, corpus, figures):
        script = tmp_path / "s.txt"
        script.write_text("upgrade_to_bp\n")
        target = tmp_path / "out.hfs"
        code, _ = run_cli("transform", str(corpus("fig2.hfs")), "--script", str(script), "-o", str(target))
        assert code == 0
        assert graphs_isomorphic(parse_dsl(target.read_text()), figures["fig3"].nodes[0].graph)

    def test_failed_rule(self, tmp_path, corpus):
        script = tmp_path / "s.txt"
        script.write_text("upgrade_to_ssiv\n")
        code, out = run_cli("transform", str(corpus("fig2.yaml")), "--script", str(script))
        assert code == 1 and out.startswith("FAILED  upgrade_to_ssiv (line 1)")


class TestVerifyCommand:
    def test_equivalent(self):
        code, out = run_cli("verify", "--variant", "ssiv", "--variant", "decoupled_client", "--seeds", "20",
                            "--oracle")
        assert code == 0 and "outcome: Equivalent" in out

    def test_diverged(self):
        code, out = run_cli("fuzz", "--variant", "orig_cut", "--scenario", "gen:1:3:5", "--seeds", "100")
        assert code == EXIT_DIVERGED
        assert "outcome: Diverged" in out and "witness: variant orig_cut at seed" in out


class TestDumpSchedules:
    def test_two_messages(self):
        code, out = run_cli("dump-schedules", "--messages", "2", "--max-dups", "1")
        lines = out.splitlines()
        assert code == 0 and lines[0] == "messages=2 max_dups=1 schedules=14"
        assert len(lines) == 15 and "m1 m2" in lines
