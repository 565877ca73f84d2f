import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from hexmesh.cli import (EXIT_INPUT, EXIT_OK, EXIT_SOLVER, bench_pairs, builtin_mesh72, execute, load_scenario, main,
                         resolve_topology, valid_pairs)
from hexmesh.topology import SWITCH_INPUTS, SWITCH_OUTPUTS, dumps_topology, generate_hex_mesh, mesh72

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

SMALL = {
    "interconnect": {"command": "interconnect", "args": {"pairs": [[8, 35], [30, 12]], "failed_pucs": [40]}},
    "sweep": {"command": "interconnect-sweep", "args": {"inputs": [8]}},
    "switch": {"command": "switch", "sim": {"crosstalk_enabled": True},
               "args": {"inputs": [4, 5, 6], "outputs": [28, 29, 32], "permutation": [2, 0, 1]}},
    "switch_sweep": {"command": "switch-sweep", "args": {"inputs": [4, 5, 6], "outputs": [28, 29, 32],
                                                         "balance_window_hops": 2}},
    "multicast": {"command": "multicast", "args": {"input": 8, "outputs": [0, 30, 40],
                                                   "proportion": [0.5, 0.3, 0.2]}},
    "multicast_sweep": {"command": "multicast-sweep", "seed": 3,
                        "args": {"n_max": 4, "deviation": {"sigma_db": 0.5, "draws": 5}}},
    "bench": {"command": "bench-paths", "seed": 0, "args": {"n": 50}},
}


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


def run_ok(scenario, out):
    code, run = execute(scenario, out)
    assert code == EXIT_OK, run.summary.get("error") if run else None
    for name in ("config.json", "timing.json", "summary.json"):
        assert (out / name).exists()
    return run


class TestCommands:
    def test_interconnect(self, tmp_path):
        run_ok(SMALL["interconnect"], tmp_path)
        rows = read_csv(tmp_path / "paths.csv")
        assert rows[0] == ["in_port", "out_port", "puc_count", "weight", "sim_db", "pucs"]
        assert len(rows) == 3
        healed = rows[2]
        assert "40:" not in " " + healed[5]
        assert float(healed[4]) == pytest.approx(-(7.28 + 0.215 * int(healed[2])), abs=1e-3)
        power = read_csv(tmp_path / "powermap.csv")
        assert len(power[0]) == 2 + 42

    def test_interconnect_sweep(self, tmp_path):
        run = run_ok(SMALL["sweep"], tmp_path)
        assert len(read_csv(tmp_path / "interconnects.csv")) > 1
        assert (tmp_path / "colormap.csv").exists() and (tmp_path / "unrouted.csv").exists()
        assert run.summary

    def test_default_sweep_inputs(self, tmp_path):
        run = run_ok({"command": "interconnect-sweep"}, tmp_path)
        assert json.loads((tmp_path / "config.json").read_text())["topology"]["n_pucs"] == 72
        assert run.summary

    def test_switch(self, tmp_path):
        run = run_ok(SMALL["switch"], tmp_path)
        m = read_csv(tmp_path / "matrix.csv")
        assert m[0] == ["input", "32", "28", "29"]
        assert [r[0] for r in m[1:]] == ["4", "5", "6"]
        assert run.summary["conflicts"] == []
        assert all(-12 < t < -7 for t in run.summary["target_db"])

    def test_switch_sweep(self, tmp_path):
        run = run_ok(SMALL["switch_sweep"], tmp_path)
        feas = read_csv(tmp_path / "feasibility.csv")
        assert len(feas) == 1 + 6 and all(r[1] == "1" for r in feas[1:])
        assert sorted(p.name for p in (tmp_path / "matrices").iterdir()) == \
            [f"shift{s}_matrix.csv" for s in range(3)]
        long = read_csv(tmp_path / "switch_matrices.csv")
        assert long[0] == ["shift", "in_port", "target", "28", "29", "32"] and len(long) == 1 + 9
        counts = [c for cfg in run.summary["puc_counts"] for c in cfg]
        assert max(counts) - min(counts) <= 2

    def test_multicast(self, tmp_path):
        run = run_ok(SMALL["multicast"], tmp_path)
        out = read_csv(tmp_path / "outputs.csv")
        assert [r[0] for r in out[1:]] == ["0", "30", "40"]
        assert len({r[3] for r in out[1:]}) == 1  # share-normalised powers agree
        assert run.summary["n_tunable"] == 2
        assert len(read_csv(tmp_path / "tunable_pucs.csv")) == 3

    def test_multicast_sweep(self, tmp_path):
        run = run_ok(SMALL["multicast_sweep"], tmp_path)
        funnel = read_csv(tmp_path / "funnel.csv")
        assert funnel[0] == ["port", "1", "2", "3", "4"] and len(funnel) == 1 + 28
        dev = read_csv(tmp_path / "deviation.csv")
        assert [r[0] for r in dev[1:]] == ["2", "3", "4"]
        assert run.summary["sizes"] == [1, 2, 3, 4]

    def test_bench(self, tmp_path):
        run = run_ok(SMALL["bench"], tmp_path)
        assert run.summary["n_routed"] == 50
        assert run.timing["per_path_mean_us"] > 0
        assert len(read_csv(tmp_path / "pairs.csv")) == 51

    def test_generated_topology(self, tmp_path):
        run = run_ok({"command": "interconnect-sweep", "topology": {"rows": 2, "cols": 1}, "args": {"inputs": [0]}},
                     tmp_path)
        assert run.topology.n_pucs == 11

    def test_topology_file(self, tmp_path):
        path = tmp_path / "hex.json"
        path.write_text(dumps_topology(generate_hex_mesh(1, 1)))
        assert resolve_topology("hex.json", tmp_path).n_pucs == 6
        assert resolve_topology({"file": str(path)}).n_pucs == 6

    def test_builtin_matches_generator(self):
        assert builtin_mesh72() == mesh72()


class TestExitCodes:
    @pytest.mark.parametrize("scenario", [
        {"command": "teleport"},
        {"command": "bench-paths", "args": {"n": 5}},  # randomised without a seed
        {"command": "multicast", "args": {"input": 8, "outputs": [20]}},  # port 20 is not usable
        {"command": "multicast", "args": {"input": [8], "outputs": [0]}},
        {"command": "interconnect"},
        {"command": "interconnect", "weights": {"c_speed": 1}, "args": {"pairs": [[8, 35]]}},
        {"command": "interconnect", "topology": "missing.json", "args": {"pairs": [[8, 35]]}},
        {"command": "interconnect", "topology": {"rows": 2, "cols": 1, "row_lengths": [1, 1],
                                                 "row_offsets": [0, 1]}, "args": {"pairs": [[0, 5]]}},
    ])
    def test_bad_input(self, tmp_path, scenario):
        code, _ = execute(scenario, tmp_path, base=tmp_path)
        assert code == EXIT_INPUT

    @pytest.mark.parametrize("scenario", [
        {"command": "interconnect", "args": {"pairs": [[0, 2]]}},
        {"command": "multicast", "args": {"input": 29, "outputs": [q for q in mesh72().usable_ports if q != 29]}},
        {"command": "switch", "args": {"inputs": list(SWITCH_INPUTS), "outputs": list(SWITCH_OUTPUTS),
                                       "permutation": [1, 3, 2, 0, 5, 4], "max_iter": 2}},
    ])
    def test_solver_failure(self, tmp_path, scenario):
        code, run = execute(scenario, tmp_path)
        assert code == EXIT_SOLVER
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["exit_code"] == EXIT_SOLVER and summary["error"]

    def test_unreadable_and_malformed(self, tmp_path):
        assert main(["run", str(tmp_path / "nope.yaml")]) == EXIT_INPUT
        bad = tmp_path / "bad.yaml"
        bad.write_text("command: [unclosed\n")
        assert main(["run", str(bad)]) == EXIT_INPUT
        bad.write_text("- just a list\n")
        assert main(["run", str(bad)]) == EXIT_INPUT


class TestReproducibility:
    @pytest.mark.parametrize("name", sorted(SMALL))
    def test_byte_identical_csvs(self, tmp_path, name):
        scenario = SMALL[name]
        a, b = tmp_path / "a", tmp_path / "b"
        run_ok(scenario, a)
        run_ok(scenario, b)
        files = sorted(p.relative_to(a) for p in a.rglob("*.csv"))
        assert files
        for rel in files:
            assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel

    def test_bench_pairs_seeded(self, graph72):
        assert bench_pairs(graph72, 30, 5) == bench_pairs(graph72, 30, 5)
        assert bench_pairs(graph72, 30, 5) != bench_pairs(graph72, 30, 6)
        assert len(bench_pairs(graph72, 1, 0)) == 1
        pool = set(valid_pairs(graph72))
        assert len(pool) == 28 * 27 - 20
        assert set(bench_pairs(graph72, 200, 1)) <= pool

    def test_seed_override(self, tmp_path):
        code, run = execute({"command": "bench-paths", "args": {"n": 3}}, tmp_path, seed=9)
        assert code == EXIT_OK and run.resolved()["seed"] == 9


class TestEntryPoints:
    def test_load_scenario_names_by_stem(self):
        for path in SCENARIOS.iterdir():
            assert load_scenario(path)["name"] == path.stem

    def test_run_with_out(self, tmp_path):
        assert main(["run", str(SCENARIOS / "interconnect.yaml"), "--out", str(tmp_path / "o")]) == EXIT_OK
        assert (tmp_path / "o" / "paths.csv").exists()

    def test_env_default_out(self, tmp_path, monkeypatch):
        monkeypatch.setenv("HEXMESH_OUT", str(tmp_path))
        assert main(["run", str(SCENARIOS / "multicast.yaml")]) == EXIT_OK
        assert (tmp_path / "multicast" / "outputs.csv").exists()

    def test_bench_subcommand(self, tmp_path, capsys):
        assert main(["bench-paths", "--n", "20", "--out", str(tmp_path)]) == EXIT_OK
        assert "us/path" in capsys.readouterr().out

    def test_python_dash_m(self, tmp_path):
        proc = subprocess.run([sys.executable, "-m", "hexmesh", "run", str(SCENARIOS / "small_mesh.json"),
                               "--out", str(tmp_path)], capture_output=True, text=True)
        assert proc.returncode == EXIT_OK, proc.stderr
        assert (tmp_path / "summary.json").exists()
