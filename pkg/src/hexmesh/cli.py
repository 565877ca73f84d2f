"""Scenario runner and path benchmark.

    hexmesh run SCENARIO [--out DIR] [--seed N] [--threads N]
    hexmesh bench-paths [--topology T] [--n N] [--seed S] [--out DIR]

A scenario is a YAML or JSON mapping::

    command: switch-sweep          # see COMMANDS
    topology: mesh72               # built-in name, topology JSON path, or generator params
    weights: {c_il: 1.0}           # optional WeightCoeffs fields
    sim: {crosstalk_enabled: true} # optional SimParams fields
    seed: 7                        # required by randomised commands
    args: {...}                    # command-specific, see the README

Each run writes ``config.json`` (the resolved scenario), its result CSVs,
``timing.json`` and ``summary.json`` into the output directory (``--out``,
else ``$HEXMESH_OUT/<scenario name>``, else ``results/<scenario name>``).
Exit status: 0 on success, 1 on bad input, 2 when a solver gives up.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import random
import sys
import time
from dataclasses import asdict, fields, replace
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np
import yaml

from . import multicast as mc
from . import powersim as ps
from . import switching as sw
from .graph import MeshGraph, WeightCoeffs, build_graph, path_states, states_to_puc_states
from .interconnect import NoRoute, route_batch, self_heal, shortest_path
from .topology import (MULTICAST_INPUT, SWITCH_INPUTS, SWITCH_OUTPUTS, MeshTopology, TopologyError,
                       generate_hex_mesh, load_topology)

log = logging.getLogger("hexmesh")

OUT_ENV = "HEXMESH_OUT"
EXIT_OK, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2
SOLVER_ERRORS = (sw.Unsolved, NoRoute, mc.TreeConflict, ps.LitCycle)
DB = "{:.3f}"


class ScenarioError(ValueError):
    """The scenario file or its arguments are invalid."""


# --------------------------------------------------------------------------
# resolution


def builtin_mesh72() -> MeshTopology:
    """The shipped mesh72 file (identical to :func:`hexmesh.topology.mesh72`)."""
    ref = resources.files("hexmesh") / "data" / "mesh72.json"
    with resources.as_file(ref) as path:
        return load_topology(path)


def resolve_topology(ref: Any, base: Path | None = None) -> MeshTopology:
    if ref is None or ref == "mesh72":
        return builtin_mesh72()
    if isinstance(ref, str):
        path = Path(ref)
        if not path.is_absolute() and base is not None:
            path = base / path
        return load_topology(path)
    if isinstance(ref, dict):
        if "file" in ref:
            return resolve_topology(ref["file"], base)
        params = dict(ref)
        try:
            return generate_hex_mesh(int(params.pop("rows")), int(params.pop("cols")),
                                     puc_defaults=params.pop("puc_defaults", None),
                                     row_lengths=params.pop("row_lengths", None),
                                     row_offsets=params.pop("row_offsets", None))
        except KeyError as exc:
            raise ScenarioError(f"generator topology needs {exc.args[0]!r}") from None
    raise ScenarioError(f"cannot interpret topology reference {ref!r}")


def _dataclass_from(cls, data: dict | None, what: str):
    data = dict(data or {})
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ScenarioError(f"unknown {what} fields: {sorted(unknown)}")
    return cls(**data)


def load_scenario(path: str | Path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc.strerror}") from None
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ScenarioError(f"cannot parse {path}: {exc}") from None
    if not isinstance(data, dict) or "command" not in data:
        raise ScenarioError(f"{path} must be a mapping with a 'command' key")
    data.setdefault("name", path.stem)
    return data


class Run:
    """A resolved scenario plus helpers for writing its artefacts."""

    def __init__(self, scenario: dict, out_dir: Path, *, seed: int | None = None, threads: int = 1,
                 base: Path | None = None):
        self.scenario = dict(scenario)
        if seed is not None:
            self.scenario["seed"] = seed
        self.command = self.scenario["command"]
        if self.command not in COMMANDS:
            raise ScenarioError(f"unknown command {self.command!r}; expected one of {sorted(COMMANDS)}")
        self.args = dict(self.scenario.get("args") or {})
        self.threads = max(int(threads), 1)
        self.out = out_dir
        self.timing: dict[str, float] = {}
        self.summary: dict[str, Any] = {}
        t0 = time.perf_counter()
        self.topology = resolve_topology(self.scenario.get("topology"), base)
        self.coeffs = _dataclass_from(WeightCoeffs, self.scenario.get("weights"), "weights")
        self.sim = _dataclass_from(ps.SimParams, self.scenario.get("sim"), "sim")
        self.graph = build_graph(self.topology, self.coeffs)
        self.timing["graph_build_s"] = time.perf_counter() - t0

    @property
    def seed(self) -> int:
        seed = self.scenario.get("seed")
        if seed is None:
            raise ScenarioError(f"command {self.command!r} is randomised and needs a seed")
        return int(seed)

    def ports(self, key: str, default: Sequence[int] | None = None) -> list[int]:
        value = self.args.get(key, default)
        if value is None:
            raise ScenarioError(f"missing argument {key!r}")
        return self._usable(key, [int(p) for p in value])

    def port(self, key: str, default: int | None = None) -> int:
        value = self.args.get(key, default)
        if value is None or isinstance(value, (list, tuple)):
            raise ScenarioError(f"{key} must be a single port number")
        return self._usable(key, [int(value)])[0]

    def _usable(self, key: str, ports: list[int]) -> list[int]:
        bad = [p for p in ports if p not in self.graph.usable]
        if bad:
            raise ScenarioError(f"{key}: ports {bad} are not usable ports of {self.topology.name}")
        return ports

    def resolved(self) -> dict:
        return {
            "name": self.scenario.get("name"),
            "command": self.command,
            "seed": self.scenario.get("seed"),
            "threads": self.threads,
            "topology": {"name": self.topology.name, "n_pucs": self.topology.n_pucs,
                         "n_ports": self.topology.n_ports, "usable_ports": list(self.topology.usable_ports),
                         "ref": self.scenario.get("topology", "mesh72")},
            "weights": asdict(self.coeffs),
            "sim": asdict(self.sim),
            "args": self.args,
        }

    def write_csv(self, name: str, header: Sequence, rows: Sequence[Sequence]) -> Path:
        path = self.out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        return path

    def write_text(self, name: str, text: str) -> None:
        path = self.out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)

    def finish(self) -> None:
        self.out.mkdir(parents=True, exist_ok=True)
        _dump(self.out / "config.json", self.resolved())
        _dump(self.out / "timing.json", self.timing)
        _dump(self.out / "summary.json", self.summary)


def _dump(path: Path, data) -> None:
    path.write_text(json.dumps(_plain(data), indent=2, sort_keys=True) + "\n")


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    return x


def _db(x: float) -> str:
    return DB.format(x) if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def _states_rows(states):
    return [(pid, st.kind, "" if st.k is None else f"{st.k:.9f}") for pid, st in sorted(states.items())]


# --------------------------------------------------------------------------
# commands


def cmd_interconnect(run: Run) -> None:
    """Route each pair alone (optionally around failed PUCs) and simulate it."""
    pairs = [(int(a), int(b)) for a, b in run.args.get("pairs", [])]
    if not pairs:
        raise ScenarioError("interconnect needs args.pairs: [[in, out], ...]")
    run.ports("ports", [p for pr in pairs for p in pr])
    failed = [int(p) for p in run.args.get("failed_pucs", [])]
    rows, power_rows = [], []
    t0 = time.perf_counter()
    for a, b in pairs:
        path = self_heal(run.graph, a, b, failed) if failed else shortest_path(run.graph, a, b)
        pm = ps.propagate(run.topology, path_states_of(path), a, run.sim)
        rows.append((a, b, path.puc_count, f"{path.total_weight:.6f}", _db(pm[b]),
                     " ".join(f"{arc.puc}:{arc.kind}" for arc in path.puc_arcs)))
        power_rows.append([a, b] + [_db(v) for v in pm.db])
    run.timing["solve_s"] = time.perf_counter() - t0
    run.write_csv("paths.csv", ("in_port", "out_port", "puc_count", "weight", "sim_db", "pucs"), rows)
    run.write_csv("powermap.csv", ["in_port", "out_port"] + list(range(run.topology.n_ports)), power_rows)
    run.summary.update(n_paths=len(rows), puc_count=[r[2] for r in rows], sim_db=[float(r[4]) for r in rows])


def path_states_of(path):
    return states_to_puc_states(path_states(path))


def cmd_interconnect_sweep(run: Run) -> None:
    """From each input, route to every other usable port in turn (the reach colormap)."""
    inputs = run.ports("inputs", [MULTICAST_INPUT, 9, 28, 30] if run.topology.n_pucs == 72 else None)
    targets_arg = run.args.get("outputs")
    colormap, rows, errors = [], [], []
    t0 = time.perf_counter()
    for a in inputs:
        outs = [int(q) for q in targets_arg] if targets_arg else [q for q in run.topology.usable_ports if q != a]
        for b in outs:
            try:
                path = shortest_path(run.graph, a, b)
            except (NoRoute, ValueError) as exc:
                errors.append((a, b, str(exc)))
                continue
            pm = ps.propagate(run.topology, path_states_of(path), a, run.sim)
            leak = [pm.db[q] for q in run.topology.usable_ports if q not in (a, b)]
            rows.append((a, b, path.puc_count, f"{path.total_weight:.6f}", _db(pm[b]), _db(max(leak))))
            colormap.append([a, b] + [_db(pm.db[q]) for q in run.topology.usable_ports])
    run.timing["solve_s"] = time.perf_counter() - t0
    run.write_csv("interconnects.csv", ("in_port", "out_port", "puc_count", "weight", "target_db", "max_leak_db"),
                  rows)
    run.write_csv("colormap.csv", ["in_port", "target"] + list(run.topology.usable_ports), colormap)
    run.write_csv("unrouted.csv", ("in_port", "out_port", "reason"), errors)
    il = [float(r[4]) for r in rows]
    counts = [r[2] for r in rows]
    run.summary.update(n_routed=len(rows), n_unrouted=len(errors),
                       target_db_range=[min(il), max(il)] if il else None,
                       puc_count_range=[min(counts), max(counts)] if counts else None)


def _switch_pairs(run: Run) -> list[tuple[int, int]]:
    if "pairs" in run.args:
        return [(int(a), int(b)) for a, b in run.args["pairs"]]
    inputs = run.ports("inputs", SWITCH_INPUTS)
    outputs = run.ports("outputs", SWITCH_OUTPUTS)
    perm = run.args.get("permutation", list(range(len(outputs))))
    return [(a, outputs[int(j)]) for a, j in zip(inputs, perm)]


def _write_switch(run: Run, prefix: str, cfg: sw.SwitchConfig, inputs, outputs) -> np.ndarray:
    matrix = ps.switch_matrix(run.topology, cfg, inputs, outputs, run.sim)
    run.write_text(f"{prefix}matrix.csv", ps.matrix_csv(matrix, inputs, outputs, corner="input"))
    return matrix


def cmd_switch(run: Run) -> None:
    """Solve one N×N assignment and characterise it."""
    pairs = _switch_pairs(run)
    t0 = time.perf_counter()
    window = run.args.get("balance_window_hops")
    if window is not None:
        cfg = sw.balanced_switch(run.graph, pairs, window_hops=int(window))
    else:
        req = sw.SwitchRequest(tuple(pairs), int(run.args.get("max_iter", sw.DEFAULT_MAX_ITER)),
                               run.args.get("algorithm", sw.EDGE_PENALTY))
        cfg = sw.auto_switch(run.graph, req)
    run.timing["solve_s"] = time.perf_counter() - t0
    inputs = [a for a, _ in pairs]
    outputs = [b for _, b in pairs]
    matrix = _write_switch(run, "", cfg, inputs, outputs)
    run.write_csv("paths.csv", ("in_port", "out_port", "puc_count", "weight", "pucs"),
                  [(a, b, p.puc_count, f"{p.total_weight:.6f}", " ".join(f"{x.puc}:{x.kind}" for x in p.puc_arcs))
                   for (a, b), p in cfg.paths.items()])
    run.write_csv("states.csv", ("puc_id", "state", "k"), _states_rows(cfg.states))
    xt = ps.crosstalk_report(ps.switch_matrix(run.topology, cfg, inputs, outputs,
                                              _with_crosstalk(run.sim)))
    conflicts, _ = sw.get_conflict_edges(cfg.paths.values())
    run.summary.update(iterations_used=cfg.iterations_used, total_weight=cfg.total_weight,
                       conflicts=sorted(conflicts), target_db=[float(matrix[i, i]) for i in range(len(pairs))],
                       crosstalk_db=xt.per_output)


def _with_crosstalk(sim: ps.SimParams) -> ps.SimParams:
    return sim if sim.crosstalk_enabled else replace(sim, crosstalk_enabled=True)


def cmd_switch_sweep(run: Run) -> None:
    """All N! assignments, then the N cyclic-shift configurations characterised as matrices."""
    inputs = run.ports("inputs", SWITCH_INPUTS)
    outputs = run.ports("outputs", SWITCH_OUTPUTS)
    n = len(inputs)
    max_iter = int(run.args.get("max_iter", sw.DEFAULT_MAX_ITER))
    algorithm = run.args.get("algorithm", sw.EDGE_PENALTY)
    t0 = time.perf_counter()
    report = sw.feasibility_sweep(run.graph, inputs, outputs, max_iter, algorithm, run.threads)
    run.timing["sweep_s"] = time.perf_counter() - t0
    run.write_csv("feasibility.csv", ("permutation", "solved", "iterations", "total_weight"),
                  [(" ".join(map(str, r.permutation)), int(r.solved), "" if r.iterations is None else r.iterations,
                    "" if r.total_weight is None else f"{r.total_weight:.6f}") for r in report.rows])
    xt_sim = _with_crosstalk(run.sim)
    crosstalk = []
    t1 = time.perf_counter()
    for r in report.rows:
        if r.solved:
            mx = ps.switch_matrix(run.topology, r.config, inputs, outputs, xt_sim)
            crosstalk += ps.crosstalk_report(mx, [list(r.permutation).index(j) for j in range(n)]).per_output
    run.timing["crosstalk_s"] = time.perf_counter() - t1

    shifts = [[(inputs[i], outputs[(i + s) % n]) for i in range(n)] for s in range(n)]
    window = run.args.get("balance_window_hops")
    t2 = time.perf_counter()
    if window is not None:
        configs = sw.balanced_switches(run.graph, shifts, window_hops=int(window))
    else:
        configs = [sw.auto_switch(run.graph, sw.SwitchRequest(tuple(p), max_iter, algorithm)) for p in shifts]
    run.timing["characterisation_s"] = time.perf_counter() - t2
    long_rows, targets = [], []
    for s, cfg in enumerate(configs):
        matrix = _write_switch(run, f"matrices/shift{s}_", cfg, inputs, outputs)
        for i, a in enumerate(inputs):
            j = (i + s) % n
            targets.append(float(matrix[i, j]))
            long_rows.append([s, a, outputs[j]] + [_db(v) for v in matrix[i]])
    run.write_csv("switch_matrices.csv", ["shift", "in_port", "target"] + list(outputs), long_rows)
    finite = [x for x in crosstalk if math.isfinite(x)]
    run.summary.update(
        n_permutations=len(report.rows), n_solved=report.n_solved,
        iteration_histogram=report.iteration_histogram, weight_spread=report.weight_spread,
        target_db_range=[min(targets), max(targets)], target_db_spread=max(targets) - min(targets),
        puc_counts=[[p.puc_count for p in c.paths.values()] for c in configs],
        crosstalk_median_db=float(np.median(crosstalk)) if crosstalk else None,
        crosstalk_worst_db=min(finite) if finite else None,
    )
    if report.n_solved != len(report.rows):
        raise sw.Unsolved(f"{len(report.rows) - report.n_solved} of {len(report.rows)} permutations unsolved")


def _proportion(run: Run):
    prop = run.args.get("proportion")
    return None if prop is None else tuple(float(x) for x in prop)


def cmd_multicast(run: Run) -> None:
    """One 1×N splitting tree."""
    inp = run.port("input", MULTICAST_INPUT)
    outputs = run.ports("outputs")
    req = mc.MulticastRequest(inp, tuple(outputs), _proportion(run))
    t0 = time.perf_counter()
    cfg = mc.auto_multicast(run.graph, req, il_source=run.args.get("il_source", mc.NOMINAL))
    run.timing["solve_s"] = time.perf_counter() - t0
    rep = ps.multicast_power_report(run.topology, cfg, run.sim)
    run.write_csv("tunable_pucs.csv", ("puc_id", "k_T", "k", "il_bar_db", "il_cross_db"),
                  [(t.puc_id, f"{t.k_T:.9f}", f"{t.k:.9f}", f"{t.il_bar_db:.6f}", f"{t.il_cross_db:.6f}")
                   for t in cfg.tunable_pucs])
    run.write_csv("outputs.csv", ("port", "share", "power_db", "normalized_db"),
                  [(q, f"{w:.9f}", _db(rep.per_port[q]), _db(rep.normalized[q]))
                   for q, w in zip(cfg.output_ports, cfg.proportion)])
    run.write_csv("states.csv", ("puc_id", "state", "k"), _states_rows(cfg.states))
    run.summary.update(n_outputs=len(outputs), n_tunable=len(cfg.tunable_pucs), mean_db=rep.mean,
                       min_db=rep.min, deviation_db=rep.deviation, std_db=rep.std)


def cmd_multicast_sweep(run: Run) -> None:
    """1×1 up to 1×N from one input (the power funnel), optionally with a loss-uncertainty study."""
    inp = run.port("input", MULTICAST_INPUT)
    outputs = run.ports("outputs", [q for q in run.topology.usable_ports if q != inp])
    n_min = int(run.args.get("n_min", 1))
    n_max = int(run.args.get("n_max", min(26, len(outputs))))
    sizes = list(range(n_min, n_max + 1))
    il_source = run.args.get("il_source", mc.NOMINAL)
    t0 = time.perf_counter()
    columns, stats = {}, []
    for n in sizes:
        cfg = mc.auto_multicast(run.graph, mc.MulticastRequest(inp, tuple(outputs[:n])), il_source=il_source)
        pm = ps.propagate(run.topology, cfg.states, inp, run.sim)
        rep = ps.multicast_power_report(run.topology, cfg, run.sim)
        columns[n] = pm.db
        stats.append((n, len(cfg.tunable_pucs), _db(rep.mean), _db(rep.min), _db(rep.std), _db(rep.deviation)))
    run.timing["sweep_s"] = time.perf_counter() - t0
    ports = list(run.topology.usable_ports)
    run.write_csv("funnel.csv", ["port"] + sizes, [[q] + [_db(columns[n][q]) for n in sizes] for q in ports])
    run.write_csv("funnel_stats.csv", ("n_outputs", "n_tunable", "mean_db", "min_db", "std_db", "range_db"), stats)
    run.summary.update(input=inp, sizes=sizes, min_db_at_max=float(stats[-1][3]),
                       mean_db=[float(r[2]) for r in stats])
    study = run.args.get("deviation")
    if study:
        sigma = float(study.get("sigma_db", mc.IL_SIGMA_DB))
        draws = int(study.get("draws", 100))
        t1 = time.perf_counter()
        points = mc.deviation_trend(run.graph, inp, outputs, [n for n in sizes if n >= 2], sigma, draws, run.seed)
        run.timing["deviation_s"] = time.perf_counter() - t1
        run.write_csv("deviation.csv", ("n_outputs", "mean_std_db", "mean_range_db"),
                      [(p.n_outputs, _db(p.mean_std_db), _db(p.mean_range_db)) for p in points])
        run.summary.update(deviation_sigma_db=sigma, deviation_draws=draws,
                           deviation_std_db={p.n_outputs: p.mean_std_db for p in points})


def valid_pairs(graph: MeshGraph) -> list[tuple[int, int]]:
    """Ordered usable port pairs that have a route."""
    usable = graph.topology.usable_ports
    pairs = [(a, b) for a in usable for b in usable if a != b]
    batch = route_batch(graph, pairs)
    return [p for i, p in enumerate(pairs) if i not in batch.errors]


def bench_pairs(graph: MeshGraph, n: int, seed: int) -> list[tuple[int, int]]:
    """``n`` routable pairs drawn with replacement, reproducibly from ``seed``."""
    if n < 1:
        raise ScenarioError(f"n must be >= 1, got {n}")
    pool = valid_pairs(graph)
    rng = random.Random(seed)
    return [rng.choice(pool) for _ in range(n)]


def cmd_bench_paths(run: Run) -> None:
    """Route n random valid pairs and time them."""
    n = int(run.args.get("n", 400))
    t0 = time.perf_counter()
    pairs = bench_pairs(run.graph, n, run.seed)
    run.timing["pair_selection_s"] = time.perf_counter() - t0
    route_batch(run.graph, pairs[: min(n, 20)])  # warm the compiled kernels
    batch = route_batch(run.graph, pairs)
    stats = batch.stats
    run.timing.update({f"per_path_{k}": v for k, v in stats.items() if k.endswith("_us")})
    run.timing["batch_total_s"] = stats["total_s"]
    run.write_csv("pairs.csv", ("in_port", "out_port", "puc_count", "weight"),
                  [(a, b, p.puc_count, f"{p.total_weight:.6f}") for (a, b), p in zip(pairs, batch.paths)])
    run.summary.update(n_paths=n, n_routed=stats["n"], mean_us=stats["mean_us"],
                       graph_build_s=run.timing["graph_build_s"])


COMMANDS: dict[str, Callable[[Run], None]] = {
    "interconnect": cmd_interconnect,
    "interconnect-sweep": cmd_interconnect_sweep,
    "switch": cmd_switch,
    "switch-sweep": cmd_switch_sweep,
    "multicast": cmd_multicast,
    "multicast-sweep": cmd_multicast_sweep,
    "bench-paths": cmd_bench_paths,
}


# --------------------------------------------------------------------------
# entry points


def default_out(name: str) -> Path:
    return Path(os.environ.get(OUT_ENV, "results")) / name


def execute(scenario: dict, out_dir: Path, *, seed=None, threads=1, base=None) -> tuple[int, Run | None]:
    """Run one scenario; returns (exit code, run). Artefacts are written even on solver failure."""
    try:
        run = Run(scenario, out_dir, seed=seed, threads=threads, base=base)
    except (ScenarioError, TopologyError, ValueError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT, None
    try:
        COMMANDS[run.command](run)
        code = EXIT_OK
    except SOLVER_ERRORS as exc:
        log.error("solver failed: %s", exc)
        run.summary["error"] = str(exc)
        code = EXIT_SOLVER
    except (ScenarioError, TopologyError, ValueError, KeyError, TypeError) as exc:
        log.error("bad input: %s", exc)
        run.summary["error"] = str(exc)
        code = EXIT_INPUT
    run.summary["exit_code"] = code
    run.finish()
    return code, run


def run_scenario(path: str | Path, out: str | Path | None = None, *, seed=None, threads=1) -> int:
    try:
        scenario = load_scenario(path)
    except ScenarioError as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    out_dir = Path(out) if out else default_out(scenario["name"])
    code, _ = execute(scenario, out_dir, seed=seed, threads=threads, base=Path(path).parent)
    if code == EXIT_OK:
        log.info("wrote %s", out_dir)
    return code


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="hexmesh", description="Hexagonal photonic mesh experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="cmd", required=True)
    p_run = sub.add_parser("run", help="run a scenario file")
    p_run.add_argument("scenario")
    p_run.add_argument("--out", help=f"output directory (default ${OUT_ENV}/<name> or results/<name>)")
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--threads", type=int, default=1)
    p_bench = sub.add_parser("bench-paths", help="time shortest-path routing")
    p_bench.add_argument("--topology", default="mesh72", help="mesh72 or a topology JSON file")
    p_bench.add_argument("--n", type=int, default=400)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--out")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.cmd == "run":
        return run_scenario(args.scenario, args.out, seed=args.seed, threads=args.threads)
    scenario = {"name": "bench-paths", "command": "bench-paths", "topology": args.topology,
                "seed": args.seed, "args": {"n": args.n}}
    code, run = execute(scenario, Path(args.out) if args.out else default_out("bench-paths"))
    if run is not None and code == EXIT_OK:
        s = run.summary
        print(f"{s['n_routed']} paths: mean {s['mean_us']:.2f} us/path "
              f"(median {run.timing['per_path_median_us']:.2f}, p99 {run.timing['per_path_p99_us']:.2f}); "
              f"graph build {s['graph_build_s'] * 1e3:.1f} ms")
    return code


if __name__ == "__main__":
    sys.exit(main())
