"""Solve a 6x6 switch assignment and print its power matrix with leakage on.

    python demos/switch_demo.py [p0 p1 p2 p3 p4 p5]

The optional arguments give, for each input, the index of its output.
"""
import sys

import numpy as np

from hexmesh.graph import build_graph
from hexmesh.powersim import SimParams, crosstalk_report, switch_matrix
from hexmesh.switching import SwitchRequest, auto_switch
from hexmesh.topology import SWITCH_INPUTS, SWITCH_OUTPUTS, mesh72


def main(argv):
    perm = [int(x) for x in argv] or [5, 4, 3, 2, 1, 0]
    topo = mesh72()
    graph = build_graph(topo)
    pairs = tuple((a, SWITCH_OUTPUTS[j]) for a, j in zip(SWITCH_INPUTS, perm))
    cfg = auto_switch(graph, SwitchRequest(pairs))
    print(f"solved after {cfg.iterations_used} penalty rounds, total weight {cfg.total_weight:.3f}")
    for (a, b), p in cfg.paths.items():
        print(f"  {a:>2} -> {b:<2} {p.puc_count:>2} PUCs")

    outs = [b for _, b in pairs]
    m = switch_matrix(topo, cfg, SWITCH_INPUTS, outs, SimParams(crosstalk_enabled=True, crosstalk_db=25.0))
    print("power (dB), rows = inputs, columns = their assigned outputs:")
    print("      " + "".join(f"{b:>9}" for b in outs))
    for a, row in zip(SWITCH_INPUTS, m):
        print(f"  {a:>3} " + "".join(f"{v:9.2f}" for v in row))
    rep = crosstalk_report(m)
    print(f"crosstalk per output: {np.round(rep.per_output, 1).tolist()}  typical {rep.typical:.1f} dB")


if __name__ == "__main__":
    main(sys.argv[1:])
