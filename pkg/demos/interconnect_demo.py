"""Route a few interconnects on the 72-PUC mesh, then break a PUC and reroute.

    python demos/interconnect_demo.py
"""
from hexmesh.graph import build_graph, path_states, states_to_puc_states
from hexmesh.interconnect import self_heal, shortest_path
from hexmesh.powersim import propagate
from hexmesh.topology import mesh72


def show(topo, path):
    pm = propagate(topo, states_to_puc_states(path_states(path)), path.in_port)
    hops = " ".join(f"{a.puc}{'x' if a.kind == 'cross' else '='}" for a in path.puc_arcs)
    print(f"  {path.in_port:>2} -> {path.out_port:<2} {path.puc_count:>2} PUCs  {pm[path.out_port]:7.2f} dB  {hops}")


def main():
    topo = mesh72()
    graph = build_graph(topo)
    print(f"{topo.name}: {topo.n_pucs} PUCs, {topo.n_ports} ports, {len(topo.usable_ports)} usable")
    print("shortest paths ('=' bar, 'x' cross):")
    for a, b in [(0, 41), (8, 35), (30, 12), (1, 28)]:
        show(topo, shortest_path(graph, a, b))

    path = shortest_path(graph, 30, 12)
    broken = path.pucs[len(path.pucs) // 2]
    print(f"PUC {broken} fails; rerouting 30 -> 12 around it:")
    show(topo, self_heal(graph, 30, 12, [broken]))


if __name__ == "__main__":
    main()
