"""Split one input over several outputs with loss-compensated couplers.

    python demos/multicast_demo.py

Prints the tunable couplers of a 1x3 tree, then how the output power and its
spread evolve from 1x2 to 1x26 when the couplers assume an average loss.
"""
from hexmesh.graph import build_graph
from hexmesh.multicast import IL_SIGMA_DB, MulticastRequest, auto_multicast, deviation_trend
from hexmesh.powersim import multicast_power_report
from hexmesh.topology import MULTICAST_INPUT, mesh72


def main():
    topo = mesh72()
    graph = build_graph(topo)
    cfg = auto_multicast(graph, MulticastRequest(MULTICAST_INPUT, (0, 30, 40), (0.5, 0.3, 0.2)))
    print("1x3 from port 8 with shares 0.5 / 0.3 / 0.2")
    for t in cfg.tunable_pucs:
        print(f"  PUC {t.puc_id:>2}: target {t.k_T:.3f}, compensated k {t.k:.4f} "
              f"(bar branch {t.il_bar_db:.2f} dB, cross branch {t.il_cross_db:.2f} dB)")
    rep = multicast_power_report(topo, cfg)
    for q, v in rep.per_port.items():
        print(f"  port {q:>2}: {v:7.2f} dB  (share-normalised {rep.normalized[q]:.4f} dB)")

    outs = [q for q in topo.usable_ports if q != MULTICAST_INPUT]
    sizes = [2, 6, 10, 14, 18, 22, 26]
    print(f"\nper-PUC loss spread {IL_SIGMA_DB} dB, 50 chips:")
    print("     N   mean dev   min power")
    for p in deviation_trend(graph, MULTICAST_INPUT, outs, sizes, IL_SIGMA_DB, n_draws=50, seed=1):
        print(f"  {p.n_outputs:>4} {p.mean_std_db:9.3f} {p.min_power_db:10.2f}")


if __name__ == "__main__":
    main()
