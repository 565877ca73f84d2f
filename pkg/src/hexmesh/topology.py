"""Hexagonal waveguide-mesh hardware model.

A mesh is a set of programmable unit cells (PUCs), each a 2x2 MZI with four
ports: ``A1``/``A2`` on one end and ``B1``/``B2`` on the other. PUC ports are
joined pairwise by waveguide links; ports left open on the mesh boundary are
the external (fiber/photodetector) ports.

Geometry used by :func:`generate_hex_mesh`: pointy-top hexagonal cells laid
out in rows, odd rows shifted right by half a cell. Every hexagon edge is one
PUC. For a PUC running from vertex ``A`` to vertex ``B`` (``A`` the
lexicographically smaller vertex), ports ``A1``/``B1`` lie on the left of the
``A -> B`` direction and ``A2``/``B2`` on the right, so the bar state keeps a
signal on the same side and the cross state swaps sides.
"""
from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

TOPOLOGY_VERSION = 1
PORT_NAMES = ("A1", "A2", "B1", "B2")
PortRef = tuple[int, str]

# Calibrated by a linear fit through (2 PUCs, 7.7 dB) and (15 PUCs, 10.5 dB).
DEFAULT_IL_DB = -0.215
DEFAULT_FACET_LOSS_DB = 3.64
DEFAULT_CROSSTALK_DB = 25.0


class TopologyError(ValueError):
    """Base class for topology problems."""


class TopologyFormatError(TopologyError):
    """A topology file could not be parsed."""


class TopologyInvariantError(TopologyError):
    """A topology violates one or more structural invariants."""

    def __init__(self, violations: Sequence["Violation"]):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations)
        super().__init__(f"topology invariant violated: {lines}")


@dataclass(frozen=True)
class PucState:
    """Programmed state of one PUC.

    ``k`` is the fraction of power sent to the cross output. Bar and cross
    are the two extremes of a tunable coupler; ``off`` absorbs all light.
    """

    kind: str
    k: float | None = None

    def __post_init__(self):
        if self.kind not in ("bar", "cross", "tc", "off"):
            raise ValueError(f"unknown PUC state kind {self.kind!r}")
        if self.kind == "tc":
            if self.k is None or not 0.0 <= self.k <= 1.0:
                raise ValueError(f"tunable coupler needs 0 <= k <= 1, got {self.k}")
        elif self.k is not None:
            raise ValueError(f"k is only defined for tunable couplers, not {self.kind}")

    @classmethod
    def tunable(cls, k: float) -> "PucState":
        return cls("tc", float(k))

    @property
    def cross_fraction(self) -> float | None:
        """Cross-coupled power fraction, or ``None`` for an unpowered PUC."""
        if self.kind == "bar":
            return 0.0
        if self.kind == "cross":
            return 1.0
        if self.kind == "tc":
            return self.k
        return None

    def __str__(self):
        return f"tc({self.k:.6f})" if self.kind == "tc" else self.kind


BAR = PucState("bar")
CROSS = PucState("cross")
OFF = PucState("off")


@dataclass(frozen=True)
class Puc:
    id: int
    il_db: float = DEFAULT_IL_DB
    bul: float = 1.0
    power_mw: float = 1.0
    crosstalk_db: float = DEFAULT_CROSSTALK_DB
    # midpoint of the PUC on the layout grid; informational only
    xy: tuple[float, float] | None = None

    def ports(self) -> tuple[PortRef, ...]:
        return tuple((self.id, name) for name in PORT_NAMES)


@dataclass(frozen=True)
class MeshTopology:
    """Immutable mesh description.

    ``external_ports[i]`` is the PUC port exposed as mesh port number ``i``;
    ``usable_ports`` lists the port numbers that may be used as optical I/O.
    ``port_xy`` (optional) gives the layout position of each external port.
    """

    pucs: tuple[Puc, ...]
    links: tuple[tuple[PortRef, PortRef], ...]
    external_ports: tuple[PortRef, ...]
    usable_ports: tuple[int, ...]
    port_xy: tuple[tuple[float, float], ...] = ()
    name: str = ""
    _puc_index: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "_puc_index", {p.id: i for i, p in enumerate(self.pucs)})

    def puc(self, puc_id: int) -> Puc:
        return self.pucs[self._puc_index[puc_id]]

    def puc_position(self, puc_id: int) -> int:
        """Index of ``puc_id`` within :attr:`pucs`."""
        return self._puc_index[puc_id]

    @property
    def n_pucs(self) -> int:
        return len(self.pucs)

    @property
    def n_ports(self) -> int:
        return len(self.external_ports)

    def port_of(self, port: int) -> PortRef:
        return self.external_ports[port]

    def port_number(self, ref: PortRef) -> int | None:
        try:
            return self.external_ports.index(tuple(ref))
        except ValueError:
            return None

    def with_il(self, il_db: dict[int, float] | Sequence[float]) -> "MeshTopology":
        """Copy with per-PUC insertion loss replaced."""
        if not isinstance(il_db, dict):
            il_db = {p.id: v for p, v in zip(self.pucs, il_db)}
        pucs = tuple(replace(p, il_db=float(il_db.get(p.id, p.il_db))) for p in self.pucs)
        return replace(self, pucs=pucs)

    def with_usable(self, usable: Iterable[int]) -> "MeshTopology":
        return replace(self, usable_ports=tuple(usable))


# --------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    rule: str
    entity: str
    detail: str = ""

    def __str__(self):
        return f"[{self.rule}] {self.entity}: {self.detail}" if self.detail else f"[{self.rule}] {self.entity}"


def validate_topology(topology: MeshTopology) -> list[Violation]:
    """Return every invariant violation; an empty list means the topology is sound."""
    out: list[Violation] = []
    ids = [p.id for p in topology.pucs]
    seen_ids = set()
    for pid in ids:
        if pid in seen_ids:
            out.append(Violation("unique-puc-id", f"puc {pid}", "duplicate id"))
        seen_ids.add(pid)

    for p in topology.pucs:
        if not (p.il_db <= 0 and math.isfinite(p.il_db)):
            out.append(Violation("puc-il", f"puc {p.id}", f"il_db must be <= 0, got {p.il_db}"))
        if not p.crosstalk_db > 0:
            out.append(Violation("puc-crosstalk", f"puc {p.id}", f"crosstalk_db must be > 0, got {p.crosstalk_db}"))
        if not p.bul > 0:
            out.append(Violation("puc-bul", f"puc {p.id}", f"bul must be > 0, got {p.bul}"))
        if not p.power_mw >= 0:
            out.append(Violation("puc-power", f"puc {p.id}", f"power_mw must be >= 0, got {p.power_mw}"))

    uses: dict[PortRef, list[str]] = defaultdict(list)

    def check_ref(ref, where):
        pid, name = ref
        if pid not in seen_ids or name not in PORT_NAMES:
            out.append(Violation("port-reference", where, f"unknown PUC port {pid}.{name}"))
            return False
        return True

    for i, (a, b) in enumerate(topology.links):
        where = f"links[{i}]"
        ok_a, ok_b = check_ref(a, where), check_ref(b, where)
        if ok_a and ok_b and a[0] == b[0]:
            out.append(Violation("self-link", where, f"link joins two ports of puc {a[0]}"))
        if ok_a:
            uses[tuple(a)].append(where)
        if ok_b:
            uses[tuple(b)].append(where)
    for i, ref in enumerate(topology.external_ports):
        where = f"external_ports[{i}]"
        if check_ref(ref, where):
            uses[tuple(ref)].append(where)
    for ref, where in sorted(uses.items()):
        if len(where) > 1:
            out.append(Violation("port-exclusivity", f"puc {ref[0]}.{ref[1]}", "used by " + ", ".join(where)))

    seen_usable = set()
    for u in topology.usable_ports:
        if not (isinstance(u, int) and 0 <= u < len(topology.external_ports)):
            out.append(Violation("usable-subset", f"usable port {u}", "not an external port"))
        elif u in seen_usable:
            out.append(Violation("usable-subset", f"usable port {u}", "listed twice"))
        seen_usable.add(u)

    if topology.port_xy and len(topology.port_xy) != len(topology.external_ports):
        out.append(Violation("port-xy", "port_xy", "length differs from external_ports"))

    # connectivity over PUCs joined by links
    if topology.pucs and len(seen_ids) == len(ids):
        adj: dict[int, set[int]] = {pid: set() for pid in ids}
        for a, b in topology.links:
            if a[0] in adj and b[0] in adj:
                adj[a[0]].add(b[0])
                adj[b[0]].add(a[0])
        start = ids[0]
        stack, reached = [start], {start}
        while stack:
            for v in adj[stack.pop()]:
                if v not in reached:
                    reached.add(v)
                    stack.append(v)
        missing = [pid for pid in ids if pid not in reached]
        if missing:
            out.append(Violation("connectivity", "pucs " + ",".join(map(str, missing)),
                                 f"not connected to puc {start}"))
    return out


def check_topology(topology: MeshTopology) -> MeshTopology:
    violations = validate_topology(topology)
    if violations:
        raise TopologyInvariantError(violations)
    return topology


# --------------------------------------------------------------------------
# generator


_HEX_OFFSETS = ((0, 2), (-1, 1), (-1, -1), (0, -2), (1, -1), (1, 1))  # ccw from the top vertex


def _cell_vertices(r: int, c: int):
    cx, cy = 2 * c + (r & 1), -3 * r
    return [(cx + dx, cy + dy) for dx, dy in _HEX_OFFSETS]


def _angle(frm, to):
    # grid x unit is half a cell width (sqrt(3)/2 of the hexagon radius), y unit is half the radius
    return math.atan2((to[1] - frm[1]) * 0.5, (to[0] - frm[0]) * math.sqrt(3) / 2)


def hex_cells(rows: int, cols: int, row_lengths: Sequence[int] | None = None,
              row_offsets: Sequence[int] | None = None) -> list[tuple[int, int]]:
    """Cell coordinates on the offset grid.

    By default every row holds ``cols`` cells. ``row_lengths`` and
    ``row_offsets`` give each row its own cell count and starting column.
    """
    if rows < 1 or cols < 1:
        raise ValueError(f"rows and cols must be >= 1, got ({rows}, {cols})")
    lengths = list(row_lengths) if row_lengths is not None else [cols] * rows
    offsets = list(row_offsets) if row_offsets is not None else [0] * rows
    if len(lengths) != rows or len(offsets) != rows:
        raise ValueError(f"need one length and one offset per row ({rows} rows)")
    if min(lengths) < 1:
        raise ValueError("every row needs at least one cell")
    return [(r, c + offsets[r]) for r in range(rows) for c in range(lengths[r])]


def hex_puc_count(rows: int, cols: int, row_lengths: Sequence[int] | None = None,
                  row_offsets: Sequence[int] | None = None) -> int:
    """Number of PUCs :func:`generate_hex_mesh` produces for these parameters."""
    edges = set()
    for r, c in hex_cells(rows, cols, row_lengths, row_offsets):
        vs = _cell_vertices(r, c)
        for i in range(6):
            edges.add(frozenset((vs[i], vs[(i + 1) % 6])))
    return len(edges)


def mesh_from_cells(cells: Iterable[tuple[int, int]], puc_defaults: dict | None = None,
                    name: str = "") -> MeshTopology:
    """Build a mesh from an arbitrary set of (row, col) cells on the offset grid."""
    defaults = dict(puc_defaults or {})
    cells = sorted(set(cells))
    if not cells:
        raise ValueError("no cells")
    edge_cells: dict[tuple, list] = defaultdict(list)
    for r, c in cells:
        vs = _cell_vertices(r, c)
        center = (2 * c + (r & 1), -3 * r)
        for i in range(6):
            edge_cells[tuple(sorted((vs[i], vs[(i + 1) % 6])))].append(center)
    # PUC ids: top to bottom, then left to right by midpoint
    edges = sorted(edge_cells, key=lambda e: (-(e[0][1] + e[1][1]), e[0][0] + e[1][0], e))
    edge_id = {e: i for i, e in enumerate(edges)}
    pucs = tuple(Puc(id=i, xy=((a[0] + b[0]) / 2, (a[1] + b[1]) / 2), **defaults)
                 for i, (a, b) in enumerate(edges))

    # every PUC end at a vertex: (outward angle, puc id, end letter)
    ends: dict[tuple[int, int], list] = defaultdict(list)
    for pid, (a, b) in enumerate(edges):
        ends[a].append((_angle(a, b), pid, "A"))
        ends[b].append((_angle(b, a), pid, "B"))

    def ccw_port(pid, end):
        # A end: left of A->B faces counter-clockwise; B end: right of A->B does
        return (pid, "A1") if end == "A" else (pid, "B2")

    def cw_port(pid, end):
        return (pid, "A2") if end == "A" else (pid, "B1")

    links = []
    boundary_ports: dict[tuple[int, int], list[PortRef]] = {}
    for v, items in ends.items():
        items.sort()
        if len(items) == 3:
            for i in range(3):
                _, p, e = items[i]
                _, q, f = items[(i + 1) % 3]
                links.append(tuple(sorted((ccw_port(p, e), cw_port(q, f)))))
        elif len(items) == 2:
            (t0, p, e), (t1, q, f) = items
            if (t1 - t0) % (2 * math.pi) > math.pi:
                (t0, p, e), (t1, q, f) = (t1, q, f), (t0, p, e)
            # p -> q is the 120 degree (closed) side
            links.append(tuple(sorted((ccw_port(p, e), cw_port(q, f)))))
            boundary_ports[v] = [cw_port(p, e), ccw_port(q, f)]
        else:
            raise AssertionError(f"vertex {v} has degree {len(items)}")
    links.sort()

    boundary = {e: cs[0] for e, cs in edge_cells.items() if len(cs) == 1}
    order = _boundary_walk(boundary)
    ext, xy = [], []
    for i, v in enumerate(order):
        if v not in boundary_ports:
            continue
        arriving = edge_id[tuple(sorted((order[i - 1], v)))]
        # the port of the PUC we arrive along comes first
        for ref in sorted(boundary_ports[v], key=lambda ref: ref[0] != arriving):
            ext.append(ref)
            xy.append((float(v[0]), float(v[1])))
    # bottom ports are not usable as optical I/O
    y_floor = min(v[1] for v in ends)
    usable = tuple(i for i, (x, y) in enumerate(xy) if y > y_floor + 1)
    return MeshTopology(pucs=pucs, links=tuple(links), external_ports=tuple(ext),
                        usable_ports=usable, port_xy=tuple(xy), name=name)


def _boundary_walk(boundary: dict) -> list:
    """Outer boundary vertices, counter-clockwise from the top-left corner.

    ``boundary`` maps each boundary edge to the centre of its only cell.
    """
    succ = {}
    for (a, b), (cx, cy) in boundary.items():
        # orient each edge so its cell lies on the left (counter-clockwise traversal)
        ax, ay = a[0] * math.sqrt(3) / 2, a[1] * 0.5
        bx, by = b[0] * math.sqrt(3) / 2, b[1] * 0.5
        ox, oy = cx * math.sqrt(3) / 2 - ax, cy * 0.5 - ay
        if (bx - ax) * oy - (by - ay) * ox > 0:
            succ.setdefault(a, []).append(b)
        else:
            succ.setdefault(b, []).append(a)
    start = min(succ, key=lambda v: (-v[1], v[0]))
    order, cur = [start], succ[start][0]
    while cur != start:
        order.append(cur)
        if len(order) > len(boundary):
            raise ValueError("mesh boundary is not a single loop")
        cur = succ[cur][0]
    return order


def generate_hex_mesh(rows: int, cols: int, puc_defaults: dict | None = None,
                      row_lengths: Sequence[int] | None = None,
                      row_offsets: Sequence[int] | None = None) -> MeshTopology:
    """Hexagonal mesh of ``rows`` staggered rows of ``cols`` cells.

    Odd rows sit half a cell to the right. ``row_lengths``/``row_offsets``
    trim or shift individual rows. External ports are numbered
    counter-clockwise from the top-left corner; ports on the bottom edge
    are excluded from ``usable_ports``. Raises TopologyInvariantError when
    custom rows leave the cells disconnected.
    """
    cells = hex_cells(rows, cols, row_lengths, row_offsets)
    name = f"hex{rows}x{cols}"
    if row_lengths is not None or row_offsets is not None:
        name += "-custom"
    return check_topology(mesh_from_cells(cells, puc_defaults, name=name))


MESH72_PARAMS = dict(rows=5, cols=5, row_lengths=(3, 4, 3, 3, 5), row_offsets=(0, -1, 0, 0, -1))
# default 6x6 switch ports: left-side inputs, right-side outputs
SWITCH_INPUTS = (4, 5, 6, 7, 12, 13)
SWITCH_OUTPUTS = (28, 29, 32, 33, 34, 35)
# input that reaches all 27 other usable ports in one multicast tree
MULTICAST_INPUT = 8


def mesh72(puc_defaults: dict | None = None) -> MeshTopology:
    """Default 72-PUC processor model: 18 hexagonal cells in rows of 3, 4, 3, 3 and 5."""
    topo = generate_hex_mesh(**MESH72_PARAMS, puc_defaults=puc_defaults)
    return replace(topo, name="mesh72")


# --------------------------------------------------------------------------
# file format


def _fmt(x: float) -> float:
    x = round(float(x), 6)
    return 0.0 if x == 0 else x


def topology_to_dict(topology: MeshTopology) -> dict:
    pucs = []
    for p in topology.pucs:
        d = {"id": p.id, "il_db": _fmt(p.il_db), "bul": _fmt(p.bul),
             "power_mw": _fmt(p.power_mw), "crosstalk_db": _fmt(p.crosstalk_db)}
        if p.xy is not None:
            d["xy"] = [_fmt(p.xy[0]), _fmt(p.xy[1])]
        pucs.append(d)
    return {
        "topology_version": TOPOLOGY_VERSION,
        "name": topology.name,
        "pucs": pucs,
        "links": [[f"{a[0]}.{a[1]}", f"{b[0]}.{b[1]}"] for a, b in topology.links],
        "external_ports": [f"{r[0]}.{r[1]}" for r in topology.external_ports],
        "usable_ports": list(topology.usable_ports),
        "port_xy": [[_fmt(x), _fmt(y)] for x, y in topology.port_xy],
    }


def dumps_topology(topology: MeshTopology) -> str:
    return json.dumps(topology_to_dict(topology), sort_keys=True, indent=1) + "\n"


def save_topology(topology: MeshTopology, path: str | Path) -> None:
    Path(path).write_text(dumps_topology(topology))


def _parse_ref(text, where) -> PortRef:
    if not isinstance(text, str) or "." not in text:
        raise TopologyFormatError(f"{where}: expected 'puc.port' string, got {text!r}")
    pid, name = text.split(".", 1)
    try:
        return int(pid), name
    except ValueError:
        raise TopologyFormatError(f"{where}: bad PUC id in {text!r}") from None


def _num(d, key, where, default=None):
    if key not in d:
        if default is None:
            raise TopologyFormatError(f"{where}.{key}: missing field")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise TopologyFormatError(f"{where}.{key}: expected number, got {v!r}")
    return float(v)


def topology_from_dict(data: dict, source: str = "<dict>") -> MeshTopology:
    if not isinstance(data, dict):
        raise TopologyFormatError(f"{source}: top level must be an object")
    version = data.get("topology_version")
    if version != TOPOLOGY_VERSION:
        raise TopologyFormatError(f"{source}: topology_version: unsupported {version!r}")
    for key in ("pucs", "links", "external_ports", "usable_ports"):
        if not isinstance(data.get(key), list):
            raise TopologyFormatError(f"{source}: {key}: missing or not a list")
    pucs = []
    for i, d in enumerate(data["pucs"]):
        where = f"{source}: pucs[{i}]"
        if not isinstance(d, dict):
            raise TopologyFormatError(f"{where}: expected object")
        if not isinstance(d.get("id"), int):
            raise TopologyFormatError(f"{where}.id: expected integer")
        xy = d.get("xy")
        if xy is not None:
            xy = (float(xy[0]), float(xy[1]))
        pucs.append(Puc(id=d["id"], il_db=_num(d, "il_db", where), bul=_num(d, "bul", where),
                        power_mw=_num(d, "power_mw", where),
                        crosstalk_db=_num(d, "crosstalk_db", where), xy=xy))
    links = []
    for i, pair in enumerate(data["links"]):
        where = f"{source}: links[{i}]"
        if not isinstance(pair, list) or len(pair) != 2:
            raise TopologyFormatError(f"{where}: expected a pair of port references")
        links.append(tuple(sorted((_parse_ref(pair[0], where), _parse_ref(pair[1], where)))))
    ext = tuple(_parse_ref(r, f"{source}: external_ports[{i}]")
                for i, r in enumerate(data["external_ports"]))
    usable = data["usable_ports"]
    for i, u in enumerate(usable):
        if not isinstance(u, int) or isinstance(u, bool):
            raise TopologyFormatError(f"{source}: usable_ports[{i}]: expected integer, got {u!r}")
    port_xy = tuple((float(x), float(y)) for x, y in data.get("port_xy", []))
    topo = MeshTopology(pucs=tuple(pucs), links=tuple(sorted(links)), external_ports=ext,
                        usable_ports=tuple(usable), port_xy=port_xy, name=data.get("name", ""))
    return check_topology(topo)


def load_topology(path: str | Path) -> MeshTopology:
    path = Path(path)
    text = path.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TopologyFormatError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return topology_from_dict(data, source=str(path))
