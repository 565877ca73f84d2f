"""Incoherent optical power propagation through a programmed mesh.

This module is the verification oracle for the routing algorithms: it only
looks at the topology and a map of PUC states, never at light paths.

Power is tracked per PUC port as the power entering the PUC through that
port. A PUC with cross fraction ``k`` and transmission ``t`` sends
``t*k`` of each input to the cross output and ``t*(1-k)`` to the bar
output. With crosstalk on, a bar PUC behaves as if ``k = eps`` and a cross
PUC as if ``k = 1 - eps``, where ``eps = 10**(-crosstalk_db/10)``: the
leaked power is taken from the intended output, so energy is conserved.
"""
from __future__ import annotations

import csv
import io
import statistics
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .topology import DEFAULT_FACET_LOSS_DB, PORT_NAMES, MeshTopology, PucState

FLOOR_DB = -120.0
_FLOOR_LIN = 10 ** (FLOOR_DB / 10)
_RESIDUAL = 1e-15
_PORT_INDEX = {name: i for i, name in enumerate(PORT_NAMES)}
# output port index for each input port index
_BAR_OUT = np.array([2, 3, 0, 1])
_CROSS_OUT = np.array([3, 2, 1, 0])


class LitCycle(RuntimeError):
    """Power keeps circulating around a closed loop of PUCs."""


def db_to_lin(db):
    return np.power(10.0, np.asarray(db, dtype=float) / 10.0)


def lin_to_db(lin, floor_db: float = FLOOR_DB):
    """Linear power ratio to dB, clamped at ``floor_db``."""
    lin = np.asarray(lin, dtype=float)
    with np.errstate(divide="ignore"):
        out = 10.0 * np.log10(lin)
    return np.maximum(out, floor_db)


@dataclass(frozen=True)
class SimParams:
    """Simulation settings.

    ``crosstalk_db`` overrides every PUC's own leakage suppression when set;
    ``None`` uses the per-PUC value from the topology.
    """

    facet_loss_db: float = DEFAULT_FACET_LOSS_DB
    crosstalk_enabled: bool = False
    crosstalk_db: float | None = None
    source_power_dbm: float = 5.0

    def __post_init__(self):
        if not self.facet_loss_db >= 0:
            raise ValueError(f"facet_loss_db must be >= 0, got {self.facet_loss_db}")
        if self.crosstalk_db is not None and not self.crosstalk_db > 0:
            raise ValueError(f"crosstalk_db must be > 0, got {self.crosstalk_db}")


@dataclass
class PowerMap:
    """Power leaving each external port, relative to the laser power."""

    input_port: int
    linear: np.ndarray
    injected: float
    source_power_dbm: float = 5.0

    @property
    def db(self) -> np.ndarray:
        return lin_to_db(self.linear)

    @property
    def dbm(self) -> np.ndarray:
        return self.db + self.source_power_dbm

    def __getitem__(self, port: int) -> float:
        return float(self.db[port])

    def as_dict(self) -> dict[int, float]:
        return {i: float(v) for i, v in enumerate(self.db)}

    @property
    def dissipated(self) -> float:
        """Injected power that never reached an external port."""
        return self.injected - float(self.linear.sum())


@dataclass(frozen=True)
class _Layout:
    n_slots: int
    src: np.ndarray  # inbound slot of each transfer entry, two entries per slot
    dest_slot: np.ndarray  # inbound slot reached, or -1 when the output is external
    dest_port: np.ndarray  # external port reached, or -1
    is_cross: np.ndarray
    pos: np.ndarray
    entry: np.ndarray  # inbound slot fed by each external port


@lru_cache(maxsize=16)
def _layout(topology: MeshTopology) -> _Layout:
    n = topology.n_pucs
    slot = {}
    for pos, puc in enumerate(topology.pucs):
        for name, i in _PORT_INDEX.items():
            slot[(puc.id, name)] = 4 * pos + i
    partner = np.full(4 * n, -1, np.int64)
    for a, b in topology.links:
        partner[slot[a]], partner[slot[b]] = slot[b], slot[a]
    ext = np.full(4 * n, -1, np.int64)
    entry = np.empty(topology.n_ports, np.int64)
    for p, ref in enumerate(topology.external_ports):
        ext[slot[tuple(ref)]] = p
        entry[p] = slot[tuple(ref)]
    src = np.repeat(np.arange(4 * n), 2)
    pidx = src % 4
    out_slot = 4 * (src // 4) + np.where(np.arange(8 * n) % 2 == 1, _CROSS_OUT[pidx], _BAR_OUT[pidx])
    return _Layout(4 * n, src, partner[out_slot], ext[out_slot], np.arange(8 * n) % 2 == 1,
                   src // 4, entry)


def _coefficients(topology: MeshTopology, states: Mapping[int, PucState], params: SimParams):
    """Per-PUC (transmission, cross fraction) arrays; PUCs without a state absorb."""
    n = topology.n_pucs
    t = np.zeros(n)
    k = np.zeros(n)
    for pos, puc in enumerate(topology.pucs):
        st = states.get(puc.id)
        if st is None or st.kind == "off":
            continue
        t[pos] = 10 ** (puc.il_db / 10)
        k[pos] = st.cross_fraction
        if params.crosstalk_enabled and st.kind in ("bar", "cross"):
            xt = params.crosstalk_db if params.crosstalk_db is not None else puc.crosstalk_db
            eps = 10 ** (-xt / 10)
            k[pos] = eps if st.kind == "bar" else 1.0 - eps
    return t, k


def _transfer(topology: MeshTopology, states: Mapping[int, PucState], params: SimParams):
    lay = _layout(topology)
    t, k = _coefficients(topology, states, params)
    frac = np.where(lay.is_cross, k[lay.pos], 1.0 - k[lay.pos]) * t[lay.pos]
    live = frac > 0
    inner = live & (lay.dest_slot >= 0)
    outer = live & (lay.dest_port >= 0)
    m = sp.csr_matrix((frac[inner], (lay.dest_slot[inner], lay.src[inner])), shape=(lay.n_slots, lay.n_slots))
    o = sp.csr_matrix((frac[outer], (lay.dest_port[outer], lay.src[outer])),
                      shape=(topology.n_ports, lay.n_slots))
    return lay, m, o


def _solve(m, s: np.ndarray, cap: int) -> np.ndarray:
    """Total inbound power x = s + M x by repeated application, falling back to
    a direct solve when a lossy loop keeps the residual alive past ``cap``."""
    total = s.copy()
    x = s
    half = None
    for it in range(cap):
        x = m @ x
        r = float(np.abs(x).max()) if x.size else 0.0
        if r < _RESIDUAL:
            return total + x
        total += x
        if it == cap // 2:
            half = r
    if half is not None and r < 0.5 * half:
        ident = sp.identity(m.shape[0], format="csc")
        return spla.spsolve((ident - m).tocsc(), s).reshape(s.shape)
    raise LitCycle(f"power still circulating after {cap} sweeps (residual {r:.3g})")


def propagate_many(topology: MeshTopology, states: Mapping[int, PucState], input_ports: Sequence[int],
                   params: SimParams | None = None) -> list[PowerMap]:
    """One :class:`PowerMap` per input, each lit on its own."""
    params = params or SimParams()
    lay, m, o = _transfer(topology, states, params)
    inj = 10 ** (-params.facet_loss_db / 10)
    s = np.zeros((lay.n_slots, len(input_ports)))
    for j, p in enumerate(input_ports):
        if not 0 <= p < topology.n_ports:
            raise ValueError(f"port {p} is not an external port")
        s[lay.entry[p], j] = inj
    x = _solve(m, s, max(10 * topology.n_pucs, 2))
    y = np.asarray(o @ x) * inj
    return [PowerMap(p, y[:, j].copy(), inj, params.source_power_dbm) for j, p in enumerate(input_ports)]


def propagate(topology: MeshTopology, states: Mapping[int, PucState], input_port: int,
              params: SimParams | None = None) -> PowerMap:
    """Light ``input_port`` and report the power leaving every external port."""
    return propagate_many(topology, states, [input_port], params)[0]


# --------------------------------------------------------------------------
# switch characterisation


def _states_of(config) -> Mapping[int, PucState]:
    return getattr(config, "states", config)


def switch_matrix(topology: MeshTopology, config, inputs: Sequence[int], outputs: Sequence[int],
                  params: SimParams | None = None) -> np.ndarray:
    """Power (dB) at ``outputs[j]`` when only ``inputs[i]`` is lit, as row i, column j."""
    maps = propagate_many(topology, _states_of(config), list(inputs), params)
    return np.array([[pm.db[q] for q in outputs] for pm in maps])


@dataclass
class CrosstalkReport:
    per_output: list[float]
    worst: float
    typical: float
    floor_limited: list[bool] = field(default_factory=list)


def crosstalk_report(matrix, targets: Sequence[int] | None = None) -> CrosstalkReport:
    """Target power minus the strongest other input, per output column.

    ``targets[j]`` is the row that should reach column ``j`` (the diagonal
    by default). Columns whose other entries all sit at the floor report
    ``inf``.
    """
    mat = np.asarray(matrix, dtype=float)
    n_rows, n_cols = mat.shape
    targets = list(range(n_cols)) if targets is None else list(targets)
    per, limited = [], []
    for j in range(n_cols):
        others = [mat[i, j] for i in range(n_rows) if i != targets[j]]
        leak = max(others) if others else FLOOR_DB
        if leak <= FLOOR_DB:
            per.append(float("inf"))
            limited.append(True)
        else:
            per.append(float(mat[targets[j], j] - leak))
            limited.append(False)
    return CrosstalkReport(per, min(per), float(statistics.median(per)), limited)


# --------------------------------------------------------------------------
# multicast characterisation


@dataclass
class MulticastPowerReport:
    """Power at each multicast output, with spread relative to the requested shares.

    ``deviation`` is the largest pairwise difference of the share-normalised
    powers; ``std`` is their standard deviation.
    """

    per_port: dict[int, float]
    normalized: dict[int, float]
    mean: float
    min: float
    deviation: float
    std: float


def multicast_power_report(topology: MeshTopology, config, params: SimParams | None = None,
                           outputs: Sequence[int] | None = None,
                           proportion: Sequence[float] | None = None) -> MulticastPowerReport:
    """Light the tree's input once and summarise the output powers."""
    outputs = list(outputs if outputs is not None else config.output_ports)
    if proportion is None:
        proportion = getattr(config, "proportion", None) or [1.0 / len(outputs)] * len(outputs)
    pm = propagate(topology, _states_of(config), config.input_port, params)
    per = {q: float(pm.db[q]) for q in outputs}
    norm = {q: per[q] - 10 * np.log10(w) for q, w in zip(outputs, proportion)}
    vals = np.array(list(norm.values()))
    return MulticastPowerReport(per, norm, float(np.mean(list(per.values()))), float(min(per.values())),
                                float(vals.max() - vals.min()), float(vals.std()))


# --------------------------------------------------------------------------
# export


def matrix_csv(matrix, row_labels: Sequence, col_labels: Sequence, corner: str = "") -> str:
    """CSV text with a header row of column labels; values in dB at 3 decimals."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([corner] + [str(c) for c in col_labels])
    for label, row in zip(row_labels, np.asarray(matrix, dtype=float)):
        w.writerow([str(label)] + [f"{v:.3f}" for v in row])
    return buf.getvalue()


def powermap_csv(maps: Sequence[PowerMap]) -> str:
    """One row per input, one column per external port."""
    n = len(maps[0].linear) if maps else 0
    return matrix_csv([m.db for m in maps], [m.input_port for m in maps], range(n), corner="input")
