"""Randomised small meshes (at most 12 PUCs) for oracle comparisons."""
from dataclasses import replace

import numpy as np
from hypothesis import strategies as st

from hexmesh.graph import WeightCoeffs
from hexmesh.topology import MeshTopology, generate_hex_mesh

# (rows, cols, row_lengths, row_offsets) of every connected layout with <= 12 PUCs,
# up to translation: one hexagon, or two sharing an edge in one of three directions
SMALL_SHAPES = [
    (1, 1, None, None),
    (1, 2, None, None),
    (2, 1, None, None),
    (2, 1, (1, 1), (0, -1)),
]
IL_CHOICES = (-0.1, -0.215, -0.3, -0.5)  # a small set so equal-weight ties occur


def small_mesh(shape) -> MeshTopology:
    rows, cols, lengths, offsets = shape
    return generate_hex_mesh(rows, cols, row_lengths=lengths, row_offsets=offsets)


def randomize(topo: MeshTopology, rng: np.random.Generator, continuous: bool = False) -> MeshTopology:
    """Fresh il_db/bul/power_mw per PUC, with every external port opened for I/O."""
    pucs = []
    for p in topo.pucs:
        il = -rng.uniform(0.05, 1.0) if continuous else float(rng.choice(IL_CHOICES))
        pucs.append(replace(p, il_db=il, bul=float(rng.choice((0.5, 1.0, 2.0))),
                            power_mw=float(rng.choice((0.0, 1.0, 3.0)))))
    return replace(topo, pucs=tuple(pucs)).with_usable(range(topo.n_ports))


def random_coeffs(rng: np.random.Generator) -> WeightCoeffs:
    c = rng.choice((0.0, 0.5, 1.0, 2.0), size=3)
    if not c.any():
        c[0] = 1.0
    return WeightCoeffs(*map(float, c))


@st.composite
def small_meshes(draw, continuous: bool = False):
    """(topology, coeffs) for a random small layout with random PUC attributes."""
    shape = draw(st.sampled_from(SMALL_SHAPES))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    return randomize(small_mesh(shape), rng, continuous), random_coeffs(rng)
