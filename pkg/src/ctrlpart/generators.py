"""Seeded generators for benchmark networks.

All randomness flows through ``numpy.random.Generator`` seeded with
PCG64, so a given spec reproduces the same system bit for bit on every
platform. Three families are provided:

* multi-level modular networks of scalar units (strong cliques of
  ``base_size`` units, recursively linked by progressively weaker
  corner links),
* random connected networks of scalar units, and
* generic sparse input/state systems, optionally with planted clusters
  for recovery tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .systems import Guard, LinearSystem, PwaMode, PwaSystem


@dataclass(frozen=True)
class ModularSpec:
    """Modular network: ``base_size ** levels`` scalar units.

    Each unit has self-weight 0.5 and a unit input gain. Units inside a
    level-1 group are fully coupled with ``strong_w`` in both directions.
    At level ``l >= 2``, every pair of sibling sub-blocks is joined by a
    single directed corner link of weight ``strong_w * r**(l-1)`` where
    ``r = weak_w / strong_w`` (so the defaults give 0.1, 0.01, 0.001...).
    Corner links point from the lower-indexed sub-block to the higher:
    one direction only, which keeps inter-group coupling mass strictly
    below intra-group mass at every aggregation scale.
    """

    levels: int
    base_size: int = 4
    strong_w: float = 0.1
    weak_w: float = 0.01

    def __post_init__(self):
        if self.levels < 1:
            raise ValueError("levels must be at least 1")
        if self.base_size < 2:
            raise ValueError("base_size must be at least 2")
        if not self.strong_w > self.weak_w > 0:
            raise ValueError("need strong_w > weak_w > 0")


@dataclass(frozen=True)
class RandomFsuSpec:
    """Random connected network of ``n_fsus`` scalar units."""

    n_fsus: int
    edge_density: float = 0.2
    weight_lo: float = 0.01
    weight_hi: float = 0.1
    seed: int = 0
    pwa: bool = False

    def __post_init__(self):
        if self.n_fsus < 1:
            raise ValueError("n_fsus must be at least 1")
        if not 0 < self.edge_density <= 1:
            raise ValueError("edge_density must be in (0, 1]")
        if not 0 < self.weight_lo <= self.weight_hi:
            raise ValueError("need 0 < weight_lo <= weight_hi")


@dataclass(frozen=True)
class GenericSpec:
    """Generic sparse system with ``n`` states and ``p`` inputs."""

    n: int
    p: int
    density: float = 0.05
    seed: int = 0
    planted: bool = False

    def __post_init__(self):
        if not self.n >= self.p >= 1:
            raise ValueError("need n >= p >= 1")
        if not 0 < self.density <= 1:
            raise ValueError("density must be in (0, 1]")


def _corner(level: int, block_start: int, base: int, toward: int) -> int:
    """Unit serving as the gateway of a block toward sibling ``toward``.

    Recursively the corner of sub-block ``toward``; at level 1 it is the
    member with local index ``toward``.
    """
    if level == 1:
        return block_start + toward
    sub = base ** (level - 1)
    return _corner(level - 1, block_start + toward * sub, base, toward)


def gen_modular(spec: ModularSpec) -> LinearSystem:
    base = spec.base_size
    n = base**spec.levels
    A = np.zeros((n, n))
    np.fill_diagonal(A, 0.5)
    ratio = spec.weak_w / spec.strong_w
    # Level-1 cliques.
    for start in range(0, n, base):
        for i in range(start, start + base):
            for j in range(start, start + base):
                if i != j:
                    A[i, j] = spec.strong_w
    # Corner links between sibling blocks at each higher level.
    for level in range(2, spec.levels + 1):
        w = spec.strong_w * ratio ** (level - 1)
        block = base**level
        for start in range(0, n, block):
            sub = block // base
            for a in range(base):
                for b in range(a + 1, base):
                    src = _corner(level - 1, start + a * sub, base, b)
                    dst = _corner(level - 1, start + b * sub, base, a)
                    A[dst, src] = w
    return LinearSystem(A, np.eye(n))


def modular_edge_stats(spec: ModularSpec) -> dict:
    """Closed-form edge count and weight mass of the generated graph.

    Per level ``l``: ``C(base,2) * base**(levels-l)`` corner links of
    weight ``strong_w * (weak_w/strong_w)**(l-1)``; level 1 counts both
    directions. Self loops contribute ``0.5 * n`` and input edges ``n``.
    """
    base, n = spec.base_size, spec.base_size**spec.levels
    pairs = base * (base - 1) // 2
    ratio = spec.weak_w / spec.strong_w
    count = 2 * n  # self loops + input edges
    mass = 1.5 * n
    count += 2 * pairs * (n // base)
    mass += 2 * pairs * (n // base) * spec.strong_w
    for level in range(2, spec.levels + 1):
        links = pairs * (n // base**level)
        count += links
        mass += links * spec.strong_w * ratio ** (level - 1)
    return {"edges": count, "mass": mass}


def _pwa_from_linear(lin: LinearSystem) -> PwaSystem:
    """Two-mode variant: the self-dynamics flips sign with the first state."""
    n, p = lin.n, lin.p
    A2 = lin.A.copy()
    A2[np.diag_indices(n)] = -np.diag(lin.A)
    sel = np.zeros((1, n))
    sel[0, 0] = 1.0
    zeros_u = np.zeros((1, p))
    up = Guard(-sel, zeros_u, [0.0])  # x1 >= 0
    down = Guard(sel, zeros_u, [0.0])  # x1 <= 0
    return PwaSystem(
        (
            PwaMode(lin.A, lin.B, np.zeros(n), up),
            PwaMode(A2, lin.B, np.zeros(n), down),
        )
    )


def gen_random_fsu(spec: RandomFsuSpec):
    """Random directed couplings at the given density, forced connected.

    Missing connectivity is repaired by adding spanning-tree edges over
    a random permutation, so the undirected support is always one
    component. Returns a linear system, or its two-mode PWA variant
    when ``spec.pwa`` is set.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.n_fsus
    A = np.zeros((n, n))
    np.fill_diagonal(A, 0.5)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            if rng.random() < spec.edge_density:
                A[i, j] = rng.uniform(spec.weight_lo, spec.weight_hi)
    # Spanning-tree augmentation over a random vertex order.
    order = rng.permutation(n)
    reach = {int(order[0])}
    for k in range(1, n):
        v = int(order[k])
        if not any(A[v, u] != 0 or A[u, v] != 0 for u in reach):
            u = int(order[rng.integers(0, k)])
            A[v, u] = rng.uniform(spec.weight_lo, spec.weight_hi)
        reach.add(v)
    lin = LinearSystem(A, np.eye(n))
    return _pwa_from_linear(lin) if spec.pwa else lin


def gen_generic(spec: GenericSpec) -> LinearSystem:
    """Sparse random system where every input actuates at least one state.

    With ``planted=True`` the states split into ``p`` clusters, each a
    chain rooted at its own input with intra-cluster extras and no cross
    edges, so unit selection must recover the clusters exactly.
    """
    rng = np.random.default_rng(spec.seed)
    n, p = spec.n, spec.p
    A = np.zeros((n, n))
    B = np.zeros((n, p))
    if spec.planted:
        bounds = np.linspace(0, n, p + 1).astype(int)
        for i in range(p):
            members = list(range(bounds[i], bounds[i + 1]))
            B[members[0], i] = 1.0
            for a, b in zip(members, members[1:]):
                A[b, a] = rng.uniform(0.1, 0.9)
            for a in members:
                for b in members:
                    if a != b and rng.random() < spec.density:
                        A[b, a] = rng.uniform(0.1, 0.9)
        return LinearSystem(A, B)
    roots = rng.choice(n, size=p, replace=False)
    for i, s in enumerate(sorted(int(v) for v in roots)):
        B[s, i] = 1.0
    for i in range(n):
        A[i, i] = rng.uniform(0.2, 0.8)
        for j in range(n):
            if i != j and rng.random() < spec.density:
                A[i, j] = rng.uniform(0.05, 1.0)
    return LinearSystem(A, B)
