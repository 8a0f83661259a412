"""Partition structures and the partition index in both characterizations.

Two scores are provided for a partition of the units into blocks
(composite units):

* a ratio index ``W_intra / (1 + W_inter) + alpha / (1 + W_size)`` that
  the greedy engines maximize, and
* a quadratic index ``W_inter - W_intra + alpha * W_size`` over binary
  assignment variables that the exact engines minimize.

``W_intra``/``W_inter`` for a :class:`Partition` are computed at node
level on the equivalent graph, including self-edges and input edges.
The engine-side evaluators in this module work on the condensed
unit-level matrix instead; with ``include_internal=True`` they agree
with the node-level sums exactly, and by default they score coupling
mass only (each unit's internal mass excluded), which is the weighting
under which the published granularity behavior of the greedy engine is
reproduced.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import PartitionError
from .fsu import FsuCollection
from .graphs import frontier as subgraph_frontier

RATIO_COUPLING = "ratio"
RATIO_FULL = "ratio_full"
QUADRATIC = "quadratic"


@dataclass(frozen=True)
class IndexConfig:
    """Granularity configuration.

    Either ``alpha`` is given directly, or ``kappa`` is given and alpha
    is derived as ``(kappa / w_min)**2`` with ``w_min`` the smallest
    nonzero magnitude in the condensed coupling matrix.
    """

    alpha: float = None
    kappa: float = None

    def __post_init__(self):
        if self.alpha is None and self.kappa is None:
            raise ValueError("either alpha or kappa must be given")
        if self.alpha is not None and self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.kappa is not None and self.kappa <= 0:
            raise ValueError("kappa must be positive")

    def resolve(self, coll: FsuCollection) -> float:
        if self.kappa is not None:
            return (self.kappa / coll.min_coupling_weight()) ** 2
        return float(self.alpha)


@dataclass(frozen=True)
class Partition:
    """A non-overlapping cover of all unit ids by nonempty blocks.

    Blocks are canonically ordered by their smallest unit id. The three
    node-level components are computed once at construction and cached.
    """

    blocks: tuple[frozenset, ...]
    source: FsuCollection

    def __post_init__(self):
        blocks = tuple(sorted((frozenset(int(i) for i in b) for b in self.blocks), key=min))
        all_ids = set(range(self.source.n_fsus))
        seen: set = set()
        for b in blocks:
            if not b:
                raise PartitionError("empty block")
            if seen & b:
                raise PartitionError("blocks overlap")
            seen |= b
        if seen != all_ids:
            raise PartitionError(
                f"blocks cover {sorted(seen)} but the collection has units {sorted(all_ids)}"
            )
        object.__setattr__(self, "blocks", blocks)
        intra, inter, size = _node_level_components(self)
        object.__setattr__(self, "cached_w_intra", intra)
        object.__setattr__(self, "cached_w_inter", inter)
        object.__setattr__(self, "cached_w_size", size)

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    def block_nodes(self, b: int) -> frozenset:
        nodes: set = set()
        for fid in self.blocks[b]:
            nodes |= self.source.fsus[fid].nodes
        return frozenset(nodes)

    def block_of_fsu(self) -> dict:
        out = {}
        for b, ids in enumerate(self.blocks):
            for fid in ids:
                out[fid] = b
        return out

    def canonical(self) -> tuple:
        """Hashable label-free form: sorted tuple of sorted id tuples."""
        return tuple(sorted(tuple(sorted(b)) for b in self.blocks))


def singleton_partition(coll: FsuCollection) -> Partition:
    return Partition(tuple(frozenset([f.id]) for f in coll.fsus), coll)


def single_block_partition(coll: FsuCollection) -> Partition:
    return Partition((frozenset(f.id for f in coll.fsus),), coll)


def _node_level_components(p: Partition) -> tuple:
    g = p.source.graph
    node_block = {}
    for b in range(p.n_blocks):
        for v in p.block_nodes(b):
            node_block[v] = b
    intra = 0.0
    for i, j, w in g.edges:
        if node_block.get(i) is not None and node_block.get(i) == node_block.get(j):
            intra += abs(w)
    # Literal frontier-based inter sum: each cross-block adjacency is seen
    # once from each side, so every cross edge is counted twice in total.
    inter = 0.0
    for b in range(p.n_blocks):
        nodes = p.block_nodes(b)
        sub = g.subgraph(nodes)
        for s in subgraph_frontier(sub):
            for t in g.vertex_neighbors(s):
                if t in nodes:
                    continue
                inter += abs(g.weight(s, t)) + abs(g.weight(t, s))
    size = float(sum(len(b) ** 2 for b in p.blocks))
    return intra, inter, size


def w_intra(p: Partition) -> float:
    """Total |weight| of edges internal to a block, over all blocks."""
    return p.cached_w_intra


def w_inter(p: Partition) -> float:
    """Frontier-based cross-block interaction (each cross edge counted twice)."""
    return p.cached_w_inter


def w_size(p: Partition, count: str = "fsus") -> float:
    """Sum of squared block sizes, counting units (default) or vertices."""
    if count == "fsus":
        return p.cached_w_size
    if count == "nodes":
        return float(sum(len(p.block_nodes(b)) ** 2 for b in range(p.n_blocks)))
    raise ValueError("count must be 'fsus' or 'nodes'")


def index_ratio(p: Partition, cfg: IndexConfig) -> float:
    """Node-level ratio index; an empty partition scores zero."""
    if not p.blocks:
        return 0.0
    alpha = cfg.resolve(p.source)
    return p.cached_w_intra / (1.0 + p.cached_w_inter) + alpha / (1.0 + p.cached_w_size)


# ---------------------------------------------------------------------------
# Assignment-matrix (binary delta) form used by the exact engine.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AssignmentMatrix:
    """Binary unit-to-block assignment; every row sums to one."""

    delta: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.delta)
        if d.ndim != 2:
            raise PartitionError("delta must be a 2-D binary matrix")
        if not np.all((d == 0) | (d == 1)):
            raise PartitionError("delta entries must be 0 or 1")
        sums = d.sum(axis=1)
        if not np.all(sums == 1):
            rows = np.nonzero(sums != 1)[0].tolist()
            raise PartitionError(f"rows {rows} of delta do not sum to 1")
        d = d.astype(float)
        d.setflags(write=False)
        object.__setattr__(self, "delta", d)

    @property
    def n_fsus(self) -> int:
        return self.delta.shape[0]


def delta_from_partition(p: Partition) -> AssignmentMatrix:
    n = p.source.n_fsus
    d = np.zeros((n, n))
    for b, ids in enumerate(p.blocks):
        for fid in ids:
            d[fid, b] = 1.0
    return AssignmentMatrix(d)


def partition_from_delta(d: AssignmentMatrix, coll: FsuCollection) -> Partition:
    if d.n_fsus != coll.n_fsus:
        raise PartitionError(
            f"delta has {d.n_fsus} rows but the collection has {coll.n_fsus} units"
        )
    blocks = []
    for col in range(d.delta.shape[1]):
        members = frozenset(np.nonzero(d.delta[:, col])[0].tolist())
        if members:
            blocks.append(members)
    return Partition(tuple(blocks), coll)


def index_quadratic(d: AssignmentMatrix, coll: FsuCollection, cfg: IndexConfig) -> float:
    """Quadratic partition index over the condensed unit-level weights.

    Implements the three assignment-variable sums as written, including
    the repeated |w(i,i)| and |w(j,j)| terms for every ordered pair in a
    block. Vectorized through the same-block indicator ``delta @ delta.T``,
    which is equivalent because rows of delta sum to one.
    """
    if d.n_fsus != coll.n_fsus:
        raise PartitionError(
            f"delta has {d.n_fsus} rows but the collection has {coll.n_fsus} units"
        )
    alpha = cfg.resolve(coll)
    c = np.abs(coll.condensed)
    same = d.delta @ d.delta.T
    diag = np.diag(c)
    pair = c + c.T
    off = ~np.eye(coll.n_fsus, dtype=bool)
    w_inter_q = float(np.sum((1.0 - same) * pair * off))
    w_intra_q = float(np.sum(same * (pair + diag[:, None] + diag[None, :])))
    w_size_q = float(np.sum(d.delta.sum(axis=0) ** 2))
    return w_inter_q - w_intra_q + alpha * w_size_q


# ---------------------------------------------------------------------------
# Condensed-level evaluators shared by the partition engines.
# ---------------------------------------------------------------------------


def coupling_matrix(cond: np.ndarray) -> np.ndarray:
    """Symmetric pairwise coupling ``q[i,j] = |c[i,j]| + |c[j,i]|``, zero diagonal."""
    c = np.abs(np.asarray(cond, dtype=float))
    q = c + c.T
    np.fill_diagonal(q, 0.0)
    return q


def ratio_index_condensed(
    cond: np.ndarray,
    blocks: Sequence[Iterable[int]],
    alpha: float,
    include_internal: bool = False,
) -> float:
    """Ratio index of a (possibly partial) block assignment.

    Only assigned units contribute. ``include_internal`` adds each
    assigned unit's internal mass (condensed diagonal) to the intra
    term, which reproduces the node-level sums exactly; the default
    scores coupling mass only. An empty assignment scores zero.
    """
    q = coupling_matrix(cond)
    c = np.abs(np.asarray(cond, dtype=float))
    assigned: list = []
    s_same = 0.0
    z = 0
    for b in blocks:
        members = sorted(b)
        if not members:
            continue
        for a_pos, i in enumerate(members):
            for j in members[a_pos + 1 :]:
                s_same += q[i, j]
        z += len(members) ** 2
        assigned.extend(members)
    if not assigned:
        return 0.0
    idx = np.array(assigned)
    q_total = float(q[np.ix_(idx, idx)].sum()) / 2.0
    intra = s_same
    if include_internal:
        intra += float(np.diag(c)[idx].sum())
    inter = 2.0 * (q_total - s_same)
    return intra / (1.0 + inter) + alpha / (1.0 + z)


def quadratic_pair_costs(cond: np.ndarray, alpha: float) -> tuple[float, np.ndarray]:
    """Decompose the quadratic index into a constant plus same-block pair costs.

    With ``q[i,j] = |c(i,j)| + |c(j,i)|`` and ``d[i] = |c(i,i)|`` the
    quadratic index of any complete partition equals::

        C0 + sum over unordered same-block pairs {i,j} of e[i,j]
        C0     = 2 * Q_total + alpha * N - 4 * sum(d)
        e[i,j] = 2*alpha - 4*q[i,j] - 2*d[i] - 2*d[j]

    where ``Q_total`` sums ``q`` over all unordered pairs. The identity
    follows by expanding the three assignment-variable sums over blocks.
    """
    c = np.abs(np.asarray(cond, dtype=float))
    n = c.shape[0]
    q = coupling_matrix(cond)
    d = np.diag(c)
    q_total = float(q.sum()) / 2.0
    c0 = 2.0 * q_total + alpha * n - 4.0 * float(d.sum())
    e = 2.0 * alpha - 4.0 * q - 2.0 * d[:, None] - 2.0 * d[None, :]
    np.fill_diagonal(e, 0.0)
    return c0, e


def quadratic_index_condensed(cond: np.ndarray, blocks: Sequence[Iterable[int]], alpha: float) -> float:
    """Quadratic index of a complete partition via the pair-cost identity."""
    c0, e = quadratic_pair_costs(cond, alpha)
    val = c0
    for b in blocks:
        members = sorted(b)
        for a_pos, i in enumerate(members):
            for j in members[a_pos + 1 :]:
                val += e[i, j]
    return float(val)


def evaluate_blocks(
    cond: np.ndarray, blocks: Sequence[Iterable[int]], alpha: float, objective: str
) -> float:
    if objective == RATIO_COUPLING:
        return ratio_index_condensed(cond, blocks, alpha, include_internal=False)
    if objective == RATIO_FULL:
        return ratio_index_condensed(cond, blocks, alpha, include_internal=True)
    if objective == QUADRATIC:
        return quadratic_index_condensed(cond, blocks, alpha)
    raise ValueError(f"unknown objective {objective!r}")


def partition_to_json(p: Partition) -> dict:
    return {"blocks": [sorted(b) for b in p.blocks]}


def partition_from_json(obj, coll: FsuCollection) -> Partition:
    return Partition(tuple(frozenset(b) for b in obj["blocks"]), coll)
