"""Weighted directed graphs equivalent to dynamical systems.

Vertices are integers: ``0 .. p-1`` are input vertices, ``p .. p+n-1``
are state vertices. An edge ``(i, j)`` with weight ``w`` means variable
``i`` enters the update of state variable ``j`` with sensitivity ``w``;
edges never end in an input vertex. Only nonzero weights are stored,
as a coordinate list sorted by ``(source, target)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import DimensionMismatchError, JacobianError
from .systems import DifferentiableSystem, LinearSystem, PwaSystem

Edge = tuple[int, int, float]


@dataclass(frozen=True)
class EquivalentGraph:
    """Immutable coupling graph of a dynamical system.

    Attributes
    ----------
    n, p : int
        Number of state and input vertices.
    edges : tuple of (source, target, weight)
        Sorted sparse edge list; every stored weight is nonzero and no
        target is an input vertex.
    labels : tuple of float
        Per-vertex constant label (the additive offset of the dynamics
        for state vertices, zero for input vertices).
    time_tag : optional (x, u) pair
        Evaluation point for graphs cut from nonlinear dynamics.
    """

    n: int
    p: int
    edges: tuple[Edge, ...]
    labels: tuple[float, ...] = None
    time_tag: tuple = None

    def __post_init__(self):
        m = self.n + self.p
        edges = tuple(sorted((int(i), int(j), float(w)) for i, j, w in self.edges))
        for i, j, w in edges:
            if not (0 <= i < m and 0 <= j < m):
                raise ValueError(f"edge ({i},{j}) outside vertex range 0..{m-1}")
            if j < self.p:
                raise ValueError(f"edge ({i},{j}) ends in an input vertex")
            if w == 0.0:
                raise ValueError(f"edge ({i},{j}) stored with zero weight")
        labels = self.labels
        if labels is None:
            labels = (0.0,) * m
        labels = tuple(float(v) for v in labels)
        if len(labels) != m:
            raise DimensionMismatchError("labels", (m,), (len(labels),))
        if any(labels[v] != 0.0 for v in range(self.p)):
            raise ValueError("input vertices must carry label 0")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "labels", labels)
        wmap = {(i, j): w for i, j, w in edges}
        out_adj: dict[int, list] = {}
        in_adj: dict[int, list] = {}
        for i, j, w in edges:
            out_adj.setdefault(i, []).append((j, w))
            in_adj.setdefault(j, []).append((i, w))
        object.__setattr__(self, "_wmap", wmap)
        object.__setattr__(self, "_out", {k: tuple(v) for k, v in out_adj.items()})
        object.__setattr__(self, "_in", {k: tuple(v) for k, v in in_adj.items()})

    # -- vertex helpers -------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return self.n + self.p

    @property
    def input_vertices(self) -> range:
        return range(self.p)

    @property
    def state_vertices(self) -> range:
        return range(self.p, self.p + self.n)

    def is_input(self, v: int) -> bool:
        return v < self.p

    def state_vertex(self, state_index: int) -> int:
        return self.p + state_index

    def vertex_name(self, v: int) -> str:
        return f"u{v + 1}" if v < self.p else f"x{v - self.p + 1}"

    # -- edge queries ----------------------------------------------------
    def weight(self, i: int, j: int) -> float:
        return self._wmap.get((i, j), 0.0)

    def out_edges(self, i: int) -> tuple:
        return self._out.get(i, ())

    def in_edges(self, j: int) -> tuple:
        return self._in.get(j, ())

    def vertex_neighbors(self, v: int) -> frozenset:
        """Vertices adjacent to ``v`` in either direction, excluding ``v``."""
        adj = {j for j, _ in self.out_edges(v)} | {i for i, _ in self.in_edges(v)}
        adj.discard(v)
        return frozenset(adj)

    def total_weight_mass(self) -> float:
        return float(sum(abs(w) for _, _, w in self.edges))

    def subgraph(self, nodes: Iterable[int]) -> "Subgraph":
        return Subgraph(self, frozenset(int(v) for v in nodes))


@dataclass(frozen=True)
class Subgraph:
    """A vertex subset of a parent graph; induced edges are derived on demand."""

    parent: EquivalentGraph
    nodes: frozenset

    def __post_init__(self):
        bad = [v for v in self.nodes if not (0 <= v < self.parent.n_vertices)]
        if bad:
            raise ValueError(f"nodes {sorted(bad)} not in the parent graph")

    def induced_edges(self) -> tuple[Edge, ...]:
        return tuple(
            (i, j, w) for i, j, w in self.parent.edges if i in self.nodes and j in self.nodes
        )


def build_linear_graph(model: LinearSystem) -> EquivalentGraph:
    """Graph of a linear system: one edge per nonzero entry of A and B.

    Edge ``u_i -> x_j`` exists iff ``B[j, i] != 0`` and ``x_i -> x_j``
    iff ``A[j, i] != 0``; the weight is the matrix entry itself. The
    nonzero test is exact, no tolerance is applied.
    """
    n, p = model.n, model.p
    edges = []
    for j in range(n):
        for i in range(p):
            if model.B[j, i] != 0.0:
                edges.append((i, p + j, float(model.B[j, i])))
        for i in range(n):
            if model.A[j, i] != 0.0:
                edges.append((p + i, p + j, float(model.A[j, i])))
    return EquivalentGraph(n=n, p=p, edges=tuple(edges))


def build_pwa_graph(model: PwaSystem, q: int) -> EquivalentGraph:
    """Graph of mode ``q`` (1-based) of a PWA system.

    Identical to the linear construction on ``(A^q, B^q)``, with the
    mode's constant term as state-vertex labels.
    """
    if not 1 <= q <= model.n_modes:
        raise ValueError(f"mode index {q} out of range 1..{model.n_modes}")
    mode = model.modes[q - 1]
    base = build_linear_graph(LinearSystem(mode.A, mode.B))
    labels = (0.0,) * model.p + tuple(float(v) for v in mode.g)
    return EquivalentGraph(n=model.n, p=model.p, edges=base.edges, labels=labels)


def build_differentiable_graph(
    model: DifferentiableSystem, x, u, zero_tol: float = 1e-12
) -> EquivalentGraph:
    """Graph of the dynamics linearized at ``(x, u)``.

    Jacobian entries with magnitude at most ``zero_tol`` are dropped,
    which suppresses finite-difference noise. The evaluation point is
    recorded in ``time_tag``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    u = np.atleast_1d(np.asarray(u, dtype=float))
    dfdx, dfdu = model.jacobian(x, u)
    dfdx = np.asarray(dfdx, dtype=float)
    dfdu = np.asarray(dfdu, dtype=float)
    if dfdx.shape != (model.n, model.n):
        raise DimensionMismatchError("dfdx", (model.n, model.n), dfdx.shape)
    if dfdu.shape != (model.n, model.p):
        raise DimensionMismatchError("dfdu", (model.n, model.p), dfdu.shape)
    for name, arr in (("dfdx", dfdx), ("dfdu", dfdu)):
        bad = np.argwhere(~np.isfinite(arr))
        if bad.size:
            r, c = (int(v) for v in bad[0])
            raise JacobianError(name, r, c, arr[r, c])
    n, p = model.n, model.p
    edges = []
    for j in range(n):
        for i in range(p):
            if abs(dfdu[j, i]) > zero_tol:
                edges.append((i, p + j, float(dfdu[j, i])))
        for i in range(n):
            if abs(dfdx[j, i]) > zero_tol:
                edges.append((p + i, p + j, float(dfdx[j, i])))
    labels = (0.0,) * p + tuple(float(v) for v in model.offset)
    return EquivalentGraph(n=n, p=p, edges=tuple(edges), labels=labels, time_tag=(tuple(x), tuple(u)))


def topology_signature(g: EquivalentGraph) -> int:
    """Canonical encoding of the edge support, independent of weights.

    Returns an integer bitset over the ``(source, target)`` grid, so two
    graphs get the same signature exactly when their edge supports match.
    """
    m = g.n_vertices
    sig = 0
    for i, j, _ in g.edges:
        sig |= 1 << (i * m + j)
    return sig


def max_topology_count(n: int, p: int, self_edges: bool = True) -> int:
    """Upper bound on distinct topologies over all dynamics with this shape.

    Every potential edge into a state vertex is independently present or
    absent: ``2**(n*(n+p))`` supports, or ``2**(n*(n+p-1))`` when
    self-edges are excluded from the count.
    """
    exponent = n * (n + p) if self_edges else n * (n + p - 1)
    return 2**exponent


def aggregate(s1: Subgraph, s2: Subgraph) -> Subgraph:
    """Union two subgraphs of the same parent.

    Induced edges of the result automatically include every parent edge
    connecting the two node sets.
    """
    if s1.parent is not s2.parent:
        raise ValueError("subgraphs have different parent graphs")
    return Subgraph(s1.parent, s1.nodes | s2.nodes)


def frontier(s: Subgraph) -> frozenset:
    """Nodes of ``s`` with at least one edge to or from the outside."""
    out = set()
    for v in s.nodes:
        if any(j not in s.nodes for j, _ in s.parent.out_edges(v)):
            out.add(v)
            continue
        if any(i not in s.nodes for i, _ in s.parent.in_edges(v)):
            out.add(v)
    return frozenset(out)


def neighbors(s: Subgraph) -> frozenset:
    """Outside nodes adjacent to ``s`` in either direction."""
    out = set()
    for v in s.nodes:
        for j, _ in s.parent.out_edges(v):
            if j not in s.nodes:
                out.add(j)
        for i, _ in s.parent.in_edges(v):
            if i not in s.nodes:
                out.add(i)
    return frozenset(out)


def is_csu(s: Subgraph) -> bool:
    """Whether the subgraph's inputs act only inside it.

    True iff (a) every edge leaving an input vertex of ``s`` ends in a
    state vertex of ``s``, and (b) no input vertex outside ``s`` feeds
    a state vertex of ``s``.
    """
    g = s.parent
    for v in s.nodes:
        if g.is_input(v):
            for j, _ in g.out_edges(v):
                if j not in s.nodes:
                    return False
    for v in s.nodes:
        if not g.is_input(v):
            for i, _ in g.in_edges(v):
                if g.is_input(i) and i not in s.nodes:
                    return False
    return True


def graph_to_json(g: EquivalentGraph) -> dict:
    out = {
        "n": g.n,
        "p": g.p,
        "edges": [[i, j, float(w)] for i, j, w in g.edges],
        "labels": [float(v) for v in g.labels],
    }
    if g.time_tag is not None:
        out["time_tag"] = [list(g.time_tag[0]), list(g.time_tag[1])]
    return out


def graph_to_dot(g: EquivalentGraph, groups: dict = None, title: str = "system") -> str:
    """Render the graph in DOT form.

    Input vertices are red, state vertices cyan, and edge labels carry
    the weight with six significant digits. ``groups`` optionally maps a
    group id to a vertex set; each group becomes a cluster.
    """
    lines = [f'digraph "{title}" {{', "  rankdir=LR;"]
    grouped = set()
    if groups:
        for gid in sorted(groups):
            lines.append(f"  subgraph cluster_{gid} {{")
            lines.append(f'    label="unit {gid}";')
            for v in sorted(groups[gid]):
                color = "red" if g.is_input(v) else "cyan"
                lines.append(
                    f'    {g.vertex_name(v)} [style=filled, fillcolor={color}];'
                )
                grouped.add(v)
            lines.append("  }")
    for v in range(g.n_vertices):
        if v in grouped:
            continue
        color = "red" if g.is_input(v) else "cyan"
        lines.append(f"  {g.vertex_name(v)} [style=filled, fillcolor={color}];")
    for i, j, w in g.edges:
        lines.append(f'  {g.vertex_name(i)} -> {g.vertex_name(j)} [label="{w:.6g}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
