"""Selection of fundamental system units (FSUs) on an equivalent graph.

The selection runs in three phases: root selection on the input-to-state
edges, then alternating forward and backward assignment of the remaining
state vertices over the state-to-state edges until every vertex is
housed. Each resulting unit contains at least one input and one state
vertex and never shares an input with another unit, so every unit is a
valid composite unit (its inputs act only inside it).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OrphanVertexError, UnactuatedInputError
from .graphs import EquivalentGraph


@dataclass(frozen=True)
class Fsu:
    """One fundamental unit: an input set plus the states it anchors."""

    id: int
    input_nodes: frozenset
    state_nodes: frozenset
    root_states: frozenset

    def __post_init__(self):
        if not self.input_nodes:
            raise ValueError("a fundamental unit needs at least one input vertex")
        if not self.root_states <= self.state_nodes:
            raise ValueError("root states must be a subset of the unit's states")

    @property
    def nodes(self) -> frozenset:
        return self.input_nodes | self.state_nodes


@dataclass(frozen=True)
class FsuCollection:
    """All units of a graph plus the unit-level condensed coupling matrix.

    ``condensed[i, j]`` sums ``|w(s, t)|`` over all edges from nodes of
    unit ``i`` to nodes of unit ``j``; the diagonal holds each unit's
    internal weight mass. ``unassigned`` is empty for a completed
    selection.
    """

    graph: EquivalentGraph
    fsus: tuple[Fsu, ...]
    unassigned: tuple[int, ...] = ()

    def __post_init__(self):
        seen = set()
        for f in self.fsus:
            if seen & f.nodes:
                raise ValueError("unit node sets overlap")
            seen |= f.nodes
        cond = _condense(self.graph, self.fsus)
        cond.setflags(write=False)
        object.__setattr__(self, "condensed", cond)

    @property
    def n_fsus(self) -> int:
        return len(self.fsus)

    def fsu_of_node(self) -> dict:
        owner = {}
        for f in self.fsus:
            for v in f.nodes:
                owner[v] = f.id
        return owner

    def min_coupling_weight(self) -> float:
        """Smallest nonzero magnitude in the condensed matrix."""
        nz = np.abs(self.condensed[self.condensed != 0.0])
        if nz.size == 0:
            raise ValueError("the condensed matrix has no nonzero entries")
        return float(nz.min())


def _condense(g: EquivalentGraph, fsus) -> np.ndarray:
    owner = {}
    for f in fsus:
        for v in f.nodes:
            owner[v] = f.id
    cond = np.zeros((len(fsus), len(fsus)))
    for i, j, w in g.edges:
        if i in owner and j in owner:
            cond[owner[i], owner[j]] += abs(w)
    return cond


def select_roots(g: EquivalentGraph) -> FsuCollection:
    """Phase 1: anchor one provisional unit on each input vertex.

    Every state fed by an input joins that input's unit; a state fed by
    several inputs merges all of them into one indivisible root. Inputs
    with no outgoing edge are rejected. States with no input parent are
    returned in ``unassigned``.
    """
    dead = [g.vertex_name(u) for u in g.input_vertices if not g.out_edges(u)]
    if dead:
        raise UnactuatedInputError(dead)

    # Union-find over input vertices, merged through shared child states.
    parent = list(range(g.p))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    state_parents = {v: [] for v in g.state_vertices}
    for u in g.input_vertices:
        for j, _ in g.out_edges(u):
            state_parents[j].append(u)
    for v, parents in state_parents.items():
        for other in parents[1:]:
            union(parents[0], other)

    groups: dict[int, set] = {}
    for u in g.input_vertices:
        groups.setdefault(find(u), set()).add(u)
    fsus = []
    # Canonical unit ids follow the lowest input vertex of each group.
    for fid, root in enumerate(sorted(groups)):
        inputs = frozenset(groups[root])
        states = frozenset(
            v for v, parents in state_parents.items() if parents and find(parents[0]) == root
        )
        fsus.append(Fsu(fid, inputs, states, states))
    unassigned = tuple(v for v in g.state_vertices if not state_parents[v])
    return FsuCollection(g, tuple(fsus), unassigned)


def _argmax_edge(candidates):
    """Pick (weight, fsu_id, vertex) with largest |weight|; ties go to the
    lowest fsu id, then the lowest vertex index."""
    best = None
    for w, fid, v in candidates:
        key = (-abs(w), fid, v)
        if best is None or key < best[0]:
            best = (key, fid)
    return best[1]


def forward_assign(coll: FsuCollection, g: EquivalentGraph) -> FsuCollection:
    """Phase 2: pull unassigned states reachable from assigned states.

    Sweeps the unassigned list in ascending vertex order; a state with an
    incoming edge from an assigned state joins the unit of the strongest
    such source. Assignments take effect immediately, so a node assigned
    early in a sweep can attract others in the same sweep. Repeats until
    a sweep assigns nothing.
    """
    states = {f.id: set(f.state_nodes) for f in coll.fsus}
    owner = {}
    for f in coll.fsus:
        for v in f.state_nodes:
            owner[v] = f.id
    pending = list(coll.unassigned)
    changed = True
    while changed and pending:
        changed = False
        for v in sorted(pending):
            incoming = [(w, owner[i], i) for i, w in g.in_edges(v) if i in owner]
            if not incoming:
                continue
            fid = _argmax_edge(incoming)
            states[fid].add(v)
            owner[v] = fid
            pending.remove(v)
            changed = True
    return _rebuild(coll, g, states, pending)


def backward_assign(coll: FsuCollection, g: EquivalentGraph) -> FsuCollection:
    """Phase 3: one pass attaching states that only feed assigned states."""
    states = {f.id: set(f.state_nodes) for f in coll.fsus}
    owner = {}
    for f in coll.fsus:
        for v in f.state_nodes:
            owner[v] = f.id
    pending = list(coll.unassigned)
    for v in sorted(pending):
        outgoing = [(w, owner[j], j) for j, w in g.out_edges(v) if j in owner]
        if not outgoing:
            continue
        fid = _argmax_edge(outgoing)
        states[fid].add(v)
        owner[v] = fid
        pending.remove(v)
    return _rebuild(coll, g, states, pending)


def _rebuild(coll, g, states, pending) -> FsuCollection:
    fsus = tuple(
        Fsu(f.id, f.input_nodes, frozenset(states[f.id]), f.root_states) for f in coll.fsus
    )
    return FsuCollection(g, fsus, tuple(sorted(pending)))


def select_fsus(g: EquivalentGraph) -> FsuCollection:
    """Run the full selection until every vertex is housed.

    Alternates forward and backward assignment; the loop ends when the
    unassigned list empties or a full sweep changes nothing. A stalled
    nonempty remainder (possible only for states disconnected from every
    unit, e.g. an isolated cycle) is broken by attaching the remaining
    node with the largest incident weight to the lowest-id unit, then
    resuming the sweeps. States with no edges at all are rejected.
    """
    orphans = [
        g.vertex_name(v)
        for v in g.state_vertices
        if not g.out_edges(v) and not g.in_edges(v)
    ]
    if orphans:
        raise OrphanVertexError(orphans)

    coll = select_roots(g)
    while coll.unassigned:
        before = coll.unassigned
        coll = forward_assign(coll, g)
        coll = backward_assign(coll, g)
        if coll.unassigned and coll.unassigned == before:
            # Stalled: remaining nodes have no edge to any assigned node.
            pick = max(
                coll.unassigned,
                key=lambda v: (
                    max(
                        [abs(w) for _, w in g.out_edges(v)]
                        + [abs(w) for _, w in g.in_edges(v)]
                    ),
                    -v,
                ),
            )
            states = {f.id: set(f.state_nodes) for f in coll.fsus}
            states[coll.fsus[0].id].add(pick)
            coll = _rebuild(coll, g, states, [v for v in coll.unassigned if v != pick])
    return coll


def collection_to_json(coll: FsuCollection) -> dict:
    from .graphs import graph_to_json

    return {
        "n": coll.graph.n,
        "p": coll.graph.p,
        "fsus": [
            {
                "id": f.id,
                "inputs": sorted(f.input_nodes),
                "states": sorted(f.state_nodes),
                "roots": sorted(f.root_states),
            }
            for f in coll.fsus
        ],
        "condensed": [[float(v) for v in row] for row in coll.condensed],
        # The source graph travels along so downstream commands can compute
        # node-level metrics without re-reading the system file.
        "graph": graph_to_json(coll.graph),
    }


def collection_from_json(obj) -> FsuCollection:
    gspec = obj["graph"]
    graph = EquivalentGraph(
        n=int(gspec["n"]),
        p=int(gspec["p"]),
        edges=tuple((int(i), int(j), float(w)) for i, j, w in gspec["edges"]),
        labels=tuple(float(v) for v in gspec["labels"]),
    )
    fsus = tuple(
        Fsu(
            int(f["id"]),
            frozenset(int(v) for v in f["inputs"]),
            frozenset(int(v) for v in f["states"]),
            frozenset(int(v) for v in f["roots"]),
        )
        for f in obj["fsus"]
    )
    return FsuCollection(graph, fsus)
