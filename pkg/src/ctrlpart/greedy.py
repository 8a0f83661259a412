"""Greedy aggregation of units into blocks, with local relocation refinement.

The greedy engine starts from as many empty sub-lists as there are
units and an index value of zero, and at every iteration commits the
(unit, sub-list) assignment with the largest immediate index gain,
until all units are assigned. The refinement engine repeatedly scans
all assigned units and commits the single best strictly-improving
relocation per pass. ``greedy_refined`` interleaves the two: a full
refinement runs after every greedy commitment.

Gains are evaluated incrementally from running aggregates of the
condensed coupling matrix; ``verify=True`` cross-checks every commit
against a from-scratch evaluation. All ties break toward the lowest
unit id, then the lowest sub-list index, so results are deterministic.
"""

from __future__ import annotations

import numpy as np

from .fsu import FsuCollection
from .metrics import (
    RATIO_COUPLING,
    RATIO_FULL,
    IndexConfig,
    Partition,
    coupling_matrix,
    evaluate_blocks,
)


class _RatioState:
    """Running aggregates for O(1)-ish evaluation of candidate assignments."""

    def __init__(self, cond: np.ndarray, alpha: float, objective: str):
        if objective not in (RATIO_COUPLING, RATIO_FULL):
            raise ValueError(f"ratio engines accept ratio objectives, got {objective!r}")
        self.q = coupling_matrix(cond)
        self.d = np.abs(np.diag(np.asarray(cond, dtype=float)))
        self.alpha = float(alpha)
        self.include_internal = objective == RATIO_FULL
        n = self.q.shape[0]
        self.n = n
        self.blocks: list[list[int]] = [[] for _ in range(n)]
        self.block_of: list = [None] * n
        self.s_same = 0.0  # coupling mass inside blocks
        self.q_assigned = 0.0  # coupling mass among all assigned pairs
        self.c_internal = 0.0  # internal mass of assigned units
        self.z = 0  # sum of squared block sizes
        self.coupling_to_assigned = np.zeros(n)
        self.n_assigned = 0

    def _score(self, s, qa, c, z, n_assigned) -> float:
        if n_assigned == 0:
            return 0.0
        intra = s + (c if self.include_internal else 0.0)
        inter = 2.0 * (qa - s)
        return intra / (1.0 + inter) + self.alpha / (1.0 + z)

    def value(self) -> float:
        return self._score(self.s_same, self.q_assigned, self.c_internal, self.z, self.n_assigned)

    def peek_assign(self, f: int, b: int) -> float:
        members = self.blocks[b]
        gain = float(self.q[f, members].sum()) if members else 0.0
        return self._score(
            self.s_same + gain,
            self.q_assigned + self.coupling_to_assigned[f],
            self.c_internal + self.d[f],
            self.z + 2 * len(members) + 1,
            self.n_assigned + 1,
        )

    def assign(self, f: int, b: int) -> None:
        members = self.blocks[b]
        self.s_same += float(self.q[f, members].sum()) if members else 0.0
        self.q_assigned += self.coupling_to_assigned[f]
        self.c_internal += self.d[f]
        self.z += 2 * len(members) + 1
        members.append(f)
        self.block_of[f] = b
        self.coupling_to_assigned += self.q[f]
        self.n_assigned += 1

    def peek_move(self, f: int, b_to: int) -> float:
        b_from = self.block_of[f]
        src = [j for j in self.blocks[b_from] if j != f]
        dst = self.blocks[b_to]
        s = self.s_same - float(self.q[f, src].sum()) + (float(self.q[f, dst].sum()) if dst else 0.0)
        z = self.z - 2 * (len(src) + 1) + 2 * len(dst) + 2
        return self._score(s, self.q_assigned, self.c_internal, z, self.n_assigned)

    def move(self, f: int, b_to: int) -> None:
        b_from = self.block_of[f]
        self.blocks[b_from].remove(f)
        src = self.blocks[b_from]
        dst = self.blocks[b_to]
        self.s_same += -float(self.q[f, src].sum()) + (float(self.q[f, dst].sum()) if dst else 0.0)
        self.z += -2 * (len(src) + 1) + 2 * len(dst) + 2
        dst.append(f)
        self.block_of[f] = b_to

    def nonempty_blocks(self) -> list:
        return [sorted(b) for b in self.blocks if b]


def _check(state: _RatioState, cond, objective) -> None:
    got = state.value()
    want = evaluate_blocks(cond, state.nonempty_blocks(), state.alpha, objective)
    if abs(got - want) > 1e-9 * max(1.0, abs(want)):
        raise AssertionError(f"incremental index {got} drifted from recomputation {want}")


def _refine_pass(state: _RatioState):
    """Best strictly-improving relocation, or None. One full scan."""
    cur = state.value()
    best = None
    best_delta = 0.0
    for f in range(state.n):
        b_from = state.block_of[f]
        if b_from is None:
            continue
        empty_seen = False
        for b in range(state.n):
            if b == b_from:
                continue
            if not state.blocks[b]:
                # Every empty target is equivalent; try only the first.
                if empty_seen:
                    continue
                empty_seen = True
            delta = state.peek_move(f, b) - cur
            if delta > best_delta:
                best_delta = delta
                best = (f, b)
    return best


def _run_refinement(state: _RatioState, cond, objective, verify: bool) -> None:
    while True:
        best = _refine_pass(state)
        if best is None:
            return
        state.move(*best)
        if verify:
            _check(state, cond, objective)


def greedy_partition(
    coll: FsuCollection,
    cfg: IndexConfig,
    objective: str = RATIO_COUPLING,
    verify: bool = False,
    trace: list = None,
    _refine_each_step: bool = False,
) -> Partition:
    """Greedy index maximization over unit-to-sub-list assignments.

    Every unassigned unit is evaluated against every sub-list at each
    iteration and the best immediate gain is committed, even when all
    gains are negative. Empty sub-lists are kept internally and dropped
    from the returned partition. Runs in O(N^3) for N units.
    """
    alpha = cfg.resolve(coll)
    cond = coll.condensed
    state = _RatioState(cond, alpha, objective)
    pending = list(range(coll.n_fsus))
    iteration = 0
    while pending:
        cur = state.value()
        best = None  # (delta, f, b), first strict maximum kept
        for f in pending:
            empty_seen = False
            for b in range(state.n):
                if not state.blocks[b]:
                    if empty_seen:
                        continue
                    empty_seen = True
                delta = state.peek_assign(f, b) - cur
                if best is None or delta > best[0]:
                    best = (delta, f, b)
        delta, f, b = best
        state.assign(f, b)
        pending.remove(f)
        iteration += 1
        if verify:
            _check(state, cond, objective)
        if trace is not None:
            trace.append(
                {
                    "iteration": iteration,
                    "fsu": f,
                    "block": b,
                    "gain": delta,
                    "index": state.value(),
                }
            )
        if _refine_each_step:
            _run_refinement(state, cond, objective, verify)
    return Partition(tuple(frozenset(b) for b in state.nonempty_blocks()), coll)


def refine_partition(
    p: Partition,
    cfg: IndexConfig,
    objective: str = RATIO_COUPLING,
    verify: bool = False,
) -> Partition:
    """Relocation refinement: one best strictly-improving move per pass.

    Relocations may target empty sub-lists (splitting a block). The
    returned index never decreases, and each committed move strictly
    increases it, so termination is guaranteed.
    """
    coll = p.source
    alpha = cfg.resolve(coll)
    state = _RatioState(coll.condensed, alpha, objective)
    for b, ids in enumerate(p.blocks):
        for f in sorted(ids):
            state.assign(f, b)
    _run_refinement(state, coll.condensed, objective, verify)
    return Partition(tuple(frozenset(b) for b in state.nonempty_blocks()), coll)


def greedy_refined(
    coll: FsuCollection,
    cfg: IndexConfig,
    objective: str = RATIO_COUPLING,
    verify: bool = False,
    trace: list = None,
) -> Partition:
    """Greedy assignment with a full refinement after every commitment."""
    return greedy_partition(
        coll, cfg, objective=objective, verify=verify, trace=trace, _refine_each_step=True
    )
