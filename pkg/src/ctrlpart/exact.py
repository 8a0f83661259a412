"""Exact partition optimization: exhaustive enumeration and branch-and-bound.

Set partitions are enumerated through restricted growth strings, which
visit every partition exactly once with no block-relabeling symmetry.
The branch-and-bound engine assigns units sequentially (in descending
total-coupling order) to an existing block or one new block, i.e. it
walks the same symmetry-free tree, pruning with an admissible bound.

Bound for the quadratic objective (minimized): by the pair-cost
identity (see :func:`ctrlpart.metrics.quadratic_pair_costs`) the index
of any completion equals the committed value plus ``e[i,j]`` for every
same-block pair not yet decided, and every such pair has at least one
currently unassigned endpoint. Summing ``min(0, e[i,j])`` over exactly
those pairs can only undercount the completion cost (split pairs
contribute zero, kept pairs contribute ``e >= min(0, e)``), so the
bound is admissible.

Bound for the ratio objective (maximized): coupling of a pair with an
unassigned endpoint may at best all turn into intra mass, coupling of
pairs already split across blocks is irrevocably inter mass, and the
final size term is at least the committed sizes plus one per remaining
unit. Together these give a valid upper bound on any completion.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import SizeGuardError
from .fsu import FsuCollection
from .greedy import greedy_refined
from .metrics import (
    QUADRATIC,
    RATIO_COUPLING,
    RATIO_FULL,
    IndexConfig,
    Partition,
    coupling_matrix,
    evaluate_blocks,
    quadratic_pair_costs,
)

BRUTE_FORCE_MAX_UNITS = 12

BELL_NUMBERS = (1, 1, 2, 5, 15, 52, 203, 877, 4140, 21147, 115975, 678570, 4213597)


def set_partitions(n: int):
    """Yield all set partitions of ``range(n)`` as restricted growth strings.

    A restricted growth string ``a`` has ``a[0] = 0`` and
    ``a[k] <= max(a[:k]) + 1``; each string encodes one partition with
    blocks numbered in order of first appearance. Lexicographic order.
    """
    if n == 0:
        yield ()
        return
    a = [0] * n
    while True:
        yield tuple(a)
        k = n - 1
        while k > 0 and a[k] > max(a[:k]):
            k -= 1
        if k == 0:
            return
        a[k] += 1
        for j in range(k + 1, n):
            a[j] = 0


def rgs_to_blocks(rgs) -> list:
    blocks: dict[int, list] = {}
    for i, b in enumerate(rgs):
        blocks.setdefault(b, []).append(i)
    return [blocks[k] for k in sorted(blocks)]


def brute_force_partition(
    coll: FsuCollection, cfg: IndexConfig, objective: str = QUADRATIC
) -> tuple[Partition, float]:
    """Global optimum by exhaustive enumeration (guarded to 12 units).

    Minimizes the quadratic objective and maximizes the ratio ones. The
    first optimum in restricted-growth order wins ties.
    """
    n = coll.n_fsus
    if n > BRUTE_FORCE_MAX_UNITS:
        raise SizeGuardError(
            f"{n} units exceeds the enumeration guard of {BRUTE_FORCE_MAX_UNITS}; "
            "use branch_and_bound instead"
        )
    alpha = cfg.resolve(coll)
    cond = coll.condensed
    sense = 1.0 if objective == QUADRATIC else -1.0
    best_val = None
    best_blocks = None
    for rgs in set_partitions(n):
        blocks = rgs_to_blocks(rgs)
        val = evaluate_blocks(cond, blocks, alpha, objective)
        if best_val is None or sense * val < sense * best_val:
            best_val = val
            best_blocks = blocks
    part = Partition(tuple(frozenset(b) for b in best_blocks), coll)
    return part, float(best_val)


def alpha_singleton_threshold(coll: FsuCollection) -> float:
    """Granularity above which all-singletons is the unique quadratic optimum.

    Equals ``max over pairs of (2 q[i,j] + d[i] + d[j])``; for any alpha
    strictly above it every same-block pair cost is positive, so any
    aggregation scores worse than singletons.
    """
    q = coupling_matrix(coll.condensed)
    d = np.abs(np.diag(coll.condensed))
    n = coll.n_fsus
    if n < 2:
        return 0.0
    vals = 2.0 * q + d[:, None] + d[None, :]
    iu = np.triu_indices(n, 1)
    return float(vals[iu].max())


@dataclass(frozen=True)
class BnbResult:
    partition: Partition
    value: float
    gap: float
    proven: bool
    nodes: int
    leaves: int
    incumbent_trace: tuple


def branch_and_bound(
    coll: FsuCollection,
    cfg: IndexConfig,
    time_limit: float = None,
    gap_tol: float = 0.0,
    objective: str = QUADRATIC,
    prune: bool = True,
) -> BnbResult:
    """Exact or anytime optimization over set partitions.

    The incumbent is seeded from ``greedy_refined``. Children of a node
    are the existing blocks in index order followed by one fresh block.
    Returns a proven optimum (gap 0) unless the time limit stops the
    search early, in which case the best incumbent is returned with the
    remaining relative gap. ``prune=False`` is a testing hook that
    forces a full enumeration (leaf count then equals the Bell number).
    """
    n = coll.n_fsus
    alpha = cfg.resolve(coll)
    cond = coll.condensed
    quadratic = objective == QUADRATIC
    sense = 1.0 if quadratic else -1.0

    seed_obj = objective if not quadratic else RATIO_COUPLING
    seed = greedy_refined(coll, IndexConfig(alpha=alpha), objective=seed_obj)
    incumbent_blocks = [sorted(b) for b in seed.blocks]
    incumbent_val = evaluate_blocks(cond, incumbent_blocks, alpha, objective)
    incumbent_trace = [incumbent_val]

    q = coupling_matrix(cond)
    d = np.abs(np.diag(cond))
    q_total = float(q.sum()) / 2.0
    d_total = float(d.sum())
    if quadratic:
        c0, e = quadratic_pair_costs(cond, alpha)
        neg = np.minimum(e, 0.0)

    order = sorted(range(n), key=lambda i: (-float(q[i].sum()), i))

    start = time.monotonic()
    state = {
        "nodes": 0,
        "leaves": 0,
        "timed_out": False,
        "incumbent_val": incumbent_val,
        "incumbent_blocks": incumbent_blocks,
        # quadratic running terms
        "committed": c0 if quadratic else 0.0,
        "pending": float(np.triu(neg, 1).sum()) if quadratic else 0.0,
        # ratio running terms
        "s_same": 0.0,
        "q_seen": 0.0,
        "z": 0,
    }
    blocks: list[list[int]] = []
    assigned: list[int] = []
    open_bounds: list[float] = []

    def node_bound(depth: int) -> float:
        if quadratic:
            return state["committed"] + state["pending"]
        remaining = n - depth
        s_max = state["s_same"] + (q_total - state["q_seen"])
        intra = s_max + (d_total if objective == RATIO_FULL else 0.0)
        inter_min = 2.0 * (state["q_seen"] - state["s_same"])
        z_min = state["z"] + remaining
        return intra / (1.0 + inter_min) + alpha / (1.0 + z_min)

    def recurse(depth: int):
        state["nodes"] += 1
        if time_limit is not None and state["nodes"] % 256 == 0:
            if time.monotonic() - start > time_limit:
                state["timed_out"] = True
        if state["timed_out"]:
            open_bounds.append(node_bound(depth))
            return
        if depth == n:
            state["leaves"] += 1
            val = evaluate_blocks(cond, blocks, alpha, objective)
            if sense * val < sense * state["incumbent_val"]:
                state["incumbent_val"] = val
                state["incumbent_blocks"] = [list(b) for b in blocks]
                incumbent_trace.append(val)
            return
        f = order[depth]
        pending_delta = float(neg[f, assigned].sum()) if quadratic and assigned else 0.0
        q_delta = float(q[f, assigned].sum()) if assigned else 0.0
        for b in range(len(blocks) + 1):
            new_block = b == len(blocks)
            members = [] if new_block else blocks[b]
            add_cost = 0.0
            if quadratic and members:
                add_cost = float(e[f, members].sum())
            gain = float(q[f, members].sum()) if members else 0.0
            state["committed"] += add_cost
            state["pending"] -= pending_delta
            state["s_same"] += gain
            state["q_seen"] += q_delta
            state["z"] += 2 * len(members) + 1
            if new_block:
                blocks.append([f])
            else:
                blocks[b].append(f)
            assigned.append(f)

            bound = node_bound(depth + 1)
            explore = True
            if prune and not state["timed_out"]:
                if quadratic:
                    explore = bound < state["incumbent_val"]
                else:
                    explore = bound > state["incumbent_val"]
            if explore:
                recurse(depth + 1)

            assigned.pop()
            if new_block:
                blocks.pop()
            else:
                blocks[b].pop()
            state["z"] -= 2 * len(members) + 1
            state["q_seen"] -= q_delta
            state["s_same"] -= gain
            state["pending"] += pending_delta
            state["committed"] -= add_cost
            if state["timed_out"]:
                open_bounds.append(node_bound(depth))
                return

    recurse(0)

    part = Partition(tuple(frozenset(b) for b in state["incumbent_blocks"]), coll)
    value = evaluate_blocks(cond, [sorted(b) for b in part.blocks], alpha, objective)
    if state["timed_out"] and open_bounds:
        if quadratic:
            best_possible = min(min(open_bounds), value)
            gap = (value - best_possible) / max(1e-12, abs(value))
        else:
            best_possible = max(max(open_bounds), value)
            gap = (best_possible - value) / max(1e-12, abs(value))
    else:
        gap = 0.0
    return BnbResult(
        partition=part,
        value=float(value),
        gap=float(max(0.0, gap)),
        proven=not state["timed_out"],
        nodes=state["nodes"],
        leaves=state["leaves"],
        incumbent_trace=tuple(incumbent_trace),
    )


def alpha_sweep(
    coll: FsuCollection,
    kappas,
    engine: str = "bnb",
    objective: str = QUADRATIC,
    time_limit: float = None,
) -> list:
    """Run an engine across granularities and keep the distinct partitions.

    Each ``kappa`` maps to ``alpha = (kappa / w_min)**2`` with ``w_min``
    the smallest nonzero condensed weight. Duplicate kappas and
    partitions that coincide up to block relabeling are dropped; the
    first alpha achieving each distinct partition is kept.
    """
    out = []
    seen_alpha = set()
    seen_parts = set()
    for kappa in kappas:
        cfg = IndexConfig(kappa=float(kappa))
        alpha = cfg.resolve(coll)
        if alpha in seen_alpha:
            continue
        seen_alpha.add(alpha)
        if engine == "bnb":
            part = branch_and_bound(
                coll, cfg, objective=objective, time_limit=time_limit
            ).partition
        elif engine == "brute":
            part, _ = brute_force_partition(coll, cfg, objective=objective)
        elif engine == "greedy":
            part = greedy_refined(coll, cfg)
        else:
            raise ValueError(f"unknown engine {engine!r}")
        key = part.canonical()
        if key in seen_parts:
            continue
        seen_parts.add(key)
        out.append((alpha, part))
    return out
