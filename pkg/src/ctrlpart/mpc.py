"""Closed-loop evaluation of partitions with centralized and distributed MPC.

A partition of a linear network is split into per-block subsystems
(:class:`CsuSystem`). Single-block partitions are controlled by
centralized MPC on a condensed horizon QP; multi-block partitions run
consensus ADMM, where each block optimizes its own input trajectory
plus local copies of the neighbor state trajectories that drive its
coupling, and copies are reconciled with their owners through a shared
consensus variable and scaled dual updates.

Timing metrics are simulated-parallel: each block's QP solve is timed
individually, the slowest block defines the per-iteration parallel
time, and core-seconds multiply that by the block count before summing
over iterations (the accounting the trade-off tables use). Physical
parallelism is not required and would not change the metric
definitions.

Stage-cost weights default to identity on states and 0.01 identity on
inputs; absolute closed-loop costs therefore depend on this choice and
only cross-partition comparisons are meaningful. State bounds are
enforced softly: a quadratic penalty round is added only when the
predicted trajectory leaves the box, keeping every QP feasible.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, SolverError
from .fsu import FsuCollection
from .metrics import Partition
from .systems import LinearSystem

_SOFT_BOUND_ROUNDS = 3
_SOFT_BOUND_WEIGHT = 1e4
_SOFT_BOUND_TOL = 1e-6


# ---------------------------------------------------------------------------
# Box-constrained QP by operator splitting
# ---------------------------------------------------------------------------


class BoxQpSolver:
    """min 0.5 w'Pw + q'w subject to lo <= w <= hi, P symmetric PSD.

    Splitting iteration with a cached inverse of ``P + rho I``; only the
    linear term changes between solves, so one instance can serve many
    right-hand sides cheaply. Deterministic for fixed inputs.
    """

    def __init__(self, P: np.ndarray, rho: float = 1.0):
        P = np.asarray(P, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise DimensionMismatchError("P", (P.shape[0], P.shape[0]), P.shape)
        self.dim = P.shape[0]
        # Diagonal equilibration: rescale variables so the Hessian has unit
        # diagonal, which keeps the splitting well conditioned when curvature
        # differs sharply between variable blocks.
        d = np.sqrt(np.maximum(np.abs(np.diag(P)), 1e-8))
        self._scale = 1.0 / d
        P_hat = P * self._scale[:, None] * self._scale[None, :]
        self.rho = float(rho)
        self._kinv = np.linalg.inv(P_hat + self.rho * np.eye(self.dim))
        self._z = np.zeros(self.dim)
        self._y = np.zeros(self.dim)

    def solve(self, q, lo, hi, tol: float = 1e-8, max_iter: int = 20000, warm: bool = True):
        """Return ``(solution, primal_residuals)``; raises on non-convergence.

        Residuals are reported in the original (unscaled) variables.
        """
        q = np.asarray(q, dtype=float)
        lo = np.broadcast_to(np.asarray(lo, dtype=float), (self.dim,))
        hi = np.broadcast_to(np.asarray(hi, dtype=float), (self.dim,))
        if np.any(lo > hi):
            raise ValueError("lower bound exceeds upper bound")
        s = self._scale
        q_hat = q * s
        lo_hat = lo / s
        hi_hat = hi / s
        z = self._z if warm else np.zeros(self.dim)
        y = self._y if warm else np.zeros(self.dim)
        residuals = []
        relax = 1.6
        for _ in range(max_iter):
            w = self._kinv @ (self.rho * (z - y) - q_hat)
            w_rel = relax * w + (1.0 - relax) * z
            z_new = np.clip(w_rel + y, lo_hat, hi_hat)
            y = y + w_rel - z_new
            primal = float(np.max(s * np.abs(w - z_new))) if self.dim else 0.0
            dual = float(self.rho * np.max(s * np.abs(z_new - z))) if self.dim else 0.0
            z = z_new
            residuals.append(primal)
            if primal <= tol and dual <= tol:
                self._z, self._y = z, y
                return s * z, residuals
        raise SolverError(
            f"box QP did not reach tol={tol} in {max_iter} iterations "
            f"(last primal residual {residuals[-1]:.3e})",
            residual=residuals[-1],
            iterations=max_iter,
        )


def qp_solve(H_matrix, f_vec, lo, hi, tol: float = 1e-8, max_iter: int = 20000):
    """One-shot functional form of :class:`BoxQpSolver`."""
    solver = BoxQpSolver(H_matrix)
    return solver.solve(f_vec, lo, hi, tol=tol, max_iter=max_iter, warm=False)


class BoxActiveSetSolver:
    """Direct active-set solver for strictly convex box QPs.

    Used for the horizon QPs inside the MPC controllers: each solve is
    a handful of dense factorizations, so measured solve time scales
    with problem size (a first-order method at these dimensions would
    be dominated by per-iteration interpreter overhead instead). Warm
    starts reuse the previous active set; with slowly moving data the
    typical solve needs one linear solve. Falls back to the splitting
    solver if the active set cycles.
    """

    def __init__(self, P: np.ndarray):
        self.P = np.asarray(P, dtype=float)
        self.dim = self.P.shape[0]
        self._state = np.zeros(self.dim, dtype=np.int8)  # -1 lo, 0 free, +1 hi

    def solve(self, q, lo, hi, warm: bool = True):
        P, dim = self.P, self.dim
        q = np.asarray(q, dtype=float)
        lo = np.broadcast_to(np.asarray(lo, dtype=float), (dim,))
        hi = np.broadcast_to(np.asarray(hi, dtype=float), (dim,))
        state = self._state.copy() if warm else np.zeros(dim, dtype=np.int8)
        state[(state < 0) & ~np.isfinite(lo)] = 0
        state[(state > 0) & ~np.isfinite(hi)] = 0
        w = np.empty(dim)
        for _ in range(3 * dim + 10):
            free = state == 0
            w[state < 0] = lo[state < 0]
            w[state > 0] = hi[state > 0]
            if free.any():
                rhs = -q[free]
                if (~free).any():
                    rhs -= P[np.ix_(free, ~free)] @ w[~free]
                w[free] = np.linalg.solve(P[np.ix_(free, free)], rhs)
            # clamp free variables that left the box (all at once)
            too_hi = free & (w > hi + 1e-12)
            too_lo = free & (w < lo - 1e-12)
            if too_hi.any() or too_lo.any():
                state[too_hi] = 1
                state[too_lo] = -1
                continue
            # release the single worst active variable with a wrong multiplier
            grad = P @ w + q
            viol_hi = (state > 0) & (grad > 1e-10)
            viol_lo = (state < 0) & (grad < -1e-10)
            if not (viol_hi.any() or viol_lo.any()):
                self._state = state
                return w.copy()
            mags = np.where(viol_hi | viol_lo, np.abs(grad), -1.0)
            state[int(np.argmax(mags))] = 0
        # cycle guard: delegate to the splitting solver
        fallback = BoxQpSolver(P)
        w, _ = fallback.solve(q, lo, hi, tol=1e-10, max_iter=200000, warm=False)
        self._state = np.where(w >= hi - 1e-12, 1, np.where(w <= lo + 1e-12, -1, 0)).astype(np.int8)
        return w


# ---------------------------------------------------------------------------
# Partition-aligned subsystems
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CsuSystem:
    """One block of the network: local dynamics plus coupling terms.

    ``couplings`` maps a neighbor block index to the matrix multiplying
    that neighbor's state vector in this block's update; stacking all
    blocks reconstructs the global system exactly.
    """

    index: int
    state_idx: tuple[int, ...]
    input_idx: tuple[int, ...]
    A_local: np.ndarray
    B_local: np.ndarray
    couplings: tuple  # ((neighbor_index, matrix), ...)

    @property
    def n(self) -> int:
        return len(self.state_idx)

    @property
    def p(self) -> int:
        return len(self.input_idx)


def split_system(model: LinearSystem, p: Partition, coll: FsuCollection) -> list:
    """Cut the global (A, B) along the partition's blocks."""
    gp = coll.graph.p
    state_sets = []
    input_sets = []
    for b in range(p.n_blocks):
        nodes = p.block_nodes(b)
        state_sets.append(sorted(v - gp for v in nodes if v >= gp))
        input_sets.append(sorted(v for v in nodes if v < gp))
    csus = []
    for b in range(p.n_blocks):
        si = state_sets[b]
        ui = input_sets[b]
        A_local = model.A[np.ix_(si, si)]
        B_local = model.B[np.ix_(si, ui)]
        couplings = []
        for other in range(p.n_blocks):
            if other == b:
                continue
            blockm = model.A[np.ix_(si, state_sets[other])]
            if np.any(blockm != 0.0):
                couplings.append((other, blockm))
        csus.append(
            CsuSystem(
                index=b,
                state_idx=tuple(si),
                input_idx=tuple(ui),
                A_local=A_local,
                B_local=B_local,
                couplings=tuple(couplings),
            )
        )
    return csus


def reassemble(csus, n: int, p: int) -> LinearSystem:
    """Rebuild the global system from its blocks (used to verify splits)."""
    A = np.zeros((n, n))
    B = np.zeros((n, p))
    for c in csus:
        A[np.ix_(c.state_idx, c.state_idx)] = c.A_local
        B[np.ix_(c.state_idx, c.input_idx)] = c.B_local
        for other, m in c.couplings:
            A[np.ix_(c.state_idx, csus[other].state_idx)] = m
    return LinearSystem(A, B)


# ---------------------------------------------------------------------------
# Scenario
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    """Closed-loop experiment description.

    All states track the same sinusoid ``amplitude * sin(omega * k)``.
    Stage cost is ``q_weight * |x - r|^2 + r_weight * |u|^2``. ``eps``
    is the ADMM consensus threshold on the primal residual infinity
    norm and ``rho`` the augmented-Lagrangian penalty.
    """

    horizon: int = 30
    sim_steps: int = 60
    amplitude: float = 1.0
    omega: float = 2.0 * np.pi / 15.0
    u_lo: float = -0.5
    u_hi: float = 0.5
    x_lo: float = -0.9
    x_hi: float = 0.9
    q_weight: float = 1.0
    r_weight: float = 0.01
    rho: float = 0.01
    eps: float = 1e-3
    max_iterations: int = 400
    x0: tuple = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if not (self.u_lo <= self.u_hi and self.x_lo <= self.x_hi):
            raise ValueError("bounds must be ordered")
        if self.rho <= 0 or self.eps <= 0:
            raise ValueError("rho and eps must be positive")

    def reference(self, k: int, n: int) -> np.ndarray:
        return np.full(n, self.amplitude * np.sin(self.omega * k))

    def reference_window(self, k: int, n: int) -> np.ndarray:
        """Rows t = 0..H-1 hold the reference for steps k+1 .. k+H."""
        steps = np.arange(k + 1, k + 1 + self.horizon)
        return np.outer(self.amplitude * np.sin(self.omega * steps), np.ones(n))

    def initial_state(self, n: int) -> np.ndarray:
        if self.x0 is None:
            return np.zeros(n)
        x0 = np.asarray(self.x0, dtype=float)
        if x0.shape != (n,):
            raise DimensionMismatchError("x0", (n,), x0.shape)
        return x0


def scenario_from_json(obj) -> Scenario:
    known = {f for f in Scenario.__dataclass_fields__}
    kwargs = {k: v for k, v in obj.items() if k in known}
    if "x0" in kwargs and kwargs["x0"] is not None:
        kwargs["x0"] = tuple(float(v) for v in kwargs["x0"])
    return Scenario(**kwargs)


def scenario_to_json(s: Scenario) -> dict:
    out = {k: getattr(s, k) for k in Scenario.__dataclass_fields__}
    if out["x0"] is not None:
        out["x0"] = [float(v) for v in out["x0"]]
    return out


# ---------------------------------------------------------------------------
# Horizon condensation and local problems
# ---------------------------------------------------------------------------


def _powers(A: np.ndarray, H: int) -> list:
    out = [np.eye(A.shape[0])]
    for _ in range(H):
        out.append(A @ out[-1])
    return out


class _LocalProblem:
    """Condensed horizon QP of one block inside the consensus loop.

    Decision vector ``w = [u(0..H-1); zeta(1..H-1)]`` where ``zeta`` are
    copies of the neighbor coupling states this block needs; the t = 0
    coupling uses the measured global state. The quadratic part is
    constant over the whole simulation, so it is factored exactly once.
    """

    def __init__(self, csu: CsuSystem, scenario: Scenario, copy_cols, own_shared_cols):
        self.csu = csu
        self.scen = scenario
        H = scenario.horizon
        n, p = csu.n, csu.p
        self.copy_cols = copy_cols  # ((neighbor, local_col), ...) order of zeta entries
        self.own_shared_cols = own_shared_cols
        m = len(copy_cols)
        self.m = m
        self.nu = p * H
        self.nz = m * (H - 1)
        dim = self.nu + self.nz

        C = np.zeros((n, m))
        for k_col, (nb, col) in enumerate(copy_cols):
            for other, mat in csu.couplings:
                if other == nb:
                    C[:, k_col] = mat[:, col]
        self.C = C

        pw = _powers(csu.A_local, H)
        # X = Phi x0 + Psi0 zeta(0) + Gu U + Gz Z, X stacks x(1..H)
        self.Phi = np.vstack([pw[t] for t in range(1, H + 1)])
        self.Psi0 = np.vstack([pw[t - 1] @ C for t in range(1, H + 1)]) if m else np.zeros((n * H, 0))
        Gu = np.zeros((n * H, self.nu))
        for t in range(1, H + 1):
            for s in range(t):
                Gu[(t - 1) * n : t * n, s * p : (s + 1) * p] = pw[t - 1 - s] @ csu.B_local
        Gz = np.zeros((n * H, self.nz))
        for t in range(1, H + 1):
            for s in range(1, t):
                Gz[(t - 1) * n : t * n, (s - 1) * m : s * m] = pw[t - 1 - s] @ C
        self.G = np.hstack([Gu, Gz])

        qw, rw, rho = scenario.q_weight, scenario.r_weight, scenario.rho
        P = 2.0 * qw * (self.G.T @ self.G)
        P[: self.nu, : self.nu] += 2.0 * rw * np.eye(self.nu)
        # rows of X subject to own-side consensus: (t, col) for t = 1..H-1
        rows = []
        for t in range(1, H):
            for col in own_shared_cols:
                rows.append((t - 1) * n + col)
        self.own_rows = np.array(rows, dtype=int)
        if len(rows):
            Gown = self.G[self.own_rows]
            P += rho * (Gown.T @ Gown)
            self._gown_t = rho * Gown.T
        else:
            self._gown_t = None
        if self.nz:
            P[self.nu :, self.nu :] += rho * np.eye(self.nz)
        self.P = P
        self._gtq = 2.0 * qw * self.G.T
        self.solver = BoxActiveSetSolver(P)
        self.lo = np.concatenate([np.full(self.nu, scenario.u_lo), np.full(self.nz, -np.inf)])
        self.hi = np.concatenate([np.full(self.nu, scenario.u_hi), np.full(self.nz, np.inf)])

    def constant_term(self, x_local: np.ndarray, zeta0: np.ndarray) -> np.ndarray:
        c = self.Phi @ x_local
        if self.m:
            c = c + self.Psi0 @ zeta0
        return c

    def linear_term(self, c, r_flat, a_own, a_in) -> np.ndarray:
        q = self._gtq @ (c - r_flat)
        if self._gown_t is not None:
            q += self._gown_t @ (c[self.own_rows] - a_own)
        if self.nz:
            q[self.nu :] += -self.scen.rho * a_in
        return q

    def solve(self, c, r_flat, a_own, a_in):
        q = self.linear_term(c, r_flat, a_own, a_in)
        w = self.solver.solve(q, self.lo, self.hi)
        w = self._soften_state_bounds(w, q, c)
        return w

    def _soften_state_bounds(self, w, q_base, c):
        """Penalty rounds for predicted states leaving the box (rare)."""
        scen = self.scen
        mu = _SOFT_BOUND_WEIGHT
        for _ in range(_SOFT_BOUND_ROUNDS):
            x_pred = self.G @ w + c
            over = x_pred - scen.x_hi
            under = scen.x_lo - x_pred
            viol = np.maximum(over, under)
            rows = np.nonzero(viol > _SOFT_BOUND_TOL)[0]
            if len(rows) == 0:
                return w
            target = np.clip(x_pred[rows], scen.x_lo, scen.x_hi)
            Gv = self.G[rows]
            P_pen = self.P + 2.0 * mu * (Gv.T @ Gv)
            q_pen = q_base + 2.0 * mu * Gv.T @ (c[rows] - target)
            w = BoxActiveSetSolver(P_pen).solve(q_pen, self.lo, self.hi, warm=False)
            mu *= 10.0
        return w

    def predict(self, w, c):
        return self.G @ w + c


def _cols_of(csu: CsuSystem, neighbor: int) -> list:
    """Local state columns of ``neighbor`` that actually drive ``csu``."""
    for other, mat in csu.couplings:
        if other == neighbor:
            return sorted(int(c) for c in np.nonzero(np.any(mat != 0.0, axis=0))[0])
    return []


# ---------------------------------------------------------------------------
# Controllers
# ---------------------------------------------------------------------------


class CentralizedMpc:
    """Condensed-QP MPC over the whole network (one computing core)."""

    def __init__(self, model: LinearSystem, scenario: Scenario):
        csu = CsuSystem(
            index=0,
            state_idx=tuple(range(model.n)),
            input_idx=tuple(range(model.p)),
            A_local=model.A,
            B_local=model.B,
            couplings=(),
        )
        self.local = _LocalProblem(csu, scenario, (), ())
        self.model = model
        self.scen = scenario

    def step(self, x: np.ndarray, r_window: np.ndarray):
        start = time.perf_counter()
        c = self.local.constant_term(x, np.zeros(0))
        w = self.local.solve(c, r_window.reshape(-1), np.zeros(0), np.zeros(0))
        elapsed = time.perf_counter() - start
        u = w[: self.model.p]
        return np.clip(u, self.scen.u_lo, self.scen.u_hi), elapsed


def centralized_mpc_step(model: LinearSystem, x, r_window, scenario: Scenario):
    """One-shot centralized MPC returning the first input."""
    u, _ = CentralizedMpc(model, scenario).step(
        np.asarray(x, dtype=float), np.asarray(r_window, dtype=float)
    )
    return u


class AdmmCoordinator:
    """Consensus ADMM over the blocks of a partition.

    Shared variables are the neighbor state trajectories that appear in
    some block's coupling; for each shared (owner, state, time) entry
    the consensus value averages the owner's prediction with every
    listener copy (plus scaled duals). Iterations stop when the primal
    residual infinity norm falls below the scenario threshold.
    """

    def __init__(self, csus, scenario: Scenario):
        self.csus = list(csus)
        self.scen = scenario
        H = scenario.horizon
        nb = len(self.csus)
        # owner -> sorted union of local columns some listener needs
        shared: dict[int, set] = {b: set() for b in range(nb)}
        for c in self.csus:
            for other, _ in c.couplings:
                shared[other].update(_cols_of(c, other))
        self.shared_cols = {b: sorted(cols) for b, cols in shared.items() if cols}
        self.locals = []
        for c in self.csus:
            copy_cols = []
            for other, _ in sorted(c.couplings, key=lambda t: t[0]):
                for col in _cols_of(c, other):
                    copy_cols.append((other, col))
            self.locals.append(
                _LocalProblem(c, scenario, tuple(copy_cols), tuple(self.shared_cols.get(c.index, ())))
            )
        # consensus state: z and duals, all shaped (H-1, n_cols)
        self.z = {b: np.zeros((H - 1, len(cols))) for b, cols in self.shared_cols.items()}
        self.y_own = {b: np.zeros_like(z) for b, z in self.z.items()}
        self.y_copy = {
            i: np.zeros((H - 1, lp.m)) for i, lp in enumerate(self.locals) if lp.m
        }
        self._first_step = True

    @staticmethod
    def _shift(traj: np.ndarray) -> np.ndarray:
        if traj.shape[0] < 2:
            return traj
        out = np.vstack([traj[1:], traj[-1:]])
        return out

    def _warm_shift(self):
        """Advance consensus state one step in time between closed-loop steps."""
        self.z = {b: self._shift(z) for b, z in self.z.items()}
        self.y_own = {b: self._shift(y) for b, y in self.y_own.items()}
        self.y_copy = {i: self._shift(y) for i, y in self.y_copy.items()}

    def _zeta0(self, i: int, x_global: np.ndarray) -> np.ndarray:
        lp = self.locals[i]
        vals = []
        for nb, col in lp.copy_cols:
            vals.append(x_global[self.csus[nb].state_idx[col]])
        return np.asarray(vals, dtype=float)

    def step(self, x_global: np.ndarray, r_window: np.ndarray):
        """Returns (u_per_block, iterations, core_times, residuals)."""
        scen = self.scen
        nb = len(self.csus)
        if not self._first_step:
            self._warm_shift()
        self._first_step = False
        x_loc = [x_global[list(c.state_idx)] for c in self.csus]
        r_loc = [r_window[:, list(c.state_idx)].reshape(-1) for c in self.csus]
        consts = [
            self.locals[i].constant_term(x_loc[i], self._zeta0(i, x_global)) for i in range(nb)
        ]
        core_times = []
        residuals = []
        preds = [None] * nb
        sols = [None] * nb
        iterations = 0
        for it in range(scen.max_iterations):
            iterations = it + 1
            iter_times = []
            for i, lp in enumerate(self.locals):
                own = self.csus[i].index
                if own in self.z:
                    a_own = (self.z[own] - self.y_own[own]).reshape(-1)
                else:
                    a_own = np.zeros(0)
                if lp.m:
                    a_in = (self._gather_z(i) - self.y_copy[i]).reshape(-1)
                else:
                    a_in = np.zeros(0)
                t0 = time.perf_counter()
                w = lp.solve(consts[i], r_loc[i], a_own, a_in)
                iter_times.append(time.perf_counter() - t0)
                sols[i] = w
                preds[i] = lp.predict(w, consts[i])
            core_times.append(iter_times)
            residual = self._update_consensus(preds, sols)
            residuals.append(residual)
            if residual <= scen.eps:
                break
        u_blocks = []
        for i, lp in enumerate(self.locals):
            p_i = self.csus[i].p
            u_blocks.append(np.clip(sols[i][:p_i], scen.u_lo, scen.u_hi))
        return u_blocks, iterations, core_times, residuals

    def _gather_z(self, i: int) -> np.ndarray:
        lp = self.locals[i]
        cols = []
        for nb, col in lp.copy_cols:
            cols.append(self.z[nb][:, self.shared_cols[nb].index(col)])
        return np.stack(cols, axis=1) if cols else np.zeros((self.scen.horizon - 1, 0))

    def _own_traj(self, i: int, preds) -> np.ndarray:
        """Owner's predicted shared entries, shaped (H-1, n_shared)."""
        n = self.csus[i].n
        H = self.scen.horizon
        cols = self.shared_cols[self.csus[i].index]
        x = preds[i].reshape(H, n)
        return x[: H - 1][:, cols]

    def _copy_traj(self, i: int, sols) -> np.ndarray:
        lp = self.locals[i]
        H = self.scen.horizon
        return sols[i][lp.nu :].reshape(H - 1, lp.m)

    def _update_consensus(self, preds, sols) -> float:
        residual = 0.0
        new_z = {}
        for owner, cols in self.shared_cols.items():
            total = self._own_traj(owner, preds) + self.y_own[owner]
            count = np.ones(len(cols))
            for i, lp in enumerate(self.locals):
                if not lp.m:
                    continue
                copy = self._copy_traj(i, sols) + self.y_copy[i]
                for k_col, (nb, col) in enumerate(lp.copy_cols):
                    if nb == owner:
                        j = cols.index(col)
                        total[:, j] += copy[:, k_col]
                        count[j] += 1.0
            new_z[owner] = total / count[None, :]
        for owner in self.shared_cols:
            own = self._own_traj(owner, preds)
            diff = own - new_z[owner]
            if diff.size:
                residual = max(residual, float(np.max(np.abs(diff))))
            self.y_own[owner] += diff
        for i, lp in enumerate(self.locals):
            if not lp.m:
                continue
            copy = self._copy_traj(i, sols)
            zsel = np.stack(
                [new_z[nb][:, self.shared_cols[nb].index(col)] for nb, col in lp.copy_cols],
                axis=1,
            )
            diff = copy - zsel
            if diff.size:
                residual = max(residual, float(np.max(np.abs(diff))))
            self.y_copy[i] += diff
        self.z = new_z if new_z else self.z
        return residual


def admm_dmpc_step(csus, x_global, r_window, scenario: Scenario):
    """One-shot distributed step: returns (inputs per block, iterations,
    per-iteration core times)."""
    coord = AdmmCoordinator(csus, scenario)
    u_blocks, iters, core_times, _ = coord.step(
        np.asarray(x_global, dtype=float), np.asarray(r_window, dtype=float)
    )
    return u_blocks, iters, core_times


# ---------------------------------------------------------------------------
# Closed-loop simulation
# ---------------------------------------------------------------------------


@dataclass
class RunMetrics:
    """Per-run traces with the core-seconds accounting.

    ``max_core_times[k]`` is the slowest single-iteration core solve
    time within step ``k`` (for centralized runs, the step's one solve).
    ``core_seconds_steps[k]`` sums slowest-core time over the step's
    iterations times the core count. ``iteration_core_times`` keeps the
    full per-core trace so the identity can be re-checked offline.
    """

    n_cores: int
    step_costs: list = field(default_factory=list)
    cumulative_cost: float = 0.0
    admm_iterations: list = field(default_factory=list)
    max_core_times: list = field(default_factory=list)
    core_seconds_steps: list = field(default_factory=list)
    core_seconds_total: float = 0.0
    residuals: list = field(default_factory=list)
    iteration_core_times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    inputs: list = field(default_factory=list)

    def record_step(self, cost, iters, core_times, residual_trace, x, u):
        self.step_costs.append(float(cost))
        self.cumulative_cost += float(cost)
        self.admm_iterations.append(int(iters))
        slowest = [max(times) for times in core_times]
        self.max_core_times.append(max(slowest))
        step_cs = sum(slowest) * self.n_cores
        self.core_seconds_steps.append(step_cs)
        self.core_seconds_total += step_cs
        self.residuals.append(list(residual_trace))
        self.iteration_core_times.append([list(t) for t in core_times])
        self.states.append([float(v) for v in x])
        self.inputs.append([float(v) for v in u])


def simulate(model: LinearSystem, p: Partition, scenario: Scenario, coll: FsuCollection = None) -> RunMetrics:
    """Closed-loop run of a partition; dispatches on the block count."""
    if coll is None:
        coll = p.source
    csus = split_system(model, p, coll)
    n, gp = model.n, model.p
    centralized = len(csus) == 1
    metrics = RunMetrics(n_cores=len(csus))
    if centralized:
        controller = CentralizedMpc(model, scenario)
    else:
        controller = AdmmCoordinator(csus, scenario)
    x = scenario.initial_state(n)
    for k in range(scenario.sim_steps):
        r_window = scenario.reference_window(k, n)
        if centralized:
            u, elapsed = controller.step(x, r_window)
            iters, core_times, residual_trace = 1, [[elapsed]], [0.0]
        else:
            u_blocks, iters, core_times, residual_trace = controller.step(x, r_window)
            u = np.zeros(gp)
            for c, ub in zip(csus, u_blocks):
                u[list(c.input_idx)] = ub
        r_now = scenario.reference(k, n)
        cost = scenario.q_weight * float(np.sum((x - r_now) ** 2)) + scenario.r_weight * float(
            np.sum(u**2)
        )
        metrics.record_step(cost, iters, core_times, residual_trace, x, u)
        x = model.A @ x + model.B @ u
    return metrics
