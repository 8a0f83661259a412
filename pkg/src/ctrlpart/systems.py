"""Discrete-time system models and their JSON wire format.

Three model kinds are supported: linear ``x+ = A x + B u``, piecewise
affine with polyhedral guards, and black-box differentiable dynamics
given by a Jacobian evaluator. All models expose ``n`` (state count)
and ``p`` (input count).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .errors import DimensionMismatchError, GuardOverlapError


def _as_array(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 1:
        return arr
    if arr.ndim != 2:
        raise DimensionMismatchError(name, ("r", "c"), arr.shape)
    return arr


def _require_shape(arr: np.ndarray, shape, name: str) -> np.ndarray:
    if arr.shape != tuple(shape):
        raise DimensionMismatchError(name, shape, arr.shape)
    return arr


def matrix_from_json(obj, name: str = "matrix") -> np.ndarray:
    """Decode a dense nested list or a ``{"triplets": ..}`` sparse matrix."""
    if isinstance(obj, dict):
        rows, cols = int(obj["rows"]), int(obj["cols"])
        out = np.zeros((rows, cols))
        for r, c, v in obj.get("triplets", []):
            out[int(r), int(c)] = float(v)
        return out
    return _as_array(obj, name)


def matrix_to_json(arr: np.ndarray) -> list:
    return [[float(v) for v in row] for row in np.atleast_2d(arr)]


@dataclass(frozen=True)
class LinearSystem:
    """Time-invariant linear dynamics ``x(k+1) = A x(k) + B u(k)``."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = _as_array(self.A, "A")
        B = _as_array(self.B, "B")
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionMismatchError("A", (A.shape[0], A.shape[0]), A.shape)
        if B.ndim != 2 or B.shape[0] != A.shape[0]:
            raise DimensionMismatchError("B", (A.shape[0], B.shape[1] if B.ndim == 2 else -1), B.shape)
        A.setflags(write=False)
        B.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True)
class Guard:
    """Polyhedron ``Hx x + Hu u <= h`` in the input-state space."""

    Hx: np.ndarray
    Hu: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        Hx = np.atleast_2d(_as_array(self.Hx, "Hx"))
        Hu = np.atleast_2d(_as_array(self.Hu, "Hu"))
        h = np.atleast_1d(np.asarray(self.h, dtype=float))
        if Hx.shape[0] != h.shape[0]:
            raise DimensionMismatchError("Hx", (h.shape[0], Hx.shape[1]), Hx.shape)
        if Hu.shape[0] != h.shape[0]:
            raise DimensionMismatchError("Hu", (h.shape[0], Hu.shape[1]), Hu.shape)
        for name, arr in (("Hx", Hx), ("Hu", Hu), ("h", h)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def contains(self, x, u, strict: bool = False) -> bool:
        lhs = self.Hx @ np.asarray(x, dtype=float) + self.Hu @ np.asarray(u, dtype=float)
        if strict:
            return bool(np.all(lhs < self.h))
        return bool(np.all(lhs <= self.h + 1e-12))


@dataclass(frozen=True)
class PwaMode:
    A: np.ndarray
    B: np.ndarray
    g: np.ndarray
    guard: Guard

    def __post_init__(self):
        A = _as_array(self.A, "A")
        B = _as_array(self.B, "B")
        g = np.atleast_1d(np.asarray(self.g, dtype=float))
        if A.shape[0] != A.shape[1]:
            raise DimensionMismatchError("A", (A.shape[0], A.shape[0]), A.shape)
        if B.shape[0] != A.shape[0]:
            raise DimensionMismatchError("B", (A.shape[0], -1), B.shape)
        _require_shape(g, (A.shape[0],), "g")
        for name, arr in (("A", A), ("B", B), ("g", g)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class PwaSystem:
    """Piecewise affine dynamics over a list of guarded modes.

    Guard interiors are assumed pairwise disjoint; this is only checked
    at sample points via :meth:`check_guards_at`, never symbolically.
    """

    modes: tuple[PwaMode, ...]

    def __post_init__(self):
        modes = tuple(self.modes)
        if not modes:
            raise ValueError("a PWA system needs at least one mode")
        n, p = modes[0].A.shape[0], modes[0].B.shape[1]
        for k, m in enumerate(modes):
            _require_shape(m.A, (n, n), f"modes[{k}].A")
            _require_shape(m.B, (n, p), f"modes[{k}].B")
        object.__setattr__(self, "modes", modes)

    @property
    def n(self) -> int:
        return self.modes[0].A.shape[0]

    @property
    def p(self) -> int:
        return self.modes[0].B.shape[1]

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    def mode_at(self, x, u) -> int:
        """Index of the first mode whose guard contains ``(x, u)``."""
        for q, m in enumerate(self.modes):
            if m.guard.contains(x, u):
                return q
        raise ValueError("no mode guard contains the given point")

    def check_guards_at(self, points: Sequence[tuple]) -> None:
        """Raise if two guard interiors share any of the sample points."""
        for x, u in points:
            hits = [q for q, m in enumerate(self.modes) if m.guard.contains(x, u, strict=True)]
            if len(hits) > 1:
                raise GuardOverlapError(
                    f"guards of modes {hits} overlap strictly at x={list(x)}, u={list(u)}"
                )


@dataclass(frozen=True)
class DifferentiableSystem:
    """Dynamics known through a Jacobian evaluator.

    ``jacobian(x, u)`` must return the pair ``(dfdx, dfdu)`` with shapes
    ``(n, n)`` and ``(n, p)`` evaluated at the given point. ``offset``
    is the constant term of the dynamics (used as vertex labels).
    """

    n: int
    p: int
    jacobian: Callable[[np.ndarray, np.ndarray], tuple]
    offset: np.ndarray = None

    def __post_init__(self):
        g = np.zeros(self.n) if self.offset is None else np.atleast_1d(np.asarray(self.offset, dtype=float))
        _require_shape(g, (self.n,), "offset")
        g.setflags(write=False)
        object.__setattr__(self, "offset", g)


SystemModel = Union[LinearSystem, PwaSystem, DifferentiableSystem]


def system_to_json(model: SystemModel) -> dict:
    if isinstance(model, LinearSystem):
        return {"kind": "linear", "A": matrix_to_json(model.A), "B": matrix_to_json(model.B)}
    if isinstance(model, PwaSystem):
        return {
            "kind": "pwa",
            "modes": [
                {
                    "A": matrix_to_json(m.A),
                    "B": matrix_to_json(m.B),
                    "g": [float(v) for v in m.g],
                    "guard": {
                        "Hx": matrix_to_json(m.guard.Hx),
                        "Hu": matrix_to_json(m.guard.Hu),
                        "h": [float(v) for v in m.guard.h],
                    },
                }
                for m in model.modes
            ],
        }
    raise TypeError("only linear and PWA systems have a JSON form")


def system_from_json(obj) -> SystemModel:
    if isinstance(obj, str):
        obj = json.loads(obj)
    kind = obj.get("kind")
    if kind == "linear":
        return LinearSystem(matrix_from_json(obj["A"], "A"), matrix_from_json(obj["B"], "B"))
    if kind == "pwa":
        modes = []
        for k, m in enumerate(obj["modes"]):
            guard = m.get("guard") or {"Hx": [[0.0]], "Hu": [[0.0]], "h": [0.0]}
            A = matrix_from_json(m["A"], f"modes[{k}].A")
            g = m.get("g")
            if g is None:
                g = [0.0] * A.shape[0]
            modes.append(
                PwaMode(
                    A,
                    matrix_from_json(m["B"], f"modes[{k}].B"),
                    g,
                    Guard(
                        matrix_from_json(guard["Hx"], "Hx"),
                        matrix_from_json(guard["Hu"], "Hu"),
                        guard["h"],
                    ),
                )
            )
        return PwaSystem(tuple(modes))
    raise ValueError(f"unknown system kind: {kind!r}")
