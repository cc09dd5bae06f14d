"""Objectives on CFG paths: a per-vertex potential maximised over the path."""
from __future__ import annotations

import enum

import numpy as np

from .errors import ParameterError, StateError


class ObjectiveKind(enum.Enum):
    HIT_PROB_FROM_ENTRY = "hitprob"
    EXP_HIT_PROB_FROM_ENTRY = "exp-hitprob"
    HOP_FROM_ENTRY = "hop"
    EXP_HOP_FROM_ENTRY = "exp-hop"
    DRAWING_DEPTH = "depth"
    EXP_DRAWING_DEPTH = "exp-depth"
    CONSTANT = "constant"

    @classmethod
    def parse(cls, name) -> "ObjectiveKind":
        if isinstance(name, cls):
            return name
        try:
            return cls(name)
        except ValueError:
            raise ParameterError(f"unknown objective {name!r}; choose from "
                                 f"{[k.value for k in cls]}") from None

    @property
    def letter(self) -> str:
        """Legend letter a-g, in enumeration order."""
        return "abcdefg"[list(ObjectiveKind).index(self)]

    @property
    def base(self) -> "ObjectiveKind":
        return _BASE.get(self, self)

    @property
    def is_exp(self) -> bool:
        return self in _BASE

    @property
    def needs_metric(self) -> bool:
        return self.base is ObjectiveKind.HIT_PROB_FROM_ENTRY


_BASE = {
    ObjectiveKind.EXP_HIT_PROB_FROM_ENTRY: ObjectiveKind.HIT_PROB_FROM_ENTRY,
    ObjectiveKind.EXP_HOP_FROM_ENTRY: ObjectiveKind.HOP_FROM_ENTRY,
    ObjectiveKind.EXP_DRAWING_DEPTH: ObjectiveKind.DRAWING_DEPTH,
}


def drawing_depths(cfg) -> np.ndarray:
    """Longest-path layer of each vertex once DFS back edges and the
    exit -> entry edge are removed."""
    n = cfg.n
    succ = cfg.successors
    state = [0] * n  # 0 new, 1 on stack, 2 done
    dag: list[list[int]] = [[] for _ in range(n)]
    topo: list[int] = []
    stack = [(cfg.entry, iter(succ[cfg.entry]))]
    state[cfg.entry] = 1
    while stack:
        u, it = stack[-1]
        for v in it:
            if (u, v) == cfg.back_edge or state[v] == 1:
                continue
            dag[u].append(v)
            if state[v] == 0:
                state[v] = 1
                stack.append((v, iter(succ[v])))
                break
        else:
            stack.pop()
            state[u] = 2
            topo.append(u)
    depth = np.zeros(n, dtype=np.int64)
    for u in reversed(topo):
        for v in dag[u]:
            depth[v] = max(depth[v], depth[u] + 1)
    return depth


def vertex_potential(kind, *, metric=None, hops=None, depths=None, entry: int = 0,
                     n: int | None = None) -> np.ndarray:
    """Per-vertex potential for an objective kind.

    ``metric`` is the vertex dissimilarity matrix (hitting-probability
    kinds), ``hops`` the BFS distances and ``depths`` the drawing layers.
    """
    kind = ObjectiveKind.parse(kind)
    base = kind.base
    if base is ObjectiveKind.CONSTANT:
        if n is None:
            for g in (metric, hops, depths):
                if g is not None:
                    n = len(np.asarray(getattr(g, "D", g)))
                    break
        if n is None:
            raise StateError("constant potential needs a vertex count")
        return np.zeros(n)
    if base is ObjectiveKind.HIT_PROB_FROM_ENTRY:
        if metric is None:
            raise StateError("hitting-probability objective needs the vertex metric")
        psi = np.asarray(getattr(metric, "D", metric), dtype=float)[entry].copy()
    elif base is ObjectiveKind.HOP_FROM_ENTRY:
        if hops is None:
            raise StateError("hop objective needs entry hop distances")
        psi = np.asarray(hops, dtype=float).copy()
    else:
        if depths is None:
            raise StateError("depth objective needs drawing depths")
        psi = np.asarray(depths, dtype=float).copy()
    if kind.is_exp:
        psi = np.expm1(psi)
    return psi


def path_objective(trace, potentials) -> float:
    v = np.asarray(getattr(trace, "vertices", trace), dtype=np.int64)
    return float(np.max(np.asarray(potentials)[v]))
