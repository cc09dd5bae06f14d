"""Empirical random walks on a CFG and symmetric vertex dissimilarities.

All routines are dense: CFGs have at most a few hundred vertices and the
cost is negligible next to executing the target.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import NumericalError, ParameterError, StructuralError

log = logging.getLogger(__name__)

HITTING_FLOOR = 1e-300


@dataclass(frozen=True)
class MarkovChain:
    P: np.ndarray
    smoothing: float

    @property
    def n(self) -> int:
        return self.P.shape[0]


@dataclass(frozen=True)
class MetricMatrix:
    D: np.ndarray
    kind: str
    params: dict = field(default_factory=dict)
    underflow: bool = False

    @property
    def n(self) -> int:
        return self.D.shape[0]


def estimate_chain(counts, adjacency, smoothing: float = 0.5) -> MarkovChain:
    """Row-normalise edge counts after adding ``smoothing`` on every
    structural edge, so the chain keeps the CFG's support."""
    if smoothing <= 0:
        raise ParameterError("smoothing must be positive")
    C = np.asarray(counts, dtype=float)
    A = np.asarray(adjacency, dtype=float)
    if C.shape != A.shape or A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ParameterError(f"shape mismatch: counts {C.shape}, adjacency {A.shape}")
    if np.any(C[A == 0] > 0):
        raise StructuralError("edge counts on non-edges of the CFG")
    dead = np.flatnonzero(A.sum(axis=1) == 0)
    if dead.size:
        raise StructuralError(f"vertices with zero out-degree: {dead.tolist()}")
    W = C + smoothing * A
    P = W / W.sum(axis=1, keepdims=True)
    return MarkovChain(P=P, smoothing=smoothing)


def _check_beta(beta: float) -> None:
    if not 0.0 < beta < 1.0:
        raise ParameterError(f"beta must lie in (0, 1), got {beta}")


def hitting_probabilities(chain: MarkovChain, beta: float = 0.5) -> np.ndarray:
    """Probability that a walk killed with probability ``1 - beta`` per
    step reaches ``y`` from ``x``; entry ``[x, y]``.

    Uses the Green's function ``G = (I - beta P)^-1``: the expected number
    of visits to ``y`` factors as ``G[x, y] = h[x, y] G[y, y]``.
    """
    _check_beta(beta)
    P = chain.P
    n = P.shape[0]
    M = np.eye(n) - beta * P
    try:
        lu = sla.lu_factor(M, check_finite=True)
    except (ValueError, sla.LinAlgError) as exc:
        raise NumericalError("killed-walk Green's function solve failed",
                             beta=beta, n=n) from exc
    G = sla.lu_solve(lu, np.eye(n))
    diag = np.diag(G)
    if np.any(diag <= 0) or not np.all(np.isfinite(G)):
        raise NumericalError("singular killed-walk system", beta=beta,
                             min_diag=float(diag.min()))
    h = G / diag[None, :]
    np.fill_diagonal(h, 1.0)
    return np.clip(h, 0.0, 1.0)


def hitting_prob_metric(chain: MarkovChain, beta: float = 0.5) -> MetricMatrix:
    """``d(x, y) = -log(h(x, y) h(y, x))``."""
    h = hitting_probabilities(chain, beta)
    underflow = bool(np.any(h < HITTING_FLOOR))
    if underflow:
        h = np.maximum(h, HITTING_FLOOR)
        log.warning("hitting probabilities underflowed; clamped at %g", HITTING_FLOOR)
    D = -(np.log(h) + np.log(h).T)
    np.fill_diagonal(D, 0.0)
    D = np.maximum(D, 0.0)
    return MetricMatrix(D=D, kind="hitprob", params={"beta": beta},
                        underflow=underflow)


def stationary_distribution(P: np.ndarray) -> np.ndarray:
    n = P.shape[0]
    # pi (I - P) = 0 with one equation replaced by normalisation
    A = (np.eye(n) - P).T
    A[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    try:
        pi = sla.solve(A, rhs)
    except (ValueError, sla.LinAlgError) as exc:
        raise NumericalError("stationary distribution solve failed") from exc
    return pi


def expected_hitting_times(chain: MarkovChain) -> np.ndarray:
    """``E_x[T_y]`` via the fundamental matrix ``(I - P + 1 pi^T)^-1``."""
    P = chain.P
    n = P.shape[0]
    pi = stationary_distribution(P)
    try:
        Zf = sla.inv(np.eye(n) - P + np.outer(np.ones(n), pi))
    except (ValueError, sla.LinAlgError) as exc:
        raise NumericalError("fundamental matrix inversion failed") from exc
    return (np.diag(Zf)[None, :] - Zf) / pi[None, :]


def commute_time_metric(chain: MarkovChain) -> MetricMatrix:
    T = expected_hitting_times(chain)
    C = T + T.T
    np.fill_diagonal(C, 0.0)
    return MetricMatrix(D=np.maximum(C, 0.0), kind="commute")


def _orthonormal_complement_of_ones(n: int) -> np.ndarray:
    """Rows form an orthonormal basis of the complement of ``1``."""
    q, _ = np.linalg.qr(np.column_stack([np.ones(n), np.eye(n)[:, : n - 1]]))
    return q[:, 1:].T


def resistance_metric(weights) -> MetricMatrix:
    """Effective resistance generalised to digraphs through a Lyapunov
    equation on the complement of the all-ones vector.

    ``weights[u, v]`` is the weight of edge ``u -> v``.  For symmetric
    weights the result is the classical effective resistance.
    """
    W = np.asarray(weights, dtype=float)
    n = W.shape[0]
    if n < 2:
        return MetricMatrix(D=np.zeros((n, n)), kind="resistance")
    Lap = np.diag(W.sum(axis=1)) - W
    Q = _orthonormal_complement_of_ones(n)
    Lr = Q @ Lap @ Q.T
    try:
        S = sla.solve_continuous_lyapunov(Lr, np.eye(n - 1))
    except (ValueError, sla.LinAlgError) as exc:
        raise NumericalError("Lyapunov solve failed; is the graph connected?") from exc
    if not np.all(np.isfinite(S)):
        raise NumericalError("Lyapunov solution is not finite")
    Sigma = Q.T @ S @ Q
    d = np.diag(Sigma)
    R = 2.0 * (d[:, None] + d[None, :] - 2.0 * Sigma)
    R = 0.5 * (R + R.T)
    np.fill_diagonal(R, 0.0)
    return MetricMatrix(D=np.maximum(R, 0.0), kind="resistance")


def entry_hop_distances(cfg) -> np.ndarray:
    """Breadth-first hop counts from the CFG entry."""
    n = cfg.n
    dist = np.full(n, -1, dtype=np.int64)
    dist[cfg.entry] = 0
    queue = deque([cfg.entry])
    succ = cfg.successors
    while queue:
        u = queue.popleft()
        for v in succ[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(v)
    if np.any(dist < 0):
        raise StructuralError(f"vertices unreachable from entry: {np.flatnonzero(dist < 0).tolist()}")
    return dist
