"""Magnitude and similarity-sensitive diversity of finite dissimilarity
spaces, plus landmark selection and cell keys built on them."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import NumericalError, ParameterError

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class Weighting:
    w: np.ndarray
    fallback: str = ""  # "", "ridge" or "uniform"

    @property
    def magnitude(self) -> float:
        return float(self.w.sum())


def default_scale(D) -> float:
    """``1 / median`` of the positive finite dissimilarities (1.0 if none)."""
    D = np.asarray(D, dtype=float)
    pos = D[np.isfinite(D) & (D > 0)]
    if pos.size == 0:
        return 1.0
    return 1.0 / float(np.median(pos))


def similarity_matrix(D, t: float) -> np.ndarray:
    if t <= 0:
        raise ParameterError(f"scale must be positive, got {t}")
    Z = np.exp(-t * np.asarray(D, dtype=float))
    np.fill_diagonal(Z, 1.0)
    return Z


def _solve_ones(Z: np.ndarray) -> np.ndarray | None:
    n = Z.shape[0]
    ones = np.ones(n)
    try:
        w = sla.solve(Z, ones, assume_a="sym", check_finite=True)
    except (ValueError, sla.LinAlgError):
        return None
    # LinAlgWarning is not an error; the residual decides
    if not np.all(np.isfinite(w)):
        return None
    if np.max(np.abs(Z @ w - ones)) >= RESIDUAL_TOL:
        return None
    return w


def weighting_of(Z, *, strict: bool = False) -> Weighting:
    """Solve ``Z w = 1``; retry once with a small ridge, then fall back to
    uniform weights (or raise when ``strict``)."""
    Z = np.asarray(Z, dtype=float)
    n = Z.shape[0]
    if n == 0:
        return Weighting(np.zeros(0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        w = _solve_ones(Z)
        if w is not None:
            return Weighting(w)
        lam = 1e-10 * np.trace(Z) / n
        w = _solve_ones(Z + lam * np.eye(n))
    if w is not None:
        return Weighting(w, fallback="ridge")
    if strict:
        raise NumericalError("similarity matrix is singular beyond ridge repair", n=n)
    log.warning("magnitude weighting failed for n=%d; using uniform weights", n)
    return Weighting(np.full(n, 1.0 / n), fallback="uniform")


def magnitude_weighting(D, t: float | None = None, *, strict: bool = False) -> Weighting:
    """Weighting of the similarity matrix ``exp(-t D)``; magnitude is its sum."""
    if t is None:
        t = default_scale(D)
    return weighting_of(similarity_matrix(D, t), strict=strict)


def log_diversity_order_1(Z, p) -> float:
    """``-sum p_i log (Z p)_i``; with ``Z=None`` the discrete similarity is
    used and this is the Shannon entropy of ``p``."""
    p = np.asarray(p, dtype=float)
    zp = p if Z is None else np.asarray(Z, dtype=float) @ p
    s = p > 0
    if np.any(zp[s] <= 0):
        raise ParameterError("(Zp)_i vanishes on the support of p")
    return float(-np.sum(p[s] * np.log(zp[s])))


def diversity_order_q(Z, p, q: float) -> float:
    """Similarity-sensitive Hill number of order ``q``."""
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
        raise ParameterError("p must be a probability vector")
    if q < 0:
        raise ParameterError("q must be nonnegative")
    if q == 1:
        return float(np.exp(log_diversity_order_1(Z, p)))
    zp = np.asarray(Z, dtype=float) @ p
    s = p > 0
    if np.any(zp[s] <= 0):
        raise ParameterError("(Zp)_i vanishes on the support of p")
    return float(np.sum(p[s] * zp[s] ** (q - 1)) ** (1.0 / (1.0 - q)))


@dataclass(frozen=True)
class LandmarkSet:
    indices: tuple[int, ...]
    D: np.ndarray


def _distinct(D: np.ndarray) -> list[int]:
    keep: list[int] = []
    for i in range(D.shape[0]):
        if all(D[i, j] > 0 for j in keep):
            keep.append(i)
    return keep


def select_landmarks(D, k: int, t: float | None = None, *, method: str = "magnitude") -> LandmarkSet:
    """Greedily pick up to ``k`` diverse candidates.

    Starts from the farthest pair and then repeatedly adds the candidate
    that maximises the magnitude of the selected set (``method="magnitude"``)
    or its minimum distance to the selection (``method="maxmin"``).  Ties go
    to the smallest index.
    """
    D = np.asarray(D, dtype=float)
    if k < 2:
        raise ParameterError("k must be >= 2")
    if method not in ("magnitude", "maxmin"):
        raise ParameterError(f"unknown landmark method {method!r}")
    pool = _distinct(D)
    if len(pool) < 2:
        log.warning("all landmark candidates coincide; returning a singleton")
        return LandmarkSet(indices=tuple(pool[:1]), D=D)
    if t is None:
        t = default_scale(D)

    sub = D[np.ix_(pool, pool)]
    iu = np.triu_indices(len(pool), 1)
    best = int(np.argmax(sub[iu]))  # first maximum in row-major order
    chosen = [pool[iu[0][best]], pool[iu[1][best]]]
    target = min(k, len(pool))
    while len(chosen) < target:
        best_val, best_i = -np.inf, -1
        for i in pool:
            if i in chosen:
                continue
            if method == "maxmin":
                val = float(D[i, chosen].min())
            else:
                idx = chosen + [i]
                val = magnitude_weighting(D[np.ix_(idx, idx)], t).magnitude
            if val > best_val:
                best_val, best_i = val, i
        chosen.append(best_i)
    return LandmarkSet(indices=tuple(chosen), D=D)


def cell_key(d_to_landmarks, m: int = 2) -> tuple[int, ...]:
    """Indices of the ``m`` nearest landmarks, nearest first."""
    d = np.asarray(d_to_landmarks, dtype=float)
    if d.size == 0:
        raise ParameterError("no landmarks")
    if not 1 <= m <= d.size:
        raise ParameterError(f"cell arity {m} not in [1, {d.size}]")
    order = np.argsort(d, kind="stable")
    return tuple(int(i) for i in order[:m])
