"""Dissimilarities between CFG paths lifted from a vertex metric."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class PathDissimilarityConfig:
    kind: str = "hausdorff"
    indel_cost: float | None = None  # None: half the largest vertex distance

    def __post_init__(self):
        if self.kind not in ("hausdorff", "edit"):
            raise ParameterError(f"unknown lift {self.kind!r}")
        if self.indel_cost is not None and self.indel_cost < 0:
            raise ParameterError("indel cost must be nonnegative")

    def resolve_indel(self, D: np.ndarray) -> float:
        if self.indel_cost is not None:
            return float(self.indel_cost)
        return 0.5 * float(np.max(D)) if D.size else 0.0


def _vertices(trace) -> np.ndarray:
    v = getattr(trace, "vertices", trace)
    return np.asarray(v, dtype=np.int64)


def _matrix(vertex_metric) -> np.ndarray:
    return np.asarray(getattr(vertex_metric, "D", vertex_metric), dtype=float)


def hausdorff_lift(vertex_metric, a, b) -> float:
    """Hausdorff distance between the vertex sets of two traces."""
    D = _matrix(vertex_metric)
    A = np.unique(_vertices(a))
    B = np.unique(_vertices(b))
    if A.size == 0 or B.size == 0:
        raise ParameterError("traces must be nonempty")
    sub = D[np.ix_(A, B)]
    return float(max(sub.min(axis=1).max(), sub.min(axis=0).max()))


def edit_lift(vertex_metric, a, b, indel_cost: float) -> float:
    """Alignment cost of two vertex sequences: substitutions cost the vertex
    distance, insertions and deletions cost ``indel_cost``."""
    D = _matrix(vertex_metric)
    x = _vertices(a)
    y = _vertices(b)
    c = float(indel_cost)
    m = y.size
    prev = np.arange(m + 1, dtype=float) * c
    for i in range(1, x.size + 1):
        sub = prev[:-1] + D[x[i - 1], y]
        dele = prev[1:] + c
        row = np.empty(m + 1)
        row[0] = i * c
        best = np.minimum(sub, dele)
        # insertions chain left to right within the row
        for j in range(1, m + 1):
            ins = row[j - 1] + c
            row[j] = best[j - 1] if best[j - 1] <= ins else ins
        prev = row
    return float(prev[m])


def compress_repeats(seq: Sequence[int], max_repeats: int = 3, max_period: int | None = None) -> tuple[int, ...]:
    """Truncate every run of a repeated block (e.g. loop iterations) to
    ``max_repeats`` copies, scanning left to right."""
    s = list(seq)
    n = len(s)
    max_period = max_period or n // (max_repeats + 1)
    out: list[int] = []
    i = 0
    while i < n:
        skipped = False
        for p in range(1, max_period + 1):
            if i + p * (max_repeats + 1) > n:
                break
            block = s[i:i + p]
            k = 1
            while s[i + k * p:i + (k + 1) * p] == block:
                k += 1
            if k > max_repeats:
                out.extend(block * max_repeats)
                i += k * p
                skipped = True
                break
        if not skipped:
            out.append(s[i])
            i += 1
    return tuple(out)


class HausdorffIndex:
    """Reference vertex sets with precomputed nearest-vertex distances, for
    fast Hausdorff distances from many query sets to all references."""

    def __init__(self, D: np.ndarray, masks: np.ndarray):
        self.D = np.asarray(D, dtype=float)
        self.masks = np.asarray(masks, dtype=bool).reshape(-1, self.D.shape[0])
        # near[j, x] = min over y in reference j of D[x, y]
        self.near = np.where(self.masks[:, None, :], self.D[None, :, :], np.inf).min(axis=2)

    def __len__(self) -> int:
        return self.masks.shape[0]

    def query(self, mask: np.ndarray) -> np.ndarray:
        """Distances from one vertex set to every reference."""
        to_ref = np.where(mask[None, :], self.near, -np.inf).max(axis=1)
        near_q = self.D[:, mask].min(axis=1)
        from_ref = np.where(self.masks, near_q[None, :], -np.inf).max(axis=1)
        return np.maximum(to_ref, from_ref)

    def pairwise(self) -> np.ndarray:
        """Hausdorff distances among the references themselves."""
        directed = np.where(self.masks[:, None, :], self.near[None, :, :], -np.inf).max(axis=2)
        H = np.maximum(directed, directed.T)
        np.fill_diagonal(H, 0.0)
        return H


class PathMetric:
    """``d_Y`` bound to one vertex metric snapshot."""

    def __init__(self, vertex_metric, config: PathDissimilarityConfig | None = None):
        self.D = _matrix(vertex_metric)
        self.config = config or PathDissimilarityConfig()
        self.indel = self.config.resolve_indel(self.D)
        self._seq_cache: dict = {}

    @property
    def n(self) -> int:
        return self.D.shape[0]

    def _seq(self, trace) -> tuple[int, ...]:
        key = trace.vertices if hasattr(trace, "vertices") else tuple(trace)
        s = self._seq_cache.get(key)
        if s is None:
            s = compress_repeats(key)
            self._seq_cache[key] = s
        return s

    def mask(self, trace) -> np.ndarray:
        if hasattr(trace, "mask"):
            return trace.mask(self.n)
        m = np.zeros(self.n, dtype=bool)
        m[np.asarray(trace, dtype=np.int64)] = True
        return m

    def index(self, traces) -> "PathIndex":
        return PathIndex(self, list(traces))

    def distance(self, a, b) -> float:
        if self.config.kind == "hausdorff":
            return hausdorff_lift(self.D, a, b)
        return edit_lift(self.D, self._seq(a), self._seq(b), self.indel)

    def pairwise(self, traces) -> np.ndarray:
        return self.index(traces).pairwise()


class PathIndex:
    """A fixed family of reference traces under a ``PathMetric``."""

    def __init__(self, metric: PathMetric, traces: list):
        self.metric = metric
        self.traces = traces
        self._haus = None
        if metric.config.kind == "hausdorff" and traces:
            masks = np.stack([metric.mask(t) for t in traces])
            self._haus = HausdorffIndex(metric.D, masks)

    def query(self, trace) -> np.ndarray:
        if self._haus is not None:
            return self._haus.query(self.metric.mask(trace))
        return np.array([self.metric.distance(trace, t) for t in self.traces])

    def pairwise(self) -> np.ndarray:
        if self._haus is not None:
            return self._haus.pairwise()
        k = len(self.traces)
        H = np.zeros((k, k))
        for i in range(k):
            for j in range(i + 1, k):
                H[i, j] = H[j, i] = self.metric.distance(self.traces[i], self.traces[j])
        return H
