"""Initial corpora: random inputs, their traces, and diverse landmark paths."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .diversity import select_landmarks
from .errors import ParameterError
from .markov_geometry import estimate_chain, hitting_prob_metric
from .path_space import PathDissimilarityConfig, PathMetric
from .toylang import Cfg, Program, Trace, execute, random_input


@dataclass
class Corpus:
    inputs: list[tuple[int, ...]]
    traces: list[Trace]
    landmark_indices: list[int]

    def __post_init__(self):
        if len(self.inputs) != len(self.traces):
            raise ParameterError("corpus inputs and traces differ in number")
        for i in self.landmark_indices:
            if not 0 <= i < len(self.inputs):
                raise ParameterError(f"landmark index {i} out of range")

    def to_json(self) -> dict:
        return {
            "inputs": [list(x) for x in self.inputs],
            "traces": [list(t.vertices) for t in self.traces],
            "landmark_indices": list(self.landmark_indices),
        }

    @classmethod
    def from_json(cls, d: dict) -> "Corpus":
        return cls(
            inputs=[tuple(int(v) for v in x) for x in d["inputs"]],
            traces=[Trace(tuple(int(v) for v in t)) for t in d["traces"]],
            landmark_indices=[int(i) for i in d["landmark_indices"]],
        )

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path) -> "Corpus":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def edge_counts(cfg: Cfg, traces) -> np.ndarray:
    counts = np.zeros((cfg.n, cfg.n), dtype=np.int64)
    for t in traces:
        a = t.array
        np.add.at(counts, (a[:-1], a[1:]), 1)
    return counts


def bootstrap_corpus(program: Program, cfg: Cfg, candidates: int = 41, landmarks: int = 15,
                     seed: int = 0, *, beta: float = 0.5, smoothing: float = 0.5,
                     lift: PathDissimilarityConfig | None = None,
                     method: str = "magnitude") -> Corpus:
    """Execute ``candidates`` random inputs and pick ``landmarks`` of their
    paths as diverse references under the hitting-probability geometry of
    the corpus' own edge counts."""
    if candidates < 1:
        raise ParameterError("need at least one candidate")
    rng = np.random.default_rng(seed)
    inputs = [random_input(program, rng) for _ in range(candidates)]
    traces = [execute(program, x) for x in inputs]
    chain = estimate_chain(edge_counts(cfg, traces), cfg.adjacency, smoothing)
    metric = hitting_prob_metric(chain, beta)
    Dy = PathMetric(metric, lift).pairwise(traces)
    if candidates < 2:
        idx = [0]
    else:
        idx = list(select_landmarks(Dy, max(2, landmarks), method=method).indices)
    return Corpus(inputs=inputs, traces=traces, landmark_indices=idx)
