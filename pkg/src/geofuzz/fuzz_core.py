"""Go-explore fuzzing loop over an archive of per-cell elites.

One campaign repeats: pick an elite from the go distribution, decide how
many mutants to spawn (power schedule), mutate with the elite's current
bandwidth, optionally keep only Pareto-diverse mutants, execute, file the
offspring into cells, adapt the bandwidth from the escape rate, and every
``refresh`` evaluations rebuild the CFG geometry from the edge counts seen
so far.
"""
from __future__ import annotations

import enum
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .corpus import Corpus, edge_counts
from .diversity import cell_key, default_scale, log_diversity_order_1, similarity_matrix, weighting_of
from .errors import InputError, NumericalError, ParameterError, StateError
from .markov_geometry import (MarkovChain, MetricMatrix, entry_hop_distances, estimate_chain,
                              hitting_prob_metric)
from .objectives import ObjectiveKind, drawing_depths, path_objective, vertex_potential
from .path_space import PathDissimilarityConfig, PathIndex, PathMetric
from .toylang import Cfg, Program, Trace, atomic_mutate, execute

log = logging.getLogger(__name__)


class Schedule(enum.Enum):
    DEFAULT = "default"
    ENTROPIC = "entropic"
    SIMTROPIC = "simtropic"

    @classmethod
    def parse(cls, name) -> "Schedule":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            raise ParameterError(f"unknown power schedule {name!r}") from None


@dataclass
class CampaignConfig:
    budget: int = 1000
    power_bound: int = 16
    schedule: Schedule = Schedule.ENTROPIC
    objective: ObjectiveKind = ObjectiveKind.HIT_PROB_FROM_ENTRY
    alpha: float = 0.5
    bandwidth_adapt: bool = True
    pareto_filter: bool = False
    refresh: int = 50
    cell_arity: int = 2
    beta: float = 0.5
    smoothing: float = 0.5
    scale: float | None = None  # similarity scale t; None: 1 / median distance
    lift: str = "hausdorff"
    indel_cost: float | None = None
    max_bandwidth: int | None = None  # None: input length
    escape_low: float = 0.1
    escape_high: float = 0.9
    discrete_species: bool = False  # SIMTROPIC with Z = I
    seed: int = 0

    def __post_init__(self):
        self.schedule = Schedule.parse(self.schedule)
        self.objective = ObjectiveKind.parse(self.objective)
        if self.budget < 0:
            raise ParameterError("budget must be >= 0")
        if self.power_bound < 1:
            raise ParameterError("power bound must be >= 1")
        if self.refresh < 1:
            raise ParameterError("refresh cadence must be >= 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise ParameterError("alpha must lie in [0, 1]")
        if self.cell_arity < 1:
            raise ParameterError("cell arity must be >= 1")
        self.path_config()  # validates lift settings

    def path_config(self) -> PathDissimilarityConfig:
        return PathDissimilarityConfig(kind=self.lift, indel_cost=self.indel_cost)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schedule"] = self.schedule.value
        d["objective"] = self.objective.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CampaignConfig":
        known = cls.__dataclass_fields__
        unknown = set(d) - set(known)
        if unknown:
            raise ParameterError(f"unknown campaign options: {sorted(unknown)}")
        return cls(**d)


_uid = iter(range(1 << 62))


@dataclass(eq=False)
class Elite:
    input: tuple[int, ...]
    trace: Trace
    objective: float
    cell: tuple[int, ...]
    bandwidth: int = 1
    species: dict = field(default_factory=dict)
    last_batch: tuple[int, int] = (0, 0)
    uid: int = field(default_factory=lambda: next(_uid))


@dataclass
class Archive:
    cells: dict = field(default_factory=dict)
    covered: set = field(default_factory=set)
    total_edges: int = 0

    def __len__(self) -> int:
        return len(self.cells)

    def elites(self) -> list[Elite]:
        return list(self.cells.values())


@dataclass
class Geometry:
    version: int
    chain: MarkovChain
    metric: MetricMatrix
    potentials: np.ndarray
    paths: PathMetric
    landmarks: PathIndex

    def cell_of(self, trace, m: int) -> tuple[int, ...]:
        return cell_key(self.landmarks.query(trace), m)


@dataclass
class CampaignState:
    config: CampaignConfig
    program: Program
    cfg: Cfg
    archive: Archive
    counts: np.ndarray
    landmark_traces: list
    hops: np.ndarray
    depths: np.ndarray
    rng: np.random.Generator
    geometry: Geometry | None = None
    evaluations: int = 0
    executions_seen: int = 0  # bumps on every execution; geometry staleness marker
    coverage_curve: list = field(default_factory=list)
    initial_coverage: int = 0
    species: dict = field(default_factory=dict)  # cell -> representative trace
    batch_log: list = field(default_factory=list)
    _cache: dict = field(default_factory=dict)

    @property
    def max_bandwidth(self) -> int:
        return self.config.max_bandwidth or max(1, self.program.L)


# ---------------------------------------------------------------------------
# geometry


def compute_geometry(state: CampaignState, version: int) -> Geometry:
    cfg = state.config
    chain = estimate_chain(state.counts, state.cfg.adjacency, cfg.smoothing)
    metric = hitting_prob_metric(chain, cfg.beta)
    potentials = vertex_potential(cfg.objective, metric=metric.D, hops=state.hops,
                                  depths=state.depths, entry=state.cfg.entry, n=state.cfg.n)
    paths = PathMetric(metric, cfg.path_config())
    return Geometry(version=version, chain=chain, metric=metric, potentials=potentials,
                    paths=paths, landmarks=paths.index(state.landmark_traces))


def _edge_codes(state: CampaignState, trace: Trace) -> np.ndarray:
    return trace.edge_codes(state.cfg.n)


def init_campaign(config: CampaignConfig, program: Program, cfg: Cfg, corpus: Corpus) -> CampaignState:
    """Seed the archive from a precomputed corpus without spending budget."""
    if not corpus.inputs:
        raise ParameterError("empty corpus")
    if not corpus.landmark_indices:
        raise ParameterError("corpus has no landmarks")
    for x, t in zip(corpus.inputs, corpus.traces):
        if len(x) != program.L or execute(program, x).vertices != t.vertices:
            raise InputError("corpus does not belong to this program "
                             f"(input {list(x)} does not reproduce its trace)")
    m = min(config.cell_arity, len(corpus.landmark_indices))
    if m < config.cell_arity:
        log.warning("only %d landmarks; cell arity reduced to %d", m, m)
    state = CampaignState(
        config=config,
        program=program,
        cfg=cfg,
        archive=Archive(total_edges=len(cfg.edges)),
        counts=edge_counts(cfg, corpus.traces),
        landmark_traces=[corpus.traces[i] for i in corpus.landmark_indices],
        hops=entry_hop_distances(cfg),
        depths=drawing_depths(cfg),
        rng=np.random.default_rng(config.seed),
    )
    state._cache["arity"] = m
    state.geometry = compute_geometry(state, 0)
    for t in corpus.traces:
        state.archive.covered.update(_edge_codes(state, t).tolist())
    for x, t in zip(corpus.inputs, corpus.traces):
        _offer(state, tuple(x), t, bandwidth=1)
    state.initial_coverage = len(state.archive.covered)
    return state


def _arity(state: CampaignState) -> int:
    return state._cache.get("arity", state.config.cell_arity)


def _offer(state: CampaignState, x, trace: Trace, bandwidth: int) -> tuple[int, ...]:
    """File one (input, trace) into its cell; returns the cell."""
    geo = state.geometry
    cell = geo.cell_of(trace, _arity(state))
    phi = path_objective(trace, geo.potentials)
    cur = state.archive.cells.get(cell)
    if cur is None or phi > cur.objective:
        state.archive.cells[cell] = Elite(input=tuple(x), trace=trace, objective=phi,
                                          cell=cell, bandwidth=bandwidth)
    return cell


# ---------------------------------------------------------------------------
# go distribution


def go_distribution(Dy: np.ndarray, objectives: Sequence[float], alpha: float,
                    scale: float | None = None) -> np.ndarray:
    """Mixture of clamped magnitude weights (diversity) and min-max
    normalised objective values (quality), each normalised to sum 1."""
    k = len(objectives)
    if k == 0:
        raise StateError("empty archive")
    uniform = np.full(k, 1.0 / k)
    if k == 1:
        return np.ones(1)
    t = scale if scale is not None else default_scale(Dy)
    w = np.clip(weighting_of(similarity_matrix(Dy, t)).w, 0.0, None)
    w = w / w.sum() if w.sum() > 0 else uniform
    q = np.asarray(objectives, dtype=float)
    span = q.max() - q.min()
    if span > 0:
        q = (q - q.min()) / span
        q = q / q.sum()
    else:
        q = uniform
    p = alpha * w + (1.0 - alpha) * q
    return p / p.sum()


def _elite_distances(state: CampaignState, elites: list[Elite]) -> np.ndarray:
    key = (state.geometry.version, tuple(e.uid for e in elites))
    hit = state._cache.get("elite_D")
    if hit is not None and hit[0] == key:
        return hit[1]
    Dy = state.geometry.paths.pairwise([e.trace for e in elites])
    state._cache["elite_D"] = (key, Dy)
    return Dy


def _draw(p: np.ndarray, rng: np.random.Generator) -> int:
    c = np.cumsum(p)
    i = int(np.searchsorted(c, rng.random() * c[-1], side="right"))
    return min(i, len(p) - 1)


def go_select(state: CampaignState, rng: np.random.Generator | None = None) -> Elite:
    elites = state.archive.elites()
    if not elites:
        raise StateError("cannot select from an empty archive")
    rng = rng or state.rng
    if len(elites) == 1:
        return elites[0]
    Dy = _elite_distances(state, elites)
    p = go_distribution(Dy, [e.objective for e in elites], state.config.alpha, state.config.scale)
    return elites[_draw(p, rng)]


# ---------------------------------------------------------------------------
# power schedules


def species_distribution(counts: dict, species: Sequence) -> np.ndarray:
    """Add-one smoothed distribution of an elite's offspring over ``species``."""
    c = np.array([counts.get(s, 0) for s in species], dtype=float) + 1.0
    return c / c.sum()


def _species_similarity(state: CampaignState, species: list) -> np.ndarray | None:
    if state.config.schedule is not Schedule.SIMTROPIC or state.config.discrete_species:
        return None
    key = (state.geometry.version, len(species))
    hit = state._cache.get("species_Z")
    if hit is not None and hit[0] == key:
        return hit[1]
    Dy = state.geometry.paths.pairwise([state.species[s] for s in species])
    t = state.config.scale if state.config.scale is not None else default_scale(Dy)
    Z = similarity_matrix(Dy, t)
    state._cache["species_Z"] = (key, Z)
    return Z


def elite_energy(elite: Elite, species: list, Z: np.ndarray | None) -> float:
    """Entropy (Z None) or log order-1 diversity of an elite's offspring."""
    return log_diversity_order_1(Z, species_distribution(elite.species, species))


def power_schedule(elite: Elite, schedule, m_max: int, state: CampaignState,
                   rng: np.random.Generator | None = None) -> int:
    schedule = Schedule.parse(schedule)
    rng = rng or state.rng
    if schedule is Schedule.DEFAULT:
        return int(rng.integers(1, m_max + 1))
    if not elite.species:
        return m_max
    species = list(state.species)
    Z = _species_similarity(state, species)
    energies = [elite_energy(e, species, Z) for e in state.archive.elites() if e.species]
    h = elite_energy(elite, species, Z)
    top = max(energies + [h])
    if top <= 0:
        return 1
    return int(min(m_max, max(1, math.floor(m_max * h / top + 0.5))))


# ---------------------------------------------------------------------------
# mutation


def mutate_batch(elite: Elite, count: int, N: int, rng: np.random.Generator) -> list[tuple[int, ...]]:
    out = []
    for _ in range(count):
        x = elite.input
        for _ in range(elite.bandwidth):
            x = atomic_mutate(x, N, rng)
        out.append(x)
    return out


def pareto_scores(mutants, elite_inputs) -> np.ndarray:
    M = np.asarray(mutants, dtype=np.int64).reshape(len(mutants), -1)
    E = np.asarray(elite_inputs, dtype=np.int64).reshape(len(elite_inputs), -1)
    s1 = (M[:, None, :] != E[None, :, :]).sum(axis=2).min(axis=1).astype(float)
    mm = (M[:, None, :] != M[None, :, :]).sum(axis=2).astype(float)
    np.fill_diagonal(mm, np.inf)
    s2 = mm.min(axis=1)
    return np.column_stack([s1, s2])


def nondominated(scores) -> list[int]:
    """Indices of rows not Pareto-dominated when maximising every column."""
    S = np.asarray(scores, dtype=float)
    keep = []
    for i in range(S.shape[0]):
        ge = np.all(S >= S[i], axis=1)
        gt = np.any(S > S[i], axis=1)
        if not np.any(ge & gt):
            keep.append(i)
    return keep


def pareto_filter(mutants, elite_inputs) -> list:
    """Keep mutants whose (distance to nearest elite, distance to nearest
    fellow mutant) is Pareto-nondominated."""
    if len(mutants) <= 1:
        return list(mutants)
    return [mutants[i] for i in nondominated(pareto_scores(mutants, elite_inputs))]


def update_bandwidth(bandwidth: int, escapes: int, batch_size: int, b_max: int,
                     r_lo: float = 0.1, r_hi: float = 0.9) -> int:
    if batch_size <= 0:
        return bandwidth
    r = escapes / batch_size
    if r > r_hi:
        return max(1, bandwidth // 2)
    if r < r_lo:
        return min(b_max, bandwidth + 1)
    return bandwidth


# ---------------------------------------------------------------------------
# assimilation and refresh


def assimilate(state: CampaignState, parent: Elite, offspring) -> list[tuple[int, ...]]:
    """Record executed offspring: counts, coverage, cells and elites.

    Returns the cell of each offspring in order.
    """
    cells = []
    covered = state.archive.covered
    for x, trace in offspring:
        a = trace.array
        np.add.at(state.counts, (a[:-1], a[1:]), 1)
        covered.update(_edge_codes(state, trace).tolist())
        state.executions_seen += 1
        cells.append(_offer(state, x, trace, parent.bandwidth))
        state.evaluations += 1
        state.coverage_curve.append(len(covered))
    return cells


def record_species(state: CampaignState, parent: Elite, offspring, cells) -> None:
    for (_, trace), cell in zip(offspring, cells):
        parent.species[cell] = parent.species.get(cell, 0) + 1
        state.species.setdefault(cell, trace)


def refresh_geometry(state: CampaignState) -> CampaignState:
    """Rebuild the geometry from current counts and re-key every elite."""
    if state.geometry is not None and state.geometry.version == state.executions_seen:
        return state
    try:
        geo = compute_geometry(state, state.executions_seen)
    except NumericalError as exc:
        log.warning("geometry refresh failed, keeping previous snapshot: %s", exc)
        return state
    state.geometry = geo
    m = _arity(state)
    cells: dict = {}
    for e in state.archive.elites():
        e.cell = geo.cell_of(e.trace, m)
        e.objective = path_objective(e.trace, geo.potentials)
        cur = cells.get(e.cell)
        if cur is None or e.objective > cur.objective:
            cells[e.cell] = e
    state.archive.cells = cells
    return state


# ---------------------------------------------------------------------------
# campaign


@dataclass
class CampaignResult:
    config: dict
    coverage_curve: list
    initial_coverage: int
    total_edges: int
    total_evaluations: int
    archive: list
    batch_log: list

    def to_json(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    def covered_at(self, evaluation: int) -> int:
        if evaluation == 0:
            return self.initial_coverage
        return self.coverage_curve[evaluation - 1]


def _snapshot(state: CampaignState) -> list:
    return [
        {"cell": list(e.cell), "input": list(e.input), "objective": e.objective,
         "bandwidth": e.bandwidth}
        for e in state.archive.elites()
    ]


def step(state: CampaignState) -> None:
    """One go/explore batch."""
    cfg = state.config
    rng = state.rng
    elite = go_select(state, rng)
    power = power_schedule(elite, cfg.schedule, cfg.power_bound, state, rng)
    mutants = mutate_batch(elite, power, state.program.N, rng)
    if cfg.pareto_filter:
        mutants = pareto_filter(mutants, [e.input for e in state.archive.elites()])
    mutants = mutants[: cfg.budget - state.evaluations]
    offspring = [(x, execute(state.program, x, validate=False)) for x in mutants]
    before = state.evaluations
    cells = assimilate(state, elite, offspring)
    record_species(state, elite, offspring, cells)
    escapes = sum(c != elite.cell for c in cells)
    b0 = elite.bandwidth
    if cfg.bandwidth_adapt:
        elite.bandwidth = update_bandwidth(b0, escapes, len(cells), state.max_bandwidth,
                                           cfg.escape_low, cfg.escape_high)
    elite.last_batch = (len(cells), escapes)
    state.batch_log.append({
        "cell": list(elite.cell), "power": power, "batch": len(cells), "escapes": escapes,
        "bandwidth": b0, "new_bandwidth": elite.bandwidth,
        "covered": len(state.archive.covered), "archive": len(state.archive),
    })
    if state.evaluations // cfg.refresh > before // cfg.refresh:
        refresh_geometry(state)


def run_campaign(config: CampaignConfig, program: Program, cfg: Cfg, corpus: Corpus) -> CampaignResult:
    state = init_campaign(config, program, cfg, corpus)
    while state.evaluations < config.budget:
        step(state)
    return CampaignResult(
        config=config.to_dict(),
        coverage_curve=list(state.coverage_curve),
        initial_coverage=state.initial_coverage,
        total_edges=len(cfg.edges),
        total_evaluations=state.evaluations,
        archive=_snapshot(state),
        batch_log=state.batch_log,
    )
