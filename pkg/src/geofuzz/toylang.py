"""Toy program family: random generation, control flow graphs and an
instrumented interpreter.

Programs are built from three constructs::

    if (x[i] == c) { ... } else { ... }
    while (b_k != x[i]) { b_k := inc(b_k); ... }
    b_k := inc(b_k)

where ``inc(v) = (v mod N) + 1`` cycles through the alphabet ``{1..N}``.
Every predicate reads its own input word, so each branch outcome can be
selected independently of all others and no code is unreachable.  Every
loop owns a fresh counter initialised to 1 at program start, so a loop body
runs at most ``N - 1`` times over a whole execution.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence, Union

import numpy as np

from .errors import InputError, ParameterError

FORMAT_VERSION = 1


@dataclass(frozen=True)
class GenParams:
    """Parameters of the stochastic grammar.

    ``prob_continue`` controls the length of nested bodies: after each
    statement a nested body grows by another statement with this
    probability.  The top level keeps growing until ``max_statements`` are
    used up.
    """

    alphabet_size: int = 8
    max_statements: int = 30
    max_depth: int = 10
    prob_if: float = 0.4
    prob_while: float = 0.2
    prob_assign: float = 0.4
    seed: int = 0
    prob_continue: float = 0.8

    def validate(self) -> None:
        if self.alphabet_size < 2:
            raise ParameterError(f"alphabet_size must be >= 2, got {self.alphabet_size}")
        if self.max_statements < 1:
            raise ParameterError("max_statements must be >= 1")
        if self.max_depth < 1:
            raise ParameterError("max_depth must be >= 1")
        probs = (self.prob_if, self.prob_while, self.prob_assign)
        if min(probs) < 0:
            raise ParameterError(f"production probabilities must be nonnegative: {probs}")
        if abs(sum(probs) - 1.0) > 1e-12:
            raise ParameterError(f"production probabilities must sum to 1, got {sum(probs)!r}")
        if not 0.0 <= self.prob_continue < 1.0:
            raise ParameterError("prob_continue must lie in [0, 1)")


# AST nodes.  Vertex ids refer to the program's Cfg; input indices are
# 0-based internally and printed 1-based.


@dataclass(frozen=True)
class Assign:
    var: int
    vertex: int


@dataclass(frozen=True)
class If:
    index: int
    const: int
    then: tuple
    orelse: tuple
    branch_vertex: int
    then_vertex: int
    else_vertex: int
    join_vertex: int


@dataclass(frozen=True)
class While:
    var: int
    index: int
    body: tuple
    header_vertex: int
    body_vertex: int


Statement = Union[Assign, If, While]


@dataclass(frozen=True)
class Cfg:
    kinds: tuple[str, ...]
    edges: tuple[tuple[int, int], ...]
    entry: int = 0

    @property
    def n(self) -> int:
        return len(self.kinds)

    @property
    def exit(self) -> int:
        return self.n - 1

    @property
    def back_edge(self) -> tuple[int, int]:
        """The synthetic exit -> entry edge."""
        return (self.exit, self.entry)

    @property
    def coverable_edges(self) -> int:
        return len(self.edges) - 1

    @cached_property
    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=np.int64)
        for u, v in self.edges:
            a[u, v] = 1
        a.setflags(write=False)
        return a

    @cached_property
    def successors(self) -> tuple[tuple[int, ...], ...]:
        succ: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            succ[u].append(v)
        return tuple(tuple(s) for s in succ)

    def to_dict(self) -> dict:
        return {
            "vertices": [{"id": i, "kind": k} for i, k in enumerate(self.kinds)],
            "edges": [list(e) for e in self.edges],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Cfg":
        kinds = tuple(v["kind"] for v in sorted(d["vertices"], key=lambda v: v["id"]))
        return cls(kinds=kinds, edges=tuple((int(u), int(v)) for u, v in d["edges"]))


@dataclass(frozen=True)
class Program:
    alphabet_size: int
    statements: tuple
    input_length: int
    b_count: int
    exit_vertex: int
    loop_vars: frozenset = field(default_factory=frozenset)

    @property
    def N(self) -> int:
        return self.alphabet_size

    @property
    def L(self) -> int:
        return self.input_length

    def predicates(self) -> list[tuple[int, int, str, int]]:
        """Rows ``(vertex, input_index, kind, operand)`` sorted by input index.

        ``operand`` is the constant for ``if`` and the counter variable for
        ``while``.
        """
        rows = []
        for node in walk(self.statements):
            if isinstance(node, If):
                rows.append((node.branch_vertex, node.index, "if", node.const))
            elif isinstance(node, While):
                rows.append((node.header_vertex, node.index, "while", node.var))
        return sorted(rows, key=lambda r: r[1])

    def source(self) -> str:
        lines: list[str] = []
        _render(self.statements, 0, lines)
        header = f"// N = {self.N}, L = {self.L}; all b variables start at 1"
        return "\n".join([header, *lines]) + "\n"


@dataclass(frozen=True)
class Trace:
    """Vertex path of one execution, entry first and exit last."""

    vertices: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.vertices)

    @cached_property
    def array(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=np.int64)

    @cached_property
    def vertex_set(self) -> frozenset:
        return frozenset(self.vertices)

    def edges(self) -> list[tuple[int, int]]:
        v = self.vertices
        return list(zip(v[:-1], v[1:]))

    def edge_codes(self, n: int) -> np.ndarray:
        """Distinct edges encoded as ``u * n + v``."""
        a = self.array
        return np.unique(a[:-1] * n + a[1:])

    def mask(self, n: int) -> np.ndarray:
        m = np.zeros(n, dtype=bool)
        m[self.array] = True
        return m


def walk(statements):
    for s in statements:
        yield s
        if isinstance(s, If):
            yield from walk(s.then)
            yield from walk(s.orelse)
        elif isinstance(s, While):
            yield from walk(s.body)


def inc(value: int, N: int) -> int:
    return value % N + 1


# ---------------------------------------------------------------------------
# generation


class _Builder:
    def __init__(self, params: GenParams):
        self.p = params
        self.rng = np.random.default_rng(params.seed)
        self.budget = params.max_statements
        self.kinds: list[str] = []
        self.edges: list[tuple[int, int]] = []
        self.n_vars = 0
        self.loop_vars: set[int] = set()
        self.scratch_vars: list[int] = []

    def vertex(self, kind: str) -> int:
        self.kinds.append(kind)
        return len(self.kinds) - 1

    def edge(self, u: int, v: int) -> None:
        self.edges.append((u, v))

    def new_var(self) -> int:
        self.n_vars += 1
        return self.n_vars - 1

    def block(self, depth: int, prev: int, top: bool) -> tuple[tuple, int]:
        stmts = []
        while self.budget > 0 and (top or self.rng.random() < self.p.prob_continue):
            stmt, prev = self.statement(depth, prev)
            stmts.append(stmt)
        return tuple(stmts), prev

    def statement(self, depth: int, prev: int) -> tuple[Statement, int]:
        self.budget -= 1
        p = self.p
        u = self.rng.random()
        if depth >= p.max_depth or u >= p.prob_if + p.prob_while:
            kind = "assign"
        elif u < p.prob_if:
            kind = "if"
        else:
            kind = "while"

        if kind == "assign":
            k = int(self.rng.integers(0, len(self.scratch_vars) + 1))
            if k == len(self.scratch_vars):
                self.scratch_vars.append(self.new_var())
            v = self.vertex("block")
            self.edge(prev, v)
            return Assign(var=self.scratch_vars[k], vertex=v), v

        if kind == "if":
            const = int(self.rng.integers(1, p.alphabet_size + 1))
            b = self.vertex("branch")
            self.edge(prev, b)
            t = self.vertex("then")
            self.edge(b, t)
            then, t_end = self.block(depth + 1, t, top=False)
            e = self.vertex("else")
            self.edge(b, e)
            orelse, e_end = self.block(depth + 1, e, top=False)
            j = self.vertex("join")
            self.edge(t_end, j)
            self.edge(e_end, j)
            return If(-1, const, then, orelse, b, t, e, j), j

        var = self.new_var()
        self.loop_vars.add(var)
        h = self.vertex("loop_header")
        self.edge(prev, h)
        bv = self.vertex("loop_body")
        self.edge(h, bv)
        body, b_end = self.block(depth + 1, bv, top=False)
        self.edge(b_end, h)
        return While(var, -1, body, h, bv), h


def _dfs_order(n: int, edges: Sequence[tuple[int, int]], entry: int) -> list[int]:
    succ: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        succ[u].append(v)
    seen = [False] * n
    order = []
    stack = [entry]
    while stack:
        u = stack.pop()
        if seen[u]:
            continue
        seen[u] = True
        order.append(u)
        stack.extend(reversed(succ[u]))
    return order


def _reindex(statements, index_of: dict[int, int]) -> tuple:
    out = []
    for s in statements:
        if isinstance(s, If):
            s = If(index_of[s.branch_vertex], s.const, _reindex(s.then, index_of),
                   _reindex(s.orelse, index_of), s.branch_vertex, s.then_vertex,
                   s.else_vertex, s.join_vertex)
        elif isinstance(s, While):
            s = While(s.var, index_of[s.header_vertex], _reindex(s.body, index_of),
                      s.header_vertex, s.body_vertex)
        out.append(s)
    return tuple(out)


def generate_program(params: GenParams) -> tuple[Program, Cfg]:
    """Sample a program from the grammar and build its CFG.

    Deterministic in ``params``.  Input indices are assigned in depth-first
    preorder of the CFG from the entry, visiting successors in source order
    (true branch / loop body first).
    """
    params.validate()
    bld = _Builder(params)
    entry = bld.vertex("entry")
    stmts, last = bld.block(0, entry, top=True)
    exit_ = bld.vertex("exit")
    bld.edge(last, exit_)
    bld.edge(exit_, entry)

    pred_kinds = {"branch", "loop_header"}
    order = _dfs_order(len(bld.kinds), bld.edges, entry)
    preds = [v for v in order if bld.kinds[v] in pred_kinds]
    index_of = {v: i for i, v in enumerate(preds)}
    stmts = _reindex(stmts, index_of)

    cfg = Cfg(kinds=tuple(bld.kinds), edges=tuple(bld.edges), entry=entry)
    program = Program(
        alphabet_size=params.alphabet_size,
        statements=stmts,
        input_length=len(preds),
        b_count=bld.n_vars,
        exit_vertex=exit_,
        loop_vars=frozenset(bld.loop_vars),
    )
    return program, cfg


# ---------------------------------------------------------------------------
# execution


def check_input(program: Program, x: Sequence[int]) -> None:
    if len(x) != program.L:
        raise InputError(f"input has length {len(x)}, program expects {program.L}")
    N = program.N
    for w in x:
        if not 1 <= w <= N:
            raise InputError(f"input word {w} outside alphabet 1..{N}")


def execute(program: Program, x: Sequence[int], *, validate: bool = True) -> Trace:
    """Run ``program`` on ``x`` and return the visited vertex path."""
    if validate:
        check_input(program, x)
    N = program.N
    b = [1] * program.b_count
    path = [0]

    def run(stmts):
        for s in stmts:
            if type(s) is Assign:
                path.append(s.vertex)
                b[s.var] = b[s.var] % N + 1
            elif type(s) is If:
                path.append(s.branch_vertex)
                if x[s.index] == s.const:
                    path.append(s.then_vertex)
                    run(s.then)
                else:
                    path.append(s.else_vertex)
                    run(s.orelse)
                path.append(s.join_vertex)
            else:
                h = s.header_vertex
                path.append(h)
                target = x[s.index]
                while b[s.var] != target:
                    path.append(s.body_vertex)
                    b[s.var] = b[s.var] % N + 1
                    run(s.body)
                    path.append(h)

    run(program.statements)
    path.append(program.exit_vertex)
    return Trace(tuple(path))


def input_distance(a: Sequence[int], b: Sequence[int]) -> int:
    """Hamming distance between two equal-length inputs."""
    if len(a) != len(b):
        raise InputError(f"length mismatch: {len(a)} vs {len(b)}")
    return sum(1 for u, v in zip(a, b) if u != v)


def atomic_mutate(x: Sequence[int], N: int, rng: np.random.Generator) -> tuple[int, ...]:
    """Resample one uniformly chosen word to a different letter."""
    if len(x) == 0:
        return tuple(x)
    out = list(x)
    i = int(rng.integers(0, len(out)))
    v = int(rng.integers(1, N))
    if v >= out[i]:
        v += 1
    out[i] = v
    return tuple(out)


def random_input(program: Program, rng: np.random.Generator) -> tuple[int, ...]:
    return tuple(int(v) for v in rng.integers(1, program.N + 1, size=program.L))


# ---------------------------------------------------------------------------
# serialization


def _node_to_json(s: Statement) -> dict:
    if isinstance(s, Assign):
        return {"type": "assign", "var": s.var, "vertex": s.vertex}
    if isinstance(s, If):
        return {
            "type": "if", "index": s.index, "const": s.const,
            "then": [_node_to_json(t) for t in s.then],
            "else": [_node_to_json(t) for t in s.orelse],
            "vertices": [s.branch_vertex, s.then_vertex, s.else_vertex, s.join_vertex],
        }
    return {
        "type": "while", "var": s.var, "index": s.index,
        "body": [_node_to_json(t) for t in s.body],
        "vertices": [s.header_vertex, s.body_vertex],
    }


def _node_from_json(d: dict) -> Statement:
    t = d["type"]
    if t == "assign":
        return Assign(d["var"], d["vertex"])
    if t == "if":
        b, th, el, j = d["vertices"]
        return If(d["index"], d["const"], tuple(map(_node_from_json, d["then"])),
                  tuple(map(_node_from_json, d["else"])), b, th, el, j)
    if t == "while":
        h, bv = d["vertices"]
        return While(d["var"], d["index"], tuple(map(_node_from_json, d["body"])), h, bv)
    raise ParameterError(f"unknown statement type {t!r}")


def program_to_json(program: Program, cfg: Cfg) -> dict:
    return {
        "version": FORMAT_VERSION,
        "N": program.N,
        "L": program.L,
        "b_count": program.b_count,
        "exit": program.exit_vertex,
        "loop_vars": sorted(program.loop_vars),
        "statements": [_node_to_json(s) for s in program.statements],
        "cfg": cfg.to_dict(),
    }


def program_from_json(d: dict) -> tuple[Program, Cfg]:
    if d.get("version") != FORMAT_VERSION:
        raise ParameterError(f"unsupported program format version {d.get('version')!r}")
    program = Program(
        alphabet_size=int(d["N"]),
        statements=tuple(_node_from_json(s) for s in d["statements"]),
        input_length=int(d["L"]),
        b_count=int(d["b_count"]),
        exit_vertex=int(d["exit"]),
        loop_vars=frozenset(d.get("loop_vars", ())),
    )
    return program, Cfg.from_dict(d["cfg"])


def dump_program(program: Program, cfg: Cfg) -> str:
    return json.dumps(program_to_json(program, cfg), sort_keys=True)


def load_program(path) -> tuple[Program, Cfg]:
    with open(path) as fh:
        return program_from_json(json.load(fh))


def _render(stmts, depth: int, lines: list[str]) -> None:
    pad = "    " * depth
    for s in stmts:
        if isinstance(s, Assign):
            lines.append(f"{pad}b{s.var + 1} := inc(b{s.var + 1});  // v{s.vertex}")
        elif isinstance(s, If):
            lines.append(f"{pad}if (x[{s.index + 1}] == {s.const}) {{  // v{s.branch_vertex}")
            _render(s.then, depth + 1, lines)
            lines.append(f"{pad}}} else {{")
            _render(s.orelse, depth + 1, lines)
            lines.append(f"{pad}}}")
        else:
            v = s.var + 1
            lines.append(f"{pad}while (b{v} != x[{s.index + 1}]) {{  // v{s.header_vertex}")
            lines.append(f"{pad}    b{v} := inc(b{v});")
            _render(s.body, depth + 1, lines)
            lines.append(f"{pad}}}")
