import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from geofuzz.errors import InputError, ParameterError
from geofuzz.toylang import (GenParams, If, While, atomic_mutate, dump_program, execute,
                             generate_program, input_distance, program_from_json,
                             program_to_json, random_input, walk)


def test_single_if_shape():
    prog, cfg = generate_program(GenParams(max_statements=1, prob_if=1.0, prob_while=0.0,
                                           prob_assign=0.0, seed=5))
    assert prog.L == 1
    assert cfg.kinds == ("entry", "branch", "then", "else", "join", "exit")
    assert cfg.back_edge in cfg.edges
    assert len(cfg.edges) == 7


def test_default_alphabet_is_eight():
    prog, _ = generate_program(GenParams())
    assert prog.N == 8


def test_generation_is_deterministic():
    a = generate_program(GenParams(seed=11))
    b = generate_program(GenParams(seed=11))
    assert dump_program(*a) == dump_program(*b)
    c = generate_program(GenParams(seed=12))
    assert dump_program(*a) != dump_program(*c)


@pytest.mark.parametrize("kw", [
    dict(alphabet_size=1),
    dict(prob_if=0.5, prob_while=0.5, prob_assign=0.5),
    dict(prob_if=-0.1, prob_while=0.7, prob_assign=0.4),
    dict(max_statements=0),
])
def test_invalid_params(kw):
    with pytest.raises(ParameterError):
        generate_program(GenParams(**kw))


def test_if_semantics(if_program):
    prog, _ = if_program
    t = execute(prog, [3])
    assert 2 in t.vertex_set and 3 not in t.vertex_set
    t = execute(prog, [4])
    assert 3 in t.vertex_set and 2 not in t.vertex_set
    assert t.vertices == (0, 1, 3, 4, 5)


def test_while_semantics(while_program):
    prog, _ = while_program
    assert 2 not in execute(prog, [1]).vertex_set
    # b starts at 1, so target 4 needs three iterations
    assert execute(prog, [4]).vertices == (0, 1, 2, 3, 1, 2, 3, 1, 2, 3, 1, 4)


def test_execute_rejects_bad_inputs(if_program):
    prog, _ = if_program
    with pytest.raises(InputError):
        execute(prog, [1, 2])
    with pytest.raises(InputError):
        execute(prog, [9])
    with pytest.raises(InputError):
        execute(prog, [0])


def test_program_structure_invariants():
    for seed in range(30):
        prog, cfg = generate_program(GenParams(seed=seed, max_depth=5))
        preds = prog.predicates()
        assert [r[1] for r in preds] == list(range(prog.L))
        loop_vars = [s.var for s in walk(prog.statements) if isinstance(s, While)]
        assert len(set(loop_vars)) == len(loop_vars)
        for s in walk(prog.statements):
            if isinstance(s, If):
                assert 1 <= s.const <= prog.N


def test_input_indices_follow_cfg_dfs():
    prog, cfg = generate_program(GenParams(seed=3, max_depth=4))
    seen, order, stack = set(), [], [cfg.entry]
    while stack:
        u = stack.pop()
        if u in seen:
            continue
        seen.add(u)
        order.append(u)
        stack.extend(reversed(cfg.successors[u]))
    pred_vertices = [v for v in order if cfg.kinds[v] in ("branch", "loop_header")]
    by_vertex = {r[0]: r[1] for r in prog.predicates()}
    assert [by_vertex[v] for v in pred_vertices] == list(range(prog.L))


def test_traces_follow_cfg_edges_and_terminate():
    rng = np.random.default_rng(0)
    for seed in range(20):
        prog, cfg = generate_program(GenParams(seed=seed, max_depth=6, prob_continue=0.8))
        edges = set(cfg.edges)
        for _ in range(20):
            t = execute(prog, random_input(prog, rng))
            assert t.vertices[0] == cfg.entry and t.vertices[-1] == cfg.exit
            assert all(e in edges for e in t.edges())
            assert len(t) <= cfg.n * prog.N * max(prog.L, 1)


def test_exhaustive_coverage_small_program():
    prog, cfg = generate_program(GenParams(seed=2, alphabet_size=3, max_statements=5))
    assert prog.L <= 4
    covered = set()
    for x in itertools.product(range(1, 4), repeat=prog.L):
        covered.update(execute(prog, x).edges())
    assert covered == set(cfg.edges) - {cfg.back_edge}


def test_input_distance_examples():
    assert input_distance([1, 2, 3], [1, 2, 3]) == 0
    assert input_distance([1, 2, 3], [1, 5, 3]) == 1
    assert input_distance([1, 1], [2, 2]) == 2
    with pytest.raises(InputError):
        input_distance([1], [1, 2])


words = st.lists(st.integers(1, 6), min_size=1, max_size=8)


@given(st.integers(1, 8).flatmap(lambda n: st.tuples(*[st.lists(st.integers(1, 6), min_size=n, max_size=n)] * 3)))
def test_hamming_is_a_metric(xyz):
    x, y, z = xyz
    assert input_distance(x, y) == input_distance(y, x)
    assert (input_distance(x, y) == 0) == (x == y)
    assert input_distance(x, z) <= input_distance(x, y) + input_distance(y, z)


@settings(max_examples=50)
@given(words, st.integers(0, 2**32 - 1), st.integers(0, 6))
def test_atomic_mutation_contract(x, seed, k):
    rng = np.random.default_rng(seed)
    y = atomic_mutate(x, 6, rng)
    assert input_distance(x, y) == 1
    assert all(1 <= v <= 6 for v in y)
    z = tuple(x)
    for _ in range(k):
        z = atomic_mutate(z, 6, rng)
    assert input_distance(x, z) <= k


def test_atomic_mutation_binary_alphabet_and_empty():
    rng = np.random.default_rng(1)
    assert atomic_mutate([1], 2, rng) == (2,)
    assert atomic_mutate([], 2, rng) == ()


def test_random_input():
    prog, _ = generate_program(GenParams(seed=4))
    x = random_input(prog, np.random.default_rng(9))
    assert len(x) == prog.L and all(1 <= v <= 8 for v in x)
    assert x == random_input(prog, np.random.default_rng(9))
    empty = prog.__class__(8, (), 0, 0, 1)
    assert random_input(empty, np.random.default_rng(0)) == ()


def test_json_roundtrip():
    prog, cfg = generate_program(GenParams(seed=8))
    doc = json.loads(json.dumps(program_to_json(prog, cfg)))
    assert set(doc) >= {"version", "N", "L", "statements", "cfg"}
    prog2, cfg2 = program_from_json(doc)
    assert prog2 == prog and cfg2 == cfg
    assert "x[1]" in prog.source()
