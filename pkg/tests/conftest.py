import numpy as np
import pytest

from geofuzz.toylang import Assign, Cfg, If, Program, While


def random_irreducible_chain(rng, n):
    """Random row-stochastic matrix on a strongly connected digraph (a
    Hamiltonian cycle plus random extra edges)."""
    perm = rng.permutation(n)
    A = np.zeros((n, n))
    A[perm, np.roll(perm, -1)] = 1
    A[rng.random((n, n)) < rng.uniform(0.05, 0.5)] = 1
    if n == 1:
        A[:] = 1
    W = A * rng.uniform(0.1, 1.0, size=(n, n))
    return W / W.sum(axis=1, keepdims=True)


def single_if_program(const=3, N=8):
    # entry 0, branch 1, then 2, else 3, join 4, exit 5
    prog = Program(alphabet_size=N, statements=(If(0, const, (), (), 1, 2, 3, 4),),
                   input_length=1, b_count=0, exit_vertex=5)
    cfg = Cfg(kinds=("entry", "branch", "then", "else", "join", "exit"),
              edges=((0, 1), (1, 2), (1, 3), (2, 4), (3, 4), (4, 5), (5, 0)))
    return prog, cfg


def single_while_program(N=8):
    # entry 0, header 1, body 2, assign 3 inside body, exit 4
    prog = Program(alphabet_size=N,
                   statements=(While(0, 0, (Assign(1, 3),), 1, 2),),
                   input_length=1, b_count=2, exit_vertex=4, loop_vars=frozenset({0}))
    cfg = Cfg(kinds=("entry", "loop_header", "loop_body", "block", "exit"),
              edges=((0, 1), (1, 2), (2, 3), (3, 1), (1, 4), (4, 0)))
    return prog, cfg


@pytest.fixture
def if_program():
    return single_if_program()


@pytest.fixture
def while_program():
    return single_while_program()


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL/WARN line per acceptance criterion; the lines
    are echoed in the terminal summary and failures fail the test."""
    def record(number: int, status: str, detail: str) -> None:
        line = f"criterion {number}: {status} - {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert status in ("PASS", "WARN"), line
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
