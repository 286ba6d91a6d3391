import random

import pytest
from hypothesis import given, settings, strategies as st

from iecs.gf2 import (
    BitMatrix,
    ConflictingKnown,
    InconsistentSystem,
    LinearSystem,
    eliminate,
    inject_known,
    inject_many,
    is_invertible,
    rank,
)

from oracles import rank_by_subsets


def xor(*chunks):
    out = bytearray(len(chunks[0]))
    for c in chunks:
        for i, b in enumerate(c):
            out[i] ^= b
    return bytes(out)


def encode(matrix_rows, payloads):
    return [xor(*[payloads[j] for j in range(len(payloads)) if row >> j & 1] or [bytes(len(payloads[0]))]) for row in matrix_rows]


def test_rank_examples():
    assert rank(BitMatrix.identity(4)) == 4
    assert rank(BitMatrix.from_lists([[1, 1, 0], [0, 1, 1], [1, 0, 1]])) == 2
    dup = BitMatrix.from_lists([[1, 0, 1, 1], [0, 1, 1, 0], [1, 0, 1, 1]])
    assert rank(dup) < dup.rows


def test_is_invertible():
    assert is_invertible(BitMatrix.identity(5))
    assert not is_invertible(BitMatrix.zeros(3, 3))
    assert not is_invertible(BitMatrix.from_lists([[1, 1, 0], [0, 1, 1], [1, 0, 1]]))
    with pytest.raises(ValueError):
        is_invertible(BitMatrix.zeros(2, 3))


def test_bitmatrix_accessors():
    m = BitMatrix.zeros(2, 3)
    m.set(1, 2, 1)
    assert m.get(1, 2) == 1 and m.to_lists() == [[0, 0, 0], [0, 0, 1]]
    m.set(1, 2, 0)
    assert m.data == [0, 0]
    with pytest.raises(ValueError):
        BitMatrix(1, 2, [0b100])


@settings(max_examples=200)
@given(st.integers(1, 12).flatmap(lambda r: st.tuples(st.integers(1, 10), st.lists(st.integers(0, 1023), min_size=r, max_size=r))))
def test_rank_matches_subset_enumeration(params):
    cols, rows = params
    rows = [r & ((1 << cols) - 1) for r in rows]
    assert rank(BitMatrix(len(rows), cols, rows)) == rank_by_subsets(rows)


def test_eliminate_back_substitution():
    A, B = b"\x0f\xf0", b"\x33\x55"
    sys = LinearSystem(["x1", "x2"], 2)
    sys.add_equation(0b11, A)
    sys.add_equation(0b10, B)
    eliminate(sys)
    assert sys.solved == {"x2": B, "x1": xor(A, B)}
    assert len(sys) == 0


def test_eliminate_underdetermined_keeps_residue():
    sys = LinearSystem(["x1", "x2"], 1)
    sys.add_equation(0b11, b"\x07")
    eliminate(sys)
    assert sys.solved == {}
    assert sys.rows == [0b11] and len(sys) == 1


def test_eliminate_inconsistent():
    sys = LinearSystem(["a", "b"], 1)
    sys.add_equation(0b11, b"\x01")
    sys.add_equation(0b11, b"\x02")
    with pytest.raises(InconsistentSystem):
        eliminate(sys)


def _random_invertible(rng, size):
    while True:
        rows = [rng.getrandbits(size) for _ in range(size)]
        if rank_by_subsets(rows) == size:
            return rows


def test_full_rank_round_trip():
    rng = random.Random(7)
    rows = _random_invertible(rng, 8)
    payloads = [rng.randbytes(16) for _ in range(8)]
    sys = LinearSystem(list(range(8)), 16)
    for row, coded in zip(rows, encode(rows, payloads)):
        sys.add_equation(row, coded)
    eliminate(sys)
    assert sys.solved == dict(enumerate(payloads))
    assert len(sys) == 0


def test_inject_known_solves_partner():
    A, B = b"\xaa", b"\x0c"
    sys = LinearSystem(["x1", "x2"], 1)
    sys.add_equation(0b11, A)
    eliminate(sys)
    inject_known(sys, "x2", B)
    assert sys.solved["x1"] == xor(A, B)


def test_inject_absent_label_is_noop():
    sys = LinearSystem(["x1", "x2", "x3"], 1)
    sys.add_equation(0b011, b"\x01")
    before = (list(sys.rows), list(sys.rhs), sys.solved)
    inject_known(sys, "x3", b"\x09")
    inject_known(sys, "nope", b"\x09")
    assert (sys.rows, sys.rhs, sys.solved) == before


def test_inject_conflicting_known():
    sys = LinearSystem(["x1"], 1)
    sys.add_equation(0b1, b"\x01")
    eliminate(sys)
    inject_known(sys, "x1", b"\x01")
    with pytest.raises(ConflictingKnown):
        inject_known(sys, "x1", b"\x02")


def test_inject_chain_rank_three():
    # 3 independent equations over 4 unknowns; one known unlocks the other three
    rng = random.Random(3)
    payloads = [rng.randbytes(4) for _ in range(4)]
    rows = [0b0011, 0b0110, 0b1100]
    sys = LinearSystem(list(range(4)), 4)
    for row, coded in zip(rows, encode(rows, payloads)):
        sys.add_equation(row, coded)
    eliminate(sys)
    assert sys.solved == {}
    inject_known(sys, 0, payloads[0])
    solved = sys.solved
    assert {j: solved[j] for j in (1, 2, 3)} == {1: payloads[1], 2: payloads[2], 3: payloads[3]}


def test_add_equation_folds_solved_columns():
    sys = LinearSystem(["a", "b"], 1)
    sys.add_equation(0b01, b"\x05")
    eliminate(sys)
    sys.add_equation(0b11, b"\x06")
    assert sys.rows == [0b10] and sys.rhs == [0x03]


def test_row_ops_bounded_by_rows_times_columns():
    rng = random.Random(1)
    for size in (4, 8, 16, 32):
        rows = [rng.getrandbits(size) for _ in range(size + 4)]
        sys = LinearSystem(list(range(size)), 1)
        for r in rows:
            sys.add_equation(r, b"\x00")
        eliminate(sys)
        assert sys.row_ops <= len(rows) * size


systems = st.integers(2, 8).flatmap(
    lambda cols: st.tuples(
        st.just(cols),
        st.lists(st.integers(1, (1 << cols) - 1), min_size=1, max_size=cols),
        st.permutations(list(range(cols))),
        st.integers(0, cols),
        st.integers(0, 2**32),
    )
)


@settings(max_examples=150)
@given(systems)
def test_injection_order_independent_and_monotone(params):
    cols, rows, order, count, seed = params
    rng = random.Random(seed)
    payloads = [rng.randbytes(3) for _ in range(cols)]
    knowns = [(j, payloads[j]) for j in order[:count]]

    def build():
        s = LinearSystem(list(range(cols)), 3)
        for row, coded in zip(rows, encode(rows, payloads)):
            s.add_equation(row, coded)
        return eliminate(s)

    forward, backward, batch = build(), build(), build()
    for label, value in knowns:
        before = set(forward.solved)
        inject_known(forward, label, value)
        assert before <= set(forward.solved)
    for label, value in reversed(knowns):
        inject_known(backward, label, value)
    inject_many(batch, knowns)

    assert forward.solved == backward.solved == batch.solved
    for label, value in forward.solved.items():
        assert value == payloads[label]
