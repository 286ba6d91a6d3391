"""GF(2) bit matrices and incremental XOR-equation solving.

Rows are Python ints used as packed bitsets: bit ``j`` of a row is column ``j``.
Payloads ride along as ints too, so one row XOR updates every payload byte.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence


class InconsistentSystem(ValueError):
    """A zero coefficient row ended up with a nonzero right-hand side."""


class ConflictingKnown(ValueError):
    """An unknown was given two different values."""


@dataclass
class BitMatrix:
    rows: int
    cols: int
    data: list[int] = field(default_factory=list)

    def __post_init__(self):
        if not self.data:
            self.data = [0] * self.rows
        if len(self.data) != self.rows:
            raise ValueError("row count does not match data")
        limit = 1 << self.cols
        if any(r < 0 or r >= limit for r in self.data):
            raise ValueError("row has bits beyond the column count")

    @classmethod
    def from_lists(cls, bits: Sequence[Sequence[int]]) -> "BitMatrix":
        cols = len(bits[0]) if bits else 0
        data = []
        for row in bits:
            if len(row) != cols:
                raise ValueError("ragged rows")
            data.append(sum(1 << j for j, b in enumerate(row) if b))
        return cls(len(bits), cols, data)

    @classmethod
    def identity(cls, size: int) -> "BitMatrix":
        return cls(size, size, [1 << j for j in range(size)])

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "BitMatrix":
        return cls(rows, cols, [0] * rows)

    def get(self, r: int, c: int) -> int:
        return (self.data[r] >> c) & 1

    def set(self, r: int, c: int, value: int) -> None:
        if value:
            self.data[r] |= 1 << c
        else:
            self.data[r] &= ~(1 << c)

    def to_lists(self) -> list[list[int]]:
        return [[(row >> j) & 1 for j in range(self.cols)] for row in self.data]

    def submatrix(self, row_indices: Iterable[int]) -> "BitMatrix":
        picked = [self.data[i] for i in row_indices]
        return BitMatrix(len(picked), self.cols, picked)


def _row_reduce_rank(data: list[int], cols: int) -> int:
    work = list(data)
    rank = 0
    for col in range(cols):
        bit = 1 << col
        pivot = next((r for r in range(rank, len(work)) if work[r] & bit), None)
        if pivot is None:
            continue
        work[rank], work[pivot] = work[pivot], work[rank]
        prow = work[rank]
        for r in range(rank + 1, len(work)):
            if work[r] & bit:
                work[r] ^= prow
        rank += 1
        if rank == len(work):
            break
    return rank


def rank(m: BitMatrix) -> int:
    return _row_reduce_rank(m.data, m.cols)


def is_invertible(m: BitMatrix) -> bool:
    if m.rows != m.cols:
        raise ValueError(f"matrix is {m.rows}x{m.cols}, not square")
    return rank(m) == m.rows


def _to_int(payload: bytes) -> int:
    return int.from_bytes(payload, "little")


class LinearSystem:
    """XOR equations over labelled unknowns with byte-string right-hand sides.

    Column ``j`` belongs to ``labels[j]``. Known unknowns are substituted out, so
    no remaining equation mentions a solved column.
    """

    def __init__(self, labels: Sequence[Hashable], payload_bytes: int):
        self.labels = list(labels)
        self.column = {label: j for j, label in enumerate(self.labels)}
        if len(self.column) != len(self.labels):
            raise ValueError("duplicate unknown labels")
        self.payload_bytes = payload_bytes
        self.rows: list[int] = []
        self.rhs: list[int] = []
        self._solved: dict[Hashable, int] = {}
        self.row_ops = 0

    def add_equation(self, coefficients: int, payload: bytes) -> None:
        if len(payload) != self.payload_bytes:
            raise ValueError(f"payload has {len(payload)} bytes, expected {self.payload_bytes}")
        if coefficients >> len(self.labels):
            raise ValueError("coefficient row references a column outside the system")
        value = _to_int(payload)
        # keep normal form: fold in anything already solved
        for label, known in self._solved.items():
            bit = 1 << self.column[label]
            if coefficients & bit:
                coefficients ^= bit
                value ^= known
        self.rows.append(coefficients)
        self.rhs.append(value)

    @property
    def coefficients(self) -> BitMatrix:
        return BitMatrix(len(self.rows), len(self.labels), list(self.rows))

    @property
    def solved(self) -> dict[Hashable, bytes]:
        return {label: v.to_bytes(self.payload_bytes, "little") for label, v in self._solved.items()}

    def is_solved(self, label: Hashable) -> bool:
        return label in self._solved

    def referenced(self) -> set[Hashable]:
        mask = 0
        for row in self.rows:
            mask |= row
        return {self.labels[j] for j in range(len(self.labels)) if mask >> j & 1}

    def __len__(self):
        return len(self.rows)

    def __repr__(self):
        return f"LinearSystem({len(self.rows)} eq, {len(self.labels)} unknowns, {len(self._solved)} solved)"


def eliminate(sys: LinearSystem) -> LinearSystem:
    """Gauss-Jordan reduce in place and pull out every uniquely determined unknown.

    Pivots are taken column by column in label order, choosing the lowest row
    index available. Rows left with more than one unknown stay as the residue.
    """
    rows, rhs = sys.rows, sys.rhs
    ops = 0
    pivot_row = 0
    for col in range(len(sys.labels)):
        if pivot_row == len(rows):
            break
        bit = 1 << col
        pivot = None
        for r in range(pivot_row, len(rows)):
            if rows[r] & bit:
                pivot = r
                break
        if pivot is None:
            continue
        if pivot != pivot_row:
            rows[pivot_row], rows[pivot] = rows[pivot], rows[pivot_row]
            rhs[pivot_row], rhs[pivot] = rhs[pivot], rhs[pivot_row]
        prow, pval = rows[pivot_row], rhs[pivot_row]
        for r in range(len(rows)):
            if r != pivot_row and rows[r] & bit:
                rows[r] ^= prow
                rhs[r] ^= pval
                ops += 1
        pivot_row += 1
    sys.row_ops += ops

    keep_rows, keep_rhs = [], []
    for row, val in zip(rows, rhs):
        if row == 0:
            if val:
                raise InconsistentSystem("0 = nonzero after reduction")
            continue
        if row & (row - 1) == 0:
            label = sys.labels[row.bit_length() - 1]
            sys._solved[label] = val
            continue
        keep_rows.append(row)
        keep_rhs.append(val)
    sys.rows, sys.rhs = keep_rows, keep_rhs
    return sys


def _substitute(sys: LinearSystem, label: Hashable, payload: bytes) -> bool:
    if len(payload) != sys.payload_bytes:
        raise ValueError("payload length mismatch")
    value = _to_int(payload)
    if label in sys._solved:
        if sys._solved[label] != value:
            raise ConflictingKnown(f"{label!r} already solved with a different payload")
        return False
    col = sys.column.get(label)
    if col is None:
        return False
    bit = 1 << col
    touched = False
    for r, row in enumerate(sys.rows):
        if row & bit:
            sys.rows[r] = row ^ bit
            sys.rhs[r] ^= value
            touched = True
    if touched:
        sys._solved[label] = value
    return touched


def inject_known(sys: LinearSystem, label: Hashable, payload: bytes) -> LinearSystem:
    """Substitute a known value for ``label`` and re-run elimination."""
    if _substitute(sys, label, payload):
        eliminate(sys)
    return sys


def inject_many(sys: LinearSystem, knowns: Iterable[tuple[Hashable, bytes]]) -> LinearSystem:
    """Batch form of :func:`inject_known` with a single elimination at the end."""
    touched = False
    for label, payload in knowns:
        touched |= _substitute(sys, label, payload)
    if touched:
        eliminate(sys)
    return sys
