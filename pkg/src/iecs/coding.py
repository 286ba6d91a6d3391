"""Server side: segment content, derive per-slot coding matrices, emit coded packets."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable, Sequence

import numpy as np

from .gf2 import BitMatrix, rank
from .harmonic import Schedule, SystemConfig

MAX_REDRAWS = 1000

# domain tags keep the independent PRNG streams apart
PLAN_STREAM = 0x504C414E
ORDER_STREAM = 0x4F524452
CONTENT_STREAM = 0x434F4E54

HEADER = struct.Struct("<IHHII")


class EmptyContent(ValueError):
    pass


class PlanMismatch(ValueError):
    """Plan labels disagree with what the schedule says was sent."""


class GenerationExhausted(RuntimeError):
    pass


@dataclass(frozen=True)
class Segment:
    index: int
    subsegments: tuple[bytes, ...]
    payload_bytes: int

    def packet(self, sub: int, position: int) -> bytes:
        """Packet ``position`` (0-based) of subsegment ``sub`` (1-based)."""
        start = position * self.payload_bytes
        return self.subsegments[sub - 1][start : start + self.payload_bytes]


@dataclass(frozen=True)
class CodingPlan:
    slot: int
    matrix: BitMatrix
    column_labels: tuple[tuple[int, int], ...]  # (segment, subsegment)
    row_labels: tuple[tuple[int, int], ...]  # (channel, subchannel)

    def row_index(self, channel: int, subchannel: int, lam: int) -> int:
        return (channel - 1) * lam + (subchannel - 1)


@dataclass(frozen=True)
class CodedPacket:
    slot: int
    channel: int
    subchannel: int
    position: int
    payload: bytes

    def to_bytes(self) -> bytes:
        return (
            HEADER.pack(self.slot, self.channel, self.subchannel, self.position, len(self.payload))
            + self.payload
        )

    @classmethod
    def from_bytes(cls, buf: bytes, offset: int = 0) -> tuple["CodedPacket", int]:
        """Decode one packet at ``offset``; returns it and the offset just past it."""
        if len(buf) - offset < HEADER.size:
            raise ValueError("truncated packet header")
        slot, channel, subchannel, position, length = HEADER.unpack_from(buf, offset)
        start = offset + HEADER.size
        if len(buf) - start < length:
            raise ValueError("truncated packet payload")
        return cls(slot, channel, subchannel, position, bytes(buf[start : start + length])), start + length


def write_trace(fh: BinaryIO | str | Path, packets: Iterable[CodedPacket]) -> None:
    if isinstance(fh, (str, Path)):
        with open(fh, "wb") as out:
            write_trace(out, packets)
        return
    for pkt in packets:
        fh.write(pkt.to_bytes())


def read_trace(fh: BinaryIO | str | Path) -> list[CodedPacket]:
    if isinstance(fh, (str, Path)):
        with open(fh, "rb") as src:
            return read_trace(src)
    buf = fh.read()
    packets, offset = [], 0
    while offset < len(buf):
        pkt, offset = CodedPacket.from_bytes(buf, offset)
        packets.append(pkt)
    return packets


def _stream(config: SystemConfig, *key: int) -> np.random.Generator:
    # Philox is counter-based; the seed sequence hashes (seed, key...) into its key
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([config.seed, *key])))


def segment_size(config: SystemConfig) -> int:
    return config.lam * config.k * config.payload_bytes


def segment_content(content: bytes, config: SystemConfig) -> list[Segment]:
    """Cut content into ``n`` segments of ``lam`` subsegments, zero-padding the tail.

    Content longer than ``n`` segments is rejected; keep ``len(content)`` to undo
    the padding with :func:`reassemble`.
    """
    if not content:
        raise EmptyContent("nothing to segment")
    size = segment_size(config)
    total = config.n * size
    if len(content) > total:
        raise ValueError(f"content of {len(content)} bytes exceeds {config.n} segments of {size}")
    padded = bytes(content) + bytes(total - len(content))
    sub = config.k * config.payload_bytes
    segments = []
    for i in range(config.n):
        chunk = padded[i * size : (i + 1) * size]
        subs = tuple(chunk[x * sub : (x + 1) * sub] for x in range(config.lam))
        segments.append(Segment(i + 1, subs, config.payload_bytes))
    return segments


def reassemble(segments: Sequence[Segment], length: int) -> bytes:
    return b"".join(b"".join(s.subsegments) for s in segments)[:length]


def synthetic_content(config: SystemConfig) -> bytes:
    """Seeded random bytes filling all ``n`` segments exactly."""
    rng = _stream(config, CONTENT_STREAM)
    return rng.integers(0, 256, size=config.n * segment_size(config), dtype=np.uint8).tobytes()


def _random_rows(rng: np.random.Generator, count: int, cols: int) -> list[int]:
    bits = rng.integers(0, 2, size=(count, cols), dtype=np.uint8)
    packed = np.packbits(bits, axis=1, bitorder="little")
    return [int.from_bytes(row.tobytes(), "little") for row in packed]


def _parity_columns(rng: np.random.Generator, checks: int, cols: int) -> list[int]:
    """Columns of the parity block: distinct, weight >= 2 when the space allows it.

    With ``checks`` parity rows, any erasure pattern whose parity-check columns
    are independent is recoverable; distinct nonzero columns make every double
    erasure recoverable.
    """
    space = (1 << checks) - 1
    preferred = [v for v in range(1, space + 1) if checks == 1 or v & (v - 1)]
    if len(preferred) >= cols:
        picks = rng.choice(len(preferred), size=cols, replace=False)
        return [preferred[int(i)] for i in picks]
    extra = rng.integers(1, space + 1, size=cols - len(preferred))
    cols_out = preferred + [int(v) for v in extra]
    order = rng.permutation(len(cols_out))
    return [cols_out[int(i)] for i in order]


def _combine(rows: Sequence[int], mask: int) -> int:
    out, j = 0, 0
    while mask:
        if mask & 1:
            out ^= rows[j]
        mask >>= 1
        j += 1
    return out


def gen_coding_plan(
    slot: int, config: SystemConfig, scheduled: Sequence[int] | None = None
) -> CodingPlan:
    """Coding matrix for absolute ``slot``, a pure function of ``(config.seed, slot)``.

    Content rows are uniform random bits, redrawn until the content block is
    invertible (identity when ``config.systematic``). Redundancy rows are parity
    combinations of the content rows, so every single lost row is recoverable
    and the code's erasure behaviour does not depend on the content block.
    ``scheduled`` names the M segments sent in the slot; defaults to 1..M.
    """
    lam, M, R = config.lam, config.M, config.R
    size = lam * M
    segs = tuple(scheduled) if scheduled is not None else tuple(range(1, M + 1))
    if len(segs) != M:
        raise PlanMismatch(f"expected {M} scheduled segments, got {len(segs)}")
    column_labels = tuple((s, x) for s in segs for x in range(1, lam + 1))
    row_labels = tuple((m, mu) for m in range(1, M + R + 1) for mu in range(1, lam + 1))
    rng = _stream(config, PLAN_STREAM, slot)

    if config.systematic:
        content = [1 << j for j in range(size)]
    else:
        for _ in range(MAX_REDRAWS):
            content = _random_rows(rng, size, size)
            if rank(BitMatrix(size, size, content)) == size:
                break
        else:
            raise GenerationExhausted("no invertible content block after redraws")

    checks = lam * R
    redundancy: list[int] = []
    if checks:
        # duplicates are unavoidable once there are more rows than nonzero patterns
        allow_dup = lam * (M + R) > (1 << size) - 1
        for _ in range(MAX_REDRAWS):
            pcols = _parity_columns(rng, checks, size)
            parity_rows = [sum(((c >> j) & 1) << i for i, c in enumerate(pcols)) for j in range(checks)]
            redundancy = [_combine(content, p) for p in parity_rows]
            if any(r == 0 for r in redundancy):
                continue
            if allow_dup or len(set(content + redundancy)) == size + checks:
                break
        else:
            raise GenerationExhausted("redundancy rows kept colliding")

    matrix = BitMatrix(lam * (M + R), size, content + redundancy)
    return CodingPlan(slot, matrix, column_labels, row_labels)


def transmission_order(config: SystemConfig, slot: int, count: int) -> np.ndarray:
    return _stream(config, ORDER_STREAM, slot).permutation(count)


def encode_slot(
    slot: int,
    schedule: Schedule,
    segments: Sequence[Segment],
    plan: CodingPlan,
    config: SystemConfig,
) -> list[CodedPacket]:
    """All ``lam*(M+R)*k`` coded packets of ``slot`` in randomized send order."""
    if plan.slot != slot:
        raise PlanMismatch(f"plan is for slot {plan.slot}, not {slot}")
    scheduled = schedule.slots[slot]
    expected = tuple((s, x) for s in scheduled for x in range(1, config.lam + 1))
    if plan.column_labels != expected:
        raise PlanMismatch(f"plan columns {plan.column_labels} != scheduled {expected}")

    k, pb = config.k, config.payload_bytes
    # data[c] holds subsegment c as k packets of pb bytes
    data = np.stack(
        [
            np.frombuffer(segments[s - 1].subsegments[x - 1], dtype=np.uint8).reshape(k, pb)
            for s, x in plan.column_labels
        ]
    )
    cols = plan.matrix.cols
    packets = []
    for r, (channel, subchannel) in enumerate(plan.row_labels):
        mask = np.array([(plan.matrix.data[r] >> j) & 1 for j in range(cols)], dtype=bool)
        coded = np.bitwise_xor.reduce(data[mask], axis=0) if mask.any() else np.zeros((k, pb), np.uint8)
        for p in range(k):
            packets.append(CodedPacket(slot, channel, subchannel, p, coded[p].tobytes()))
    order = transmission_order(config, slot, len(packets))
    return [packets[i] for i in order]
