"""Client side: per-position GF(2) solving, implicit redundancy and feedback error correction.

Unknowns are labelled ``(segment, subsegment, position)``. Each packet position
is an independent system because the server codes packet-wise.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .coding import CodedPacket, CodingPlan, PlanMismatch
from .gf2 import ConflictingKnown, LinearSystem, eliminate, inject_many
from .harmonic import Schedule, SystemConfig

Label = tuple[int, int, int]


@dataclass
class SlotReport:
    b: int
    packets_sent: int
    packets_received: int
    unknowns_total: int
    unknowns_solved_in_slot: int
    unknowns_solved_via_fec: int
    deadline_met_fraction: float
    positions_complete: int = 0  # position sets of this slot fully known after its own decode
    decoded_total: int = 0  # content packets known at the end of the slot


@dataclass
class DecoderState:
    config: SystemConfig
    join_offset: int = 0
    fec: bool = True
    max_fec_equations: int | None = None
    decoded: dict[Label, bytes] = field(default_factory=dict)
    fec_buffer: dict[tuple[int, int], LinearSystem] = field(default_factory=dict)
    per_slot_stats: list[SlotReport] = field(default_factory=list)
    discarded_equations: int = 0

    def commit(self, label: Label, payload: bytes) -> bool:
        """Write-once store; returns True if ``label`` is new."""
        old = self.decoded.get(label)
        if old is None:
            self.decoded[label] = payload
            return True
        if old != payload:
            raise ConflictingKnown(f"{label} decoded twice with different payloads")
        return False

    def buffered_equations(self) -> int:
        return sum(len(s) for s in self.fec_buffer.values())


def _check_plan(plan: CodingPlan, schedule: Schedule, abs_slot: int, config: SystemConfig):
    if plan.slot != abs_slot:
        raise PlanMismatch(f"plan for slot {plan.slot} used in slot {abs_slot}")
    expected = tuple((s, x) for s in schedule.slots[abs_slot] for x in range(1, config.lam + 1))
    if plan.column_labels != expected:
        raise PlanMismatch("plan columns do not match the schedule")


def _commit_solved(state: DecoderState, sys: LinearSystem) -> int:
    fresh = 0
    for label, payload in sys.solved.items():
        fresh += state.commit(label, payload)
    return fresh


def _evict(state: DecoderState) -> None:
    cap = state.max_fec_equations
    if cap is None:
        return
    for key in sorted(state.fec_buffer):
        if state.buffered_equations() <= cap:
            break
        state.discarded_equations += len(state.fec_buffer.pop(key))


def ingest_slot(
    state: DecoderState,
    b: int,
    survivors: Iterable[CodedPacket],
    plan: CodingPlan,
    schedule: Schedule,
    config: SystemConfig,
) -> DecoderState:
    """Decode client slot ``b`` from the packets that made it through.

    Already-decoded packets of the scheduled segments are injected as knowns
    before elimination. Leftover equations go to the FEC buffer (or are dropped
    when FEC is off). Appends a :class:`SlotReport`; call :func:`fec_retry`
    afterwards to finish the slot.
    """
    abs_slot = state.join_offset + b - 1
    _check_plan(plan, schedule, abs_slot, config)
    lam = config.lam
    by_position: dict[int, list[CodedPacket]] = defaultdict(list)
    received = 0
    for pkt in survivors:
        if pkt.slot != abs_slot:
            raise PlanMismatch(f"packet from slot {pkt.slot} fed into slot {abs_slot}")
        by_position[pkt.position].append(pkt)
        received += 1

    solved_here = 0
    complete = 0
    for p in range(config.k):
        labels = [(s, x, p) for s, x in plan.column_labels]
        sys = LinearSystem(labels, config.payload_bytes)
        for pkt in by_position.get(p, ()):
            row = plan.matrix.data[plan.row_index(pkt.channel, pkt.subchannel, lam)]
            sys.add_equation(row, pkt.payload)
        inject_many(sys, [(lab, state.decoded[lab]) for lab in labels if lab in state.decoded])
        eliminate(sys)
        solved_here += _commit_solved(state, sys)
        if all(lab in state.decoded for lab in labels):
            complete += 1
        if len(sys):
            if state.fec:
                state.fec_buffer[(abs_slot, p)] = sys
            else:
                state.discarded_equations += len(sys)
    _evict(state)

    state.per_slot_stats.append(
        SlotReport(
            b=b,
            packets_sent=config.rows * config.k,
            packets_received=received,
            unknowns_total=config.unknowns * config.k,
            unknowns_solved_in_slot=solved_here,
            unknowns_solved_via_fec=0,
            deadline_met_fraction=0.0,
            positions_complete=complete,
        )
    )
    return state


def fec_retry(state: DecoderState) -> DecoderState:
    """Re-solve buffered equations with everything decoded so far, to a fixed point."""
    newly = 0
    while state.fec_buffer:
        progress = 0
        for key in sorted(state.fec_buffer):
            sys = state.fec_buffer[key]
            knowns = [(lab, state.decoded[lab]) for lab in sys.referenced() if lab in state.decoded]
            if not knowns:
                continue
            inject_many(sys, knowns)
            progress += _commit_solved(state, sys)
            if not len(sys):
                del state.fec_buffer[key]
        newly += progress
        if not progress:
            break
    if state.per_slot_stats:
        state.per_slot_stats[-1].unknowns_solved_via_fec += newly
    return state


def playback_quality(state: DecoderState, b: int) -> float:
    """Share of segment ``b``'s packets decoded right now."""
    config = state.config
    if b < 1 or b > config.n:
        raise ValueError(f"b must lie in 1..{config.n}")
    total = config.lam * config.k
    have = sum(
        (b, x, p) in state.decoded for x in range(1, config.lam + 1) for p in range(config.k)
    )
    return have / total


def finish_slot(state: DecoderState, b: int) -> SlotReport:
    """Run FEC (if enabled) and stamp the deadline metric for slot ``b``."""
    if state.fec:
        fec_retry(state)
    report = state.per_slot_stats[-1]
    report.deadline_met_fraction = playback_quality(state, b)
    report.decoded_total = len(state.decoded)
    return report


def decode_slot(
    state: DecoderState,
    b: int,
    survivors: Sequence[CodedPacket],
    plan: CodingPlan,
    schedule: Schedule,
) -> SlotReport:
    ingest_slot(state, b, survivors, plan, schedule, state.config)
    return finish_slot(state, b)
