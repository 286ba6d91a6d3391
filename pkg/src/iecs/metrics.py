"""Seeded end-to-end runs, parameter sweeps and theory overlays."""

from __future__ import annotations

import csv
import io
import json
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Sequence

from .channel import Burst, LossModel, Uniform, apply_loss
from .coding import CodedPacket, CodingPlan, encode_slot, gen_coding_plan, segment_content, synthetic_content
from .decoder import DecoderState, SlotReport, decode_slot
from .harmonic import (
    SystemConfig,
    admissible_loss,
    asymptotic_success,
    build_schedule,
    first_slot_success_prob,
)

LOSS_STREAM = 0x4C4F5353


class Server:
    """Broadcast side of one run: content, schedule and lazily encoded slots."""

    def __init__(self, config: SystemConfig, horizon: int | None = None, content: bytes | None = None):
        self.config = config
        self.content = synthetic_content(config) if content is None else content
        self.segments = segment_content(self.content, config)
        self.schedule = build_schedule(config, horizon or 2 * config.n)
        self._plans: dict[int, CodingPlan] = {}
        self._packets: dict[int, list[CodedPacket]] = {}

    def plan(self, slot: int) -> CodingPlan:
        if slot not in self._plans:
            self._plans[slot] = gen_coding_plan(slot, self.config, self.schedule.slots[slot])
        return self._plans[slot]

    def packets(self, slot: int) -> list[CodedPacket]:
        if slot not in self._packets:
            self._packets[slot] = encode_slot(slot, self.schedule, self.segments, self.plan(slot), self.config)
        return self._packets[slot]

    def original(self, label: tuple[int, int, int]) -> bytes:
        seg, sub, pos = label
        return self.segments[seg - 1].packet(sub, pos)


def loss_seed(config: SystemConfig, client: int, slot: int) -> tuple[int, ...]:
    return (config.seed, LOSS_STREAM, client, slot)


def join_offsets(n: int, clients: int) -> list[int]:
    """Evenly spaced joins over one schedule period of ``n`` slots."""
    return [(c * n) // clients for c in range(clients)]


def simulate_client(
    server: Server,
    model: LossModel,
    join_offset: int = 0,
    client: int = 0,
    fec: bool = True,
    max_fec_equations: int | None = None,
    snapshots: list | None = None,
) -> DecoderState:
    """Play one client through all ``n`` slots after joining at ``join_offset``.

    If ``snapshots`` is a list, the decoded label set after each slot is appended.
    """
    config = server.config
    state = DecoderState(config, join_offset=join_offset, fec=fec, max_fec_equations=max_fec_equations)
    for b in range(1, config.n + 1):
        slot = join_offset + b - 1
        survivors = apply_loss(server.packets(slot), model, loss_seed(config, client, slot))
        decode_slot(state, b, survivors, server.plan(slot), server.schedule)
        if snapshots is not None:
            snapshots.append(frozenset(state.decoded))
    return state


@dataclass
class FirstSlotStudy:
    """Position sets seen by fresh clients in their first slot."""

    sets: int
    sufficient: int  # at least lam*M packets arrived
    decoded: int  # every unknown of the set recovered
    deadline_fraction: float  # mean share of segment 1 available at the end of slot 1

    @property
    def sufficient_rate(self) -> float:
        return self.sufficient / self.sets

    @property
    def decoded_rate(self) -> float:
        return self.decoded / self.sets


def first_slot_study(config: SystemConfig, model: LossModel, clients: int = 1) -> FirstSlotStudy:
    """Decode only the first client slot for ``clients`` fresh clients.

    ``sufficient`` counts the sets an ideal (MDS) code would decode; ``decoded``
    counts what the GF(2) decoder actually recovered.
    """
    server = Server(config)
    sets = sufficient = decoded = 0
    deadline = []
    for c, offset in enumerate(join_offsets(config.n, clients)):
        survivors = apply_loss(server.packets(offset), model, loss_seed(config, c, offset))
        counts = [0] * config.k
        for pkt in survivors:
            counts[pkt.position] += 1
        state = DecoderState(config, join_offset=offset, fec=False)
        report = decode_slot(state, 1, survivors, server.plan(offset), server.schedule)
        sets += config.k
        sufficient += sum(c >= config.unknowns for c in counts)
        decoded += report.positions_complete
        deadline.append(report.deadline_met_fraction)
    return FirstSlotStudy(sets, sufficient, decoded, statistics.fmean(deadline))


def recovery_slot(deadline_fractions: Sequence[float]) -> int | None:
    """First b from which every later deadline fraction is 1.0, else None."""
    first = None
    for b, value in enumerate(deadline_fractions, start=1):
        if value >= 1.0:
            if first is None:
                first = b
        else:
            first = None
    return first


@dataclass
class SlotSummary:
    b: int
    deadline_mean: float
    deadline_std: float
    decoded_fraction_mean: float
    decoded_fraction_std: float
    received_fraction: float
    solved_in_slot: float
    solved_via_fec: float
    positions_complete_fraction: float


@dataclass
class RunReport:
    config: SystemConfig
    loss_model: LossModel
    fec: bool
    clients: list[list[SlotReport]] = field(default_factory=list)
    per_slot: list[SlotSummary] = field(default_factory=list)
    decoded_fraction: float = 0.0
    deadline_fraction: float = 0.0
    slots_to_full_recovery: int | None = None
    client_recovery: list[int | None] = field(default_factory=list)
    error: str | None = None


def _summarize(config: SystemConfig, clients: list[list[SlotReport]]) -> list[SlotSummary]:
    content = config.n * config.lam * config.k
    out = []
    for b in range(1, config.n + 1):
        rows = [reports[b - 1] for reports in clients]
        dl = [r.deadline_met_fraction for r in rows]
        dec = [r.decoded_total / content for r in rows]

        def mean(xs):
            return statistics.fmean(xs)

        def std(xs):
            return statistics.pstdev(xs) if len(xs) > 1 else 0.0

        out.append(
            SlotSummary(
                b=b,
                deadline_mean=mean(dl),
                deadline_std=std(dl),
                decoded_fraction_mean=mean(dec),
                decoded_fraction_std=std(dec),
                received_fraction=mean([r.packets_received / r.packets_sent for r in rows]),
                solved_in_slot=mean([r.unknowns_solved_in_slot for r in rows]),
                solved_via_fec=mean([r.unknowns_solved_via_fec for r in rows]),
                positions_complete_fraction=mean([r.positions_complete / config.k for r in rows]),
            )
        )
    return out


@lru_cache(maxsize=8)
def _cached_server(config: SystemConfig) -> Server:
    return Server(config)


def _client_job(args) -> list[SlotReport]:
    config, model, offset, client, fec, cap = args
    state = simulate_client(_cached_server(config), model, offset, client, fec, cap)
    return state.per_slot_stats


def worker_count() -> int:
    raw = os.environ.get("IECS_THREADS")
    if raw:
        return max(1, int(raw))
    return os.cpu_count() or 1


def run_simulation(
    config: SystemConfig,
    model: LossModel,
    clients: int = 1,
    fec: bool = True,
    max_fec_equations: int | None = None,
    workers: int | None = None,
) -> RunReport:
    """Full server -> channel -> decoder pipeline for ``clients`` independent clients.

    Client ``c`` joins at offset ``c*n // clients`` and draws losses from its own
    stream. Results do not depend on ``workers``.
    """
    if clients < 1:
        raise ValueError("need at least one client")
    jobs = [
        (config, model, offset, c, fec, max_fec_equations)
        for c, offset in enumerate(join_offsets(config.n, clients))
    ]
    workers = worker_count() if workers is None else workers
    if workers > 1 and clients > 1:
        with ProcessPoolExecutor(max_workers=min(workers, clients)) as pool:
            per_client = list(pool.map(_client_job, jobs))
    else:
        server = Server(config)
        per_client = [
            simulate_client(server, model, off, c, fec, cap).per_slot_stats
            for _, _, off, c, _, cap in jobs
        ]

    report = RunReport(config, model, fec, clients=per_client)
    report.per_slot = _summarize(config, per_client)
    report.decoded_fraction = report.per_slot[-1].decoded_fraction_mean
    report.deadline_fraction = statistics.fmean(s.deadline_mean for s in report.per_slot)
    report.client_recovery = [recovery_slot([r.deadline_met_fraction for r in c]) for c in per_client]
    report.slots_to_full_recovery = recovery_slot([s.deadline_mean for s in report.per_slot])
    return report


def sweep(
    grid: Sequence[tuple[SystemConfig, LossModel]],
    clients: int = 1,
    fec: bool = True,
    max_fec_equations: int | None = None,
    workers: int | None = None,
) -> list[RunReport]:
    """One :func:`run_simulation` per grid point, in grid order; failures are recorded."""
    if not grid:
        raise ValueError("empty grid")
    reports = []
    for config, model in grid:
        try:
            reports.append(run_simulation(config, model, clients, fec, max_fec_equations, workers))
        except Exception as exc:  # noqa: BLE001 - recorded per point by design
            reports.append(RunReport(config, model, fec, error=f"{type(exc).__name__}: {exc}"))
    return reports


def theory_overlay(report: RunReport) -> list[dict]:
    """Measured deadline fraction next to the closed-form curves, one row per slot."""
    config, model = report.config, report.loss_model
    p_e = model.p_e if isinstance(model, Uniform) else None
    rows = []
    for summary in report.per_slot:
        b = summary.b
        row = {
            "b": b,
            "measured_deadline": summary.deadline_mean,
            "measured_decoded": summary.decoded_fraction_mean,
            "admissible_loss": admissible_loss(config.n, b, config.R, config.lam),
            "first_slot_success": None,
            "asymptotic_success": None,
        }
        if p_e is not None:
            if b == 1:
                row["first_slot_success"] = first_slot_success_prob(config.M, config.R, config.lam, p_e)
            row["asymptotic_success"] = float(asymptotic_success(config.M, config.R, p_e))
        rows.append(row)
    return rows


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def write_csv(fh, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])


def model_fields(model: LossModel) -> dict:
    if isinstance(model, Uniform):
        return {"loss": "uniform", **asdict(model)}
    return {"loss": "burst", **asdict(model)}


REPORT_COLUMNS = (
    "lambda",
    "M",
    "R",
    "n",
    "loss",
    "p_e",
    "fec",
    "b",
    "deadline_fraction",
    "deadline_std",
    "decoded_fraction",
    "decoded_std",
    "received_fraction",
    "solved_in_slot",
    "solved_via_fec",
    "admissible_loss",
    "first_slot_success",
    "asymptotic_success",
    "clients",
    "error",
)


def reports_to_csv(reports: Sequence[RunReport]) -> str:
    """One row per (grid point, slot); failed points get a single row carrying the error."""
    buf = io.StringIO()
    rows = []
    for rep in reports:
        cfg = rep.config
        p_e = rep.loss_model.p_e if isinstance(rep.loss_model, Uniform) else None
        loss = model_fields(rep.loss_model)["loss"]
        head = [cfg.lam, cfg.M, cfg.R, cfg.n, loss, p_e, rep.fec]
        if rep.error:
            rows.append(head + [None] * 12 + [rep.error])
            continue
        for summary, theory in zip(rep.per_slot, theory_overlay(rep)):
            rows.append(
                head
                + [
                    summary.b,
                    summary.deadline_mean,
                    summary.deadline_std,
                    summary.decoded_fraction_mean,
                    summary.decoded_fraction_std,
                    summary.received_fraction,
                    float(summary.solved_in_slot),
                    float(summary.solved_via_fec),
                    theory["admissible_loss"],
                    theory["first_slot_success"],
                    theory["asymptotic_success"],
                    len(rep.clients),
                    None,
                ]
            )
    write_csv(buf, REPORT_COLUMNS, rows)
    return buf.getvalue()


def manifest(reports: Sequence[RunReport], extra: dict | None = None) -> dict:
    return {
        "runs": [
            {
                "config": asdict(rep.config),
                "loss_model": model_fields(rep.loss_model),
                "fec": rep.fec,
                "clients": len(rep.clients),
                "slots_to_full_recovery": rep.slots_to_full_recovery,
                "deadline_fraction": rep.deadline_fraction,
                "decoded_fraction": rep.decoded_fraction,
                "error": rep.error,
            }
            for rep in reports
        ],
        **(extra or {}),
    }


def write_outputs(out_dir: Path, name: str, reports: Sequence[RunReport], extra: dict | None = None) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{name}.csv"
    path.write_text(reports_to_csv(reports), encoding="utf-8")
    (out_dir / f"{name}.manifest.json").write_text(
        json.dumps(manifest(reports, extra), indent=2, sort_keys=True), encoding="utf-8"
    )
    return path


__all__ = [
    "Burst",
    "RunReport",
    "Server",
    "SlotSummary",
    "Uniform",
    "join_offsets",
    "recovery_slot",
    "reports_to_csv",
    "run_simulation",
    "simulate_client",
    "sweep",
    "theory_overlay",
    "write_outputs",
]
