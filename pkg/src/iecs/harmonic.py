"""Harmonic-broadcast arithmetic, schedule construction and closed-form bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

EULER_GAMMA = 0.5772156649015329

# exact binomial tails up to this many trials, log-space beyond
EXACT_TRIALS_LIMIT = 256
# float p_e is snapped to a rational with at most this denominator
SNAP_DENOMINATOR = 10**6


class ScheduleInfeasible(RuntimeError):
    """EDF greedy missed a deadline; retry with a smaller ``n``."""


@dataclass(frozen=True)
class SystemConfig:
    """All parameters of one IEC-S deployment.

    ``lam`` is the number of subchannels per channel (``lambda`` is reserved).
    """

    n: int
    M: int
    R: int = 0
    lam: int = 1
    k: int = 8
    payload_bytes: int = 16
    content_rate: float = 2e6
    content_duration: float = 7200.0
    seed: int = 0
    systematic: bool = False

    def __post_init__(self):
        for name in ("n", "M", "lam", "k", "payload_bytes"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if not isinstance(self.R, int) or self.R < 0:
            raise ValueError(f"R must be a non-negative integer, got {self.R!r}")
        if self.content_rate <= 0 or self.content_duration <= 0:
            raise ValueError("content_rate and content_duration must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        if harmonic_exceeds(self.n, self.M):
            raise ValueError(f"H_{self.n} exceeds M={self.M}; harmonic allocation infeasible")

    @property
    def I(self) -> int:
        return self.M + self.R

    @property
    def slot_duration(self) -> float:
        return self.content_duration / self.n

    @property
    def rows(self) -> int:
        return self.lam * self.I

    @property
    def unknowns(self) -> int:
        return self.lam * self.M


@dataclass
class Schedule:
    periods: tuple[int, ...]
    slots: list[tuple[int, ...]]  # slots[t] = segments sent in absolute slot t (0-based)

    @property
    def horizon(self) -> int:
        return len(self.slots)


@dataclass(frozen=True)
class ScheduleCheck:
    ok: bool
    segment: int | None = None
    join_offset: int | None = None

    def __bool__(self):
        return self.ok


_H_EXACT = [Fraction(0)]


def harmonic_fraction(n: int) -> Fraction:
    """Exact H_n as a rational. H_0 is 0."""
    if n < 0:
        raise ValueError("n must be non-negative")
    while len(_H_EXACT) <= n:
        _H_EXACT.append(_H_EXACT[-1] + Fraction(1, len(_H_EXACT)))
    return _H_EXACT[n]


def harmonic_exceeds(n: int, M: int) -> bool:
    """H_n > M, decided exactly when floats are too close to call."""
    h = harmonic_number(n)
    if abs(h - M) < 1e-9:
        return harmonic_fraction(n) > M
    return h > M


def harmonic_number(n: int) -> float:
    """H_n by direct summation."""
    if n < 1:
        raise ValueError("harmonic_number needs n >= 1")
    return math.fsum(1.0 / k for k in range(1, n + 1))


def _harmonic0(n: int) -> float:
    return 0.0 if n == 0 else harmonic_number(n)


def max_segments(M: int) -> int:
    """Largest n with H_n <= M."""
    if M < 1:
        raise ValueError("M must be >= 1")
    n, h = 1, 1.0
    while True:
        nxt = h + 1.0 / (n + 1)
        if abs(nxt - M) < 1e-9:
            # too close for floats, settle it exactly
            if harmonic_fraction(n + 1) > M:
                return n
        elif nxt > M:
            return n
        n, h = n + 1, nxt


def min_bandwidth(n: int, content_rate: float) -> float:
    if content_rate <= 0:
        raise ValueError("content_rate must be positive")
    return harmonic_number(n) * content_rate


def build_schedule(config: SystemConfig, horizon: int) -> Schedule:
    """Earliest-deadline-first harmonic schedule with ``config.M`` segments per slot.

    Segment i has period i and initial deadline slot i (1-based). Each slot
    takes the M segments with the earliest deadline; ties go to the segment
    sent least recently, then to the lower index.
    """
    n, M = config.n, config.M
    if n < M:
        raise ValueError(f"need at least M={M} segments to fill every slot, got n={n}")
    if horizon < n:
        raise ValueError("horizon must cover at least n slots")
    periods = tuple(range(1, n + 1))
    deadline = {i: i for i in periods}
    last = {i: 0 for i in periods}
    slots = []
    for t in range(1, horizon + 1):
        order = sorted(periods, key=lambda i: (deadline[i], last[i], i))
        chosen, rest = order[:M], order[M:]
        missed = [i for i in rest if deadline[i] <= t]
        if missed:
            raise ScheduleInfeasible(f"segment {missed[0]} misses its deadline in slot {t}")
        for i in chosen:
            last[i] = t
            deadline[i] = t + periods[i - 1]
        slots.append(tuple(sorted(chosen)))
    schedule = Schedule(periods=periods, slots=slots)
    check = verify_schedule(schedule, n)
    if not check:
        raise ScheduleInfeasible(
            f"window violated for segment {check.segment} at join offset {check.join_offset}"
        )
    return schedule


def verify_schedule(s: Schedule, n: int) -> ScheduleCheck:
    """Check that every segment i shows up in each window of i slots after a join.

    Join offsets run over ``[0, horizon - n)``; a client joining at offset φ
    needs segment i somewhere in absolute slots φ .. φ+i-1 (0-based).
    """
    horizon = s.horizon
    # next_seen[i][t] = first slot >= t carrying segment i
    next_seen = {}
    for i in range(1, n + 1):
        nxt = [horizon] * (horizon + 1)
        for t in range(horizon - 1, -1, -1):
            nxt[t] = t if i in s.slots[t] else nxt[t + 1]
        next_seen[i] = nxt
    offsets = range(horizon - n) if horizon > n else range(1 if horizon == n else 0)
    for phi in offsets:
        for i in range(1, n + 1):
            if next_seen[i][phi] > phi + i - 1:
                return ScheduleCheck(False, segment=i, join_offset=phi)
    return ScheduleCheck(True)


def admissible_loss(n: int, b: int, R: int, lam: int = 1, exact: bool = False):
    """Largest per-packet loss probability that still lets slot ``b`` decode.

    ``(H_{b-1} + R) / (H_n + R)``; the subchannel count cancels out.
    """
    if b < 1:
        raise ValueError("b must be >= 1")
    if b > n:
        raise ValueError("b must not exceed n")
    if R < 0 or lam < 1:
        raise ValueError("need R >= 0 and lam >= 1")
    if exact:
        return (harmonic_fraction(b - 1) + R) / (harmonic_fraction(n) + R)
    return (_harmonic0(b - 1) + R) / (harmonic_number(n) + R)


def snap_probability(p) -> Fraction:
    if isinstance(p, Fraction):
        return p
    return Fraction(p).limit_denominator(SNAP_DENOMINATOR)


def binomial_tail(trials: int, threshold: int, p_success) -> float:
    """P[X >= threshold] for X ~ B(trials, p_success), never approximated."""
    if threshold <= 0:
        return 1.0
    if threshold > trials:
        return 0.0
    if trials <= EXACT_TRIALS_LIMIT:
        q = snap_probability(p_success)
        f = 1 - q
        total = sum(
            math.comb(trials, i) * q**i * f ** (trials - i) for i in range(threshold, trials + 1)
        )
        return float(total)
    p = float(p_success)
    if p == 0.0:
        return 0.0
    if p == 1.0:
        return 1.0
    lp, lf = math.log(p), math.log1p(-p)
    lg = math.lgamma(trials + 1)
    terms = [
        lg - math.lgamma(i + 1) - math.lgamma(trials - i + 1) + i * lp + (trials - i) * lf
        for i in range(threshold, trials + 1)
    ]
    top = max(terms)
    return min(1.0, math.exp(top) * math.fsum(math.exp(t - top) for t in terms))


def first_slot_success_prob(M: int, R: int, lam: int, p_e) -> float:
    """Probability that at least lam*M of the lam*(M+R) coded packets of a set arrive."""
    if not 0 <= float(p_e) <= 1:
        raise ValueError("p_e must lie in [0, 1]")
    trials = lam * (M + R)
    if trials <= EXACT_TRIALS_LIMIT:
        return binomial_tail(trials, lam * M, 1 - snap_probability(p_e))
    return binomial_tail(trials, lam * M, 1.0 - float(p_e))


def asymptotic_success(M: int, R: int, p_e) -> Fraction:
    """Limit of :func:`first_slot_success_prob` as the subchannel count grows."""
    if not 0 <= float(p_e) <= 1:
        raise ValueError("p_e must lie in [0, 1]")
    lhs = (1 - snap_probability(p_e)) * (M + R)
    if lhs > M:
        return Fraction(1)
    if lhs == M:
        return Fraction(1, 2)
    return Fraction(0)


def initial_delay(content_duration: float, I: int, R: int) -> float:
    """One slot of buffering when ``I - R`` channels carry content."""
    if I <= R or R < 0:
        raise ValueError("need I > R >= 0")
    return content_duration / max_segments(I - R)


def redundancy_delay_factor(R: int) -> float:
    if R < 0:
        raise ValueError("R must be >= 0")
    return math.exp(R)


def harmonic_log_approx(n: int) -> float:
    """gamma + ln n, the large-n stand-in for H_n."""
    return EULER_GAMMA + math.log(n)


def equivalence_overlay(I: int, R: int) -> list[tuple[int, int, float, float]]:
    """Pair the no-redundancy curve with the R-redundancy curve at equal total channels.

    Returns ``(b_red, b_plain, loss_red, loss_plain)`` where ``b_plain - 1`` is
    ``(b_red - 1) * e**R`` rounded, capped to the plain scheme's segment count.
    """
    n_plain = max_segments(I)
    n_red = max_segments(I - R)
    scale = redundancy_delay_factor(R)
    rows = []
    for b_red in range(1, n_red + 1):
        b_plain = min(n_plain, 1 + round((b_red - 1) * scale))
        rows.append(
            (b_red, b_plain, admissible_loss(n_red, b_red, R), admissible_loss(n_plain, b_plain, 0))
        )
    return rows
