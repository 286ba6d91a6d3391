"""Lossy delivery: independent (uniform) losses and a two-state Gilbert-Elliott chain."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, TypeVar, Union

import numpy as np

T = TypeVar("T")


class DegenerateChain(ValueError):
    pass


def _check_prob(name, value):
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class Uniform:
    p_e: float

    def __post_init__(self):
        _check_prob("p_e", self.p_e)


@dataclass(frozen=True)
class Burst:
    """Gilbert-Elliott chain stepped once per transmitted packet."""

    p_good_to_bad: float
    p_bad_to_good: float
    loss_good: float
    loss_bad: float

    def __post_init__(self):
        for name in ("p_good_to_bad", "p_bad_to_good", "loss_good", "loss_bad"):
            _check_prob(name, getattr(self, name))

    @property
    def bad_fraction(self) -> float:
        total = self.p_good_to_bad + self.p_bad_to_good
        if total == 0:
            raise DegenerateChain("chain never changes state")
        return self.p_good_to_bad / total


LossModel = Union[Uniform, Burst]


def stationary_loss(model: LossModel) -> float:
    if isinstance(model, Uniform):
        return model.p_e
    pi_bad = model.bad_fraction
    return (1 - pi_bad) * model.loss_good + pi_bad * model.loss_bad


def loss_mask(count: int, model: LossModel, rng: np.random.Generator) -> np.ndarray:
    """Boolean array, True where the packet at that send position is lost."""
    if isinstance(model, Uniform):
        return rng.random(count) < model.p_e
    draws = rng.random((count + 1, 2))
    try:
        bad = bool(draws[0, 0] < model.bad_fraction)
    except DegenerateChain:
        bad = False
    lost = np.empty(count, dtype=bool)
    g2b, b2g = model.p_good_to_bad, model.p_bad_to_good
    lg, lb = model.loss_good, model.loss_bad
    for i, (u_loss, u_step) in enumerate(draws[1:].tolist()):
        lost[i] = u_loss < (lb if bad else lg)
        if bad:
            bad = not u_step < b2g
        else:
            bad = u_step < g2b
    return lost


def apply_loss(packets: Sequence[T], model: LossModel, seed) -> list[T]:
    """Survivors of ``packets`` (in send order) under ``model``.

    ``seed`` is anything ``numpy.random.default_rng`` accepts, typically a tuple
    of ints naming the run, client and slot.
    """
    rng = np.random.default_rng(seed)
    lost = loss_mask(len(packets), model, rng)
    return [p for p, gone in zip(packets, lost) if not gone]
