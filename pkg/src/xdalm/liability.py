"""Fixed-cashflow liabilities valued on zero curves.

Zero rates are continuously compounded and linearly interpolated, with
flat extrapolation beyond the first and last pillars.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._validation import ReturnSeries
from .exceptions import AlignmentError, InvalidInputError

DAYS_PER_YEAR = 365.25


@dataclass(frozen=True)
class CashflowSchedule:
    times: np.ndarray
    amounts: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).ravel()
        amounts = np.asarray(self.amounts, dtype=float).ravel()
        if times.size == 0:
            raise InvalidInputError("cashflow schedule is empty")
        if times.shape != amounts.shape:
            raise InvalidInputError("times and amounts differ in length")
        if np.any(times <= 0) or np.any(np.diff(times) <= 0):
            raise InvalidInputError("cashflow times must be positive and strictly increasing")
        if np.any(amounts < 0) or not np.any(amounts > 0):
            raise InvalidInputError("amounts must be non-negative with at least one positive")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "amounts", amounts)

    def scaled(self, factor: float) -> "CashflowSchedule":
        return CashflowSchedule(self.times, self.amounts * factor)


@dataclass(frozen=True)
class DiscountCurve:
    tenors: np.ndarray
    zero_rates: np.ndarray
    as_of: np.datetime64 | None = None

    def __post_init__(self):
        tenors = np.asarray(self.tenors, dtype=float).ravel()
        rates = np.asarray(self.zero_rates, dtype=float).ravel()
        if tenors.size < 2 or tenors.shape != rates.shape:
            raise InvalidInputError("a curve needs at least 2 pillars with one rate each")
        if np.any(np.diff(tenors) <= 0):
            raise InvalidInputError("curve tenors must be strictly increasing")
        if not np.all(np.isfinite(rates)):
            raise InvalidInputError("curve contains non-finite rates")
        object.__setattr__(self, "tenors", tenors)
        object.__setattr__(self, "zero_rates", rates)
        if self.as_of is not None:
            object.__setattr__(self, "as_of", np.datetime64(self.as_of, "D"))

    def zero_rate(self, t):
        return np.interp(t, self.tenors, self.zero_rates)

    def discount(self, t):
        t = np.asarray(t, dtype=float)
        return np.exp(-self.zero_rate(t) * t)

    def shifted(self, bp: float) -> "DiscountCurve":
        return DiscountCurve(self.tenors, self.zero_rates + bp * 1e-4, self.as_of)


def npv(schedule: CashflowSchedule, curve: DiscountCurve) -> float:
    return float(np.sum(schedule.amounts * curve.discount(schedule.times)))


@dataclass(frozen=True)
class Revaluation:
    dates: np.ndarray
    npv: np.ndarray
    paid: np.ndarray  # cash paid out since the previous date

    @property
    def changes(self) -> np.ndarray:
        """Per-period change in liability value, paid cashflows included."""
        return np.diff(self.npv) + self.paid[1:]

    @property
    def returns(self) -> np.ndarray:
        return self.changes / self.npv[:-1]


def revalue(schedule: CashflowSchedule, curves: Sequence[DiscountCurve], roll: bool = True) -> Revaluation:
    """Value the schedule on each dated curve.

    With ``roll=True`` cashflow times shrink with the calendar distance from
    the first curve date, and cashflows falling due are counted as paid.
    """
    if len(curves) < 2:
        raise InvalidInputError("at least two dated curves are needed")
    if roll and any(c.as_of is None for c in curves):
        raise AlignmentError("rolling valuation needs dated curves")
    dates = np.array([c.as_of for c in curves]) if curves[0].as_of is not None else np.arange(len(curves))
    if np.any(dates[1:] <= dates[:-1]):
        raise AlignmentError("curve dates must be strictly increasing without duplicates")

    values = np.empty(len(curves))
    paid = np.zeros(len(curves))
    paid_mask = np.zeros(schedule.times.size, dtype=bool)
    for j, curve in enumerate(curves):
        if roll:
            elapsed = (curve.as_of - curves[0].as_of).astype(int) / DAYS_PER_YEAR
            remaining = schedule.times - elapsed
        else:
            remaining = schedule.times
        alive = remaining > 0
        newly_paid = ~alive & ~paid_mask
        paid[j] = schedule.amounts[newly_paid].sum()
        paid_mask |= newly_paid
        values[j] = np.sum(schedule.amounts[alive] * curve.discount(remaining[alive]))
    return Revaluation(dates, values, paid)


def liability_returns(schedule: CashflowSchedule, curve_history: Sequence[DiscountCurve], roll: bool = True) -> ReturnSeries:
    """Fractional NPV changes between consecutive curve dates."""
    rv = revalue(schedule, curve_history, roll)
    return ReturnSeries(rv.returns, rv.dates[1:])
