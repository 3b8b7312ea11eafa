"""CSV readers and writers.

Schemas (header line required, comma separated):

* prices     ``date,instrument,close``
* returns    ``date,instrument,return``
* cashflows  ``time_years,amount``
* curves     ``date,tenor_years,zero_rate``
* quotes     ``date,option_id,underlying,strike,expiry,kind,close``

Dates are ISO-8601 (``YYYY-MM-DD``). Floats are written with ``repr`` so a
write/read round trip is exact. A reader either returns fully validated
data or raises :class:`~xdalm.exceptions.SchemaError`.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .._validation import ReturnPanel
from ..exceptions import SchemaError
from ..liability import CashflowSchedule, DiscountCurve

PRICE_HEADER = ("date", "instrument", "close")
RETURN_HEADER = ("date", "instrument", "return")
CASHFLOW_HEADER = ("time_years", "amount")
CURVE_HEADER = ("date", "tenor_years", "zero_rate")
QUOTE_HEADER = ("date", "option_id", "underlying", "strike", "expiry", "kind", "close")


@dataclass(frozen=True)
class PriceTable:
    dates: np.ndarray  # datetime64[D], strictly increasing
    instruments: tuple
    closes: np.ndarray  # len(dates) x len(instruments)
    currency: str = "USD"

    def to_returns(self) -> ReturnPanel:
        """Close-to-close fractional returns, stamped with the later date."""
        rets = self.closes[1:] / self.closes[:-1] - 1.0
        return ReturnPanel(self.instruments, rets, self.dates[1:])

    def column(self, instrument) -> np.ndarray:
        return self.closes[:, self.instruments.index(instrument)]


@dataclass(frozen=True)
class OptionQuote:
    date: np.datetime64
    option_id: str
    underlying: str
    strike: float
    expiry: np.datetime64
    kind: str
    close: float


def _fmt(x: float) -> str:
    return repr(float(x))


def _rows(path, header):
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise SchemaError(f"{path} is empty", line=1) from None
        if tuple(h.strip() for h in first) != header:
            raise SchemaError(f"expected header {','.join(header)}, got {','.join(first)}", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise SchemaError(f"expected {len(header)} fields, got {len(row)}", line=lineno)
            yield lineno, [cell.strip() for cell in row]


def _date(text, lineno):
    try:
        return np.datetime64(text, "D")
    except ValueError:
        raise SchemaError(f"unparseable date {text!r}", line=lineno) from None


def _float(text, lineno, what, positive=False):
    try:
        value = float(text)
    except ValueError:
        raise SchemaError(f"{what} {text!r} is not a number", line=lineno) from None
    if not math.isfinite(value) or (positive and value <= 0):
        raise SchemaError(f"{what} must be {'positive and ' if positive else ''}finite, got {text}", line=lineno)
    return value


def _long_table(path, header, positive):
    cells = {}
    order = []
    for lineno, (d, inst, v) in _rows(path, header):
        key = (_date(d, lineno), inst)
        if key in cells:
            raise SchemaError(f"duplicate row for {inst} on {d}", line=lineno)
        cells[key] = _float(v, lineno, header[2], positive=positive)
        order.append(key[0])
    if not cells:
        raise SchemaError(f"{path} has no data rows")
    file_dates = np.array(order)
    if np.any(file_dates[1:] < file_dates[:-1]):
        warnings.warn(f"{path}: rows are not in date order; sorted", stacklevel=3)
    dates = np.unique(file_dates)
    instruments = tuple(dict.fromkeys(inst for _, inst in cells))  # first-appearance order
    missing = [f"{inst}@{d}" for d in dates for inst in instruments if (d, inst) not in cells]
    if missing:
        shown = ", ".join(missing[:20]) + (" ..." if len(missing) > 20 else "")
        raise SchemaError(f"missing instrument/date cells: {shown}")
    values = np.array([[cells[(d, inst)] for inst in instruments] for d in dates])
    return dates, instruments, values


def load_price_table(path, currency="USD") -> PriceTable:
    dates, instruments, closes = _long_table(path, PRICE_HEADER, positive=True)
    if dates.size < 2:
        raise SchemaError("need at least two dates to form returns")
    return PriceTable(dates, instruments, closes, currency)


def load_prices(path) -> ReturnPanel:
    """Read a price CSV and convert it to close-to-close returns."""
    return load_price_table(path).to_returns()


def load_returns(path) -> ReturnPanel:
    dates, instruments, values = _long_table(path, RETURN_HEADER, positive=False)
    if dates.size < 2:
        raise SchemaError("need at least two periods of returns")
    return ReturnPanel(instruments, values, dates)


def load_cashflows(path) -> CashflowSchedule:
    times, amounts = [], []
    for lineno, (t, a) in _rows(path, CASHFLOW_HEADER):
        times.append(_float(t, lineno, "time_years", positive=True))
        amounts.append(_float(a, lineno, "amount"))
        if amounts[-1] < 0:
            raise SchemaError("amount must be non-negative", line=lineno)
        if len(times) > 1 and times[-1] <= times[-2]:
            raise SchemaError("time_years must be strictly increasing", line=lineno)
    try:
        return CashflowSchedule(np.array(times), np.array(amounts))
    except ValueError as exc:
        raise SchemaError(str(exc)) from None


def load_curves(path) -> list[DiscountCurve]:
    pillars = {}
    for lineno, (d, tenor, rate) in _rows(path, CURVE_HEADER):
        date = _date(d, lineno)
        tenor = _float(tenor, lineno, "tenor_years", positive=True)
        curve = pillars.setdefault(date, {})
        if tenor in curve:
            raise SchemaError(f"duplicate tenor {tenor} on {d}", line=lineno)
        curve[tenor] = _float(rate, lineno, "zero_rate")
    if not pillars:
        raise SchemaError(f"{path} has no data rows")
    curves = []
    for date in sorted(pillars):
        tenors = sorted(pillars[date])
        if len(tenors) < 2:
            raise SchemaError(f"curve on {date} has fewer than 2 pillars")
        curves.append(DiscountCurve(np.array(tenors), np.array([pillars[date][t] for t in tenors]), date))
    return curves


def load_option_quotes(path) -> list[OptionQuote]:
    quotes, seen = [], set()
    for lineno, (d, oid, und, strike, expiry, kind, close) in _rows(path, QUOTE_HEADER):
        date = _date(d, lineno)
        if (date, oid) in seen:
            raise SchemaError(f"duplicate quote for {oid} on {d}", line=lineno)
        seen.add((date, oid))
        if kind not in ("call", "put"):
            raise SchemaError(f"kind must be call or put, got {kind!r}", line=lineno)
        quotes.append(
            OptionQuote(
                date,
                oid,
                und,
                _float(strike, lineno, "strike", positive=True),
                _date(expiry, lineno),
                kind,
                _float(close, lineno, "close"),
            )
        )
    if not quotes:
        raise SchemaError(f"{path} has no data rows")
    quotes.sort(key=lambda q: (q.date, q.option_id))
    return quotes


def _write(path, header, rows):
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_price_table(table: PriceTable, path) -> None:
    _write(
        path,
        PRICE_HEADER,
        ((str(d), inst, _fmt(table.closes[i, j])) for i, d in enumerate(table.dates) for j, inst in enumerate(table.instruments)),
    )


def write_returns(panel: ReturnPanel, path) -> None:
    _write(
        path,
        RETURN_HEADER,
        ((str(d), a, _fmt(panel.matrix[i, j])) for i, d in enumerate(panel.timestamps) for j, a in enumerate(panel.assets)),
    )


def write_cashflows(schedule: CashflowSchedule, path) -> None:
    _write(path, CASHFLOW_HEADER, ((_fmt(t), _fmt(a)) for t, a in zip(schedule.times, schedule.amounts)))


def write_curves(curves, path) -> None:
    _write(
        path,
        CURVE_HEADER,
        ((str(c.as_of), _fmt(t), _fmt(z)) for c in curves for t, z in zip(c.tenors, c.zero_rates)),
    )


def write_option_quotes(quotes, path) -> None:
    _write(
        path,
        QUOTE_HEADER,
        ((str(q.date), q.option_id, q.underlying, _fmt(q.strike), str(q.expiry), q.kind, _fmt(q.close)) for q in quotes),
    )
