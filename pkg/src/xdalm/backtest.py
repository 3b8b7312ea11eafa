"""Backtest harnesses for liability hedging and option hedging.

Both harnesses produce a :class:`BacktestReport` in which every strategy
obeys ``value[t] - value[t-1] = gross[t] - cost[t]`` where ``gross`` is the
sum of position times price change over the step.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ._validation import ReturnPanel, as_values, check_k, check_lambda
from .allocation import REGIMES, allocate
from .decomposition import fast_ica
from .exceptions import ArbitrageError, InvalidInputError
from .liability import DAYS_PER_YEAR
from .moments import central_moment
from .options import Greeks, OptionSpec, VolParams, bs_greeks, bs_price, implied_vol, option_weight


class InsufficientDataError(InvalidInputError):
    """Raised when a backtest input is shorter than the configuration needs."""


@dataclass(frozen=True)
class BacktestConfig:
    k_list: tuple = (1, 5, 10, 50)
    lam: float = 0.01
    estimation_window: int = 252
    reestimate_every: int | None = None
    cost_rate: float = 0.0
    regime: str = "return-seeking"
    seed: int = 0

    def __post_init__(self):
        ks = tuple(int(k) for k in self.k_list)
        if not ks:
            raise InvalidInputError("k_list must not be empty")
        for k in ks:
            check_k(k)
        if len(set(ks)) != len(ks):
            raise InvalidInputError("k_list has duplicates")
        object.__setattr__(self, "k_list", ks)
        check_lambda(self.lam)
        if int(self.estimation_window) < 30:
            raise InvalidInputError("estimation_window must be at least 30 periods")
        if self.reestimate_every is not None and int(self.reestimate_every) < 1:
            raise InvalidInputError("reestimate_every must be a positive number of periods")
        if not (self.cost_rate >= 0 and math.isfinite(self.cost_rate)):
            raise InvalidInputError("cost_rate must be non-negative")
        if self.regime not in REGIMES:
            raise InvalidInputError(f"regime must be one of {REGIMES}")


@dataclass(frozen=True)
class Trade:
    date: np.datetime64
    strategy: str
    instrument: str
    quantity: float
    price: float
    cost: float

    @property
    def notional(self) -> float:
        return self.quantity * self.price


def apply_costs(notionals, cost_rate: float) -> np.ndarray:
    """Proportional cost ``cost_rate * |notional|`` for each trade."""
    if not cost_rate >= 0:
        raise InvalidInputError("cost_rate must be non-negative")
    return cost_rate * np.abs(np.asarray(notionals, dtype=float))


def max_drawdown(values) -> float:
    v = np.asarray(values, dtype=float)
    return float(np.max(np.maximum.accumulate(v) - v)) if v.size else 0.0


@dataclass
class BacktestReport:
    dates: np.ndarray
    strategies: tuple
    value: dict
    pnl: dict  # pnl[s][0] is the (cost-only) inception step
    gross: dict
    cost: dict
    trades: list = field(default_factory=list)
    holdings: dict = field(default_factory=dict)
    diagnostics: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def accounting_residual(self) -> float:
        """Largest relative violation of the value/PnL identity."""
        worst = 0.0
        for s in self.strategies:
            v, g, c = self.value[s], self.gross[s], self.cost[s]
            step = np.diff(np.concatenate([[0.0], v]))
            scale = np.maximum(1.0, np.abs(g) + np.abs(c))
            worst = max(worst, float(np.max(np.abs(step - (g - c)) / scale)))
        return worst

    def summary(self) -> dict:
        out = {}
        for s in self.strategies:
            p = self.pnl[s][1:]
            dev = p - p.mean() if p.size else p
            out[s] = {
                "vol": float(np.std(p)) if p.size else 0.0,
                "xd": float(np.max(np.abs(dev))) if p.size else 0.0,
                "max_drawdown": max_drawdown(self.value[s]),
                "total_cost": float(np.sum(self.cost[s])),
                "final_value": float(self.value[s][-1]),
                "n_trades": sum(1 for t in self.trades if t.strategy == s),
            }
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("date,strategy,value,pnl,cost\n")
        for s in self.strategies:
            for i, d in enumerate(self.dates):
                buf.write(f"{d},{s},{float(self.value[s][i])!r},{float(self.pnl[s][i])!r},{float(self.cost[s][i])!r}\n")
        return buf.getvalue()

    def trades_csv(self) -> str:
        buf = io.StringIO()
        buf.write("date,strategy,instrument,quantity,price,cost\n")
        for t in self.trades:
            buf.write(f"{t.date},{t.strategy},{t.instrument},{float(t.quantity)!r},{float(t.price)!r},{float(t.cost)!r}\n")
        return buf.getvalue()

    def summary_json(self) -> str:
        doc = {"meta": self.meta, "strategies": self.summary(), "diagnostics": self.diagnostics}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _report(dates, names, gross, cost, trades, holdings, diagnostics, meta):
    pnl = {s: gross[s] - cost[s] for s in names}
    value = {s: np.cumsum(pnl[s]) for s in names}
    return BacktestReport(np.asarray(dates), tuple(names), value, pnl, gross, cost, trades, holdings, diagnostics, meta)


# ---------------------------------------------------------------- LDI


def _ldi_weights(panel_rows, liability_rows, assets, cfg, k, rates):
    window = ReturnPanel(assets, panel_rows)
    model = fast_ica(window, seed=cfg.seed)
    result = allocate(model, liability_rows, rates, k=k, lam=cfg.lam, regime=cfg.regime)
    return result.asset_weights, result.diagnostics, model.rank


def run_ldi_backtest(panel: ReturnPanel, liability_changes, cfg: BacktestConfig, funding_rates=None) -> BacktestReport:
    """Hold optimal asset notionals against a liability over the evaluation window.

    ``liability_changes`` are per-period liability value changes in currency,
    aligned with the panel rows. Weights are estimated on the first
    ``cfg.estimation_window`` rows (and optionally re-estimated on a trailing
    window of the same length every ``cfg.reestimate_every`` periods) and
    applied to later rows only. Positions are kept at constant notional and
    funded at ``funding_rates``; the drift back to target notional after each
    period is traded and costed. Strategy ``unhedged`` holds nothing.
    """
    L = as_values(liability_changes, "liability", min_length=1)
    X = panel.matrix
    T, N = X.shape
    W = int(cfg.estimation_window)
    if L.size != T:
        raise InvalidInputError(f"liability has {L.size} periods but the panel has {T}")
    if T < W + 2:
        raise InsufficientDataError(f"need at least {W + 2} periods (estimation window {W} + 2 evaluation), got {T}")
    rates = np.zeros(N) if funding_rates is None else np.broadcast_to(np.asarray(funding_rates, dtype=float), (N,)).copy()
    dates = panel.timestamps if panel.timestamps is not None else np.arange(T)
    eval_idx = np.arange(W, T)
    # row 0 of the report is the entry at the close of the last estimation period
    report_dates = np.concatenate([[dates[W - 1]], dates[eval_idx]])
    n = eval_idx.size + 1

    names = ["unhedged"] + [f"k{k}" for k in cfg.k_list]
    gross = {s: np.zeros(n) for s in names}
    cost = {s: np.zeros(n) for s in names}
    holdings = {}
    trades, diagnostics = [], []
    excess = X - rates
    meta = {"kind": "ldi", "assets": list(panel.assets), "estimation_window": W, "lam": cfg.lam, "k_list": list(cfg.k_list), "cost_rate": cfg.cost_rate}

    for s in names:
        gross[s][1:] = -L[eval_idx]
    for k in cfg.k_list:
        s = f"k{k}"
        target = np.zeros((n, N))
        a, diag, rank = _ldi_weights(X[:W], L[:W], panel.assets, cfg, k, rates)
        meta.setdefault("ica_rank", rank)
        diagnostics.extend(f"{s} @ {report_dates[0]}: {d}" for d in diag)
        held = np.zeros(N)
        for j in range(n):
            t = W - 1 + j  # close of row t
            if j > 0:
                gross[s][j] += float(held @ excess[t])
                drift = held * X[t]  # position value grew by this; trade it back
            else:
                drift = np.zeros(N)
            if j == 0:
                new = a
            elif cfg.reestimate_every and j % int(cfg.reestimate_every) == 0 and j < n - 1:
                new, diag, _ = _ldi_weights(X[t + 1 - W : t + 1], L[t + 1 - W : t + 1], panel.assets, cfg, k, rates)
                diagnostics.extend(f"{s} @ {report_dates[j]}: {d}" for d in diag)
            else:
                new = held
            trade = new - held - drift
            costs = apply_costs(trade, cfg.cost_rate)
            cost[s][j] = float(costs.sum())
            for i in np.flatnonzero(trade):
                trades.append(Trade(report_dates[j], s, panel.assets[i], float(trade[i]), 1.0, float(costs[i])))
            held = new
            target[j] = held
        holdings[s] = target
    return _report(report_dates, names, gross, cost, trades, holdings, diagnostics, meta)


# ---------------------------------------------------------------- options


@dataclass(frozen=True)
class _Leg:
    option_id: str
    underlying: str
    strike: float
    expiry: np.datetime64
    kind: str
    position: float


def _legs(quotes, book):
    first = {}
    for q in quotes:
        first.setdefault(q.option_id, q)
    legs = []
    for oid, pos in book.items():
        if oid not in first:
            raise InvalidInputError(f"no quotes for option {oid!r}")
        q = first[oid]
        legs.append(_Leg(oid, q.underlying, q.strike, q.expiry, q.kind, float(pos)))
    return legs


def _spec(leg, date):
    tau = (leg.expiry - date).astype(int) / DAYS_PER_YEAR
    return OptionSpec(leg.strike, max(tau, 0.0), leg.kind, leg.underlying, leg.position, leg.option_id)


def run_option_hedge_backtest(
    quotes,
    prices,
    book: Mapping[str, float],
    cfg: BacktestConfig,
    vol_params: Mapping[str, tuple],
    rate: float = 0.0,
    inception=None,
) -> BacktestReport:
    """Hedge a book of options with the underlyings, daily, until expiry.

    ``book`` maps option id to position (negative for written options);
    ``vol_params`` maps underlying to ``(alpha, q)``. The book is entered at
    ``inception`` (default: first quote date) at quoted prices. Each
    underlying's vol is the average implied vol of its book options; on a
    day with any of them unquoted the last vol is carried forward, options
    are marked at it and that underlying's hedge is left unchanged.
    Drift, volatility and 2k-th moments of the daily price increments come
    from the ``cfg.estimation_window`` days before inception.

    Strategy ``delta`` holds the book delta, ``k<k>`` holds the 2k-moment
    weight and ``unhedged`` holds nothing. Costs hit every trade: the option legs at inception and unwind,
    and every hedge adjustment.
    """
    legs = _legs(quotes, book)
    if not legs:
        raise InvalidInputError("the option book is empty")
    quote_px = {(q.date, q.option_id): q.close for q in quotes}
    dates = prices.dates
    start = np.datetime64(inception, "D") if inception is not None else min(q.date for q in quotes if q.option_id in book)
    if not np.any(dates == start):
        raise InvalidInputError(f"inception {start} is not a price date")
    i0 = int(np.flatnonzero(dates == start)[0])
    W = int(cfg.estimation_window)
    if i0 < W:
        raise InsufficientDataError(f"need {W} price increments before inception, have {i0}")
    last_expiry = max(l.expiry for l in legs)
    i_end = int(np.searchsorted(dates, last_expiry, side="right")) - 1
    if i_end <= i0:
        raise InsufficientDataError("no price dates between inception and expiry")
    days = dates[i0 : i_end + 1]
    n = days.size
    unds = sorted({l.underlying for l in legs})
    for u in unds:
        if u not in prices.instruments:
            raise InvalidInputError(f"no prices for underlying {u!r}")
        if u not in vol_params:
            raise InvalidInputError(f"no (alpha, q) for underlying {u!r}")
    spot = {u: prices.column(u)[i0 : i_end + 1] for u in unds}

    hist = {}
    for u in unds:
        dS = np.diff(prices.column(u)[i0 - W : i0 + 1])
        hist[u] = (float(dS.mean()), float(dS.std()), dS)
    own = {(u, k): central_moment(hist[u][2], 2 * k) for u in unds for k in cfg.k_list}

    # implied vols, carried forward over gaps
    diagnostics = []
    vols = {u: np.empty(n) for u in unds}
    fresh = {u: np.zeros(n, dtype=bool) for u in unds}
    for u in unds:
        ulegs = [l for l in legs if l.underlying == u]
        prev = None
        for j, d in enumerate(days):
            live = [l for l in ulegs if l.expiry > d]
            ivs = []
            for l in live:
                px = quote_px.get((d, l.option_id))
                if px is None:
                    break
                try:
                    ivs.append(implied_vol(_spec(l, d), spot[u][j], rate, px))
                except ArbitrageError as exc:
                    diagnostics.append(f"{d} {l.option_id}: {exc}")
                    break
            if live and len(ivs) == len(live):
                prev = float(np.mean(ivs))
                fresh[u][j] = True
            elif live and j > 0:
                diagnostics.append(f"{d} {u}: quote gap, implied vol carried forward")
            if prev is None:
                raise InvalidInputError(f"no usable quotes for {u} at inception {d}")
            vols[u][j] = prev

    # option marks: quoted close if fresh, otherwise model price at the carried vol
    marks = {l.option_id: np.empty(n) for l in legs}
    for l in legs:
        u = l.underlying
        for j, d in enumerate(days):
            px = quote_px.get((d, l.option_id))
            if l.expiry <= d or px is None or not fresh[u][j]:
                px = float(bs_price(_spec(l, d), spot[u][j], vols[u][j], rate))
            marks[l.option_id][j] = px

    # liability greeks: what the book owes, i.e. the negated book position
    owed = {u: [None] * n for u in unds}
    for u in unds:
        for j, d in enumerate(days):
            g = Greeks.zero(float(spot[u][j]))
            for l in legs:
                if l.underlying == u and l.expiry > d:
                    g = g + bs_greeks(_spec(l, d), float(spot[u][j]), float(vols[u][j]), rate).scaled(-l.position)
            owed[u][j] = g

    names = ["unhedged", "delta"] + [f"k{k}" for k in cfg.k_list]
    premium = sum(abs(l.position) * marks[l.option_id][0] for l in legs)
    option_gross = np.zeros(n)
    for l in legs:
        option_gross[1:] += l.position * np.diff(marks[l.option_id])
    option_costs = np.zeros(n)
    trades = []
    for l in legs:
        c0 = float(apply_costs(l.position * marks[l.option_id][0], cfg.cost_rate))
        c1 = float(apply_costs(l.position * marks[l.option_id][-1], cfg.cost_rate))
        option_costs[0] += c0
        option_costs[-1] += c1
        trades.append((days[0], l.option_id, l.position, marks[l.option_id][0], c0))
        trades.append((days[-1], l.option_id, -l.position, marks[l.option_id][-1], c1))

    gross = {s: option_gross.copy() for s in names}
    cost = {s: option_costs.copy() for s in names}
    holdings = {}
    trade_log = []
    for s in names:
        trade_log.extend(Trade(d, s, oid, float(qty), float(px), c) for d, oid, qty, px, c in trades)
        hold = np.zeros((n, len(unds)))
        for ui, u in enumerate(unds):
            mu, sig, _ = hist[u]
            alpha, q = vol_params[u]
            h = 0.0
            for j, d in enumerate(days):
                S = float(spot[u][j])
                if j > 0:
                    gross[s][j] += h * (S - spot[u][j - 1])
                g = owed[u][j]
                if s == "unhedged" or j == n - 1 or not any(l.underlying == u and l.expiry > d for l in legs):
                    target = 0.0
                elif not fresh[u][j] and j > 0:
                    target = h
                elif s == "delta":
                    target = g.delta
                else:
                    k = int(s[1:])
                    vp = VolParams(float(vols[u][j]), float(alpha), float(q))
                    target = option_weight(mu, rate * S / DAYS_PER_YEAR, sig, g, vp, k, cfg.lam, own_moment=own[(u, k)])
                dq = target - h
                if dq != 0.0:
                    c = float(apply_costs(dq * S, cfg.cost_rate))
                    cost[s][j] += c
                    trade_log.append(Trade(d, s, u, float(dq), S, c))
                h = target
                hold[j, ui] = h
        holdings[s] = hold

    trade_log.sort(key=lambda t: (t.date, names.index(t.strategy), t.instrument))
    meta = {
        "kind": "options",
        "underlyings": unds,
        "options": [l.option_id for l in legs],
        "estimation_window": W,
        "lam": cfg.lam,
        "k_list": list(cfg.k_list),
        "cost_rate": cfg.cost_rate,
        "gross_premium": float(premium),
    }
    return _report(days, names, gross, cost, trade_log, holdings, diagnostics, meta)


def straddle_book(quotes, written: float = -1.0) -> dict:
    """Book writing every quoted option once (one straddle per call/put pair)."""
    ids = sorted({q.option_id for q in quotes})
    return {oid: written for oid in ids}


def pnl_std(report: BacktestReport, strategy: str) -> float:
    return float(np.std(report.pnl[strategy][1:]))
