"""Synthetic market data for examples, tests and the bundled CLI runs.

All generators are deterministic in ``seed`` and use business-day dates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .._validation import as_labels
from ..exceptions import InvalidInputError
from ..liability import DAYS_PER_YEAR, CashflowSchedule, DiscountCurve, revalue
from ..options import OptionSpec, bs_price
from .tables import OptionQuote, PriceTable


def business_days(start: str, n: int) -> np.ndarray:
    first = np.busday_offset(np.datetime64(start, "D"), 0, roll="forward")
    return np.busday_offset(first, np.arange(n), roll="forward")


def _student_t(rng, df, size):
    """Unit-variance Student-t draws (Gaussian when ``df`` is None)."""
    if df is None:
        return rng.standard_normal(size)
    if df <= 2:
        raise InvalidInputError("Student-t degrees of freedom must exceed 2 for unit variance")
    return rng.standard_t(df, size) * math.sqrt((df - 2) / df)


@dataclass(frozen=True)
class FactorModelSpec:
    """Instruments as linear mixes of independent fat-tailed factors.

    ``loadings`` is instruments x factors; returns are
    ``drift + loadings @ (scales * factors) + noise``. A shock adds
    ``shock_factors`` (in factor units) on ``shock_date``.
    """

    loadings: np.ndarray
    factor_scales: np.ndarray | None = None
    drift: np.ndarray | float = 0.0
    noise_scale: float = 0.0
    df: float | None = 4.0
    n_periods: int = 756
    start: str = "2019-02-20"
    instruments: tuple | None = None
    shock_date: str | None = None
    shock_factors: np.ndarray | None = None
    start_price: float = 100.0

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.loadings, dtype=float))
        n_inst, n_fac = A.shape
        if n_fac > n_inst:
            raise InvalidInputError(f"{n_fac} factors exceed {n_inst} instruments")
        if not np.all(np.isfinite(A)):
            raise InvalidInputError("loadings must be finite")
        object.__setattr__(self, "loadings", A)
        scales = np.ones(n_fac) if self.factor_scales is None else np.asarray(self.factor_scales, dtype=float)
        if scales.shape != (n_fac,) or np.any(scales < 0):
            raise InvalidInputError("factor_scales needs one non-negative entry per factor")
        object.__setattr__(self, "factor_scales", scales)
        object.__setattr__(self, "instruments", as_labels(self.instruments, n_inst, "X"))
        if self.noise_scale < 0:
            raise InvalidInputError("noise_scale must be non-negative")
        if self.n_periods < 2:
            raise InvalidInputError("n_periods must be at least 2")
        if self.shock_factors is not None:
            shock = np.asarray(self.shock_factors, dtype=float)
            if shock.shape != (n_fac,):
                raise InvalidInputError("shock_factors needs one entry per factor")
            if self.shock_date is None:
                raise InvalidInputError("shock_factors given without shock_date")
            object.__setattr__(self, "shock_factors", shock)

    @property
    def rank(self) -> int:
        return int(np.linalg.matrix_rank(self.loadings))


def synth_factor_returns(spec: FactorModelSpec, seed: int):
    """Return ``(dates, factors, returns)``; dates label each period's close."""
    rng = np.random.default_rng(seed)
    n_inst, n_fac = spec.loadings.shape
    dates = business_days(spec.start, spec.n_periods + 1)
    factors = _student_t(rng, spec.df, (spec.n_periods, n_fac)) * spec.factor_scales
    if spec.shock_factors is not None:
        at = np.searchsorted(dates[1:], np.datetime64(spec.shock_date, "D"))
        if at >= spec.n_periods:
            raise InvalidInputError(f"shock date {spec.shock_date} is outside the sample")
        factors[at] += spec.shock_factors
    returns = spec.loadings @ factors.T
    returns = returns.T + np.asarray(spec.drift, dtype=float)
    if spec.noise_scale > 0:
        returns = returns + spec.noise_scale * rng.standard_normal(returns.shape)
    return dates, factors, returns


def prices_from_returns(dates, instruments, returns, start_price=100.0) -> PriceTable:
    growth = np.vstack([np.ones(returns.shape[1]), np.cumprod(1.0 + returns, axis=0)])
    if np.any(growth <= 0):
        raise InvalidInputError("synthetic returns drive a price to zero; lower the scales")
    return PriceTable(np.asarray(dates), tuple(instruments), start_price * growth)


def synth_panel(spec: FactorModelSpec, seed: int = 0) -> PriceTable:
    dates, _, returns = synth_factor_returns(spec, seed)
    return prices_from_returns(dates, spec.instruments, returns, spec.start_price)


def rank_deficient_spec(n_instruments=10, rank=9, n_periods=756, seed=0, **kwargs) -> FactorModelSpec:
    """Random loadings of the given rank (the last instruments are blends)."""
    if rank > n_instruments:
        raise InvalidInputError("rank exceeds instrument count")
    rng = np.random.default_rng(seed)
    base = rng.uniform(-1.0, 1.0, (rank, rank)) + 2.0 * np.eye(rank)
    blends = rng.dirichlet(np.ones(rank), n_instruments - rank) @ base if n_instruments > rank else np.zeros((0, rank))
    kwargs.setdefault("factor_scales", np.full(rank, 0.004))
    return FactorModelSpec(np.vstack([base, blends]), n_periods=n_periods, **kwargs)


# ---------------------------------------------------------------- LDI scenario

CURVE_TENORS = np.array([0.25, 0.5, 1, 2, 3, 5, 7, 10, 15, 20, 25, 30], dtype=float)


def curve_basis(tau):
    """Level, slope, curvature, long end and front end shapes of a rate move."""
    tau = np.asarray(tau, dtype=float)
    return np.stack(
        [
            np.ones_like(tau),
            np.exp(-tau / 2.0),
            (tau / 5.0) * np.exp(1.0 - tau / 5.0),
            np.clip((tau - 10.0) / 20.0, 0.0, 1.0),
            np.exp(-tau / 0.5),
        ],
        axis=-1,
    )


@dataclass(frozen=True)
class BondFund:
    name: str
    duration: float
    spread_factor: int | None = None  # index into the spread factors
    spread: float = 0.0


DEFAULT_FUNDS = (
    BondFund("SHY", 1.9),
    BondFund("IEI", 4.5),
    BondFund("IEF", 7.5),
    BondFund("TLH", 12.0),
    BondFund("TLT", 17.0),
    BondFund("IGSB", 2.7, 0, 0.008),
    BondFund("IGLB", 13.0, 1, 0.015),
    BondFund("SHYG", 2.3, 2, 0.035),
    BondFund("HYG", 3.8, 3, 0.04),
)


@dataclass
class LDIScenario:
    prices: PriceTable
    curves: list
    cashflows: CashflowSchedule
    shock_date: np.datetime64
    factors: np.ndarray = field(repr=False)

    @property
    def returns(self):
        return self.prices.to_returns()

    def liability_changes(self, roll=True) -> np.ndarray:
        return revalue(self.cashflows, self.curves, roll).changes


def straight_line_cashflows(first=1.0, last=20.0, start_amount=1.5e6, end_amount=0.5e6) -> CashflowSchedule:
    times = np.arange(first, last + 0.5, 1.0)
    return CashflowSchedule(times, np.linspace(start_amount, end_amount, times.size))


def synth_ldi_scenario(
    seed: int = 0,
    n_periods: int = 756,
    start: str = "2019-02-20",
    shock_date: str = "2020-03-09",
    df: float = 4.0,
    noise_bp: float = 1.0,
    funds=DEFAULT_FUNDS,
    blend_name: str = "AGG",
) -> LDIScenario:
    """Bond-fund prices, dated zero curves and a straight-line 1y-20y liability.

    Five rate factors move the zero curve; funds return carry minus
    duration times the move at their duration, plus a spread move for
    credit funds. The last fund is an exact blend of the others, so the
    return panel has rank ``len(funds)``.
    """
    rng = np.random.default_rng(seed)
    dates = business_days(start, n_periods + 1)
    dt = 1.0 / 252.0
    n_spread = 1 + max((f.spread_factor for f in funds if f.spread_factor is not None), default=-1)

    rate_scale = np.array([5.0, 3.0, 2.0, 1.5, 2.0]) * 1e-4
    spread_scale = np.array([1.0, 1.5, 4.0, 5.0])[:n_spread] * 1e-4
    rate_f = _student_t(rng, df, (n_periods, 5)) * rate_scale
    spread_f = _student_t(rng, df, (n_periods, n_spread)) * spread_scale
    at = int(np.searchsorted(dates[1:], np.datetime64(shock_date, "D")))
    if at < n_periods:
        rate_f[at] += np.array([-40.0, -25.0, 10.0, -10.0, -20.0]) * 1e-4
        spread_f[at] += np.array([40.0, 60.0, 150.0, 200.0])[:n_spread] * 1e-4

    base = 0.015 + 0.012 * (1.0 - np.exp(-CURVE_TENORS / 6.0))
    moves = rate_f @ curve_basis(CURVE_TENORS).T
    levels = base + np.vstack([np.zeros(CURVE_TENORS.size), np.cumsum(moves, axis=0)])
    curves = [DiscountCurve(CURVE_TENORS, levels[i], dates[i]) for i in range(n_periods + 1)]

    names, columns = [], []
    for f in funds:
        dz = rate_f @ curve_basis(f.duration)
        y = np.interp(f.duration, CURVE_TENORS, base) + f.spread
        ret = y * dt - f.duration * dz
        if f.spread_factor is not None:
            ret = ret - f.duration * spread_f[:, f.spread_factor]
        ret = ret + noise_bp * 1e-4 * rng.standard_normal(n_periods)
        names.append(f.name)
        columns.append(ret)
    R = np.column_stack(columns)
    if blend_name:
        mix = rng.dirichlet(np.ones(len(funds)))
        names.append(blend_name)
        R = np.column_stack([R, R @ mix])
    prices = prices_from_returns(dates, names, R)
    return LDIScenario(prices, curves, straight_line_cashflows(), dates[1:][min(at, n_periods - 1)], np.hstack([rate_f, spread_f]))


# ---------------------------------------------------------------- option scenario


@dataclass
class OptionScenario:
    prices: PriceTable
    quotes: list
    book: dict
    vol_params: dict
    inception: np.datetime64
    shock_date: np.datetime64
    true_vols: dict = field(repr=False, default_factory=dict)


def synth_option_scenario(
    seed: int = 0,
    n_underliers: int = 5,
    pre_days: int = 60,
    life_days: int = 28,
    sigma0: float = 0.3,
    alpha: float = 0.8,
    q: float = -0.6,
    crash: float = -0.08,
    crash_vol_jump: float = 0.10,
    start: str = "2023-01-02",
    spot0: float = 100.0,
    gap_days: tuple = (),
) -> OptionScenario:
    """Spot/vol paths for several underliers and quotes on one ATM straddle each.

    Underlier ``i`` is drawn from ``default_rng(seed + i)`` with a lognormal
    Euler spot and a zero-reflected vol driven by ``dZ = q dW + sqrt(1-q^2) dY``
    at annual step ``1/252``. All underliers share a crash of ``crash`` (and a
    vol jump) halfway through the option's life. Options are written at the
    close of day ``pre_days``; ``gap_days`` lists life-day offsets with no
    quotes.
    """
    if pre_days < 2 or life_days < 2:
        raise InvalidInputError("pre_days and life_days must be at least 2")
    n_steps = pre_days + life_days
    dates = business_days(start, n_steps + 1)
    dt = 1.0 / 252.0
    sqrt_dt = math.sqrt(dt)
    crash_step = pre_days + life_days // 2
    inception, expiry = dates[pre_days], dates[n_steps]

    names, spots, quotes, book, vols = [], [], [], {}, {}
    for i in range(n_underliers):
        rng = np.random.default_rng(seed + i)
        S = np.empty(n_steps + 1)
        v = np.empty(n_steps + 1)
        S[0], v[0] = spot0, sigma0
        for j in range(n_steps):
            w, y = rng.standard_normal(2)
            z = q * w + math.sqrt(1.0 - q * q) * y
            S[j + 1] = S[j] * (1.0 + v[j] * sqrt_dt * w)
            v[j + 1] = abs(v[j] + alpha * sqrt_dt * z)
            if j + 1 == crash_step:
                S[j + 1] *= 1.0 + crash
                v[j + 1] += crash_vol_jump
        und = f"U{i}"
        names.append(und)
        spots.append(S)
        vols[und] = v
        strike = float(round(S[pre_days]))
        for kind in ("call", "put"):
            oid = f"{und}-{kind[0].upper()}{strike:g}"
            book[oid] = -1.0
            for j in range(pre_days, n_steps):
                if (j - pre_days) in gap_days:
                    continue
                tau = (expiry - dates[j]).astype(int) / DAYS_PER_YEAR
                px = float(bs_price(OptionSpec(strike, tau, kind), S[j], v[j]))
                quotes.append(OptionQuote(dates[j], oid, und, strike, expiry, kind, px))
    prices = PriceTable(dates, tuple(names), np.column_stack(spots))
    quotes.sort(key=lambda x: (x.date, x.option_id))
    return OptionScenario(prices, quotes, book, {u: (alpha, q) for u in names}, inception, dates[crash_step], vols)
