"""Option analytics for hedging under stochastic volatility.

Hedge ratios are in units of the underlying per option. The vol factor is
the Black-Scholes (lognormal) volatility; its increments are
``alpha dZ`` with ``dZ = q dW + sqrt(1 - q^2) dY``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from ._validation import check_k, check_lambda
from .exceptions import ArbitrageError, DegenerateInputError, InvalidInputError
from .moments import SignedLogValue, gaussian_moment

CALL, PUT = "call", "put"


@dataclass(frozen=True)
class OptionSpec:
    strike: float
    expiry: float  # year fraction to expiry
    kind: str = CALL
    underlying: str = ""
    position: float = 1.0
    option_id: str = ""

    def __post_init__(self):
        if self.kind not in (CALL, PUT):
            raise InvalidInputError(f"kind must be 'call' or 'put', got {self.kind!r}")
        if not self.strike > 0:
            raise InvalidInputError("strike must be positive")

    def with_expiry(self, expiry: float) -> "OptionSpec":
        return OptionSpec(self.strike, expiry, self.kind, self.underlying, self.position, self.option_id)


@dataclass(frozen=True)
class VolParams:
    sigma: float
    alpha: float = 0.0
    q: float = 0.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise DegenerateInputError(f"spot vol must be positive, got {self.sigma}")
        if self.alpha < 0:
            raise InvalidInputError("vol-of-vol must be non-negative")
        if not -1.0 <= self.q <= 1.0:
            raise InvalidInputError("spot-vol correlation must lie in [-1, 1]")


@dataclass(frozen=True)
class Greeks:
    """Sensitivities of one option (or a sum of options) at ``spot``.

    ``drift`` is dOmega/dt + 1/2 sigma^2 S^2 Gamma, the dt coefficient of
    the option increment under zero drift in the spot.
    """

    delta: float
    gamma: float
    vega: float
    theta: float
    drift: float
    spot: float

    def __add__(self, other: "Greeks") -> "Greeks":
        if other.spot != self.spot:
            raise InvalidInputError("cannot add greeks computed at different spots")
        return Greeks(
            self.delta + other.delta,
            self.gamma + other.gamma,
            self.vega + other.vega,
            self.theta + other.theta,
            self.drift + other.drift,
            self.spot,
        )

    def scaled(self, factor: float) -> "Greeks":
        return Greeks(
            self.delta * factor,
            self.gamma * factor,
            self.vega * factor,
            self.theta * factor,
            self.drift * factor,
            self.spot,
        )

    @classmethod
    def zero(cls, spot: float) -> "Greeks":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, spot)


def _d1_d2(spot, strike, vol, rate, expiry):
    sqrt_t = np.sqrt(expiry)
    d1 = (np.log(spot / strike) + (rate + 0.5 * vol**2) * expiry) / (vol * sqrt_t)
    return d1, d1 - vol * sqrt_t


def _intrinsic(spec, spot):
    if spec.kind == CALL:
        return np.maximum(spot - spec.strike, 0.0)
    return np.maximum(spec.strike - spot, 0.0)


def bs_price(spec: OptionSpec, spot, vol, rate=0.0):
    """Black-Scholes price of one long option; intrinsic value once expired.

    ``spot`` and ``vol`` may be arrays (broadcast together).
    """
    spot = np.asarray(spot, dtype=float)
    vol = np.asarray(vol, dtype=float)
    if spec.expiry <= 0:
        out = _intrinsic(spec, spot)
        return float(out) if out.ndim == 0 else out
    if np.any(spot <= 0) or np.any(vol <= 0):
        raise InvalidInputError("spot and vol must be positive")
    d1, d2 = _d1_d2(spot, spec.strike, vol, rate, spec.expiry)
    df = math.exp(-rate * spec.expiry)
    if spec.kind == CALL:
        out = spot * ndtr(d1) - spec.strike * df * ndtr(d2)
    else:
        out = spec.strike * df * ndtr(-d2) - spot * ndtr(-d1)
    return float(out) if out.ndim == 0 else out


def bs_greeks(spec: OptionSpec, spot: float, vol: float, rate: float = 0.0) -> Greeks:
    if spec.expiry <= 0:
        return Greeks.zero(spot)
    if spot <= 0 or vol <= 0:
        raise InvalidInputError("spot and vol must be positive")
    T = spec.expiry
    d1, d2 = _d1_d2(spot, spec.strike, vol, rate, T)
    pdf = math.exp(-0.5 * d1 * d1) / math.sqrt(2 * math.pi)
    df = math.exp(-rate * T)
    gamma = pdf / (spot * vol * math.sqrt(T))
    vega = spot * pdf * math.sqrt(T)
    decay = -spot * pdf * vol / (2 * math.sqrt(T))
    if spec.kind == CALL:
        delta = float(ndtr(d1))
        theta = decay - rate * spec.strike * df * float(ndtr(d2))
    else:
        delta = float(ndtr(d1)) - 1.0
        theta = decay + rate * spec.strike * df * float(ndtr(-d2))
    drift = theta + 0.5 * vol**2 * spot**2 * gamma
    return Greeks(delta, gamma, vega, theta, drift, spot)


def price_bounds(spec: OptionSpec, spot: float, rate: float = 0.0) -> tuple[float, float]:
    df_strike = spec.strike * math.exp(-rate * spec.expiry)
    if spec.kind == CALL:
        return max(spot - df_strike, 0.0), spot
    return max(df_strike - spot, 0.0), df_strike


def implied_vol(spec: OptionSpec, spot: float, rate: float, price: float, vol_low=1e-6, vol_high=5.0, max_iter=500) -> float:
    """Black-Scholes implied vol by bisection, to ``|price error| < 1e-10 * spot``."""
    lower, upper = price_bounds(spec, spot, rate)
    if not lower <= price < upper:
        raise ArbitrageError(f"price {price} outside no-arbitrage bounds [{lower}, {upper})")
    tol = 1e-10 * spot
    lo, hi = vol_low, vol_high
    while bs_price(spec, spot, hi, rate) < price:
        hi *= 2.0
        if hi > 1e3:
            raise ArbitrageError(f"no volatility reproduces price {price}")
    if bs_price(spec, spot, lo, rate) >= price:
        return lo
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        err = bs_price(spec, spot, mid, rate) - price
        if abs(err) < tol:
            return mid
        if err < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def straddle_implied_vol(call: OptionSpec, put: OptionSpec, spot, rate, call_price, put_price) -> float:
    """Average of the call and the put implied vols."""
    return 0.5 * (implied_vol(call, spot, rate, call_price) + implied_vol(put, spot, rate, put_price))


def skew_adjusted_ratio(greeks: Greeks, vp: VolParams) -> float:
    """delta + q (alpha / sigma) vega / S.

    Dividing vega by spot expresses it per unit of absolute spot volatility,
    which keeps the ratio in shares per option.
    """
    if not vp.sigma > 0:
        raise DegenerateInputError("spot vol is zero")
    return greeks.delta + vp.q * (vp.alpha / vp.sigma) * greeks.vega / greeks.spot


def _bracket(mu, r, k, lam, own: SignedLogValue, ratio: float) -> SignedLogValue:
    if own.sign <= 0:
        raise DegenerateInputError("hedge instrument has a zero 2k-th moment")
    return SignedLogValue.from_value((mu - r) / (2 * k * lam)) / own + ratio


def _own(sigma, k, own_moment):
    if own_moment is not None:
        return own_moment if isinstance(own_moment, SignedLogValue) else SignedLogValue.from_value(own_moment)
    if not sigma > 0:
        raise DegenerateInputError("hedge instrument volatility is zero")
    return gaussian_moment(sigma, k)


def option_weight(mu, r, sigma, greeks: Greeks, vp: VolParams, k: int, lam: float, own_moment=None) -> float:
    """Hedge holding in the underlying against one written option.

    ``mu``, ``r`` and ``sigma`` are the per-period drift, funding and
    volatility of the underlying's price increments. ``own_moment``
    replaces the Gaussian ``(2k-1)!! sigma^{2k}`` with an empirical moment.
    """
    k, lam = check_k(k), check_lambda(lam)
    bracket = _bracket(mu, r, k, lam, _own(sigma, k, own_moment), skew_adjusted_ratio(greeks, vp))
    return bracket.odd_root(2 * k - 1).value


def option_hurdle_correction(greeks: Greeks, vp: VolParams, k: int, lam: float, sigma: float = 1.0, own_moment=None) -> float:
    """2k lam E(dC - mu)^{2k} times the skew-adjusted ratio.

    With the default unit per-period ``sigma`` this is
    2k lam (2k-1)!! (delta + q alpha/sigma vega/S).
    """
    k, lam = check_k(k), check_lambda(lam)
    own = _own(sigma, k, own_moment)
    return (SignedLogValue.from_value(2 * k * lam) * own * skew_adjusted_ratio(greeks, vp)).value


@dataclass
class SpotVolPaths:
    times: np.ndarray
    spot: np.ndarray  # n_paths x (n_steps + 1)
    vol: np.ndarray
    dW: np.ndarray  # standard normal draws, n_paths x n_steps
    dZ: np.ndarray


def simulate_spot_vol_paths(vp: VolParams, mu: float, n_paths: int, n_steps: int, horizon: float, seed: int, spot0: float = 1.0) -> SpotVolPaths:
    """Euler paths of a lognormal spot with a stochastic, zero-reflected vol.

    ``mu`` and the vol parameters are per unit of ``horizon`` time.
    """
    if n_paths < 1 or n_steps < 1:
        raise InvalidInputError("n_paths and n_steps must be at least 1")
    if not horizon > 0:
        raise InvalidInputError("horizon must be positive")
    h = horizon / n_steps
    sqrt_h = math.sqrt(h)
    if vp.alpha * sqrt_h > 0.25 * vp.sigma:
        warnings.warn("vol step is large relative to vol; paths will hit the zero reflection", stacklevel=2)
    rng = np.random.default_rng(seed)
    dW = rng.standard_normal((n_paths, n_steps))
    dY = rng.standard_normal((n_paths, n_steps))
    if abs(vp.q) == 1.0:
        dZ = vp.q * dW
    else:
        dZ = vp.q * dW + math.sqrt(1.0 - vp.q**2) * dY
    spot = np.empty((n_paths, n_steps + 1))
    vol = np.empty((n_paths, n_steps + 1))
    spot[:, 0] = spot0
    vol[:, 0] = vp.sigma
    for j in range(n_steps):
        spot[:, j + 1] = spot[:, j] * (1.0 + mu * h + vol[:, j] * sqrt_h * dW[:, j])
        vol[:, j + 1] = np.abs(vol[:, j] + vp.alpha * sqrt_h * dZ[:, j])
    return SpotVolPaths(np.linspace(0.0, horizon, n_steps + 1), spot, vol, dW, dZ)


def euler_option_increments(greeks: Greeks, vp: VolParams, dW, dZ, dt: float):
    """One Euler step of the option value driven by spot and vol shocks."""
    sqrt_dt = math.sqrt(dt)
    dS = vp.sigma * greeks.spot * sqrt_dt * np.asarray(dW)
    dvol = vp.alpha * sqrt_dt * np.asarray(dZ)
    return dS, greeks.drift * dt + greeks.delta * dS + greeks.vega * dvol


def estimate_vol_params(spot_returns, vol_levels, dt: float) -> VolParams:
    """Historical proxy for (sigma, alpha, q); not normative.

    ``q`` is the correlation of vol changes with spot returns and ``alpha``
    the annualised standard deviation of vol changes.
    """
    ret = np.asarray(spot_returns, dtype=float)
    vols = np.asarray(vol_levels, dtype=float)
    if vols.size != ret.size + 1:
        raise InvalidInputError("vol levels must have one more entry than returns")
    dvol = np.diff(vols)
    alpha = float(np.std(dvol) / math.sqrt(dt))
    q = 0.0 if alpha == 0.0 else float(np.corrcoef(ret, dvol)[0, 1])
    return VolParams(float(vols[-1]), alpha, float(np.clip(q, -1.0, 1.0)))
