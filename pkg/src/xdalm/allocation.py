"""Optimal component weights under 2k-th moment risk penalties.

Every formula works per orthogonal component. Units are per period; the
moments in :class:`ComponentStats` carry whatever currency scale the
liability series was given in.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import as_aligned_pair, as_matrix, as_values, check_correlation, check_k, check_lambda
from .exceptions import DegenerateComponentWarning, DegenerateInputError, InvalidInputError
from .moments import SignedLogValue, _signed_lse, double_factorial_log, gaussian_moment, signed_log_sum

if TYPE_CHECKING:
    from .decomposition import MixingModel

RISK_AVOIDING = "risk-avoiding"
RETURN_SEEKING = "return-seeking"
REGIMES = ("auto", RISK_AVOIDING, RETURN_SEEKING)


@dataclass(frozen=True)
class ComponentStats:
    """Statistics of one orthogonal component against the liability.

    ``own_moment_2k`` is E(dC - mu)^{2k}, ``cross_moment_2k1`` is
    E[(dC - mu) dL~^{2k-1}] and ``residual_moment_2k2`` is the (2k-2)-th
    central moment of the liability part orthogonal to the component.
    """

    mu: float
    r: float
    sigma: float
    rho: float
    own_moment_2k: SignedLogValue
    cross_moment_2k1: SignedLogValue
    residual_moment_2k2: SignedLogValue
    k: int
    sigma_L: float
    residual: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        check_k(self.k)
        if not self.sigma > 0:
            raise DegenerateInputError(f"component volatility must be positive, got {self.sigma}")
        check_correlation(self.rho)
        if self.sigma_L < 0:
            raise InvalidInputError("liability volatility must be non-negative")

    @classmethod
    def gaussian(cls, mu, r, sigma, rho, sigma_L, k) -> "ComponentStats":
        """Stats of a jointly Gaussian component/liability pair."""
        k = check_k(k)
        rho = check_correlation(rho)
        own = gaussian_moment(sigma, k)
        if rho == 0.0 or sigma_L == 0.0:
            cross = SignedLogValue(0)
        else:
            cross = (
                double_factorial_log(2 * k - 1)
                * SignedLogValue.from_value(rho * sigma)
                * SignedLogValue(1, (2 * k - 1) * math.log(sigma_L))
            )
        if k == 1:
            residual = SignedLogValue(1, 0.0)
        else:
            resid_var = sigma_L**2 * (1.0 - rho**2)
            residual = SignedLogValue(0) if resid_var == 0.0 else gaussian_moment(math.sqrt(resid_var), k - 1)
        return cls(mu, r, sigma, rho, own, cross, residual, k, sigma_L)


@dataclass
class AllocationResult:
    component_weights: np.ndarray
    asset_weights: np.ndarray
    regimes: list
    hurdle_rates: np.ndarray
    candidates: dict
    stats: list
    diagnostics: list = field(default_factory=list)
    assets: tuple = ()


def signed_odd_root(x, k: int) -> float:
    """Real (2k-1)-th root, sign preserving."""
    k = check_k(k)
    x = x if isinstance(x, SignedLogValue) else SignedLogValue.from_value(x)
    return x.odd_root(2 * k - 1).value


def _return_term(mu, r, k, lam) -> SignedLogValue:
    return SignedLogValue.from_value((mu - r) / (2 * k * lam))


def return_seeking_weight(cs: ComponentStats, lam: float) -> float:
    """[((mu - r)/2k lam + cross moment) / own moment]^(1/(2k-1))."""
    lam = check_lambda(lam)
    if cs.own_moment_2k.sign <= 0:
        raise DegenerateInputError("component has a zero 2k-th moment")
    bracket = _return_term(cs.mu, cs.r, cs.k, lam) + cs.cross_moment_2k1
    return (bracket / cs.own_moment_2k).odd_root(2 * cs.k - 1).value


def hedge_ratio(cs: ComponentStats) -> float:
    """Linear hedge rho * sigma_L / sigma."""
    return cs.rho * cs.sigma_L / cs.sigma


def risk_avoiding_weight(cs: ComponentStats, lam: float) -> float:
    """Two-term expansion around the 2k-distance minimiser.

    Falls back to the hedge term, with a DegenerateComponentWarning, when
    the residual liability moment vanishes for k >= 2.
    """
    lam = check_lambda(lam)
    k = cs.k
    hedge = hedge_ratio(cs)
    if cs.residual_moment_2k2.sign == 0:
        warnings.warn(
            "liability is fully spanned by the component; returning the hedge term only",
            DegenerateComponentWarning,
            stacklevel=2,
        )
        return hedge
    scaled = SignedLogValue.from_value((cs.mu - cs.r) / (2 * k * (2 * k - 1) * lam * cs.sigma**2))
    return hedge + (scaled / cs.residual_moment_2k2).value


def classical_weight(cs: ComponentStats, lam: float) -> float:
    """Mean-variance LDI weight: Sharpe term plus hedge ratio."""
    lam = check_lambda(lam)
    if not cs.sigma > 0:
        raise DegenerateInputError("component volatility is zero")
    return (cs.mu - cs.r) / (2.0 * lam * cs.sigma**2) + hedge_ratio(cs)


def hurdle_correction(cs: ComponentStats, lam: float) -> float:
    """Shift of the funding rate generated by the liability cross moment."""
    lam = check_lambda(lam)
    return (SignedLogValue.from_value(2 * cs.k * lam) * cs.cross_moment_2k1).value


def hurdle_form_weight(mu, r, r_c, own_moment, k, lam) -> float:
    """Weight written through the corrected hurdle rate ``r - r_c``."""
    k, lam = check_k(k), check_lambda(lam)
    own = own_moment if isinstance(own_moment, SignedLogValue) else SignedLogValue.from_value(own_moment)
    if own.sign <= 0:
        raise DegenerateInputError("own moment must be positive")
    excess = signed_log_sum([mu - r, r_c])
    return (excess / (SignedLogValue.from_value(2 * k * lam) * own)).odd_root(2 * k - 1).value


def delta_one_weight(mu, r, sigma, rho, sigma_L, k, lam) -> float:
    """Return-seeking weight with Gaussian moments substituted."""
    k, lam = check_k(k), check_lambda(lam)
    rho = check_correlation(rho)
    if not sigma > 0:
        raise DegenerateInputError("sigma must be positive")
    ret = SignedLogValue.from_value((mu - r) / (2 * k * lam)) / gaussian_moment(sigma, k)
    hedge = effective_hedge_power(rho, sigma, sigma_L, k)
    return (ret + hedge).odd_root(2 * k - 1).value


def effective_hedge_power(rho, sigma, sigma_L, k) -> SignedLogValue:
    """rho * (sigma_L / sigma)^(2k-1) as a SignedLogValue."""
    if rho == 0.0 or sigma_L == 0.0:
        return SignedLogValue(0)
    return SignedLogValue.from_value(rho) * SignedLogValue(1, (2 * k - 1) * math.log(sigma_L / sigma))


def delta_one_hurdle(rho, sigma, sigma_L, k, lam) -> float:
    """Effective hurdle shift 2k lam (2k-1)!! rho sigma sigma_L^(2k-1)."""
    k, lam = check_k(k), check_lambda(lam)
    r_c = (
        SignedLogValue.from_value(2 * k * lam)
        * gaussian_moment(sigma, k)
        * effective_hedge_power(rho, sigma, sigma_L, k)
    )
    return r_c.value


def effective_correlation(rho, k) -> float:
    rho = check_correlation(rho)
    k = check_k(k)
    if rho == 0.0:
        return 0.0
    return math.copysign(abs(rho) ** (1.0 / (2 * k - 1)), rho)


def sign_limit_weight(rho, sigma, sigma_L) -> float:
    """k -> infinity limit sign(rho) sigma_L / sigma.

    Diagnostic only: this limit is never the global maximum of the
    objective and must not be used to build portfolios.
    """
    rho = check_correlation(rho)
    if not sigma > 0:
        raise DegenerateInputError("sigma must be positive")
    return float(np.sign(rho)) * sigma_L / sigma


@dataclass
class WeightProfile:
    mu: np.ndarray
    k_list: tuple
    weights: np.ndarray  # len(k_list) x len(mu)
    effective_hurdles: np.ndarray


def weight_profile(mu_grid, *, r, sigma, rho, sigma_L, lam, k_list) -> WeightProfile:
    """Delta-one weight as a function of expected return, one row per k."""
    mu = np.asarray(mu_grid, dtype=float)
    if mu.size == 0 or len(k_list) == 0:
        raise InvalidInputError("mu grid and k list must be non-empty")
    weights = np.array([[delta_one_weight(m, r, sigma, rho, sigma_L, k, lam) for m in mu] for k in k_list])
    order = np.argsort(mu, kind="stable")
    if np.any(np.diff(weights[:, order], axis=1) < 0):
        raise RuntimeError("weight profile is not monotone in mu")
    hurdles = np.array([r - delta_one_hurdle(rho, sigma, sigma_L, k, lam) for k in k_list])
    return WeightProfile(mu, tuple(k_list), weights, hurdles)


def _centred(c, l, r_L):
    cv, lv = as_aligned_pair(c, l, ("component", "liability"))
    return cv - cv.mean(), lv - r_L, lv


def objective_value(w, component_samples, liability_samples, mu, r, r_L, k, lam) -> float:
    """Empirical asset-liability objective for a single component weight.

    ``w (mu - r) - (E dL - r_L) - lam E[w (dC - E dC) - (dL - r_L)]^{2k}``;
    the expected return ``mu`` enters only through the return term, the
    penalty uses the centred sample.
    """
    k, lam = check_k(k), check_lambda(lam)
    dc, dl, lv = _centred(component_samples, liability_samples, r_L)
    dev = w * dc - dl
    nz = dev[dev != 0.0]
    penalty = 0.0
    if nz.size:
        penalty = _signed_lse(2 * k * np.log(np.abs(nz)), np.ones(nz.size), shift=math.log(dev.size)).value
    return w * (mu - r) - (lv.mean() - r_L) - lam * penalty


def _gradient_sign(w, dc, dl, excess, k, lam) -> int:
    dev = w * dc - dl
    mask = (dc != 0.0) & (dev != 0.0)
    p = 2 * k - 1
    moment = _signed_lse(
        np.log(np.abs(dc[mask])) + p * np.log(np.abs(dev[mask])),
        np.sign(dc[mask]) * np.sign(dev[mask]) ** p,
        shift=math.log(dc.size),
    )
    return signed_log_sum([excess, SignedLogValue.from_value(-2 * k * lam) * moment]).sign


def optimal_weight(component_samples, liability_samples, mu, r, r_L, k, lam, guess=0.0, rtol=1e-13) -> float:
    """Exact maximiser of :func:`objective_value` over ``w``.

    The sample objective is concave in ``w`` (the penalty is an average of
    even powers of affine functions), so its derivative is monotone and the
    root is bracketed and bisected.
    """
    k, lam = check_k(k), check_lambda(lam)
    dc, dl, _ = _centred(component_samples, liability_samples, r_L)
    if not np.any(dc):
        raise DegenerateInputError("component sample has no variation")
    excess = mu - r
    step = abs(guess) or 1.0
    lo, hi = guess - step, guess + step
    while _gradient_sign(lo, dc, dl, excess, k, lam) < 0:
        lo -= step
        step *= 2.0
    step = abs(guess) or 1.0
    while _gradient_sign(hi, dc, dl, excess, k, lam) > 0:
        hi += step
        step *= 2.0
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if hi - lo <= rtol * max(abs(lo), abs(hi)) or mid in (lo, hi):
            break
        s = _gradient_sign(mid, dc, dl, excess, k, lam)
        if s > 0:
            lo = mid
        elif s < 0:
            hi = mid
        else:
            return mid
    return 0.5 * (lo + hi)


def allocate(
    model: "MixingModel",
    liability,
    funding_rates=None,
    k: int = 1,
    lam: float = 0.01,
    regime: str = "auto",
    r_L: float | None = None,
    refine: bool = False,
) -> AllocationResult:
    """Per-component weights mapped to asset notionals.

    In ``auto`` mode both closed-form candidates are scored with
    :func:`objective_value` and the larger wins. ``refine=True`` replaces
    the chosen closed form by the exact empirical maximiser, seeded from it.
    """
    from .decomposition import component_stats

    if regime not in REGIMES:
        raise InvalidInputError(f"regime must be one of {REGIMES}, got {regime!r}")
    k, lam = check_k(k), check_lambda(lam)
    L = as_values(liability, "liability")
    if r_L is None:
        r_L = float(L.mean())
    stats = component_stats(model, liability, funding_rates, k, r_L)

    weights, regimes, hurdles, diagnostics = [], [], [], []
    candidates = {RISK_AVOIDING: [], RETURN_SEEKING: []}
    for i, cs in enumerate(stats):
        C = model.components[:, i]
        cand = {}
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            cand[RISK_AVOIDING] = risk_avoiding_weight(cs, lam)
        diagnostics.extend(f"component {i}: {w.message}" for w in caught)
        try:
            cand[RETURN_SEEKING] = return_seeking_weight(cs, lam)
        except DegenerateInputError as exc:
            diagnostics.append(f"component {i}: {exc}")
            cand[RETURN_SEEKING] = math.nan
        for name in candidates:
            candidates[name].append(cand[name])

        if regime == "auto":
            scores = {
                name: objective_value(w, C, L, cs.mu, cs.r, r_L, k, lam) if math.isfinite(w) else -math.inf
                for name, w in cand.items()
            }
            chosen = RETURN_SEEKING if scores[RETURN_SEEKING] >= scores[RISK_AVOIDING] else RISK_AVOIDING
        else:
            chosen = regime
        w = cand[chosen]
        if refine:
            w = optimal_weight(C, L, cs.mu, cs.r, r_L, k, lam, guess=w if math.isfinite(w) else 0.0)
        weights.append(w)
        regimes.append(chosen)
        hurdles.append(hurdle_correction(cs, lam))

    weights = np.array(weights)
    return AllocationResult(
        component_weights=weights,
        asset_weights=model.unmixing.T @ weights,
        regimes=regimes,
        hurdle_rates=np.array(hurdles),
        candidates={name: np.array(v) for name, v in candidates.items()},
        stats=stats,
        diagnostics=diagnostics,
        assets=model.assets,
    )


class LDIAllocator(BaseEstimator):
    """Liability-driven allocator: decompose the assets, then weight components.

    ``fit(X, y)`` takes a T x N panel of per-period asset returns and the
    T per-period liability changes (in the currency units the weights should
    carry). ``predict(X)`` returns the hedge portfolio P&L per period.

    Parameters
    ----------
    k : int, default=1
        Half the penalty exponent.
    lam : float, default=0.01
        Risk appetite.
    regime : {"auto", "risk-avoiding", "return-seeking"}, default="return-seeking"
    funding_rates : array-like of shape (n_assets,), optional
    liability_rate : float, optional
        Liability drift; the sample mean when omitted.
    refine : bool, default=False
        Polish the closed form to the exact empirical optimum.
    decomposer : FastICADecomposer, optional
    """

    def __init__(
        self,
        k=1,
        lam=0.01,
        regime=RETURN_SEEKING,
        funding_rates=None,
        liability_rate=None,
        refine=False,
        decomposer=None,
    ):
        self.k = k
        self.lam = lam
        self.regime = regime
        self.funding_rates = funding_rates
        self.liability_rate = liability_rate
        self.refine = refine
        self.decomposer = decomposer

    def fit(self, X, y):
        from sklearn.base import clone

        from .decomposition import FastICADecomposer

        decomposer = FastICADecomposer() if self.decomposer is None else clone(self.decomposer)
        self.decomposer_ = decomposer.fit(X)
        self.allocation_ = allocate(
            self.decomposer_.model_,
            y,
            self.funding_rates,
            self.k,
            self.lam,
            self.regime,
            self.liability_rate,
            self.refine,
        )
        self.component_weights_ = self.allocation_.component_weights
        self.asset_weights_ = self.allocation_.asset_weights
        self.n_features_in_ = self.asset_weights_.size
        return self

    def predict(self, X):
        check_is_fitted(self, "asset_weights_")
        return as_matrix(X) @ self.asset_weights_

    def surplus(self, X, y):
        """Per-period hedge P&L minus liability change."""
        return self.predict(X) - as_values(y, "liability", min_length=1)
