"""Central and cross moments, VaR/CVaR and the extreme deviation (XD).

High-order moments are evaluated as sign and log-magnitude so that orders
up to a few hundred neither underflow (small per-period returns) nor
overflow (double factorials).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ._validation import (
    as_aligned_pair,
    as_values,
    check_k,
    check_order,
    check_probability,
)
from .exceptions import InvalidInputError, SmallSampleWarning

# Relative tolerance under which a sample counts as attaining the maximum.
EXTREMAL_TIE_RTOL = 1e-9


@dataclass(frozen=True)
class SignedLogValue:
    """A real number stored as ``sign * exp(log_magnitude)``.

    ``sign`` is one of -1, 0, +1; when it is 0 the magnitude is ignored.
    """

    sign: int
    log_magnitude: float = -math.inf

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise InvalidInputError(f"sign must be -1, 0 or 1, got {self.sign}")
        if self.sign == 0:
            object.__setattr__(self, "log_magnitude", -math.inf)
        elif math.isnan(self.log_magnitude) or self.log_magnitude == -math.inf:
            raise InvalidInputError("non-zero SignedLogValue needs a finite log magnitude")

    @classmethod
    def from_value(cls, x: float) -> "SignedLogValue":
        x = float(x)
        if not math.isfinite(x):
            raise InvalidInputError(f"cannot represent {x}")
        if x == 0.0:
            return cls(0)
        return cls(1 if x > 0 else -1, math.log(abs(x)))

    @classmethod
    def zero(cls) -> "SignedLogValue":
        return cls(0)

    @property
    def value(self) -> float:
        """Plain float; +-inf on overflow, 0.0 on underflow."""
        if self.sign == 0:
            return 0.0
        try:
            return self.sign * math.exp(self.log_magnitude)
        except OverflowError:
            return self.sign * math.inf

    def __float__(self):
        return self.value

    def __neg__(self):
        return SignedLogValue(-self.sign, self.log_magnitude)

    def __mul__(self, other):
        other = _coerce(other)
        if self.sign == 0 or other.sign == 0:
            return SignedLogValue(0)
        return SignedLogValue(self.sign * other.sign, self.log_magnitude + other.log_magnitude)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _coerce(other)
        if other.sign == 0:
            raise ZeroDivisionError("division by a zero SignedLogValue")
        if self.sign == 0:
            return SignedLogValue(0)
        return SignedLogValue(self.sign * other.sign, self.log_magnitude - other.log_magnitude)

    def __rtruediv__(self, other):
        return _coerce(other) / self

    def __add__(self, other):
        return signed_log_sum([self, _coerce(other)])

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-_coerce(other))

    def __rsub__(self, other):
        return _coerce(other) - self

    def power(self, exponent: float) -> "SignedLogValue":
        """Non-negative values only; use :meth:`odd_root` for signed roots."""
        if self.sign < 0:
            raise InvalidInputError("real power of a negative value; use odd_root")
        if self.sign == 0:
            if exponent <= 0:
                raise ZeroDivisionError("non-positive power of zero")
            return self
        return SignedLogValue(1, self.log_magnitude * exponent)

    def odd_root(self, index: int) -> "SignedLogValue":
        """Real ``index``-th root, ``index`` odd: sign(x) * |x|**(1/index)."""
        if index < 1 or index % 2 == 0:
            raise InvalidInputError(f"odd root index must be odd and positive, got {index}")
        if self.sign == 0:
            return self
        return SignedLogValue(self.sign, self.log_magnitude / index)

    def integer_power(self, n: int) -> "SignedLogValue":
        if self.sign == 0:
            return self if n > 0 else SignedLogValue(1, 0.0)
        sign = self.sign if n % 2 else 1
        return SignedLogValue(sign, self.log_magnitude * n)


def _coerce(x) -> SignedLogValue:
    if isinstance(x, SignedLogValue):
        return x
    return SignedLogValue.from_value(x)


def signed_log_sum(terms) -> SignedLogValue:
    """Sum of SignedLogValues, done with a signed log-sum-exp."""
    terms = [t for t in map(_coerce, terms) if t.sign != 0]
    if not terms:
        return SignedLogValue(0)
    logs = np.array([t.log_magnitude for t in terms])
    signs = np.array([t.sign for t in terms], dtype=float)
    return _signed_lse(logs, signs)


def _signed_lse(logs, signs, shift=0.0) -> SignedLogValue:
    if logs.size == 0:
        return SignedLogValue(0)
    with np.errstate(divide="ignore"):
        out, sgn = logsumexp(logs, b=signs, return_sign=True)
    if sgn == 0 or not np.isfinite(out):
        return SignedLogValue(0)
    return SignedLogValue(int(sgn), float(out) - shift)


def _deviations(values: np.ndarray) -> np.ndarray:
    if values.min() == values.max():
        return np.zeros_like(values)
    return values - values.mean()


def central_moment(x, order: int) -> SignedLogValue:
    """Sample central moment ``(1/n) sum (x_i - mean)**order`` for even ``order``."""
    order = check_order(order)
    dev = _deviations(as_values(x))
    return _even_power_mean(dev, order)


def _even_power_mean(dev: np.ndarray, order: int) -> SignedLogValue:
    nz = dev[dev != 0.0]
    if nz.size == 0:
        return SignedLogValue(0)
    logs = order * np.log(np.abs(nz))
    return SignedLogValue(1, float(logsumexp(logs)) - math.log(dev.size))


def cross_moment(c, l, k: int, r_L: float = 0.0) -> SignedLogValue:
    """Sample average of ``(c_i - mean(c)) * (l_i - r_L)**(2k-1)``.

    ``r_L`` is the per-period liability drift removed from ``l``; the
    component is always de-meaned with its own sample mean.
    """
    k = check_k(k)
    cv, lv = as_aligned_pair(c, l, ("component", "liability"))
    dc = _deviations(cv)
    dl = lv - float(r_L)
    mask = (dc != 0.0) & (dl != 0.0)
    if not mask.any():
        return SignedLogValue(0)
    dc, dl = dc[mask], dl[mask]
    p = 2 * k - 1
    logs = np.log(np.abs(dc)) + p * np.log(np.abs(dl))
    signs = np.sign(dc) * np.sign(dl) ** p
    return _signed_lse(logs, signs, shift=math.log(cv.size))


@dataclass(frozen=True)
class XdEstimate:
    """Extreme deviation of a sample and its moment-root sequence.

    ``moment_sequence[j]`` holds ``(E dx**(2(j+1)))**(1/(2(j+1)))``.
    """

    xd_value: float
    extremal_count: int
    n_samples: int
    moment_sequence: np.ndarray

    def limit_bound(self, k: int) -> float:
        """Lower bound ``xd * (n0/n)**(1/2k)`` forced by the extremal points."""
        return self.xd_value * (self.extremal_count / self.n_samples) ** (1.0 / (2 * k))


def xd(x, k_max: int = 100) -> XdEstimate:
    """Maximum absolute de-meaned return and the 2k-moment roots for k=1..k_max."""
    k_max = check_k(k_max)
    dev = _deviations(as_values(x))
    n = dev.size
    absdev = np.abs(dev)
    xd_value = float(absdev.max())
    if xd_value == 0.0:
        return XdEstimate(0.0, n, n, np.zeros(k_max))
    n0 = int(np.count_nonzero(absdev >= xd_value * (1.0 - EXTREMAL_TIE_RTOL)))
    # ratios are <= 1 exactly, so every root is <= 1 up to the final rounding
    ratios = absdev[absdev > 0] / xd_value
    log_ratios = np.log(ratios)
    orders = 2 * np.arange(1, k_max + 1)
    lse = logsumexp(orders[:, None] * log_ratios[None, :], axis=1) - math.log(n)
    roots = np.minimum(np.exp(lse / orders), 1.0)
    return XdEstimate(xd_value, n0, n, xd_value * roots)


def var_cvar(x, p: float) -> tuple[float, float]:
    """Empirical VaR and CVaR at level ``p`` of de-meaned returns; losses positive.

    With ``m = ceil((1 - p) n)``, VaR is the m-th largest loss and CVaR is the
    mean of the m largest losses.
    """
    p = check_probability(p)
    values = as_values(x)
    n = values.size
    if n < 1.0 / (1.0 - p):
        warnings.warn(
            f"{n} samples is fewer than 1/(1-p) = {1.0 / (1.0 - p):.0f}; "
            "the tail estimate rests on the single worst loss",
            SmallSampleWarning,
            stacklevel=2,
        )
    losses = np.sort(-_deviations(values))[::-1]
    m = max(1, math.ceil((1.0 - p) * n - 1e-9))
    return float(losses[m - 1]), float(losses[:m].mean())


def double_factorial_log(m: int) -> SignedLogValue:
    """``log(1 * 3 * 5 * ... * m)`` for odd positive ``m``."""
    if int(m) != m or m < 1 or m % 2 == 0:
        raise InvalidInputError(f"double factorial argument must be odd and positive, got {m}")
    k = (int(m) + 1) // 2
    # m!! = (2k)! / (2**k k!)
    return SignedLogValue(1, math.lgamma(2 * k + 1) - k * math.log(2.0) - math.lgamma(k + 1))


def gaussian_moment(sigma: float, k: int) -> SignedLogValue:
    """``(2k-1)!! sigma**(2k)``, the 2k-th central moment of N(0, sigma**2)."""
    k = check_k(k)
    if not sigma > 0:
        raise InvalidInputError(f"sigma must be positive, got {sigma}")
    return double_factorial_log(2 * k - 1) * SignedLogValue(1, 2 * k * math.log(sigma))
