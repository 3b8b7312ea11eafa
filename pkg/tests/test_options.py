import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xdalm.allocation import hurdle_form_weight
from xdalm.exceptions import ArbitrageError, DegenerateInputError, InvalidInputError
from xdalm.moments import gaussian_moment
from xdalm.options import (
    CALL,
    PUT,
    Greeks,
    OptionSpec,
    VolParams,
    bs_greeks,
    bs_price,
    estimate_vol_params,
    euler_option_increments,
    implied_vol,
    option_hurdle_correction,
    option_weight,
    price_bounds,
    simulate_spot_vol_paths,
    skew_adjusted_ratio,
    straddle_implied_vol,
)

ATM = OptionSpec(100.0, 1.0, CALL)


class TestPricing:
    def test_atm_call_oracle(self):
        assert bs_price(ATM, 100.0, 0.2) == pytest.approx(7.9655674554058, rel=1e-12)

    @settings(max_examples=100)
    @given(
        st.floats(min_value=50, max_value=150),
        st.floats(min_value=0.05, max_value=1.0),
        st.floats(min_value=0.0, max_value=0.1),
        st.floats(min_value=0.05, max_value=3.0),
    )
    def test_put_call_parity(self, S, vol, r, T):
        c = bs_price(OptionSpec(100.0, T, CALL), S, vol, r)
        p = bs_price(OptionSpec(100.0, T, PUT), S, vol, r)
        assert c - p == pytest.approx(S - 100.0 * math.exp(-r * T), abs=1e-9)

    @pytest.mark.parametrize("kind", [CALL, PUT])
    @pytest.mark.parametrize("S", [80.0, 100.0, 125.0])
    def test_greeks_by_finite_differences(self, kind, S):
        spec, vol, r, h = OptionSpec(100.0, 0.5, kind), 0.25, 0.03, 1e-3
        g = bs_greeks(spec, S, vol, r)
        price = lambda s=S, v=vol, T=0.5: bs_price(spec.with_expiry(T), s, v, r)  # noqa: E731
        assert g.delta == pytest.approx((price(S + h) - price(S - h)) / (2 * h), rel=1e-6)
        assert g.gamma == pytest.approx((price(S + h) - 2 * price() + price(S - h)) / h**2, rel=1e-4)
        assert g.vega == pytest.approx((price(v=vol + 1e-5) - price(v=vol - 1e-5)) / 2e-5, rel=1e-6)
        # theta is the calendar derivative, i.e. minus the expiry derivative
        assert g.theta == pytest.approx(-(price(T=0.5 + 1e-5) - price(T=0.5 - 1e-5)) / 2e-5, rel=1e-5)
        assert g.drift == pytest.approx(g.theta + 0.5 * vol**2 * S**2 * g.gamma)

    def test_expired_is_intrinsic(self):
        assert bs_price(OptionSpec(100.0, 0.0, PUT), 90.0, 0.2) == 10.0
        assert bs_greeks(OptionSpec(100.0, 0.0, CALL), 90.0, 0.2).delta == 0.0

    def test_vectorised(self):
        out = bs_price(ATM, np.array([90.0, 100.0]), 0.2)
        assert out.shape == (2,) and out[1] == pytest.approx(7.9655674554058)

    def test_invalid(self):
        with pytest.raises(InvalidInputError):
            OptionSpec(100.0, 1.0, "straddle")
        with pytest.raises(InvalidInputError):
            OptionSpec(0.0, 1.0)
        with pytest.raises(InvalidInputError):
            bs_price(ATM, -1.0, 0.2)

    def test_greek_arithmetic(self):
        g = bs_greeks(ATM, 100.0, 0.2)
        both = g + bs_greeks(OptionSpec(100.0, 1.0, PUT), 100.0, 0.2)
        assert both.delta == pytest.approx(2 * g.delta - 1)
        assert g.scaled(-1.0).vega == -g.vega
        with pytest.raises(InvalidInputError):
            g + Greeks.zero(99.0)


class TestImpliedVol:
    @settings(max_examples=60)
    @given(st.floats(min_value=0.05, max_value=2.0), st.sampled_from([CALL, PUT]), st.floats(min_value=70, max_value=130))
    def test_round_trip(self, vol, kind, S):
        spec = OptionSpec(100.0, 0.25, kind)
        price = bs_price(spec, S, vol, 0.01)
        lo, hi = price_bounds(spec, S, 0.01)
        if not lo + 1e-8 * S < price < hi:
            return
        iv = implied_vol(spec, S, 0.01, price)
        assert abs(bs_price(spec, S, iv, 0.01) - price) < 1e-9 * S

    def test_below_intrinsic(self):
        with pytest.raises(ArbitrageError):
            implied_vol(OptionSpec(100.0, 0.5, CALL), 120.0, 0.0, 15.0)

    def test_above_spot(self):
        with pytest.raises(ArbitrageError):
            implied_vol(ATM, 100.0, 0.0, 100.0)

    def test_straddle_is_mean_of_legs(self):
        call, put = OptionSpec(100.0, 0.5, CALL), OptionSpec(100.0, 0.5, PUT)
        c, p = bs_price(call, 100.0, 0.3), bs_price(put, 100.0, 0.2)
        assert straddle_implied_vol(call, put, 100.0, 0.0, c, p) == pytest.approx(0.25, abs=1e-9)


def _greeks(S=100.0, T=0.1, kind=PUT):
    return bs_greeks(OptionSpec(100.0, T, kind), S, 0.3)


class TestOptionWeight:
    def test_skew_ratio(self):
        g = _greeks()
        vp = VolParams(0.3, 0.8, -0.6)
        assert skew_adjusted_ratio(g, vp) == pytest.approx(g.delta - 0.6 * (0.8 / 0.3) * g.vega / 100.0)

    @pytest.mark.parametrize("vp", [VolParams(0.3, 0.0, -0.6), VolParams(0.3, 0.8, 0.0)])
    def test_no_skew_reduces_to_delta(self, vp):
        g = _greeks()
        assert skew_adjusted_ratio(g, vp) == g.delta

    def test_k1_zero_drift_is_skew_ratio(self):
        g, vp = _greeks(), VolParams(0.3, 0.8, -0.6)
        assert option_weight(0.0, 0.0, 1.5, g, vp, 1, 0.01) == pytest.approx(skew_adjusted_ratio(g, vp), rel=1e-13)

    def test_k1_huge_lambda_is_delta(self):
        g = _greeks()
        assert option_weight(0.01, 0.0, 1.5, g, VolParams(0.3), 1, 1e12) == pytest.approx(g.delta, rel=1e-9)

    @pytest.mark.parametrize("k", [1, 2, 5, 30])
    def test_equals_hurdle_form(self, k):
        g, vp, sigma, lam = _greeks(T=0.2, kind=CALL), VolParams(0.3, 0.5, -0.4), 1.3, 0.02
        rc = option_hurdle_correction(g, vp, k, lam, sigma=sigma)
        w = option_weight(0.003, 0.001, sigma, g, vp, k, lam)
        assert w == pytest.approx(hurdle_form_weight(0.003, 0.001, rc, gaussian_moment(sigma, k), k, lam), rel=1e-11)

    def test_unit_sigma_hurdle(self):
        g, vp = _greeks(), VolParams(0.3, 0.8, -0.6)
        want = 2 * 3 * 0.01 * 15 * skew_adjusted_ratio(g, vp)  # 2k lam (2k-1)!! ratio at k=3
        assert option_hurdle_correction(g, vp, 3, 0.01) == pytest.approx(want, rel=1e-12)

    def test_large_k_sign_limit(self):
        g = _greeks()
        w = option_weight(0.0, 0.0, 1.5, g, VolParams(0.3), 200, 0.01)
        assert abs(w) == pytest.approx(1.0, abs=0.02) and math.copysign(1, w) == math.copysign(1, g.delta)

    def test_empirical_moment_override(self):
        g, vp = _greeks(), VolParams(0.3)
        assert option_weight(0.01, 0.0, 2.0, g, vp, 2, 0.1, own_moment=3 * 2.0**4) == pytest.approx(option_weight(0.01, 0.0, 2.0, g, vp, 2, 0.1))

    def test_zero_moment(self):
        with pytest.raises(DegenerateInputError):
            option_weight(0.01, 0.0, 1.0, _greeks(), VolParams(0.3), 2, 0.1, own_moment=0.0)

    def test_vol_params_validation(self):
        with pytest.raises(DegenerateInputError):
            VolParams(0.0)
        with pytest.raises(InvalidInputError):
            VolParams(0.2, -1.0)
        with pytest.raises(InvalidInputError):
            VolParams(0.2, 0.5, 1.5)


class TestSimulation:
    def test_deterministic(self):
        vp = VolParams(0.2, 0.5, -0.5)
        a = simulate_spot_vol_paths(vp, 0.0, 50, 100, 0.25, seed=3)
        b = simulate_spot_vol_paths(vp, 0.0, 50, 100, 0.25, seed=3)
        assert np.array_equal(a.spot, b.spot) and np.array_equal(a.vol, b.vol)

    def test_shock_correlation(self):
        p = simulate_spot_vol_paths(VolParams(0.2, 0.3, -0.6), 0.0, 4000, 50, 0.25, seed=1)
        assert np.corrcoef(p.dW.ravel(), p.dZ.ravel())[0, 1] == pytest.approx(-0.6, abs=0.01)

    def test_constant_vol_terminal_variance(self):
        p = simulate_spot_vol_paths(VolParams(0.2), 0.0, 20000, 100, 1.0, seed=2)
        assert np.all(p.vol == 0.2)
        # Euler product of (1 + sigma sqrt(h) z): variance (1 + sigma^2 h)^n - 1
        want = (1 + 0.04 / 100) ** 100 - 1
        assert np.var(p.spot[:, -1]) == pytest.approx(want, rel=0.05)

    def test_large_vol_step_warns(self):
        with pytest.warns(UserWarning, match="reflection"):
            simulate_spot_vol_paths(VolParams(0.2, 2.0), 0.0, 2, 4, 1.0, seed=0)

    def test_bad_arguments(self):
        with pytest.raises(InvalidInputError):
            simulate_spot_vol_paths(VolParams(0.2), 0.0, 0, 10, 1.0, seed=0)
        with pytest.raises(InvalidInputError):
            simulate_spot_vol_paths(VolParams(0.2), 0.0, 10, 10, 0.0, seed=0)

    def test_euler_increment_linear(self):
        g, vp = _greeks(), VolParams(0.3, 0.8, -0.6)
        dS, dO = euler_option_increments(g, vp, np.array([0.0, 1.0]), np.array([0.0, 0.0]), 0.01)
        assert dS[0] == 0.0 and dO[0] == pytest.approx(g.drift * 0.01)
        assert dO[1] - dO[0] == pytest.approx(g.delta * dS[1])

    def test_estimate_vol_params(self):
        # one year per path keeps the vol level near sigma and away from the reflection
        p = simulate_spot_vol_paths(VolParams(0.2, 0.1, -0.6), 0.0, 100, 252, 1.0, seed=4)
        rets = np.diff(p.spot, axis=1) / p.spot[:, :-1]
        ests = [estimate_vol_params(rets[i], p.vol[i], 1 / 252) for i in range(100)]
        assert np.mean([e.q for e in ests]) == pytest.approx(-0.6, abs=0.03)
        assert np.mean([e.alpha for e in ests]) == pytest.approx(0.1, rel=0.03)

    def test_estimate_misaligned(self):
        with pytest.raises(InvalidInputError):
            estimate_vol_params(np.zeros(5), np.ones(5), 1 / 252)
