import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from xdalm.exceptions import AlignmentError, InvalidInputError
from xdalm.liability import CashflowSchedule, DiscountCurve, liability_returns, npv, revalue

FLAT5 = DiscountCurve([0.5, 30.0], [0.05, 0.05])


def dated(rate, day, tenors=(0.5, 30.0)):
    return DiscountCurve(list(tenors), [rate] * len(tenors), np.datetime64("2024-01-01") + day)


class TestNPV:
    def test_single_cashflow(self):
        assert npv(CashflowSchedule([1.0], [100.0]), FLAT5) == pytest.approx(95.1229424500714, rel=1e-13)

    def test_zero_rate_sums(self):
        sched = CashflowSchedule([1, 2, 3], [10.0, 20.0, 30.0])
        assert npv(sched, DiscountCurve([1, 10], [0.0, 0.0])) == pytest.approx(60.0)

    @given(st.floats(min_value=0.01, max_value=100), st.floats(min_value=0.01, max_value=100))
    def test_linear_in_amounts(self, a, b):
        t = [1.0, 5.0]
        lhs = npv(CashflowSchedule(t, [a + b, 2 * a]), FLAT5)
        rhs = npv(CashflowSchedule(t, [a, 2 * a]), FLAT5) + npv(CashflowSchedule(t, [b, 0.0]), FLAT5)
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_interpolation_and_flat_extrapolation(self):
        c = DiscountCurve([1.0, 3.0], [0.01, 0.03])
        assert c.zero_rate(2.0) == pytest.approx(0.02)
        assert c.zero_rate(0.1) == pytest.approx(0.01) and c.zero_rate(50) == pytest.approx(0.03)

    def test_one_bp_on_ten_year_zero(self):
        sched = CashflowSchedule([10.0], [1.0])
        base = npv(sched, FLAT5)
        bumped = npv(sched, FLAT5.shifted(1.0))
        assert (bumped - base) / base == pytest.approx(math.expm1(-10e-4), rel=1e-10)
        assert (bumped - base) / base == pytest.approx(-0.001, rel=0.001)


class TestSchedule:
    @pytest.mark.parametrize(
        "times,amounts",
        [([], []), ([1, 2], [1.0]), ([2, 1], [1.0, 1.0]), ([0, 1], [1.0, 1.0]), ([1], [-1.0]), ([1, 2], [0.0, 0.0])],
    )
    def test_rejected(self, times, amounts):
        with pytest.raises(InvalidInputError):
            CashflowSchedule(times, amounts)

    def test_curve_validation(self):
        with pytest.raises(InvalidInputError):
            DiscountCurve([1.0], [0.01])
        with pytest.raises(InvalidInputError):
            DiscountCurve([2.0, 1.0], [0.01, 0.02])
        with pytest.raises(InvalidInputError):
            DiscountCurve([1.0, 2.0], [0.01, float("nan")])


class TestRevalue:
    def test_frozen_flat_curves_have_zero_changes(self):
        sched = CashflowSchedule([1, 5, 10], [1.0, 1.0, 1.0])
        rv = revalue(sched, [dated(0.03, d) for d in range(5)], roll=False)
        np.testing.assert_allclose(rv.changes, 0.0, atol=1e-14)

    def test_roll_accretes_at_the_rate(self):
        sched = CashflowSchedule([10.0], [1.0])
        rv = revalue(sched, [dated(0.04, 0), dated(0.04, 365)], roll=True)
        assert rv.returns[0] == pytest.approx(math.expm1(0.04 * 365 / 365.25), rel=1e-12)

    def test_paid_cashflow_counted(self):
        sched = CashflowSchedule([0.01, 5.0], [7.0, 1.0])
        rv = revalue(sched, [dated(0.0, 0), dated(0.0, 10)], roll=True)
        assert rv.paid[1] == 7.0
        assert rv.changes[0] == pytest.approx(0.0, abs=1e-14)
        assert rv.npv[1] == pytest.approx(1.0)

    def test_rate_rise_lowers_value(self):
        sched = CashflowSchedule([5.0, 10.0], [1.0, 1.0])
        rv = revalue(sched, [dated(0.02, 0), dated(0.03, 1)], roll=False)
        assert rv.changes[0] < 0

    def test_lengths(self):
        sched = CashflowSchedule([5.0], [1.0])
        curves = [dated(0.02, d) for d in range(6)]
        rv = revalue(sched, curves)
        assert rv.npv.size == 6 and rv.changes.size == 5
        series = liability_returns(sched, curves)
        assert series.values.size == 5

    def test_unsorted_dates(self):
        with pytest.raises(AlignmentError):
            revalue(CashflowSchedule([5.0], [1.0]), [dated(0.02, 2), dated(0.02, 1)])

    def test_duplicate_dates(self):
        with pytest.raises(AlignmentError):
            revalue(CashflowSchedule([5.0], [1.0]), [dated(0.02, 1), dated(0.02, 1)])

    def test_undated_roll(self):
        with pytest.raises(AlignmentError):
            revalue(CashflowSchedule([5.0], [1.0]), [FLAT5, FLAT5], roll=True)

    def test_single_curve(self):
        with pytest.raises(InvalidInputError):
            revalue(CashflowSchedule([5.0], [1.0]), [dated(0.02, 0)])
