import math

import numpy as np
import pytest

from cmtmc.bondmath import (
    BondSpec,
    CouponMode,
    YieldFunction,
    bond_derivatives,
    bond_from_yield,
    bond_value_and_derivatives,
    cmt_from_yield,
    gamma_integral,
    initial_forward_yield,
    per_period_coupon,
    yield_from_bond,
)
from cmtmc.curves import DiscountCurve, HazardCurve
from cmtmc.errors import DomainError, InversionRangeError, ValidationError


def fixed_spec(coupon=0.04, theta=10.0, kappa=2, recovery=0.0):
    return BondSpec(theta=theta, kappa=kappa, recovery=recovery,
                    coupon_mode=CouponMode.FIXED, coupon_rate=coupon)


def par_spec(theta=10.0, kappa=2, recovery=0.0):
    return BondSpec(theta=theta, kappa=kappa, recovery=recovery,
                    coupon_mode=CouponMode.CMT_PAR)


def brute_force_price(coupon_per_period, theta, kappa, x):
    """Direct cashflow summation of the transfer function."""
    total = 0.0
    for i in range(1, int(kappa * theta) + 1):
        total += coupon_per_period / (1.0 + x) ** (i / kappa)
    return total + (1.0 + x) ** (-theta)


class TestBondFromYield:
    def test_par_identity(self):
        for y in (0.001, 0.01, 0.05):
            yf = YieldFunction(par_spec(), coupon_rate_in_effect=y)
            assert abs(bond_from_yield(yf, y) - 1.0) < 1e-12

    def test_zero_coupon_closed_form(self):
        yf = YieldFunction(fixed_spec(coupon=0.0))
        assert bond_from_yield(yf, 0.02) == pytest.approx(1.02 ** -10, abs=1e-14)

    def test_matches_brute_force_summation(self):
        yf = YieldFunction(fixed_spec(coupon=0.04))
        got = bond_from_yield(yf, 0.04)
        oracle = brute_force_price(0.02, 10.0, 2, 0.04)
        assert got == pytest.approx(oracle, abs=1e-12)
        # semiannual 4% coupons at a 4% annually-compounded yield price a
        # touch above par (per-period coupon exceeds the period yield)
        assert got == pytest.approx(1.0, abs=5e-3)

    @pytest.mark.parametrize("x", [0.0, 1e-9, -1e-9, 1e-8])
    def test_zero_yield_limit(self, x):
        yf = YieldFunction(fixed_spec(coupon=0.04))
        # f(0) = theta*coupon + 1 for a fixed-coupon bond
        assert bond_from_yield(yf, x) == pytest.approx(1.4, abs=1e-6)

    def test_series_branch_consistency(self):
        # both sides of the series/closed-form switch agree with direct
        # cashflow summation, so the branch introduces no jump of its own
        yf = YieldFunction(fixed_spec(coupon=0.03, theta=7.0, kappa=4))
        for x in (9.99e-8, 1.01e-7):
            oracle = brute_force_price(0.03 / 4, 7.0, 4, x)
            assert bond_from_yield(yf, x) == pytest.approx(oracle, abs=1e-10)

    def test_domain_error(self):
        yf = YieldFunction(fixed_spec())
        with pytest.raises(DomainError):
            bond_from_yield(yf, -1.0)

    def test_strictly_decreasing_grid(self):
        for yf in (YieldFunction(fixed_spec(coupon=0.04)),
                   YieldFunction(par_spec(), coupon_rate_in_effect=0.02)):
            xs = np.linspace(-0.99, 9.99, 1000)
            vals = bond_from_yield(yf, xs)
            assert np.all(np.diff(vals) < 0.0)


class TestBondDerivatives:
    def test_negative_slope(self):
        xs = np.linspace(1e-4, 5.0, 50)
        for yf in (YieldFunction(fixed_spec(coupon=0.05)),
                   YieldFunction(par_spec(), coupon_rate_in_effect=0.03)):
            fp, _ = bond_derivatives(yf, xs)
            assert np.all(fp < 0.0)

    @pytest.mark.parametrize("x", [0.005, 0.02, 0.08, 0.2])
    def test_matches_central_differences(self, x):
        yf = YieldFunction(fixed_spec(coupon=0.04))
        h = 1e-6
        fp, fpp = bond_derivatives(yf, x)
        f_hi = bond_from_yield(yf, x + h)
        f_lo = bond_from_yield(yf, x - h)
        f_0 = bond_from_yield(yf, x)
        fd1 = (f_hi - f_lo) / (2 * h)
        fd2 = (f_hi - 2 * f_0 + f_lo) / (h * h)
        assert fp == pytest.approx(fd1, rel=1e-6)
        assert fpp == pytest.approx(fd2, rel=1e-4)

    def test_zero_coupon_derivative_closed_form(self):
        yf = YieldFunction(fixed_spec(coupon=0.0))
        x = 0.03
        fp, _ = bond_derivatives(yf, x)
        assert fp == pytest.approx(-10.0 * 1.03 ** -11, rel=1e-13)

    def test_cmt_par_derivative_holds_reference_fixed(self):
        yf = YieldFunction(par_spec(), coupon_rate_in_effect=0.02)
        h = 1e-6
        fp, _ = bond_derivatives(yf, 0.02)
        fd = (bond_from_yield(yf, 0.02 + h) - bond_from_yield(yf, 0.02 - h)) / (2 * h)
        assert fp == pytest.approx(fd, rel=1e-6)


class TestYieldFromBond:
    def test_roundtrip(self):
        yf = YieldFunction(fixed_spec(coupon=0.04))
        assert yield_from_bond(yf, bond_from_yield(yf, 0.03)) == pytest.approx(0.03, abs=1e-10)

    def test_roundtrip_grid(self):
        yf = YieldFunction(fixed_spec(coupon=0.02))
        for x in np.linspace(0.001, 0.10, 100):
            g = yield_from_bond(yf, bond_from_yield(yf, x))
            assert g == pytest.approx(x, abs=1e-10)

    def test_par_inverse(self):
        yf = YieldFunction(par_spec(), coupon_rate_in_effect=0.0234)
        assert yield_from_bond(yf, 1.0) == pytest.approx(0.0234, abs=1e-10)

    def test_zero_coupon_closed_form(self):
        yf = YieldFunction(fixed_spec(coupon=0.0))
        b = 1.02 ** -10
        assert yield_from_bond(yf, b) == pytest.approx(0.02, abs=1e-10)

    def test_out_of_range(self):
        yf = YieldFunction(fixed_spec(coupon=0.0))
        with pytest.raises(InversionRangeError):
            yield_from_bond(yf, 1e-30)


class TestCmtFromYield:
    def test_zero(self):
        assert cmt_from_yield(2, 0.0) == 0.0

    def test_annual_identity(self):
        assert cmt_from_yield(1, 0.0345) == pytest.approx(0.0345, abs=1e-15)

    def test_semiannual(self):
        assert cmt_from_yield(2, 0.04) == pytest.approx(2 * (math.sqrt(1.04) - 1), abs=1e-14)

    def test_compounding_inequality(self):
        for kappa in (1, 2, 4, 12):
            for y in np.linspace(0.0, 0.2, 21):
                assert cmt_from_yield(kappa, y) <= y + 1e-15


class TestGammaIntegral:
    def test_zero_intensity(self):
        got = gamma_integral(lambda u: np.ones_like(u), lambda u: np.ones_like(u),
                             lambda u: np.zeros_like(u), 0.0, 10.0)
        assert got == 0.0

    def test_constant_intensity_closed_form(self):
        lam = 0.02
        got = gamma_integral(
            lambda u: np.ones_like(u),
            lambda u: np.exp(-lam * u),
            lambda u: np.full_like(u, lam),
            0.0, 10.0, quad_step=1.0 / 12.0,
        )
        assert got == pytest.approx(1.0 - math.exp(-0.2), abs=1e-6)

    def test_quadratic_refinement(self):
        lam = 0.05
        exact = 1.0 - math.exp(-0.5)
        args = (
            lambda u: np.ones_like(u),
            lambda u: np.exp(-lam * u),
            lambda u: np.full_like(u, lam),
            0.0, 10.0,
        )
        err_coarse = abs(gamma_integral(*args, quad_step=1.0 / 6.0) - exact)
        err_fine = abs(gamma_integral(*args, quad_step=1.0 / 12.0) - exact)
        assert err_fine < err_coarse / 3.0  # ~4x per halving for smooth integrands

    def test_empty_interval(self):
        got = gamma_integral(lambda u: u, lambda u: u, lambda u: u, 2.0, 2.0)
        assert got == 0.0


class TestInitialForwardYield:
    def test_flat_curve_closed_form(self):
        dc = DiscountCurve.flat(0.01, horizon=30.0)
        hz = HazardCurve.zero(horizon=30.0)
        spec = par_spec(theta=10.0, kappa=2)
        y0 = initial_forward_yield(dc, hz, spec, expiry=1.0)
        # direct summation oracle over the 20 coupon dates
        dates = 1.0 + np.arange(1, 21) / 2.0
        s_df = np.exp(-0.01 * (dates - 1.0))
        principal = math.exp(-0.01 * 10.0)
        oracle = (1.0 + (1.0 - principal) / s_df.sum()) ** 2 - 1.0
        assert y0 == pytest.approx(oracle, abs=1e-14)
        assert y0 == pytest.approx(math.exp(0.01) - 1.0, abs=1e-12)

    def test_recovery_irrelevant_without_default_risk(self):
        dc = DiscountCurve.flat(0.015, horizon=30.0)
        hz = HazardCurve.zero(horizon=30.0)
        ys = [
            initial_forward_yield(dc, hz, par_spec(theta=10.0, kappa=2, recovery=r), 2.0)
            for r in (0.0, 0.2, 0.4)
        ]
        assert ys[0] == ys[1] == ys[2]

    def test_par_repricing(self):
        dc = DiscountCurve([(0.0, 1.0), (1.0, 0.998), (5.0, 0.985), (12.0, 0.93), (30.0, 0.77)])
        hz = HazardCurve([(2.0, 0.003), (8.0, 0.006), (30.0, 0.01)])
        spec = par_spec(theta=10.0, kappa=2, recovery=0.3)
        expiry = 1.5
        y0 = initial_forward_yield(dc, hz, spec, expiry)
        # a bond paying the implied par coupon must reprice to notional
        w = per_period_coupon(spec, y0)
        dates = expiry + spec.coupon_offsets()
        s_df = hz.forward_survival(expiry, dates) * dc.forward_df(expiry, dates)
        principal = (hz.forward_survival(expiry, expiry + 10.0)
                     * dc.forward_df(expiry, expiry + 10.0))
        gamma = gamma_integral(
            lambda u: dc.forward_df(expiry, u),
            lambda u: hz.forward_survival(expiry, u),
            hz.intensity, expiry, expiry + 10.0,
        )
        price = principal + w * s_df.sum() + 0.3 * gamma
        assert price == pytest.approx(1.0, abs=1e-9)

    def test_monotone_in_rates(self):
        hz = HazardCurve.zero(horizon=30.0)
        spec = par_spec()
        y_low = initial_forward_yield(DiscountCurve.flat(0.01, 30.0), hz, spec, 1.0)
        y_high = initial_forward_yield(DiscountCurve.flat(0.02, 30.0), hz, spec, 1.0)
        assert y_high > y_low


class TestSpecValidation:
    def test_bad_tenor(self):
        with pytest.raises(ValidationError):
            BondSpec(theta=0.0, kappa=2)

    def test_bad_kappa(self):
        with pytest.raises(ValidationError):
            BondSpec(theta=10.0, kappa=0)

    def test_bad_recovery(self):
        with pytest.raises(ValidationError):
            BondSpec(theta=10.0, kappa=2, recovery=1.0)

    def test_coupon_offsets(self):
        spec = fixed_spec(theta=10.0, kappa=2)
        offs = spec.coupon_offsets()
        assert len(offs) == 20
        assert offs[0] == 0.5
        assert offs[-1] == 10.0
