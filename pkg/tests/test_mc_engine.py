import math

import numpy as np
import pytest

from cmtmc.bondmath import (
    BondSpec,
    CouponMode,
    YieldFunction,
    bond_value_and_derivatives,
    cmt_from_yield,
    per_period_coupon,
)
from cmtmc.curves import DiscountCurve, HazardCurve
from cmtmc.errors import DegenerateYield, InsufficientSamples, ValidationError
from cmtmc.hazard_evolution import HazardInitMode, build_snapshot
from cmtmc.hullwhite import HullWhiteParams
from cmtmc.mc_engine import (
    PayoffKind,
    PayoffSpec,
    SimulationConfig,
    bond_vol,
    distribution_stats,
    path_generator,
    price,
    simulate,
    simulate_path,
    static_forward_cmt,
    step_yield,
    yield_vol,
)

# moderate rate level: at low yields the diffusion's near-constant absolute
# volatility (~0.7%/sqrt-yr at sigma=1%) puts paths within reach of the
# degenerate zero-yield boundary, which errors by contract
DC = DiscountCurve.flat(0.03, horizon=30.0)
HZ0 = HazardCurve.zero(horizon=30.0)
HZ = HazardCurve([(2.0, 0.002), (10.0, 0.004), (30.0, 0.006)])
PAR = BondSpec(theta=10.0, kappa=2, recovery=0.2, coupon_mode=CouponMode.CMT_PAR)
PAR_R0 = BondSpec(theta=10.0, kappa=2, recovery=0.0, coupon_mode=CouponMode.CMT_PAR)
FIXED = BondSpec(theta=10.0, kappa=2, recovery=0.0,
                 coupon_mode=CouponMode.FIXED, coupon_rate=0.012)
HW = HullWhiteParams(alpha=0.1, sigma=0.01)
HW0 = HullWhiteParams(alpha=0.1, sigma=0.0)


def config(n_paths=256, sigma=0.01, expiry=1.0, spec=PAR, seed=1234, **kw):
    hw = HullWhiteParams(alpha=0.1, sigma=sigma)
    return SimulationConfig(expiry=expiry, spec=spec, hw=hw, n_paths=n_paths,
                            seed=seed, **kw)


class TestBondVol:
    def test_zero_vol(self):
        snap = build_snapshot(DC, HW0, 1.0, PAR, 1.0 / 12.0)
        assert bond_vol(snap, 0.01, PAR, 0.02, 1.0) == 0.0

    def test_no_default_term_by_term(self):
        snap = build_snapshot(DC, HW, 1.0, PAR_R0, 1.0 / 12.0)
        w = per_period_coupon(PAR_R0, 0.02)
        oracle = snap.values[-1] * snap.vols[-1]
        for i in snap.coupon_idx:
            oracle += w * snap.values[i] * snap.vols[i]
        f_value = 0.997
        got = bond_vol(snap, 0.0, PAR_R0, 0.02, f_value)
        assert got == pytest.approx(oracle / f_value, rel=1e-13)

    def test_zero_recovery_quadrature_free(self):
        outs = [
            bond_vol(build_snapshot(DC, HW, 1.0, PAR_R0, q), 0.015, PAR_R0, 0.02, 1.0)
            for q in (1.0 / 12.0, 0.5)
        ]
        assert outs[0] == outs[1]

    def test_recovery_group_enters(self):
        snap = build_snapshot(DC, HW, 1.0, PAR, 1.0 / 12.0)
        with_r = bond_vol(snap, 0.05, PAR, 0.02, 1.0)
        no_r = bond_vol(snap, 0.05, PAR_R0, 0.02, 1.0)
        assert with_r > no_r


class TestYieldVol:
    def test_zero_bond_vol(self):
        assert yield_vol(0.02, 1.0, -8.0, 0.0) == 0.0

    def test_algebraic_identity(self):
        y, f, fp, sb = 0.023, 0.99, -8.4, 0.051
        sy = yield_vol(y, f, fp, sb)
        assert sy * y * fp == pytest.approx(f * sb, abs=1e-14)

    def test_zero_coupon_ratio(self):
        # pure discount bond: f/(y f') = -(1+y)/(theta*y)
        spec = BondSpec(theta=10.0, kappa=2, coupon_mode=CouponMode.FIXED, coupon_rate=0.0)
        y = 0.02
        f, fp, _ = bond_value_and_derivatives(YieldFunction(spec), y)
        sy = yield_vol(y, f, fp, 0.01)
        assert sy == pytest.approx(-(1.02 / 0.2) * 0.01, rel=1e-12)
        assert sy == pytest.approx(-5.1 * 0.01, rel=1e-12)

    def test_degenerate_yield(self):
        with pytest.raises(DegenerateYield):
            yield_vol(0.0, 1.0, -8.0, 0.01)


class TestStepYield:
    def test_zero_vol_identity(self):
        assert step_yield(0.02, 0.0, -8.0, 80.0, 1.0 / 365.0, 1.3) == 0.02

    def test_positivity(self):
        for z in np.linspace(-8, 8, 33):
            assert step_yield(0.02, -0.5, -8.0, 80.0, 1.0 / 365.0, z) > 0.0

    def test_close_to_raw_euler_for_small_dt(self):
        rng = np.random.default_rng(5)
        z = rng.standard_normal(1_000_000)
        y, sy, fp, fpp, dt = 0.02, 0.3, -8.0, 80.0, 1.0 / 100.0
        mu = -0.5 * (y * fpp / fp) * sy * sy
        log_euler = step_yield(y, sy, fp, fpp, dt, z)
        raw_euler = y * (1.0 + mu * dt + sy * math.sqrt(dt) * z)
        assert abs(log_euler.mean() - raw_euler.mean()) < 5e-2 * y * dt
        assert abs(log_euler.var() - raw_euler.var()) < 5e-2 * y * y * sy * sy * dt


class TestDistributionStats:
    def test_constant_sample(self):
        s = distribution_stats(np.full(64, 3.7))
        assert s.std_dev == 0.0
        assert s.skewness == 0.0
        assert s.excess_kurtosis == 0.0

    def test_symmetric_two_point(self):
        s = distribution_stats(np.array([-1.0, 1.0]))
        assert s.skewness == 0.0
        assert s.excess_kurtosis == pytest.approx(-2.0, abs=1e-14)

    def test_one_to_five(self):
        s = distribution_stats(np.array([1.0, 2.0, 3.0, 4.0, 5.0]))
        assert s.average == 3.0
        assert s.std_dev == pytest.approx(math.sqrt(2.0), abs=1e-14)
        assert s.minimum == 1.0
        assert s.maximum == 5.0

    def test_too_few(self):
        with pytest.raises(InsufficientSamples):
            distribution_stats(np.array([1.0]))


class TestRngContract:
    def test_distinct_streams(self):
        a = path_generator(7, 0).standard_normal(4)
        b = path_generator(7, 1).standard_normal(4)
        c = path_generator(8, 0).standard_normal(4)
        assert not np.allclose(a, b)
        assert not np.allclose(a, c)

    def test_reproducible(self):
        a = path_generator(7, 3, stream=2).standard_normal(4)
        b = path_generator(7, 3, stream=2).standard_normal(4)
        assert np.array_equal(a, b)


class TestSimulate:
    def test_zero_vol_terminal_equals_initial(self):
        cfg = config(n_paths=16, sigma=0.0)
        sample = simulate(cfg, DC, HZ)
        assert np.all(sample.y_terminal == sample.y0)
        assert np.all(sample.cmt == cmt_from_yield(2, sample.y0))

    def test_same_seed_bit_identical(self):
        cfg = config(n_paths=64)
        a = simulate(cfg, DC, HZ)
        b = simulate(cfg, DC, HZ)
        assert np.array_equal(a.y_terminal, b.y_terminal)
        assert np.array_equal(a.yield_vol_abs, b.yield_vol_abs)

    def test_block_size_invariance(self):
        a = simulate(config(n_paths=48, block_size=48), DC, HZ)
        b = simulate(config(n_paths=48, block_size=7), DC, HZ)
        assert np.array_equal(a.y_terminal, b.y_terminal)

    def test_worker_invariance(self):
        a = simulate(config(n_paths=48, block_size=12, workers=1), DC, HZ)
        b = simulate(config(n_paths=48, block_size=12, workers=3), DC, HZ)
        assert np.array_equal(a.y_terminal, b.y_terminal)
        assert np.array_equal(a.cmt, b.cmt)

    def test_single_path_matches_batch(self):
        cfg = config(n_paths=32)
        batch = simulate(cfg, DC, HZ)
        for p in (0, 13, 31):
            rec = simulate_path(cfg, DC, HZ, p)
            assert rec.y_terminal == batch.y_terminal[p]
            assert rec.cmt == batch.cmt[p]

    def test_martingale_forward_bond(self):
        # fixed-coupon forward bond is driftless: E[f(y_T)] = f(y_0)
        cfg = config(n_paths=4096, spec=FIXED, seed=99)
        sample = simulate(cfg, DC, HZ0)
        yf = YieldFunction(FIXED)
        f_T, _, _ = bond_value_and_derivatives(yf, sample.y_terminal)
        f_0, _, _ = bond_value_and_derivatives(yf, sample.y0)
        se = f_T.std() / math.sqrt(cfg.n_paths)
        assert abs(f_T.mean() - f_0) < 3.0 * se

    def test_path_index_validation(self):
        cfg = config(n_paths=4)
        with pytest.raises(ValidationError):
            simulate_path(cfg, DC, HZ, 4)


class TestPrice:
    def test_zero_vol_caplet_is_discounted_intrinsic(self):
        strike = 0.025
        cfg = config(n_paths=32, sigma=0.0,
                     payoff=PayoffSpec(PayoffKind.CAPLET, strike=strike))
        res = price(cfg, DC, HZ)
        cmt0 = cmt_from_yield(2, res.y0)
        intrinsic = DC.discount_factor(1.25) * 0.25 * max(cmt0 - strike, 0.0)
        assert res.mean == pytest.approx(intrinsic, abs=1e-15)
        assert res.std_error == 0.0

    def test_caplet_floorlet_parity(self):
        strike = 0.035
        base = dict(n_paths=512, seed=7)
        cap = price(config(payoff=PayoffSpec(PayoffKind.CAPLET, strike=strike), **base), DC, HZ)
        flo = price(config(payoff=PayoffSpec(PayoffKind.FLOORLET, strike=strike), **base), DC, HZ)
        df = DC.discount_factor(1.25)
        expected = df * 0.25 * (cap.expected_cmt - strike)
        # identical paths make the parity hold to rounding, not just 2 SE
        assert cap.mean - flo.mean == pytest.approx(expected, abs=1e-15)

    def test_se_scaling(self):
        k = static_forward_cmt(DC, HZ, PAR, 1.0)
        se = {}
        for n in (1024, 4096):
            res = price(config(n_paths=n, payoff=PayoffSpec(PayoffKind.CAPLET, strike=k)), DC, HZ)
            se[n] = res.std_error
        assert 0.4 <= se[4096] / se[1024] <= 0.6

    def test_terminal_yield_mean_matches_sample(self):
        cfg = config(n_paths=128)
        res = price(cfg, DC, HZ)
        assert res.mean == res.expected_yield
        assert res.sample is not None
        assert res.stats.average == pytest.approx(res.mean, abs=1e-15)

    def test_cap_sums_caplets(self):
        strike = 0.035
        cap_cfg = config(
            n_paths=64,
            payoff=PayoffSpec(PayoffKind.CAP, strike=strike, final_maturity=1.5),
        )
        res = price(cap_cfg, DC, HZ)
        total = 0.0
        for k, t_fix in enumerate((1.0, 1.25)):
            leaf = config(n_paths=64, expiry=t_fix,
                          payoff=PayoffSpec(PayoffKind.CAPLET, strike=strike))
            sample = simulate(leaf, DC, HZ, stream=k)
            df = DC.discount_factor(t_fix + 0.25)
            total += df * 0.25 * np.maximum(sample.cmt - strike, 0.0).mean()
        assert res.mean == pytest.approx(total, abs=1e-15)

    def test_monotone_in_sigma(self):
        # higher curve: sigma=2% doubles the yield's absolute vol, so the
        # zero-boundary margin shrinks accordingly
        dc = DiscountCurve.flat(0.06, horizon=30.0)
        k = static_forward_cmt(dc, HZ, PAR, 1.0)
        vals = [
            price(config(n_paths=512, sigma=s,
                         payoff=PayoffSpec(PayoffKind.CAPLET, strike=k)), dc, HZ).mean
            for s in (0.005, 0.01, 0.02)
        ]
        assert vals[0] < vals[1] < vals[2]

    def test_option_needs_strike(self):
        with pytest.raises(ValidationError):
            PayoffSpec(PayoffKind.CAPLET)

    def test_cap_needs_final_maturity(self):
        cfg = config(n_paths=8, payoff=PayoffSpec(PayoffKind.CAP, strike=0.01))
        with pytest.raises(ValidationError):
            price(cfg, DC, HZ)


class TestConfigValidation:
    def test_bad_paths(self):
        with pytest.raises(ValidationError):
            config(n_paths=0)

    def test_bad_step(self):
        with pytest.raises(ValidationError):
            SimulationConfig(expiry=1.0, spec=PAR, hw=HW, n_paths=8, seed=1, step=2.0)

    def test_fixing_schedule(self):
        p = PayoffSpec(PayoffKind.CAP, strike=0.01, final_maturity=2.0)
        fix = p.fixing_times(1.0)
        assert np.allclose(fix, [1.0, 1.25, 1.5, 1.75])
        assert np.allclose(p.pay_times(1.0), [1.25, 1.5, 1.75, 2.0])
