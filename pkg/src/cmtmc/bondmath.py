"""Bond/yield transfer function, CMT conversion, and the initial forward yield.

The transfer function for a constant-coupon bullet bond with tenor theta and
kappa coupons per year, per unit notional and yield x (annual compounding), is

    f(x) = w * (1 - (1+x)^-theta) / ((1+x)^(1/kappa) - 1) + (1+x)^-theta

where w is the coupon paid per period. In fixed-coupon mode w = coupon/kappa;
in CMT-par mode w = (1+y_ref)^(1/kappa) - 1 for a reference yield y_ref, which
makes f(y_ref) = 1 identically (the bond is at par when the yield equals the
reference). The removable singularity at x = 0 is evaluated by series.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from ._grids import quadrature_nodes, trapezoid_weights
from .curves import DiscountCurve, HazardCurve
from .errors import (
    ConvergenceError,
    DegenerateCurve,
    DomainError,
    InvalidTenor,
    InversionRangeError,
    ValidationError,
)

# f is defined for x > -1 + _X_FLOOR; the annuity ratio switches to its
# series form below _X_SERIES to avoid 0/0 at the origin.
_X_FLOOR = 1e-8
_X_SERIES = 1e-7

# safeguarded Newton bracket and tolerance for the inverse g
_INV_BRACKET_HIGH = 10.0
_INV_PRICE_TOL = 1e-12
_INV_MAX_ITER = 200


class CouponMode(enum.Enum):
    FIXED = "fixed"
    CMT_PAR = "cmt_par"


@dataclass(frozen=True)
class BondSpec:
    """Constant-maturity bond contract: tenor, coupon frequency, recovery.

    theta is the rolling tenor in years, kappa the number of coupons per
    year. coupon_rate is the per-annum fixed coupon and is ignored in
    CMT-par mode, where the coupon is pinned to the prevailing yield.
    """

    theta: float
    kappa: int
    recovery: float = 0.0
    coupon_mode: CouponMode = CouponMode.CMT_PAR
    coupon_rate: float = 0.0

    def __post_init__(self):
        if self.theta <= 0.0:
            raise ValidationError(f"tenor must be positive, got {self.theta}")
        if int(self.kappa) != self.kappa or self.kappa < 1:
            raise ValidationError(f"coupon frequency must be a positive integer, got {self.kappa}")
        if not 0.0 <= self.recovery < 1.0:
            raise ValidationError(f"recovery must be in [0, 1), got {self.recovery}")
        if self.coupon_rate < 0.0:
            raise ValidationError(f"coupon rate must be non-negative, got {self.coupon_rate}")

    @property
    def n_coupons(self) -> int:
        return int(math.floor(self.kappa * self.theta + 1e-9))

    def coupon_offsets(self) -> np.ndarray:
        """Coupon dates as offsets from the forward start: i/kappa, i=1..kappa*theta."""
        return np.arange(1, self.n_coupons + 1) / self.kappa


@dataclass(frozen=True)
class YieldFunction:
    """The transfer function f for a given bond spec.

    coupon_rate_in_effect is the CMT-par reference yield (the proxy for the
    terminal yield fixing the coupon); unused in fixed-coupon mode.
    """

    spec: BondSpec
    coupon_rate_in_effect: float | np.ndarray = 0.0

    def __post_init__(self):
        if self.spec.coupon_mode is CouponMode.CMT_PAR:
            if np.any(np.asarray(self.coupon_rate_in_effect) < -1.0 + _X_FLOOR):
                raise ValidationError("CMT-par reference yield out of domain")


def per_period_coupon(spec: BondSpec, y_ref) -> float | np.ndarray:
    """Coupon paid per period: coupon/kappa (fixed) or (1+y_ref)^(1/k)-1 (par)."""
    if spec.coupon_mode is CouponMode.FIXED:
        return spec.coupon_rate / spec.kappa
    return np.expm1(np.log1p(y_ref) / spec.kappa)


def _annuity_terms(theta: float, kappa: int, x: np.ndarray):
    """Annuity ratio A(x) = (1-(1+x)^-theta)/((1+x)^(1/k)-1) and derivatives."""
    ik = 1.0 / kappa
    A = np.empty_like(x)
    Ap = np.empty_like(x)
    App = np.empty_like(x)

    near = np.abs(x) < _X_SERIES
    if np.any(near):
        xs = x[near]
        a = -(theta + 1.0) / 2.0
        c = (ik - 1.0) / 2.0
        b = (theta + 1.0) * (theta + 2.0) / 6.0
        d = (ik - 1.0) * (ik - 2.0) / 6.0
        q2 = b - d + c * c - a * c
        kt = kappa * theta
        A[near] = kt * (1.0 + (a - c) * xs + q2 * xs * xs)
        Ap[near] = kt * ((a - c) + 2.0 * q2 * xs)
        App[near] = 2.0 * kt * q2

    far = ~near
    if np.any(far):
        u = np.log1p(x[far])
        e_t = np.exp(-theta * u)          # (1+x)^-theta
        e_t1 = np.exp(-(theta + 1.0) * u)
        e_t2 = np.exp(-(theta + 2.0) * u)
        N = -np.expm1(-theta * u)         # 1 - (1+x)^-theta, stable near 0
        Np = theta * e_t1
        Npp = -theta * (theta + 1.0) * e_t2
        D = np.expm1(ik * u)              # (1+x)^(1/k) - 1, stable near 0
        Dp = ik * np.exp((ik - 1.0) * u)
        Dpp = ik * (ik - 1.0) * np.exp((ik - 2.0) * u)
        Af = N / D
        Apf = (Np - Af * Dp) / D
        A[far] = Af
        Ap[far] = Apf
        App[far] = (Npp - Af * Dpp - 2.0 * Apf * Dp) / D
    return A, Ap, App


def bond_value_and_derivatives(yf: YieldFunction, x):
    """f(x), f'(x), f''(x) for scalar or array yields."""
    xx = np.atleast_1d(np.asarray(x, dtype=float))
    scalar = np.ndim(x) == 0
    if np.any(xx <= -1.0 + _X_FLOOR):
        raise DomainError(f"yield out of domain (must exceed {-1.0 + _X_FLOOR})")
    spec = yf.spec
    w = per_period_coupon(spec, yf.coupon_rate_in_effect)
    u = np.log1p(xx)
    P = np.exp(-spec.theta * u)
    Pp = -spec.theta * np.exp(-(spec.theta + 1.0) * u)
    Ppp = spec.theta * (spec.theta + 1.0) * np.exp(-(spec.theta + 2.0) * u)
    A, Ap, App = _annuity_terms(spec.theta, spec.kappa, xx)
    f = w * A + P
    fp = w * Ap + Pp
    fpp = w * App + Ppp
    if scalar:
        return float(f[0]), float(fp[0]), float(fpp[0])
    return f, fp, fpp


def bond_from_yield(yf: YieldFunction, x):
    """Bond price per unit notional at yield x."""
    return bond_value_and_derivatives(yf, x)[0]


def bond_derivatives(yf: YieldFunction, x):
    """(f'(x), f''(x)), exact analytic forms."""
    _, fp, fpp = bond_value_and_derivatives(yf, x)
    return fp, fpp


def yield_from_bond(yf: YieldFunction, price: float) -> float:
    """Inverse transfer g(price): safeguarded Newton inside a fixed bracket."""
    lo = -1.0 + 2.0 * _X_FLOOR
    hi = _INV_BRACKET_HIGH
    r_lo = bond_from_yield(yf, lo) - price
    r_hi = bond_from_yield(yf, hi) - price
    if r_lo == 0.0:
        return lo
    if r_hi == 0.0:
        return hi
    if r_lo < 0.0 or r_hi > 0.0:
        raise InversionRangeError(
            f"price {price} outside attainable range "
            f"[{bond_from_yield(yf, hi)}, {bond_from_yield(yf, lo)}]"
        )
    x = min(max(0.05, lo), hi)
    for _ in range(_INV_MAX_ITER):
        f, fp, _ = bond_value_and_derivatives(yf, x)
        r = f - price
        if abs(r) <= _INV_PRICE_TOL:
            return x
        if r > 0.0:
            lo = x
        else:
            hi = x
        if fp != 0.0 and math.isfinite(fp):
            step = x - r / fp
        else:
            step = 0.5 * (lo + hi)
        if not (lo < step < hi):
            step = 0.5 * (lo + hi)
        x = step
    raise ConvergenceError(f"yield inversion did not converge for price {price}")


def cmt_from_yield(kappa: int, y):
    """Par coupon rate for annually-compounded yield y: kappa*((1+y)^(1/k)-1)."""
    if np.any(np.asarray(y) <= -1.0):
        raise DomainError("yield must exceed -1")
    return kappa * np.expm1(np.log1p(y) / kappa)


def gamma_integral(
    forward_df_fn,
    survival_fn,
    intensity_fn,
    t_start: float,
    t_end: float,
    quad_step: float = 1.0 / 12.0,
) -> float:
    """Recovery-leg integral of df * survival * intensity over [t_start, t_end].

    Composite trapezoid on nodes t_start, t_start+quad_step, ..., t_end with
    the final partial panel included. The callables must accept ndarrays.
    """
    if t_end < t_start:
        raise DomainError(f"empty integration interval [{t_start}, {t_end}]")
    if t_end == t_start:
        return 0.0
    nodes = quadrature_nodes(t_start, t_end, quad_step)
    w = trapezoid_weights(nodes)
    integrand = (
        np.asarray(forward_df_fn(nodes), dtype=float)
        * np.asarray(survival_fn(nodes), dtype=float)
        * np.asarray(intensity_fn(nodes), dtype=float)
    )
    return float(np.sum(w * integrand))


def initial_forward_yield(
    dc: DiscountCurve,
    hz: HazardCurve,
    spec: BondSpec,
    expiry: float,
    quad_step: float = 1.0 / 12.0,
) -> float:
    """Initial forward yield making the credit-risky par bond worth notional.

    Inverts the par condition for the forward bond: principal and coupons
    weighted by forward survival and forward discount factors, plus the
    recovery leg, must sum to one at the forward start.
    """
    if expiry < 0.0:
        raise DomainError(f"expiry must be non-negative, got {expiry}")
    if spec.theta <= 0.0:
        raise InvalidTenor(f"tenor must be positive, got {spec.theta}")
    dates = expiry + spec.coupon_offsets()
    maturity = expiry + spec.theta
    s_df = hz.forward_survival(expiry, dates) * dc.forward_df(expiry, dates)
    denom = float(np.sum(s_df))
    if denom <= 0.0:
        raise DegenerateCurve("non-positive survival-weighted annuity")
    principal = hz.forward_survival(expiry, maturity) * dc.forward_df(expiry, maturity)
    gamma = 0.0
    if spec.recovery != 0.0:
        gamma = gamma_integral(
            lambda u: dc.forward_df(expiry, u),
            lambda u: hz.forward_survival(expiry, u),
            hz.intensity,
            expiry,
            maturity,
            quad_step,
        )
    ratio = (1.0 - principal - spec.recovery * gamma) / denom
    if 1.0 + ratio <= 0.0:
        raise DegenerateCurve("par condition has no yield solution above -1")
    return float(np.power(1.0 + ratio, spec.kappa) - 1.0)
