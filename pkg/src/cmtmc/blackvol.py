"""Black-76 caplet/floorlet pricing and implied-volatility extraction.

Prices are undiscounted forwards times df * accrual; the implied volatility
solver brackets on [1e-4, 5] and polishes with vega-based Newton steps, which
keeps it robust for deep in/out-of-the-money quotes where vega is tiny.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConvergenceError, DomainError, NoArbitrageViolation

_SIGMA_LO = 1e-4
_SIGMA_HI = 5.0
_MAX_ITER = 200
_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def norm_cdf(x: float) -> float:
    """Standard normal CDF via erfc; absolute error well below 1e-10."""
    return 0.5 * math.erfc(-x / _SQRT2)


def _norm_pdf(x: float) -> float:
    return _INV_SQRT_2PI * math.exp(-0.5 * x * x)


def black_price(
    forward: float,
    strike: float,
    sigma: float,
    expiry: float,
    df: float,
    accrual: float,
    is_call: bool,
) -> float:
    """Black-76 option on a rate: df * accrual * (F N(d1) - K N(d2)) for calls."""
    if strike < 0.0:
        raise DomainError(f"strike must be non-negative, got {strike}")
    if forward <= 0.0:
        raise DomainError(f"forward must be positive, got {forward}")
    if sigma < 0.0:
        raise DomainError(f"volatility must be non-negative, got {sigma}")
    if expiry <= 0.0:
        raise DomainError(f"expiry must be positive, got {expiry}")
    scale = df * accrual
    if sigma == 0.0 or strike == 0.0:
        intrinsic = max(forward - strike, 0.0) if is_call else max(strike - forward, 0.0)
        return scale * intrinsic
    stdev = sigma * math.sqrt(expiry)
    d1 = (math.log(forward / strike) + 0.5 * stdev * stdev) / stdev
    d2 = d1 - stdev
    if is_call:
        return scale * (forward * norm_cdf(d1) - strike * norm_cdf(d2))
    return scale * (strike * norm_cdf(-d2) - forward * norm_cdf(-d1))


def _black_vega(forward, strike, sigma, expiry, df, accrual) -> float:
    stdev = sigma * math.sqrt(expiry)
    d1 = (math.log(forward / strike) + 0.5 * stdev * stdev) / stdev
    return df * accrual * forward * _norm_pdf(d1) * math.sqrt(expiry)


def implied_vol(
    price: float,
    forward: float,
    strike: float,
    expiry: float,
    df: float,
    accrual: float,
    is_call: bool,
) -> float:
    """Invert Black-76: bracketed bisection refined by Newton.

    The price must lie strictly between the discounted intrinsic value and
    the large-volatility bound (both excluded); the result satisfies
    |black_price(sigma) - price| <= 1e-12 * df * accrual * max(F, K).
    """
    scale = df * accrual
    intrinsic = scale * (max(forward - strike, 0.0) if is_call else max(strike - forward, 0.0))
    upper = scale * (forward if is_call else strike)
    if not price > intrinsic:
        raise NoArbitrageViolation(f"price {price} at or below intrinsic {intrinsic}")
    if not price < upper:
        raise NoArbitrageViolation(f"price {price} at or above the volatility bound {upper}")
    if strike == 0.0:
        # call price is df*accrual*F for every sigma; nothing to invert
        raise NoArbitrageViolation("zero strike carries no volatility information")

    tol = 1e-12 * scale * max(forward, strike)
    lo, hi = _SIGMA_LO, _SIGMA_HI
    r_lo = black_price(forward, strike, lo, expiry, df, accrual, is_call) - price
    r_hi = black_price(forward, strike, hi, expiry, df, accrual, is_call) - price
    if r_lo > 0.0 or r_hi < 0.0:
        raise ConvergenceError(
            f"implied volatility outside the bracket [{_SIGMA_LO}, {_SIGMA_HI}]"
        )

    # Newton runs on the log of the time value: plain Newton creeps for deep
    # out-of-the-money quotes where the price is super-exponential in sigma
    tv_target = price - intrinsic
    sigma = 0.5 * (lo + hi)
    for _ in range(_MAX_ITER):
        tv = black_price(forward, strike, sigma, expiry, df, accrual, is_call) - intrinsic
        r = tv - tv_target
        if r > 0.0:
            hi = sigma
        else:
            lo = sigma
        vega = _black_vega(forward, strike, sigma, expiry, df, accrual)
        if tv > 0.0 and vega > 0.0 and math.isfinite(vega):
            candidate = sigma - (math.log(tv) - math.log(tv_target)) * tv / vega
        else:
            candidate = 0.5 * (lo + hi)
        if not lo < candidate < hi:
            candidate = 0.5 * (lo + hi)
        if abs(r) <= tol and abs(candidate - sigma) <= 1e-12 * max(1.0, sigma):
            return sigma
        sigma = candidate
    raise ConvergenceError("implied volatility did not converge in 200 iterations")


@dataclass(frozen=True)
class VolSurfacePoint:
    """One (expiry, strike) node of the implied-volatility surface."""

    expiry: float
    strike: float
    implied_vol: float
    source_price: float
    converged: bool


def build_surface(entries) -> list[VolSurfacePoint]:
    """Invert a batch of option prices into surface points.

    Each entry is (expiry, strike, price, forward, df, accrual, is_call).
    Points that cannot be inverted (at intrinsic, outside bounds, or
    non-convergent) are returned with converged=False instead of aborting.
    """
    points: list[VolSurfacePoint] = []
    for expiry, strike, price, forward, df, accrual, is_call in entries:
        try:
            vol = implied_vol(price, forward, strike, expiry, df, accrual, is_call)
            points.append(VolSurfacePoint(expiry, strike, vol, price, True))
        except (NoArbitrageViolation, ConvergenceError, DomainError):
            points.append(VolSurfacePoint(expiry, strike, float("nan"), price, False))
    return points
