"""One-factor Hull-White zero-coupon volatilities and the forward ZC step.

With mean reversion alpha and absolute short-rate volatility sigma,

    sigma_P(t, T)    = sigma * (1 - exp(-alpha*(T-t))) / alpha
    sigma_P(t, T, U) = sigma_P(t, U) - sigma_P(t, T)
    xi(t, T, U)      = sigma_P(t, T)^2 - sigma_P(t, T) * sigma_P(t, U)

The forward zero-coupon bond then follows dP/P = xi dt + sigma_P dW, which is
stepped in log space with coefficients frozen at the step's left endpoint, so
positivity is preserved exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInterval, ValidationError

# below this value of alpha*(T-t) the volatility uses its series limit
_SMALL_EXPONENT = 1e-8


@dataclass(frozen=True)
class HullWhiteParams:
    """Mean reversion speed (per year) and absolute short-rate vol (per sqrt-year)."""

    alpha: float
    sigma: float

    def __post_init__(self):
        if self.alpha <= 0.0:
            raise ValidationError(f"mean reversion must be positive, got {self.alpha}")
        if self.sigma < 0.0:
            raise ValidationError(f"volatility must be non-negative, got {self.sigma}")


def zc_vol(p: HullWhiteParams, t, maturity):
    """Zero-coupon bond volatility sigma_P(t, maturity)."""
    tau = np.asarray(maturity, dtype=float) - np.asarray(t, dtype=float)
    if np.any(tau < 0.0):
        raise InvalidInterval("maturity before observation time")
    x = p.alpha * tau
    # two-term series below the switch keeps the branch continuous
    small = p.sigma * tau * (1.0 - 0.5 * x)
    with np.errstate(invalid="ignore"):
        full = p.sigma * (-np.expm1(-x)) / p.alpha
    out = np.where(x < _SMALL_EXPONENT, small, full)
    return float(out) if np.ndim(out) == 0 else out


def forward_zc_vol(p: HullWhiteParams, t, t_fwd, maturity):
    """Forward zero-coupon volatility sigma_P(t, t_fwd, maturity)."""
    tf = np.asarray(t_fwd, dtype=float)
    um = np.asarray(maturity, dtype=float)
    if np.any(tf < np.asarray(t)) or np.any(um < tf):
        raise InvalidInterval("need t <= t_fwd <= maturity")
    # sigma/alpha * (e^{-a(T-t)} - e^{-a(U-t)}) = e^{-a(T-t)} * zc_vol over (U-T)
    tau = um - tf
    x = p.alpha * tau
    small = p.sigma * tau * (1.0 - 0.5 * x)
    with np.errstate(invalid="ignore"):
        full = p.sigma * (-np.expm1(-x)) / p.alpha
    out = np.exp(-p.alpha * (tf - np.asarray(t, dtype=float))) * np.where(
        x < _SMALL_EXPONENT, small, full
    )
    return float(out) if np.ndim(out) == 0 else out


def forward_zc_drift(p: HullWhiteParams, t, t_fwd, maturity):
    """Drift xi(t, t_fwd, maturity) = sigma_P(t,T)^2 - sigma_P(t,T)*sigma_P(t,U)."""
    s_T = zc_vol(p, t, t_fwd)
    s_U = zc_vol(p, t, maturity)
    if np.any(np.asarray(maturity) < np.asarray(t_fwd)):
        raise InvalidInterval("maturity before forward date")
    out = s_T * s_T - s_T * s_U
    return float(out) if np.ndim(out) == 0 else out


def step_forward_zc(p: HullWhiteParams, value, t, dt, t_fwd, maturity, z):
    """One log-Euler step of the forward zero-coupon bond.

    value * exp((xi - sigma_P^2/2)*dt + sigma_P*sqrt(dt)*z) with xi and
    sigma_P evaluated at the left endpoint t. Broadcasts over paths and
    maturities.
    """
    xi = forward_zc_drift(p, t, t_fwd, maturity)
    vol = forward_zc_vol(p, t, t_fwd, maturity)
    return value * np.exp((xi - 0.5 * vol * vol) * dt + vol * np.sqrt(dt) * z)
