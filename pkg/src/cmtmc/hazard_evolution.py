"""Per-path hazard-rate evolution under the constant-in-maturity assumption.

With the intensity flat across residual maturity, survival factors collapse to
exp(-(u-T)*lambda(t)) and the martingale condition on the forward bond turns
into a two-level (leapfrog) recursion

    lambda(t_{j+1}) = phi(lambda(t_{j-1}), lambda(t_j), P, xi) / psi(lambda(t_j), P)

where phi and psi accumulate a principal term, a coupon-weighted sum over the
payment dates, and a recovery integral over the bond's life. Both are
evaluated with the coefficients carried by the forward zero-coupon snapshot.

The recursion needs two starting levels. The default "stabilized" mode seeds
both levels with the initial forward hazard; "paper_exact" seeds the earlier
level with zero, which odd-even decouples the scheme (the update alternates
between zero and the initial level when the drift vanishes) and is kept only
for fidelity runs. The update is clamped to [0, LAMBDA_CAP] because the
recursion carries no positivity guarantee of its own.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from ._grids import merge_grids, quadrature_nodes, row_sum, trapezoid_weights
from .bondmath import BondSpec, per_period_coupon
from .curves import DiscountCurve
from .errors import DegenerateDenominator, DomainError, InvalidInterval
from .hullwhite import HullWhiteParams, forward_zc_drift, forward_zc_vol, step_forward_zc

LAMBDA_CAP = 10.0


class HazardInitMode(enum.Enum):
    STABILIZED = "stabilized"
    PAPER_EXACT = "paper_exact"


@dataclass(frozen=True)
class HazardState:
    """Two consecutive intensity levels of the leapfrog recursion.

    Scalars for single-path use, (n_paths,) arrays inside the engine.
    ``clamped`` flags paths whose last update hit the [0, cap] clamp.
    """

    lambda_prev: float | np.ndarray
    lambda_curr: float | np.ndarray
    init_mode: HazardInitMode = HazardInitMode.STABILIZED
    clamped: bool | np.ndarray = False


def initial_hazard_state(
    lambda0: float,
    mode: HazardInitMode = HazardInitMode.STABILIZED,
    n_paths: int | None = None,
) -> HazardState:
    if lambda0 < 0.0:
        raise DomainError(f"initial intensity must be non-negative, got {lambda0}")
    if n_paths is None:
        curr: float | np.ndarray = float(lambda0)
        prev: float | np.ndarray = 0.0 if mode is HazardInitMode.PAPER_EXACT else float(lambda0)
    else:
        curr = np.full(n_paths, float(lambda0))
        prev = np.zeros(n_paths) if mode is HazardInitMode.PAPER_EXACT else curr.copy()
    return HazardState(lambda_prev=prev, lambda_curr=curr, init_mode=mode)


@dataclass(frozen=True)
class FwdZcSnapshot:
    """Forward zero-coupon values over the bond's maturity grid at one time.

    ``grid`` holds the absolute maturities (expiry, coupon dates, quadrature
    nodes, and expiry+tenor merged and sorted); ``values`` the current forward
    zero-coupon bonds, one row per path; ``vols``/``drifts`` the lognormal
    coefficients at the snapshot time. The last grid point is the principal
    maturity.
    """

    t: float
    expiry: float
    grid: np.ndarray
    values: np.ndarray
    vols: np.ndarray
    drifts: np.ndarray
    coupon_idx: np.ndarray
    quad_idx: np.ndarray
    quad_weights: np.ndarray


def build_snapshot(
    dc: DiscountCurve,
    hw: HullWhiteParams,
    expiry: float,
    spec: BondSpec,
    quad_step: float = 1.0 / 12.0,
) -> FwdZcSnapshot:
    """Initial snapshot at t=0 from the discount curve."""
    quad = quadrature_nodes(expiry, expiry + spec.theta, quad_step)
    coupons = expiry + spec.coupon_offsets()
    grid, (quad_idx, coupon_idx) = merge_grids(quad, coupons)
    return FwdZcSnapshot(
        t=0.0,
        expiry=expiry,
        grid=grid,
        values=dc.forward_df(expiry, grid),
        vols=forward_zc_vol(hw, 0.0, expiry, grid),
        drifts=forward_zc_drift(hw, 0.0, expiry, grid),
        coupon_idx=coupon_idx,
        quad_idx=quad_idx,
        quad_weights=trapezoid_weights(grid[quad_idx]),
    )


def advance_snapshot(snap: FwdZcSnapshot, hw: HullWhiteParams, t_next: float, z) -> FwdZcSnapshot:
    """Diffuse every forward zero-coupon to t_next with one common draw.

    z broadcasts against ``values``: pass shape (n_paths, 1) for a matrix of
    paths so the single factor moves all maturities of a path together.
    """
    if t_next < snap.t:
        raise InvalidInterval("cannot step a snapshot backwards")
    dt = t_next - snap.t
    values = step_forward_zc(hw, snap.values, snap.t, dt, snap.expiry, snap.grid, z)
    return replace(
        snap,
        t=t_next,
        values=values,
        vols=forward_zc_vol(hw, t_next, snap.expiry, snap.grid),
        drifts=forward_zc_drift(hw, t_next, snap.expiry, snap.grid),
    )


def survival_from_lambda(lam, t_start, t_end):
    """Flat-intensity survival exp(-(t_end - t_start) * lam)."""
    gap = np.asarray(t_end, dtype=float) - np.asarray(t_start, dtype=float)
    if np.any(gap < 0.0):
        raise InvalidInterval("t_end before t_start")
    if np.any(np.asarray(lam) < 0.0):
        raise DomainError("intensity must be non-negative")
    out = np.exp(-gap * np.asarray(lam, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def _rows(values: np.ndarray) -> np.ndarray:
    return values[None, :] if values.ndim == 1 else values


def survival_weights(lambda_curr, snap: FwdZcSnapshot) -> np.ndarray:
    """exp(-(u - expiry) * lambda_curr) over the snapshot grid, (n, M)."""
    tau = snap.grid - snap.expiry
    lam = np.atleast_1d(np.asarray(lambda_curr, dtype=float))
    return np.exp(-lam[:, None] * tau[None, :])


def phi(state: HazardState, snap: FwdZcSnapshot, spec: BondSpec, y_proxy, dt, _surv=None):
    """Numerator of the leapfrog update (three-group sum as displayed)."""
    scalar = np.ndim(state.lambda_curr) == 0 and snap.values.ndim == 1
    lam_p = np.atleast_1d(np.asarray(state.lambda_prev, dtype=float))[:, None]
    lam_c = np.atleast_1d(np.asarray(state.lambda_curr, dtype=float))[:, None]
    P = _rows(snap.values)
    S = _surv if _surv is not None else survival_weights(state.lambda_curr, snap)
    tau = snap.grid - snap.expiry
    xi = snap.drifts
    w = per_period_coupon(spec, y_proxy)

    out = (0.5 * spec.theta * lam_p[:, 0] + dt * xi[-1]) * S[:, -1] * P[:, -1]
    ci = snap.coupon_idx
    coupon_sum = row_sum((0.5 * tau[ci] * lam_p + dt * xi[ci]) * S[:, ci] * P[:, ci])
    out = out + w * coupon_sum
    if spec.recovery != 0.0:
        qi = snap.quad_idx
        integrand = (
            lam_c * (0.5 * tau[qi] * lam_p + dt * xi[qi]) - 0.5 * lam_p
        ) * S[:, qi] * P[:, qi]
        out = out + spec.recovery * row_sum(snap.quad_weights * integrand)
    return float(out[0]) if scalar else out


def psi(state: HazardState, snap: FwdZcSnapshot, spec: BondSpec, y_proxy, _surv=None):
    """Denominator of the leapfrog update (three-group sum as displayed)."""
    scalar = np.ndim(state.lambda_curr) == 0 and snap.values.ndim == 1
    lam_c = np.atleast_1d(np.asarray(state.lambda_curr, dtype=float))[:, None]
    P = _rows(snap.values)
    S = _surv if _surv is not None else survival_weights(state.lambda_curr, snap)
    tau = snap.grid - snap.expiry
    w = per_period_coupon(spec, y_proxy)

    out = 0.5 * spec.theta * S[:, -1] * P[:, -1]
    ci = snap.coupon_idx
    out = out + w * row_sum(0.5 * tau[ci] * S[:, ci] * P[:, ci])
    if spec.recovery != 0.0:
        qi = snap.quad_idx
        integrand = (1.0 + tau[qi] * lam_c) * S[:, qi] * P[:, qi]
        out = out + 0.5 * spec.recovery * row_sum(snap.quad_weights * integrand)
    return float(out[0]) if scalar else out


def step_hazard(
    state: HazardState,
    snap: FwdZcSnapshot,
    spec: BondSpec,
    y_proxy,
    dt,
    lambda_cap: float = LAMBDA_CAP,
) -> HazardState:
    """Advance the recursion one step: shift levels, clamp into [0, cap]."""
    surv = survival_weights(state.lambda_curr, snap)
    num = phi(state, snap, spec, y_proxy, dt, _surv=surv)
    den = psi(state, snap, spec, y_proxy, _surv=surv)
    if np.any(np.abs(np.asarray(den)) < 1e-300):
        raise DegenerateDenominator("hazard update denominator vanished")
    raw = num / den
    clamped_val = np.clip(raw, 0.0, lambda_cap)
    flags = clamped_val != raw
    if np.ndim(raw) == 0:
        clamped_val = float(clamped_val)
        flags = bool(flags)
    return HazardState(
        lambda_prev=state.lambda_curr,
        lambda_curr=clamped_val,
        init_mode=state.init_mode,
        clamped=flags,
    )
