"""Monte Carlo pricing of CMT and forward-bond derivatives.

The forward yield to maturity is diffused directly: its initial value comes
from the par condition on the credit-risky forward bond, its volatility from
the forward bond volatility via the yield/price transfer function, and the
hazard rate evolves along each path so the forward bond stays driftless.
Zero-coupon volatilities follow a one-factor Hull-White model.
"""

from .blackvol import VolSurfacePoint, black_price, build_surface, implied_vol, norm_cdf
from .bondmath import (
    BondSpec,
    CouponMode,
    YieldFunction,
    bond_derivatives,
    bond_from_yield,
    bond_value_and_derivatives,
    cmt_from_yield,
    gamma_integral,
    initial_forward_yield,
    yield_from_bond,
)
from .curves import (
    BondQuote,
    DiscountCurve,
    HazardCurve,
    read_discount_csv,
    read_hazard_csv,
    read_quotes_csv,
    reprice_quote,
    strip_hazard,
    write_hazard_csv,
    year_fraction,
)
from .hazard_evolution import (
    FwdZcSnapshot,
    HazardInitMode,
    HazardState,
    advance_snapshot,
    build_snapshot,
    initial_hazard_state,
    phi,
    psi,
    step_hazard,
    survival_from_lambda,
)
from .hullwhite import HullWhiteParams, forward_zc_drift, forward_zc_vol, step_forward_zc, zc_vol
from .mc_engine import (
    DistributionStats,
    PathRecord,
    PathSample,
    PayoffKind,
    PayoffSpec,
    PricingResult,
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

__version__ = "0.1.0"
