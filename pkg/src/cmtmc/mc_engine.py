"""Monte Carlo engine for the forward yield diffusion.

Per path and per time step, in order: one standard normal draw moves every
forward zero-coupon of the path (single factor), the hazard level is advanced
by its leapfrog update, the forward bond volatility is refreshed, and the
yield is stepped in log space with the volatility assembled from the previous
step's quantities, driven by the same draw. The coupon proxy for the
constant-maturity bond is always the previous step's yield. At expiry the
constant-maturity rate follows from the terminal yield by compounding
conversion.

Reproducibility contract: path p draws its normals from a Philox counter
stream keyed on (seed, stream_index, p), so results are bit-identical across
runs, across block sizes and across worker counts, and a path simulated alone
matches its row in any batch. Cap/floor legs split the stream index per
fixing.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .bondmath import (
    BondSpec,
    YieldFunction,
    bond_value_and_derivatives,
    cmt_from_yield,
    initial_forward_yield,
    per_period_coupon,
)
from ._grids import row_sum
from .curves import DiscountCurve, HazardCurve
from .errors import (
    CmtError,
    DegenerateBond,
    DegenerateYield,
    InsufficientSamples,
    ValidationError,
)
from .hazard_evolution import (
    FwdZcSnapshot,
    HazardInitMode,
    advance_snapshot,
    build_snapshot,
    initial_hazard_state,
    step_hazard,
    survival_weights,
)
from .hullwhite import HullWhiteParams

_MASK32 = (1 << 32) - 1
_MASK64 = (1 << 64) - 1


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

class PayoffKind(enum.Enum):
    TERMINAL_YIELD = "terminal_yield"
    TERMINAL_CMT = "terminal_cmt"
    CAPLET = "caplet"
    FLOORLET = "floorlet"
    CAP = "cap"
    FLOOR = "floor"


_OPTION_KINDS = {PayoffKind.CAPLET, PayoffKind.FLOORLET, PayoffKind.CAP, PayoffKind.FLOOR}
_MULTI_FIXING = {PayoffKind.CAP, PayoffKind.FLOOR}


@dataclass(frozen=True)
class PayoffSpec:
    """What the simulation pays.

    Options pay accrual * max(+/-(CMT - strike), 0) at the period end and are
    discounted with today's risk-free factor to the pay date. Caps and floors
    sum independent caplets/floorlets fixed every 1/pay_frequency years from
    the expiry until final_maturity.
    """

    kind: PayoffKind = PayoffKind.TERMINAL_YIELD
    strike: float | None = None
    pay_frequency: int = 4
    accrual: float | None = None
    final_maturity: float | None = None

    def __post_init__(self):
        if self.kind in _OPTION_KINDS:
            if self.strike is None or self.strike < 0.0:
                raise ValidationError("option payoffs need a non-negative strike")
        if self.pay_frequency < 1:
            raise ValidationError("pay frequency must be >= 1 per year")
        if self.accrual is not None and self.accrual <= 0.0:
            raise ValidationError("accrual must be positive")

    @property
    def accrual_value(self) -> float:
        return self.accrual if self.accrual is not None else 1.0 / self.pay_frequency

    def fixing_times(self, expiry: float) -> np.ndarray:
        """Fixing dates of a cap/floor leg: expiry, expiry+acc, ... < final."""
        if self.final_maturity is None:
            raise ValidationError("cap/floor payoffs need final_maturity")
        acc = self.accrual_value
        n = int(math.floor((self.final_maturity - expiry) / acc + 1e-9))
        if n < 1:
            raise ValidationError("cap/floor schedule is empty")
        return expiry + acc * np.arange(n)

    def pay_times(self, expiry: float) -> np.ndarray:
        return self.fixing_times(expiry) + self.accrual_value


@dataclass(frozen=True)
class SimulationConfig:
    """Full description of one pricing run."""

    expiry: float
    spec: BondSpec
    hw: HullWhiteParams
    n_paths: int
    seed: int
    step: float = 1.0 / 365.0
    quad_step: float = 1.0 / 12.0
    init_mode: HazardInitMode = HazardInitMode.STABILIZED
    payoff: PayoffSpec = field(default_factory=PayoffSpec)
    workers: int = 1
    block_size: int = 2048

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValidationError(f"need at least one path, got {self.n_paths}")
        if self.n_paths > _MASK32:
            raise ValidationError("path count exceeds the RNG substream space")
        if not 0.0 < self.step <= self.expiry:
            raise ValidationError(f"step must satisfy 0 < step <= expiry, got {self.step}")
        if self.quad_step <= 0.0:
            raise ValidationError(f"quadrature step must be positive, got {self.quad_step}")
        if self.seed < 0:
            raise ValidationError("seed must be non-negative")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")
        if self.block_size < 1:
            raise ValidationError("block size must be >= 1")


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DistributionStats:
    minimum: float
    maximum: float
    average: float
    std_dev: float
    skewness: float
    excess_kurtosis: float


def distribution_stats(samples) -> DistributionStats:
    """Population-form sample moments (divisor n); skew/kurtosis of a
    constant sample are reported as zero by convention."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise InsufficientSamples(f"need at least two samples, got {x.size}")
    lo, hi = float(x.min()), float(x.max())
    if lo == hi:
        return DistributionStats(lo, hi, lo, 0.0, 0.0, 0.0)
    mean = float(x.mean())
    d = x - mean
    m2 = float((d * d).mean())
    std = math.sqrt(m2)
    if std <= 1e-13 * max(1.0, abs(mean)):
        skew = kurt = 0.0
    else:
        m3 = float((d ** 3).mean())
        m4 = float((d ** 4).mean())
        skew = m3 / m2 ** 1.5
        kurt = m4 / (m2 * m2) - 3.0
    return DistributionStats(
        minimum=float(x.min()),
        maximum=float(x.max()),
        average=mean,
        std_dev=std,
        skewness=skew,
        excess_kurtosis=kurt,
    )


@dataclass(frozen=True)
class PathSample:
    """Per-path terminal values of one simulation."""

    expiry: float
    y0: float
    lambda0: float
    y_terminal: np.ndarray
    cmt: np.ndarray
    yield_vol_abs: np.ndarray
    clamp_events: np.ndarray

    @property
    def n_paths(self) -> int:
        return self.y_terminal.size


@dataclass(frozen=True)
class PathRecord:
    """Terminal record of a single path."""

    path_index: int
    y_terminal: float
    cmt: float
    yield_vol_abs: float
    clamp_events: int


@dataclass(frozen=True)
class PricingResult:
    mean: float
    std_error: float
    n_paths: int
    stats: DistributionStats
    y0: float
    expected_yield: float
    expected_cmt: float
    yield_std_error: float
    payoffs: np.ndarray | None = None
    sample: PathSample | None = None


# ---------------------------------------------------------------------------
# per-step operations
# ---------------------------------------------------------------------------

def bond_vol(snap: FwdZcSnapshot, lam, spec: BondSpec, y_proxy, f_value):
    """Lognormal volatility of the forward constant-maturity bond.

    Survival-and-value weighted combination of the forward zero-coupon
    volatilities: principal, coupon sum, and the recovery integral.
    """
    if np.any(np.asarray(f_value) <= 0.0):
        raise DegenerateBond("bond value must be positive")
    scalar = np.ndim(lam) == 0 and snap.values.ndim == 1
    S = survival_weights(lam, snap)
    P = snap.values[None, :] if snap.values.ndim == 1 else snap.values
    vols = snap.vols
    w = per_period_coupon(spec, y_proxy)
    num = S[:, -1] * P[:, -1] * vols[-1]
    ci = snap.coupon_idx
    num = num + w * row_sum(S[:, ci] * P[:, ci] * vols[ci])
    if spec.recovery != 0.0:
        qi = snap.quad_idx
        lam_col = np.atleast_1d(np.asarray(lam, dtype=float))[:, None]
        integrand = S[:, qi] * P[:, qi] * vols[qi] * lam_col
        num = num + spec.recovery * row_sum(snap.quad_weights * integrand)
    out = num / f_value
    return float(out[0]) if scalar else out


def yield_vol(y, f_value, f_prime, sigma_b):
    """Yield volatility f(y)/(y f'(y)) * sigma_B; negative since f' < 0."""
    y_arr = np.asarray(y, dtype=float)
    if np.any(np.abs(y_arr) < 1e-12):
        idx = int(np.argmin(np.abs(np.atleast_1d(y_arr))))
        raise DegenerateYield(f"yield too close to zero (path {idx})")
    fp_arr = np.asarray(f_prime, dtype=float)
    if np.any(np.abs(fp_arr) < 1e-300):
        raise DegenerateYield("bond price slope vanished")
    out = f_value / (y_arr * fp_arr) * sigma_b
    return float(out) if np.ndim(out) == 0 else out


def step_yield(y, sigma_y, f_prime, f_second, dt, z):
    """Log-Euler step of dy/y = -0.5*(y f''/f') sigma_y^2 dt + sigma_y dW."""
    mu = -0.5 * (y * f_second / f_prime) * sigma_y * sigma_y
    return y * np.exp((mu - 0.5 * sigma_y * sigma_y) * dt + sigma_y * np.sqrt(dt) * z)


# ---------------------------------------------------------------------------
# random numbers: one Philox substream per (seed, stream, path)
# ---------------------------------------------------------------------------

def path_generator(seed: int, path_index: int, stream: int = 0) -> np.random.Generator:
    key = np.array(
        [seed & _MASK64, ((stream << 32) | (path_index & _MASK32)) & _MASK64],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))


def _normal_draws(seed: int, n_steps: int, lo: int, hi: int, stream: int) -> np.ndarray:
    out = np.empty((hi - lo, n_steps))
    for p in range(lo, hi):
        out[p - lo] = path_generator(seed, p, stream).standard_normal(n_steps)
    return out


# ---------------------------------------------------------------------------
# simulation core
# ---------------------------------------------------------------------------

def _time_grid(expiry: float, step: float) -> np.ndarray:
    n = int(math.ceil(expiry / step - 1e-9))
    ts = np.minimum(step * np.arange(n + 1), expiry)
    ts[-1] = expiry
    return ts


def _f_and_derivs(spec: BondSpec, y):
    yf = YieldFunction(spec, coupon_rate_in_effect=y)
    return bond_value_and_derivatives(yf, y)


def _simulate_block(
    cfg: SimulationConfig,
    dc: DiscountCurve,
    hz: HazardCurve,
    y0: float,
    lam0: float,
    lo: int,
    hi: int,
    stream: int,
):
    n = hi - lo
    ts = _time_grid(cfg.expiry, cfg.step)
    n_steps = len(ts) - 1
    Z = _normal_draws(cfg.seed, n_steps, lo, hi, stream)

    base = build_snapshot(dc, cfg.hw, cfg.expiry, cfg.spec, cfg.quad_step)
    snap = replace(base, values=np.repeat(base.values[None, :], n, axis=0))
    state = initial_hazard_state(lam0, cfg.init_mode, n_paths=n)
    y = np.full(n, y0)
    f_val, f_p, f_pp = _f_and_derivs(cfg.spec, y)
    sigma_b = bond_vol(snap, state.lambda_curr, cfg.spec, y, f_val)
    sigma_y = np.zeros(n)
    clamp_events = np.zeros(n, dtype=np.int64)

    try:
        for j in range(1, n_steps + 1):
            dt = ts[j] - ts[j - 1]
            z = Z[:, j - 1]
            sigma_y = yield_vol(y, f_val, f_p, sigma_b)
            snap = advance_snapshot(snap, cfg.hw, ts[j], z[:, None])
            state = step_hazard(state, snap, cfg.spec, y, dt)
            clamp_events += state.clamped
            sigma_b = bond_vol(snap, state.lambda_curr, cfg.spec, y, f_val)
            y = step_yield(y, sigma_y, f_p, f_pp, dt, z)
            f_val, f_p, f_pp = _f_and_derivs(cfg.spec, y)
    except CmtError as exc:
        raise type(exc)(f"paths [{lo}, {hi}): {exc}") from exc

    cmt = np.asarray(cmt_from_yield(cfg.spec.kappa, y))
    return y, cmt, np.abs(sigma_y), clamp_events


def _simulate_block_task(args):
    return _simulate_block(*args)


def simulate(cfg: SimulationConfig, dc: DiscountCurve, hz: HazardCurve, stream: int = 0) -> PathSample:
    """Run every path of the configuration and collect terminal records."""
    y0 = initial_forward_yield(dc, hz, cfg.spec, cfg.expiry, cfg.quad_step)
    if y0 <= -1.0 + 1e-8:
        raise DegenerateYield(f"initial forward yield {y0} out of domain")
    lam0 = hz.initial_forward_hazard(cfg.expiry, cfg.spec.theta)

    blocks = [
        (lo, min(lo + cfg.block_size, cfg.n_paths))
        for lo in range(0, cfg.n_paths, cfg.block_size)
    ]
    tasks = [(cfg, dc, hz, y0, lam0, lo, hi, stream) for lo, hi in blocks]
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(_simulate_block_task, tasks))
    else:
        parts = [_simulate_block_task(t) for t in tasks]

    y_term = np.concatenate([p[0] for p in parts])
    cmt = np.concatenate([p[1] for p in parts])
    vol_abs = np.concatenate([p[2] for p in parts])
    clamps = np.concatenate([p[3] for p in parts])
    return PathSample(
        expiry=cfg.expiry,
        y0=y0,
        lambda0=lam0,
        y_terminal=y_term,
        cmt=cmt,
        yield_vol_abs=vol_abs,
        clamp_events=clamps,
    )


def simulate_path(
    cfg: SimulationConfig,
    dc: DiscountCurve,
    hz: HazardCurve,
    path_index: int,
    stream: int = 0,
) -> PathRecord:
    """Simulate one path; identical to its row in the full batch."""
    if not 0 <= path_index < cfg.n_paths:
        raise ValidationError(f"path index {path_index} outside [0, {cfg.n_paths})")
    y0 = initial_forward_yield(dc, hz, cfg.spec, cfg.expiry, cfg.quad_step)
    if y0 <= -1.0 + 1e-8:
        raise DegenerateYield(f"initial forward yield {y0} out of domain")
    lam0 = hz.initial_forward_hazard(cfg.expiry, cfg.spec.theta)
    y, cmt, vol_abs, clamps = _simulate_block(
        cfg, dc, hz, y0, lam0, path_index, path_index + 1, stream
    )
    return PathRecord(
        path_index=path_index,
        y_terminal=float(y[0]),
        cmt=float(cmt[0]),
        yield_vol_abs=float(vol_abs[0]),
        clamp_events=int(clamps[0]),
    )


# ---------------------------------------------------------------------------
# pricing
# ---------------------------------------------------------------------------

def _single_fixing_payoffs(
    payoff: PayoffSpec, dc: DiscountCurve, sample: PathSample
) -> np.ndarray:
    kind = payoff.kind
    if kind is PayoffKind.TERMINAL_YIELD:
        return sample.y_terminal
    if kind is PayoffKind.TERMINAL_CMT:
        return sample.cmt
    acc = payoff.accrual_value
    df_pay = dc.discount_factor(sample.expiry + acc)
    if kind is PayoffKind.CAPLET:
        return df_pay * acc * np.maximum(sample.cmt - payoff.strike, 0.0)
    if kind is PayoffKind.FLOORLET:
        return df_pay * acc * np.maximum(payoff.strike - sample.cmt, 0.0)
    raise ValidationError(f"{kind} is not a single-fixing payoff")


def price(cfg: SimulationConfig, dc: DiscountCurve, hz: HazardCurve) -> PricingResult:
    """Monte Carlo price of the configured payoff.

    Caps/floors are sums of independent caplets/floorlets, one simulation per
    fixing with its own stream index; per-path payoffs are summed across
    fixings so the reported standard error is the combined one.
    """
    payoff = cfg.payoff
    if payoff.kind in _MULTI_FIXING:
        leaf_kind = PayoffKind.CAPLET if payoff.kind is PayoffKind.CAP else PayoffKind.FLOORLET
        leaf = PayoffSpec(
            kind=leaf_kind,
            strike=payoff.strike,
            pay_frequency=payoff.pay_frequency,
            accrual=payoff.accrual,
        )
        total = np.zeros(cfg.n_paths)
        first_sample: PathSample | None = None
        for k, t_fix in enumerate(payoff.fixing_times(cfg.expiry)):
            sub = replace(cfg, expiry=float(t_fix), payoff=leaf)
            sample = simulate(sub, dc, hz, stream=k)
            if first_sample is None:
                first_sample = sample
            total += _single_fixing_payoffs(leaf, dc, sample)
        payoffs = total
        sample = first_sample
    else:
        sample = simulate(cfg, dc, hz)
        payoffs = _single_fixing_payoffs(payoff, dc, sample)

    n = cfg.n_paths
    if n >= 2:
        stats = distribution_stats(payoffs)
        y_stats = distribution_stats(sample.y_terminal)
        se = stats.std_dev / math.sqrt(n)
        y_se = y_stats.std_dev / math.sqrt(n)
    else:
        v = float(payoffs[0])
        stats = DistributionStats(v, v, v, 0.0, 0.0, 0.0)
        se = 0.0
        y_se = 0.0
    return PricingResult(
        mean=float(payoffs.mean()),
        std_error=se,
        n_paths=n,
        stats=stats,
        y0=sample.y0,
        expected_yield=float(sample.y_terminal.mean()),
        expected_cmt=float(sample.cmt.mean()),
        yield_std_error=y_se,
        payoffs=payoffs,
        sample=sample,
    )


def static_forward_cmt(
    dc: DiscountCurve,
    hz: HazardCurve,
    spec: BondSpec,
    expiry: float,
    quad_step: float = 1.0 / 12.0,
) -> float:
    """Constant-maturity rate implied by the initial forward yield; the
    deterministic at-the-money-forward reference strike."""
    y0 = initial_forward_yield(dc, hz, spec, expiry, quad_step)
    return float(cmt_from_yield(spec.kappa, y0))
