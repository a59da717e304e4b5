"""Initial term structures: discount curve, hazard curve, bond-quote bootstrap.

Discount factors interpolate log-linearly (constant forward rate between
pillars); the hazard curve is piecewise-constant in the intensity, so survival
probabilities integrate exactly. Day count is ACT/365-Fixed throughout.
Both curves are immutable after construction and safe to share across workers.
"""

from __future__ import annotations

import csv
import datetime as _dt
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

from ._grids import quadrature_nodes, trapezoid_weights
from .errors import (
    DomainError,
    ExtrapolationNotAllowed,
    InvalidDateOrder,
    InvalidInterval,
    InvalidTenor,
    NegativeHazardImplied,
    StrippingFailed,
    ValidationError,
)

DAYS_PER_YEAR = 365.0

# Bracket and price tolerance for the hazard bootstrap root search.
_STRIP_LAMBDA_MAX = 10.0
_STRIP_PRICE_TOL = 1e-12


def year_fraction(d1: _dt.date, d2: _dt.date) -> float:
    """ACT/365F year fraction between two calendar dates."""
    if d2 < d1:
        raise InvalidDateOrder(f"{d2} is before {d1}")
    return (d2 - d1).days / DAYS_PER_YEAR


def _as_float_array(t) -> tuple[np.ndarray, bool]:
    scalar = np.ndim(t) == 0
    return np.atleast_1d(np.asarray(t, dtype=float)), scalar


class DiscountCurve:
    """Log-linear discount factor curve on (time, df) pillars.

    The first pillar must be (0, 1). Discount factors must be positive but
    need not be decreasing, so negative-rate curves are representable.
    Queries beyond the last pillar raise unless ``extrapolate=True``, in which
    case the last segment's forward rate continues flat.
    """

    def __init__(self, pillars: Sequence[tuple[float, float]], extrapolate: bool = False):
        if not pillars:
            raise ValidationError("discount curve needs at least one pillar")
        times = np.array([p[0] for p in pillars], dtype=float)
        dfs = np.array([p[1] for p in pillars], dtype=float)
        if times[0] != 0.0 or dfs[0] != 1.0:
            raise ValidationError("first discount pillar must be (0, 1)")
        if np.any(np.diff(times) <= 0.0):
            raise ValidationError("discount pillar times must be strictly increasing")
        if np.any(dfs <= 0.0):
            raise ValidationError("discount factors must be positive")
        self._times = times
        self._dfs = dfs
        self._log_dfs = np.log(dfs)
        self.extrapolate = bool(extrapolate)

    @classmethod
    def flat(cls, rate: float, horizon: float = 60.0, extrapolate: bool = False) -> "DiscountCurve":
        """Continuously-compounded flat curve; exact at every t <= horizon
        because log-linear interpolation preserves exp(-rate*t)."""
        return cls([(0.0, 1.0), (horizon, math.exp(-rate * horizon))], extrapolate=extrapolate)

    @property
    def pillars(self) -> list[tuple[float, float]]:
        return list(zip(self._times.tolist(), self._dfs.tolist()))

    @property
    def max_time(self) -> float:
        return float(self._times[-1])

    def discount_factor(self, t):
        """DF(0, t); exact (bit-identical) at pillars."""
        tt, scalar = _as_float_array(t)
        if np.any(tt < 0.0):
            raise DomainError("discount factor requested at negative time")
        if np.any(tt > self._times[-1]) and not self.extrapolate:
            bad = tt[tt > self._times[-1]][0]
            raise ExtrapolationNotAllowed(f"t={bad} beyond last pillar {self._times[-1]}")
        n = len(self._times)
        if n == 1:
            out = np.ones_like(tt)
        else:
            # clipping the segment index extends the last segment's forward
            # rate flat beyond the final pillar
            idx = np.clip(np.searchsorted(self._times, tt, side="right") - 1, 0, n - 2)
            t0, t1 = self._times[idx], self._times[idx + 1]
            ld0, ld1 = self._log_dfs[idx], self._log_dfs[idx + 1]
            out = np.exp(ld0 + (ld1 - ld0) * (tt - t0) / (t1 - t0))
        hit = np.clip(np.searchsorted(self._times, tt), 0, n - 1)
        on_pillar = self._times[hit] == tt
        if np.any(on_pillar):
            out = np.where(on_pillar, self._dfs[hit], out)
        return float(out[0]) if scalar else out

    def forward_df(self, t_start: float, t_end) -> float | np.ndarray:
        """Forward discount factor DF(0, t_start, t_end) = DF(t_end)/DF(t_start)."""
        te, scalar = _as_float_array(t_end)
        if np.any(te < t_start):
            raise InvalidInterval(f"forward interval end before start {t_start}")
        out = self.discount_factor(te) / self.discount_factor(float(t_start))
        return float(out[0]) if scalar else out


class HazardCurve:
    """Piecewise-constant default intensity curve.

    A pillar (t_k, lam_k) fixes lambda = lam_k on [t_{k-1}, t_k); the last
    segment is right-closed so intensity(last pillar) is defined. Survival
    probabilities are exact piecewise-exponential integrals.
    """

    def __init__(self, pillars: Sequence[tuple[float, float]], extrapolate: bool = False):
        if not pillars:
            raise ValidationError("hazard curve needs at least one pillar")
        times = np.array([p[0] for p in pillars], dtype=float)
        lams = np.array([p[1] for p in pillars], dtype=float)
        if times[0] <= 0.0:
            raise ValidationError("first hazard pillar time must be positive")
        if np.any(np.diff(times) <= 0.0):
            raise ValidationError("hazard pillar times must be strictly increasing")
        if np.any(lams < 0.0):
            raise ValidationError("hazard intensities must be non-negative")
        self._times = times
        self._lams = lams
        # cumulative integral of lambda at each pillar time
        widths = np.diff(np.concatenate([[0.0], times]))
        self._cum = np.concatenate([[0.0], np.cumsum(lams * widths)])
        self.extrapolate = bool(extrapolate)

    @classmethod
    def flat(cls, intensity: float, horizon: float = 60.0, extrapolate: bool = False) -> "HazardCurve":
        return cls([(horizon, intensity)], extrapolate=extrapolate)

    @classmethod
    def zero(cls, horizon: float = 60.0, extrapolate: bool = True) -> "HazardCurve":
        return cls([(horizon, 0.0)], extrapolate=extrapolate)

    @property
    def pillars(self) -> list[tuple[float, float]]:
        return list(zip(self._times.tolist(), self._lams.tolist()))

    @property
    def max_time(self) -> float:
        return float(self._times[-1])

    def intensity(self, t):
        """Instantaneous intensity lambda(t).

        At a pillar time the value of the segment ending there is returned
        (left-continuous), so quadrature nodes landing on segment boundaries
        see the same density during bootstrap and repricing.
        """
        tt, scalar = _as_float_array(t)
        if np.any(tt < 0.0):
            raise DomainError("intensity requested at negative time")
        beyond = tt > self._times[-1]
        if np.any(beyond) and not self.extrapolate:
            raise ExtrapolationNotAllowed(
                f"t={tt[beyond][0]} beyond last hazard pillar {self._times[-1]}"
            )
        idx = np.searchsorted(self._times, tt, side="left")
        idx = np.clip(idx, 0, len(self._lams) - 1)
        out = self._lams[idx]
        return float(out[0]) if scalar else out

    def _cumulative_hazard(self, tt: np.ndarray) -> np.ndarray:
        beyond = tt > self._times[-1]
        if np.any(beyond) and not self.extrapolate:
            raise ExtrapolationNotAllowed(
                f"t={tt[beyond][0]} beyond last hazard pillar {self._times[-1]}"
            )
        idx = np.searchsorted(self._times, tt, side="right")
        idx = np.clip(idx, 0, len(self._lams) - 1)
        left = np.concatenate([[0.0], self._times])[idx]
        cum = self._cum[idx] + self._lams[idx] * (tt - left)
        if np.any(beyond):
            cum = np.where(
                beyond,
                self._cum[-1] + self._lams[-1] * (tt - self._times[-1]),
                cum,
            )
        return cum

    def survival(self, t):
        """S(0, t) = exp(-integral of lambda over [0, t])."""
        tt, scalar = _as_float_array(t)
        if np.any(tt < 0.0):
            raise DomainError("survival requested at negative time")
        out = np.exp(-self._cumulative_hazard(tt))
        return float(out[0]) if scalar else out

    def forward_survival(self, t_start: float, t_end):
        """S(0, t_start, t_end) = S(t_end)/S(t_start)."""
        te, scalar = _as_float_array(t_end)
        if np.any(te < t_start):
            raise InvalidInterval(f"forward interval end before start {t_start}")
        out = np.exp(self._cumulative_hazard(np.atleast_1d(float(t_start)))[0]
                     - self._cumulative_hazard(te))
        return float(out[0]) if scalar else out

    def initial_forward_hazard(self, t_start: float, tenor: float) -> float:
        """Average forward intensity -(1/tenor)*ln(S(t_start+tenor)/S(t_start))."""
        if tenor <= 0.0:
            raise InvalidTenor(f"tenor must be positive, got {tenor}")
        h0 = self._cumulative_hazard(np.atleast_1d(float(t_start)))[0]
        h1 = self._cumulative_hazard(np.atleast_1d(float(t_start + tenor)))[0]
        return (h1 - h0) / tenor


@dataclass(frozen=True)
class BondQuote:
    """Spot price of a fixed-coupon government bond.

    Coupons are assumed paid on the uniform grid i/frequency; with that
    convention there is no accrued interest at t=0, so clean and dirty prices
    coincide and ``dirty`` is informational.
    """

    maturity: float
    coupon_rate: float
    frequency: int
    price: float
    dirty: bool = True

    def __post_init__(self):
        if self.maturity <= 0.0:
            raise ValidationError(f"quote maturity must be positive, got {self.maturity}")
        if self.price <= 0.0:
            raise ValidationError(f"quote price must be positive, got {self.price}")
        if self.frequency < 1:
            raise ValidationError(f"coupon frequency must be >= 1, got {self.frequency}")


def _coupon_dates(maturity: float, frequency: int) -> np.ndarray:
    n = int(math.floor(frequency * maturity + 1e-9))
    return np.arange(1, n + 1) / frequency


def reprice_quote(
    quote: BondQuote,
    dc: DiscountCurve,
    hz: HazardCurve,
    recovery: float,
    quad_step: float = 1.0 / 12.0,
) -> float:
    """Model dirty price of a bond quote under the given curves.

    Principal and coupons are weighted by survival; default recovery pays
    ``recovery`` times notional at default, integrated by trapezoid.
    """
    dates = _coupon_dates(quote.maturity, quote.frequency)
    dfs = dc.discount_factor(dates)
    survs = hz.survival(dates)
    value = hz.survival(quote.maturity) * dc.discount_factor(quote.maturity)
    value += (quote.coupon_rate / quote.frequency) * float(np.sum(survs * dfs))
    if recovery != 0.0:
        nodes = quadrature_nodes(0.0, quote.maturity, quad_step)
        w = trapezoid_weights(nodes)
        integrand = dc.discount_factor(nodes) * hz.survival(nodes) * hz.intensity(nodes)
        value += recovery * float(np.sum(w * integrand))
    return value


def strip_hazard(
    quotes: Sequence[BondQuote],
    dc: DiscountCurve,
    recovery: float,
    quad_step: float = 1.0 / 12.0,
) -> HazardCurve:
    """Bootstrap a piecewise-constant hazard curve from bond quotes.

    Proceeds shortest maturity first; each quote pins the intensity on the
    segment up to its maturity by a bracketed root search on the model price.
    """
    if not 0.0 <= recovery < 1.0:
        raise ValidationError(f"recovery must be in [0, 1), got {recovery}")
    if not quotes:
        raise ValidationError("no quotes to strip")
    mats = [q.maturity for q in quotes]
    if any(b <= a for a, b in zip(mats, mats[1:])):
        raise ValidationError("quotes must be sorted by strictly increasing maturity")
    if dc.max_time + 1e-12 < mats[-1] and not dc.extrapolate:
        raise ExtrapolationNotAllowed(
            f"discount curve ends at {dc.max_time} before last quote maturity {mats[-1]}"
        )

    pillars: list[tuple[float, float]] = []
    for quote in quotes:
        def model_price(lam: float) -> float:
            candidate = HazardCurve(pillars + [(quote.maturity, lam)])
            return reprice_quote(quote, dc, candidate, recovery, quad_step)

        p_riskfree = model_price(0.0)
        if quote.price > p_riskfree + _STRIP_PRICE_TOL:
            raise NegativeHazardImplied(
                f"quote at maturity {quote.maturity} priced above its risk-free value "
                f"({quote.price} > {p_riskfree})"
            )
        if abs(quote.price - p_riskfree) <= _STRIP_PRICE_TOL:
            pillars.append((quote.maturity, 0.0))
            continue
        p_cap = model_price(_STRIP_LAMBDA_MAX)
        if quote.price < p_cap - _STRIP_PRICE_TOL:
            raise StrippingFailed(
                f"no intensity in [0, {_STRIP_LAMBDA_MAX}] reprices maturity {quote.maturity}"
            )
        lam = brentq(
            lambda L: model_price(L) - quote.price,
            0.0,
            _STRIP_LAMBDA_MAX,
            xtol=1e-14,
            rtol=8.9e-16,
            maxiter=200,
        )
        pillars.append((quote.maturity, float(lam)))
    return HazardCurve(pillars)


# ---------------------------------------------------------------------------
# CSV interfaces: comma separated, '.' decimal, header row, LF line endings.
# Lines starting with '#' are treated as comments.
# ---------------------------------------------------------------------------

def _read_rows(path, expected_header: list[str]) -> list[list[str]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise ValidationError(f"{path}: empty file")
    header = [c.strip().lower() for c in rows[0]]
    if header != expected_header:
        raise ValidationError(
            f"{path}: expected header {','.join(expected_header)}, got {','.join(header)}"
        )
    return rows[1:]


def read_discount_csv(path, extrapolate: bool = False) -> DiscountCurve:
    rows = _read_rows(path, ["t", "df"])
    pillars = [(float(r[0]), float(r[1])) for r in rows]
    return DiscountCurve(pillars, extrapolate=extrapolate)


def read_hazard_csv(path, extrapolate: bool = False) -> HazardCurve:
    rows = _read_rows(path, ["t", "lambda"])
    pillars = [(float(r[0]), float(r[1])) for r in rows]
    return HazardCurve(pillars, extrapolate=extrapolate)


def read_quotes_csv(path) -> list[BondQuote]:
    rows = _read_rows(path, ["maturity", "coupon", "frequency", "price"])
    return [
        BondQuote(
            maturity=float(r[0]),
            coupon_rate=float(r[1]),
            frequency=int(r[2]),
            price=float(r[3]),
        )
        for r in rows
    ]


def write_hazard_csv(path, curve: HazardCurve, comment: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write("t,lambda\n")
        for t, lam in curve.pillars:
            fh.write(f"{t!r},{lam!r}\n")
