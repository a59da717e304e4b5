"""Batch command-line front end.

Subcommands: price, convergence, sensitivity, surface, strip-hazard. Every
run is driven by a flat JSON config file whose keys can be overridden by
flags, writes its outputs into --output-dir, and is deterministic given the
seed. All delimited outputs start with a '#' comment echoing the parameters;
result.json echoes them in a "parameters" member instead, since JSON has no
comments.

Exit codes: 0 success, 2 validation error (bad config/inputs), 3 numerical
failure during computation.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .blackvol import build_surface, implied_vol
from .bondmath import BondSpec, CouponMode, cmt_from_yield
from .curves import (
    DiscountCurve,
    HazardCurve,
    read_discount_csv,
    read_hazard_csv,
    read_quotes_csv,
    reprice_quote,
    strip_hazard,
    write_hazard_csv,
)
from .errors import CmtError, ValidationError
from .hazard_evolution import HazardInitMode
from .hullwhite import HullWhiteParams
from .mc_engine import (
    PayoffKind,
    PayoffSpec,
    SimulationConfig,
    price,
    simulate,
    static_forward_cmt,
)

_DEFAULTS = {
    "discount_csv": None,
    "hazard_csv": None,
    "quotes_csv": None,
    "output_dir": ".",
    "sigma": 0.01,
    "alpha": 0.10,
    "recovery": 0.20,
    "theta": 10.0,
    "kappa": 2,
    "coupon_mode": "cmt_par",
    "coupon_rate": 0.0,
    "expiry": 1.0,
    "paths": 1024,
    "seed": 1234,
    "step_days": 1,
    "quad_step": 1.0 / 12.0,
    "lambda_init_mode": "stabilized",
    "payoff": "terminal_yield",
    "strike": "atmf",
    "pay_frequency": 4,
    "accrual": None,
    "final_maturity": None,
    "workers": 1,
    "dump_paths": False,
    "plot": False,
}

_OVERRIDE_KEYS = [
    ("sigma", float), ("alpha", float), ("recovery", float), ("theta", float),
    ("kappa", int), ("expiry", float), ("paths", int), ("seed", int),
    ("step_days", int), ("workers", int), ("coupon_rate", float),
]


class ConfigError(ValidationError):
    pass


def _load_config(args) -> dict:
    cfg = dict(_DEFAULTS)
    if args.config is not None:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            loaded = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config must be a flat JSON object")
        unknown = set(loaded) - set(_DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg.update(loaded)
    for key, _ in _OVERRIDE_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    for attr, key in (
        ("discount_csv", "discount_csv"), ("hazard_csv", "hazard_csv"),
        ("quotes_csv", "quotes_csv"), ("output_dir", "output_dir"),
        ("payoff", "payoff"), ("strike", "strike"),
    ):
        val = getattr(args, attr, None)
        if val is not None:
            cfg[key] = val
    if getattr(args, "plot", False):
        cfg["plot"] = True
    if getattr(args, "dump_paths", False):
        cfg["dump_paths"] = True
    return cfg


def _build_curves(cfg) -> tuple[DiscountCurve, HazardCurve]:
    if not cfg["discount_csv"]:
        raise ConfigError("discount_csv is required")
    dpath = Path(cfg["discount_csv"])
    if not dpath.is_file():
        raise ConfigError(f"discount curve file not found: {dpath}")
    dc = read_discount_csv(dpath)
    if cfg["hazard_csv"]:
        hpath = Path(cfg["hazard_csv"])
        if not hpath.is_file():
            raise ConfigError(f"hazard curve file not found: {hpath}")
        hz = read_hazard_csv(hpath)
    elif cfg["quotes_csv"]:
        qpath = Path(cfg["quotes_csv"])
        if not qpath.is_file():
            raise ConfigError(f"quotes file not found: {qpath}")
        hz = strip_hazard(read_quotes_csv(qpath), dc, float(cfg["recovery"]),
                          float(cfg["quad_step"]))
    else:
        hz = HazardCurve.zero(horizon=max(dc.max_time, 60.0))
    horizon = float(cfg["expiry"]) + float(cfg["theta"])
    if dc.max_time + 1e-9 < horizon:
        raise ConfigError(
            f"discount curve ends at {dc.max_time}y, before expiry+tenor = {horizon}y"
        )
    if hz.max_time + 1e-9 < horizon and not hz.extrapolate:
        raise ConfigError(
            f"hazard curve ends at {hz.max_time}y, before expiry+tenor = {horizon}y"
        )
    return dc, hz


def _bond_spec(cfg) -> BondSpec:
    mode_key = str(cfg["coupon_mode"]).lower()
    try:
        mode = CouponMode(mode_key)
    except ValueError as exc:
        raise ConfigError(f"unknown coupon_mode: {cfg['coupon_mode']}") from exc
    return BondSpec(
        theta=float(cfg["theta"]),
        kappa=int(cfg["kappa"]),
        recovery=float(cfg["recovery"]),
        coupon_mode=mode,
        coupon_rate=float(cfg["coupon_rate"]),
    )


def _resolve_strike(cfg, dc, hz, spec, expiry) -> float:
    raw = cfg["strike"]
    if isinstance(raw, str):
        if raw.lower() == "atmf":
            return static_forward_cmt(dc, hz, spec, expiry, float(cfg["quad_step"]))
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"strike must be a number or 'atmf', got {raw!r}") from exc
    return float(raw)


def _payoff_spec(cfg, dc, hz, spec) -> PayoffSpec:
    try:
        kind = PayoffKind(str(cfg["payoff"]).lower())
    except ValueError as exc:
        raise ConfigError(f"unknown payoff kind: {cfg['payoff']}") from exc
    strike = None
    if kind is not PayoffKind.TERMINAL_YIELD and kind is not PayoffKind.TERMINAL_CMT:
        strike = _resolve_strike(cfg, dc, hz, spec, float(cfg["expiry"]))
    accrual = cfg["accrual"]
    final = cfg["final_maturity"]
    return PayoffSpec(
        kind=kind,
        strike=strike,
        pay_frequency=int(cfg["pay_frequency"]),
        accrual=None if accrual is None else float(accrual),
        final_maturity=None if final is None else float(final),
    )


def _sim_config(cfg, payoff: PayoffSpec, spec: BondSpec, n_paths=None, sigma=None,
                alpha=None, expiry=None, seed=None) -> SimulationConfig:
    mode_key = str(cfg["lambda_init_mode"]).lower()
    try:
        init_mode = HazardInitMode(mode_key)
    except ValueError as exc:
        raise ConfigError(f"unknown lambda_init_mode: {cfg['lambda_init_mode']}") from exc
    step_days = int(cfg["step_days"])
    if step_days < 1:
        raise ConfigError("step_days must be >= 1")
    return SimulationConfig(
        expiry=float(cfg["expiry"] if expiry is None else expiry),
        spec=spec,
        hw=HullWhiteParams(
            alpha=float(cfg["alpha"] if alpha is None else alpha),
            sigma=float(cfg["sigma"] if sigma is None else sigma),
        ),
        n_paths=int(cfg["paths"] if n_paths is None else n_paths),
        seed=int(cfg["seed"] if seed is None else seed),
        step=step_days / 365.0,
        quad_step=float(cfg["quad_step"]),
        init_mode=init_mode,
        payoff=payoff,
        workers=int(cfg["workers"]),
    )


# execution details that cannot affect the numbers stay out of the echo so
# outputs are byte-identical across worker counts and output locations
_ECHO_EXCLUDED = {"plot", "output_dir", "workers"}


def _param_echo(cfg) -> str:
    keys = sorted(k for k, v in cfg.items() if v is not None and k not in _ECHO_EXCLUDED)
    return " ".join(f"{k}={cfg[k]}" for k in keys)


def _write_csv(path: Path, header: str, rows, comment: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# {comment}\n")
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in row) + "\n")


def _out_dir(cfg) -> Path:
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_price(cfg) -> int:
    dc, hz = _build_curves(cfg)
    spec = _bond_spec(cfg)
    payoff = _payoff_spec(cfg, dc, hz, spec)
    sim = _sim_config(cfg, payoff, spec)
    result = price(sim, dc, hz)
    out = _out_dir(cfg)

    doc = {
        "parameters": {k: v for k, v in sorted(cfg.items()) if k not in _ECHO_EXCLUDED},
        "n_paths": result.n_paths,
        "y0": result.y0,
        "expected_yield": result.expected_yield,
        "expected_cmt": result.expected_cmt,
        "convexity_adjustment": result.expected_yield - result.y0,
        "yield_std_error": result.yield_std_error,
    }
    if payoff.kind not in (PayoffKind.TERMINAL_YIELD, PayoffKind.TERMINAL_CMT):
        doc["strike"] = payoff.strike
        doc["option_price"] = result.mean
        doc["option_std_error"] = result.std_error
    (out / "result.json").write_text(
        json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )

    if cfg["dump_paths"] and result.sample is not None:
        s = result.sample
        rows = zip(range(s.n_paths), s.y_terminal.tolist(), s.cmt.tolist(),
                   result.payoffs.tolist())
        _write_csv(out / "paths.csv", "path,y_T,cmt,payoff", rows, _param_echo(cfg))
    if cfg["plot"] and result.sample is not None:
        from .report import render_distribution

        s = result.sample
        render_distribution(s.y_terminal, s.cmt, s.yield_vol_abs, out / "distribution.png")
    print(f"y0={result.y0!r} E[y_T]={result.expected_yield!r} E[CMT]={result.expected_cmt!r}")
    return 0


def _yield_and_caplet(cfg, dc, hz, spec, n_paths, sigma=None, alpha=None,
                      recovery=None, seed=None):
    """One simulation; terminal-yield estimate and ATMF caplet from the same paths."""
    local_spec = spec if recovery is None else BondSpec(
        theta=spec.theta, kappa=spec.kappa, recovery=float(recovery),
        coupon_mode=spec.coupon_mode, coupon_rate=spec.coupon_rate,
    )
    sim = _sim_config(cfg, PayoffSpec(PayoffKind.TERMINAL_YIELD), local_spec,
                      n_paths=n_paths, sigma=sigma, alpha=alpha, seed=seed)
    sample = simulate(sim, dc, hz)
    n = sample.n_paths
    e_yield = float(sample.y_terminal.mean())
    se_yield = float(sample.y_terminal.std()) / math.sqrt(n)
    strike = float(cmt_from_yield(local_spec.kappa, sample.y0))
    acc = 0.25
    df_pay = dc.discount_factor(sim.expiry + acc)
    pay = df_pay * acc * np.maximum(sample.cmt - strike, 0.0)
    caplet = float(pay.mean())
    se_caplet = float(pay.std()) / math.sqrt(n)
    return e_yield, se_yield, caplet, se_caplet


def cmd_convergence(cfg, path_counts) -> int:
    if not path_counts:
        raise ConfigError("convergence needs at least one path count")
    if any(b <= a for a, b in zip(path_counts, path_counts[1:])):
        raise ConfigError("path counts must be strictly increasing")
    dc, hz = _build_curves(cfg)
    spec = _bond_spec(cfg)
    rows_yield, rows_caplet = [], []
    for n in path_counts:
        e_y, se_y, c, se_c = _yield_and_caplet(cfg, dc, hz, spec, n)
        rows_yield.append((n, e_y, se_y))
        rows_caplet.append((n, c, se_c))
    out = _out_dir(cfg)
    echo = _param_echo(cfg)
    _write_csv(out / "convergence_yield.csv", "n_paths,estimate,std_error", rows_yield, echo)
    _write_csv(out / "convergence_caplet.csv", "n_paths,estimate,std_error", rows_caplet, echo)
    if cfg["plot"]:
        from .report import render_convergence

        render_convergence(rows_yield, rows_caplet, out / "convergence.png")
    print(f"wrote convergence files for paths={','.join(str(n) for n in path_counts)}")
    return 0


_SWEEPABLE = ("sigma", "alpha", "recovery")


def cmd_sensitivity(cfg, sweep: str, values) -> int:
    if sweep not in _SWEEPABLE:
        raise ConfigError(f"sweep must be one of {_SWEEPABLE}, got {sweep!r}")
    if not values:
        raise ConfigError("sensitivity needs at least one value")
    dc, hz = _build_curves(cfg)
    spec = _bond_spec(cfg)
    rows = []
    for v in values:
        kwargs = {sweep: v}
        e_y, se_y, c, se_c = _yield_and_caplet(cfg, dc, hz, spec, cfg["paths"], **kwargs)
        rows.append((v, e_y, c, se_y, se_c))
    out = _out_dir(cfg)
    _write_csv(
        out / f"sensitivity_{sweep}.csv",
        "param_value,E_yield,atmf_caplet,std_error_yield,std_error_caplet",
        rows,
        _param_echo(cfg),
    )
    if cfg["plot"]:
        from .report import render_sensitivity

        render_sensitivity(sweep, rows, out / f"sensitivity_{sweep}.png")
    print(f"wrote sensitivity_{sweep}.csv over {len(values)} values")
    return 0


def cmd_surface(cfg, expiries, strikes) -> int:
    if not expiries or not strikes:
        raise ConfigError("surface needs non-empty expiry and strike grids")
    dc, hz = _build_curves(cfg)
    spec = _bond_spec(cfg)
    acc = 1.0 / int(cfg["pay_frequency"])
    entries = []
    for expiry in expiries:
        horizon = expiry + spec.theta
        if dc.max_time + 1e-9 < horizon:
            raise ConfigError(f"discount curve too short for expiry {expiry}")
        sim = _sim_config(cfg, PayoffSpec(PayoffKind.TERMINAL_YIELD), spec, expiry=expiry)
        sample = simulate(sim, dc, hz)
        fwd = float(sample.cmt.mean())
        df_pay = dc.discount_factor(expiry + acc)
        for strike in strikes:
            is_call = strike >= fwd
            if is_call:
                pay = df_pay * acc * np.maximum(sample.cmt - strike, 0.0)
            else:
                pay = df_pay * acc * np.maximum(strike - sample.cmt, 0.0)
            entries.append((expiry, strike, float(pay.mean()), fwd, df_pay, acc, is_call))
    points = build_surface(entries)
    out = _out_dir(cfg)
    rows = [
        (p.expiry, p.strike, p.implied_vol, str(p.converged).lower())
        for p in points
    ]
    _write_csv(out / "surface.csv", "expiry,strike,implied_vol,converged", rows,
               _param_echo(cfg))
    if cfg["plot"]:
        from .report import render_surface

        render_surface(points, out / "surface.png")
    n_ok = sum(1 for p in points if p.converged)
    print(f"wrote surface.csv: {n_ok}/{len(points)} points converged")
    return 0


def cmd_strip(cfg) -> int:
    if not cfg["quotes_csv"]:
        raise ConfigError("strip-hazard requires quotes_csv")
    if not cfg["discount_csv"]:
        raise ConfigError("strip-hazard requires discount_csv")
    qpath, dpath = Path(cfg["quotes_csv"]), Path(cfg["discount_csv"])
    if not qpath.is_file():
        raise ConfigError(f"quotes file not found: {qpath}")
    if not dpath.is_file():
        raise ConfigError(f"discount curve file not found: {dpath}")
    quotes = read_quotes_csv(qpath)
    mats = [q.maturity for q in quotes]
    if any(b <= a for a, b in zip(mats, mats[1:])):
        raise ConfigError("quotes must be sorted by strictly increasing maturity")
    dc = read_discount_csv(dpath)
    recovery = float(cfg["recovery"])
    quad_step = float(cfg["quad_step"])
    hz = strip_hazard(quotes, dc, recovery, quad_step)
    out = _out_dir(cfg)
    write_hazard_csv(out / "hazard.csv", hz, comment=_param_echo(cfg))
    rows = []
    for q in quotes:
        model = reprice_quote(q, dc, hz, recovery, quad_step)
        rows.append((q.maturity, q.price, model, model - q.price))
    _write_csv(out / "strip_report.csv", "maturity,quote_price,model_price,residual",
               rows, _param_echo(cfg))
    worst = max(abs(r[3]) for r in rows)
    print(f"stripped {len(quotes)} quotes; max repricing residual {worst:.3e}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text}") from exc


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text}") from exc


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat JSON config file")
    p.add_argument("--discount-csv", dest="discount_csv", help="discount curve CSV (t,df)")
    p.add_argument("--hazard-csv", dest="hazard_csv", help="hazard curve CSV (t,lambda)")
    p.add_argument("--quotes-csv", dest="quotes_csv", help="bond quotes CSV")
    p.add_argument("--output-dir", dest="output_dir", help="directory for output files")
    p.add_argument("--sigma", type=float, help="short-rate volatility")
    p.add_argument("--alpha", type=float, help="mean reversion speed")
    p.add_argument("--recovery", type=float, help="recovery rate")
    p.add_argument("--theta", type=float, help="constant maturity tenor in years")
    p.add_argument("--kappa", type=int, help="coupons per year")
    p.add_argument("--expiry", type=float, help="forward start / option expiry in years")
    p.add_argument("--paths", type=int, help="Monte Carlo paths")
    p.add_argument("--seed", type=int, help="random seed")
    p.add_argument("--step-days", dest="step_days", type=int, help="time step in days")
    p.add_argument("--workers", type=int, help="parallel worker processes")
    p.add_argument("--coupon-rate", dest="coupon_rate", type=float,
                   help="fixed coupon rate (fixed coupon mode)")
    p.add_argument("--payoff", help="terminal_yield|terminal_cmt|caplet|floorlet|cap|floor")
    p.add_argument("--strike", help="option strike, or 'atmf'")
    p.add_argument("--plot", action="store_true", help="render PNG figures next to the CSVs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cmtmc",
        description="Monte Carlo pricing of constant-maturity-treasury derivatives",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("price", help="price one payoff, write result.json")
    _add_common(p)
    p.add_argument("--dump-paths", dest="dump_paths", action="store_true",
                   help="write per-path terminal records to paths.csv")

    p = sub.add_parser("convergence", help="estimate vs path count")
    _add_common(p)
    p.add_argument("--path-counts", dest="path_counts", type=_int_list,
                   default=[512, 1024, 2048, 4096], help="comma-separated path counts")

    p = sub.add_parser("sensitivity", help="sweep sigma, alpha, or recovery")
    _add_common(p)
    p.add_argument("--sweep", required=True, choices=_SWEEPABLE)
    p.add_argument("--values", required=True, type=_float_list,
                   help="comma-separated parameter values")

    p = sub.add_parser("surface", help="Black implied volatility surface")
    _add_common(p)
    p.add_argument("--expiries", type=_float_list, default=[1.0, 2.0, 3.0, 5.0, 7.0, 10.0])
    p.add_argument("--strikes", type=_float_list,
                   default=[0.04, 0.05, 0.06, 0.07, 0.08, 0.09])

    p = sub.add_parser("strip-hazard", help="bootstrap a hazard curve from bond quotes")
    _add_common(p)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args)
        if args.command == "price":
            return cmd_price(cfg)
        if args.command == "convergence":
            return cmd_convergence(cfg, args.path_counts)
        if args.command == "sensitivity":
            return cmd_sensitivity(cfg, args.sweep, args.values)
        if args.command == "surface":
            return cmd_surface(cfg, args.expiries, args.strikes)
        if args.command == "strip-hazard":
            return cmd_strip(cfg)
        raise ConfigError(f"unknown command {args.command}")
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CmtError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
