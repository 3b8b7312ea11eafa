"""Command-line entry point: ``xdalm <subcommand> [options]``.

Every subcommand writes CSV/JSON into ``--out-dir``. Files are staged in a
temporary directory and moved into place only once all of them are
complete, so a failing run leaves nothing behind.
"""

from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
import tempfile
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .allocation import effective_correlation, weight_profile
from .backtest import BacktestReport, run_ldi_backtest, run_option_hedge_backtest
from .decomposition import fast_ica
from .exceptions import SchemaError
from .io import config as config_io
from .io import synth, tables
from .liability import revalue
from .moments import var_cvar, xd

EXIT_OK, EXIT_ERROR, EXIT_USAGE = 0, 1, 2


def _f(x) -> str:
    return repr(float(x))


class Outputs:
    """Collects output files and commits them atomically."""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.files: dict[str, str] = {}

    def add(self, name: str, text: str):
        self.files[name] = text

    def add_csv(self, name: str, header, rows):
        lines = [",".join(header)]
        lines += [",".join(row) for row in rows]
        self.add(name, "\n".join(lines) + "\n")

    def commit(self) -> list[Path]:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        stage = Path(tempfile.mkdtemp(prefix=".xdalm-", dir=self.out_dir))
        try:
            for name, text in self.files.items():
                with open(stage / name, "w", newline="") as fh:
                    fh.write(text)
            written = []
            for name in self.files:
                os.replace(stage / name, self.out_dir / name)
                written.append(self.out_dir / name)
            return written
        finally:
            shutil.rmtree(stage, ignore_errors=True)


# ---------------------------------------------------------------- inputs


# used by backtest-options when no config file is given
OPTION_DEFAULTS = {"k_list": (1, 5, 10, 50, 100), "estimation_window": 42, "cost_rate": 0.0006}


def _config(args):
    if args.config:
        return config_io.load_config(args.config)
    if args.command == "backtest-options":
        return config_io.RunConfig(**OPTION_DEFAULTS)
    return config_io.RunConfig()


def _panel(args, cfg):
    prices = getattr(args, "prices", None) or cfg.prices
    returns = getattr(args, "returns", None) or cfg.returns
    if prices and returns:
        raise SchemaError("give either prices or returns, not both")
    if prices:
        return tables.load_prices(prices)
    if returns:
        return tables.load_returns(returns)
    raise SchemaError("no input: pass --prices or --returns (or set them in --config)")


# ---------------------------------------------------------------- commands


def cmd_risk_report(args, cfg, out: Outputs):
    panel = _panel(args, cfg)
    p_levels = args.p or list(cfg.p_levels)
    k_max = args.k_max or cfg.k_max
    risk_rows, moment_rows = [], []
    for j, asset in enumerate(panel.assets):
        col = panel.matrix[:, j]
        est = xd(col, k_max)
        for p in p_levels:
            var, cvar = var_cvar(col, p)
            risk_rows.append((asset, _f(p), _f(var), _f(cvar), _f(est.xd_value)))
        for k, root in enumerate(est.moment_sequence, start=1):
            moment_rows.append((asset, str(k), _f(root), _f(est.xd_value)))
    out.add_csv("risk_report.csv", ("instrument", "p", "var", "cvar", "xd"), risk_rows)
    out.add_csv("moment_sequence.csv", ("instrument", "k", "moment_root", "xd"), moment_rows)


def cmd_decompose(args, cfg, out: Outputs):
    panel = _panel(args, cfg)
    model = fast_ica(panel, seed=args.seed if args.seed is not None else cfg.seed)
    names = [f"IC{i + 1}" for i in range(model.n_components)]
    out.add_csv(
        "mixing.csv",
        ("instrument", *names),
        ((a, *(_f(x) for x in model.mixing[i])) for i, a in enumerate(panel.assets)),
    )
    out.add_csv(
        "unmixing.csv",
        ("component", *panel.assets),
        ((c, *(_f(x) for x in model.unmixing[i])) for i, c in enumerate(names)),
    )
    out.add_csv("mean.csv", ("instrument", "mean"), ((a, _f(m)) for a, m in zip(panel.assets, model.whitening.mean)))
    out.add_csv(
        "components.csv",
        ("date", *names),
        ((str(d), *(_f(x) for x in row)) for d, row in zip(panel.timestamps, model.components)),
    )
    out.add(
        "decomposition.json",
        _json({"rank": model.rank, "n_components": model.n_components, "n_iter": model.n_iter, "converged": model.converged}),
    )


def cmd_profile(args, cfg, out: Outputs):
    ks = args.k_list or list(cfg.k_list)
    lam = args.lam if args.lam is not None else cfg.lam
    mu = np.linspace(args.mu_min, args.mu_max, args.n_mu)
    prof = weight_profile(mu, r=args.r, sigma=args.sigma, rho=args.rho, sigma_L=args.sigma_l, lam=lam, k_list=ks)
    rows = []
    for ki, k in enumerate(ks):
        for i, m in enumerate(mu):
            rows.append((str(k), _f(m), _f(prof.weights[ki, i]), _f(prof.effective_hurdles[ki])))
    out.add_csv("weight_profile.csv", ("k", "mu", "weight", "effective_hurdle"), rows)
    rhos = np.linspace(-1.0, 1.0, args.n_rho)
    out.add_csv(
        "effective_correlation.csv",
        ("k", "rho", "effective_correlation"),
        ((str(k), _f(r), _f(effective_correlation(r, k))) for k in ks for r in rhos),
    )


def _write_report(rep, out):
    out.add("report.csv", rep.to_csv())
    out.add("trades.csv", rep.trades_csv())
    out.add("summary.json", rep.summary_json())


def cmd_backtest_ldi(args, cfg, out: Outputs):
    bcfg = cfg.backtest_config()
    if cfg.prices or cfg.returns:
        panel = _panel(args, cfg)
        if not (cfg.cashflows and cfg.curves):
            raise SchemaError("an LDI run on user data needs 'cashflows' and 'curves'")
        schedule, curves = tables.load_cashflows(cfg.cashflows), tables.load_curves(cfg.curves)
    else:
        scen = synth.synth_ldi_scenario(seed=args.seed if args.seed is not None else cfg.seed)
        panel, schedule, curves = scen.returns, scen.cashflows, scen.curves
    rv = revalue(schedule, curves, cfg.roll)
    if rv.dates.size != panel.shape[0] + 1 or np.any(rv.dates[1:] != panel.timestamps):
        raise SchemaError("curve dates must be the price dates (one curve per close)")
    rep = run_ldi_backtest(panel, rv.changes, bcfg, cfg.funding_rates)
    if cfg.zero_weights:
        rep = _only(rep, ("unhedged",))
    rep.meta["liability_npv0"] = float(rv.npv[bcfg.estimation_window])
    _write_report(rep, out)
    out.add_csv(
        "weights.csv",
        ("strategy", *panel.assets),
        ((s, *(_f(x) for x in rep.holdings[s][0])) for s in rep.strategies if s in rep.holdings),
    )


def cmd_backtest_options(args, cfg, out: Outputs):
    bcfg = cfg.backtest_config()
    if cfg.prices:
        if not cfg.quotes:
            raise SchemaError("an option run on user data needs 'quotes'")
        prices = tables.load_price_table(cfg.prices)
        quotes = tables.load_option_quotes(cfg.quotes)
        book = cfg.book or {q.option_id: -1.0 for q in quotes}
        vol_params = cfg.vol_params
        inception = None
    else:
        scen = synth.synth_option_scenario(seed=args.seed if args.seed is not None else cfg.seed)
        prices, quotes, book, vol_params, inception = scen.prices, scen.quotes, scen.book, scen.vol_params, scen.inception
    rep = run_option_hedge_backtest(quotes, prices, book, bcfg, vol_params, rate=cfg.rate, inception=inception)
    if cfg.zero_weights:
        rep = _only(rep, ("unhedged",))
    _write_report(rep, out)


def _only(rep, keep):
    """The report restricted to the named strategies."""
    pick = lambda d: {s: d[s] for s in keep if s in d}  # noqa: E731
    return BacktestReport(
        rep.dates,
        tuple(keep),
        pick(rep.value),
        pick(rep.pnl),
        pick(rep.gross),
        pick(rep.cost),
        [t for t in rep.trades if t.strategy in keep],
        pick(rep.holdings),
        rep.diagnostics,
        rep.meta,
    )


def cmd_synth(args, cfg, out: Outputs):
    seed = args.seed if args.seed is not None else cfg.seed
    kind = args.kind
    if kind == "panel":
        spec = synth.rank_deficient_spec(args.n_instruments, args.rank, args.n_periods, seed=seed)
        table = synth.synth_panel(spec, seed)
        out.add("prices.csv", _capture(tables.write_price_table, table))
    elif kind == "ldi":
        scen = synth.synth_ldi_scenario(seed=seed, n_periods=args.n_periods)
        out.add("prices.csv", _capture(tables.write_price_table, scen.prices))
        out.add("cashflows.csv", _capture(tables.write_cashflows, scen.cashflows))
        out.add("curves.csv", _capture(tables.write_curves, scen.curves))
        out.add(
            "config.json",
            config_io.dump_config(
                config_io.RunConfig(seed=seed, prices="prices.csv", cashflows="cashflows.csv", curves="curves.csv", estimation_window=min(504, args.n_periods - 2))
            ),
        )
    else:
        scen = synth.synth_option_scenario(seed=seed)
        out.add("prices.csv", _capture(tables.write_price_table, scen.prices))
        out.add("quotes.csv", _capture(tables.write_option_quotes, scen.quotes))
        out.add(
            "config.json",
            config_io.dump_config(
                config_io.RunConfig(
                    seed=seed,
                    k_list=(1, 5, 10, 50, 100),
                    estimation_window=42,
                    cost_rate=0.0006,
                    prices="prices.csv",
                    quotes="quotes.csv",
                    book=scen.book,
                    vol_params=scen.vol_params,
                )
            ),
        )


def _capture(writer, obj) -> str:
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "x.csv"
        writer(obj, path)
        return path.read_text()


def _json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    def globals_(default):
        g = argparse.ArgumentParser(add_help=False, argument_default=default)
        g.add_argument("--seed", type=int, help="random seed (overrides the config)")
        g.add_argument("--config", help="JSON run configuration")
        g.add_argument("--out-dir", help="directory for output files (default: current directory)")
        return g

    # the subcommand copy suppresses defaults so flags given before the subcommand survive
    common = globals_(argparse.SUPPRESS)
    parser = argparse.ArgumentParser(prog="xdalm", description="Liability-driven allocation under 2k-moment risk.", parents=[globals_(None)])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_, description=help_, parents=[common], argument_default=argparse.SUPPRESS)
        p.set_defaults(func=func)
        return p

    def inputs(p):
        p.add_argument("--prices", help="price CSV (date,instrument,close)")
        p.add_argument("--returns", help="return CSV (date,instrument,return)")

    p = add("risk-report", cmd_risk_report, "VaR, CVaR, XD and the 2k-moment root sequence per instrument")
    inputs(p)
    p.add_argument("--p", type=float, action="append", help="VaR/CVaR level; repeatable (default 0.99)")
    p.add_argument("--k-max", type=int, help="length of the moment sequence (default 100)")

    p = add("decompose", cmd_decompose, "FastICA decomposition of a return panel")
    inputs(p)

    p = add("profile", cmd_profile, "delta-one weight against expected return, and effective correlations")
    p.add_argument("--mu-min", type=float, default=-0.05)
    p.add_argument("--mu-max", type=float, default=0.20)
    p.add_argument("--n-mu", type=int, default=251)
    p.add_argument("--r", type=float, default=0.0, help="funding rate")
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--sigma-l", type=float, default=0.1)
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--lam", type=float, default=None)
    p.add_argument("--k-list", type=int, nargs="+", default=None)
    p.add_argument("--n-rho", type=int, default=201)

    add("backtest-ldi", cmd_backtest_ldi, "LDI backtest (bundled synthetic data unless the config names files)")
    add("backtest-options", cmd_backtest_options, "option hedging backtest (bundled synthetic data unless the config names files)")

    p = add("synth", cmd_synth, "write synthetic input files")
    p.add_argument("--kind", choices=("panel", "ldi", "options"), default="ldi")
    p.add_argument("--n-periods", type=int, default=756)
    p.add_argument("--n-instruments", type=int, default=10)
    p.add_argument("--rank", type=int, default=9)
    return parser


def _namespace_defaults(args):
    for name, default in (("seed", None), ("config", None), ("out_dir", None), ("prices", None), ("returns", None), ("p", None), ("k_max", None)):
        if not hasattr(args, name):
            setattr(args, name, default)
    return args


def main(argv=None) -> int:
    parser = build_parser()
    args = _namespace_defaults(parser.parse_args(argv))
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            cfg = _config(args)
            out = Outputs(args.out_dir or cfg.out_dir or ".")
            args.func(args, cfg, out)
            for path in out.commit():
                print(path)
    except (ValueError, OSError, ArithmeticError, RuntimeError) as exc:
        print(f"xdalm {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
