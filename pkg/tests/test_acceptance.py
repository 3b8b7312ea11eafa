"""End-to-end acceptance criteria, one test (and one printed verdict line) each.

Run with ``pytest -m acceptance -s tests/test_acceptance.py`` to see the
verdict lines; they are also printed when output is captured.
"""

import math
import time
import warnings

import numpy as np
import pytest

from xdalm.allocation import (
    ComponentStats,
    allocate,
    classical_weight,
    delta_one_weight,
    effective_correlation,
    hurdle_form_weight,
    objective_value,
    return_seeking_weight,
    risk_avoiding_weight,
    weight_profile,
)
from xdalm.backtest import BacktestConfig, pnl_std, run_ldi_backtest, run_option_hedge_backtest
from xdalm.cli import main
from xdalm.decomposition import fast_ica
from xdalm.io.synth import rank_deficient_spec, synth_factor_returns, synth_ldi_scenario, synth_option_scenario
from xdalm.liability import revalue
from xdalm.moments import central_moment, cross_moment, gaussian_moment, var_cvar, xd
from xdalm.options import (
    CALL,
    PUT,
    Greeks,
    OptionSpec,
    VolParams,
    bs_greeks,
    bs_price,
    euler_option_increments,
    option_hurdle_correction,
    option_weight,
    skew_adjusted_ratio,
)

pytestmark = [
    pytest.mark.acceptance,
    pytest.mark.filterwarnings("ignore::xdalm.exceptions.IdentifiabilityWarning"),
]


@pytest.fixture
def verdict(capsys):
    def emit(label, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {label}: {detail}")
        return ok

    return emit


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def test_criterion_1_gaussian_identity(verdict):
    rng = np.random.default_rng(20240601)
    n = 10**6
    failures, worst = [], 0.0
    with Timer() as t:
        for rho in (-0.5, 0.0, 0.8):
            for ratio in (0.5, 2.0):
                sigma = 0.01
                sigma_L = ratio * sigma
                z1, z2 = rng.standard_normal((2, n))
                c = sigma * z1
                l = sigma_L * (rho * z1 + math.sqrt(1 - rho * rho) * z2)
                for k in (1, 2, 3):
                    own = central_moment(c, 2 * k)
                    got = (cross_moment(c, l, k) / own).value
                    want = rho * ratio ** (2 * k - 1)
                    if rho != 0.0:
                        err = abs(got / want - 1.0)
                        worst = max(worst, err)
                        if err >= 0.05:
                            failures.append((rho, ratio, k, got, want))
                    else:
                        se = np.std((c - c.mean()) * l ** (2 * k - 1)) / math.sqrt(n) / own.value
                        if abs(got) >= 3 * se:
                            failures.append((rho, ratio, k, got, 3 * se))
    ok = not failures and t.elapsed < 60
    verdict(1, ok, f"18 cases, worst relative error {worst:.4f} (< 0.05), {len(failures)} failures, {t.elapsed:.1f}s (< 60s)")
    assert not failures, failures
    assert t.elapsed < 60


def test_criterion_2_k1_collapse(verdict):
    rng = np.random.default_rng(7)
    worst = 0.0
    with Timer() as t:
        for _ in range(1000):
            mu, r = rng.uniform(-0.1, 0.1, 2)
            sigma, sigma_L = rng.uniform(0.01, 1.0, 2)
            rho = rng.uniform(-1, 1)
            lam = 10 ** rng.uniform(-3, 1)
            cs = ComponentStats.gaussian(mu, r, sigma, rho, sigma_L, 1)
            ws = [
                return_seeking_weight(cs, lam),
                risk_avoiding_weight(cs, lam),
                classical_weight(cs, lam),
                delta_one_weight(mu, r, sigma, rho, sigma_L, 1, lam),
            ]
            scale = max(1.0, max(abs(w) for w in ws))
            worst = max(worst, (max(ws) - min(ws)) / scale)
    ok = worst <= 1e-12 and t.elapsed < 1
    verdict(2, ok, f"1000 draws, worst pairwise gap {worst:.2e} (<= 1e-12, relative above unit size), {t.elapsed:.2f}s (< 1s)")
    assert worst <= 1e-12
    assert t.elapsed < 1


def _grid_objective(grid, C, L, mu, r, r_L, k, lam):
    # plain float evaluation, independent of the log-space implementation
    dc = C - C.mean()
    dl = L - r_L
    dev = grid[:, None] * dc[None, :] - dl[None, :]
    return grid * (mu - r) - (L.mean() - r_L) - lam * np.mean(dev ** (2 * k), axis=1)


def test_criterion_3_optimisation_oracle(verdict):
    rng = np.random.default_rng(11)
    shortfalls, closed_gaps, n_checked = [], [], 0
    with Timer() as t, warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for inst in range(100):
            k = (1, 2, 3)[inst % 3]
            T = 120
            S = np.column_stack([rng.laplace(size=T), rng.uniform(-1.7, 1.7, T)])
            X = S @ rng.normal(size=(2, 2)).T * 0.01 + rng.normal(0, 0.002, 2)
            L = X @ rng.normal(size=2) + 0.003 * rng.standard_normal(T)
            lam = 10 ** rng.uniform(-2, 1)
            model = fast_ica(X)
            res = allocate(model, L, k=k, lam=lam, regime="auto", refine=True)
            r_L = float(L.mean())
            for i, w in enumerate(res.component_weights):
                C = model.components[:, i]
                cs = res.stats[i]
                # widen until the grid maximum is interior (the objective is concave)
                span = 4.0 * max(1.0, abs(w))
                while True:
                    grid = np.linspace(-span, span, 10**4)
                    vals = _grid_objective(grid, C, L, cs.mu, cs.r, r_L, k, lam)
                    j = int(np.argmax(vals))
                    if 0 < j < grid.size - 1:
                        break
                    span *= 4.0
                slack = max(vals[j] - vals[j - 1], vals[j] - vals[j + 1])
                f_sel = objective_value(w, C, L, cs.mu, cs.r, r_L, k, lam)
                # the two evaluators must agree where they overlap
                assert objective_value(grid[j], C, L, cs.mu, cs.r, r_L, k, lam) == pytest.approx(vals[j], rel=1e-9, abs=1e-12)
                if f_sel < vals[j] - slack:
                    shortfalls.append((inst, i, k, f_sel, vals[j], slack))
                closed = res.candidates[res.regimes[i]][i]
                if math.isfinite(closed):
                    closed_gaps.append(vals[j] - objective_value(closed, C, L, cs.mu, cs.r, r_L, k, lam))
                n_checked += 1
    ok = not shortfalls and t.elapsed < 120
    verdict(
        3,
        ok,
        f"{n_checked} components in 100 instances, {len(shortfalls)} below grid max - 1 cell, "
        f"{t.elapsed:.1f}s (< 120s); closed-form-only median objective gap {np.median(closed_gaps):.2e} (info)",
    )
    assert not shortfalls, shortfalls[:5]
    assert t.elapsed < 120


def test_criterion_4_xd_limit(verdict):
    rng = np.random.default_rng(3)
    seq_fail = tail_fail = chain_fail = 0
    for trial in range(200):
        x = rng.standard_t(3, 252) * 0.01
        dev = np.abs(x - x.mean())
        assert np.sum(dev == dev.max()) == 1
        est = xd(x, k_max=100)
        seq = est.moment_sequence
        if np.any(np.diff(seq) < -1e-14 * est.xd_value) or np.any(seq > est.xd_value * (1 + 1e-14)):
            seq_fail += 1
        if seq[99] < 0.95 * est.xd_value:
            tail_fail += 1
    for trial in range(1000):
        x = rng.standard_normal(252) * rng.uniform(0.001, 0.05)
        var, cvar = var_cvar(x, 0.99)
        if not var <= cvar <= xd(x, 1).xd_value:
            chain_fail += 1
    ok = seq_fail == tail_fail == chain_fail == 0
    verdict(
        4,
        ok,
        f"moment sequence: {seq_fail} non-monotone/unbounded, {tail_fail} with root-200 below 0.95 XD (200 samples); "
        f"VaR <= CVaR <= XD violations {chain_fail}/1000",
    )
    assert ok


def test_criterion_5_ica_recovery(verdict):
    with Timer() as t:
        rng = np.random.default_rng(5)
        T = 2000
        S = np.column_stack([rng.uniform(-1, 1, T), rng.laplace(size=T), rng.exponential(size=T) - 1.0])
        X = S @ rng.normal(size=(3, 3)).T
        model = fast_ica(X)
        corr = np.abs(np.corrcoef(model.components.T, S.T)[:3, 3:])
        best = corr.max(axis=0)
        permutation_ok = len(set(corr.argmax(axis=0))) == 3
        _, _, R = synth_factor_returns(rank_deficient_spec(10, 9), seed=0)
        n_comp = fast_ica(R).n_components
    ok = bool(np.all(best > 0.95)) and permutation_ok and n_comp == 9 and t.elapsed < 30
    verdict(5, ok, f"source correlations {np.round(best, 4).tolist()} (> 0.95), rank-9-of-10 panel gives {n_comp} components, {t.elapsed:.1f}s (< 30s)")
    assert ok


def test_criterion_6_step_limit(verdict):
    r, sigma, sigma_L, rho, lam = 0.01, 0.1, 0.1, 0.5, 0.01
    prof50 = weight_profile([r], r=r, sigma=sigma, rho=rho, sigma_L=sigma_L, lam=lam, k_list=(50,))
    r_eff = float(prof50.effective_hurdles[0])
    mu = np.linspace(2 * r_eff, 20 * r_eff, 200)
    prof = weight_profile(mu, r=r, sigma=sigma, rho=rho, sigma_L=sigma_L, lam=lam, k_list=(1, 50))
    var1 = prof.weights[0].max() / prof.weights[0].min() - 1.0
    var50 = prof.weights[1].max() / prof.weights[1].min() - 1.0
    ks = np.arange(1, 201)
    ec = np.array([effective_correlation(0.5, int(k)) for k in ks])
    monotone = bool(np.all(np.diff(ec) > 0) and np.all(ec < 1.0))
    ec50 = effective_correlation(0.5, 50)
    ok = var50 < 0.10 and var1 > 3.0 and monotone and ec50 > 0.99
    verdict(
        6,
        ok,
        f"over mu in [2, 20] r_eff: k=50 varies {var50:.2%} (< 10%), k=1 varies {var1:.0%} (> 300%); "
        f"effective correlation monotone={monotone}, value at k=50 {ec50:.5f} (> 0.99)",
    )
    assert ok


def test_criterion_7_option_consistency(verdict):
    with Timer() as t:
        rng = np.random.default_rng(17)
        worst_id = 0.0
        for _ in range(200):
            kind = CALL if rng.random() < 0.5 else PUT
            spec = OptionSpec(100.0, rng.uniform(0.05, 1.0), kind)
            S = rng.uniform(80, 120)
            g = bs_greeks(spec, S, rng.uniform(0.1, 0.6))
            vp = VolParams(rng.uniform(0.1, 0.6), rng.uniform(0, 1.5), rng.uniform(-0.9, 0.9))
            k = int(rng.integers(1, 60))
            lam, sig = 10 ** rng.uniform(-3, 0), rng.uniform(0.5, 3.0)
            mu, rr = rng.normal(0, 0.01, 2)
            w = option_weight(mu, rr, sig, g, vp, k, lam)
            rc = option_hurdle_correction(g, vp, k, lam, sigma=sig)
            w2 = hurdle_form_weight(mu, rr, rc, gaussian_moment(sig, k), k, lam)
            worst_id = max(worst_id, abs(w - w2) / max(1.0, abs(w)))

        # one-step Monte Carlo: the variance-minimising hedge of the option increment
        n, dt = 10**6, 1 / 252
        vp = VolParams(0.25, 0.9, -0.7)
        g = bs_greeks(OptionSpec(100.0, 0.25, PUT), 100.0, vp.sigma)
        dW = rng.standard_normal(n)
        dZ = vp.q * dW + math.sqrt(1 - vp.q**2) * rng.standard_normal(n)
        dS, dO = euler_option_increments(g, vp, dW, dZ, dt)
        dSc = dS - dS.mean()
        beta = float(np.dot(dSc, dO - dO.mean()) / np.dot(dSc, dSc))
        resid = dO - dO.mean() - beta * dSc
        se = float(np.std(resid) / (np.std(dS) * math.sqrt(n)))
        target = skew_adjusted_ratio(g, vp)
        mc_z = abs(beta - target) / se
        # k=1 zero-excess weight is the same hedge
        w1 = option_weight(0.0, 0.0, 1.0, g, vp, 1, 0.01)

        worst_fd = 0.0
        for kind in (CALL, PUT):
            for S in (85.0, 100.0, 115.0):
                spec, vol, rate = OptionSpec(100.0, 0.5, kind), 0.3, 0.02
                gg = bs_greeks(spec, S, vol, rate)
                f = lambda s=S, v=vol, T=0.5: bs_price(spec.with_expiry(T), s, v, rate)  # noqa: E731
                h = 1e-3
                fd = {
                    "delta": (f(S + h) - f(S - h)) / (2 * h),
                    "gamma": (f(S + h) - 2 * f() + f(S - h)) / h**2,
                    "vega": (f(v=vol + 1e-4) - f(v=vol - 1e-4)) / 2e-4,
                    "theta": -(f(T=0.5 + 1e-4) - f(T=0.5 - 1e-4)) / 2e-4,
                }
                for name, val in fd.items():
                    worst_fd = max(worst_fd, abs(getattr(gg, name) - val))
    ok = worst_id <= 1e-10 and mc_z < 3 and abs(w1 - target) < 1e-14 and worst_fd < 1e-6 and t.elapsed < 90
    verdict(
        7,
        ok,
        f"weight vs hurdle form worst gap {worst_id:.1e} (<= 1e-10); MC hedge {beta:.5f} vs skew ratio {target:.5f}, "
        f"{mc_z:.2f} s.e. (< 3); greeks vs finite differences worst {worst_fd:.1e} (< 1e-6); {t.elapsed:.1f}s (< 90s)",
    )
    assert ok


# ---------------------------------------------------------------- criterion 8

_BACKTEST_TIME = {}


def test_criterion_8a_ldi_convergence(verdict):
    with Timer() as t:
        sc = synth_ldi_scenario(seed=0)
        W = 504
        cfg = BacktestConfig(k_list=(1, 5, 10, 50), lam=0.01, estimation_window=W, cost_rate=0.0)
        rv = revalue(sc.cashflows, sc.curves, roll=True)
        rep = run_ldi_backtest(sc.returns, rv.changes, cfg)
    _BACKTEST_TIME["ldi"] = t.elapsed
    gap = float(np.max(np.abs(rep.value["k10"] - rep.value["k50"])))
    npv_vol = float(np.std(rv.npv[W:]))
    change_vol = float(np.std(rv.changes[W:]))
    ratio = gap / npv_vol
    ok = ratio < 0.10
    verdict(
        "8a",
        ok,
        f"LDI k=10 vs k=50 max divergence {gap:.4g} = {ratio:.2f} x liability NPV volatility {npv_vol:.4g} (< 0.10); "
        f"{gap / change_vol:.1f} x per-period change std (info); {t.elapsed:.2f}s",
    )
    assert ratio < 0.10


def _option_run():
    sc = synth_option_scenario(seed=0)
    cfg = BacktestConfig(k_list=(1, 5, 10, 50, 100), lam=0.01, estimation_window=42, cost_rate=0.0006)
    rep = run_option_hedge_backtest(sc.quotes, sc.prices, sc.book, cfg, sc.vol_params, inception=sc.inception)
    return sc, cfg, rep


def test_criterion_8b_option_weights_converge(verdict):
    with Timer() as t:
        sc, cfg, rep = _option_run()
    _BACKTEST_TIME["options"] = t.elapsed
    i0 = int(np.flatnonzero(sc.prices.dates == sc.inception)[0])
    W = cfg.estimation_window
    zero_delta, full = {}, {}
    for ui, u in enumerate(rep.meta["underlyings"]):
        dS = np.diff(sc.prices.column(u)[i0 - W : i0 + 1])
        mu, sig = float(dS.mean()), float(dS.std())
        S = float(sc.prices.column(u)[i0])
        vp = VolParams(sc.true_vols[u][i0], *sc.vol_params[u])
        w = {k: option_weight(mu, 0.0, sig, Greeks.zero(S), vp, k, cfg.lam, own_moment=central_moment(dS, 2 * k)) for k in (50, 100)}
        zero_delta[u] = abs(w[50] - w[100]) / abs(w[100])
        h50, h100 = rep.holdings["k50"][0, ui], rep.holdings["k100"][0, ui]
        full[u] = abs(h50 - h100) / abs(h100)
    worst = max(zero_delta.values())
    ok = worst < 0.02
    verdict(
        "8b",
        ok,
        "k=50 vs k=100 zero-delta hedge weights, relative gap per underlier "
        + ", ".join(f"{u} {v:.2%}" for u, v in zero_delta.items())
        + " (< 2%); full skew-adjusted inception weights (info) "
        + ", ".join(f"{u} {v:.2%}" for u, v in full.items()),
    )
    assert worst < 0.02


def test_criterion_8c_modified_hedge_beats_delta(verdict):
    sc, cfg, rep = _option_run()
    base = pnl_std(rep, "delta")
    stds = {k: pnl_std(rep, f"k{k}") for k in cfg.k_list}
    ok = all(stds[k] <= base for k in cfg.k_list if k >= 5)
    total = sum(_BACKTEST_TIME.values()) if _BACKTEST_TIME else float("nan")
    verdict(
        "8c",
        ok and total < 300,
        f"daily PnL std delta {base:.3f}, " + ", ".join(f"k={k} {s:.3f}" for k, s in stds.items()) + f" (k >= 5 must be <= delta); backtests {total:.1f}s (< 300s)",
    )
    assert ok
    assert total < 300


# ---------------------------------------------------------------- criterion 9


def _run_twice(tmp_path, args):
    outs = []
    for tag in ("a", "b"):
        d = tmp_path / f"{args[0]}-{tag}-{abs(hash(tuple(args))) % 10**6}"
        assert main([*args, "--out-dir", str(d)]) == 0
        outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
    return outs


def test_criterion_9_determinism(tmp_path, verdict):
    data = tmp_path / "data"
    assert main(["synth", "--kind", "panel", "--n-periods", "300", "--seed", "4", "--out-dir", str(data)]) == 0
    prices = str(data / "prices.csv")
    runs = {
        "risk-report": ["risk-report", "--prices", prices],
        "decompose": ["decompose", "--prices", prices, "--seed", "1"],
        "profile": ["profile", "--k-list", "1", "5", "50"],
        "backtest-ldi": ["backtest-ldi", "--seed", "0"],
        "backtest-options": ["backtest-options", "--seed", "0"],
        "synth panel": ["synth", "--kind", "panel", "--seed", "2"],
        "synth ldi": ["synth", "--kind", "ldi", "--seed", "2"],
        "synth options": ["synth", "--kind", "options", "--seed", "2"],
    }
    differing = []
    for name, args in runs.items():
        a, b = _run_twice(tmp_path, args)
        if a != b or not a:
            differing.append(name)
    ok = not differing
    verdict(9, ok, f"{len(runs)} subcommand runs repeated, byte-identical: {len(runs) - len(differing)}/{len(runs)}" + (f" (differ: {differing})" if differing else ""))
    assert ok
