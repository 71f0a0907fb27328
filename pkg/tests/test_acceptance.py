"""Acceptance gate: one test per criterion, each at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v``; the terminal summary lists
one PASS/FAIL/SKIP line per criterion.
"""
import math
import os
import time

import numpy as np
import pytest
from scipy.stats import spearmanr

from riloss import harness
from riloss.bounds import convergence_study, draw_pairs, hsic_bound, loglog_slope
from riloss.forecaster import LinearForecaster, backward, forward
from riloss.friedman import critical_difference, friedman
from riloss.hsic import HsicConfig, hsic_gradient, hsic_oracle, hsic_plugin, hsic_ustat
from riloss.kernels import gram
from riloss.loss import (
    RiLossConfig, crossterm_mc, mse_decomposition, pearson_mse_loss, ri_loss, sample_noise,
    tradeoff_curve,
)

pytestmark = pytest.mark.acceptance


def central_fd(f, x, h=1e-6):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += h
        xm[idx] -= h
        g[idx] = (f(xp) - f(xm)) / (2 * h)
    return g


def rel_err(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


@pytest.mark.criterion("1")
def test_ustat_matches_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = 0.0
    for i in range(100):
        n = 4 + i % 5
        d = 1 if i % 2 == 0 else 3
        r, s = rng.normal(size=(n, d)), rng.normal(size=(n, d))
        worst = max(worst, abs(hsic_ustat(r, s).value - hsic_oracle(r, s)))
    elapsed = time.perf_counter() - t0
    print(f"max |ustat - oracle| = {worst:.2e}, {elapsed:.1f}s")
    assert worst <= 1e-10
    assert elapsed < 10


@pytest.mark.criterion("2")
def test_plugin_soundness():
    rng = np.random.default_rng(2)
    cfg = HsicConfig()
    worst = 0.0
    for i in range(1000):
        n = int(rng.integers(2, 30))
        r = rng.normal(size=(n, int(rng.integers(1, 4))))
        s = rng.uniform(-1, 1, size=(n, 1))
        v = hsic_plugin(r, s, cfg).value
        assert v >= 0.0
        K, L = gram(r, cfg.kernel_r), gram(s, cfg.kernel_s)
        H = np.eye(n) - np.ones((n, n)) / n
        ref = np.trace(H @ K @ H @ H @ L @ H) / (n - 1) ** 2
        worst = max(worst, abs(v - ref))
    print(f"max |plugin - triple product| = {worst:.2e}")
    assert worst <= 1e-12


@pytest.mark.criterion("3")
def test_gradient_suite():
    t0 = time.perf_counter()
    shapes = [(2, 6, 1), (3, 4, 2), (1, 12, 3)]
    worst = {"hsic": 0.0, "ri": 0.0, "pearson": 0.0, "forecaster": 0.0}
    for shape in shapes:
        for seed in range(5):
            rng = np.random.default_rng([seed, *shape])
            B, H, d = shape
            y, yhat = rng.normal(size=shape), rng.normal(size=shape)
            eps = sample_noise(shape, rng)
            cfg = RiLossConfig(lam=5.0, tau=2.0)

            r, s = (y - yhat).reshape(-1, d), eps.reshape(-1, d)
            g = hsic_gradient(r, s)
            num = central_fd(lambda x: hsic_plugin(x, s).value, r)
            worst["hsic"] = max(worst["hsic"], rel_err(g, num))

            rep = ri_loss(y, yhat, eps, cfg)
            num = central_fd(lambda z: ri_loss(y, z, eps, cfg).total, yhat)
            worst["ri"] = max(worst["ri"], rel_err(rep.grad, num))

            rep = pearson_mse_loss(y, yhat, eps, cfg)
            num = central_fd(lambda z: pearson_mse_loss(y, z, eps, cfg).total, yhat)
            worst["pearson"] = max(worst["pearson"], rel_err(rep.grad, num))

            w = 10
            m = LinearForecaster.init(w, H, d, 3)
            m = m.with_params({k: v + rng.normal(scale=0.2, size=v.shape)
                               for k, v in m.params().items()})
            x = rng.normal(size=(B, w, d))
            grads = backward(m, x, ri_loss(y, forward(m, x), eps, cfg).grad)
            for name, p in m.params().items():
                def total(q, name=name):
                    return ri_loss(y, forward(m.with_params({**m.params(), name: q}), x), eps,
                                   cfg).total
                worst["forecaster"] = max(worst["forecaster"],
                                          rel_err(grads[name], central_fd(total, p)))
    elapsed = time.perf_counter() - t0
    print(f"worst relative errors {worst}, {elapsed:.1f}s")
    assert max(worst.values()) < 1e-4
    assert elapsed < 30


@pytest.mark.criterion("4")
def test_crossterm_expectation():
    t0 = time.perf_counter()
    H = 8
    cases = [np.eye(H)]
    for i in range(10):
        cases.append(harness.random_projection(H, np.random.default_rng(100 + i)))
    misses = []
    for j, P in enumerate(cases):
        for sigma in (0.5, 1.0):
            res = crossterm_mc(P, sigma, trials=100_000, seed=j)
            z = abs(res.empirical - res.analytic) / res.stderr if res.stderr > 0 else 0.0
            if j == 0:
                assert res.analytic == 0.0 and res.empirical == 0.0
            elif z > 3:
                misses.append((j, sigma, round(z, 2)))
    elapsed = time.perf_counter() - t0
    print(f"cases outside 3 s.e.: {misses}, {elapsed:.1f}s")
    assert not misses
    assert elapsed < 60


@pytest.fixture(scope="module")
def tradeoff_rows():
    t0 = time.perf_counter()
    rows = tradeoff_curve([50.0], np.linspace(0.0, 1.0, 51), points=1000, seed=0)
    return rows, time.perf_counter() - t0


@pytest.mark.criterion("5a")
def test_tradeoff_mse_rank_increasing(tradeoff_rows):
    rows, elapsed = tradeoff_rows
    rho = [r.rho for r in rows]
    rank = spearmanr(rho, [r.mse for r in rows]).statistic
    print(f"Spearman(rho, MSE) = {rank:.3f}, {elapsed:.1f}s")
    assert rank > 0.9
    assert elapsed < 60


@pytest.mark.criterion("5b")
def test_tradeoff_ri_interior_minimum(tradeoff_rows):
    rows, elapsed = tradeoff_rows
    best = min(rows, key=lambda r: r.ri)
    print(f"RI argmin at rho = {best.rho:.2f}, {elapsed:.1f}s")
    assert 0.3 <= best.rho <= 0.7
    assert elapsed < 60


@pytest.mark.criterion("6")
def test_mse_decomposition_identity():
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(1000):
        shape = tuple(int(v) for v in rng.integers(1, 8, size=int(rng.integers(2, 4))))
        y, yhat = rng.normal(size=shape), rng.normal(size=shape)
        eps = rng.normal(scale=rng.uniform(0.1, 2.0), size=shape)
        p = mse_decomposition(y, yhat, eps)
        worst = max(worst, abs(p["true"] - (p["observed"] - 2 * p["cross"] + p["noise"])))
    print(f"max identity residual = {worst:.2e}")
    assert worst <= 1e-10


@pytest.mark.criterion("7")
def test_convergence_study():
    t0 = time.perf_counter()
    grid = [50, 100, 200, 400]
    rows = convergence_study("independent", grid, replicates=50, reference_n=4000, seed=0,
                             mc_draws=200)
    devs = [r.mean_abs_dev for r in rows]
    slope = loglog_slope(rows)
    gam = {}
    rng = np.random.default_rng(70)
    for n in grid:
        r, s = draw_pairs("independent", n, rng)
        _, rk, rl = hsic_bound(r, s, mc_draws=200, seed=n)
        gam[n] = (rk.gamma1 + rl.gamma1, rk.gamma2 + rl.gamma2)
    ratios = [(gam[4 * n][0] / gam[n][0], gam[4 * n][1] / gam[n][1]) for n in (50, 100)]
    elapsed = time.perf_counter() - t0
    print(f"deviations {[f'{d:.2e}' for d in devs]}, slope {slope:.3f}, "
          f"gamma ratios on quadrupling {ratios}, {elapsed:.1f}s")
    assert all(a > b for a, b in zip(devs, devs[1:]))
    assert -1.1 <= slope <= -0.35
    assert all(g1 <= 0.5 and g2 <= 0.5 for g1, g2 in ratios)
    assert elapsed < 120


SYNTHETIC_BENEFIT = """\
[data]
synthetic = seasonal
synthetic_length = 1500
w = 96
H = 96
snr_db = 0

[loss]
lambda = 10
tau = 1

[train]
epochs = 5
batch_size = 16
learning_rate = 0.005
"""


@pytest.mark.criterion("8")
@pytest.mark.slow
def test_synthetic_end_to_end_benefit():
    t0 = time.process_time()
    cfg = harness.parse_config(SYNTHETIC_BENEFIT)
    wins, lines = 0, []
    for seed in range(5):
        c = cfg.with_seed(seed)
        prep = harness.prepare(c)
        m = harness.run_training(c.with_loss("mse"), prepared=prep)["test_mse"]
        r = harness.run_training(c.with_loss("ri"), prepared=prep)["test_mse"]
        wins += r <= m
        lines.append(f"seed {seed}: mse {m:.5f} ri {r:.5f}")
    elapsed = time.process_time() - t0
    print("; ".join(lines) + f"; RI wins {wins}/5, {elapsed:.0f}s CPU")
    assert wins >= 4
    assert elapsed < 300


ETTH1 = """\
[data]
path = {path}
split = ett_hourly
w = 96
H = 96

[loss]
lambda = 10
tau = 1

[train]
epochs = 10
batch_size = 32
learning_rate = 0.005
"""


@pytest.mark.criterion("9")
@pytest.mark.datasets
def test_etth1_table_cell(data_dir):
    path = os.path.join(data_dir, "ETTh1.csv")
    if not os.path.isfile(path):
        pytest.skip(f"{path} not found")
    cfg = harness.parse_config(ETTH1.format(path=os.path.abspath(path)))
    prep = harness.prepare(cfg)
    m = harness.run_training(cfg.with_loss("mse"), prepared=prep)["test_mse"]
    r = harness.run_training(cfg.with_loss("ri"), prepared=prep)["test_mse"]
    print(f"ETTh1 H=96: mse-trained {m:.4f}, ri-trained {r:.4f}")
    assert abs(m - 0.384) <= 0.02
    assert abs(r - 0.346) <= 0.02
    assert r < m


@pytest.mark.criterion("10")
def test_friedman_arithmetic():
    table = [[1, 2, 3], [1, 3, 2], [2, 1, 3], [1, 2, 3]]
    res = friedman(table, q_alpha=2.343)
    # avg ranks 1.25, 2, 2.75: sum r^2 = 13.125, chi2 = 4 * (13.125 - 12) = 4.5
    assert res.tau_chi2 == pytest.approx(4.5, abs=1e-9)
    assert res.tau_f == pytest.approx(3 * 4.5 / (8 - 4.5), abs=1e-9)
    assert res.cd == pytest.approx(2.343 * math.sqrt(3 * 4 / 24), abs=1e-9)
    cd = critical_difference(10, 160, 3.164)
    print(f"tau_F = {res.tau_f:.9f}, CD(10, 160, 3.164) = {cd:.4f}")
    assert cd == pytest.approx(1.071, abs=5e-4)
