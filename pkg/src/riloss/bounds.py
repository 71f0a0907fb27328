"""Numerical evaluation of the HSIC deviation bound.

The kernel is fixed, so suprema over the kernel class reduce to evaluation
at that kernel. The universal constant ``c0`` is an input, not a derived value.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass
from typing import Literal, NamedTuple

import numpy as np

from . import _backend
from .hsic import HsicConfig, hsic_plugin, hsic_ustat
from .kernels import KernelSpec, SampleError, as_samples, hoeffding_components


@dataclass(frozen=True)
class RademacherEstimates:
    r_sigma: float
    w_sigma_sigma: float
    w_sigma_alpha: float
    w_sigma: float
    f_sup: float
    mc_draws: int
    r_sigma_se: float
    w_sigma_sigma_se: float
    w_sigma_alpha_se: float
    w_sigma_se: float
    exhaustive: bool = False


@dataclass(frozen=True)
class BoundReport:
    n: int
    delta: float
    c1: float
    c2: float
    c0: float
    gamma1: float
    gamma2: float
    gamma3: float
    total: float

    def to_dict(self) -> dict:
        return asdict(self)


def estimate_rademacher(samples, spec: KernelSpec, mc_draws: int = 1000, seed=0,
                        exhaustive: bool = False) -> RademacherEstimates:
    """Average the Rademacher functionals of the Hoeffding parts over sign draws.

    With ``exhaustive=True`` all 2^n sign vectors are enumerated (n <= 16)
    and the averages are exact expectations over sigma.
    """
    X = as_samples(samples)
    n = X.shape[0]
    if n < 2:
        raise SampleError("estimate_rademacher needs n >= 2")
    hc = hoeffding_components(X, spec)
    if exhaustive:
        if n > 16:
            raise ValueError(f"exhaustive enumeration limited to n <= 16, got {n}")
        signs = np.array(list(itertools.product((-1.0, 1.0), repeat=n)))
    else:
        if mc_draws < 100:
            raise ValueError(f"mc_draws must be >= 100, got {mc_draws}")
        rng = np.random.default_rng(seed)
        signs = rng.choice(np.array([-1.0, 1.0]), size=(mc_draws, n))
    draws = _backend.ops().rademacher_draws(hc.f1, np.ascontiguousarray(hc.f2), signs)
    m = draws.shape[0]
    means = [math.fsum(draws[:, j]) / m for j in range(4)]
    ses = [0.0] * 4 if exhaustive else [float(draws[:, j].std(ddof=1)) / math.sqrt(m) for j in range(4)]
    return RademacherEstimates(
        r_sigma=means[0], w_sigma_sigma=means[1], w_sigma_alpha=means[2], w_sigma=means[3],
        f_sup=float(np.max(np.abs(hc.f2))), mc_draws=m,
        r_sigma_se=ses[0], w_sigma_sigma_se=ses[1], w_sigma_alpha_se=ses[2], w_sigma_se=ses[3],
        exhaustive=exhaustive,
    )


def gamma_terms(n: int, delta: float, estimates: RademacherEstimates, c1: float = 0.0,
                c2: float = 1.0, c0: float = 1.0) -> BoundReport:
    """Evaluate gamma1..gamma3 for one kernel; ``total`` is that kernel's 3*c2*sum(gamma)."""
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if not c2 > c1:
        raise ValueError(f"need c2 > c1, got c1={c1}, c2={c2}")
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    L = math.log(2.0 / delta)
    span = c2 - c1
    g1 = 10.0 * span / n * L
    g2 = 2.0 * span * math.sqrt(2.0 * L * (estimates.r_sigma / (2.0 * n) + L / n**2))
    F = estimates.f_sup
    inner = (estimates.w_sigma_sigma + math.sqrt(2.0) * estimates.w_sigma_alpha
             + 2.0 * (estimates.w_sigma + F) / n + math.sqrt(8.0) * F * math.sqrt(n) / n**2
             + 4.0 * F / n**2)
    g3 = 4.0 * math.sqrt(L * (c0 / (n - 1) * inner + L / n**2))
    return BoundReport(n=n, delta=delta, c1=c1, c2=c2, c0=c0, gamma1=g1, gamma2=g2, gamma3=g3,
                       total=3.0 * c2 * (g1 + g2 + g3))


def hsic_bound(r, s, cfg: HsicConfig | None = None, delta: float = 0.05, mc_draws: int = 1000,
               seed=0, c0: float = 1.0) -> tuple[float, BoundReport, BoundReport]:
    """Two-kernel bound: sum of the residual-kernel and noise-kernel contributions.

    Gaussian kernels take values in (0, 1], so c1 = 0 and c2 = 1.
    """
    cfg = cfg or HsicConfig()
    R, S = as_samples(r), as_samples(s)
    n = R.shape[0]
    ss = np.random.SeedSequence(seed).spawn(2)
    est_k = estimate_rademacher(R, cfg.kernel_r, mc_draws, np.random.default_rng(ss[0]))
    est_l = estimate_rademacher(S, cfg.kernel_s, mc_draws, np.random.default_rng(ss[1]))
    rep_k = gamma_terms(n, delta, est_k, 0.0, 1.0, c0)
    rep_l = gamma_terms(n, delta, est_l, 0.0, 1.0, c0)
    return rep_k.total + rep_l.total, rep_k, rep_l


def draw_pairs(dependence: str, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    r = rng.standard_normal(n)
    z = rng.standard_normal(n)
    if dependence == "independent":
        s = z
    elif dependence == "linear":
        s = r + 0.5 * z
    elif dependence == "quadratic":
        s = r**2 + 0.5 * z
    else:
        raise ValueError(f"unknown dependence {dependence!r}")
    return r, s


class ConvergenceRow(NamedTuple):
    n: int
    mean_abs_dev: float
    se: float
    bound_total: float
    reference: float


def convergence_study(dependence: Literal["independent", "linear", "quadratic"], n_grid,
                      replicates: int = 50, reference_n: int | None = None, seed: int = 0,
                      delta: float = 0.05, mc_draws: int = 200, c0: float = 1.0,
                      cfg: HsicConfig | None = None) -> list[ConvergenceRow]:
    """Mean |HSIC_u(n) - reference| per n, with the bound evaluated on the first replicate.

    The reference is the plug-in estimate on one sample of size ``reference_n``.
    """
    cfg = cfg or HsicConfig()
    grid = sorted({int(n) for n in n_grid})
    if not grid or grid[0] < 4 or len(grid) != len(list(n_grid)):
        raise ValueError(f"n_grid must hold distinct sizes >= 4, got {list(n_grid)}")
    reference_n = reference_n or 10 * grid[-1]
    if reference_n < 10 * grid[-1]:
        raise ValueError(f"reference_n must be >= {10 * grid[-1]}")
    if replicates < 20:
        raise ValueError(f"replicates must be >= 20, got {replicates}")
    root = np.random.SeedSequence(seed)
    ref_ss, *grid_ss = root.spawn(1 + len(grid))
    r, s = draw_pairs(dependence, reference_n, np.random.default_rng(ref_ss))
    ref = hsic_plugin(r, s, cfg).value
    rows = []
    for n, ss in zip(grid, grid_ss):
        rng = np.random.default_rng(ss)
        devs = np.empty(replicates)
        bound = math.nan
        for i in range(replicates):
            r, s = draw_pairs(dependence, n, rng)
            devs[i] = abs(hsic_ustat(r, s, cfg).value - ref)
            if i == 0:
                bound = hsic_bound(r, s, cfg, delta, mc_draws, rng.integers(2**63), c0)[0]
        rows.append(ConvergenceRow(n, float(devs.mean()), float(devs.std(ddof=1) / math.sqrt(replicates)),
                                   bound, ref))
    return rows


def loglog_slope(rows) -> float:
    x = np.log([r.n for r in rows])
    y = np.log([r.mean_abs_dev for r in rows])
    return float(np.polyfit(x, y, 1)[0])
