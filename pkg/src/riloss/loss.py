"""Forecasting objectives with value-and-gradient evaluation.

Shape convention: a 2-D (H, d) array is a single window and is normalised by
H; a 3-D (B, H, d) batch is normalised by B*H*d. The RI and Pearson losses
return gradients with respect to the prediction.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Literal, NamedTuple

import numpy as np

from .hsic import HsicConfig, hsic_plugin, hsic_plugin_and_grad, tensor_samples
from .kernels import KernelSpec


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class RiLossConfig:
    lam: float = 10.0
    tau: float = 1.0
    hsic: HsicConfig = field(default_factory=HsicConfig)
    noise: Literal["uniform"] = "uniform"
    seed: int = 0
    sample_axis: Literal["flatten", "window"] = "flatten"

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if not self.tau > 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if self.noise != "uniform":
            raise ValueError(f"unsupported noise distribution {self.noise!r}")
        if self.sample_axis not in ("flatten", "window"):
            raise ValueError(f"unknown sample axis {self.sample_axis!r}")


@dataclass
class LossReport:
    total: float
    mse_component: float
    hsic_value: float
    hsic_term: float
    grad: np.ndarray
    degenerate: bool = False


def _check(y, yhat):
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    if y.shape != yhat.shape:
        raise ShapeError(f"shape mismatch: {y.shape} vs {yhat.shape}")
    if y.size == 0:
        raise ShapeError(f"empty target of shape {y.shape}")
    return y, yhat


def _norm(shape) -> int:
    if len(shape) == 3:
        return shape[0] * shape[1] * shape[2]
    if len(shape) in (1, 2):
        return shape[0]
    raise ShapeError(f"expected (H,), (H, d) or (B, H, d), got {shape}")


def mse(y, yhat) -> float:
    y, yhat = _check(y, yhat)
    r = y - yhat
    return float(np.sum(r * r)) / _norm(y.shape)


def mae(y, yhat) -> float:
    y, yhat = _check(y, yhat)
    return float(np.sum(np.abs(y - yhat))) / _norm(y.shape)


def mse_decomposition(y, yhat, eps) -> dict[str, float]:
    """Split the noise-free error of prediction vs (y - eps) into observed terms.

    ``true == observed - 2*cross + noise`` holds algebraically, using the same
    normaliser as :func:`mse`.
    """
    y, yhat = _check(y, yhat)
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != y.shape:
        raise ShapeError(f"noise shape {eps.shape} != target shape {y.shape}")
    n = _norm(y.shape)
    t = (y - eps) - yhat
    return {
        "true": float(np.sum(t * t)) / n,
        "observed": mse(y, yhat),
        "cross": float(np.sum((y - yhat) * eps)) / n,
        "noise": float(np.sum(eps * eps)) / n,
    }


def pearson(r, s) -> float:
    r = np.ravel(np.asarray(r, dtype=np.float64))
    s = np.ravel(np.asarray(s, dtype=np.float64))
    if r.shape != s.shape:
        raise ShapeError(f"length mismatch: {r.size} vs {s.size}")
    if r.size < 2:
        raise ValueError("pearson needs at least 2 points")
    a = r - r.mean()
    b = s - s.mean()
    na = math.sqrt(float(a @ a))
    nb = math.sqrt(float(b @ b))
    if na == 0.0 or nb == 0.0:
        raise ValueError("correlation undefined for a constant input")
    return min(1.0, max(-1.0, float(a @ b) / (na * nb)))


def sample_noise(shape, rng) -> np.ndarray:
    """i.i.d. U(-1, 1) noise. ``rng`` is a Generator or an integer seed."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    return rng.uniform(-1.0, 1.0, size=tuple(shape))


def mse_loss(y, yhat) -> LossReport:
    y, yhat = _check(y, yhat)
    n = _norm(y.shape)
    r = y - yhat
    v = float(np.sum(r * r)) / n
    return LossReport(total=v, mse_component=v, hsic_value=0.0, hsic_term=0.0, grad=-2.0 * r / n)


def mae_loss(y, yhat) -> LossReport:
    y, yhat = _check(y, yhat)
    n = _norm(y.shape)
    r = y - yhat
    v = float(np.sum(np.abs(r))) / n
    return LossReport(total=v, mse_component=mse(y, yhat), hsic_value=0.0, hsic_term=0.0,
                      grad=-np.sign(r) / n)


def ri_loss(y, yhat, eps, cfg: RiLossConfig | None = None) -> LossReport:
    """MSE plus lam * exp(-tau * HSIC(residual, noise)).

    Minimising the second term drives the residual towards dependence on the
    injected noise. HSIC is the plug-in estimator over the samples chosen by
    ``cfg.sample_axis``.
    """
    cfg = cfg or RiLossConfig()
    y, yhat = _check(y, yhat)
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != y.shape:
        raise ShapeError(f"noise shape {eps.shape} != target shape {y.shape}")
    n = _norm(y.shape)
    r = y - yhat
    mse_v = float(np.sum(r * r)) / n
    R = tensor_samples(r, cfg.sample_axis)
    S = tensor_samples(eps, cfg.sample_axis)
    if R.shape[0] < 2:
        raise ShapeError(f"HSIC needs at least 2 samples, got {R.shape[0]}")
    est, g = hsic_plugin_and_grad(R, S, cfg.hsic)
    term = cfg.lam * math.exp(-cfg.tau * est.value)
    # d/dyhat = -d/dr and d(term)/dh = -tau * term
    grad = -2.0 * r / n + cfg.tau * term * g.reshape(r.shape)
    return LossReport(total=mse_v + term, mse_component=mse_v, hsic_value=est.value,
                      hsic_term=term, grad=grad)


def pearson_mse_loss(y, yhat, eps, cfg: RiLossConfig | None = None) -> LossReport:
    """RI loss with HSIC swapped for the Pearson correlation of flattened residual and noise."""
    cfg = cfg or RiLossConfig()
    y, yhat = _check(y, yhat)
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != y.shape:
        raise ShapeError(f"noise shape {eps.shape} != target shape {y.shape}")
    n = _norm(y.shape)
    r = y - yhat
    mse_v = float(np.sum(r * r)) / n
    grad = -2.0 * r / n
    a = r.ravel() - r.mean()
    b = eps.ravel() - eps.mean()
    na = math.sqrt(float(a @ a))
    nb = math.sqrt(float(b @ b))
    if na == 0.0 or nb == 0.0:
        warnings.warn("constant residual or noise: Pearson term treated as 0", RuntimeWarning,
                      stacklevel=2)
        term = cfg.lam
        return LossReport(total=mse_v + term, mse_component=mse_v, hsic_value=0.0,
                          hsic_term=term, grad=grad, degenerate=True)
    pc = float(a @ b) / (na * nb)
    term = cfg.lam * math.exp(-cfg.tau * pc)
    dpc = b / (na * nb) - pc * a / (na * na)
    grad = grad + cfg.tau * term * dpc.reshape(r.shape)
    return LossReport(total=mse_v + term, mse_component=mse_v, hsic_value=pc, hsic_term=term,
                      grad=grad)


def evaluate(kind: str, y, yhat, eps=None, cfg: RiLossConfig | None = None) -> LossReport:
    if kind == "mse":
        return mse_loss(y, yhat)
    if kind == "mae":
        return mae_loss(y, yhat)
    if kind == "ri":
        return ri_loss(y, yhat, eps, cfg)
    if kind == "pearson_mse":
        return pearson_mse_loss(y, yhat, eps, cfg)
    raise ValueError(f"unknown loss kind {kind!r}")


class TradeoffRow(NamedTuple):
    tau: float
    rho: float
    mse: float
    hsic: float
    ri: float


def tradeoff_curve(tau_values, rho_grid, points: int = 1000, seed: int = 0,
                   corruption: Literal["shared", "fresh"] = "shared",
                   lam: float = 1.0) -> list[TradeoffRow]:
    """MSE and RI against the corrupted fraction rho of a noisy sinusoid.

    ``y_true = sin(x) + eps`` on 0..2pi. For each rho, a random rho-fraction of
    sin(x) is corrupted to give ``y_noisy``. With ``corruption="shared"`` the
    corrupted points receive the same baseline draw eps, so the prediction
    absorbs more of the noise as rho grows; ``"fresh"`` adds an independent
    N(0, 1) draw instead. HSIC uses the unit-scale kernel exp(-|a - b|^2).
    """
    if points < 100:
        raise ValueError(f"points must be >= 100, got {points}")
    rho_grid = [float(p) for p in rho_grid]
    if any(not 0.0 <= p <= 1.0 for p in rho_grid):
        raise ValueError("rho values must lie in [0, 1]")
    if corruption not in ("shared", "fresh"):
        raise ValueError(f"unknown corruption mode {corruption!r}")
    unit = KernelSpec(bandwidth=1.0, scale_convention="unit")
    cfg = HsicConfig(kernel_r=unit, kernel_s=unit)
    rng = np.random.default_rng(seed)
    x = np.linspace(0.0, 2.0 * np.pi, points)
    signal = np.sin(x)
    eps = rng.standard_normal(points)
    y_true = signal + eps
    per_rho = []
    for rho in rho_grid:
        mask = np.zeros(points, dtype=bool)
        mask[rng.choice(points, int(round(rho * points)), replace=False)] = True
        extra = eps if corruption == "shared" else rng.standard_normal(points)
        y_noisy = signal + np.where(mask, extra, 0.0)
        resid = y_true - y_noisy
        per_rho.append((rho, float(np.mean(resid**2)), hsic_plugin(resid, eps, cfg).value))
    rows = []
    for tau in tau_values:
        for rho, m, h in per_rho:
            rows.append(TradeoffRow(float(tau), rho, m, h, m + lam * math.exp(-float(tau) * h)))
    return rows


class CrossTerm(NamedTuple):
    empirical: float
    analytic: float
    stderr: float


def crossterm_mc(P, sigma: float, trials: int = 100_000, seed: int = 0, h=None,
                 chunk: int = 20_000) -> CrossTerm:
    """Monte-Carlo mean of <Y - PY, eps>/H for Y = h + eps, eps ~ N(0, sigma^2 I)."""
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ShapeError(f"P must be square, got shape {P.shape}")
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    if trials < 10_000:
        raise ValueError(f"trials must be >= 1e4, got {trials}")
    H = P.shape[0]
    rng = np.random.default_rng(seed)
    h = np.sin(np.arange(1, H + 1)) if h is None else np.asarray(h, dtype=np.float64)
    vals = np.empty(trials)
    for start in range(0, trials, chunk):
        m = min(chunk, trials - start)
        E = sigma * rng.standard_normal((m, H))
        Y = h + E
        vals[start:start + m] = np.sum((Y - Y @ P.T) * E, axis=1) / H
    analytic = sigma**2 / H * float(np.trace(np.eye(H) - P))
    stderr = float(vals.std(ddof=1)) / math.sqrt(trials)
    return CrossTerm(float(vals.mean()), analytic, stderr)
