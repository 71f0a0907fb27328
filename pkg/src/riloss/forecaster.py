"""DLinear-style forecaster: moving-average decomposition plus two shared linear maps.

Each channel is forecast independently with the same (H, w) trend and
seasonal weights. Gradients are analytic; the optimiser is Adam.
"""
from __future__ import annotations

import logging
import struct
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Literal

import numpy as np

from . import _backend
from .loss import RiLossConfig, evaluate, sample_noise

log = logging.getLogger(__name__)

PARAM_NAMES = ("weights_trend", "bias_trend", "weights_seasonal", "bias_seasonal")


@dataclass(frozen=True)
class DecompositionSpec:
    kernel_size: int = 25

    def __post_init__(self):
        k = self.kernel_size
        if not isinstance(k, (int, np.integer)) or k < 1 or k % 2 == 0:
            raise ValueError(f"kernel_size must be an odd positive integer, got {k}")


@dataclass
class LinearForecaster:
    w: int
    H: int
    d: int
    weights_trend: np.ndarray
    bias_trend: np.ndarray
    weights_seasonal: np.ndarray
    bias_seasonal: np.ndarray
    decomposition: DecompositionSpec = field(default_factory=DecompositionSpec)
    channel_independent: bool = True

    @classmethod
    def init(cls, w: int, H: int, d: int, kernel_size: int = 25) -> "LinearForecaster":
        """Averaging initialisation: every output starts as the input mean."""
        return cls(
            w=w, H=H, d=d,
            weights_trend=np.full((H, w), 1.0 / w),
            bias_trend=np.zeros(H),
            weights_seasonal=np.full((H, w), 1.0 / w),
            bias_seasonal=np.zeros(H),
            decomposition=DecompositionSpec(kernel_size),
        )

    def params(self) -> dict[str, np.ndarray]:
        return {k: getattr(self, k) for k in PARAM_NAMES}

    def with_params(self, params: dict[str, np.ndarray]) -> "LinearForecaster":
        return replace(self, **{k: np.array(params[k], dtype=np.float64) for k in PARAM_NAMES})

    def copy(self) -> "LinearForecaster":
        return self.with_params(self.params())


def decompose(x: np.ndarray, spec: DecompositionSpec) -> tuple[np.ndarray, np.ndarray]:
    """Split (w, d) or (B, w, d) input into moving-average trend and remainder."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 2
    xb = x[None] if single else x
    if xb.ndim != 3 or xb.shape[1] < 1:
        raise ValueError(f"expected (w, d) or (B, w, d) input, got shape {x.shape}")
    trend = _backend.ops().moving_average(np.ascontiguousarray(xb), int(spec.kernel_size))
    seasonal = xb - trend
    return (trend[0], seasonal[0]) if single else (trend, seasonal)


def _batched(model: LinearForecaster, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 2
    xb = x[None] if single else x
    if xb.ndim != 3 or xb.shape[1:] != (model.w, model.d):
        raise ValueError(f"input shape {x.shape} does not match model (w={model.w}, d={model.d})")
    return xb, single


def forward(model: LinearForecaster, x) -> np.ndarray:
    xb, single = _batched(model, x)
    trend, seasonal = decompose(xb, model.decomposition)
    out = (np.matmul(model.weights_trend, trend) + model.bias_trend[:, None]
           + np.matmul(model.weights_seasonal, seasonal) + model.bias_seasonal[:, None])
    return out[0] if single else out


def backward(model: LinearForecaster, x, grad_out) -> dict[str, np.ndarray]:
    """Parameter gradients given the upstream gradient d loss / d prediction."""
    xb, single = _batched(model, x)
    g = np.asarray(grad_out, dtype=np.float64)
    g = g[None] if single else g
    if g.shape != (xb.shape[0], model.H, model.d):
        raise ValueError(f"grad_out shape {np.shape(grad_out)} does not match output")
    trend, seasonal = decompose(xb, model.decomposition)
    gb = g.sum(axis=(0, 2))
    return {
        "weights_trend": np.einsum("bhd,bwd->hw", g, trend),
        "bias_trend": gb,
        "weights_seasonal": np.einsum("bhd,bwd->hw", g, seasonal),
        "bias_seasonal": gb.copy(),
    }


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.005
    epochs: int = 10
    batch_size: int = 32
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    loss_kind: Literal["mse", "mae", "ri", "pearson_mse"] = "mse"
    patience: int | None = None

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise ValueError("Adam betas must lie in (0, 1)")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if self.loss_kind not in ("mse", "mae", "ri", "pearson_mse"):
            raise ValueError(f"unknown loss kind {self.loss_kind!r}")


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]

    @classmethod
    def zeros_like(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls({k: np.zeros_like(p) for k, p in params.items()},
                   {k: np.zeros_like(p) for k, p in params.items()})


def adam_step(params, grads, state: AdamState, cfg: TrainConfig, step: int):
    """One bias-corrected Adam update. Returns new (params, state); inputs untouched."""
    if step < 1:
        raise ValueError("step counts from 1")
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    bc1 = 1.0 - b1**step
    bc2 = 1.0 - b2**step
    new_p, new_m, new_v = {}, {}, {}
    for k, p in params.items():
        g = grads[k]
        m = b1 * state.m[k] + (1.0 - b1) * g
        v = b2 * state.v[k] + (1.0 - b2) * (g * g)
        new_p[k] = p - cfg.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + cfg.adam_eps)
        new_m[k] = m
        new_v[k] = v
    return new_p, AdamState(new_m, new_v)


@dataclass
class TrainResult:
    model: LinearForecaster
    history: list[dict]
    best_epoch: int
    ms_per_iter: float


def _loss_on(model, X, Y, kind, loss_cfg, rng, batch_size):
    total, count = 0.0, 0
    for s in range(0, len(X), batch_size):
        xb, yb = X[s:s + batch_size], Y[s:s + batch_size]
        pred = forward(model, xb)
        eps = sample_noise(yb.shape, rng) if kind in ("ri", "pearson_mse") else None
        total += evaluate(kind, yb, pred, eps, loss_cfg).total * len(xb)
        count += len(xb)
    return total / count


def train(model: LinearForecaster, train_data, loss_cfg: RiLossConfig | None,
          cfg: TrainConfig, val_data=None) -> TrainResult:
    """Mini-batch training with per-batch noise; keeps the best-validation snapshot.

    ``train_data`` and ``val_data`` are objects with ``X`` (N, w, d) and ``Y``
    (N, H, d) arrays. Without validation data the training loss selects the
    snapshot. Validation noise comes from a fixed stream so every epoch is
    scored against the same draws.
    """
    X, Y = np.asarray(train_data.X), np.asarray(train_data.Y)
    if len(X) == 0:
        raise ValueError("empty training set")
    loss_cfg = loss_cfg or RiLossConfig()
    kind = cfg.loss_kind
    rng = np.random.default_rng(cfg.seed)
    noise_rng = np.random.default_rng([cfg.seed, 1])
    params = model.params()
    state = AdamState.zeros_like(params)
    best = model.copy()
    best_score, best_epoch = np.inf, 0
    history: list[dict] = []
    step = 0
    compute_s = 0.0
    stale = 0
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(X))
        tot, mse_tot, h_tot, nb = 0.0, 0.0, 0.0, 0
        for s in range(0, len(X), cfg.batch_size):
            t0 = time.perf_counter()
            idx = order[s:s + cfg.batch_size]
            xb, yb = X[idx], Y[idx]
            current = model.with_params(params)
            pred = forward(current, xb)
            eps = sample_noise(yb.shape, noise_rng) if kind in ("ri", "pearson_mse") else None
            rep = evaluate(kind, yb, pred, eps, loss_cfg)
            grads = backward(current, xb, rep.grad)
            step += 1
            params, state = adam_step(params, grads, state, cfg, step)
            compute_s += time.perf_counter() - t0
            tot += rep.total
            mse_tot += rep.mse_component
            h_tot += rep.hsic_value
            nb += 1
        model = model.with_params(params)
        if val_data is not None and len(val_data.X):
            val_rng = np.random.default_rng([cfg.seed, 2])
            val = _loss_on(model, np.asarray(val_data.X), np.asarray(val_data.Y), kind, loss_cfg,
                           val_rng, cfg.batch_size)
        else:
            val = tot / nb
        history.append({"epoch": epoch, "train_loss": tot / nb, "train_mse": mse_tot / nb,
                        "hsic_value": h_tot / nb, "val_loss": val})
        log.debug("epoch %d train %.6f val %.6f", epoch, tot / nb, val)
        if val < best_score:
            best_score, best_epoch, best = val, epoch, model.copy()
            stale = 0
        else:
            stale += 1
            if cfg.patience is not None and stale >= cfg.patience:
                break
    ms = 1000.0 * compute_s / step if step else 0.0
    return TrainResult(model=best, history=history, best_epoch=best_epoch, ms_per_iter=ms)


# Checkpoint layout (little-endian):
#   8 bytes  magic b"RILOSSCK"
#   uint32   format version (1)
#   4 x int64  w, H, d, kernel_size
#   float64  weights_trend (H*w, row-major), bias_trend (H),
#            weights_seasonal (H*w, row-major), bias_seasonal (H)
_MAGIC = b"RILOSSCK"
_VERSION = 1
_HEADER = struct.Struct("<8sI4q")


def save_checkpoint(model: LinearForecaster, path) -> None:
    buf = [_HEADER.pack(_MAGIC, _VERSION, model.w, model.H, model.d,
                        model.decomposition.kernel_size)]
    for k in PARAM_NAMES:
        buf.append(np.ascontiguousarray(getattr(model, k), dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(buf))


def load_checkpoint(path) -> LinearForecaster:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated checkpoint header")
    magic, version, w, H, d, ks = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ValueError(f"{path}: not a forecaster checkpoint")
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if body.size != 2 * (H * w + H):
        raise ValueError(f"{path}: expected {2 * (H * w + H)} parameters, found {body.size}")
    a, b, c = H * w, H * w + H, 2 * H * w + H
    return LinearForecaster(
        w=w, H=H, d=d,
        weights_trend=body[:a].reshape(H, w).copy(), bias_trend=body[a:b].copy(),
        weights_seasonal=body[b:c].reshape(H, w).copy(), bias_seasonal=body[c:].copy(),
        decomposition=DecompositionSpec(ks),
    )
