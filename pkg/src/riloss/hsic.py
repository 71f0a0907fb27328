"""HSIC estimators: biased plug-in, unbiased U-statistic, brute-force oracle, gradient."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from . import _backend
from .kernels import KernelSpec, SampleError, as_samples


@dataclass(frozen=True)
class HsicConfig:
    estimator: Literal["plugin", "ustat"] = "plugin"
    kernel_r: KernelSpec = field(default_factory=KernelSpec)
    kernel_s: KernelSpec = field(default_factory=KernelSpec)

    def __post_init__(self):
        if self.estimator not in ("plugin", "ustat"):
            raise ValueError(f"unknown estimator {self.estimator!r}")


@dataclass(frozen=True)
class HsicEstimate:
    value: float
    n: int
    estimator: str

    def __float__(self):
        return self.value


def _pair(r, s, min_n: int, what: str):
    R = as_samples(r)
    S = as_samples(s)
    if R.shape[0] != S.shape[0]:
        raise SampleError(f"sample counts differ: {R.shape[0]} vs {S.shape[0]}")
    if R.shape[0] < min_n:
        raise SampleError(f"{what} needs n >= {min_n}, got {R.shape[0]}")
    return R, S


def tensor_samples(t: np.ndarray, axis: Literal["flatten", "window"] = "flatten") -> np.ndarray:
    """Turn a (B, H, d) tensor into HSIC samples.

    ``flatten`` gives B*H samples of dimension d (each time step is a sample);
    ``window`` gives B samples of dimension H*d. 1-D and 2-D inputs are read as
    (H,) and (H, d) single windows.
    """
    t = np.asarray(t, dtype=np.float64)
    if t.ndim == 1:
        t = t[None, :, None]
    elif t.ndim == 2:
        t = t[None]
    if t.ndim != 3:
        raise SampleError(f"expected (B, H, d) tensor, got shape {t.shape}")
    B, H, d = t.shape
    if axis == "flatten":
        return np.ascontiguousarray(t.reshape(B * H, d))
    if axis == "window":
        return np.ascontiguousarray(t.reshape(B, H * d))
    raise ValueError(f"unknown sample axis {axis!r}")


def hsic_plugin(r, s, cfg: HsicConfig | None = None) -> HsicEstimate:
    """trace(K~ L~)/(n-1)^2 with doubly centred Gram matrices; always >= 0."""
    cfg = cfg or HsicConfig()
    R, S = _pair(r, s, 2, "hsic_plugin")
    v = _backend.ops().plugin_hsic(R, S, cfg.kernel_r.inv, cfg.kernel_s.inv)
    # trace of a product of PSD matrices; clamp rounding-level negatives
    return HsicEstimate(value=max(v, 0.0), n=R.shape[0], estimator="plugin")


def hsic_ustat(r, s, cfg: HsicConfig | None = None) -> HsicEstimate:
    """Unbiased HSIC in O(n^2).

    Equals the average over distinct index tuples of
    k_ij l_ij + k_ij l_qr - 2 k_ij l_iq, whose expectation is the population
    HSIC. May be slightly negative.
    """
    cfg = cfg or HsicConfig()
    R, S = _pair(r, s, 4, "U-statistic HSIC (four distinct indices)")
    v = _backend.ops().ustat_hsic(R, S, cfg.kernel_r.inv, cfg.kernel_s.inv)
    return HsicEstimate(value=v, n=R.shape[0], estimator="ustat")


def hsic(r, s, cfg: HsicConfig | None = None) -> HsicEstimate:
    cfg = cfg or HsicConfig()
    return hsic_plugin(r, s, cfg) if cfg.estimator == "plugin" else hsic_ustat(r, s, cfg)


def hsic_oracle(r, s, cfg: HsicConfig | None = None) -> float:
    """Literal enumeration over ordered distinct pairs, triples and quadruples.

    Test oracle only; restricted to 4 <= n <= 10.
    """
    cfg = cfg or HsicConfig()
    R = as_samples(r)
    S = as_samples(s)
    n = R.shape[0]
    if S.shape[0] != n:
        raise SampleError(f"sample counts differ: {n} vs {S.shape[0]}")
    if not 4 <= n <= 10:
        raise SampleError(f"hsic_oracle supports 4 <= n <= 10, got {n}")

    def k(i, j):
        d = R[i] - R[j]
        return np.exp(-cfg.kernel_r.inv * float(d @ d))

    def l(i, j):
        d = S[i] - S[j]
        return np.exp(-cfg.kernel_s.inv * float(d @ d))

    idx = range(n)
    pairs = list(itertools.permutations(idx, 2))
    triples = list(itertools.permutations(idx, 3))
    quads = list(itertools.permutations(idx, 4))
    t1 = sum(k(i, j) * l(i, j) for i, j in pairs) / len(pairs)
    t2 = sum(k(i, j) * l(q, p) for i, j, q, p in quads) / len(quads)
    t3 = sum(k(i, j) * l(i, q) for i, j, q in triples) / len(triples)
    return t1 + t2 - 2.0 * t3


def hsic_gradient(r, s, cfg: HsicConfig | None = None) -> np.ndarray:
    """d hsic_plugin / d r_i, shape (n, d). The noise side s is held fixed."""
    return hsic_plugin_and_grad(r, s, cfg)[1]


def hsic_plugin_and_grad(r, s, cfg: HsicConfig | None = None) -> tuple[HsicEstimate, np.ndarray]:
    cfg = cfg or HsicConfig()
    if cfg.estimator != "plugin":
        raise ValueError("gradients are only provided for the plug-in estimator")
    R, S = _pair(r, s, 2, "hsic_gradient")
    v, g = _backend.ops().plugin_hsic_grad(R, S, cfg.kernel_r.inv, cfg.kernel_s.inv)
    # trace of a product of PSD matrices; clamp rounding-level negatives
    return HsicEstimate(value=max(v, 0.0), n=R.shape[0], estimator="plugin"), g
