"""Gaussian kernels, Gram matrices, centering and empirical Hoeffding parts."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from . import _backend


class SampleError(ValueError):
    """Malformed sample set: empty, ragged, or mismatched dimensions."""


@dataclass(frozen=True)
class KernelSpec:
    """Gaussian kernel with length scale ``bandwidth``.

    ``scale_convention="half"`` gives exp(-|u-v|^2 / (2 h^2)); ``"unit"`` gives
    exp(-|u-v|^2 / h^2), the form used for the noise-ratio trade-off curve.
    """

    family: Literal["gaussian"] = "gaussian"
    bandwidth: float = 1.0
    scale_convention: Literal["half", "unit"] = "half"

    def __post_init__(self):
        if self.family != "gaussian":
            raise ValueError(f"unsupported kernel family {self.family!r}")
        if not (self.bandwidth > 0 and math.isfinite(self.bandwidth)):
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        if self.scale_convention not in ("half", "unit"):
            raise ValueError(f"unknown scale convention {self.scale_convention!r}")

    @property
    def inv(self) -> float:
        c = 2.0 if self.scale_convention == "half" else 1.0
        return 1.0 / (c * self.bandwidth**2)


@dataclass(frozen=True)
class HoeffdingComponents:
    f1: np.ndarray
    f2: np.ndarray
    grand_mean: float


def as_samples(samples) -> np.ndarray:
    """Coerce a list of vectors (or scalars) to a float64 (n, d) array."""
    if isinstance(samples, np.ndarray):
        X = samples
    else:
        try:
            X = np.asarray(samples, dtype=np.float64)
        except ValueError as exc:
            raise SampleError(f"samples have inconsistent dimensions: {exc}") from None
    if X.dtype == object:
        raise SampleError("samples have inconsistent dimensions")
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise SampleError(f"expected a list of vectors, got array of shape {X.shape}")
    if X.shape[0] == 0:
        raise SampleError("empty sample set")
    return np.ascontiguousarray(X, dtype=np.float64)


def kernel_eval(u, v, spec: KernelSpec) -> float:
    u = np.atleast_1d(np.asarray(u, dtype=np.float64))
    v = np.atleast_1d(np.asarray(v, dtype=np.float64))
    if u.shape != v.shape or u.ndim != 1:
        raise SampleError(f"dimension mismatch: {u.shape} vs {v.shape}")
    diff = u - v
    return math.exp(-spec.inv * float(diff @ diff))


def gram(samples, spec: KernelSpec) -> np.ndarray:
    X = as_samples(samples)
    return _backend.ops().gaussian_gram(X, spec.inv)


def center(g: np.ndarray) -> np.ndarray:
    """Double-centre a Gram matrix: H K H with H = I - 11'/n."""
    K = np.ascontiguousarray(g, dtype=np.float64)
    if K.ndim != 2 or K.shape[0] != K.shape[1] or K.shape[0] < 1:
        raise SampleError(f"expected a square matrix, got shape {K.shape}")
    return _backend.ops().center(K)


def hoeffding_components(samples, spec: KernelSpec) -> HoeffdingComponents:
    """Leave-one-out plug-in for the first-order projection and degenerate remainder.

    f2 has a zero diagonal; for i != j, f2 + f1[i] + f1[j] + grand_mean
    reconstructs k(x_i, x_j). Off-diagonal row sums of f2 equal f1 exactly,
    so the empirical conditional mean of f2 is f1[i]/(n-1) = O(1/n).
    """
    X = as_samples(samples)
    if X.shape[0] < 2:
        raise SampleError("hoeffding_components needs at least 2 samples")
    f1, f2, grand = _backend.ops().hoeffding(X, spec.inv)
    return HoeffdingComponents(f1=f1, f2=f2, grand_mean=grand)
