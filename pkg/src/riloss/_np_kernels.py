"""Pure-numpy implementations of the hot loops.

Every function here has a twin with the same signature in ``_nb_kernels``.
Inputs are C-contiguous float64; ``inv`` is the Gaussian exponent factor
1/(c*h^2), so k(u, v) = exp(-inv * |u - v|^2).
"""
from __future__ import annotations

import numpy as np


def sq_dists(X: np.ndarray) -> np.ndarray:
    n, d = X.shape
    D = np.zeros((n, n))
    # per-coordinate accumulation keeps D exactly symmetric
    for k in range(d):
        diff = X[:, k, None] - X[None, :, k]
        D += diff * diff
    return D


def gaussian_gram(X: np.ndarray, inv: float) -> np.ndarray:
    return np.exp(-inv * sq_dists(X))


def center(K: np.ndarray) -> np.ndarray:
    rows = K.mean(axis=1)
    cols = K.mean(axis=0)
    return K - rows[:, None] - cols[None, :] + rows.mean()


def plugin_hsic(X: np.ndarray, Y: np.ndarray, inv_r: float, inv_s: float) -> float:
    n = X.shape[0]
    Kc = center(gaussian_gram(X, inv_r))
    Lc = center(gaussian_gram(Y, inv_s))
    return float(np.sum(Kc * Lc)) / (n - 1) ** 2


def plugin_hsic_grad(X: np.ndarray, Y: np.ndarray, inv_r: float, inv_s: float):
    n = X.shape[0]
    K = gaussian_gram(X, inv_r)
    Lc = center(gaussian_gram(Y, inv_s))
    value = float(np.sum(center(K) * Lc)) / (n - 1) ** 2
    M = K * Lc
    coef = -4.0 * inv_r / (n - 1) ** 2
    grad = coef * (M.sum(axis=1)[:, None] * X - M @ X)
    return value, grad


def _offdiag_shifted(K: np.ndarray) -> np.ndarray:
    # U-statistic is invariant to adding a constant off the diagonal; removing
    # the off-diagonal mean makes a constant kernel vanish exactly
    n = K.shape[0]
    Kz = K.copy()
    np.fill_diagonal(Kz, 0.0)
    m = Kz.sum() / (n * (n - 1))
    Kz -= m
    np.fill_diagonal(Kz, 0.0)
    return Kz


def ustat_hsic(X: np.ndarray, Y: np.ndarray, inv_r: float, inv_s: float) -> float:
    n = X.shape[0]
    K = _offdiag_shifted(gaussian_gram(X, inv_r))
    L = _offdiag_shifted(gaussian_gram(Y, inv_s))
    rk = K.sum(axis=1)
    rl = L.sum(axis=1)
    t1 = float(np.sum(K * L))
    t2 = float(rk.sum()) * float(rl.sum()) / ((n - 1) * (n - 2))
    t3 = 2.0 * float(rk @ rl) / (n - 2)
    return (t1 + t2 - t3) / (n * (n - 3))


def hoeffding(X: np.ndarray, inv: float):
    n = X.shape[0]
    K = gaussian_gram(X, inv)
    np.fill_diagonal(K, 0.0)
    rows = K.sum(axis=1)
    grand = float(rows.sum()) / (n * (n - 1))
    f1 = rows / (n - 1) - grand
    f2 = K - f1[:, None] - f1[None, :] - grand
    np.fill_diagonal(f2, 0.0)
    return f1, f2, grand


def rademacher_draws(f1: np.ndarray, f2: np.ndarray, signs: np.ndarray) -> np.ndarray:
    """Per-draw [r_sigma, w_sigma_sigma, w_sigma_alpha, w_sigma] for sign rows."""
    n = f1.shape[0]
    V = signs @ f2
    out = np.empty((signs.shape[0], 4))
    out[:, 0] = np.abs(signs @ f1) / n
    out[:, 1] = np.abs(np.sum(signs * V, axis=1)) / n**2
    out[:, 2] = np.sqrt(np.sum(V * V, axis=1)) / n**2
    out[:, 3] = np.max(np.abs(V), axis=1) / n
    return out


def moving_average(x: np.ndarray, k: int) -> np.ndarray:
    """Centred moving average along axis 1 of a (B, w, d) array, edge-replicated."""
    half = (k - 1) // 2
    if half == 0:
        return x.copy()
    padded = np.concatenate(
        [np.repeat(x[:, :1], half, axis=1), x, np.repeat(x[:, -1:], half, axis=1)], axis=1
    )
    win = np.lib.stride_tricks.sliding_window_view(padded, k, axis=1)
    return win.mean(axis=-1)
