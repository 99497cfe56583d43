"""Data path between local training and the optimiser.

clip -> perturb (per dimension) -> [post-sparsify] -> shuffle -> aggregate -> calibrate
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .accountant import check_budgets
from .clip_laplace import truncated_mean, truncated_ppf
from .errors import ParameterError, StateError

__all__ = [
    "GradientBatch",
    "clip_gradient",
    "perturb_gradient",
    "perturb_rows",
    "laplace_rows",
    "shuffle_batch",
    "sparsify_post",
    "aggregate",
    "expected_aggregate",
    "calibrate",
]


@dataclass(frozen=True)
class GradientBatch:
    """n x d perturbed gradients (one row per user) and their budgets."""

    values: np.ndarray
    budgets: np.ndarray
    clip_bound: float
    shuffled: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        budgets = np.asarray(self.budgets, dtype=float)
        if values.ndim != 2:
            raise ParameterError("values must be an n x d matrix")
        if budgets.shape != (values.shape[0],):
            raise ParameterError(
                f"budgets length {budgets.shape} does not match {values.shape[0]} rows")
        if self.clip_bound <= 0:
            raise ParameterError("clip_bound must be positive")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "budgets", budgets)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


def _check_clip(C: float) -> float:
    C = float(C)
    if not C > 0:
        raise ParameterError(f"clip bound must be positive, got {C}")
    return C


def clip_gradient(g, C: float) -> np.ndarray:
    return np.clip(np.asarray(g, dtype=float), -C, C)


def perturb_gradient(g, eps: float, C: float, rng: np.random.Generator) -> np.ndarray:
    """Clip-Laplace perturbation CLap(g_k, 2C/eps, C) of every coordinate."""
    C = _check_clip(C)
    if not eps > 0:
        raise ParameterError(f"budget must be positive, got {eps}")
    g = np.asarray(g, dtype=float)
    if np.any(np.abs(g) > C):
        raise ParameterError("gradient must be clipped into [-C, C] before perturbation")
    return truncated_ppf(rng.random(g.shape), g, 2 * C / eps, C)


def perturb_rows(G, budgets, C: float, rngs) -> np.ndarray:
    """Perturb row i of G with budget i, drawing uniforms from ``rngs[i]``."""
    G = np.asarray(G, dtype=float)
    budgets = np.asarray(budgets, dtype=float)
    C = _check_clip(C)
    if np.any(np.abs(G) > C):
        raise ParameterError("gradients must be clipped into [-C, C] before perturbation")
    u = np.stack([rng.random(G.shape[1]) for rng in rngs])
    return truncated_ppf(u, G, (2 * C / budgets)[:, None], C)


def laplace_rows(G, budgets, C: float, rngs) -> np.ndarray:
    """Classic Laplace perturbation with per-row scale 2C/eps_i (baselines)."""
    G = np.asarray(G, dtype=float)
    scale = 2 * _check_clip(C) / np.asarray(budgets, dtype=float)
    noise = np.stack([rng.laplace(0.0, s, G.shape[1]) for rng, s in zip(rngs, scale)])
    return G + noise


def shuffle_batch(batch: GradientBatch, rng: np.random.Generator) -> GradientBatch:
    """Permute each column independently, and the budgets separately.

    Column position k is kept, so the analyser still knows which dimension
    every value belongs to but not which user sent it.
    """
    if batch.shuffled:
        raise StateError("batch has already been shuffled")
    values = rng.permuted(batch.values, axis=0)
    budgets = rng.permutation(batch.budgets)
    return replace(batch, values=values, budgets=budgets, shuffled=True)


def sparsify_post(g_perturbed, b: int, eps: float, C: float,
                  rng: np.random.Generator) -> np.ndarray:
    """Keep the b largest |values| of an already perturbed vector.

    The other d - b coordinates are replaced by fresh perturbed zeros, so
    every user still contributes d values to the shuffle. Ties on |value|
    go to the lower index.
    """
    g = np.asarray(g_perturbed, dtype=float)
    d = g.shape[-1]
    if int(b) != b or not 1 <= b <= d:
        raise ParameterError(f"b must be an integer in [1, {d}], got {b}")
    if b == d:
        return g.copy()
    C = _check_clip(C)
    keep = np.argsort(-np.abs(g), kind="stable")[: int(b)]
    mask = np.zeros(d, dtype=bool)
    mask[keep] = True
    out = g.copy()
    pad = ~mask
    out[pad] = truncated_ppf(rng.random(int(pad.sum())), 0.0, 2 * C / eps, C)
    return out


def aggregate(batch: GradientBatch) -> np.ndarray:
    """Per-dimension mean.

    Each column is sorted before summation, so the result does not depend on
    row order at all: shuffled and unshuffled batches agree bit for bit.
    """
    if batch.n == 0:
        raise ParameterError("cannot aggregate an empty batch")
    return np.sort(batch.values, axis=0).sum(axis=0) / batch.n


def expected_aggregate(g_bar, budgets, C: float) -> np.ndarray:
    """F(g) = mean_i E[CLap(g, 2C/eps_i, C)], elementwise in g."""
    eps = check_budgets(budgets)
    C = _check_clip(C)
    values, counts = np.unique(eps, return_counts=True)
    g = np.asarray(g_bar, dtype=float)
    means = truncated_mean(g[..., None], 2 * C / values, C)
    return means @ counts / eps.size


def calibrate(g_mean, budgets, C: float, tol: float = 1e-10,
              max_iter: int = 200) -> np.ndarray:
    """Invert ``expected_aggregate`` per dimension by bisection on [-C, C].

    F is strictly increasing, so bisection always converges; targets outside
    F's range are clamped to +-C.
    """
    eps = check_budgets(budgets)
    C = _check_clip(C)
    target = np.asarray(g_mean, dtype=float)
    shape = target.shape
    target = target.ravel()
    values, counts = np.unique(eps, return_counts=True)
    weights = counts / eps.size
    scales = 2 * C / values

    def F(x):
        return truncated_mean(x[:, None], scales, C) @ weights

    lo = np.full(target.shape, -C)
    hi = np.full(target.shape, C)
    f_hi = F(hi)
    f_lo = F(lo)
    for _ in range(max_iter):
        if np.all(hi - lo <= tol):
            break
        mid = 0.5 * (lo + hi)
        below = F(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    out = 0.5 * (lo + hi)
    out = np.where(target >= f_hi, C, out)
    out = np.where(target <= f_lo, -C, out)
    # F is odd, so an exact zero target maps to an exact zero
    out = np.where(target == 0, 0.0, out)
    return float(out[0]) if shape == () else out.reshape(shape)
