"""Clip-Laplace: a Laplace distribution truncated and renormalised to [-A, A].

For a center ``c`` in ``[-A, A]`` and scale ``lam`` the density is

    p(z) = exp(-|z - c| / lam) / (2 * lam * S),   -A <= z <= A

with ``S = 1 - exp((-A + c)/lam)/2 - exp((-A - c)/lam)/2``. All formulas here
are arranged so that every exponential has a nonpositive argument, and
``expm1``/``log1p`` absorb the cancellation that appears when ``lam >> A``
(small budgets give ``lam = 2C/eps`` up to a few hundred times ``C``).

The array kernels (``truncated_*``) broadcast over center/scale/bound and are
what the training pipeline uses. The ``clap_*`` functions are the validated
scalar-parameter API built on top of them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, UnsupportedConfigurationError

__all__ = [
    "ClipLaplaceParams",
    "clap_density",
    "clap_cdf",
    "clap_ppf",
    "clap_sample",
    "clap_mean",
    "clap_second_moment",
    "laplace_sample",
    "truncated_ppf",
    "truncated_sample",
    "truncated_mean",
    "truncated_second_moment",
]


@dataclass(frozen=True)
class ClipLaplaceParams:
    """Parameters of one Clip-Laplace distribution.

    ``center`` is the value being privatised, ``scale`` the Laplace scale,
    ``bound`` the truncation half-width and ``sensitivity`` the range width of
    admissible centers.
    """

    center: float
    scale: float
    bound: float
    sensitivity: float

    def __post_init__(self):
        for name in ("center", "scale", "bound", "sensitivity"):
            v = float(getattr(self, name))
            if not np.isfinite(v):
                raise ParameterError(f"{name} must be finite, got {v!r}")
            object.__setattr__(self, name, v)
        if self.scale <= 0:
            raise ParameterError(f"scale must be positive, got {self.scale}")
        if self.sensitivity <= 0:
            raise ParameterError(f"sensitivity must be positive, got {self.sensitivity}")
        half = self.sensitivity / 2
        # tiny slack so that bound = sensitivity/2 computed in floats is accepted
        if self.bound < half * (1 - 1e-12):
            raise ParameterError(
                f"bound {self.bound} must be at least sensitivity/2 = {half}")
        if abs(self.center) > half * (1 + 1e-12):
            raise ParameterError(
                f"center {self.center} outside [-{half}, {half}]")

    @classmethod
    def for_budget(cls, center: float, eps: float, clip: float) -> "ClipLaplaceParams":
        """The framework configuration: A = C, sensitivity 2C, scale 2C/eps."""
        if eps <= 0:
            raise ParameterError(f"budget must be positive, got {eps}")
        if clip <= 0:
            raise ParameterError(f"clip bound must be positive, got {clip}")
        return cls(center=center, scale=2 * clip / eps, bound=clip, sensitivity=2 * clip)

    @property
    def normalization(self) -> float:
        return float(_normalization(self.center, self.scale, self.bound))

    @property
    def epsilon(self) -> float:
        """Local budget implied by the scale: sensitivity / scale."""
        return self.sensitivity / self.scale


def _normalization(center, scale, bound):
    a_left = (-bound - center) / scale
    a_right = (-bound + center) / scale
    return -0.5 * (np.expm1(a_left) + np.expm1(a_right))


# --------------------------------------------------------------------------
# array kernels

def truncated_density(z, center, scale, bound):
    z, center, scale, bound = np.broadcast_arrays(*map(np.asarray, (z, center, scale, bound)))
    s = _normalization(center, scale, bound)
    dens = np.exp(-np.abs(z - center) / scale) / (2 * scale * s)
    return np.where(np.abs(z) <= bound, dens, 0.0)


def truncated_cdf(z, center, scale, bound):
    z, center, scale, bound = np.broadcast_arrays(*map(np.asarray, (z, center, scale, bound)))
    zc = np.clip(z, -bound, bound)
    a = (-bound - center) / scale
    s = _normalization(center, scale, bound)
    left = 0.5 * (np.exp(np.minimum(zc - center, 0) / scale) - np.exp(a))
    # mass(-A, c) + mass(c, z) = -expm1(a)/2 - expm1(-(z-c)/lam)/2
    right = -0.5 * (np.expm1(a) + np.expm1(-np.maximum(zc - center, 0) / scale))
    out = np.where(zc <= center, left, right) / s
    return np.clip(out, 0.0, 1.0)


def truncated_ppf(u, center, scale, bound):
    """Inverse CDF, exact and piecewise analytic."""
    u, center, scale, bound = np.broadcast_arrays(*map(np.asarray, (u, center, scale, bound)))
    a = (-bound - center) / scale
    em1 = np.expm1(a)
    s = _normalization(center, scale, bound)
    mass = u * s
    mass_left = -0.5 * em1
    with np.errstate(divide="ignore", invalid="ignore"):
        z_left = center + scale * np.log1p(2 * mass + em1)
        z_right = center - scale * np.log1p(-em1 - 2 * mass)
    z = np.where(mass <= mass_left, z_left, z_right)
    return np.clip(z, -bound, bound)


def truncated_sample(center, scale, bound, rng: np.random.Generator, size=None):
    if size is None:
        size = np.broadcast(np.asarray(center), np.asarray(scale), np.asarray(bound)).shape
    u = rng.random(size)
    return truncated_ppf(u, center, scale, bound)


def truncated_mean(center, scale, clip):
    """E[Z] for A = C, vectorised.

    Closed form ((C + lam)(e1 - e2) + 2c) / (2 - e1 - e2) with
    e1 = exp((-C - c)/lam), e2 = exp((-C + c)/lam).
    """
    center, scale, clip = np.broadcast_arrays(*map(np.asarray, (center, scale, clip)))
    a1 = (-clip - center) / scale
    a2 = (-clip + center) / scale
    em1, em2 = np.expm1(a1), np.expm1(a2)
    return ((clip + scale) * (em1 - em2) + 2 * center) / (-em1 - em2)


def truncated_second_moment(center, scale, clip):
    """E[(Z - c)^2] for A = C, vectorised.

    2 lam^2 + [(lam^2 - (c + C + lam)^2) e1 + (lam^2 - (-c + C + lam)^2) e2] / (2S)
    """
    center, scale, clip = np.broadcast_arrays(*map(np.asarray, (center, scale, clip)))
    a1 = (-clip - center) / scale
    a2 = (-clip + center) / scale
    s = _normalization(center, scale, clip)
    t1 = (scale**2 - (center + clip + scale) ** 2) * np.exp(a1)
    t2 = (scale**2 - (-center + clip + scale) ** 2) * np.exp(a2)
    return 2 * scale**2 + (t1 + t2) / (2 * s)


# --------------------------------------------------------------------------
# validated API

def clap_density(params: ClipLaplaceParams, z):
    out = truncated_density(z, params.center, params.scale, params.bound)
    return float(out) if np.ndim(out) == 0 else out


def clap_cdf(params: ClipLaplaceParams, z):
    out = truncated_cdf(z, params.center, params.scale, params.bound)
    return float(out) if np.ndim(out) == 0 else out


def clap_ppf(params: ClipLaplaceParams, u):
    u = np.asarray(u, dtype=float)
    if np.any((u < 0) | (u > 1)):
        raise ParameterError("quantile levels must lie in [0, 1]")
    out = truncated_ppf(u, params.center, params.scale, params.bound)
    return float(out) if np.ndim(out) == 0 else out


def clap_sample(params: ClipLaplaceParams, rng: np.random.Generator, size=None):
    """Draw by inverse-CDF transform of one uniform per sample."""
    u = rng.random(size)
    out = truncated_ppf(u, params.center, params.scale, params.bound)
    return float(out) if size is None else out


def _require_a_equals_c(params: ClipLaplaceParams) -> None:
    if not np.isclose(params.bound, params.sensitivity / 2, rtol=1e-12, atol=0):
        raise UnsupportedConfigurationError(
            "closed-form moments are only available for bound == sensitivity/2 "
            f"(got bound={params.bound}, sensitivity={params.sensitivity})")


def clap_mean(params: ClipLaplaceParams) -> float:
    _require_a_equals_c(params)
    return float(truncated_mean(params.center, params.scale, params.bound))


def clap_second_moment(params: ClipLaplaceParams) -> float:
    """Second moment about the center, E[(Z - center)^2]."""
    _require_a_equals_c(params)
    return float(truncated_second_moment(params.center, params.scale, params.bound))


def laplace_sample(center, scale, rng: np.random.Generator, size=None):
    """Classic (untruncated) Laplace draw used by the baseline frameworks."""
    if np.any(np.asarray(scale) <= 0):
        raise ParameterError("Laplace scale must be positive")
    out = rng.laplace(center, scale, size)
    return float(out) if np.ndim(out) == 0 else out
