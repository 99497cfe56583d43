"""Personalised local budget vectors drawn from named distributions."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

__all__ = ["BudgetSpec", "PRESETS", "preset", "sample_budgets"]

_KINDS = ("uniform", "gaussian", "gaussian-mixture")


@dataclass(frozen=True)
class BudgetSpec:
    """Distribution of per-dimension budgets plus the clip range.

    ``params`` by kind:

    * uniform: ``{"low": a, "high": b}``
    * gaussian: ``{"mean": m, "std": s}``
    * gaussian-mixture: ``{"means": [...], "stds": [...], "weights": [...]}``

    The second parameter of N(m, 1) in the presets is read as a standard
    deviation (it equals the variance at 1 anyway).
    """

    kind: str
    params: dict = field(default_factory=dict)
    clip_low: float = 0.05
    clip_high: float = 1.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ParameterError(f"unknown budget distribution {self.kind!r}; expected one of {_KINDS}")
        if not 0 < self.clip_low < self.clip_high:
            raise ParameterError(
                f"need 0 < clip_low < clip_high, got [{self.clip_low}, {self.clip_high}]")
        p = self.params
        try:
            if self.kind == "uniform":
                if p["low"] > p["high"]:
                    raise ParameterError("uniform low must not exceed high")
            elif self.kind == "gaussian":
                if p["std"] < 0:
                    raise ParameterError("gaussian std must be nonnegative")
            else:
                means, stds, w = (np.asarray(p[k], dtype=float) for k in ("means", "stds", "weights"))
                if not (means.shape == stds.shape == w.shape) or means.size == 0:
                    raise ParameterError("mixture means/stds/weights must have equal nonzero length")
                if np.any(w < 0) or not np.isclose(w.sum(), 1.0):
                    raise ParameterError("mixture weights must be nonnegative and sum to 1")
                if np.any(stds < 0):
                    raise ParameterError("mixture stds must be nonnegative")
        except KeyError as exc:
            raise ParameterError(f"{self.kind} spec is missing parameter {exc}") from None


def _uniform(lo, hi, clip_hi):
    return BudgetSpec("uniform", {"low": lo, "high": hi}, 0.05, clip_hi)


def _gauss(mean, clip_hi):
    return BudgetSpec("gaussian", {"mean": mean, "std": 1.0}, 0.05, clip_hi)


def _mix(m1, m2, clip_hi):
    return BudgetSpec("gaussian-mixture",
                      {"means": (m1, m2), "stds": (1.0, 1.0), "weights": (0.9, 0.1)},
                      0.05, clip_hi)


PRESETS: dict[str, BudgetSpec] = {
    "Uniform1": _uniform(0.05, 0.5, 0.5),
    "Uniform2": _uniform(0.05, 1.0, 1.0),
    "Uniform3": _uniform(0.05, 3.0, 3.0),
    "Gauss1": _gauss(0.1, 0.5),
    "Gauss2": _gauss(0.2, 1.0),
    "Gauss3": _gauss(0.5, 3.0),
    "MixGauss1": _mix(0.1, 0.5, 0.5),
    "MixGauss2": _mix(0.2, 1.0, 1.0),
    "MixGauss3": _mix(0.5, 3.0, 3.0),
}


def preset(name: str) -> BudgetSpec:
    for key, spec in PRESETS.items():
        if key.lower() == name.lower():
            return spec
    raise ParameterError(f"unknown budget preset {name!r}; known: {', '.join(PRESETS)}")


def sample_budgets(spec: BudgetSpec | str, n: int, seed=None) -> np.ndarray:
    """Draw ``n`` budgets and clamp them into the spec's clip range."""
    if isinstance(spec, str):
        spec = preset(spec)
    if int(n) != n or n < 2:
        raise ParameterError(f"need n >= 2 users, got {n}")
    n = int(n)
    rng = np.random.default_rng(seed)
    p = spec.params
    if spec.kind == "uniform":
        raw = rng.uniform(p["low"], p["high"], n)
    elif spec.kind == "gaussian":
        raw = rng.normal(p["mean"], p["std"], n)
    else:
        weights = np.asarray(p["weights"], dtype=float)
        comp = rng.choice(weights.size, size=n, p=weights / weights.sum())
        raw = rng.normal(np.asarray(p["means"], float)[comp], np.asarray(p["stds"], float)[comp])
    return np.clip(raw, spec.clip_low, spec.clip_high)
