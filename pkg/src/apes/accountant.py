"""Privacy accounting for shuffled, personalised local budgets.

Central bounds are per dimension and per epoch. ``eon_central_bound`` counts
how much of every other user's output can be read as an "echo" of the target
user's output (the echo probability ``p_ij``) and feeds the total echo mass
into a Feldman-McMillan-Talwar style amplification bound.
``fmt_max_baseline`` is the same bound with every user pessimistically set to
the largest budget.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientEchoMassError, ParameterError

__all__ = [
    "CentralBound",
    "UserLevelBound",
    "check_budgets",
    "echo_prob",
    "echo_mass",
    "echo_mass_threshold",
    "eon_central_bound",
    "fmt_max_baseline",
    "local_user_bound",
    "advanced_composition",
    "user_level_composition",
    "split_user_delta",
]

# rows of the pairwise echo matrix evaluated per block; bounds peak memory
_BLOCK = 512


@dataclass(frozen=True)
class CentralBound:
    eps_central: float
    delta_central: float
    delta_shuffle: float
    echo_mass: float
    method: str = "eon"


@dataclass(frozen=True)
class UserLevelBound:
    eps_user: float
    delta_user: float
    dims: int
    delta_prime: float


def check_budgets(budgets) -> np.ndarray:
    eps = np.asarray(budgets, dtype=float)
    if eps.ndim != 1:
        raise ParameterError("budgets must be a one-dimensional sequence")
    if eps.size < 2:
        raise ParameterError(f"need at least two users, got {eps.size}")
    if not np.all(np.isfinite(eps)) or np.any(eps <= 0):
        raise ParameterError("every local budget must be positive and finite")
    return eps


def _check_delta(delta: float, name: str) -> float:
    delta = float(delta)
    if not 0 < delta < 1:
        raise ParameterError(f"{name} must lie in (0, 1), got {delta}")
    return delta


def echo_prob(eps_i, eps_j):
    """Probability that user i's output doubles as an echo of user j's input.

    Tight A = C case: (e_i/e_j) * (1 - exp(-e_j)) / (1 - exp(-e_i)) * exp(-max(e_i, e_j)).
    Broadcasts over array arguments.
    """
    a = np.asarray(eps_i, dtype=float)
    b = np.asarray(eps_j, dtype=float)
    if np.any(a <= 0) or np.any(b <= 0):
        raise ParameterError("budgets must be positive")
    p = (a / b) * (np.expm1(-b) / np.expm1(-a)) * np.exp(-np.maximum(a, b))
    return float(p) if p.ndim == 0 else p


def _quantize(eps: np.ndarray, max_distinct: int | None):
    values, counts = np.unique(eps, return_counts=True)
    if max_distinct is None or values.size <= max_distinct:
        return values, counts
    grid = np.linspace(eps.min(), eps.max(), max_distinct)
    idx = np.clip(np.searchsorted(grid, eps), 0, max_distinct - 1)
    # snap each budget up to the next grid point
    return np.unique(grid[idx], return_counts=True)


def _row_sums(values: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """sum_j p(v_a, eps_j) for each distinct value v_a, counting multiplicity."""
    out = np.empty(values.size)
    for start in range(0, values.size, _BLOCK):
        block = values[start:start + _BLOCK]
        p = echo_prob(block[:, None], values[None, :])
        out[start:start + _BLOCK] = p @ counts
    return out


def echo_mass(budgets, max_distinct: int | None = 10_000) -> float:
    """T_sum = (1/n) * sum over i != target, all j of p_ij.

    The neighbouring pair may differ at any user, so the target row excluded
    from the sum is the one with the largest row sum (the smallest, hence
    most conservative, echo mass). Identical budgets are grouped, so the cost
    is O(k^2) in the number k of distinct values; if k exceeds
    ``max_distinct`` budgets are first snapped up to a uniform grid.
    """
    eps = check_budgets(budgets)
    n = eps.size
    values, counts = _quantize(eps, max_distinct)
    if values.size == 1:
        return float((n - 1) * math.exp(-values[0]))
    rows = _row_sums(values, counts)
    total = math.fsum(rows * counts)
    return float((total - rows.max()) / n)


def echo_mass_threshold(delta_shuffle: float) -> float:
    return 16.0 * math.log(4.0 / _check_delta(delta_shuffle, "delta_shuffle"))


def _amplified_eps(eps_star: float, mass: float, delta_shuffle: float) -> float:
    factor = math.tanh(eps_star / 2)  # (e^x - 1)/(e^x + 1)
    inner = 8 * math.sqrt(math.log(4 / delta_shuffle)) / math.sqrt(mass) + 8 / mass
    return math.log1p(factor * inner)


def eon_central_bound(budgets, delta_shuffle: float, eps_star: float | None = None,
                      max_distinct: int | None = 10_000) -> CentralBound:
    """Per-dimension central (eps, delta) of shuffled personalised Clip-Laplace.

    ``eps_star`` defaults to the largest budget (the released worst case);
    passing a smaller value gives the generalised bound for a known target
    budget and is meant for research use only.
    """
    eps = check_budgets(budgets)
    delta_shuffle = _check_delta(delta_shuffle, "delta_shuffle")
    mass = echo_mass(eps, max_distinct=max_distinct)
    threshold = echo_mass_threshold(delta_shuffle)
    if mass < threshold:
        raise InsufficientEchoMassError(mass, threshold)
    e_star = float(eps.max()) if eps_star is None else float(eps_star)
    if e_star <= 0:
        raise ParameterError("eps_star must be positive")
    return CentralBound(
        eps_central=_amplified_eps(e_star, mass, delta_shuffle),
        delta_central=math.tanh(e_star / 2) * delta_shuffle,
        delta_shuffle=delta_shuffle,
        echo_mass=mass,
        method="eon",
    )


def fmt_max_baseline(budgets, delta: float) -> CentralBound:
    """Uniform-budget shuffle bound applied with max budget for everybody.

    ln(1 + tanh(m/2) * (8 sqrt(e^m ln(4/delta) / n) + 8 e^m / n)), m = max budget.
    """
    eps = check_budgets(budgets)
    delta = _check_delta(delta, "delta")
    n = eps.size
    m = float(eps.max())
    mass = n * math.exp(-m)
    threshold = echo_mass_threshold(delta)
    if mass < threshold:
        raise InsufficientEchoMassError(mass, threshold)
    return CentralBound(
        eps_central=_amplified_eps(m, mass, delta),
        delta_central=math.tanh(m / 2) * delta,
        delta_shuffle=delta,
        echo_mass=mass,
        method="fmt-max",
    )


def local_user_bound(eps_dim: float, d: int) -> float:
    """User-level local budget of d independently perturbed dimensions."""
    if eps_dim <= 0:
        raise ParameterError("eps_dim must be positive")
    if int(d) != d or d < 1:
        raise ParameterError(f"d must be a positive integer, got {d}")
    return float(d) * float(eps_dim)


def advanced_composition(eps: float, folds: int, delta_prime: float) -> float:
    """eps * sqrt(2 m ln(1/delta')) + m eps (e^eps - 1) for m-fold composition."""
    if eps <= 0 or folds < 1:
        raise ParameterError("eps must be positive and folds >= 1")
    delta_prime = _check_delta(delta_prime, "delta_prime")
    return (eps * math.sqrt(2 * folds * math.log(1 / delta_prime))
            + folds * eps * math.expm1(eps))


def user_level_composition(eps_c: float, delta_c: float, b: int,
                           delta_prime: float) -> UserLevelBound:
    """Compose b uploaded dimensions into a user-level central guarantee.

    Selecting b dimensions costs 2b folds of the per-dimension bound.
    """
    if eps_c <= 0:
        raise ParameterError("eps_c must be positive")
    if not 0 <= delta_c <= 1:
        raise ParameterError("delta_c must lie in [0, 1]")
    if int(b) != b or b < 1:
        raise ParameterError(f"b must be a positive integer, got {b}")
    b = int(b)
    eps_user = advanced_composition(eps_c, 2 * b, delta_prime)
    return UserLevelBound(
        eps_user=eps_user,
        delta_user=delta_prime + 2 * b * delta_c,
        dims=b,
        delta_prime=delta_prime,
    )


def split_user_delta(delta_target: float, b: int, delta_c: float) -> float:
    """delta' such that delta' + 2 b delta_c equals the target user-level delta."""
    rest = delta_target - 2 * b * delta_c
    if rest <= 0:
        raise ParameterError(
            f"target delta {delta_target:g} is smaller than 2*b*delta_c = "
            f"{2 * b * delta_c:g}; no positive delta' remains")
    return rest
