"""Federated training of multinomial logistic regression under six frameworks.

Each round every user computes one proximal-objective gradient at the
broadcast weights, privatises it according to the framework, and the
analyser averages (and, for Clip-Laplace frameworks, calibrates) the
messages before a plain gradient step.

Randomness comes from independent substreams keyed by
``(master_seed, epoch, purpose, user)``, so results never depend on the order
in which users are processed.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import accountant
from .budgets import BudgetSpec, preset, sample_budgets
from .data import Dataset, partition_even
from .errors import InsufficientEchoMassError, ParameterError
from .pipeline import (GradientBatch, aggregate, calibrate, clip_gradient, laplace_rows,
                       perturb_rows, shuffle_batch, sparsify_post)

__all__ = [
    "Framework",
    "TrainConfig",
    "EpochMetrics",
    "PrivacyReport",
    "SimState",
    "TrainResult",
    "n_params",
    "local_gradient",
    "loss",
    "evaluate",
    "privacy_report",
    "init_state",
    "run_epoch",
    "train",
]

log = logging.getLogger(__name__)

_PERTURB, _SHUFFLE, _PAD, _BUDGETS, _PARTITION = 1, 2, 3, 4, 5


class Framework(str, enum.Enum):
    NON_PRIVATE = "non-private"
    LDP_MIN = "ldp-min"
    PLDP = "pldp"
    UNIS = "unis"
    APES = "apes"
    S_APES = "s-apes"

    @classmethod
    def parse(cls, name) -> "Framework":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("_", "-")
        for fw in cls:
            if fw.value == key:
                return fw
        raise ParameterError(f"unknown framework {name!r}; expected one of {[f.value for f in cls]}")

    @property
    def private(self) -> bool:
        return self is not Framework.NON_PRIVATE

    @property
    def clip_laplace(self) -> bool:
        return self in (Framework.APES, Framework.S_APES)

    @property
    def shuffled(self) -> bool:
        return self in (Framework.UNIS, Framework.APES, Framework.S_APES)


@dataclass
class TrainConfig:
    framework: Framework = Framework.APES
    epochs: int = 20
    learning_rate: float = 1.0
    prox_mu: float = 0.0
    clip: float = 0.1
    sparsify_b: int | None = None
    budget_spec: BudgetSpec | str = "Uniform2"
    n_users: int = 200
    master_seed: int = 0
    delta_shuffle: float = 1e-8
    delta_user: float = 3.6e-5
    local_steps: int = 1
    # raise on an inapplicable shuffle bound instead of leaving privacy fields empty
    strict_privacy: bool = False

    def __post_init__(self):
        self.framework = Framework.parse(self.framework)
        if isinstance(self.budget_spec, str):
            self.budget_spec = preset(self.budget_spec)
        if self.epochs < 1 or self.n_users < 2 or self.local_steps < 1:
            raise ParameterError("epochs >= 1, n_users >= 2 and local_steps >= 1 required")
        if self.learning_rate <= 0 or self.clip <= 0 or self.prox_mu < 0:
            raise ParameterError("learning_rate and clip must be positive, prox_mu nonnegative")
        if self.sparsify_b is not None and self.sparsify_b < 1:
            raise ParameterError("sparsify_b must be positive")


@dataclass(frozen=True)
class PrivacyReport:
    """Per-epoch guarantees; ``None`` where a framework offers none."""

    eps_local_user_min: float | None = None
    eps_local_user_max: float | None = None
    eps_central: float | None = None
    delta_central: float | None = None
    eps_user: float | None = None
    delta_user: float | None = None
    echo_mass: float | None = None
    note: str = ""


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    train_loss: float
    test_accuracy: float | None
    eps_central: float | None = None
    delta_central: float | None = None
    eps_user: float | None = None
    delta_user: float | None = None

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class SimState:
    weights: np.ndarray
    shards: list
    budgets: np.ndarray
    train_set: Dataset
    test_set: Dataset | None
    privacy: PrivacyReport
    epoch: int = 0


@dataclass
class TrainResult:
    config: TrainConfig
    metrics: list = field(default_factory=list)
    weights: np.ndarray | None = None
    budgets: np.ndarray | None = None
    privacy: PrivacyReport | None = None

    @property
    def final_accuracy(self) -> float | None:
        return self.metrics[-1].test_accuracy if self.metrics else None


def _stream(config: TrainConfig, epoch: int, purpose: int, user: int = 0):
    return np.random.default_rng([config.master_seed, epoch, purpose, user])


# --------------------------------------------------------------------------
# model

def n_params(p: int, classes: int) -> int:
    """Flattened size of a (p + 1) x classes weight matrix (bias row last)."""
    return (p + 1) * classes


def _with_bias(X):
    return np.hstack([X, np.ones((X.shape[0], 1))])


def _probs(W, Xb):
    z = Xb @ W
    z -= z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _unflatten(w, shard: Dataset):
    w = np.asarray(w, dtype=float)
    if w.shape != (n_params(shard.n_features, shard.classes),):
        raise ParameterError(
            f"weights of length {w.shape} do not match {shard.n_features} features x "
            f"{shard.classes} classes")
    return w.reshape(shard.n_features + 1, shard.classes)


def loss(w, shard: Dataset, mu: float = 0.0, anchor=None) -> float:
    """Mean cross-entropy plus (mu/2)||w - anchor||^2."""
    W = _unflatten(w, shard)
    Xb = _with_bias(shard.features)
    z = Xb @ W
    zmax = z.max(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(np.exp(z - zmax).sum(axis=1))
    ce = float(np.mean(lse - z[np.arange(len(shard)), shard.labels]))
    if mu and anchor is not None:
        ce += 0.5 * mu * float(np.sum((np.asarray(w) - anchor) ** 2))
    return ce


def local_gradient(w, shard: Dataset, mu: float = 0.0, anchor=None) -> np.ndarray:
    """Gradient of the proximal objective F(w) + (mu/2)||w - anchor||^2.

    ``anchor`` defaults to ``w`` itself, where the proximal term has zero
    gradient.
    """
    if len(shard) == 0:
        raise ParameterError("empty shard")
    W = _unflatten(w, shard)
    Xb = _with_bias(shard.features)
    P = _probs(W, Xb)
    P[np.arange(len(shard)), shard.labels] -= 1.0
    g = (Xb.T @ P / len(shard)).ravel()
    if mu and anchor is not None:
        g = g + mu * (np.asarray(w, dtype=float) - anchor)
    return g


def evaluate(w, testset: Dataset) -> float:
    if len(testset) == 0:
        raise ParameterError("empty test set")
    W = _unflatten(w, testset)
    pred = np.argmax(_with_bias(testset.features) @ W, axis=1)
    return float(np.mean(pred == testset.labels))


# --------------------------------------------------------------------------
# privacy

def _user_delta(config: TrainConfig, b: int, delta_c: float) -> float:
    try:
        return accountant.split_user_delta(config.delta_user, b, delta_c)
    except ParameterError:
        # target cannot absorb 2b*delta_c; report the larger resulting delta
        return config.delta_user


def privacy_report(config: TrainConfig, budgets: np.ndarray, d: int) -> PrivacyReport:
    """Per-epoch local and central guarantees of one framework."""
    fw = config.framework
    eps = np.asarray(budgets, dtype=float)
    if fw is Framework.NON_PRIVATE:
        return PrivacyReport(note="no privacy")
    lo, hi = float(eps.min()), float(eps.max())
    if fw is Framework.LDP_MIN:
        return PrivacyReport(
            eps_local_user_min=accountant.local_user_bound(lo, d),
            eps_local_user_max=accountant.local_user_bound(lo, d),
            eps_central=lo, delta_central=0.0,
            eps_user=accountant.advanced_composition(lo, d, config.delta_user),
            delta_user=config.delta_user,
            note="minimum budget for everyone; advanced composition over d dimensions")
    if fw is Framework.PLDP:
        return PrivacyReport(
            eps_local_user_min=accountant.local_user_bound(lo, d),
            eps_local_user_max=accountant.local_user_bound(hi, d),
            eps_central=hi, delta_central=0.0,
            eps_user=accountant.local_user_bound(hi, d), delta_user=0.0,
            note="parallel composition over users, basic composition over dimensions")

    b = d if fw is not Framework.S_APES else _sparsify_b(config, d)
    try:
        if fw is Framework.UNIS:
            bound = accountant.fmt_max_baseline(eps, config.delta_shuffle)
        else:
            bound = accountant.eon_central_bound(eps, config.delta_shuffle)
    except InsufficientEchoMassError as exc:
        if config.strict_privacy:
            raise
        log.warning("%s: %s", fw.value, exc)
        return PrivacyReport(
            eps_local_user_min=accountant.local_user_bound(lo, b),
            eps_local_user_max=accountant.local_user_bound(hi, b),
            echo_mass=exc.echo_mass,
            note=f"insufficient echo mass ({exc.echo_mass:.4g} < {exc.threshold:.4g})")
    user = accountant.user_level_composition(
        bound.eps_central, bound.delta_central, b, _user_delta(config, b, bound.delta_central))
    return PrivacyReport(
        eps_local_user_min=accountant.local_user_bound(lo, b),
        eps_local_user_max=accountant.local_user_bound(hi, b),
        eps_central=bound.eps_central, delta_central=bound.delta_central,
        eps_user=user.eps_user, delta_user=user.delta_user,
        echo_mass=bound.echo_mass, note=bound.method)


def _sparsify_b(config: TrainConfig, d: int) -> int:
    b = config.sparsify_b if config.sparsify_b is not None else max(1, round(0.2 * d))
    if b > d:
        raise ParameterError(f"sparsify_b={b} exceeds model dimension d={d}")
    return int(b)


# --------------------------------------------------------------------------
# training loop

def init_state(config: TrainConfig, train_set: Dataset, test_set: Dataset | None = None,
               budgets=None) -> SimState:
    """Partition data, draw budgets and zero-initialise the model."""
    shards = partition_even(train_set, config.n_users,
                            seed=[config.master_seed, _PARTITION])
    if budgets is None:
        budgets = sample_budgets(config.budget_spec, config.n_users,
                                 seed=[config.master_seed, _BUDGETS])
    budgets = accountant.check_budgets(budgets)
    if budgets.size != config.n_users:
        raise ParameterError("one budget per user required")
    if config.framework is Framework.LDP_MIN:
        budgets = np.full_like(budgets, budgets.min())
    d = n_params(train_set.n_features, train_set.classes)
    return SimState(
        weights=np.zeros(d),
        shards=shards,
        budgets=budgets,
        train_set=train_set,
        test_set=test_set,
        privacy=privacy_report(config, budgets, d),
    )


def _user_update(config: TrainConfig, w, shard: Dataset) -> np.ndarray:
    if config.local_steps == 1:
        return local_gradient(w, shard, config.prox_mu, anchor=w)
    # several local proximal steps; upload the per-unit-rate displacement
    wi = w.copy()
    for _ in range(config.local_steps):
        wi = wi - config.learning_rate * local_gradient(wi, shard, config.prox_mu, anchor=w)
    return (w - wi) / config.learning_rate


def _privatise(config: TrainConfig, G: np.ndarray, budgets: np.ndarray, epoch: int):
    fw = config.framework
    C = config.clip
    n, d = G.shape
    if fw is Framework.NON_PRIVATE:
        return GradientBatch(G, budgets, C)
    G = clip_gradient(G, C)
    rngs = [_stream(config, epoch, _PERTURB, i) for i in range(n)]
    if fw.clip_laplace:
        noisy = perturb_rows(G, budgets, C, rngs)
        if fw is Framework.S_APES:
            b = _sparsify_b(config, d)
            if b < d:
                noisy = np.stack([
                    sparsify_post(row, b, eps, C, _stream(config, epoch, _PAD, i))
                    for i, (row, eps) in enumerate(zip(noisy, budgets))])
    else:
        noisy = laplace_rows(G, budgets, C, rngs)
    batch = GradientBatch(noisy, budgets, C)
    if fw.shuffled:
        batch = shuffle_batch(batch, _stream(config, epoch, _SHUFFLE))
    return batch


def run_epoch(config: TrainConfig, state: SimState) -> tuple[np.ndarray, EpochMetrics]:
    """One round: local updates, privatisation, shuffle, aggregate, step."""
    epoch = state.epoch + 1
    w = state.weights
    G = np.stack([_user_update(config, w, shard) for shard in state.shards])
    batch = _privatise(config, G, state.budgets, epoch)
    g = aggregate(batch)
    if config.framework.clip_laplace:
        g = calibrate(g, batch.budgets, config.clip)
    w_new = w - config.learning_rate * g
    pr = state.privacy
    metrics = EpochMetrics(
        epoch=epoch,
        train_loss=loss(w_new, state.train_set),
        test_accuracy=evaluate(w_new, state.test_set) if state.test_set is not None else None,
        eps_central=pr.eps_central,
        delta_central=pr.delta_central,
        eps_user=pr.eps_user,
        delta_user=pr.delta_user,
    )
    state.weights = w_new
    state.epoch = epoch
    return w_new, metrics


def train(config: TrainConfig, train_set: Dataset, test_set: Dataset | None = None,
          budgets=None) -> TrainResult:
    """Run ``config.epochs`` rounds; deterministic given ``config.master_seed``."""
    state = init_state(config, train_set, test_set, budgets)
    result = TrainResult(config=config, budgets=state.budgets, privacy=state.privacy)
    for _ in range(config.epochs):
        _, m = run_epoch(config, state)
        if not math.isfinite(m.train_loss):
            log.warning("epoch %d: non-finite training loss", m.epoch)
        result.metrics.append(m)
    result.weights = state.weights
    return result
