import numpy as np
import pytest

from apes.budgets import PRESETS, BudgetSpec, preset, sample_budgets
from apes.errors import ParameterError


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_within_clip(name):
    spec = preset(name)
    eps = sample_budgets(spec, 10_000, seed=0)
    assert eps.shape == (10_000,)
    assert eps.min() >= spec.clip_low and eps.max() <= spec.clip_high


def test_uniform2_range():
    eps = sample_budgets("Uniform2", 10_000, seed=0)
    assert 0.05 <= eps.min() and eps.max() <= 1.0
    assert eps.max() > 0.99


def test_gauss1_heavy_boundary_mass():
    eps = sample_budgets("Gauss1", 10_000, seed=0)
    # N(0.1, 1): P(x < 0.05) ~ 0.48, P(x > 0.5) ~ 0.34
    assert 0.44 < np.mean(eps == 0.05) < 0.52
    assert 0.30 < np.mean(eps == 0.5) < 0.38


def test_mixture_components():
    spec = preset("MixGauss2")
    assert spec.params["weights"] == (0.9, 0.1)
    eps = sample_budgets(spec, 10_000, seed=4)
    assert eps.min() == 0.05 and eps.max() == 1.0


def test_degenerate_uniform():
    spec = BudgetSpec("uniform", {"low": 0.3, "high": 0.3}, 0.05, 1.0)
    assert np.all(sample_budgets(spec, 50, seed=1) == 0.3)


def test_seeded_reproducible():
    assert np.array_equal(sample_budgets("MixGauss1", 100, seed=9), sample_budgets("MixGauss1", 100, seed=9))
    assert not np.array_equal(sample_budgets("MixGauss1", 100, seed=9), sample_budgets("MixGauss1", 100, seed=8))


def test_preset_lookup_case_insensitive():
    assert preset("uniform2") is PRESETS["Uniform2"]
    with pytest.raises(ParameterError):
        preset("Uniform9")


@pytest.mark.parametrize("kwargs", [
    dict(kind="poisson"),
    dict(kind="uniform", params={"low": 1, "high": 0}),
    dict(kind="uniform", params={"low": 0.1, "high": 0.2}, clip_low=0.5, clip_high=0.4),
    dict(kind="uniform", params={"low": 0.1, "high": 0.2}, clip_low=0.0),
    dict(kind="gaussian", params={"mean": 0.1}),
    dict(kind="gaussian-mixture", params={"means": [0, 1], "stds": [1, 1], "weights": [0.5, 0.6]}),
])
def test_invalid_specs(kwargs):
    with pytest.raises(ParameterError):
        BudgetSpec(**kwargs)


def test_needs_two_users():
    with pytest.raises(ParameterError):
        sample_budgets("Uniform1", 1)
