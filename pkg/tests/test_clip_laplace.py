import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from apes.clip_laplace import (ClipLaplaceParams, clap_cdf, clap_density, clap_mean, clap_ppf,
                               clap_sample, clap_second_moment, laplace_sample)
from apes.errors import ParameterError, UnsupportedConfigurationError

EPS_GRID = [0.05, 0.1, 0.5, 1.0, 3.0]


def params(center, lam, A, sens=None):
    return ClipLaplaceParams(center=center, scale=lam, bound=A, sensitivity=2 * A if sens is None else sens)


def quad_density(p, fn=lambda z: 1.0):
    pts = [p.center] if -p.bound < p.center < p.bound else None
    val, _ = integrate.quad(lambda z: fn(z) * clap_density(p, z), -p.bound, p.bound,
                            points=pts, epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


# -- density ---------------------------------------------------------------

def test_density_at_center():
    # S = 1 - exp(-0.5); 1 / (2 * 2 * S), value checked with mpmath
    assert clap_density(params(0, 2, 1), 0.0) == pytest.approx(0.635373520634, abs=1e-11)


def test_density_outside_support():
    assert clap_density(params(0, 2, 1), 1.5) == 0.0
    assert clap_density(params(0, 2, 1), -1.0000001) == 0.0


def test_density_symmetric():
    p = params(0, 2, 1)
    assert clap_density(p, 0.3) == clap_density(p, -0.3)


@pytest.mark.parametrize("center", [-1.0, -0.4, 0.0, 0.7, 1.0])
@pytest.mark.parametrize("eps", EPS_GRID)
def test_density_integrates_to_one(center, eps):
    p = ClipLaplaceParams.for_budget(center, eps, 1.0)
    assert quad_density(p) == pytest.approx(1.0, abs=1e-10)


def test_general_bound_larger_than_half_sensitivity():
    p = ClipLaplaceParams(center=0.3, scale=1.5, bound=2.0, sensitivity=2.0)
    assert quad_density(p) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("kwargs", [
    dict(center=0, scale=0, bound=1, sensitivity=2),
    dict(center=0, scale=-1, bound=1, sensitivity=2),
    dict(center=0, scale=1, bound=0.5, sensitivity=2),
    dict(center=1.5, scale=1, bound=1, sensitivity=2),
    dict(center=float("nan"), scale=1, bound=1, sensitivity=2),
])
def test_invalid_params_rejected(kwargs):
    with pytest.raises(ParameterError):
        ClipLaplaceParams(**kwargs)


def test_center_at_boundary_allowed():
    p = ClipLaplaceParams.for_budget(1.0, 0.5, 1.0)
    assert np.isfinite(clap_mean(p))
    assert 0 < p.normalization < 1


# -- LDP ratio ---------------------------------------------------------------

@pytest.mark.parametrize("eps", EPS_GRID)
@pytest.mark.parametrize("C", [0.1, 1.0])
def test_density_ratio_bounded_by_exp_eps(eps, C):
    centers = np.linspace(-C, C, 41)
    z = np.linspace(-C, C, 101)
    dens = np.array([clap_density(ClipLaplaceParams.for_budget(c, eps, C), z) for c in centers])
    ratio = dens[:, None, :] / dens[None, :, :]
    assert ratio.max() <= math.exp(eps) * (1 + 1e-9)


# -- CDF ---------------------------------------------------------------------

def test_cdf_endpoints():
    for lam in (0.5, 2.0, 40.0):
        for A in (0.1, 1.0):
            p = params(0, lam, A)
            assert clap_cdf(p, A) == 1.0
            assert clap_cdf(p, -A) == 0.0


def test_cdf_half_at_symmetric_center():
    assert clap_cdf(params(0, 2, 1), 0.0) == pytest.approx(0.5, abs=1e-15)


def test_cdf_against_quadrature():
    p = params(0.5, 2, 1)
    val, _ = integrate.quad(lambda z: clap_density(p, z), -1, 0.5, epsabs=1e-14, epsrel=1e-13)
    assert clap_cdf(p, 0.5) == pytest.approx(val, abs=1e-10)
    # mpmath reference
    assert clap_cdf(p, 0.5) == pytest.approx(0.70460794846793, abs=1e-12)


@pytest.mark.parametrize("center", [-0.8, 0.0, 0.5])
@pytest.mark.parametrize("eps", [0.05, 1.0, 3.0])
def test_cdf_derivative_is_density(center, eps):
    p = ClipLaplaceParams.for_budget(center, eps, 1.0)
    z = np.linspace(-0.95, 0.95, 77)
    z = z[np.abs(z - center) > 1e-3]
    h = 1e-6
    fd = (clap_cdf(p, z + h) - clap_cdf(p, z - h)) / (2 * h)
    assert np.max(np.abs(fd - clap_density(p, z))) < 1e-6


def test_cdf_monotone():
    p = params(0.3, 0.2, 1)
    z = np.linspace(-1.2, 1.2, 5001)
    assert np.all(np.diff(clap_cdf(p, z)) >= 0)


def test_ppf_inverts_cdf():
    p = params(-0.4, 0.7, 1)
    u = np.linspace(0, 1, 1001)
    assert np.max(np.abs(clap_cdf(p, clap_ppf(p, u)) - u)) < 1e-12


# -- sampling ----------------------------------------------------------------

@given(center=st.floats(-1, 1), eps=st.floats(0.01, 50), seed=st.integers(0, 2**32 - 1))
@settings(max_examples=50, deadline=None)
def test_samples_in_support(center, eps, seed):
    p = ClipLaplaceParams.for_budget(center, eps, 1.0)
    x = clap_sample(p, np.random.default_rng(seed), size=200)
    assert np.all(np.abs(x) <= 1.0)


def test_sampling_deterministic():
    p = params(0.5, 2, 1)
    a = clap_sample(p, np.random.default_rng(7), size=50)
    b = clap_sample(p, np.random.default_rng(7), size=50)
    assert np.array_equal(a, b)
    assert isinstance(clap_sample(p, np.random.default_rng(7)), float)


def test_sample_mean_matches_closed_form():
    p = params(0.5, 2, 1)
    x = clap_sample(p, np.random.default_rng(123), size=10**6)
    se = x.std() / math.sqrt(x.size)
    assert abs(x.mean() - clap_mean(p)) < 3 * se


@pytest.mark.parametrize("center,lam", [(0.0, 2.0), (0.5, 2.0), (-0.9, 0.3), (0.2, 40.0)])
def test_ks_against_cdf(center, lam):
    p = params(center, lam, 1)
    x = clap_sample(p, np.random.default_rng(99), size=10**5)
    res = stats.kstest(x, lambda z: clap_cdf(p, z))
    assert res.pvalue > 0.01


# -- moments -----------------------------------------------------------------

def test_mean_zero_center():
    assert clap_mean(params(0, 2, 1)) == 0.0


def test_mean_reference_value():
    # mpmath quadrature of z * density, 40 digits
    assert clap_mean(params(0.5, 2, 1)) == pytest.approx(0.107764141266967, abs=1e-13)


def test_mean_is_odd():
    assert clap_mean(params(-0.5, 2, 1)) == pytest.approx(-clap_mean(params(0.5, 2, 1)), abs=1e-15)


@pytest.mark.parametrize("C", [0.1, 1.0])
@pytest.mark.parametrize("eps", EPS_GRID)
def test_mean_matches_quadrature(eps, C):
    for c in np.linspace(-C, C, 9):
        p = ClipLaplaceParams.for_budget(c, eps, C)
        assert abs(clap_mean(p) - quad_density(p, lambda z: z)) < 1e-9


@pytest.mark.parametrize("eps", EPS_GRID)
def test_mean_strictly_increasing(eps):
    m = [clap_mean(ClipLaplaceParams.for_budget(c, eps, 1.0)) for c in np.linspace(-1, 1, 201)]
    assert np.all(np.diff(m) > 0)
    assert -1 < min(m) and max(m) < 1


def test_second_moment_references():
    assert clap_second_moment(params(0, 2, 1)) == pytest.approx(0.292529587316009, abs=1e-12)
    assert clap_second_moment(params(0.5, 2, 1)) == pytest.approx(0.455823454024847, abs=1e-12)


@pytest.mark.parametrize("center", [0.0, 0.5, -1.0])
@pytest.mark.parametrize("eps", EPS_GRID)
def test_second_moment_matches_quadrature(center, eps):
    p = ClipLaplaceParams.for_budget(center, eps, 1.0)
    q = quad_density(p, lambda z: (z - center) ** 2)
    assert clap_second_moment(p) == pytest.approx(q, abs=1e-8)
    assert 0 <= clap_second_moment(p) < 4.0


def test_moments_require_a_equals_c():
    p = ClipLaplaceParams(center=0.1, scale=1.0, bound=2.0, sensitivity=2.0)
    with pytest.raises(UnsupportedConfigurationError):
        clap_mean(p)
    with pytest.raises(UnsupportedConfigurationError):
        clap_second_moment(p)


# -- classic Laplace ---------------------------------------------------------

def test_laplace_moments():
    x = laplace_sample(0.3, 1.5, np.random.default_rng(5), size=10**6)
    se_mean = x.std() / math.sqrt(x.size)
    assert abs(x.mean() - 0.3) < 3 * se_mean
    v = (x - x.mean()) ** 2
    se_var = v.std() / math.sqrt(x.size)
    assert abs(v.mean() - 2 * 1.5**2) < 3 * se_var


def test_laplace_deterministic_and_validated():
    a = laplace_sample(0.0, 1.0, np.random.default_rng(1), size=10)
    b = laplace_sample(0.0, 1.0, np.random.default_rng(1), size=10)
    assert np.array_equal(a, b)
    with pytest.raises(ParameterError):
        laplace_sample(0.0, 0.0, np.random.default_rng(1))
