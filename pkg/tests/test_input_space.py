import numpy as np
import pytest
from scipy import special, stats

from uqpipe.errors import ConfigError, DataError
from uqpipe.input_space import (InputSpace, Marginal, standard_normal_ppf,
                                uniform_space)


def test_normal_quantile_against_library_oracle():
    # scipy's ndtri is an independent high-accuracy implementation.
    u = np.concatenate([
        np.array([1e-12, 1e-6, 0.02425, 0.025, 0.5, 0.975, 1 - 1e-6]),
        np.linspace(0.001, 0.999, 513),
    ])
    ours = standard_normal_ppf(u)
    ref = special.ndtri(u)
    # Contract is 1e-9 relative; the Newton refinement does far better.
    assert np.max(np.abs(ours - ref) / np.maximum(np.abs(ref), 1.0)) < 1e-11


def test_normal_quantile_hand_values():
    m = Marginal("x", "normal", (0.0, 1.0))
    assert m.ppf(0.5) == pytest.approx(0.0, abs=1e-15)
    # Frozen from the oracle above: Phi^-1(0.975) = 1.959963984540054.
    assert m.ppf(0.975) == pytest.approx(1.959963984540054, abs=1e-12)


def test_uniform_midpoint():
    m = Marginal("x", "uniform", (-2.0, 4.0))
    assert m.ppf(0.5) == pytest.approx(1.0)
    assert m.ppf(np.array([0.25, 0.75])) == pytest.approx([-0.5, 2.5])


def test_loguniform_median_is_geometric_mean():
    m = Marginal("x", "log-uniform", (1.0, 100.0))
    assert m.ppf(0.5) == pytest.approx(10.0, rel=1e-12)


def test_lognormal_median():
    m = Marginal("x", "log-normal", (1.3, 0.7))
    assert m.ppf(0.5) == pytest.approx(np.exp(1.3), rel=1e-12)


def test_log_families_are_exact_exponentials():
    u = np.linspace(0.01, 0.99, 97)
    lu = Marginal("x", "log-uniform", (0.5, 80.0))
    base = Marginal("x", "uniform", (np.log(0.5), np.log(80.0)))
    assert np.array_equal(lu.ppf(u), np.exp(base.ppf(u)))
    ln = Marginal("x", "log-normal", (0.2, 1.1))
    nb = Marginal("x", "normal", (0.2, 1.1))
    assert np.array_equal(ln.ppf(u), np.exp(nb.ppf(u)))


@pytest.mark.parametrize("marg", [
    Marginal("a", "uniform", (-1.0, 3.0)),
    Marginal("b", "log-uniform", (0.1, 20.0)),
    Marginal("c", "normal", (2.0, 1.5)),
    Marginal("d", "log-normal", (0.0, 0.8)),
    Marginal("e", "normal", (0.0, 1.0), truncation=(-1.0, 2.0)),
    Marginal("f", "uniform", (0.0, 10.0), truncation=(2.0, 3.0)),
    Marginal("g", "log-normal", (0.5, 0.6), truncation=(1.0, 9.0)),
])
def test_ppf_cdf_roundtrip_and_support(marg):
    u = np.linspace(1e-6, 1 - 1e-6, 301)
    x = marg.ppf(u)
    lo, hi = marg.support()
    assert np.all(x >= lo) and np.all(x <= hi)
    back = marg.cdf(x)
    assert np.max(np.abs(back - u)) < 1e-10


def test_truncation_restricts_support():
    m = Marginal("x", "normal", (0.0, 2.0), truncation=(-0.5, 0.5))
    x = m.ppf(np.linspace(1e-9, 1 - 1e-9, 1001))
    assert x.min() >= -0.5 and x.max() <= 0.5


def test_domain_errors():
    m = Marginal("x", "uniform", (0.0, 1.0))
    for bad in (0.0, 1.0, -0.1, 1.1):
        with pytest.raises(DataError):
            m.ppf(bad)


def test_config_errors():
    with pytest.raises(ConfigError):
        Marginal("x", "triangular", (0.0, 1.0))
    with pytest.raises(ConfigError):
        Marginal("x", "uniform", (1.0, 1.0))
    with pytest.raises(ConfigError):
        Marginal("x", "log-uniform", (-1.0, 1.0))
    with pytest.raises(ConfigError):
        Marginal("x", "normal", (0.0, 0.0))
    with pytest.raises(ConfigError):
        Marginal("x", "uniform", (0.0, 1.0), truncation=(0.9, 0.1))
    with pytest.raises(ConfigError):
        InputSpace((Marginal("x", "uniform", (0.0, 1.0)),
                    Marginal("x", "uniform", (0.0, 1.0))))


def test_transform_dimension_mismatch():
    space = uniform_space(["a", "b"], 0.0, 1.0)
    with pytest.raises(DataError):
        space.transform(np.full((5, 3), 0.5))


def test_sampling_is_deterministic():
    space = uniform_space(["a", "b", "c"], -1.0, 1.0)
    assert np.array_equal(space.sample(64, seed=7), space.sample(64, seed=7))
    assert not np.array_equal(space.sample(64, seed=7),
                              space.sample(64, seed=8))


def test_sample_moments_match_marginals():
    space = InputSpace((
        Marginal("u", "uniform", (2.0, 6.0)),
        Marginal("n", "normal", (-1.0, 2.0)),
        Marginal("ln", "log-normal", (0.3, 0.4)),
    ))
    x = space.sample(200_000, seed=123)
    expected = [4.0, -1.0, float(np.exp(0.3 + 0.4 ** 2 / 2))]
    for k, mu in enumerate(expected):
        scale = max(1.0, abs(mu))
        assert abs(x[:, k].mean() - mu) / scale < 0.01


def test_sample_coordinates_are_independent():
    space = uniform_space([f"x{i}" for i in range(4)], 0.0, 1.0)
    x = space.sample(100_000, seed=5)
    corr = np.corrcoef(x, rowvar=False)
    off = corr[~np.eye(4, dtype=bool)]
    assert np.max(np.abs(off)) < 0.02


def test_truncated_sampling_stays_inside():
    space = InputSpace((
        Marginal("t", "normal", (0.0, 1.0), truncation=(-0.3, 1.7)),
    ))
    x = space.sample(5000, seed=11)
    assert x.min() >= -0.3 and x.max() <= 1.7
    # Truncated-normal mean from scipy as an independent oracle.
    ref = stats.truncnorm.mean(-0.3, 1.7, loc=0.0, scale=1.0)
    assert abs(x.mean() - ref) < 0.02


def test_roundtrip_through_dicts():
    space = InputSpace((
        Marginal("u", "uniform", (0.0, 2.0)),
        Marginal("n", "normal", (1.0, 3.0), truncation=(0.0, 5.0)),
    ))
    again = InputSpace.from_dicts(space.to_dicts())
    assert again == space
