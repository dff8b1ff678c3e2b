import numpy as np
import pytest
import scipy.linalg as sla
from scipy import stats

from uqpipe.data import LearningSample
from uqpipe.errors import ConfigError, DataError
from uqpipe.gp_core import (GpModel, KernelParams, NuggetSpec, fit_gp,
                            matern52, matern52_correlation,
                            negative_log_likelihood, _Likelihood)
from uqpipe.validation import q2


def toy_sample(n=40, seed=0, noise=0.0, dim=1):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, size=(n, dim))
    y = np.sin(3.0 * x[:, 0]) + 0.5 * x[:, 0]
    if dim > 1:
        y = y + 0.3 * x[:, 1] ** 2
    if noise > 0.0:
        y = y + noise * rng.standard_normal(n)
    return LearningSample(x=x, y=y)


def test_matern52_hand_values():
    # rho(1) = (1 + sqrt5 + 5/3) exp(-sqrt5), frozen from the formula.
    expected = (1.0 + np.sqrt(5.0) + 5.0 / 3.0) * np.exp(-np.sqrt(5.0))
    assert matern52(1.0) == pytest.approx(expected, rel=1e-15)
    assert matern52(0.0) == 1.0
    assert expected == pytest.approx(0.52399, abs=5e-6)


def test_correlation_identity_and_separability():
    a = np.array([[0.3, -0.2]])
    assert matern52_correlation(a, a, [1.0, 2.0])[0, 0] == pytest.approx(1.0)
    b = np.array([[0.8, 0.5]])
    joint = matern52_correlation(a, b, [0.7, 1.3])[0, 0]
    split = (matern52(abs(0.3 - 0.8) / 0.7)
             * matern52(abs(-0.2 - 0.5) / 1.3))
    assert joint == pytest.approx(split, rel=1e-14)


def test_correlation_parameter_guards():
    a = np.zeros((2, 2))
    with pytest.raises(ConfigError):
        matern52_correlation(a, a, [1.0, -1.0])
    with pytest.raises(DataError):
        matern52_correlation(a, a, [1.0])


def test_concentrated_nll_matches_multivariate_normal_oracle():
    # Profiling identity: the concentrated NLL equals the full Gaussian
    # NLL evaluated at the profiled (beta, sigma^2).
    sample = toy_sample(25, seed=1, noise=0.05)
    lik = _Likelihood(sample.x, sample.y, estimate_ratio=True)
    log_params = np.log(np.array([0.8, 0.02]))
    value, _, aux = lik.value_and_grad(log_params)
    corr = matern52_correlation(sample.x, sample.x, [0.8])
    cov = aux["sigma2"] * (corr + 0.02 * np.eye(sample.n))
    oracle = -stats.multivariate_normal.logpdf(
        sample.y, mean=np.full(sample.n, aux["beta"]), cov=cov)
    assert value == pytest.approx(oracle, abs=1e-10)


def test_nll_invariant_under_sample_permutation():
    sample = toy_sample(30, seed=2, noise=0.1)
    perm = np.random.default_rng(3).permutation(30)
    shuffled = LearningSample(x=sample.x[perm], y=sample.y[perm])
    params = KernelParams(lengthscales=np.array([0.5]), variance=1.0)
    nug = NuggetSpec(kind="homoscedastic", value=0.01, estimated=True)
    a = negative_log_likelihood(params, sample, nug)
    b = negative_log_likelihood(params, shuffled, nug)
    assert a == pytest.approx(b, rel=1e-10)


@pytest.mark.parametrize("mode", ["estimated", "hetero", "interp"])
def test_gradient_matches_finite_differences(mode):
    sample = toy_sample(28, seed=4, noise=0.1, dim=2)
    rng = np.random.default_rng(5)
    if mode == "estimated":
        lik = _Likelihood(sample.x, sample.y, estimate_ratio=True)
        p = np.log(np.array([0.7, 1.2, 0.05]))
    elif mode == "hetero":
        noise = 0.05 + 0.02 * rng.random(sample.n)
        lik = _Likelihood(sample.x, sample.y, noise_vector=noise)
        p = np.log(np.array([0.9, 0.6, 0.8]))
    else:
        lik = _Likelihood(sample.x, sample.y, fixed_ratio=1e-6)
        p = np.log(np.array([1.1, 0.5]))
    value, grad, _ = lik.value_and_grad(p)
    for k in range(p.size):
        h = 1e-6
        up = p.copy()
        up[k] += h
        down = p.copy()
        down[k] -= h
        fd = (lik.value_and_grad(up)[0]
              - lik.value_and_grad(down)[0]) / (2.0 * h)
        assert grad[k] == pytest.approx(fd, rel=1e-4, abs=1e-7)


def test_fit_recovers_smooth_function():
    sample = toy_sample(40, seed=6)
    gp = fit_gp(sample, nugget=0.0, restarts=3, seed=0)
    test = toy_sample(200, seed=7)
    pred = gp.predict_mean(test.x)
    assert q2(test.y, pred) > 0.99


def test_fit_warm_start_not_worse():
    sample = toy_sample(35, seed=8, noise=0.05)
    base = fit_gp(sample, nugget="estimate", restarts=4, seed=1)
    params = KernelParams(lengthscales=base.kernel.lengthscales,
                          variance=base.kernel.variance)
    nug = base.nugget
    ref_nll = negative_log_likelihood(params, sample, nug)
    warm = fit_gp(sample, nugget="estimate", restarts=1,
                  init_lengthscales=base.kernel.lengthscales,
                  init_nugget_ratio=base.nugget.value
                  / base.kernel.variance, seed=2)
    warm_nll = negative_log_likelihood(
        KernelParams(lengthscales=warm.kernel.lengthscales,
                     variance=warm.kernel.variance), sample, warm.nugget)
    assert warm_nll <= ref_nll + 1e-6


def test_predict_interpolates_with_zero_nugget():
    sample = toy_sample(30, seed=9)
    gp = fit_gp(sample, nugget=0.0, restarts=3, seed=3)
    mean, var = gp.predict(sample.x)
    scale = np.max(np.abs(sample.y))
    assert np.max(np.abs(mean - sample.y)) / scale < 1e-6
    assert np.max(var) < 1e-4 * gp.kernel.variance


def test_predict_matches_direct_inverse_oracle():
    sample = toy_sample(25, seed=10, noise=0.1)
    gp = fit_gp(sample, nugget="estimate", restarts=3, seed=4)
    pts = np.linspace(-1.0, 1.0, 7)[:, None]
    mean, var = gp.predict(pts)
    # Direct universal-kriging formulas through an explicit inverse.
    cov = gp.kernel.variance * matern52_correlation(
        sample.x, sample.x, gp.kernel.lengthscales)
    cov[np.diag_indices_from(cov)] += gp.nugget.value + gp.jitter
    kinv = np.linalg.inv(cov)
    k = gp.kernel.variance * matern52_correlation(
        pts, sample.x, gp.kernel.lengthscales)
    ones = np.ones(sample.n)
    beta = (ones @ kinv @ sample.y) / (ones @ kinv @ ones)
    mean_ref = beta + k @ kinv @ (sample.y - beta)
    u = 1.0 - k @ kinv @ ones
    var_ref = (gp.kernel.variance - np.sum((k @ kinv) * k, axis=1)
               + u ** 2 / (ones @ kinv @ ones))
    assert mean == pytest.approx(mean_ref, abs=1e-9 * max(1.0,
                                                          np.abs(mean_ref).max()))
    assert var == pytest.approx(var_ref, abs=1e-9 * gp.kernel.variance)
    assert beta == pytest.approx(gp.beta, rel=1e-9)


def test_predict_reverts_to_prior_far_away():
    sample = toy_sample(20, seed=11)
    gp = fit_gp(sample, nugget=0.0, restarts=3, seed=5)
    far = np.array([[500.0]])
    mean, var = gp.predict(far)
    assert mean[0] == pytest.approx(gp.beta, abs=1e-8 * abs(gp.beta) + 1e-10)
    # Prior variance plus the trend-uncertainty term.
    prior = gp.kernel.variance * (1.0 + 1.0 / gp._one_kinv_one
                                  / gp.kernel.variance)
    assert var[0] == pytest.approx(prior, rel=1e-6)


def test_variance_nonnegative_everywhere():
    sample = toy_sample(50, seed=12, noise=0.02)
    gp = fit_gp(sample, nugget="estimate", restarts=3, seed=6)
    pts = np.linspace(-1.2, 1.2, 500)[:, None]
    _, var = gp.predict(pts)
    assert np.all(var >= 0.0)


def test_virtual_loo_equals_brute_force_refit():
    # Refit-free identity vs. actually deleting each point (fixed
    # hyperparameters, trend re-estimated).
    sample = toy_sample(30, seed=13, noise=0.1)
    gp = fit_gp(sample, nugget="estimate", restarts=3, seed=7)
    means, variances = gp.loo()
    tau2 = gp.nugget.value
    for i in range(sample.n):
        keep = np.arange(sample.n) != i
        xi, yi = sample.x[keep], sample.y[keep]
        cov = gp.kernel.variance * matern52_correlation(
            xi, xi, gp.kernel.lengthscales)
        cov[np.diag_indices_from(cov)] += tau2 + gp.jitter
        kinv = np.linalg.inv(cov)
        ones = np.ones(sample.n - 1)
        beta = (ones @ kinv @ yi) / (ones @ kinv @ ones)
        k = (gp.kernel.variance * matern52_correlation(
            sample.x[i:i + 1], xi, gp.kernel.lengthscales))[0]
        mean_ref = beta + k @ kinv @ (yi - beta)
        u = 1.0 - k @ kinv @ ones
        var_ref = (gp.kernel.variance - k @ kinv @ k
                   + u ** 2 / (ones @ kinv @ ones)) + tau2
        assert means[i] == pytest.approx(mean_ref, abs=1e-8)
        assert variances[i] == pytest.approx(var_ref, abs=1e-8)


def test_conditional_simulation_moments():
    sample = toy_sample(25, seed=14)
    gp = fit_gp(sample, nugget=0.0, restarts=3, seed=8)
    pts = np.linspace(-0.9, 0.9, 12)[:, None]
    mean, var = gp.predict(pts)
    sims = gp.conditional_simulate(pts, n_traj=20_000, seed=9)
    emp_mean = sims.mean(axis=0)
    emp_var = sims.var(axis=0)
    se = np.sqrt(var / 20_000)
    assert np.all(np.abs(emp_mean - mean) <= 4.0 * se + 1e-12)
    assert emp_var == pytest.approx(var, rel=0.08, abs=1e-10)


def test_conditional_simulation_pins_training_points():
    sample = toy_sample(20, seed=15)
    gp = fit_gp(sample, nugget=0.0, restarts=3, seed=10)
    sims = gp.conditional_simulate(sample.x, n_traj=50, seed=11)
    spread = np.max(np.abs(sims - sample.y[None, :]))
    assert spread < 1e-3 * np.ptp(sample.y)


def test_conditional_simulation_extra_diag_adds_variance():
    sample = toy_sample(25, seed=16)
    gp = fit_gp(sample, nugget=0.0, restarts=3, seed=12)
    pts = np.array([[0.05], [-0.4]])
    extra = np.array([0.5, 2.0])
    sims = gp.conditional_simulate(pts, n_traj=30_000, seed=13,
                                   extra_diag=extra)
    _, base_var = gp.predict(pts)
    emp = sims.var(axis=0)
    assert emp == pytest.approx(base_var + extra, rel=0.05)


def test_conditional_simulation_covariance_shrinks_with_trajectories():
    sample = toy_sample(15, seed=17)
    gp = fit_gp(sample, nugget="estimate", restarts=2, seed=14)
    pts = np.linspace(-0.8, 0.8, 5)[:, None]
    k = gp._cross_cov(pts)
    t = sla.solve_triangular(gp._chol, k.T, lower=True)
    u = 1.0 - k @ gp._kinv_one
    cov_ref = (gp.kernel.variance * matern52_correlation(
        pts, pts, gp.kernel.lengthscales) - t.T @ t
        + np.outer(u, u) / gp._one_kinv_one)
    errs = []
    for n_traj in (500, 32_000):
        sims = gp.conditional_simulate(pts, n_traj=n_traj, seed=15)
        emp = np.cov(sims, rowvar=False)
        errs.append(np.linalg.norm(emp - cov_ref))
    assert errs[1] < errs[0]


def test_conditional_simulation_guards():
    sample = toy_sample(15, seed=18)
    gp = fit_gp(sample, nugget=0.0, restarts=2, seed=16)
    pts = np.zeros((3, 1))
    with pytest.raises(ConfigError):
        gp.conditional_simulate(pts, n_traj=0, seed=0)
    with pytest.raises(ConfigError):
        gp.conditional_simulate(np.zeros((10, 1)), n_traj=5, seed=0,
                                max_points=4)
    with pytest.raises(DataError):
        gp.conditional_simulate(pts, n_traj=5, seed=0,
                                extra_diag=np.ones(2))


def test_fit_heteroscedastic_known_noise():
    rng = np.random.default_rng(19)
    n = 120
    x = np.sort(rng.uniform(-1.0, 1.0, n))[:, None]
    sd = 0.05 + 0.3 * (x[:, 0] + 1.0)
    y = np.sin(2.5 * x[:, 0]) + sd * rng.standard_normal(n)
    sample = LearningSample(x=x, y=y)
    gp = fit_gp(sample, nugget=sd ** 2, restarts=3, seed=17)
    assert gp.nugget.kind == "heteroscedastic"
    grid = np.linspace(-1.0, 1.0, 300)[:, None]
    pred = gp.predict_mean(grid)
    assert q2(np.sin(2.5 * grid[:, 0]), pred) > 0.95


def test_fit_guards_and_warnings():
    sample = toy_sample(30, seed=20)
    with pytest.raises(ConfigError):
        fit_gp(sample, active_inputs=[0, 0])
    with pytest.raises(ConfigError):
        fit_gp(sample, active_inputs=[4])
    with pytest.raises(ConfigError):
        fit_gp(sample, nugget=-1.0)
    with pytest.raises(ConfigError):
        fit_gp(sample, nugget="wrong")
    with pytest.raises(ConfigError):
        fit_gp(sample, restarts=0)
    with pytest.warns(UserWarning):
        fit_gp(LearningSample(x=sample.x[:6], y=sample.y[:6]), restarts=1)
    flat = LearningSample(x=np.column_stack([sample.x[:, 0],
                                             np.ones(sample.n)]),
                          y=sample.y)
    with pytest.raises(DataError):
        fit_gp(flat, restarts=1)


def test_constant_output_degenerate_model():
    sample = LearningSample(x=np.linspace(0, 1, 12)[:, None],
                            y=np.full(12, 3.25))
    gp = fit_gp(sample, restarts=2, seed=18)
    mean, var = gp.predict(np.array([[0.3], [0.9]]))
    assert np.all(mean == 3.25)
    assert np.all(var == 0.0)
    sims = gp.conditional_simulate(np.array([[0.5]]), n_traj=8, seed=0)
    assert np.all(sims == 3.25)


def test_serialization_roundtrip():
    sample = toy_sample(20, seed=21, noise=0.05, dim=2)
    gp = fit_gp(sample, nugget="estimate", restarts=2, seed=19)
    doc = gp.to_dict()
    again = GpModel.from_dict(doc)
    pts = np.random.default_rng(22).uniform(-1, 1, (10, 2))
    m1, v1 = gp.predict(pts)
    m2, v2 = again.predict(pts)
    assert m1 == pytest.approx(m2, rel=1e-12)
    assert v1 == pytest.approx(v2, rel=1e-10, abs=1e-14)


def test_fit_is_deterministic():
    sample = toy_sample(30, seed=23, noise=0.05)
    a = fit_gp(sample, nugget="estimate", restarts=3, seed=20)
    b = fit_gp(sample, nugget="estimate", restarts=3, seed=20)
    assert np.array_equal(a.kernel.lengthscales, b.kernel.lengthscales)
    assert a.kernel.variance == b.kernel.variance
    assert a.beta == b.beta
