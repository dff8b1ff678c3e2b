import numpy as np
import pytest
from scipy import stats

from uqpipe.data import LearningSample
from uqpipe.design import optimized_lhs
from uqpipe.errors import ConfigError, DataError
from uqpipe.joint_gp import (BuildTrace, JointGpConfig, JointGpModel,
                             build_joint)
from uqpipe.screening import InputScreening, ScreeningReport
from uqpipe.validation import q2


def make_report(selected, dim, names=None):
    """Hand-built screening report selecting ``selected`` in that order."""
    names = names or [f"x{i + 1}" for i in range(dim)]
    rows = []
    for i in range(dim):
        if i in selected:
            rank = selected.index(i) + 1
            rows.append(InputScreening(index=i, name=names[i],
                                       r2_hsic=1.0 / rank, p_value=0.001,
                                       selected=True, rank=rank))
        else:
            rows.append(InputScreening(index=i, name=names[i],
                                       r2_hsic=0.0, p_value=0.9,
                                       selected=False))
    return ScreeningReport(inputs=tuple(rows), alpha=0.1,
                           method="permutation")


def smooth_sample(n=80, seed=0):
    """Deterministic output of two inputs, no hidden noise."""
    x = optimized_lhs(n, 2, iters=200, restarts=1, seed=seed).unit
    y = np.sin(4.0 * x[:, 0]) + 2.0 * x[:, 1] ** 2
    return LearningSample(x=x, y=y)


def noisy_sample(n=220, seed=1):
    """One explanatory input plus a hidden noise driver.

    The conditional mean is sin(2 pi x1) and the conditional variance is
    (0.2 + x1)^2: the hidden input enters through a centered factor of
    unit variance.
    """
    rng = np.random.default_rng(seed)
    x = rng.random((n, 2))
    noise = (2.0 * x[:, 1] - 1.0) * np.sqrt(3.0)
    y = np.sin(2.0 * np.pi * x[:, 0]) + (0.2 + x[:, 0]) * noise
    return LearningSample(x=x, y=y)


def test_deterministic_function_yields_tiny_dispersion():
    sample = smooth_sample()
    model, trace = build_joint(sample, make_report([0, 1], 2), seed=0)
    assert model.explanatory == (0, 1)
    assert model.residual_inputs == ()
    # Mean recovery on held-out points.
    rng = np.random.default_rng(10)
    xt = rng.random((300, 2))
    yt = np.sin(4.0 * xt[:, 0]) + 2.0 * xt[:, 1] ** 2
    mean, _ = model.predict_mean(xt)
    assert q2(yt, mean) > 0.99
    # With nothing unexplained the dispersion collapses.
    disp = model.predict_dispersion(xt)
    assert np.mean(disp) < 1e-3 * np.var(sample.y)
    assert trace.final_q2() > 0.99


def test_build_trace_shape_and_growth():
    sample = smooth_sample(90, seed=2)
    model, trace = build_joint(sample, make_report([1, 0], 2), seed=1)
    assert isinstance(trace, BuildTrace)
    assert [s.step for s in trace.steps] == [1, 2]
    assert [s.input_index for s in trace.steps] == [1, 0]
    assert [s.input_name for s in trace.steps] == ["x2", "x1"]
    # Adding the second (needed) input improves the leave-one-out fit.
    assert trace.steps[-1].loo_q2 > trace.steps[0].loo_q2
    assert trace.final_q2() == trace.steps[-1].loo_q2
    # Stage bookkeeping: nugget kinds per stage.
    assert model.gp_mean_hom.nugget.kind == "homoscedastic"
    assert model.gp_mean_het.nugget.kind == "heteroscedastic"
    assert model.dispersion_floor == pytest.approx(
        1e-6 * np.var(sample.y))


def test_recovers_input_dependent_dispersion():
    sample = noisy_sample()
    model, _ = build_joint(sample, make_report([0], 2), seed=2)
    grid = np.linspace(0.02, 0.98, 40)
    pts = np.column_stack([grid, np.full(40, 0.5)])
    mean, _ = model.predict_mean(pts)
    assert q2(np.sin(2.0 * np.pi * grid), mean) > 0.85
    disp = model.predict_dispersion(pts)
    truth = (0.2 + grid) ** 2
    rho = stats.spearmanr(disp, truth).statistic
    assert rho > 0.7
    # The dispersion magnitude tracks the truth, not just its ordering.
    assert np.mean(disp) == pytest.approx(np.mean(truth), rel=0.5)


def test_joint_model_total_variance_calibration():
    # Empirical check that mean + dispersion describe held-out scatter:
    # the standardized residuals should have variance near one.
    sample = noisy_sample(300, seed=3)
    model, _ = build_joint(sample, make_report([0], 2), seed=3)
    test = noisy_sample(2000, seed=4)
    mean, var = model.predict_mean(test.x)
    total = var + model.predict_dispersion(test.x)
    z = (test.y - mean) / np.sqrt(total)
    assert np.var(z) == pytest.approx(1.0, rel=0.3)


def test_constant_output_degenerates_cleanly():
    x = np.random.default_rng(5).random((30, 2))
    sample = LearningSample(x=x, y=np.full(30, 2.5))
    model, trace = build_joint(sample, make_report([0], 2), seed=4)
    pts = np.array([[0.2, 0.3], [0.8, 0.1]])
    mean, var = model.predict_mean(pts)
    assert np.all(mean == 2.5)
    assert np.all(var == 0.0)
    assert np.all(model.predict_dispersion(pts) == 0.0)


def test_point_width_handling():
    sample = smooth_sample(60, seed=6)
    model, _ = build_joint(sample, make_report([0], 2), seed=5)
    full = np.array([[0.4, 0.9], [0.1, 0.2]])
    narrow = full[:, [0]]
    m_full, _ = model.predict_mean(full)
    m_narrow, _ = model.predict_mean(narrow)
    assert np.array_equal(m_full, m_narrow)
    with pytest.raises(DataError):
        model.predict_mean(np.zeros((2, 3)))


def test_serialization_roundtrip():
    sample = noisy_sample(120, seed=7)
    model, _ = build_joint(sample, make_report([0], 2), seed=6)
    again = JointGpModel.from_dict(model.to_dict())
    pts = np.random.default_rng(8).random((15, 2))
    m1, v1 = model.predict_mean(pts)
    m2, v2 = again.predict_mean(pts)
    assert m1 == pytest.approx(m2, rel=1e-12)
    assert v1 == pytest.approx(v2, rel=1e-10, abs=1e-14)
    assert again.predict_dispersion(pts) == pytest.approx(
        model.predict_dispersion(pts), rel=1e-10)
    assert again.explanatory == model.explanatory
    assert again.residual_inputs == model.residual_inputs


def test_build_is_deterministic():
    sample = noisy_sample(100, seed=9)
    a, _ = build_joint(sample, make_report([0], 2), seed=7)
    b, _ = build_joint(sample, make_report([0], 2), seed=7)
    assert np.array_equal(a.gp_mean_het.kernel.lengthscales,
                          b.gp_mean_het.kernel.lengthscales)
    assert a.gp_disp.kernel.variance == b.gp_disp.kernel.variance


def test_empty_selection_rejected():
    sample = smooth_sample(40, seed=11)
    with pytest.raises(DataError):
        build_joint(sample, make_report([], 2), seed=0)


def test_config_validation():
    with pytest.raises(ConfigError):
        JointGpConfig(restarts=0)
    with pytest.raises(ConfigError):
        JointGpConfig(warm_restarts=0)
    with pytest.raises(ConfigError):
        JointGpConfig(dispersion_floor_factor=0.0)
