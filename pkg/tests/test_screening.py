import numpy as np
import pytest

from oracles import hsic_double_sum
from uqpipe.data import LearningSample
from uqpipe.errors import ConfigError, DataError
from uqpipe.screening import (HsicKernelConfig, gamma_test, hsic,
                              permutation_test, r2_hsic, screen)


def test_hsic_matches_double_sum_oracle():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(120)
    y = np.sin(x) + 0.3 * rng.standard_normal(120)
    ours = hsic(x, y)
    ref = hsic_double_sum(x, y)
    assert ours == pytest.approx(ref, abs=1e-12)


def test_hsic_symmetric_with_matched_kernels():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(80)
    y = x ** 2 + rng.standard_normal(80)
    cfg = HsicKernelConfig(bandwidth_x=1.0, bandwidth_y=1.0)
    assert hsic(x, y, cfg) == pytest.approx(hsic(y, x, cfg), rel=1e-12)


def test_hsic_nonnegative_and_zero_for_constant():
    rng = np.random.default_rng(2)
    x = rng.standard_normal(60)
    assert hsic(x, np.roll(x, 7)) >= 0.0
    cfg = HsicKernelConfig(bandwidth_y=1.0)
    assert hsic(x, np.zeros(60), cfg) == pytest.approx(0.0, abs=1e-14)


def test_hsic_invariant_under_common_permutation():
    rng = np.random.default_rng(3)
    x = rng.standard_normal(70)
    y = np.cos(x) + 0.1 * rng.standard_normal(70)
    perm = rng.permutation(70)
    assert hsic(x[perm], y[perm]) == pytest.approx(hsic(x, y), rel=1e-12)


def test_hsic_guards():
    with pytest.raises(DataError):
        hsic(np.ones(3), np.ones(3))
    with pytest.raises(DataError):
        hsic(np.ones(10), np.arange(10.0))  # constant x, derived bandwidth
    with pytest.raises(DataError):
        hsic(np.arange(5.0), np.arange(6.0))
    with pytest.raises(ConfigError):
        HsicKernelConfig(bandwidth_x=0.0)


def test_r2_hsic_perfect_dependence_and_range():
    rng = np.random.default_rng(4)
    x = rng.standard_normal(90)
    assert r2_hsic(x, x) == pytest.approx(1.0, abs=1e-10)
    y = rng.standard_normal(90)
    val = r2_hsic(x, y)
    assert 0.0 <= val <= 1.0


def test_r2_hsic_invariant_under_affine_rescaling():
    rng = np.random.default_rng(5)
    x = rng.standard_normal(100)
    y = np.sin(2 * x) + 0.2 * rng.standard_normal(100)
    a = r2_hsic(x, y)
    b = r2_hsic(3.0 * x - 5.0, -0.5 * y + 2.0)
    assert a == pytest.approx(b, rel=1e-10)


def test_permutation_detects_strong_dependence():
    rng = np.random.default_rng(6)
    x = rng.standard_normal(100)
    p = permutation_test(x, x, n_permutations=200, seed=0)
    assert p <= 3.0 / 201.0


def test_permutation_pvalues_uniform_under_null():
    rng = np.random.default_rng(7)
    pvals = []
    for _ in range(200):
        x = rng.standard_normal(60)
        y = rng.standard_normal(60)
        pvals.append(permutation_test(x, y, n_permutations=199, seed=0))
    mean_p = float(np.mean(pvals))
    assert 0.45 < mean_p < 0.55


def test_permutation_guards():
    rng = np.random.default_rng(8)
    x = rng.standard_normal(50)
    with pytest.raises(ConfigError):
        permutation_test(x, x, n_permutations=99)


def test_gamma_matches_levels_under_null():
    rng = np.random.default_rng(9)
    rejections = 0
    for _ in range(200):
        x = rng.standard_normal(200)
        y = rng.standard_normal(200)
        rejections += gamma_test(x, y) < 0.1
    assert 0.05 <= rejections / 200.0 <= 0.15


def test_gamma_power_on_dependence():
    rng = np.random.default_rng(10)
    x = rng.standard_normal(200)
    y = x + 0.1 * rng.standard_normal(200)
    assert gamma_test(x, y) < 1e-6


def test_gamma_small_sample_guard():
    rng = np.random.default_rng(11)
    x = rng.standard_normal(30)
    with pytest.raises(DataError):
        gamma_test(x, x)


def test_gamma_agrees_with_permutation_on_decisions():
    # Both tests should reach the same accept/reject conclusion at the
    # same level on clearly dependent or clearly independent pairs.
    rng = np.random.default_rng(12)
    agree = 0
    trials = 60
    for t in range(trials):
        x = rng.standard_normal(150)
        if t % 2 == 0:
            y = np.sin(x) + 0.4 * rng.standard_normal(150)
        else:
            y = rng.standard_normal(150)
        pg = gamma_test(x, y)
        pp = permutation_test(x, y, n_permutations=200, seed=t)
        agree += (pg < 0.1) == (pp < 0.1)
    assert agree >= int(0.95 * trials) - 1


def _embedded_sample(n, seed, d=6):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, size=(n, d))
    y = 4.0 * x[:, 2] + 0.2 * rng.standard_normal(n)
    return LearningSample(x=x, y=y)


def test_screen_selects_single_active_input():
    sample = _embedded_sample(200, seed=13)
    report = screen(sample, alpha=0.1, method="gamma", seed=0)
    assert report.selected[0] == 2
    assert report.inputs[2].rank == 1
    assert report.inputs[2].p_value < 0.01


def test_screen_ranking_sorted_by_r2():
    rng = np.random.default_rng(14)
    x = rng.uniform(-1.0, 1.0, size=(300, 3))
    y = 5.0 * x[:, 1] + 1.0 * x[:, 0] + 0.1 * rng.standard_normal(300)
    report = screen(LearningSample(x=x, y=y), alpha=0.1, method="gamma")
    sel = report.selected
    assert sel[0] == 1
    r2s = {r.index: r.r2_hsic for r in report.inputs}
    assert all(r2s[a] >= r2s[b] for a, b in zip(sel, sel[1:]))


def test_screen_affine_rescaling_keeps_selection():
    sample = _embedded_sample(150, seed=15)
    scaled = LearningSample(x=sample.x * 100.0 + 3.0, y=sample.y * -0.01)
    a = screen(sample, alpha=0.1, method="gamma")
    b = screen(scaled, alpha=0.1, method="gamma")
    assert a.selected == b.selected
    for ra, rb in zip(a.inputs, b.inputs):
        assert ra.r2_hsic == pytest.approx(rb.r2_hsic, rel=1e-9)


def test_screen_is_deterministic():
    sample = _embedded_sample(120, seed=16)
    a = screen(sample, alpha=0.1, method="permutation", n_permutations=200,
               seed=42)
    b = screen(sample, alpha=0.1, method="permutation", n_permutations=200,
               seed=42)
    assert a == b


def test_screen_input_validation():
    sample = _embedded_sample(100, seed=17)
    with pytest.raises(ConfigError):
        screen(sample, alpha=1.5)
    with pytest.raises(ConfigError):
        screen(sample, method="bootstrap")
    flat = LearningSample(x=sample.x, y=np.ones(sample.n))
    with pytest.raises(DataError):
        screen(flat)


def test_screen_ishigami_embedded_in_inert_inputs():
    # Ishigami on the first three coordinates of a 10-d uniform space:
    # the two strong inputs must always be kept, the third usually.
    from uqpipe.bench import ishigami

    hits3 = 0
    for s in range(11):
        rng = np.random.default_rng(100 + s)
        x = rng.uniform(-np.pi, np.pi, size=(500, 10))
        y = ishigami(x[:, :3])
        report = screen(LearningSample(x=x, y=y), alpha=0.1, method="gamma")
        sel = set(report.selected)
        assert {0, 1} <= sel
        hits3 += 2 in sel
    assert hits3 >= 6
