import numpy as np
import pytest
from scipy.stats import qmc

from uqpipe.design import (DesignMatrix, centered_l2_discrepancy, lhs,
                           optimize_lhs, optimized_lhs)
from uqpipe.errors import ConfigError, DataError
from uqpipe.input_space import uniform_space


def is_latin(points: np.ndarray) -> bool:
    n = points.shape[0]
    for k in range(points.shape[1]):
        strata = np.floor(points[:, k] * n).astype(int)
        if sorted(strata) != list(range(n)):
            return False
    return True


def test_single_centered_point_discrepancy():
    # Hand evaluation of the closed form: 13/12 - 2 + 1 = 1/12.
    assert centered_l2_discrepancy(np.array([[0.5]])) == pytest.approx(
        1.0 / 12.0, abs=1e-15)


def test_discrepancy_reflection_symmetry():
    rng = np.random.default_rng(3)
    pts = rng.random((40, 3))
    assert centered_l2_discrepancy(pts) == pytest.approx(
        centered_l2_discrepancy(1.0 - pts), rel=1e-12)


def test_discrepancy_rejects_points_outside_cube():
    with pytest.raises(DataError):
        centered_l2_discrepancy(np.array([[0.2, 1.4]]))
    with pytest.raises(DataError):
        centered_l2_discrepancy(np.empty((0, 2)))


def test_lhs_property_small_and_large():
    assert is_latin(lhs(4, 1, seed=0).unit)
    d = lhs(100, 27, seed=1)
    assert d.unit.shape == (100, 27)
    assert is_latin(d.unit)
    assert np.all(d.unit > 0.0) and np.all(d.unit < 1.0)


def test_lhs_determinism_and_argument_checks():
    assert np.array_equal(lhs(16, 3, seed=9).unit, lhs(16, 3, seed=9).unit)
    with pytest.raises(ConfigError):
        lhs(0, 2, seed=0)
    with pytest.raises(ConfigError):
        lhs(5, 0, seed=0)


def test_lhs_beats_plain_monte_carlo_on_average():
    # Stratification should lower the discrepancy for most seeds.
    n, d = 64, 4
    rng = np.random.default_rng(42)
    wins = 0
    for s in range(40):
        a = centered_l2_discrepancy(lhs(n, d, seed=s).unit)
        b = centered_l2_discrepancy(rng.random((n, d)))
        wins += a < b
    assert wins >= 32


def test_scrambled_sobol_scores_lower_than_random():
    # Derived benchmark: a scrambled low-discrepancy set should beat the
    # mean discrepancy of plain uniform designs.
    n, d = 128, 4
    sob = qmc.Sobol(d, scramble=True, seed=12).random(n)
    ref = centered_l2_discrepancy(sob)
    rng = np.random.default_rng(7)
    rand_mean = np.mean([
        centered_l2_discrepancy(rng.random((n, d))) for _ in range(100)
    ])
    assert ref < rand_mean


def test_optimize_zero_iterations_returns_input():
    start = lhs(20, 3, seed=5)
    out = optimize_lhs(start, iters=0, seed=1)
    assert np.array_equal(out.unit, start.unit)


def test_optimize_never_worsens_and_keeps_lhs():
    for s in range(5):
        start = lhs(30, 4, seed=s)
        out = optimize_lhs(start, iters=400, seed=100 + s)
        assert centered_l2_discrepancy(out) <= centered_l2_discrepancy(start)
        assert is_latin(out.unit)
        assert sorted(out.unit[:, 0]) == sorted(start.unit[:, 0])


def test_optimize_usually_improves():
    improved = 0
    for s in range(20):
        start = lhs(40, 5, seed=s)
        out = optimize_lhs(start, iters=600, seed=1000 + s)
        improved += (centered_l2_discrepancy(out)
                     < centered_l2_discrepancy(start))
    assert improved >= 19


def test_optimize_is_deterministic():
    start = lhs(25, 3, seed=2)
    a = optimize_lhs(start, iters=300, seed=77)
    b = optimize_lhs(start, iters=300, seed=77)
    assert np.array_equal(a.unit, b.unit)


def test_optimized_lhs_restarts():
    d = optimized_lhs(16, 2, iters=200, restarts=3, seed=5)
    assert is_latin(d.unit)
    with pytest.raises(ConfigError):
        optimized_lhs(16, 2, iters=10, restarts=0, seed=5)


def test_with_physical_maps_through_space():
    space = uniform_space(["a", "b"], -2.0, 2.0)
    d = lhs(10, 2, seed=3).with_physical(space)
    assert d.physical.shape == (10, 2)
    assert np.all(d.physical > -2.0) and np.all(d.physical < 2.0)
    assert np.allclose(d.physical, -2.0 + 4.0 * d.unit)


def test_design_matrix_shape_guard():
    with pytest.raises(DataError):
        DesignMatrix(unit=np.zeros((3, 2)), physical=np.zeros((4, 2)))
