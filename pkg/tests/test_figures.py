"""Tests for the figure rendering helpers.

Figures are rendered from report objects built by hand, so these tests
stay fast and independent of any model fitting.  What matters here is
that every plotting function produces a real PNG file at the requested
path, renders byte-identically when called twice (the pipeline relies
on that for reproducible run directories), and closes its figure.
"""

import numpy as np
import pytest

import matplotlib.pyplot as plt

from uqpipe.figures import (
    plot_build_trace,
    plot_coverage,
    plot_predicted_vs_observed,
    plot_quantile,
    plot_screening,
    plot_sobol,
)
from uqpipe.joint_gp import BuildStep, BuildTrace
from uqpipe.quantile import QuantileEstimate, QuantileReport
from uqpipe.screening import InputScreening, ScreeningReport
from uqpipe.sensitivity import IndexEstimate, SobolReport
from uqpipe.validation import CoverageCurve

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def make_screening_report() -> ScreeningReport:
    rows = (
        InputScreening(index=0, name="x1", r2_hsic=0.42, p_value=0.001,
                       selected=True, rank=1),
        InputScreening(index=1, name="x2", r2_hsic=0.17, p_value=0.02,
                       selected=True, rank=2),
        InputScreening(index=2, name="x3", r2_hsic=0.01, p_value=0.61,
                       selected=False, rank=None),
    )
    return ScreeningReport(inputs=rows, alpha=0.1, method="permutation")


def make_build_trace() -> BuildTrace:
    steps = (
        BuildStep(step=1, input_index=0, input_name="x1", loo_q2=0.55),
        BuildStep(step=2, input_index=1, input_name="x2", loo_q2=0.81),
        BuildStep(step=3, input_index=2, input_name="x3", loo_q2=0.93),
    )
    return BuildTrace(steps=steps)


def make_coverage_curves() -> dict:
    alphas = tuple(np.round(np.arange(0.05, 1.0, 0.05), 2))
    homo = tuple(min(1.0, a * 1.1) for a in alphas)
    hetero = tuple(min(1.0, a * 1.02) for a in alphas)
    return {
        "homoscedastic": CoverageCurve(alphas=alphas, observed=homo),
        "heteroscedastic": CoverageCurve(alphas=alphas, observed=hetero),
    }


def make_sobol_report() -> SobolReport:
    def idx(kind, inputs, names, estimate, se):
        return IndexEstimate(kind=kind, inputs=inputs, names=names,
                             estimate=estimate, std_error=se)

    first = (
        idx("first", (0,), ("x1",), 0.31, 0.01),
        idx("first", (1,), ("x2",), 0.44, 0.01),
        idx("first", (2,), ("x3",), -0.002, 0.005),
    )
    second = (
        idx("second", (0, 2), ("x1", "x3"), 0.24, 0.02),
    )
    total = (
        idx("total", (0,), ("x1",), 0.56, 0.01),
        idx("total", (1,), ("x2",), 0.44, 0.01),
        idx("total", (2,), ("x3",), 0.24, 0.01),
    )
    s_t_eps = idx("total", (), (), 0.03, 0.002)
    return SobolReport(first=first, second=second, total_pii=total,
                       s_t_eps=s_t_eps, var_y_empirical=13.2,
                       var_y_metamodel=13.5, var_mean_component=13.1,
                       mean_dispersion_component=0.4, mc_size=10_000)


def make_quantile_report() -> QuantileReport:
    entries = (
        QuantileEstimate(method="empirical", estimate=7.9, ci_low=7.5,
                         ci_high=8.4, ci_level=0.90),
        QuantileEstimate(method="plugin_homo", estimate=7.2),
        QuantileEstimate(method="plugin_hetero", estimate=7.3),
        QuantileEstimate(method="fullgp_homo", estimate=8.0, ci_low=7.7,
                         ci_high=8.3, ci_level=0.90),
        QuantileEstimate(method="fullgp_hetero", estimate=7.95, ci_low=7.8,
                         ci_high=8.1, ci_level=0.90),
    )
    return QuantileReport(p=0.95, entries=entries, n_mc=10_000,
                          n_points=500, n_traj=300, n_bootstrap=500,
                          ci_level=0.90)


RENDERERS = {
    "screening": lambda path: plot_screening(make_screening_report(), path),
    "build_trace": lambda path: plot_build_trace(make_build_trace(), path),
    "coverage": lambda path: plot_coverage(make_coverage_curves(), path),
    "sobol": lambda path: plot_sobol(make_sobol_report(), path),
    "quantile": lambda path: plot_quantile(make_quantile_report(), path),
    "pred_vs_obs": lambda path: plot_predicted_vs_observed(
        np.linspace(-1.0, 3.0, 40),
        np.linspace(-1.0, 3.0, 40) + 0.05 * np.sin(np.arange(40)),
        path,
    ),
}


@pytest.mark.parametrize("name", sorted(RENDERERS))
def test_renders_valid_png(tmp_path, name):
    path = tmp_path / f"{name}.png"
    out = RENDERERS[name](path)
    assert out == path
    assert path.exists()
    data = path.read_bytes()
    assert data[: len(PNG_MAGIC)] == PNG_MAGIC
    assert len(data) > 1000  # a real plot, not an empty canvas


@pytest.mark.parametrize("name", sorted(RENDERERS))
def test_render_is_byte_deterministic(tmp_path, name):
    p1 = tmp_path / "a.png"
    p2 = tmp_path / "b.png"
    RENDERERS[name](p1)
    RENDERERS[name](p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_figures_are_closed_after_save(tmp_path):
    before = plt.get_fignums()
    for i, (name, render) in enumerate(sorted(RENDERERS.items())):
        render(tmp_path / f"fig{i}.png")
    assert plt.get_fignums() == before


def test_creates_parent_directories(tmp_path):
    path = tmp_path / "deep" / "nested" / "fig.png"
    plot_build_trace(make_build_trace(), path)
    assert path.exists()
