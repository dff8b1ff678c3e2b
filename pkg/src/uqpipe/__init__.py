"""Uncertainty quantification for expensive simulators.

Space-filling designs, kernel-based screening, joint Gaussian-process
metamodels with a dispersion component, Sobol' indices and quantile
estimation, plus a command line pipeline tying the stages together.

Submodules load lazily: importing :mod:`uqpipe` is cheap, and the
command line entry point can configure the numerical environment before
any array library is pulled in.
"""
from __future__ import annotations

from importlib import import_module

__version__ = "0.1.0"

_EXPORTS = {
    # errors
    "UqpipeError": ".errors",
    "ConfigError": ".errors",
    "DataError": ".errors",
    "NumericalError": ".errors",
    # input space
    "InputSpace": ".input_space",
    "Marginal": ".input_space",
    "uniform_space": ".input_space",
    # data
    "LearningSample": ".data",
    "ingest_sample": ".data",
    "read_matrix_csv": ".data",
    "write_matrix_csv": ".data",
    # designs
    "DesignMatrix": ".design",
    "lhs": ".design",
    "optimize_lhs": ".design",
    "optimized_lhs": ".design",
    "centered_l2_discrepancy": ".design",
    # screening
    "HsicKernelConfig": ".screening",
    "hsic": ".screening",
    "r2_hsic": ".screening",
    "permutation_test": ".screening",
    "gamma_test": ".screening",
    "InputScreening": ".screening",
    "ScreeningReport": ".screening",
    "screen": ".screening",
    # gp engine
    "KernelParams": ".gp_core",
    "NuggetSpec": ".gp_core",
    "GpModel": ".gp_core",
    "matern52_correlation": ".gp_core",
    "negative_log_likelihood": ".gp_core",
    "fit_gp": ".gp_core",
    # joint model
    "JointGpConfig": ".joint_gp",
    "JointGpModel": ".joint_gp",
    "BuildStep": ".joint_gp",
    "BuildTrace": ".joint_gp",
    "build_joint": ".joint_gp",
    # validation
    "q2": ".validation",
    "loo_q2": ".validation",
    "CoverageCurve": ".validation",
    "coverage_curve": ".validation",
    # sensitivity
    "space_sampler": ".sensitivity",
    "sobol_first": ".sensitivity",
    "sobol_second": ".sensitivity",
    "sobol_total_pii": ".sensitivity",
    "variance_decomposition": ".sensitivity",
    "total_index_eps": ".sensitivity",
    "dispersion_sensitivity": ".sensitivity",
    "IndexEstimate": ".sensitivity",
    "SobolReport": ".sensitivity",
    "compute_sobol": ".sensitivity",
    # quantiles
    "empirical_quantile": ".quantile",
    "bootstrap_quantile_ci": ".quantile",
    "plugin_quantile": ".quantile",
    "fullgp_quantile": ".quantile",
    "FullGpQuantile": ".quantile",
    "QuantileEstimate": ".quantile",
    "QuantileReport": ".quantile",
    "compute_quantiles": ".quantile",
    # benchmarks
    "BenchFunction": ".bench",
    "get_benchmark": ".bench",
    "ishigami": ".bench",
    "ishigami_sobol": ".bench",
    "g_function": ".bench",
    "g_function_sobol": ".bench",
    "hetero_ishigami": ".bench",
    "hetero_ishigami_decomposition": ".bench",
    "brute_force_quantile": ".bench",
    # pipeline
    "RunConfig": ".pipeline",
    "PipelineRun": ".pipeline",
    "load_config": ".pipeline",
    "config_hash": ".pipeline",
    "run_pipeline": ".pipeline",
}

__all__ = ["__version__", *sorted(_EXPORTS)]


def __getattr__(name: str):
    try:
        module = _EXPORTS[name]
    except KeyError:
        raise AttributeError(
            f"module {__name__!r} has no attribute {name!r}"
        ) from None
    value = getattr(import_module(module, __name__), name)
    globals()[name] = value
    return value


def __dir__():
    return sorted(set(globals()) | set(_EXPORTS))
