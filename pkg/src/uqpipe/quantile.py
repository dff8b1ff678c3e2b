"""High-quantile estimation on the metamodel, with confidence intervals.

Three families of estimators for an output quantile (default the 95th
percentile):

- the empirical order statistic of the learning outputs, with a
  bootstrap percentile confidence interval;
- plug-in estimates: the same order statistic applied to mean
  predictions over a large input sample (cheap, but blind to both
  metamodel uncertainty and dispersion);
- full conditional-simulation estimates: joint posterior trajectories
  of the metamodel over a dense input sample, optionally with the
  predicted dispersion added on the diagonal, yielding one quantile per
  trajectory; their average is the estimate and their central spread an
  interval that reflects metamodel uncertainty.

The order-statistic convention is the inverse-CDF form: the quantile of
``n`` values at level ``p`` is the ``ceil(n p)``-th smallest.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import LearningSample
from .errors import ConfigError, DataError
from .gp_core import GpModel
from .joint_gp import JointGpModel
from .sensitivity import DEFAULT_MC_SIZE, _as_mean_function, _check_mc_size
from .utils import derive_seed

DEFAULT_PROBABILITY = 0.95
DEFAULT_SIM_POINTS = 2000
DEFAULT_TRAJECTORIES = 1000
MIN_TRAJECTORIES = 200
MIN_QUANTILE_BOOTSTRAP = 500
DEFAULT_CI_LEVEL = 0.90
# Bootstrap resamples are drawn in blocks bounded by this many entries
# so large samples do not allocate a huge index matrix at once.
_BOOTSTRAP_BLOCK = 2_000_000


def _check_probability(p: float):
    if not 0.0 < p < 1.0:
        raise ConfigError(f"probability level must be in (0, 1), got {p}")


def _order_index(n: int, p: float) -> int:
    return math.ceil(n * p) - 1


def empirical_quantile(ys, p: float) -> float:
    """Empirical quantile: the ``ceil(n p)``-th order statistic.

    Parameters
    ----------
    ys : array_like of shape (n,)
        Finite sample values, n >= 1.
    p : float
        Probability level in (0, 1).

    Returns
    -------
    float
    """
    _check_probability(p)
    ys = np.asarray(ys, dtype=float).ravel()
    if ys.size == 0:
        raise DataError("cannot take a quantile of an empty sample")
    if not np.all(np.isfinite(ys)):
        raise DataError("sample values must be finite")
    k = _order_index(ys.size, p)
    return float(np.partition(ys, k)[k])


def bootstrap_quantile_ci(ys, p: float,
                          n_bootstrap: int = MIN_QUANTILE_BOOTSTRAP,
                          level: float = DEFAULT_CI_LEVEL,
                          seed: int = 0):
    """Percentile bootstrap interval for the empirical quantile.

    Resamples the values with replacement, recomputes the empirical
    quantile each time, and returns the central ``level`` range of the
    resampled quantiles.  Deterministic per seed.

    Parameters
    ----------
    ys : array_like of shape (n,)
    p : float
        Probability level of the quantile.
    n_bootstrap : int
        Number of resamples, at least ``MIN_QUANTILE_BOOTSTRAP``.
    level : float
        Confidence level of the interval, in (0, 1).
    seed : int

    Returns
    -------
    (lo, hi) : tuple of float
    """
    _check_probability(p)
    if not 0.0 < level < 1.0:
        raise ConfigError("confidence level must be in (0, 1)")
    if n_bootstrap < MIN_QUANTILE_BOOTSTRAP:
        raise ConfigError(
            f"quantile bootstrap needs at least {MIN_QUANTILE_BOOTSTRAP} "
            f"resamples, got {n_bootstrap}"
        )
    ys = np.asarray(ys, dtype=float).ravel()
    if ys.size == 0:
        raise DataError("cannot bootstrap an empty sample")
    if not np.all(np.isfinite(ys)):
        raise DataError("sample values must be finite")
    n = ys.size
    k = _order_index(n, p)
    rng = np.random.default_rng(seed)
    block = max(1, _BOOTSTRAP_BLOCK // n)
    values = np.empty(n_bootstrap)
    done = 0
    while done < n_bootstrap:
        m = min(block, n_bootstrap - done)
        idx = rng.integers(0, n, (m, n))
        values[done:done + m] = np.partition(ys[idx], k, axis=1)[:, k]
        done += m
    lo = empirical_quantile(values, 0.5 * (1.0 - level))
    hi = empirical_quantile(values, 0.5 * (1.0 + level))
    return lo, hi


def plugin_quantile(model, sampler, p: float = DEFAULT_PROBABILITY,
                    n_mc: int = DEFAULT_MC_SIZE, seed: int = 0) -> float:
    """Quantile of mean predictions over a large input sample.

    Fast but biased: it ignores both the metamodel's own uncertainty
    and any dispersion, so it tends to underestimate high quantiles of
    a noisy output.  No confidence interval is attached.

    Parameters
    ----------
    model : fitted model or callable
        Mean predictor, as in the sensitivity estimators.
    sampler : callable
        ``sampler(n, seed) -> (n, d)``.
    p : float
    n_mc : int
        Sample size, at least the Monte Carlo minimum.
    seed : int

    Returns
    -------
    float
    """
    _check_probability(p)
    _check_mc_size(n_mc)
    fn, _ = _as_mean_function(model)
    x = sampler(n_mc, derive_seed(seed, "quantile/plugin/x"))
    values = np.asarray(fn(x), dtype=float).ravel()
    return empirical_quantile(values, p)


@dataclass(frozen=True)
class FullGpQuantile:
    """Conditional-simulation quantile estimate and its spread."""

    estimate: float
    ci_low: float
    ci_high: float
    ci_level: float
    trajectory_quantiles: np.ndarray

    def to_dict(self) -> dict:
        q = self.trajectory_quantiles
        return {
            "estimate": self.estimate,
            "ci": [self.ci_low, self.ci_high],
            "ci_level": self.ci_level,
            "trajectories": {
                "count": int(q.size),
                "mean": float(np.mean(q)),
                "sd": float(np.std(q)),
                "min": float(np.min(q)),
                "max": float(np.max(q)),
            },
        }


def _simulation_stage(model, hetero: bool):
    """Pick the stage GP and the per-point noise for the simulation."""
    if isinstance(model, JointGpModel):
        if hetero:
            gp = model.gp_mean_het
            return gp, lambda pts: model.predict_dispersion(pts)
        gp = model.gp_mean_hom
        value = gp.nugget.value if gp.nugget.kind == "homoscedastic" else 0.0
        return gp, lambda pts: np.full(pts.shape[0], float(value))
    if isinstance(model, GpModel):
        if hetero:
            raise ConfigError(
                "a plain GP carries no dispersion predictor; the "
                "heteroscedastic mode needs a joint model"
            )
        if model.nugget.kind != "homoscedastic":
            raise ConfigError(
                "conditional-simulation quantiles need a homoscedastic "
                "noise model on a plain GP"
            )
        value = float(model.nugget.value)
        return model, lambda pts: np.full(pts.shape[0], value)
    raise ConfigError("model must be a fitted GP or a joint model")


def fullgp_quantile(model, sampler, p: float = DEFAULT_PROBABILITY,
                    n_points: int = DEFAULT_SIM_POINTS,
                    n_traj: int = DEFAULT_TRAJECTORIES, seed: int = 0,
                    hetero: bool = False,
                    ci_level: float = DEFAULT_CI_LEVEL) -> FullGpQuantile:
    """Quantile from joint posterior trajectories of the metamodel.

    Draws an input sample, simulates joint trajectories of the model's
    posterior at those points (noise variance on the diagonal: the
    homoscedastic nugget, or the predicted dispersion in heteroscedastic
    mode), computes the empirical ``p``-quantile of every trajectory,
    and summarizes that quantile distribution: its mean is the estimate
    and its central ``ci_level`` range the interval.

    Parameters
    ----------
    model : GpModel or JointGpModel
    sampler : callable
        ``sampler(n, seed) -> (n, d)`` over the full input space.
    p : float
    n_points : int
        Input-sample size; bounded by the simulation cap.
    n_traj : int
        Trajectories, at least ``MIN_TRAJECTORIES``.
    seed : int
    hetero : bool
        Use the heteroscedastic stage with predicted dispersion on the
        diagonal (joint models only).
    ci_level : float

    Returns
    -------
    FullGpQuantile
    """
    _check_probability(p)
    if not 0.0 < ci_level < 1.0:
        raise ConfigError("confidence level must be in (0, 1)")
    if n_traj < MIN_TRAJECTORIES:
        raise ConfigError(
            f"need at least {MIN_TRAJECTORIES} trajectories for a stable "
            f"quantile distribution, got {n_traj}"
        )
    if n_points < 2:
        raise ConfigError("need at least 2 simulation points")
    gp, noise_fn = _simulation_stage(model, hetero)
    points = np.atleast_2d(np.asarray(
        sampler(n_points, derive_seed(seed, "quantile/points")),
        dtype=float))
    extra = np.asarray(noise_fn(points), dtype=float).ravel()
    active = gp.active_inputs
    if points.shape[1] != len(active):
        points = points[:, active]
    sims = gp.conditional_simulate(points, n_traj=n_traj,
                                   seed=derive_seed(seed, "quantile/sims"),
                                   extra_diag=extra)
    k = _order_index(n_points, p)
    per_traj = np.partition(sims, k, axis=1)[:, k]
    estimate = float(np.mean(per_traj))
    lo = empirical_quantile(per_traj, 0.5 * (1.0 - ci_level))
    hi = empirical_quantile(per_traj, 0.5 * (1.0 + ci_level))
    return FullGpQuantile(estimate=estimate, ci_low=min(lo, estimate),
                          ci_high=max(hi, estimate), ci_level=ci_level,
                          trajectory_quantiles=per_traj)


@dataclass(frozen=True)
class QuantileEstimate:
    """One method's quantile estimate, with an interval when available."""

    method: str
    estimate: float
    ci_low: float | None = None
    ci_high: float | None = None
    ci_level: float | None = None

    def __post_init__(self):
        parts = (self.ci_low, self.ci_high, self.ci_level)
        have = [v is not None for v in parts]
        if any(have) and not all(have):
            raise ConfigError("interval needs lo, hi and level together")
        if all(have) and not (self.ci_low <= self.estimate <= self.ci_high):
            raise ConfigError("interval must contain the point estimate")

    def to_dict(self) -> dict:
        doc = {"method": self.method, "estimate": self.estimate}
        if self.ci_low is not None:
            doc["ci"] = [self.ci_low, self.ci_high]
            doc["ci_level"] = self.ci_level
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "QuantileEstimate":
        ci = doc.get("ci")
        return cls(method=str(doc["method"]),
                   estimate=float(doc["estimate"]),
                   ci_low=None if ci is None else float(ci[0]),
                   ci_high=None if ci is None else float(ci[1]),
                   ci_level=None if ci is None else float(doc["ci_level"]))


@dataclass(frozen=True)
class QuantileReport:
    """All quantile estimates of a run, with the settings behind them."""

    p: float
    entries: tuple[QuantileEstimate, ...]
    n_mc: int
    n_points: int
    n_traj: int
    n_bootstrap: int
    ci_level: float

    def by_method(self, method: str) -> QuantileEstimate:
        for entry in self.entries:
            if entry.method == method:
                return entry
        raise ConfigError(f"no quantile entry for method {method!r}")

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "settings": {
                "n_mc": self.n_mc,
                "n_points": self.n_points,
                "n_traj": self.n_traj,
                "n_bootstrap": self.n_bootstrap,
                "ci_level": self.ci_level,
            },
            "methods": [e.to_dict() for e in self.entries],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "QuantileReport":
        settings = doc["settings"]
        return cls(p=float(doc["p"]),
                   entries=tuple(QuantileEstimate.from_dict(e)
                                 for e in doc["methods"]),
                   n_mc=int(settings["n_mc"]),
                   n_points=int(settings["n_points"]),
                   n_traj=int(settings["n_traj"]),
                   n_bootstrap=int(settings["n_bootstrap"]),
                   ci_level=float(settings["ci_level"]))


def compute_quantiles(joint: JointGpModel, sampler, sample: LearningSample,
                      p: float = DEFAULT_PROBABILITY,
                      n_mc: int = DEFAULT_MC_SIZE,
                      n_points: int = DEFAULT_SIM_POINTS,
                      n_traj: int = DEFAULT_TRAJECTORIES,
                      n_bootstrap: int = MIN_QUANTILE_BOOTSTRAP,
                      ci_level: float = DEFAULT_CI_LEVEL,
                      seed: int = 0) -> QuantileReport:
    """Estimate the output quantile by every available method.

    Runs, on shared input draws where the methods allow it: the
    empirical estimator on the learning outputs (bootstrap interval),
    plug-in estimators through both mean stages, and conditional-
    simulation estimators in both noise modes.

    Parameters
    ----------
    joint : JointGpModel
    sampler : callable
        ``sampler(n, seed) -> (n, d)`` over the full input space.
    sample : LearningSample
        Learning sample supplying the empirical estimator's outputs.
    p, n_mc, n_points, n_traj, n_bootstrap, ci_level, seed
        As in the individual estimators.

    Returns
    -------
    QuantileReport
    """
    emp = empirical_quantile(sample.y, p)
    lo, hi = bootstrap_quantile_ci(
        sample.y, p, n_bootstrap=n_bootstrap, level=ci_level,
        seed=derive_seed(seed, "quantile/empirical-bootstrap"))
    entries = [QuantileEstimate(method="empirical", estimate=emp,
                                ci_low=min(lo, emp), ci_high=max(hi, emp),
                                ci_level=ci_level)]
    for method, stage in (("plugin_homo", joint.gp_mean_hom),
                          ("plugin_hetero", joint.gp_mean_het)):
        entries.append(QuantileEstimate(
            method=method,
            estimate=plugin_quantile(stage, sampler, p=p, n_mc=n_mc,
                                     seed=seed)))
    for method, hetero in (("fullgp_homo", False), ("fullgp_hetero", True)):
        result = fullgp_quantile(joint, sampler, p=p, n_points=n_points,
                                 n_traj=n_traj, seed=seed, hetero=hetero,
                                 ci_level=ci_level)
        entries.append(QuantileEstimate(
            method=method, estimate=result.estimate, ci_low=result.ci_low,
            ci_high=result.ci_high, ci_level=result.ci_level))
    return QuantileReport(p=float(p), entries=tuple(entries),
                          n_mc=int(n_mc), n_points=int(n_points),
                          n_traj=int(n_traj), n_bootstrap=int(n_bootstrap),
                          ci_level=float(ci_level))
