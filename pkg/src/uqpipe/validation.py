"""Metamodel validation: predictivity coefficient and coverage curves."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LearningSample
from .errors import ConfigError, DataError
from .input_space import standard_normal_ppf

DEFAULT_ALPHAS = tuple(np.round(np.arange(0.05, 0.951, 0.05), 2)) + (0.99,)


def q2(y_obs, y_pred) -> float:
    """Predictivity coefficient ``1 - sum (y - yhat)^2 / sum (y - ybar)^2``.

    Equals 1 for perfect predictions and 0 for a predictor no better than
    the observed mean; it can be negative.

    Parameters
    ----------
    y_obs, y_pred : array_like of shape (n,)
        Observations and predictions, n >= 2.

    Returns
    -------
    float
    """
    y_obs = np.asarray(y_obs, dtype=float).ravel()
    y_pred = np.asarray(y_pred, dtype=float).ravel()
    if y_obs.shape != y_pred.shape:
        raise DataError("observation and prediction lengths differ")
    if y_obs.shape[0] < 2:
        raise DataError("predictivity needs at least 2 points")
    denom = float(np.sum((y_obs - y_obs.mean()) ** 2))
    if denom == 0.0:
        raise DataError("observations are constant; predictivity undefined")
    return 1.0 - float(np.sum((y_obs - y_pred) ** 2)) / denom


def _loo_means(model, sample: LearningSample | None):
    # Joint models delegate to their final mean stage.
    from .joint_gp import JointGpModel

    if isinstance(model, JointGpModel):
        gp = model.gp_mean_het
    else:
        gp = model
    means, _ = gp.loo()
    y = gp.y if sample is None else sample.y
    if y.shape[0] != means.shape[0]:
        raise DataError("sample size does not match the fitted model")
    return y, means


def loo_q2(model, sample: LearningSample | None = None) -> float:
    """Leave-one-out Q^2 from the closed-form virtual LOO (no refit).

    Parameters
    ----------
    model : GpModel or JointGpModel
        For a joint model the final (heteroscedastic) mean stage is used.
    sample : LearningSample, optional
        Defaults to the model's own training data.

    Returns
    -------
    float
    """
    y, means = _loo_means(model, sample)
    return q2(y, means)


@dataclass(frozen=True)
class CoverageCurve:
    """Observed coverage of central prediction intervals per level."""

    alphas: tuple[float, ...]
    observed: tuple[float, ...]

    def max_deviation(self) -> float:
        a = np.asarray(self.alphas)
        o = np.asarray(self.observed)
        return float(np.max(np.abs(o - a)))

    def to_rows(self):
        return list(zip(self.alphas, self.observed))

    def to_dict(self) -> dict:
        return {"alphas": list(self.alphas), "observed": list(self.observed)}

    @classmethod
    def from_dict(cls, doc: dict) -> "CoverageCurve":
        return cls(alphas=tuple(float(a) for a in doc["alphas"]),
                   observed=tuple(float(o) for o in doc["observed"]))


def _predictive_moments(model, points):
    """Mean and total variance (dispersion included when available)."""
    from .joint_gp import JointGpModel

    if isinstance(model, JointGpModel):
        mean, var = model.predict_mean(points)
        return mean, var + model.predict_dispersion(points)
    mean, var = model.predict(points)
    if model.nugget.kind == "homoscedastic" and model.nugget.value:
        var = var + model.nugget.value
    return mean, var


def coverage_curve(model, test_sample: LearningSample,
                   alphas=DEFAULT_ALPHAS) -> CoverageCurve:
    """Empirical coverage of central Gaussian prediction intervals.

    For each level ``alpha`` the interval is ``mean +/- z sqrt(var)``
    with ``z`` the standard normal quantile of ``(1 + alpha) / 2`` and
    ``var`` the total predictive variance (latent variance plus noise:
    the homoscedastic nugget, or the predicted dispersion for a joint
    model).

    Parameters
    ----------
    model : GpModel or JointGpModel
    test_sample : LearningSample
        Held-out points and observed outputs; joint models expect the
        full input dimension, plain models their active dimension.
    alphas : sequence of float
        Levels in (0, 1), default a 0.05 grid plus 0.99.

    Returns
    -------
    CoverageCurve
    """
    alphas = tuple(float(a) for a in alphas)
    if not alphas or any(not 0.0 < a < 1.0 for a in alphas):
        raise ConfigError("coverage levels must lie in (0, 1)")
    mean, var = _predictive_moments(model, test_sample.x)
    sd = np.sqrt(np.maximum(var, 0.0))
    abs_err = np.abs(test_sample.y - mean)
    observed = []
    for a in alphas:
        z = standard_normal_ppf(0.5 * (1.0 + a))
        observed.append(float(np.mean(abs_err <= z * sd)))
    return CoverageCurve(alphas=alphas, observed=tuple(observed))
