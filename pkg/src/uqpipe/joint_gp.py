"""Joint metamodel: a mean GP and a dispersion GP over selected inputs.

When only a subset of inputs can be carried by the metamodel, the output
seen as a function of that subset is random: the discarded inputs act as
noise whose amplitude varies over the input space.  The joint model
captures both components with a four-stage sequential build:

1. a mean GP with a homoscedastic nugget, grown one ranked input at a
   time with warm-started hyperparameters;
2. a dispersion GP fitted on the squared leave-one-out residuals of
   stage 1;
3. the mean GP refitted with the stage-2 dispersion predictions as a
   fixed per-point (heteroscedastic) nugget;
4. the dispersion GP refitted on the squared residuals of stage 3.

Stage-3 predictions estimate the conditional mean and stage-4
predictions the conditional variance of the output.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LearningSample
from .errors import ConfigError, DataError
from .gp_core import DEFAULT_RESTARTS, GpModel, fit_gp
from .screening import ScreeningReport
from .utils import derive_seed
from .validation import q2

DISPERSION_FLOOR_FACTOR = 1e-6


@dataclass(frozen=True)
class JointGpConfig:
    """Knobs of the sequential build.

    ``restarts`` applies to the first mean fit; later fits also receive
    the previous optimum as a warm start and may use fewer restarts
    (``warm_restarts``).  ``dispersion_floor_factor`` scales the output
    variance to floor dispersion predictions away from zero.
    """

    restarts: int = DEFAULT_RESTARTS
    warm_restarts: int = 2
    dispersion_floor_factor: float = DISPERSION_FLOOR_FACTOR

    def __post_init__(self):
        if self.restarts < 1 or self.warm_restarts < 1:
            raise ConfigError("restart counts must be positive")
        if self.dispersion_floor_factor <= 0.0:
            raise ConfigError("dispersion floor factor must be positive")


@dataclass(frozen=True)
class BuildStep:
    """One step of the sequential inclusion."""

    step: int
    input_index: int
    input_name: str
    loo_q2: float


@dataclass(frozen=True)
class BuildTrace:
    """Per-step record of the sequential mean-GP build."""

    steps: tuple[BuildStep, ...]

    def final_q2(self) -> float:
        return self.steps[-1].loo_q2

    def to_rows(self):
        return [(s.step, s.input_name, s.loo_q2) for s in self.steps]

    def to_dict(self) -> dict:
        return {
            "steps": [
                {
                    "step": s.step,
                    "input_index": s.input_index,
                    "input_name": s.input_name,
                    "loo_q2": s.loo_q2,
                }
                for s in self.steps
            ]
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "BuildTrace":
        return cls(steps=tuple(
            BuildStep(step=int(r["step"]), input_index=int(r["input_index"]),
                      input_name=str(r["input_name"]),
                      loo_q2=float(r["loo_q2"]))
            for r in doc["steps"]
        ))


class JointGpModel:
    """Mean and dispersion predictors over the explanatory inputs.

    Attributes
    ----------
    explanatory : tuple of int
        Selected input indices, in screening rank order.
    residual_inputs : tuple of int
        The remaining indices, treated as unobserved noise drivers.
    gp_mean_hom : GpModel
        Stage-1 mean model (homoscedastic nugget).
    gp_disp_raw : GpModel
        Stage-2 dispersion model.
    gp_mean_het : GpModel
        Stage-3 mean model (heteroscedastic nugget).
    gp_disp : GpModel
        Stage-4 dispersion model; its predictions, floored at
        ``dispersion_floor``, are the dispersion estimates.
    """

    def __init__(self, explanatory, residual_inputs, gp_mean_hom,
                 gp_disp_raw, gp_mean_het, gp_disp,
                 dispersion_floor: float, input_dim: int):
        self.explanatory = tuple(int(i) for i in explanatory)
        self.residual_inputs = tuple(int(i) for i in residual_inputs)
        self.gp_mean_hom = gp_mean_hom
        self.gp_disp_raw = gp_disp_raw
        self.gp_mean_het = gp_mean_het
        self.gp_disp = gp_disp
        self.dispersion_floor = float(dispersion_floor)
        self.input_dim = int(input_dim)

    def _restrict(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] == self.input_dim:
            return pts[:, self.explanatory]
        if pts.shape[1] == len(self.explanatory):
            return pts
        raise DataError(
            f"points must have {self.input_dim} (full) or "
            f"{len(self.explanatory)} (explanatory) columns, got "
            f"{pts.shape[1]}"
        )

    def predict_mean(self, points):
        """Mean-component prediction: mean and variance of stage 3."""
        return self.gp_mean_het.predict(self._restrict(points))

    def predict_dispersion(self, points) -> np.ndarray:
        """Dispersion prediction, floored to stay positive."""
        mean = self.gp_disp.predict_mean(self._restrict(points))
        return np.maximum(mean, self.dispersion_floor)

    def to_dict(self) -> dict:
        return {
            "explanatory": list(self.explanatory),
            "residual_inputs": list(self.residual_inputs),
            "dispersion_floor": self.dispersion_floor,
            "input_dim": self.input_dim,
            "gp_mean_hom": self.gp_mean_hom.to_dict(),
            "gp_disp_raw": self.gp_disp_raw.to_dict(),
            "gp_mean_het": self.gp_mean_het.to_dict(),
            "gp_disp": self.gp_disp.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "JointGpModel":
        return cls(
            explanatory=doc["explanatory"],
            residual_inputs=doc["residual_inputs"],
            gp_mean_hom=GpModel.from_dict(doc["gp_mean_hom"]),
            gp_disp_raw=GpModel.from_dict(doc["gp_disp_raw"]),
            gp_mean_het=GpModel.from_dict(doc["gp_mean_het"]),
            gp_disp=GpModel.from_dict(doc["gp_disp"]),
            dispersion_floor=float(doc["dispersion_floor"]),
            input_dim=int(doc["input_dim"]),
        )


def _squared_loo_residuals(gp: GpModel, y: np.ndarray) -> np.ndarray:
    means, _ = gp.loo()
    return (y - means) ** 2


def build_joint(sample: LearningSample, screening: ScreeningReport,
                config: JointGpConfig = JointGpConfig(),
                seed: int = 0):
    """Sequential four-stage build of the joint metamodel.

    Parameters
    ----------
    sample : LearningSample
        Full learning sample (all inputs).
    screening : ScreeningReport
        Supplies the ranked selected inputs; every selected input is
        included (inclusion order follows the ranking).
    config : JointGpConfig
    seed : int
        Master seed; each fit draws from a derived stream.

    Returns
    -------
    model : JointGpModel
    trace : BuildTrace
        Per-step leave-one-out Q^2 of the growing stage-1 mean GP.
    """
    ranked = screening.selected
    if not ranked:
        raise DataError(
            "screening selected no input; a joint model needs at least one"
        )
    if any(i < 0 or i >= sample.dim for i in ranked):
        raise ConfigError("screening indices exceed the sample dimension")
    names = sample.column_names()
    residual = tuple(i for i in range(sample.dim) if i not in set(ranked))

    steps = []
    warm = None
    warm_ratio = None
    gp_mean_hom = None
    for j, idx in enumerate(ranked, start=1):
        active = ranked[:j]
        init = None
        if warm is not None:
            # Extend the previous optimum with the new column's range.
            col = sample.x[:, idx]
            span = float(col.max() - col.min())
            if span <= 0.0:
                raise DataError(
                    f"selected input {names[idx]!r} is constant"
                )
            init = np.concatenate([warm, [span]])
        gp_mean_hom = fit_gp(
            sample, active_inputs=active, nugget="estimate",
            init_lengthscales=init, init_nugget_ratio=warm_ratio,
            restarts=config.restarts if j == 1 else config.warm_restarts,
            seed=derive_seed(seed, f"joint/mean1/{j}"),
        )
        warm = gp_mean_hom.kernel.lengthscales
        if gp_mean_hom.kernel.variance > 0.0:
            warm_ratio = (gp_mean_hom.nugget.value
                          / gp_mean_hom.kernel.variance)
        loo_means, _ = gp_mean_hom.loo()
        if np.var(sample.y) == 0.0:
            # Constant output: the trend reproduces it exactly.
            step_q2 = 1.0
        else:
            step_q2 = q2(sample.y, loo_means)
        steps.append(BuildStep(step=j, input_index=idx,
                               input_name=names[idx],
                               loo_q2=step_q2))

    var_y = float(np.var(sample.y))
    floor = config.dispersion_floor_factor * var_y

    resid1 = _squared_loo_residuals(gp_mean_hom, sample.y)
    disp_sample = LearningSample(x=sample.x, y=resid1,
                                 names=tuple(names))
    gp_disp_raw = fit_gp(
        disp_sample, active_inputs=ranked, nugget="estimate",
        restarts=config.restarts,
        seed=derive_seed(seed, "joint/disp1"),
    )

    x_sel = sample.x[:, ranked]
    noise = np.maximum(gp_disp_raw.predict_mean(x_sel), floor)
    gp_mean_het = fit_gp(
        sample, active_inputs=ranked, nugget=noise,
        init_lengthscales=gp_mean_hom.kernel.lengthscales,
        restarts=config.warm_restarts,
        seed=derive_seed(seed, "joint/mean2"),
    )

    resid2 = _squared_loo_residuals(gp_mean_het, sample.y)
    gp_disp = fit_gp(
        LearningSample(x=sample.x, y=resid2, names=tuple(names)),
        active_inputs=ranked, nugget="estimate",
        init_lengthscales=gp_disp_raw.kernel.lengthscales,
        restarts=config.warm_restarts,
        seed=derive_seed(seed, "joint/disp2"),
    )

    model = JointGpModel(
        explanatory=ranked, residual_inputs=residual,
        gp_mean_hom=gp_mean_hom, gp_disp_raw=gp_disp_raw,
        gp_mean_het=gp_mean_het, gp_disp=gp_disp,
        dispersion_floor=floor, input_dim=sample.dim,
    )
    return model, BuildTrace(steps=tuple(steps))
