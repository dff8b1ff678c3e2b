"""Variance-based sensitivity indices computed through the metamodel.

All Monte Carlo estimators run the (cheap) metamodel predictors, never
the original simulator.  First-order and closed indices use the
pick-and-freeze covariance estimator; total indices use the Jansen
squared-difference form; the unexplained-input group gets a total index
from the dispersion component.  Standard errors come from a bootstrap
over the pick-and-freeze rows, and every estimate is deterministic given
the seed.

Two denominators appear and are reported explicitly: first- and
second-order indices are normalized by the full output variance (mean
component plus expected dispersion), total indices of explanatory
inputs by the variance of the mean component alone.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LearningSample
from .errors import ConfigError
from .gp_core import GpModel
from .joint_gp import JointGpModel
from .screening import (HsicKernelConfig, InputScreening, ScreeningReport,
                        screen)
from .utils import derive_seed

MIN_MC_SIZE = 10_000
DEFAULT_MC_SIZE = 100_000
DEFAULT_BOOTSTRAP = 200
# A dispersion field never exceeding this multiple of the numerical
# floor is interpolation noise, not structure; screening it would only
# report artifacts of the clipping.
FLAT_DISPERSION_FACTOR = 10.0


def space_sampler(space):
    """Adapt an input space to the ``sampler(n, seed)`` convention."""

    def draw(n: int, seed: int) -> np.ndarray:
        return space.sample(n, seed)

    return draw


def _as_mean_function(predictor):
    """Normalize a predictor to ``f(points) -> values`` plus its domain.

    Returns the callable and the set of input indices the predictor is
    allowed to see (None when the predictor is a plain function with no
    declared restriction).
    """
    if isinstance(predictor, JointGpModel):
        return (lambda pts: predictor.predict_mean(pts)[0],
                set(predictor.explanatory))
    if isinstance(predictor, GpModel):
        active = predictor.active_inputs

        def fn(pts):
            pts = np.atleast_2d(np.asarray(pts, dtype=float))
            if pts.shape[1] != len(active):
                pts = pts[:, active]
            return predictor.predict_mean(pts)

        return fn, set(active)
    if callable(predictor):
        return predictor, None
    raise ConfigError(
        "predictor must be a fitted model or a callable on input points"
    )


def _check_mc_size(n_mc: int):
    if n_mc < MIN_MC_SIZE:
        raise ConfigError(
            f"Monte Carlo size {n_mc} is below the minimum {MIN_MC_SIZE}; "
            "index estimates would be too noisy to report"
        )


def _check_subset(u, allowed, dim):
    u = tuple(int(i) for i in u)
    if not u or len(set(u)) != len(u):
        raise ConfigError("input subset must be nonempty without repeats")
    if any(i < 0 or i >= dim for i in u):
        raise ConfigError("input index out of range for the sampled space")
    if allowed is not None and not set(u) <= allowed:
        missing = sorted(set(u) - allowed)
        raise ConfigError(
            f"inputs {missing} are outside the metamodel's explanatory "
            "set; indices can only be estimated for inputs the mean "
            "component depends on"
        )
    return u


class _PickFreezeCache:
    """Two base samples plus memoized evaluations of their mixtures.

    ``mixed(u)`` evaluates the predictor on the matrix whose columns in
    ``u`` come from the first base sample and all others from the
    second, so outputs share exactly the coordinates in ``u`` with the
    first sample's outputs.  ``flipped(k)`` is the complementary mixture
    used by the Jansen total-index form.  Sharing one cache across many
    indices gives common random numbers and reuses evaluations.
    """

    def __init__(self, fn, sampler, n_mc: int, seed: int,
                 expected_dim: int | None = None):
        self.fn = fn
        self.n_mc = int(n_mc)
        self.a = np.atleast_2d(np.asarray(
            sampler(n_mc, derive_seed(seed, "pick-freeze/a")), dtype=float))
        self.b = np.atleast_2d(np.asarray(
            sampler(n_mc, derive_seed(seed, "pick-freeze/b")), dtype=float))
        if self.a.shape != self.b.shape or self.a.shape[0] != self.n_mc:
            raise ConfigError("sampler returned inconsistent sample shapes")
        self.dim = self.a.shape[1]
        if expected_dim is not None and self.dim != expected_dim:
            raise ConfigError(
                f"sampler draws {self.dim} columns, the model expects "
                f"{expected_dim}"
            )
        self.y_a = np.asarray(fn(self.a), dtype=float).ravel()
        self.y_b = np.asarray(fn(self.b), dtype=float).ravel()
        self._mixed: dict[tuple[int, ...], np.ndarray] = {}
        self._flipped: dict[int, np.ndarray] = {}

    def pooled_variance(self) -> float:
        return float(np.var(np.concatenate([self.y_a, self.y_b])))

    def mixed(self, u) -> np.ndarray:
        key = tuple(sorted(u))
        if key not in self._mixed:
            pts = self.b.copy()
            pts[:, key] = self.a[:, key]
            self._mixed[key] = np.asarray(self.fn(pts),
                                          dtype=float).ravel()
        return self._mixed[key]

    def flipped(self, k: int) -> np.ndarray:
        if k not in self._flipped:
            pts = self.a.copy()
            pts[:, k] = self.b[:, k]
            self._flipped[k] = np.asarray(self.fn(pts),
                                          dtype=float).ravel()
        return self._flipped[k]


def _closed_numerator(y_a, y_u):
    center = float(np.mean(0.5 * (y_a + y_u)))
    return float(np.mean(y_a * y_u)) - center * center


def _pick_freeze_denominator(y_a, y_u):
    center = float(np.mean(0.5 * (y_a + y_u)))
    return float(np.mean(0.5 * (y_a * y_a + y_u * y_u))) - center * center


def _bootstrap_se(replicate, n_rows, n_bootstrap, seed):
    """Standard error of an estimator over row resamples.

    ``replicate`` maps an index vector to the estimate on that resample;
    rows are resampled jointly so paired evaluations stay paired.
    """
    if n_bootstrap < 2:
        raise ConfigError("bootstrap needs at least 2 replicates")
    rng = np.random.default_rng(seed)
    values = np.empty(n_bootstrap)
    for b in range(n_bootstrap):
        idx = rng.integers(0, n_rows, n_rows)
        values[b] = replicate(idx)
    return float(np.std(values, ddof=1))


def _first_from_cache(cache, u, var_y, n_bootstrap, seed):
    y_a = cache.y_a
    y_u = cache.mixed(u)
    if var_y is None:
        den = _pick_freeze_denominator(y_a, y_u)
    else:
        den = float(var_y)
    if den <= 0.0:
        return 0.0, 0.0
    estimate = _closed_numerator(y_a, y_u) / den

    def replicate(idx):
        ya, yu = y_a[idx], y_u[idx]
        d = _pick_freeze_denominator(ya, yu) if var_y is None else den
        if d <= 0.0:
            return 0.0
        return _closed_numerator(ya, yu) / d

    label = "pick-freeze/bootstrap/first/" + "-".join(str(i)
                                                      for i in sorted(u))
    se = _bootstrap_se(replicate, cache.n_mc, n_bootstrap,
                       derive_seed(seed, label))
    return estimate, se


def _total_from_cache(cache, k, var_mean, n_bootstrap, seed):
    y_a = cache.y_a
    y_b = cache.y_b
    y_f = cache.flipped(k)
    sq = (y_a - y_f) ** 2

    def denominator(ya, yb):
        if var_mean is not None:
            return float(var_mean)
        return float(np.var(np.concatenate([ya, yb])))

    den = denominator(y_a, y_b)
    if den <= 0.0:
        return 0.0, 0.0
    estimate = float(np.mean(sq)) / (2.0 * den)

    def replicate(idx):
        d = denominator(y_a[idx], y_b[idx])
        if d <= 0.0:
            return 0.0
        return float(np.mean(sq[idx])) / (2.0 * d)

    se = _bootstrap_se(replicate, cache.n_mc, n_bootstrap,
                       derive_seed(seed, f"pick-freeze/bootstrap/total/{k}"))
    return estimate, se


def _second_from_cache(cache, i, j, var_y, n_bootstrap, seed):
    pair = tuple(sorted((int(i), int(j))))
    y_a = cache.y_a
    y_ij = cache.mixed(pair)
    y_i = cache.mixed((pair[0],))
    y_j = cache.mixed((pair[1],))
    if var_y is None:
        den = _pick_freeze_denominator(y_a, y_ij)
    else:
        den = float(var_y)
    if den <= 0.0:
        return 0.0, 0.0

    def value(idx=None):
        s = slice(None) if idx is None else idx
        ya = y_a[s]
        if var_y is None:
            d = _pick_freeze_denominator(ya, y_ij[s])
            if d <= 0.0:
                return 0.0
        else:
            d = den
        closed = _closed_numerator(ya, y_ij[s]) / d
        singles = (_closed_numerator(ya, y_i[s]) / d
                   + _closed_numerator(ya, y_j[s]) / d)
        return closed - singles

    estimate = value()
    label = f"pick-freeze/bootstrap/second/{pair[0]}-{pair[1]}"
    se = _bootstrap_se(value, cache.n_mc, n_bootstrap,
                       derive_seed(seed, label))
    return estimate, se


def sobol_first(mean_predictor, sampler, u, n_mc: int = DEFAULT_MC_SIZE,
                seed: int = 0, var_y: float | None = None,
                n_bootstrap: int = DEFAULT_BOOTSTRAP):
    """First-order (closed) index of the input subset ``u``.

    Pick-and-freeze covariance estimator: two independent input samples
    are mixed so that only the coordinates in ``u`` are shared, and the
    covariance of the paired outputs estimates the variance explained by
    ``u`` alone (closed index; for a singleton this is the first-order
    index of that input).

    Parameters
    ----------
    mean_predictor : model or callable
        A fitted model (its mean prediction is used) or a plain function
        mapping an ``(n, d)`` array to ``n`` outputs.
    sampler : callable
        ``sampler(n, seed) -> (n, d)`` array of independent input draws.
    u : sequence of int
        Input indices; for a fitted model they must be explanatory.
    n_mc : int
        Monte Carlo size, at least ``MIN_MC_SIZE``.
    seed : int
    var_y : float, optional
        Normalizing variance.  Defaults to the pick-and-freeze variance
        estimate of the predictor output itself; the pipeline passes the
        full output variance (mean component plus expected dispersion).
        A supplied value is treated as fixed by the bootstrap.
    n_bootstrap : int
        Bootstrap replicates behind the standard error.

    Returns
    -------
    estimate : float
        Raw (unclamped) index estimate.
    std_error : float
    """
    _check_mc_size(n_mc)
    fn, allowed = _as_mean_function(mean_predictor)
    cache = _PickFreezeCache(fn, sampler, n_mc, seed)
    u = _check_subset(u, allowed, cache.dim)
    return _first_from_cache(cache, u, var_y, n_bootstrap, seed)


def sobol_second(mean_predictor, sampler, i: int, j: int,
                 n_mc: int = DEFAULT_MC_SIZE, seed: int = 0,
                 var_y: float | None = None,
                 n_bootstrap: int = DEFAULT_BOOTSTRAP):
    """Pure second-order interaction index of inputs ``i`` and ``j``.

    Computed as the closed index of the pair minus both first-order
    indices, all three from the same base samples (common random
    numbers), so the difference is exactly symmetric in ``(i, j)``.

    Parameters are as in :func:`sobol_first`.

    Returns
    -------
    estimate : float
    std_error : float
    """
    _check_mc_size(n_mc)
    if int(i) == int(j):
        raise ConfigError("second-order index needs two distinct inputs")
    fn, allowed = _as_mean_function(mean_predictor)
    cache = _PickFreezeCache(fn, sampler, n_mc, seed)
    _check_subset((i, j), allowed, cache.dim)
    return _second_from_cache(cache, i, j, var_y, n_bootstrap, seed)


def sobol_total_pii(mean_predictor, sampler, k: int,
                    n_mc: int = DEFAULT_MC_SIZE, seed: int = 0,
                    var_mean: float | None = None,
                    n_bootstrap: int = DEFAULT_BOOTSTRAP):
    """Total index of explanatory input ``k`` within the mean component.

    Jansen squared-difference estimator: flipping only column ``k``
    between the two base samples measures everything ``k`` touches,
    interactions included.  The normalization is the variance of the
    mean component itself (``var_mean``, estimated from the base
    samples when not supplied), so the value is a within-explanatory
    total: interactions with the unexplained inputs are excluded by
    construction.

    Returns
    -------
    estimate : float
    std_error : float
    """
    _check_mc_size(n_mc)
    fn, allowed = _as_mean_function(mean_predictor)
    cache = _PickFreezeCache(fn, sampler, n_mc, seed)
    (k,) = _check_subset((k,), allowed, cache.dim)
    return _total_from_cache(cache, k, var_mean, n_bootstrap, seed)


def variance_decomposition(joint: JointGpModel, sampler,
                           n_mc: int = DEFAULT_MC_SIZE, seed: int = 0):
    """Split the output variance into mean and dispersion components.

    The total variance of the output decomposes as the variance of the
    conditional mean plus the expectation of the conditional variance;
    both terms are Monte Carlo averages of the joint model's predictors
    over a fresh input sample.

    Parameters
    ----------
    joint : JointGpModel
    sampler : callable
        ``sampler(n, seed) -> (n, d)``.
    n_mc : int
        At least ``MIN_MC_SIZE``.
    seed : int

    Returns
    -------
    var_mean_component : float
        Variance of the mean-component predictions.
    mean_dispersion_component : float
        Average predicted dispersion.
    var_y : float
        Their sum — the metamodel estimate of the output variance.
    """
    _check_mc_size(n_mc)
    x = sampler(n_mc, derive_seed(seed, "variance/x"))
    mean, _ = joint.predict_mean(x)
    disp = joint.predict_dispersion(x)
    var_mean = float(np.var(mean))
    mean_disp = float(np.mean(disp))
    return var_mean, mean_disp, var_mean + mean_disp


def total_index_eps(joint: JointGpModel, sampler,
                    n_mc: int = DEFAULT_MC_SIZE, seed: int = 0,
                    n_bootstrap: int = DEFAULT_BOOTSTRAP):
    """Total index of the unexplained-input group.

    The inputs the metamodel does not carry act collectively through the
    dispersion component; their total index is the expected dispersion
    divided by the total output variance.  Nonnegative by construction.

    Returns
    -------
    estimate : float
    std_error : float
    """
    _check_mc_size(n_mc)
    x = sampler(n_mc, derive_seed(seed, "variance/x"))
    mean, _ = joint.predict_mean(x)
    disp = joint.predict_dispersion(x)

    def value(idx=None):
        s = slice(None) if idx is None else idx
        var_mean = float(np.var(mean[s]))
        mean_disp = float(np.mean(disp[s]))
        total = var_mean + mean_disp
        if total <= 0.0:
            return 0.0
        return mean_disp / total

    estimate = value()
    se = _bootstrap_se(value, mean.shape[0], n_bootstrap,
                       derive_seed(seed, "variance/bootstrap/eps"))
    return estimate, se


def dispersion_sensitivity(joint: JointGpModel, sample: LearningSample,
                           alpha: float = 0.1, n_permutations: int = 1000,
                           seed: int = 0, method: str = "permutation",
                           config: HsicKernelConfig = HsicKernelConfig()
                           ) -> ScreeningReport:
    """Screen which inputs drive the predicted dispersion.

    Runs the dependence-based screening with the output replaced by the
    dispersion predictions at the learning points.  An input selected
    here potentially interacts with the unexplained group; an input
    rejected here provably has no such interaction (within metamodel
    accuracy).  A dispersion field that never rises meaningfully above
    the numerical floor is treated as flat and selects nothing.

    Parameters
    ----------
    joint : JointGpModel
    sample : LearningSample
        The learning sample (all inputs).
    alpha : float
        Test level.
    n_permutations : int
        Permutation count when ``method="permutation"``.
    seed : int
    method : str
        ``"permutation"`` or ``"gamma"``.
    config : HsicKernelConfig

    Returns
    -------
    ScreeningReport
    """
    disp = joint.predict_dispersion(sample.x)
    names = sample.column_names()
    flat = (np.ptp(disp) == 0.0
            or np.max(disp) <= FLAT_DISPERSION_FACTOR
            * joint.dispersion_floor)
    if flat:
        rows = tuple(
            InputScreening(index=i, name=names[i], r2_hsic=0.0,
                           p_value=1.0, selected=False)
            for i in range(sample.dim)
        )
        return ScreeningReport(inputs=rows, alpha=float(alpha),
                               method=method)
    disp_sample = LearningSample(x=sample.x, y=disp, names=tuple(names))
    return screen(disp_sample, alpha=alpha, method=method,
                  n_permutations=n_permutations,
                  seed=derive_seed(seed, "dispersion-screen"),
                  config=config)


@dataclass(frozen=True)
class IndexEstimate:
    """One sensitivity index with its Monte Carlo standard error."""

    kind: str
    inputs: tuple[int, ...]
    names: tuple[str, ...]
    estimate: float
    std_error: float

    @property
    def clamped(self) -> float:
        """Estimate clipped to [0, 1] for summary display."""
        return min(max(self.estimate, 0.0), 1.0)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "inputs": list(self.inputs),
            "names": list(self.names),
            "estimate": self.estimate,
            "clamped": self.clamped,
            "std_error": self.std_error,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "IndexEstimate":
        return cls(kind=str(doc["kind"]),
                   inputs=tuple(int(i) for i in doc["inputs"]),
                   names=tuple(str(s) for s in doc["names"]),
                   estimate=float(doc["estimate"]),
                   std_error=float(doc["std_error"]))


@dataclass(frozen=True)
class SobolReport:
    """Sensitivity indices of the metamodel, with their normalizations.

    ``first`` and ``second`` are normalized by ``var_y_metamodel`` (the
    variance-identity estimate of the full output variance);
    ``total_pii`` by ``var_mean_component`` alone.  Estimates are stored
    raw; each entry also carries a clamped-to-[0, 1] display value.
    """

    first: tuple[IndexEstimate, ...]
    second: tuple[IndexEstimate, ...]
    total_pii: tuple[IndexEstimate, ...]
    s_t_eps: IndexEstimate
    var_y_empirical: float
    var_y_metamodel: float
    var_mean_component: float
    mean_dispersion_component: float
    mc_size: int

    def to_dict(self) -> dict:
        return {
            "mc_size": self.mc_size,
            "var_y": {
                "empirical": self.var_y_empirical,
                "metamodel": self.var_y_metamodel,
                "mean_component": self.var_mean_component,
                "mean_dispersion": self.mean_dispersion_component,
            },
            "normalization": {
                "first": "var_y_metamodel",
                "second": "var_y_metamodel",
                "total_pii": "var_mean_component",
                "s_t_eps": "var_y_metamodel",
            },
            "first": [e.to_dict() for e in self.first],
            "second": [e.to_dict() for e in self.second],
            "total_pii": [e.to_dict() for e in self.total_pii],
            "s_t_eps": self.s_t_eps.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SobolReport":
        var = doc["var_y"]
        return cls(
            first=tuple(IndexEstimate.from_dict(e) for e in doc["first"]),
            second=tuple(IndexEstimate.from_dict(e) for e in doc["second"]),
            total_pii=tuple(IndexEstimate.from_dict(e)
                            for e in doc["total_pii"]),
            s_t_eps=IndexEstimate.from_dict(doc["s_t_eps"]),
            var_y_empirical=float(var["empirical"]),
            var_y_metamodel=float(var["metamodel"]),
            var_mean_component=float(var["mean_component"]),
            mean_dispersion_component=float(var["mean_dispersion"]),
            mc_size=int(doc["mc_size"]),
        )


def compute_sobol(joint: JointGpModel, sampler, sample: LearningSample,
                  n_mc: int = DEFAULT_MC_SIZE, seed: int = 0,
                  second_order_top: int = 4,
                  n_bootstrap: int = DEFAULT_BOOTSTRAP) -> SobolReport:
    """Full sensitivity summary of a joint metamodel.

    Computes, from one shared pair of base samples (common random
    numbers throughout): first-order and total indices of every
    explanatory input, pure interaction indices among the strongest
    explanatory inputs, the total index of the unexplained group, and
    the variance decomposition backing the normalizations.

    Parameters
    ----------
    joint : JointGpModel
    sampler : callable
        ``sampler(n, seed) -> (n, d)`` over the full input space.
    sample : LearningSample
        Learning sample; provides the empirical output variance and the
        input names.
    n_mc : int
        Predictor evaluations per index, at least ``MIN_MC_SIZE``.
    seed : int
    second_order_top : int
        Interaction pairs are reported among this many of the strongest
        explanatory inputs (by first-order estimate); 0 disables them.
    n_bootstrap : int
        Bootstrap replicates per standard error.

    Returns
    -------
    SobolReport
    """
    _check_mc_size(n_mc)
    if second_order_top < 0:
        raise ConfigError("second_order_top must be nonnegative")
    fn, _ = _as_mean_function(joint)
    cache = _PickFreezeCache(fn, sampler, n_mc, seed,
                             expected_dim=joint.input_dim)
    names = sample.column_names()
    pii = list(joint.explanatory)

    disp = joint.predict_dispersion(cache.a)
    var_mean = cache.pooled_variance()
    mean_disp = float(np.mean(disp))
    var_y_meta = var_mean + mean_disp

    first = []
    for k in pii:
        est, se = _first_from_cache(cache, (k,), var_y_meta, n_bootstrap,
                                    seed)
        first.append(IndexEstimate(kind="first", inputs=(k,),
                                   names=(names[k],), estimate=est,
                                   std_error=se))
    totals = []
    for k in pii:
        est, se = _total_from_cache(cache, k, var_mean, n_bootstrap, seed)
        totals.append(IndexEstimate(kind="total", inputs=(k,),
                                    names=(names[k],), estimate=est,
                                    std_error=se))

    strongest = sorted(first, key=lambda e: (-e.estimate, e.inputs[0]))
    top = [e.inputs[0] for e in strongest[:second_order_top]]
    pairs = sorted((min(i, j), max(i, j))
                   for a, i in enumerate(top) for j in top[a + 1:])
    second = []
    for i, j in pairs:
        est, se = _second_from_cache(cache, i, j, var_y_meta, n_bootstrap,
                                     seed)
        second.append(IndexEstimate(kind="second", inputs=(i, j),
                                    names=(names[i], names[j]),
                                    estimate=est, std_error=se))

    def eps_value(idx=None):
        s = slice(None) if idx is None else idx
        pooled = float(np.var(np.concatenate([cache.y_a[s],
                                              cache.y_b[s]])))
        md = float(np.mean(disp[s]))
        total = pooled + md
        if total <= 0.0:
            return 0.0
        return md / total

    eps_est = eps_value()
    eps_se = _bootstrap_se(eps_value, cache.n_mc, n_bootstrap,
                           derive_seed(seed, "variance/bootstrap/eps"))
    residual_names = tuple(names[i] for i in joint.residual_inputs)
    s_t_eps = IndexEstimate(kind="total_eps",
                            inputs=tuple(joint.residual_inputs),
                            names=residual_names, estimate=eps_est,
                            std_error=eps_se)

    return SobolReport(
        first=tuple(first), second=tuple(second), total_pii=tuple(totals),
        s_t_eps=s_t_eps, var_y_empirical=float(np.var(sample.y)),
        var_y_metamodel=var_y_meta, var_mean_component=var_mean,
        mean_dispersion_component=mean_disp, mc_size=int(n_mc),
    )
