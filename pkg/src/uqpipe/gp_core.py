"""Gaussian-process regression with a constant trend (universal kriging).

The correlation is an anisotropic product of 1-D Matern 5/2 kernels, one
lengthscale per active input.  The trend coefficient and, for a
homoscedastic nugget, the process variance are profiled out of the
likelihood in closed form; the remaining hyperparameters are optimized in
log space with analytic gradients and multiple starts.  Noise enters as a
nugget: a single value (estimated or fixed) or a fixed per-point variance
vector for heteroscedastic data.

Predictions include the trend-estimation term of universal kriging, and
conditional simulation draws joint trajectories from the posterior.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy import optimize

from .data import LearningSample
from .errors import ConfigError, DataError, NumericalError
from .utils import chol_with_jitter

log = logging.getLogger(__name__)

SQRT5 = np.sqrt(5.0)

LENGTHSCALE_REL_BOUNDS = (1e-2, 1e2)
NUGGET_RATIO_BOUNDS = (1e-8, 1e3)
VARIANCE_REL_BOUNDS = (1e-4, 1e4)
DEFAULT_RESTARTS = 5
MAX_SIMULATION_POINTS = 4096


def matern52(h):
    """1-D Matern 5/2 correlation ``(1 + t + t^2/3) exp(-t)``, t = sqrt5 h.

    Parameters
    ----------
    h : array_like
        Nonnegative scaled distances.

    Returns
    -------
    ndarray or float
        Correlation values in (0, 1].
    """
    t = SQRT5 * np.asarray(h, dtype=float)
    return (1.0 + t + t * t / 3.0) * np.exp(-t)


def matern52_correlation(a, b, lengthscales) -> np.ndarray:
    """Product Matern 5/2 correlation between two point sets.

    Parameters
    ----------
    a : ndarray of shape (na, m)
    b : ndarray of shape (nb, m)
    lengthscales : ndarray of shape (m,)
        Positive per-dimension lengthscales.

    Returns
    -------
    ndarray of shape (na, nb)
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    ls = np.asarray(lengthscales, dtype=float).ravel()
    if np.any(ls <= 0.0) or not np.all(np.isfinite(ls)):
        raise ConfigError("lengthscales must be positive and finite")
    if a.shape[1] != ls.size or b.shape[1] != ls.size:
        raise DataError("points and lengthscales disagree on dimension")
    out = np.ones((a.shape[0], b.shape[0]))
    for k in range(ls.size):
        h = np.abs(a[:, k, None] - b[None, :, k]) / ls[k]
        out *= matern52(h)
    return out


@dataclass(frozen=True)
class KernelParams:
    """Anisotropic Matern 5/2 kernel parameters (smoothness fixed)."""

    lengthscales: np.ndarray
    variance: float

    def __post_init__(self):
        ls = np.asarray(self.lengthscales, dtype=float).ravel()
        object.__setattr__(self, "lengthscales", ls)
        if np.any(ls <= 0.0):
            raise ConfigError("lengthscales must be positive")
        if self.variance < 0.0:
            raise ConfigError("process variance must be nonnegative")


@dataclass(frozen=True)
class NuggetSpec:
    """Noise-variance term added to the covariance diagonal.

    Either a single ``value`` (homoscedastic; possibly estimated during
    the fit) or a fixed per-point ``values`` vector (heteroscedastic).
    """

    kind: str
    value: float | None = None
    values: np.ndarray | None = None
    estimated: bool = False

    def __post_init__(self):
        if self.kind not in ("homoscedastic", "heteroscedastic"):
            raise ConfigError(f"unknown nugget kind {self.kind!r}")
        if self.kind == "homoscedastic":
            if self.value is None or self.value < 0.0:
                raise ConfigError("homoscedastic nugget needs a value >= 0")
        else:
            if self.values is None:
                raise ConfigError("heteroscedastic nugget needs a vector")
            v = np.asarray(self.values, dtype=float).ravel()
            if np.any(v < 0.0) or not np.all(np.isfinite(v)):
                raise ConfigError("per-point noise variances must be >= 0")
            object.__setattr__(self, "values", v)

    def diagonal(self, n: int) -> np.ndarray:
        if self.kind == "homoscedastic":
            return np.full(n, float(self.value))
        if self.values.shape[0] != n:
            raise DataError("noise vector length does not match the sample")
        return self.values


class GpModel:
    """Fitted Gaussian process with cached factorizations.

    Attributes
    ----------
    active_inputs : tuple of int
        Global indices of the inputs the model uses; training points and
        prediction points are expressed in these coordinates only.
    beta : float
        Constant trend estimated by generalized least squares.
    kernel : KernelParams
    nugget : NuggetSpec
    x, y : ndarray
        Training data restricted to the active inputs.
    """

    def __init__(self, active_inputs, x, y, beta, kernel: KernelParams,
                 nugget: NuggetSpec):
        self.active_inputs = tuple(int(i) for i in active_inputs)
        self.x = np.atleast_2d(np.asarray(x, dtype=float))
        self.y = np.asarray(y, dtype=float).ravel()
        self.beta = float(beta)
        self.kernel = kernel
        self.nugget = nugget
        self.jitter = 0.0
        self._factorize()

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def degenerate(self) -> bool:
        return self.kernel.variance == 0.0

    def _factorize(self):
        if self.degenerate:
            self._chol = None
            self._alpha = np.zeros(self.n)
            self._kinv_one = np.zeros(self.n)
            self._one_kinv_one = np.inf
            return
        cov = self.kernel.variance * matern52_correlation(
            self.x, self.x, self.kernel.lengthscales)
        cov[np.diag_indices_from(cov)] += self.nugget.diagonal(self.n)
        self._chol, self.jitter = chol_with_jitter(
            cov, scale=self.kernel.variance)
        resid = self.y - self.beta
        self._alpha = sla.cho_solve((self._chol, True), resid)
        self._kinv_one = sla.cho_solve((self._chol, True), np.ones(self.n))
        self._one_kinv_one = float(self._kinv_one.sum())

    def _cross_cov(self, points: np.ndarray) -> np.ndarray:
        return self.kernel.variance * matern52_correlation(
            points, self.x, self.kernel.lengthscales)

    def _check_points(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != len(self.active_inputs):
            raise DataError(
                f"model uses {len(self.active_inputs)} inputs, points "
                f"have {pts.shape[1]} columns"
            )
        if not np.all(np.isfinite(pts)):
            raise DataError("prediction points must be finite")
        return pts

    def predict_mean(self, points) -> np.ndarray:
        """Posterior mean at ``points`` (fast path, no variance)."""
        pts = self._check_points(points)
        if self.degenerate:
            return np.full(pts.shape[0], self.beta)
        return self.beta + self._cross_cov(pts) @ self._alpha

    def predict(self, points, chunk: int = 8192):
        """Posterior mean and variance at ``points``.

        The variance is the universal-kriging form including the
        trend-estimation term; it excludes the nugget (it describes the
        latent mean, not a new noisy observation).

        Parameters
        ----------
        points : ndarray of shape (n_pts, m)
        chunk : int
            Internal block size bounding memory.

        Returns
        -------
        mean : ndarray of shape (n_pts,)
        var : ndarray of shape (n_pts,)
        """
        pts = self._check_points(points)
        if self.degenerate:
            return (np.full(pts.shape[0], self.beta),
                    np.zeros(pts.shape[0]))
        means = np.empty(pts.shape[0])
        variances = np.empty(pts.shape[0])
        sigma2 = self.kernel.variance
        for lo in range(0, pts.shape[0], chunk):
            block = pts[lo:lo + chunk]
            k = self._cross_cov(block)
            means[lo:lo + block.shape[0]] = self.beta + k @ self._alpha
            t = sla.solve_triangular(self._chol, k.T, lower=True)
            trend = (1.0 - k @ self._kinv_one) ** 2 / self._one_kinv_one
            var = sigma2 - np.sum(t * t, axis=0) + trend
            variances[lo:lo + block.shape[0]] = var
        floor = -1e-8 * sigma2
        if np.any(variances < floor):
            log.debug("clamping predictive variance by up to %g",
                      float(-variances.min()))
        np.clip(variances, 0.0, None, out=variances)
        return means, variances

    def loo(self):
        """Virtual leave-one-out predictions at the training points.

        Uses the closed-form identities on the factorized covariance (no
        refit): with ``Q`` the trend-projected precision, the deleted
        prediction is ``y_i - (Q y)_i / Q_ii`` and its observation-level
        variance is ``1 / Q_ii``.

        Returns
        -------
        means : ndarray of shape (n,)
        variances : ndarray of shape (n,)
        """
        if self.degenerate:
            return np.full(self.n, self.beta), np.zeros(self.n)
        kinv = sla.cho_solve((self._chol, True), np.eye(self.n))
        q = kinv - np.outer(self._kinv_one,
                            self._kinv_one) / self._one_kinv_one
        diag = np.diag(q).copy()
        if np.any(diag <= 0.0):
            raise NumericalError("virtual LOO: projected precision is "
                                 "not positive on the diagonal")
        means = self.y - (q @ self.y) / diag
        return means, 1.0 / diag

    def conditional_simulate(self, points, n_traj: int, seed: int,
                             extra_diag=None,
                             max_points: int = MAX_SIMULATION_POINTS):
        """Joint posterior trajectories at ``points``.

        Draws from the Gaussian posterior of the latent mean via a
        Cholesky factor of the conditional covariance.  ``extra_diag``
        adds independent per-point variance to the diagonal before
        factorization (used for predicted dispersion).

        Parameters
        ----------
        points : ndarray of shape (n_pts, m)
            At most ``max_points`` points.
        n_traj : int
            Number of trajectories, positive.
        seed : int
        extra_diag : ndarray of shape (n_pts,), optional
        max_points : int

        Returns
        -------
        ndarray of shape (n_traj, n_pts)
        """
        pts = self._check_points(points)
        n_pts = pts.shape[0]
        if n_traj < 1:
            raise ConfigError("need at least one trajectory")
        if n_pts > max_points:
            raise ConfigError(
                f"{n_pts} simulation points exceed the cap {max_points}; "
                "raise it explicitly if the cost is intended"
            )
        if extra_diag is not None:
            extra_diag = np.asarray(extra_diag, dtype=float).ravel()
            if extra_diag.shape[0] != n_pts:
                raise DataError("extra_diag length does not match points")
            if np.any(extra_diag < 0.0):
                raise DataError("extra_diag must be nonnegative")
        rng = np.random.default_rng(seed)
        if self.degenerate:
            sims = np.full((n_traj, n_pts), self.beta)
            if extra_diag is not None:
                sims = sims + rng.standard_normal((n_traj, n_pts)) * np.sqrt(
                    extra_diag)[None, :]
            return sims
        sigma2 = self.kernel.variance
        k = self._cross_cov(pts)
        mean = self.beta + k @ self._alpha
        t = sla.solve_triangular(self._chol, k.T, lower=True)
        u = 1.0 - k @ self._kinv_one
        cov = (sigma2 * matern52_correlation(pts, pts,
                                             self.kernel.lengthscales)
               - t.T @ t + np.outer(u, u) / self._one_kinv_one)
        if extra_diag is not None:
            cov[np.diag_indices_from(cov)] += extra_diag
        factor, _ = chol_with_jitter(cov, scale=sigma2)
        z = rng.standard_normal((n_pts, n_traj))
        return (mean[:, None] + factor @ z).T

    def to_dict(self) -> dict:
        """Self-describing document; factorizations rebuild on load."""
        return {
            "active_inputs": list(self.active_inputs),
            "beta": self.beta,
            "kernel": {
                "lengthscales": self.kernel.lengthscales.tolist(),
                "variance": self.kernel.variance,
                "smoothness": 2.5,
            },
            "nugget": {
                "kind": self.nugget.kind,
                "value": self.nugget.value,
                "values": (None if self.nugget.values is None
                           else self.nugget.values.tolist()),
                "estimated": self.nugget.estimated,
            },
            "x": self.x.tolist(),
            "y": self.y.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GpModel":
        kernel = KernelParams(
            lengthscales=np.asarray(doc["kernel"]["lengthscales"]),
            variance=float(doc["kernel"]["variance"]),
        )
        nug = doc["nugget"]
        nugget = NuggetSpec(
            kind=nug["kind"],
            value=nug["value"],
            values=(None if nug["values"] is None
                    else np.asarray(nug["values"])),
            estimated=bool(nug["estimated"]),
        )
        return cls(active_inputs=doc["active_inputs"],
                   x=np.asarray(doc["x"]), y=np.asarray(doc["y"]),
                   beta=float(doc["beta"]), kernel=kernel, nugget=nugget)


# -- likelihood ----------------------------------------------------------


def _dim_terms(dists_k, lengthscale):
    """Correlation factor and its log-lengthscale derivative ratio."""
    t = SQRT5 * dists_k / lengthscale
    poly = 1.0 + t + t * t / 3.0
    corr = poly * np.exp(-t)
    dratio = (t * t / 3.0) * (1.0 + t) / poly
    return corr, dratio


class _Likelihood:
    """Concentrated negative log likelihood with analytic gradient.

    Parametrization is logarithmic.  For a homoscedastic nugget the model
    is ``K = sigma^2 (R + g I)`` and both the trend and ``sigma^2`` are
    profiled in closed form; parameters are ``log(theta)`` and, when the
    nugget is estimated, ``log(g)`` with ``g = tau^2 / sigma^2``.  With a
    fixed per-point noise vector the model is ``K = sigma^2 R + diag(v)``
    and ``log(sigma^2)`` is an explicit parameter (only the trend
    profiles out in that case).
    """

    def __init__(self, x, y, noise_vector=None, fixed_ratio: float = 0.0,
                 estimate_ratio: bool = False):
        self.x = x
        self.y = y
        self.n, self.m = x.shape
        self.dists = np.abs(x[:, None, :] - x[None, :, :]).transpose(2, 0, 1)
        self.noise = noise_vector
        self.fixed_ratio = fixed_ratio
        self.estimate_ratio = estimate_ratio
        self.hetero = noise_vector is not None

    def n_params(self) -> int:
        return self.m + (1 if (self.hetero or self.estimate_ratio) else 0)

    def _correlation(self, theta):
        corr = np.ones((self.n, self.n))
        for k in range(self.m):
            c, _ = _dim_terms(self.dists[k], theta[k])
            corr *= c
        return corr

    def value_and_grad(self, log_params):
        theta = np.exp(log_params[:self.m])
        corr = self._correlation(theta)
        n = self.n
        ones = np.ones(n)
        if self.hetero:
            sigma2 = float(np.exp(log_params[-1]))
            cov = sigma2 * corr
            cov[np.diag_indices_from(cov)] += self.noise
            chol, _ = chol_with_jitter(cov, scale=float(np.mean(
                np.diag(cov))))
        else:
            g = (float(np.exp(log_params[-1])) if self.estimate_ratio
                 else self.fixed_ratio)
            cov = corr.copy()
            cov[np.diag_indices_from(cov)] += g
            chol, _ = chol_with_jitter(cov, scale=1.0 + g)
        white = sla.solve_triangular(chol, np.column_stack([self.y, ones]),
                                     lower=True)
        wy, w1 = white[:, 0], white[:, 1]
        beta = float(wy @ w1) / float(w1 @ w1)
        resid_white = wy - beta * w1
        quad = float(resid_white @ resid_white)
        logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
        alpha = sla.solve_triangular(chol, resid_white, lower=True,
                                     trans="T")
        kinv = sla.cho_solve((chol, True), np.eye(n))
        grad = np.empty(self.n_params())
        if self.hetero:
            nll = 0.5 * (n * np.log(2.0 * np.pi) + logdet + quad)
            for k in range(self.m):
                _, dratio = _dim_terms(self.dists[k], theta[k])
                dcov = sigma2 * corr * dratio
                grad[k] = 0.5 * (np.sum(kinv * dcov)
                                 - alpha @ (dcov @ alpha))
            dcov = sigma2 * corr
            grad[-1] = 0.5 * (np.sum(kinv * dcov) - alpha @ (dcov @ alpha))
            aux = {"beta": beta, "sigma2": sigma2, "theta": theta}
        else:
            sigma2_hat = quad / n
            if sigma2_hat <= 0.0:
                raise NumericalError("profiled variance vanished; the "
                                     "output sample is degenerate")
            nll = 0.5 * (n * np.log(2.0 * np.pi) + n * np.log(sigma2_hat)
                         + logdet + n)
            for k in range(self.m):
                _, dratio = _dim_terms(self.dists[k], theta[k])
                dcov = corr * dratio
                grad[k] = 0.5 * (np.sum(kinv * dcov)
                                 - (alpha @ (dcov @ alpha)) / sigma2_hat)
            if self.estimate_ratio:
                g = float(np.exp(log_params[-1]))
                grad[-1] = 0.5 * g * (np.trace(kinv)
                                      - (alpha @ alpha) / sigma2_hat)
            aux = {"beta": beta, "sigma2": sigma2_hat, "theta": theta,
                   "ratio": (float(np.exp(log_params[-1]))
                             if self.estimate_ratio else self.fixed_ratio)}
        return float(nll), grad, aux


def negative_log_likelihood(params: KernelParams, data: LearningSample,
                            nugget: NuggetSpec,
                            active_inputs=None) -> float:
    """Concentrated negative log likelihood at given kernel parameters.

    The trend (and the process variance, for a homoscedastic nugget) is
    profiled out; the returned value is the full Gaussian NLL evaluated
    at those closed-form optima.

    Parameters
    ----------
    params : KernelParams
        Lengthscales; ``variance`` is used only with a heteroscedastic
        (or fixed positive homoscedastic) nugget, where it cannot be
        profiled.
    data : LearningSample
    nugget : NuggetSpec
    active_inputs : sequence of int, optional
        Defaults to all inputs.

    Returns
    -------
    float
    """
    active = tuple(range(data.dim)) if active_inputs is None \
        else tuple(active_inputs)
    x = data.x[:, active]
    if nugget.kind == "heteroscedastic":
        lik = _Likelihood(x, data.y, noise_vector=nugget.diagonal(data.n))
        pars = np.concatenate([np.log(params.lengthscales),
                               [np.log(params.variance)]])
    elif nugget.estimated or nugget.value == 0.0:
        # Relative-ratio parametrization profiles sigma^2 exactly.
        ratio = 0.0
        if nugget.value and params.variance > 0.0:
            ratio = nugget.value / params.variance
        lik = _Likelihood(x, data.y, fixed_ratio=ratio)
        pars = np.log(params.lengthscales)
    else:
        lik = _Likelihood(x, data.y,
                          noise_vector=np.full(data.n, nugget.value))
        pars = np.concatenate([np.log(params.lengthscales),
                               [np.log(params.variance)]])
    value, _, _ = lik.value_and_grad(pars)
    return value


def _column_ranges(x):
    ranges = x.max(axis=0) - x.min(axis=0)
    if np.any(ranges <= 0.0):
        bad = int(np.flatnonzero(ranges <= 0.0)[0])
        raise DataError(
            f"active input column {bad} is constant; it cannot carry a "
            "lengthscale"
        )
    return ranges


def fit_gp(data: LearningSample, active_inputs=None, nugget="estimate",
           init_lengthscales=None, init_nugget_ratio=None,
           restarts: int = DEFAULT_RESTARTS, seed: int = 0) -> GpModel:
    """Fit a GP by maximum likelihood with multistart optimization.

    Parameters
    ----------
    data : LearningSample
    active_inputs : sequence of int, optional
        Input indices the model may use; defaults to all.
    nugget : "estimate", float or ndarray
        ``"estimate"`` fits a homoscedastic nugget; a float fixes the
        homoscedastic value (0.0 means an interpolating GP); an array of
        per-point variances fixes a heteroscedastic nugget.
    init_lengthscales : ndarray, optional
        Warm start included as the first optimization start.
    init_nugget_ratio : float, optional
        Warm start for the nugget-to-variance ratio (estimated case).
    restarts : int
        Number of multistarts in addition to the warm start; the first is
        a deterministic mid-bounds start, the rest are seeded log-uniform
        draws.  The best final likelihood wins; ties keep the earliest.
    seed : int

    Returns
    -------
    GpModel
    """
    if restarts < 1:
        raise ConfigError("restarts must be positive")
    active = tuple(range(data.dim)) if active_inputs is None \
        else tuple(int(i) for i in active_inputs)
    if len(set(active)) != len(active) or not active:
        raise ConfigError("active inputs must be a nonempty set of indices")
    if any(i < 0 or i >= data.dim for i in active):
        raise ConfigError("active input index out of range")
    x = data.x[:, active]
    y = data.y
    n, m = x.shape
    if n < max(10, 2 * m):
        warnings.warn(
            f"only {n} points for {m} active inputs; the fit may be poor",
            stacklevel=2,
        )

    var_y = float(np.var(y))
    if var_y == 0.0:
        # Constant output: the trend carries everything.
        ranges = x.max(axis=0) - x.min(axis=0)
        ranges[ranges <= 0.0] = 1.0
        if isinstance(nugget, str):
            spec = NuggetSpec(kind="homoscedastic", value=0.0,
                              estimated=True)
        elif np.ndim(nugget) == 0:
            spec = NuggetSpec(kind="homoscedastic", value=float(nugget))
        else:
            spec = NuggetSpec(kind="heteroscedastic",
                              values=np.asarray(nugget, dtype=float))
        return GpModel(active, x, y, beta=float(y[0]),
                       kernel=KernelParams(lengthscales=ranges,
                                           variance=0.0),
                       nugget=spec)

    ranges = _column_ranges(x)
    lo = np.log(LENGTHSCALE_REL_BOUNDS[0] * ranges)
    hi = np.log(LENGTHSCALE_REL_BOUNDS[1] * ranges)

    estimate = isinstance(nugget, str)
    if estimate and nugget != "estimate":
        raise ConfigError(f"unknown nugget mode {nugget!r}")
    hetero_vec = None
    fixed_value = None
    if not estimate:
        if np.ndim(nugget) == 0:
            fixed_value = float(nugget)
            if fixed_value < 0.0:
                raise ConfigError("fixed nugget must be nonnegative")
        else:
            hetero_vec = np.asarray(nugget, dtype=float).ravel()
            if hetero_vec.shape[0] != n:
                raise DataError("noise vector length does not match data")
            if np.any(hetero_vec < 0.0):
                raise ConfigError("noise variances must be nonnegative")

    explicit_variance = hetero_vec is not None or (
        fixed_value is not None and fixed_value > 0.0)
    if explicit_variance:
        noise = hetero_vec if hetero_vec is not None \
            else np.full(n, fixed_value)
        lik = _Likelihood(x, y, noise_vector=noise)
        lo = np.concatenate([lo, [np.log(VARIANCE_REL_BOUNDS[0] * var_y)]])
        hi = np.concatenate([hi, [np.log(VARIANCE_REL_BOUNDS[1] * var_y)]])
    elif estimate:
        lik = _Likelihood(x, y, estimate_ratio=True)
        lo = np.concatenate([lo, [np.log(NUGGET_RATIO_BOUNDS[0])]])
        hi = np.concatenate([hi, [np.log(NUGGET_RATIO_BOUNDS[1])]])
    else:
        lik = _Likelihood(x, y, fixed_ratio=0.0)

    n_params = lik.n_params()
    mid = 0.5 * (lo + hi)
    default = mid.copy()
    default[:m] = np.log(ranges)
    if estimate:
        default[-1] = np.log(1e-2)
    if explicit_variance:
        default[-1] = np.log(var_y)

    starts = []
    if init_lengthscales is not None:
        warm = np.asarray(init_lengthscales, dtype=float).ravel()
        if warm.shape[0] != m:
            raise ConfigError("warm-start lengthscales have wrong length")
        start = default.copy()
        start[:m] = np.log(warm)
        if estimate and init_nugget_ratio is not None:
            start[-1] = np.log(max(init_nugget_ratio,
                                   NUGGET_RATIO_BOUNDS[0]))
        starts.append(np.clip(start, lo, hi))
    starts.append(np.clip(default, lo, hi))
    rng = np.random.default_rng(seed)
    for _ in range(restarts - 1):
        starts.append(lo + rng.random(n_params) * (hi - lo))

    def objective(p):
        value, grad, _ = lik.value_and_grad(p)
        return value, grad

    best = None
    failures = []
    for idx, start in enumerate(starts):
        try:
            res = optimize.minimize(
                objective, start, jac=True, method="L-BFGS-B",
                bounds=list(zip(lo, hi)),
                options={"maxiter": 200},
            )
            value = float(res.fun)
            if not np.isfinite(value):
                raise NumericalError("non-finite likelihood at optimum")
        except (NumericalError, sla.LinAlgError) as exc:
            failures.append(f"start {idx}: {exc}")
            continue
        if best is None or value < best[0]:
            best = (value, res.x)
    if best is None:
        raise NumericalError(
            "all optimization starts failed: " + "; ".join(failures)
        )

    _, _, aux = lik.value_and_grad(best[1])
    theta = aux["theta"]
    if explicit_variance:
        sigma2 = aux["sigma2"]
        if hetero_vec is not None:
            spec = NuggetSpec(kind="heteroscedastic", values=hetero_vec)
        else:
            spec = NuggetSpec(kind="homoscedastic", value=fixed_value)
    else:
        sigma2 = aux["sigma2"]
        ratio = aux.get("ratio", 0.0)
        spec = NuggetSpec(kind="homoscedastic", value=ratio * sigma2,
                          estimated=estimate)
    kernel = KernelParams(lengthscales=theta, variance=sigma2)
    return GpModel(active, x, y, beta=aux["beta"], kernel=kernel,
                   nugget=spec)
