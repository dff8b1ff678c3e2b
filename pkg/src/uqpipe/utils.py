"""Small shared helpers: seed derivation, guarded Cholesky, formatting."""
from __future__ import annotations

import hashlib

import numpy as np
import scipy.linalg as sla

from .errors import NumericalError

# Jitter ladder for near-singular covariance factorizations, relative to
# the mean diagonal of the matrix being factored.
JITTER_START = 1e-10
JITTER_MAX = 1e-4


def derive_seed(master: int, label: str) -> int:
    """Derive a stage seed from a master seed and a stage label.

    The derivation hashes ``"<master>:<label>"`` so that changing the
    settings of one stage never perturbs the random stream of another.

    Parameters
    ----------
    master : int
        Master seed of the run.
    label : str
        Stage label, e.g. ``"design"`` or ``"sobol/first/2"``.

    Returns
    -------
    int
        Seed in ``[0, 2**63)``, suitable for ``numpy.random.default_rng``.
    """
    digest = hashlib.sha256(f"{master}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def chol_with_jitter(mat: np.ndarray, scale: float | None = None):
    """Lower Cholesky factor of ``mat``, adding diagonal jitter if needed.

    Jitter starts at ``1e-10 * scale`` and grows tenfold up to
    ``1e-4 * scale``; beyond that a :class:`NumericalError` is raised.

    Parameters
    ----------
    mat : ndarray
        Symmetric positive (semi-)definite matrix.
    scale : float, optional
        Reference scale for the jitter; defaults to the mean diagonal.

    Returns
    -------
    chol : ndarray
        Lower triangular factor of ``mat + jitter * I``.
    jitter : float
        Amount of jitter that was required (0.0 when none).
    """
    if scale is None:
        scale = float(np.mean(np.diag(mat)))
    if not np.isfinite(scale) or scale <= 0.0:
        scale = 1.0
    try:
        return sla.cholesky(mat, lower=True), 0.0
    except sla.LinAlgError:
        pass
    jitter = JITTER_START * scale
    eye = np.eye(mat.shape[0])
    while jitter <= JITTER_MAX * scale * (1.0 + 1e-12):
        try:
            return sla.cholesky(mat + jitter * eye, lower=True), jitter
        except sla.LinAlgError:
            jitter *= 10.0
    raise NumericalError(
        "Cholesky factorization failed even with jitter up to "
        f"{JITTER_MAX:g} relative to the diagonal scale"
    )


def format_float(x: float) -> str:
    """Format a float with 17 significant digits (lossless round trip)."""
    return format(float(x), ".17g")
