"""Space-filling designs on the unit hypercube.

Latin hypercube sampling with uniform jitter inside each stratum, the
centered L2 discrepancy of Hickernell (1998) in closed form, and a
simulated-annealing optimizer that lowers the discrepancy while keeping
the Latin hypercube property (it only swaps stratum assignments within a
column).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .input_space import InputSpace


@dataclass(frozen=True)
class DesignMatrix:
    """A design on the unit hypercube, optionally mapped to physical space.

    Parameters
    ----------
    unit : ndarray of shape (n, d)
        Points in the open unit hypercube.
    physical : ndarray of shape (n, d), optional
        The same points pushed through an input-space transform.
    """

    unit: np.ndarray
    physical: np.ndarray | None = None

    def __post_init__(self):
        unit = np.atleast_2d(np.asarray(self.unit, dtype=float))
        object.__setattr__(self, "unit", unit)
        if self.physical is not None:
            phys = np.atleast_2d(np.asarray(self.physical, dtype=float))
            if phys.shape != unit.shape:
                raise DataError("unit and physical parts differ in shape")
            object.__setattr__(self, "physical", phys)

    @property
    def n(self) -> int:
        return self.unit.shape[0]

    @property
    def dim(self) -> int:
        return self.unit.shape[1]

    def with_physical(self, space: InputSpace) -> "DesignMatrix":
        """Attach physical coordinates through ``space.transform``."""
        return DesignMatrix(unit=self.unit, physical=space.transform(self.unit))


def lhs(n: int, d: int, seed: int) -> DesignMatrix:
    """Latin hypercube design with jittered strata.

    Every one of the ``n`` equal-width strata of each coordinate contains
    exactly one point; the position inside the stratum is uniform.

    Parameters
    ----------
    n : int
        Number of points, positive.
    d : int
        Number of dimensions, positive.
    seed : int
        Seed for the random generator.

    Returns
    -------
    DesignMatrix
        Unit part only.
    """
    if n < 1 or d < 1:
        raise ConfigError("Latin hypercube needs n >= 1 and d >= 1")
    rng = np.random.default_rng(seed)
    u = np.empty((n, d))
    for k in range(d):
        jitter = rng.random(n)
        jitter[jitter == 0.0] = np.nextafter(0.0, 1.0)
        u[:, k] = (rng.permutation(n) + jitter) / n
    return DesignMatrix(unit=u)


def _as_unit_points(design) -> np.ndarray:
    pts = design.unit if isinstance(design, DesignMatrix) else design
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if pts.size == 0:
        raise DataError("empty design")
    if np.any(pts < 0.0) or np.any(pts > 1.0):
        raise DataError("design points must lie in the unit hypercube")
    return pts


def centered_l2_discrepancy(design) -> float:
    """Squared centered L2 discrepancy of a unit-hypercube design.

    Closed form of Hickernell (1998):

    ``(13/12)^d - (2/n) sum_i prod_k f(x_ik)
    + (1/n^2) sum_{i,j} prod_k g(x_ik, x_jk)``

    with ``f(v) = 1 + |v-.5|/2 - |v-.5|^2/2`` and
    ``g(v, w) = 1 + |v-.5|/2 + |w-.5|/2 - |v-w|/2``.

    Parameters
    ----------
    design : DesignMatrix or ndarray of shape (n, d)

    Returns
    -------
    float
        The squared discrepancy (lower is more uniform).
    """
    pts = _as_unit_points(design)
    n, d = pts.shape
    z = np.abs(pts - 0.5)
    term1 = (13.0 / 12.0) ** d
    term2 = (2.0 / n) * np.sum(np.prod(1.0 + 0.5 * z - 0.5 * z * z, axis=1))
    # Pairwise products, one dimension at a time to bound memory.
    cross = np.ones((n, n))
    for k in range(d):
        zk = z[:, k]
        xk = pts[:, k]
        cross *= (1.0 + 0.5 * (zk[:, None] + zk[None, :])
                  - 0.5 * np.abs(xk[:, None] - xk[None, :]))
    term3 = float(np.sum(cross)) / (n * n)
    return float(term1 - term2 + term3)


class _DiscrepancyState:
    """Bookkeeping for O(n*d) discrepancy updates under column swaps."""

    def __init__(self, pts: np.ndarray):
        self.x = pts.copy()
        self.z = np.abs(self.x - 0.5)
        n, d = self.x.shape
        self.n, self.d = n, d
        self.row_prod = np.prod(1.0 + 0.5 * self.z - 0.5 * self.z ** 2,
                                axis=1)
        cross = np.ones((n, n))
        for k in range(d):
            zk = self.z[:, k]
            xk = self.x[:, k]
            cross *= (1.0 + 0.5 * (zk[:, None] + zk[None, :])
                      - 0.5 * np.abs(xk[:, None] - xk[None, :]))
        self.cross = cross
        self.row_sums = cross.sum(axis=1)
        self.sum_cross = float(cross.sum())
        self.sum_row_prod = float(self.row_prod.sum())
        self.term1 = (13.0 / 12.0) ** d

    def value(self) -> float:
        n = self.n
        return float(self.term1 - (2.0 / n) * self.sum_row_prod
                     + self.sum_cross / (n * n))

    def _cross_row(self, i: int) -> np.ndarray:
        zi = self.z[i]
        xi = self.x[i]
        return np.prod(1.0 + 0.5 * (zi[None, :] + self.z)
                       - 0.5 * np.abs(xi[None, :] - self.x), axis=1)

    def propose_swap(self, i: int, j: int, k: int):
        """Delta of the squared discrepancy if rows i, j swap column k."""
        x, z, n = self.x, self.z, self.n
        x[i, k], x[j, k] = x[j, k], x[i, k]
        z[i, k], z[j, k] = z[j, k], z[i, k]
        f_i = 1.0 + 0.5 * z[i, k] - 0.5 * z[i, k] ** 2
        f_j = 1.0 + 0.5 * z[j, k] - 0.5 * z[j, k] ** 2
        # Swapping within one column exchanges the two 1-D factors.
        new_rp_i = self.row_prod[i] / f_j * f_i
        new_rp_j = self.row_prod[j] / f_i * f_j
        new_row_i = self._cross_row(i)
        new_row_j = self._cross_row(j)
        touched_old = (2.0 * (self.row_sums[i] + self.row_sums[j])
                       - (self.cross[i, i] + 2.0 * self.cross[i, j]
                          + self.cross[j, j]))
        touched_new = (2.0 * (new_row_i.sum() + new_row_j.sum())
                       - (new_row_i[i] + 2.0 * new_row_i[j] + new_row_j[j]))
        delta_cross = touched_new - touched_old
        delta_rp = (new_rp_i - self.row_prod[i]) + (new_rp_j
                                                    - self.row_prod[j])
        delta = -(2.0 / n) * delta_rp + delta_cross / (n * n)
        state = (new_rp_i, new_rp_j, new_row_i, new_row_j,
                 delta_rp, delta_cross)
        return delta, state

    def revert_swap(self, i: int, j: int, k: int):
        x, z = self.x, self.z
        x[i, k], x[j, k] = x[j, k], x[i, k]
        z[i, k], z[j, k] = z[j, k], z[i, k]

    def commit_swap(self, i: int, j: int, state):
        new_rp_i, new_rp_j, new_row_i, new_row_j, delta_rp, delta_cross = state
        self.row_sums += (new_row_i - self.cross[i, :])
        self.row_sums += (new_row_j - self.cross[j, :])
        self.cross[i, :] = new_row_i
        self.cross[:, i] = new_row_i
        self.cross[j, :] = new_row_j
        self.cross[:, j] = new_row_j
        self.cross[i, j] = new_row_i[j]
        self.cross[j, i] = new_row_i[j]
        self.row_sums[i] = new_row_i.sum()
        self.row_sums[j] = new_row_j.sum()
        self.sum_row_prod += delta_rp
        self.row_prod[i] = new_rp_i
        self.row_prod[j] = new_rp_j
        self.sum_cross += delta_cross


def optimize_lhs(design: DesignMatrix, iters: int, seed: int) -> DesignMatrix:
    """Lower the centered L2 discrepancy of a design by annealing.

    Moves swap the stratum assignment of two rows within a single column,
    which preserves the Latin hypercube property.  Acceptance follows the
    Metropolis rule under a geometric cooling schedule, and the best
    configuration ever visited is returned.

    Parameters
    ----------
    design : DesignMatrix
        Starting design (unit part is used).
    iters : int
        Number of proposed moves; 0 returns the input unchanged.
    seed : int
        Seed for the proposal and acceptance stream.

    Returns
    -------
    DesignMatrix
        Design whose discrepancy is never above the input's.
    """
    if iters < 0:
        raise ConfigError("iteration budget must be nonnegative")
    pts = _as_unit_points(design)
    n, d = pts.shape
    if iters == 0 or n < 2:
        return DesignMatrix(unit=pts.copy())
    rng = np.random.default_rng(seed)
    state = _DiscrepancyState(pts)
    current = state.value()
    best = current
    best_pts = state.x.copy()

    def draw_move():
        k = int(rng.integers(d))
        i = int(rng.integers(n))
        j = (i + 1 + int(rng.integers(n - 1))) % n
        return i, j, k

    # Probe a few moves to scale the initial temperature.
    probes = []
    for _ in range(min(64, iters)):
        i, j, k = draw_move()
        delta, _ = state.propose_swap(i, j, k)
        state.revert_swap(i, j, k)
        if delta != 0.0:
            probes.append(abs(delta))
    t0 = float(np.median(probes)) if probes else 1e-12 * (1.0 + abs(current))
    cooling = (1e-3) ** (1.0 / iters)
    temp = t0

    for _ in range(iters):
        i, j, k = draw_move()
        delta, swap_state = state.propose_swap(i, j, k)
        accept = delta <= 0.0 or rng.random() < np.exp(-delta / max(temp,
                                                                    1e-300))
        if accept:
            state.commit_swap(i, j, swap_state)
            current += delta
            if current < best:
                best = current
                best_pts = state.x.copy()
        else:
            state.revert_swap(i, j, k)
        temp *= cooling

    # Guard against drift of the incremental value near ties.
    if centered_l2_discrepancy(best_pts) > centered_l2_discrepancy(pts):
        best_pts = pts.copy()
    return DesignMatrix(unit=best_pts)


def optimized_lhs(n: int, d: int, iters: int, restarts: int,
                  seed: int) -> DesignMatrix:
    """Best of several annealed Latin hypercubes.

    Restarts use independent derived seed streams and are merged by
    minimum discrepancy; ties go to the lowest restart index, so the
    result does not depend on evaluation order.

    Parameters
    ----------
    n, d : int
        Design size and dimension.
    iters : int
        Annealing budget per restart (0 skips optimization).
    restarts : int
        Number of independent restarts, positive.
    seed : int
        Master seed for the restart streams.

    Returns
    -------
    DesignMatrix
    """
    if restarts < 1:
        raise ConfigError("restarts must be positive")
    from .utils import derive_seed

    best = None
    best_value = np.inf
    for r in range(restarts):
        start = lhs(n, d, derive_seed(seed, f"lhs/{r}"))
        cand = optimize_lhs(start, iters, derive_seed(seed, f"anneal/{r}"))
        value = centered_l2_discrepancy(cand)
        if value < best_value:
            best, best_value = cand, value
    return best
