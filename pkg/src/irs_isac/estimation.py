"""Maximum-likelihood target direction estimation from cancelled SE echoes.

The estimate is the spatial direction ``theta_IT`` of the target as seen from
the IRS. The reflected path depends on ``theta - theta_BI`` through the RE
response ``q(theta) = a_r(theta - theta_BI)``.

Because the echoes have been projected away from ``a_s(theta_BI)``, the exact
likelihood uses the projected SE response ``P a_s(theta)``. Its concentrated
form is::

    |a_s(theta)^H (Y X^H + Y2 X2^H) q(theta)|^2
    -----------------------------------------------------
    ||P a_s(theta)||^2 * q(theta)^H (X X^H + X2 X2^H) q(theta)

With ``projected=False`` the ``||P a_s||^2`` factor is dropped, which is the
textbook periodogram form for unprojected data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .array import steering
from .channel import PathGains, path_gains
from .scenario import Scenario, wrap_direction


class EstimationError(ValueError):
    pass


@dataclass
class EstimationResult:
    theta_hat: float
    alpha_hat: complex
    objective_peak: float
    grid: float  # grid step used
    refined: bool
    theta_grid: float = math.nan  # pre-refinement grid argmax
    theta_bi: float = 0.0

    @property
    def theta_bar_hat(self) -> float:
        """Estimate relative to the BS direction."""
        return self.theta_hat - self.theta_bi

    @property
    def zeta_hat_deg(self) -> float:
        return math.degrees(math.asin(max(-1.0, min(1.0, self.theta_hat))))


def default_grid_step(s: Scenario) -> float:
    return 2.0 / (8 * max(s.m_re, s.m_se))


def search_grid(step: float) -> np.ndarray:
    """Uniform grid over [-1, 1] leaving half a step free at both ends."""
    n = int(round(2.0 / step))
    return -1.0 + step * (np.arange(n) + 0.5)


@dataclass
class _Objective:
    z: np.ndarray  # (M_s, M) sum of Y X^H blocks
    r: np.ndarray  # (M, M) sum of X X^H blocks
    m_se: int
    m_re: int
    theta_bi: float
    projected: bool = True
    _a_bi: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self._a_bi = steering(self.m_se, self.theta_bi)

    def parts(self, theta):
        """Return (S, den) where the objective is |S|^2 / den."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        a_s = steering(self.m_se, theta)  # (M_s, K)
        q = steering(self.m_re, theta - self.theta_bi)  # (M, K)
        num = np.einsum("ik,ij,jk->k", a_s.conj(), self.z, q)
        den = np.einsum("ik,ij,jk->k", q.conj(), self.r, q).real
        if self.projected:
            leak = np.abs(self._a_bi.conj() @ a_s) ** 2 / self.m_se
            den = den * np.maximum(self.m_se - leak, 0.0)
        return num, den

    def __call__(self, theta) -> np.ndarray:
        num, den = self.parts(theta)
        # den vanishes only where P a_s(theta) does (theta == theta_BI)
        tiny = den <= 1e-12 * self.m_se * self.m_re * float(np.trace(self.r).real)
        return np.where(tiny, 0.0, np.abs(num) ** 2 / np.where(tiny, 1.0, den))


def _build_objective(s, y, x, y2=None, x2=None, projected=True) -> _Objective:
    y = np.asarray(y)
    x = np.asarray(x)
    if y.shape != (s.m_se, x.shape[1]) or x.shape[0] != s.m_re:
        raise ValueError(
            f"echo block {y.shape} and signal block {x.shape} inconsistent with scenario"
        )
    z = y @ x.conj().T
    r = x @ x.conj().T
    if y2 is not None and x2 is not None and np.asarray(x2).shape[1] > 0:
        y2 = np.asarray(y2)
        x2 = np.asarray(x2)
        if y2.shape != (s.m_se, x2.shape[1]) or x2.shape[0] != s.m_re:
            raise ValueError(f"phase II blocks {y2.shape} / {x2.shape} inconsistent")
        z = z + y2 @ x2.conj().T
        r = r + x2 @ x2.conj().T
    return _Objective(z=z, r=r, m_se=s.m_se, m_re=s.m_re, theta_bi=s.theta_bi, projected=projected)


def _search(obj: _Objective, s: Scenario, gains: PathGains | None, step: float | None, refine: bool):
    if step is None:
        step = default_grid_step(s)
    grid = search_grid(step)
    values = obj(grid)
    k = int(np.argmax(values))  # lowest theta on ties
    best_theta, best_val = float(grid[k]), float(values[k])
    theta_grid = best_theta
    refined = False
    if refine and best_val > 0:
        n = len(grid)
        ym, y0, yp = values[(k - 1) % n], values[k], values[(k + 1) % n]
        curv = ym - 2 * y0 + yp
        candidates = []
        if curv < 0:
            candidates.append(theta_grid + 0.5 * step * (ym - yp) / curv)
        res = minimize_scalar(
            lambda t: -float(obj(t)[0]),
            bounds=(theta_grid - step, theta_grid + step),
            method="bounded",
            options={"xatol": 1e-12, "maxiter": 200},
        )
        candidates.append(float(res.x))
        for t in candidates:
            v = float(obj(t)[0])
            if v > best_val:
                best_theta, best_val, refined = t, v, True
    best_theta = float(wrap_direction(best_theta))

    if gains is None:
        gains = path_gains(s)
    num, den = obj.parts(best_theta)
    c = math.sqrt(s.n_bs * s.tx_power_w) * gains.alpha_g
    # alpha_MLE = vec(U)^H vec(Y) / ||vec(U)||^2 evaluated at the estimate
    alpha = complex(num[0] / (c * den[0])) if den[0] > 0 else 0j
    if not obj.projected and den[0] > 0:
        alpha = complex(num[0] / (c * den[0] * s.m_se))
    return EstimationResult(
        theta_hat=best_theta,
        alpha_hat=alpha,
        objective_peak=best_val,
        grid=step,
        refined=refined,
        theta_grid=theta_grid,
        theta_bi=s.theta_bi,
    )


def mle_phase1(
    y: np.ndarray,
    x: np.ndarray,
    s: Scenario,
    *,
    step: float | None = None,
    refine: bool = True,
    projected: bool = True,
    gains: PathGains | None = None,
) -> EstimationResult:
    """Estimate the target direction from the phase I echo block.

    ``y`` is the (M_s, L) cancelled echo block and ``x`` the (M, L) matrix of
    reflection vectors used during the sweep. A grid search over [-1, 1] is
    followed by a 3-point parabolic step and a bounded Brent polish within
    one grid step; the refined point is kept only if it improves the
    objective.
    """
    if not np.any(np.asarray(y)):
        raise EstimationError("no signal energy")
    obj = _build_objective(s, y, x, projected=projected)
    return _search(obj, s, gains, step, refine)


def mle_whole(
    y: np.ndarray,
    x: np.ndarray,
    y2: np.ndarray | None,
    x2: np.ndarray | None,
    s: Scenario,
    *,
    step: float | None = None,
    refine: bool = True,
    projected: bool = True,
    gains: PathGains | None = None,
) -> EstimationResult:
    """Joint estimate from the phase I block and the phase II block.

    ``x2`` holds the transmitted phase II signal (reflection vector times
    data symbols, one column per symbol). With an empty phase II block the
    result equals :func:`mle_phase1`.
    """
    if x2 is None or y2 is None or np.asarray(x2).shape[-1] == 0:
        return mle_phase1(y, x, s, step=step, refine=refine, projected=projected, gains=gains)
    if not (np.any(np.asarray(y)) or np.any(np.asarray(y2))):
        raise EstimationError("no signal energy")
    obj = _build_objective(s, y, x, y2, x2, projected=projected)
    return _search(obj, s, gains, step, refine)


def objective_trace(
    y: np.ndarray,
    x: np.ndarray,
    s: Scenario,
    grid_size: int | None = None,
    y2: np.ndarray | None = None,
    x2: np.ndarray | None = None,
    projected: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Objective sampled on the estimator's search grid (diagnostics)."""
    step = default_grid_step(s) if grid_size is None else 2.0 / grid_size
    grid = search_grid(step)
    obj = _build_objective(s, y, x, y2, x2, projected=projected)
    return grid, obj(grid)
