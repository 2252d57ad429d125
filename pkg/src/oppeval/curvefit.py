"""Block smoothing and four-parameter logistic fitting of prediction series.

The continuous classifier output gets averaged into non-overlapping
8-minute blocks anchored at seizure onset, then a 4PL curve

    f(x) = a / (1 + exp(-b * (x - c))) + d

is fitted by damped Gauss-Newton least squares with an analytic Jacobian.
x runs in minutes since the start of the smoothed window, so a rising
output toward onset fits with b > 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import ValidationError
from .classifier import PredictionSeries

# parameter box constraints (a, b, c, d); c bounds set per-window
A_BOUNDS = (0.05, 1.5)
B_BOUNDS = (1e-4, 10.0)
D_BOUNDS = (-0.25, 0.5)
C_MARGIN_MIN = 120.0

LAMBDA_INIT = 1e-3
LAMBDA_MAX = 1e12
MAX_ITER = 500
REL_TOL = 1e-10


@dataclass
class SmoothedSeries:
    """8-minute block means of a prediction series.

    Blocks are anchored so the final block ends exactly at onset; a partial
    leading block is dropped. Entries are stored oldest first; t_onset_min
    marks each block's midpoint and block_start_min its early edge, both in
    minutes before onset.
    """

    t_onset_min: np.ndarray  # block midpoints, decreasing toward 0
    y: np.ndarray
    block_min: float = 8.0

    def __post_init__(self):
        self.t_onset_min = np.asarray(self.t_onset_min, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)

    def __len__(self) -> int:
        return self.y.size

    @property
    def window_min(self) -> float:
        """Full window length: from the first block's start to onset."""
        return float(self.t_onset_min[0] + self.block_min / 2.0)

    @property
    def block_start_min(self) -> np.ndarray:
        return self.t_onset_min + self.block_min / 2.0

    @property
    def x_min(self) -> np.ndarray:
        """Block midpoints as minutes since window start."""
        return self.window_min - self.t_onset_min


@dataclass
class SigmoidFit:
    a: float
    b: float  # per minute, > 0 for output rising toward onset
    c: float  # inflection point, minutes before onset
    d: float
    rho: float
    converged: bool
    residual_norm: float
    window_min: float = 0.0
    n_blocks: int = 0

    @property
    def c_x(self) -> float:
        """Inflection in window coordinates (minutes since window start)."""
        return self.window_min - self.c

    def evaluate_at_onset_minutes(self, t_onset_min: np.ndarray) -> np.ndarray:
        x = self.window_min - np.asarray(t_onset_min, dtype=np.float64)
        return four_pl(x, self.a, self.b, self.c_x, self.d)


def four_pl(x: np.ndarray, a: float, b: float, c: float, d: float) -> np.ndarray:
    """Evaluate f(x) = a/(1+exp(-b(x-c))) + d with overflow-safe exponentials."""
    z = np.clip(-b * (np.asarray(x, dtype=np.float64) - c), -700, 700)
    return a / (1.0 + np.exp(z)) + d


def four_pl_jacobian(x: np.ndarray, a: float, b: float, c: float, d: float) -> np.ndarray:
    """Analytic Jacobian of the 4PL model, one row per sample, columns (a,b,c,d)."""
    x = np.asarray(x, dtype=np.float64)
    z = np.clip(-b * (x - c), -700, 700)
    s = 1.0 / (1.0 + np.exp(z))
    sd = s * (1.0 - s)
    jac = np.empty((x.size, 4))
    jac[:, 0] = s
    jac[:, 1] = a * sd * (x - c)
    jac[:, 2] = -a * b * sd
    jac[:, 3] = 1.0
    return jac


def smooth(series: PredictionSeries, block_min: float = 8.0) -> SmoothedSeries:
    """Average raw predictions into onset-anchored non-overlapping blocks.

    Block k (k=0 nearest onset) collects entries with t_onset_min in
    (8k, 8(k+1)]. Entries older than the last full block are discarded.
    """
    t = series.t_onset_min
    y = series.y
    span = float(t[0])
    n_blocks = int(math.floor(span / block_min + 1e-9))
    if n_blocks < 1:
        raise ValidationError(
            f"series spans {span:.2f} min, shorter than one {block_min}-min block")

    # block index counted from onset; boundary entries belong to the later block
    idx = np.ceil(t / block_min - 1e-9).astype(int) - 1
    means = np.empty(n_blocks)
    mids = np.empty(n_blocks)
    for k in range(n_blocks):
        sel = idx == k
        if not np.any(sel):
            raise ValidationError(f"no predictions inside block {k} before onset")
        means[k] = y[sel].mean()
        mids[k] = (k + 0.5) * block_min
    order = np.argsort(-mids)  # oldest first
    return SmoothedSeries(t_onset_min=mids[order], y=means[order], block_min=block_min)


def _initial_guess(x: np.ndarray, y: np.ndarray, block_min: float) -> np.ndarray:
    a0 = float(y.max() - y.min())
    d0 = float(y.min())
    half = d0 + a0 / 2.0
    cross = np.nonzero(y >= half)[0]
    c0 = float(x[cross[0]]) if cross.size else float(x[x.size // 2])

    lo_cross = np.nonzero(y >= d0 + 0.25 * a0)[0]
    hi_cross = np.nonzero(y >= d0 + 0.75 * a0)[0]
    if lo_cross.size and hi_cross.size:
        span = float(x[hi_cross[0]] - x[lo_cross[0]])
    else:
        span = block_min
    b0 = 4.0 / max(span, block_min)
    return np.array([a0, b0, c0, d0])


def fit_4pl(sm: SmoothedSeries) -> SigmoidFit:
    """Least-squares 4PL fit via Levenberg-Marquardt with box projection.

    Damping starts at 1e-3, divides by 10 on an accepted step and
    multiplies by 10 on a rejected one; iteration stops when the relative
    residual change drops below 1e-10 or after 500 iterations. Degenerate
    solutions (amplitude or slope pinned at the lower bound, or a stall
    with no acceptable step) come back with converged=False instead of
    raising, so unfittable outputs can be excluded downstream.
    """
    if len(sm) < 8:
        raise ValidationError(f"need at least 8 smoothed blocks to fit, got {len(sm)}")
    x = sm.x_min
    y = sm.y
    window = sm.window_min

    lower = np.array([A_BOUNDS[0], B_BOUNDS[0], -C_MARGIN_MIN, D_BOUNDS[0]])
    upper = np.array([A_BOUNDS[1], B_BOUNDS[1], window + C_MARGIN_MIN, D_BOUNDS[1]])
    params = np.clip(_initial_guess(x, y, sm.block_min), lower, upper)

    resid = four_pl(x, *params) - y
    ssr = float(resid @ resid)
    lam = LAMBDA_INIT
    hit_tol = False
    last_rel_change = np.inf

    for _ in range(MAX_ITER):
        jac = four_pl_jacobian(x, *params)
        jtj = jac.T @ jac
        grad = jac.T @ resid
        stepped = False
        while lam <= LAMBDA_MAX:
            damped = jtj + lam * np.diag(np.diag(jtj) + 1e-12)
            try:
                delta = np.linalg.solve(damped, -grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = np.clip(params + delta, lower, upper)
            trial_resid = four_pl(x, *trial) - y
            trial_ssr = float(trial_resid @ trial_resid)
            if trial_ssr < ssr:
                last_rel_change = (ssr - trial_ssr) / max(ssr, 1e-300)
                params, resid, ssr = trial, trial_resid, trial_ssr
                lam = max(lam / 10.0, 1e-12)
                stepped = True
                break
            lam *= 10.0
        if not stepped:
            break  # stall: no acceptable step at any damping
        if last_rel_change < REL_TOL:
            hit_tol = True
            break

    a, b, c_x, d = params
    degenerate = (a <= A_BOUNDS[0] + 1e-9) or (b <= B_BOUNDS[0] + 1e-9)
    # a stall with essentially zero residual is an exact fit, not a failure
    tiny_ssr = ssr <= 1e-20 * max(1.0, float(y @ y))
    converged = (hit_tol or last_rel_change < 1e-8 or tiny_ssr) and not degenerate

    fit = SigmoidFit(
        a=float(a), b=float(b), c=float(window - c_x), d=float(d),
        rho=float("nan"), converged=bool(converged),
        residual_norm=float(np.sqrt(ssr)), window_min=window, n_blocks=len(sm),
    )
    fit.rho = pearson(sm, fit)
    return fit


def pearson(sm: SmoothedSeries, fit: SigmoidFit) -> float:
    """Pearson correlation between the smoothed output and the fitted curve.

    Evaluated at block midpoints. Returns NaN when either side has zero
    variance, since the coefficient is undefined there.
    """
    predicted = four_pl(sm.x_min, fit.a, fit.b, fit.c_x, fit.d)
    y = sm.y
    sy = y.std()
    sp = predicted.std()
    if sy < 1e-15 or sp < 1e-15:
        return float("nan")
    return float(((y - y.mean()) * (predicted - predicted.mean())).mean() / (sy * sp))
