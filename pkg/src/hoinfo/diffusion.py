"""Variance-preserving noising layer.

The forward process follows the linear-beta variance-preserving SDE: with
beta(t) = beta_min + t * (beta_max - beta_min), the perturbation kernel is

    x_t = alpha_t * x + sigma_t * eps,   eps ~ N(0, I)

with alpha_t = exp(-t^2 (beta_max - beta_min)/4 - t beta_min / 2) and
sigma_t^2 = 1 - alpha_t^2, so unit-variance data stays unit variance at every
time. ``g2 = beta(t)`` is the squared diffusion coefficient that weights the
divergence estimators.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .rng import RngStream

TIME_TABLE_POINTS = 1024


@dataclass(frozen=True)
class DiffusionSchedule:
    beta_min: float = 0.1
    beta_max: float = 20.0
    t_max: float = 1.0
    t_min: float = 1e-5

    def __post_init__(self):
        if not (0.0 < self.t_min < self.t_max):
            raise ValueError("require 0 < t_min < t_max")
        if not (0.0 < self.beta_min <= self.beta_max):
            raise ValueError("require 0 < beta_min <= beta_max")

    def beta(self, t):
        return self.beta_min + t * (self.beta_max - self.beta_min)


@dataclass(frozen=True)
class KernelCoeffs:
    alpha: float
    sigma: float
    g2: float


def coeffs(schedule: DiffusionSchedule, t: float) -> KernelCoeffs:
    """Perturbation-kernel coefficients at time t in [0, t_max]."""
    if not 0.0 <= t <= schedule.t_max:
        raise ValueError(f"t={t} outside [0, {schedule.t_max}]")
    alpha, sigma, g2 = kernel_arrays(schedule, t)
    return KernelCoeffs(alpha=float(alpha), sigma=float(sigma), g2=float(g2))


def kernel_arrays(schedule: DiffusionSchedule, t) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized (alpha, sigma, g2) over an array of times."""
    t = np.asarray(t, dtype=np.float64)
    log_alpha = -0.25 * t * t * (schedule.beta_max - schedule.beta_min) - 0.5 * t * schedule.beta_min
    alpha = np.exp(log_alpha)
    sigma = np.sqrt(np.maximum(1.0 - alpha * alpha, 0.0))
    return alpha, sigma, schedule.beta(t)


def perturb(
    x: np.ndarray, t: float, eps: np.ndarray, schedule: DiffusionSchedule
) -> tuple[np.ndarray, np.ndarray]:
    """Noise x to time t with the given standard-normal draw.

    Returns the perturbed values and the Gaussian-kernel score target
    ``-eps / sigma_t`` used by denoising score matching. ``t`` below the
    schedule floor is rejected to guard the 1/sigma blow-up.
    """
    if t < schedule.t_min:
        raise ValueError(f"t={t} below schedule floor {schedule.t_min}")
    x = np.asarray(x, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != x.shape:
        raise ValueError(f"eps shape {eps.shape} does not match x shape {x.shape}")
    k = coeffs(schedule, t)
    return k.alpha * x + k.sigma * eps, -eps / k.sigma


@lru_cache(maxsize=8)
def _importance_table(schedule: DiffusionSchedule) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Tabulated proposal with density proportional to g^2(t)/sigma^2(t).

    The grid is log-spaced on [t_min, t_max] to resolve the 1/t spike near the
    floor. Cell masses come from the trapezoid rule; draws are made from the
    exact piecewise-constant density those masses imply, so importance weights
    1/q(t) are exact and the weighted estimator is unbiased by construction.
    """
    grid = np.geomspace(schedule.t_min, schedule.t_max, TIME_TABLE_POINTS)
    dens = np.array([coeffs(schedule, float(t)).g2 / max(coeffs(schedule, float(t)).sigma ** 2, 1e-300) for t in grid])
    widths = np.diff(grid)
    masses = 0.5 * (dens[:-1] + dens[1:]) * widths
    total = masses.sum()
    cell_q = masses / total / widths
    cdf = np.concatenate([[0.0], np.cumsum(masses / total)])
    cdf[-1] = 1.0
    return grid, cdf, cell_q


def _importance_draw(schedule: DiffusionSchedule, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    grid, cdf, cell_q = _importance_table(schedule)
    cell = np.clip(np.searchsorted(cdf, u, side="right") - 1, 0, len(cell_q) - 1)
    frac = (u - cdf[cell]) / np.maximum(cdf[cell + 1] - cdf[cell], 1e-300)
    t = grid[cell] + frac * (grid[cell + 1] - grid[cell])
    return t, 1.0 / cell_q[cell]


def draw_times(
    schedule: DiffusionSchedule,
    mode: str,
    rng: RngStream | np.random.Generator,
    shape: tuple[int, ...],
    *,
    stratified: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Times and weights of the given shape; stratification is over the last axis."""
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    u = gen.random(shape)
    if stratified:
        n = shape[-1]
        u = (np.arange(n) + u) / n
    if mode == "uniform":
        span = schedule.t_max - schedule.t_min
        return schedule.t_min + u * span, np.full(shape, span)
    if mode == "importance":
        return _importance_draw(schedule, u)
    raise ValueError(f"unknown time-sampling mode {mode!r}")


def sample_time(
    schedule: DiffusionSchedule, mode: str, rng: RngStream | np.random.Generator
) -> tuple[float, float]:
    """Draw one integration time and its importance weight.

    ``uniform`` draws t ~ U[t_min, t_max] with weight (t_max - t_min);
    ``importance`` draws from the tabulated g^2/sigma^2 proposal with weight
    1/q(t). Either way, mean(weight * f(t)) estimates the integral of f.
    """
    t, w = sample_times(schedule, mode, rng, 1)
    return float(t[0]), float(w[0])


def sample_times(
    schedule: DiffusionSchedule,
    mode: str,
    rng: RngStream | np.random.Generator,
    n: int,
    *,
    stratified: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Vector version of ``sample_time``; optionally stratifies the n draws."""
    return draw_times(schedule, mode, rng, (n,), stratified=stratified)
