"""Closed-form ground truth for Gaussian systems.

Entropy, total correlation, dual total correlation, S-information,
O-information and its per-variable first differences all follow from log
determinants and Schur complements of the covariance. The module also exposes
exact time-t scores of noised Gaussian laws so the Monte-Carlo estimators can
be validated with no trained network in the loop.

All values are in nats.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffusion import DiffusionSchedule, kernel_arrays
from .linalg import conditional_moments, logdet
from .systems import CovarianceMatrix
from .tasks import ScoreTask, clean_vars, perturbed_vars, validate_task

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class MeasureSet:
    """The four interaction measures of one system, in nats."""

    tc: float
    dtc: float
    s_info: float
    o_info: float

    def __post_init__(self):
        if self.tc < -1e-10 or self.dtc < -1e-10:
            raise ValueError(f"negative interaction measure (tc={self.tc}, dtc={self.dtc})")
        if abs(self.s_info - (self.tc + self.dtc)) > 1e-10:
            raise ValueError("s_info must equal tc + dtc")


def gaussian_entropy(cov_matrix: np.ndarray) -> float:
    """Differential entropy (D/2)(1 + log 2 pi) + log det(cov) / 2."""
    cov_matrix = np.atleast_2d(np.asarray(cov_matrix, dtype=np.float64))
    d = cov_matrix.shape[0]
    return 0.5 * d * (1.0 + LOG_2PI) + 0.5 * logdet(cov_matrix)


def measures(cov: CovarianceMatrix) -> MeasureSet:
    """TC, DTC, S and O-information of a partitioned Gaussian."""
    part = cov.partition
    h_joint = gaussian_entropy(cov.matrix)
    tc = -h_joint
    dtc = h_joint
    for i in range(part.n_vars):
        idx_i = part.indices((i,))
        rest = tuple(j for j in range(part.n_vars) if j != i)
        tc += gaussian_entropy(cov.matrix[np.ix_(idx_i, idx_i)])
        _, schur = conditional_moments(cov.matrix, idx_i, part.indices(rest))
        dtc -= gaussian_entropy(schur)
    return MeasureSet(tc=tc, dtc=dtc, s_info=tc + dtc, o_info=tc - dtc)


def o_information(cov: CovarianceMatrix) -> float:
    return measures(cov).o_info


def gradient(cov: CovarianceMatrix, i: int) -> float:
    """First difference of O-information when variable i is removed."""
    part = cov.partition
    if part.n_vars < 3:
        raise ValueError("O-information gradient needs at least 3 variables")
    if not 0 <= i < part.n_vars:
        raise ValueError(f"variable {i} out of range")
    rest = tuple(j for j in range(part.n_vars) if j != i)
    omega_full = measures(cov).o_info
    omega_sub = 0.0 if part.n_vars == 3 else measures(cov.submatrix(rest)).o_info
    return omega_full - omega_sub


def gradient_vector(cov: CovarianceMatrix) -> np.ndarray:
    """All N gradients; the full-system term is computed once and shared."""
    part = cov.partition
    if part.n_vars < 3:
        raise ValueError("O-information gradient needs at least 3 variables")
    omega_full = measures(cov).o_info
    out = np.empty(part.n_vars)
    for i in range(part.n_vars):
        rest = tuple(j for j in range(part.n_vars) if j != i)
        omega_sub = 0.0 if part.n_vars == 3 else measures(cov.submatrix(rest)).o_info
        out[i] = omega_full - omega_sub
    return out


def exact_score(
    cov: CovarianceMatrix,
    task: ScoreTask,
    x: np.ndarray,
    x_pert: np.ndarray,
    t: float,
    schedule: DiffusionSchedule,
    mean: np.ndarray | None = None,
) -> np.ndarray:
    """Exact score of the noised task density at the perturbed coordinates.

    Gaussian laws stay Gaussian under the Gaussian perturbation kernel: the
    task's clean law N(mu_c, cov_c) noised to time t is
    N(alpha_t mu_c, alpha_t^2 cov_c + sigma_t^2 I), so the score is
    ``-(alpha^2 cov_c + sigma^2 I)^{-1} (x_t - alpha mu_c)``.
    """
    return GaussianScoreSource(cov, schedule, mean=mean).score(task, x, x_pert, t)


class GaussianScoreSource:
    """Exact analytic score source for a Gaussian system.

    Implements the same ``score(task, x, x_pert, t)`` interface the estimators
    use for trained networks; supports every task, including subset
    conditionals and subsystem joints. Stateless and thread-safe.
    """

    kind = "exact"

    def __init__(
        self,
        cov: CovarianceMatrix,
        schedule: DiffusionSchedule,
        mean: np.ndarray | None = None,
    ):
        self.cov = cov
        self.partition = cov.partition
        self.schedule = schedule
        d = cov.partition.total_dim
        self.mean = np.zeros(d) if mean is None else np.asarray(mean, dtype=np.float64)
        if self.mean.shape != (d,):
            raise ValueError(f"mean must have shape ({d},)")
        self._moments: dict[ScoreTask, tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]] = {}

    def _task_moments(self, task: ScoreTask):
        """Time-independent conditional moments, eigendecomposed once per task."""
        cached = self._moments.get(task)
        if cached is not None:
            return cached
        part = self.partition
        validate_task(task, part.n_vars)
        t_idx = part.indices(perturbed_vars(task, part.n_vars))
        g_idx = part.indices(clean_vars(task, part.n_vars))
        coef, cov_c = conditional_moments(self.cov.matrix, t_idx, g_idx)
        lam, vec = np.linalg.eigh(cov_c)
        out = (coef, np.maximum(lam, 0.0), vec, t_idx, g_idx)
        self._moments[task] = out
        return out

    def score(self, task: ScoreTask, x: np.ndarray, x_pert: np.ndarray, t) -> np.ndarray:
        """Scores at the task's perturbed coordinates; ``t`` may be per-row.

        With cov_c = V diag(lam) V', the noised precision applies as
        V diag(1 / (alpha^2 lam + sigma^2)) V', so per-row times cost two
        matmuls instead of per-row solves.
        """
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        x_pert = np.atleast_2d(np.asarray(x_pert, dtype=np.float64))
        coef, lam, vec, t_idx, g_idx = self._task_moments(task)
        if x_pert.shape[1] != t_idx.size:
            raise ValueError(
                f"perturbed block has dim {x_pert.shape[1]}, task expects {t_idx.size}"
            )
        mu_c = np.broadcast_to(self.mean[t_idx], x_pert.shape).copy()
        if g_idx.size:
            mu_c += (x[:, g_idx] - self.mean[g_idx]) @ coef.T
        alpha, sigma, _ = kernel_arrays(self.schedule, t)
        alpha2 = np.atleast_1d(alpha**2)[:, None]
        sigma2 = np.atleast_1d(sigma**2)[:, None]
        resid = x_pert - np.atleast_1d(alpha)[:, None] * mu_c
        proj = resid @ vec
        return -(proj / (alpha2 * lam[None, :] + sigma2)) @ vec.T
