"""Synthetic Gaussian benchmark systems with controllable interaction structure.

Three families are provided, all standardized to unit variance per dimension:

* ``redundant``  — every variable shares one latent source, so all pairs
  correlate at rho = 1 / (1 + sigma^2); block structure I + rho (off-diag).
* ``synergistic`` — variable 2 is the sum of variable 1 and N-2 latents that
  the remaining variables each observe noisily; couplings 1/sqrt(N-1) between
  variables 1 and 2 and rho/sqrt(N-1), rho = 1/sqrt(1+sigma^2), between
  variable 2 and each of 3..N.
* ``mixed`` — independent block-diagonal assembly of sub-systems.

``sigma`` tunes interaction strength in all cases (larger sigma = weaker).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .linalg import NotPositiveDefiniteError, check_symmetric, cholesky
from .rng import RngStream

TRANSFORMS = ("none", "half_cube", "cdf")


@dataclass(frozen=True)
class VariablePartition:
    """How a flat D-dimensional sample splits into N variables."""

    dims: tuple[int, ...]

    def __post_init__(self):
        if len(self.dims) < 1 or any(d < 1 for d in self.dims):
            raise ValueError("every variable needs dimension >= 1")

    @property
    def n_vars(self) -> int:
        return len(self.dims)

    @property
    def offsets(self) -> tuple[int, ...]:
        out, acc = [0], 0
        for d in self.dims:
            acc += d
            out.append(acc)
        return tuple(out)

    @property
    def total_dim(self) -> int:
        return sum(self.dims)

    def block(self, i: int) -> slice:
        off = self.offsets
        return slice(off[i], off[i + 1])

    def indices(self, vars_: tuple[int, ...] | list[int]) -> np.ndarray:
        """Flat coordinate indices of the given variables, in variable order."""
        off = self.offsets
        return np.concatenate(
            [np.arange(off[i], off[i + 1]) for i in vars_] or [np.empty(0, dtype=np.intp)]
        ).astype(np.intp)

    def drop(self, i: int) -> "VariablePartition":
        return VariablePartition(self.dims[:i] + self.dims[i + 1 :])


@dataclass(frozen=True)
class CovarianceMatrix:
    """Symmetric PSD matrix together with its variable partition."""

    matrix: np.ndarray
    partition: VariablePartition

    def __post_init__(self):
        m = check_symmetric(self.matrix, tol=1e-12)
        if m.shape[0] != self.partition.total_dim:
            raise ValueError("covariance size does not match partition")
        object.__setattr__(self, "matrix", m)

    def submatrix(self, vars_: tuple[int, ...]) -> "CovarianceMatrix":
        idx = self.partition.indices(vars_)
        dims = tuple(self.partition.dims[i] for i in vars_)
        return CovarianceMatrix(self.matrix[np.ix_(idx, idx)], VariablePartition(dims))


@dataclass(frozen=True)
class SystemSpec:
    """Declarative description of a benchmark system."""

    kind: str  # redundant | synergistic | independent | mixed
    n_vars: int = 0
    dim: int = 1
    sigma: float = 1.0
    transform: str = "none"
    blocks: tuple["SystemSpec", ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.transform not in TRANSFORMS:
            raise ValueError(f"unknown transform {self.transform!r}")
        if self.kind == "mixed":
            if not self.blocks:
                raise ValueError("mixed system needs at least one sub-spec")
            if any(b.kind == "mixed" for b in self.blocks):
                raise ValueError("mixed sub-specs cannot nest")
        elif self.kind not in ("redundant", "synergistic", "independent"):
            raise ValueError(f"unknown system kind {self.kind!r}")


@dataclass(frozen=True)
class Dataset:
    """Sample matrix plus the partition it was drawn under."""

    samples: np.ndarray  # (M, D)
    partition: VariablePartition
    standardization: tuple[np.ndarray, np.ndarray] | None = None  # (mean, scale)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 2:
            raise ValueError("samples must be a 2-d matrix")
        if s.shape[1] != self.partition.total_dim:
            raise ValueError(
                f"sample dim {s.shape[1]} does not match partition dim {self.partition.total_dim}"
            )
        if not np.all(np.isfinite(s)):
            raise ValueError("samples contain non-finite values")
        object.__setattr__(self, "samples", s)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]


class SingularSystemError(ValueError):
    pass


def _verify_pd(matrix: np.ndarray, what: str) -> None:
    smallest = float(np.linalg.eigvalsh(matrix)[0])
    if smallest <= 1e-10:
        raise SingularSystemError(
            f"{what} covariance is not positive definite (smallest eigenvalue {smallest:.3e})"
        )


def build_redundant_cov(n_vars: int, dim: int, sigma: float) -> CovarianceMatrix:
    """Shared-source system: identity diagonal blocks, rho*I off-diagonal."""
    if n_vars < 2:
        raise ValueError("redundant system needs n_vars >= 2")
    if sigma <= 0:
        raise SingularSystemError("redundant system is singular at sigma = 0")
    rho = 1.0 / (1.0 + sigma * sigma)
    eye_d = np.eye(dim)
    m = np.kron(np.full((n_vars, n_vars), rho) + (1.0 - rho) * np.eye(n_vars), eye_d)
    cov = CovarianceMatrix(m, VariablePartition((dim,) * n_vars))
    _verify_pd(cov.matrix, "redundant")
    return cov


def build_synergistic_cov(
    n_vars: int, dim: int, sigma: float, *, require_pd: bool = True
) -> CovarianceMatrix:
    """Markov-chain system where variable 2 binds variable 1 to the rest.

    At sigma = 0 the chain is deterministic and the covariance is singular;
    ``require_pd=False`` skips the definiteness check so the limiting matrix
    itself can still be inspected.
    """
    if n_vars < 3:
        raise ValueError("synergistic system needs n_vars >= 3")
    rho = 1.0 / np.sqrt(1.0 + sigma * sigma)
    scale = 1.0 / np.sqrt(n_vars - 1)
    corr = np.eye(n_vars)
    corr[0, 1] = corr[1, 0] = scale
    for i in range(2, n_vars):
        corr[1, i] = corr[i, 1] = rho * scale
    m = np.kron(corr, np.eye(dim))
    cov = CovarianceMatrix(m, VariablePartition((dim,) * n_vars))
    if require_pd:
        _verify_pd(cov.matrix, "synergistic")
    return cov


def build_independent_cov(n_vars: int, dim: int) -> CovarianceMatrix:
    if n_vars < 1:
        raise ValueError("need n_vars >= 1")
    return CovarianceMatrix(np.eye(n_vars * dim), VariablePartition((dim,) * n_vars))


def build_mixed_cov(sub_specs: list[SystemSpec] | tuple[SystemSpec, ...]) -> CovarianceMatrix:
    """Block-diagonal assembly of independent sub-systems."""
    if not sub_specs:
        raise ValueError("mixed system needs at least one sub-spec")
    parts = [build_cov(s) for s in sub_specs]
    dims: list[int] = []
    for p in parts:
        dims.extend(p.partition.dims)
    total = sum(dims)
    m = np.zeros((total, total))
    off = 0
    for p in parts:
        d = p.partition.total_dim
        m[off : off + d, off : off + d] = p.matrix
        off += d
    return CovarianceMatrix(m, VariablePartition(tuple(dims)))


def build_cov(spec: SystemSpec) -> CovarianceMatrix:
    if spec.kind == "redundant":
        return build_redundant_cov(spec.n_vars, spec.dim, spec.sigma)
    if spec.kind == "synergistic":
        return build_synergistic_cov(spec.n_vars, spec.dim, spec.sigma)
    if spec.kind == "independent":
        return build_independent_cov(spec.n_vars, spec.dim)
    if spec.kind == "mixed":
        return build_mixed_cov(spec.blocks)
    raise ValueError(f"unknown system kind {spec.kind!r}")


def sample(cov: CovarianceMatrix, n_samples: int, rng: RngStream) -> Dataset:
    """Draw n_samples rows x = L z with z standard normal."""
    if n_samples < 0:
        raise ValueError("n_samples must be >= 0")
    try:
        L = cholesky(cov.matrix, jitter=True)
    except NotPositiveDefiniteError:
        raise
    z = rng.generator().standard_normal((n_samples, cov.partition.total_dim))
    return Dataset(z @ L.T, cov.partition)


def half_cube(x):
    """Elementwise x -> x * sqrt(|x|); strictly monotone, lengthens tails."""
    x = np.asarray(x, dtype=np.float64)
    return x * np.sqrt(np.abs(x))


def gauss_cdf(x):
    """Elementwise standard-normal CDF; strictly monotone onto (0, 1)."""
    return ndtr(np.asarray(x, dtype=np.float64))


def apply_transform(dataset: Dataset, kind: str) -> Dataset:
    """Apply an elementwise strictly monotone map; leaves ground truth unchanged."""
    if kind == "none":
        return dataset
    if kind == "half_cube":
        return Dataset(half_cube(dataset.samples), dataset.partition)
    if kind == "cdf":
        return Dataset(gauss_cdf(dataset.samples), dataset.partition)
    raise ValueError(f"unknown transform {kind!r}")


def sample_system(spec: SystemSpec, n_samples: int, rng: RngStream) -> Dataset:
    """Build the spec's covariance, sample, and apply its transform."""
    ds = sample(build_cov(spec), n_samples, rng)
    return apply_transform(ds, spec.transform)


def default_sigma_grid(n_points: int = 8) -> np.ndarray:
    """Log-spaced interaction-strength grid used by sweeps."""
    return np.geomspace(0.1, 10.0, n_points)
