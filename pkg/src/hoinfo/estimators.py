"""Monte-Carlo estimation of interaction measures from score functions.

Every measure here is a time integral of a weighted squared difference of
score functions, estimated by averaging over data samples and random
integration times:

    value ~= mean over (sample, t-draw) of  w(t) * g^2(t)/2 * ||s_a - s_b||^2

with w(t) the time-sampling importance weight. Each (sample, draw) pair gets
its own integration time (stratified over the draw index), and all score
terms inside one accumulation step share that time and one perturbation draw
(common random numbers). The sharing makes the O-information estimate exactly
the difference of the TC and DTC estimates and keeps the variance of score
differences low.

Estimates are replicated over seeds; the reported standard error is the
between-replicate standard error of the mean.

Time-sampling default: exact analytic sources encode the small-time
cancellation of score differences, so a plain stratified-uniform grid has the
lowest variance; trained-network sources have noise-prediction errors that
blow up like 1/sigma^2 near the floor, which is exactly the shape of the
g^2/sigma^2 importance proposal. ``time_sampling=None`` picks by source kind.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from .diffusion import DiffusionSchedule, draw_times, kernel_arrays
from .rng import RngStream
from .systems import Dataset, VariablePartition
from . import tasks as tk

DEFAULT_MC_STEPS = 10
DEFAULT_SEEDS = 5
CHUNK_ROWS = 4096


class MissingTaskError(KeyError):
    """A score source does not provide the requested task."""


@runtime_checkable
class ScoreSource(Protocol):
    """What the estimators need from a score provider.

    ``score(task, x, x_pert, t)`` takes the clean samples (M, D), the
    perturbed values of the task's perturbed coordinates (M, d_task) and a
    time, and returns the score vector at those coordinates (M, d_task).
    """

    partition: VariablePartition
    schedule: DiffusionSchedule
    kind: str

    def score(self, task, x: np.ndarray, x_pert: np.ndarray, t: float) -> np.ndarray: ...


@dataclass(frozen=True)
class MeasureEstimate:
    value: float
    std_error: float
    n_samples: int
    mc_steps: int
    time_sampling: str

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise ValueError("estimate is not finite")
        if self.std_error < 0:
            raise ValueError("std_error must be nonnegative")


@dataclass(frozen=True)
class OInfoEstimates:
    tc: MeasureEstimate
    dtc: MeasureEstimate
    s: MeasureEstimate
    o_info: MeasureEstimate


def _bind_fills(source, stream: RngStream) -> None:
    # Network-backed sources resample pure-noise fills from their own stream;
    # rebinding per replicate keeps whole runs reproducible.
    bind = getattr(source, "bind_rng", None)
    if bind is not None:
        bind(stream)


def _check_inputs(source, dataset: Dataset) -> None:
    if dataset.n_samples == 0:
        raise ValueError("cannot estimate from an empty dataset")
    if dataset.partition != source.partition:
        raise ValueError(
            f"dataset partition {dataset.partition.dims} does not match "
            f"source partition {source.partition.dims}"
        )


def _resolve_mode(source, time_sampling: str | None) -> str:
    if time_sampling is not None:
        return time_sampling
    return "uniform" if getattr(source, "kind", "model") == "exact" else "importance"


def _replicate_terms(
    source,
    dataset: Dataset,
    term_fn,
    mc_steps: int,
    stream: RngStream,
    time_sampling: str,
    stratified: bool,
) -> np.ndarray:
    """One replicate: average term_fn over mc_steps perturbation draws.

    Each sample gets its own time per draw (stratified over draws); term_fn
    (x, x_t, t_vec) -> (M, k) per-sample values of k accumulated terms, which
    are weighted by w * g^2/2 and averaged over samples and draws.
    """
    x = dataset.samples
    schedule = source.schedule
    t_mat, w_mat = draw_times(
        schedule,
        time_sampling,
        stream.child(0),
        (x.shape[0], mc_steps),
        stratified=stratified,
    )
    acc = None
    for step in range(mc_steps):
        t = t_mat[:, step]
        alpha, sigma, g2 = kernel_arrays(schedule, t)
        eps = stream.child(1, step).generator().standard_normal(x.shape)
        x_t = alpha[:, None] * x + sigma[:, None] * eps
        vals = term_fn(x, x_t, t)
        contrib = (w_mat[:, step] * g2 / 2.0)[:, None] * vals
        step_mean = contrib.mean(axis=0)
        acc = step_mean if acc is None else acc + step_mean
    return acc / mc_steps


def _chunked(n: int):
    for lo in range(0, n, CHUNK_ROWS):
        yield slice(lo, min(lo + CHUNK_ROWS, n))


def _sq_norm_rows(a: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->i", a, a)


def _core_terms(source, part: VariablePartition):
    """term_fn computing per-sample (tc, dtc, s) contributions with shared draws."""
    n = part.n_vars
    joint = tk.Joint()
    marginals = [tk.Marginal(i) for i in range(n)]
    conditionals = [tk.conditional_on_rest(i, n) for i in range(n)]

    def term_fn(x, x_t, t):
        out = np.empty((x.shape[0], 3))
        for rows in _chunked(x.shape[0]):
            xc, xtc, tc = x[rows], x_t[rows], t[rows]
            s_joint = source.score(joint, xc, xtc, tc)
            s_marg = np.empty_like(s_joint)
            s_cond = np.empty_like(s_joint)
            for i in range(n):
                blk = part.block(i)
                s_marg[:, blk] = source.score(marginals[i], xc, xtc[:, blk], tc)
                s_cond[:, blk] = source.score(conditionals[i], xc, xtc[:, blk], tc)
            out[rows, 0] = _sq_norm_rows(s_joint - s_marg)
            out[rows, 1] = _sq_norm_rows(s_joint - s_cond)
            out[rows, 2] = _sq_norm_rows(s_marg - s_cond)
        return out

    return term_fn


def _aggregate(replicates: np.ndarray) -> tuple[float, float]:
    value = float(replicates.mean())
    if replicates.size > 1:
        se = float(replicates.std(ddof=1) / np.sqrt(replicates.size))
    else:
        se = 0.0
    return value, se


def _run_core(
    source,
    dataset: Dataset,
    mc_steps: int,
    rng: RngStream,
    n_seeds: int,
    time_sampling: str | None,
    stratified: bool,
) -> tuple[np.ndarray, str]:
    _check_inputs(source, dataset)
    time_sampling = _resolve_mode(source, time_sampling)
    term_fn = _core_terms(source, source.partition)
    reps = np.empty((n_seeds, 3))
    for r in range(n_seeds):
        rep_stream = rng.child(r)
        _bind_fills(source, rep_stream.child(2))
        reps[r] = _replicate_terms(
            source, dataset, term_fn, mc_steps, rep_stream, time_sampling, stratified
        )
    return reps, time_sampling


def estimate_oinfo(
    source,
    dataset: Dataset,
    mc_steps: int = DEFAULT_MC_STEPS,
    rng: RngStream = RngStream(0),
    *,
    n_seeds: int = DEFAULT_SEEDS,
    time_sampling: str | None = None,
    stratified: bool = True,
) -> OInfoEstimates:
    """TC, DTC, S and O-information from one shared set of draws.

    The O-information replicate values are exactly tc - dtc of the same
    draws; S is accumulated independently from the marginal-vs-conditional
    score differences.
    """
    reps, mode = _run_core(source, dataset, mc_steps, rng, n_seeds, time_sampling, stratified)

    def est(col: np.ndarray) -> MeasureEstimate:
        value, se = _aggregate(col)
        return MeasureEstimate(value, se, dataset.n_samples, mc_steps, mode)

    return OInfoEstimates(
        tc=est(reps[:, 0]),
        dtc=est(reps[:, 1]),
        s=est(reps[:, 2]),
        o_info=est(reps[:, 0] - reps[:, 1]),
    )


def estimate_tc(source, dataset, mc_steps=DEFAULT_MC_STEPS, rng=RngStream(0), **kw) -> MeasureEstimate:
    return estimate_oinfo(source, dataset, mc_steps, rng, **kw).tc


def estimate_dtc(source, dataset, mc_steps=DEFAULT_MC_STEPS, rng=RngStream(0), **kw) -> MeasureEstimate:
    return estimate_oinfo(source, dataset, mc_steps, rng, **kw).dtc


def estimate_s(source, dataset, mc_steps=DEFAULT_MC_STEPS, rng=RngStream(0), **kw) -> MeasureEstimate:
    return estimate_oinfo(source, dataset, mc_steps, rng, **kw).s


def _mi_terms(source, part: VariablePartition, target: int, given: frozenset[int]):
    cond = tk.Marginal(target) if not given else tk.Conditional(target, given)
    marg = tk.Marginal(target)
    blk = part.block(target)

    def term_fn(x, x_t, t):
        out = np.empty((x.shape[0], 1))
        for rows in _chunked(x.shape[0]):
            xc, xtb, tc = x[rows], x_t[rows, blk], t[rows]
            s_cond = source.score(cond, xc, xtb, tc)
            s_marg = source.score(marg, xc, xtb, tc)
            out[rows, 0] = _sq_norm_rows(s_cond - s_marg)
        return out

    return term_fn


def estimate_mi(
    source,
    target: int,
    given,
    dataset: Dataset,
    mc_steps: int = DEFAULT_MC_STEPS,
    rng: RngStream = RngStream(0),
    *,
    n_seeds: int = DEFAULT_SEEDS,
    time_sampling: str | None = None,
    stratified: bool = True,
) -> MeasureEstimate:
    """Mutual information I(X^target ; X^given), given as variable indices."""
    _check_inputs(source, dataset)
    time_sampling = _resolve_mode(source, time_sampling)
    given = frozenset(given)
    term_fn = _mi_terms(source, source.partition, target, given)
    reps = np.empty(n_seeds)
    for r in range(n_seeds):
        rep_stream = rng.child(r)
        _bind_fills(source, rep_stream.child(2))
        reps[r] = _replicate_terms(
            source, dataset, term_fn, mc_steps, rep_stream, time_sampling, stratified
        )[0]
    value, se = _aggregate(reps)
    return MeasureEstimate(value, se, dataset.n_samples, mc_steps, time_sampling)


def estimate_kl(
    source_p,
    source_q,
    dataset: Dataset,
    mc_steps: int = DEFAULT_MC_STEPS,
    rng: RngStream = RngStream(0),
    *,
    task=None,
    n_seeds: int = DEFAULT_SEEDS,
    time_sampling: str | None = None,
    stratified: bool = True,
) -> MeasureEstimate:
    """KL divergence between the laws behind two score sources.

    ``dataset`` must hold samples of the first source's law; both sources
    score the same task (the full joint by default).
    """
    _check_inputs(source_p, dataset)
    time_sampling = _resolve_mode(source_p, time_sampling)
    task = tk.Joint() if task is None else task
    part = source_p.partition
    pert_idx = part.indices(tk.perturbed_vars(task, part.n_vars))

    def term_fn(x, x_t, t):
        out = np.empty((x.shape[0], 1))
        for rows in _chunked(x.shape[0]):
            xc, xtb, tc = x[rows], x_t[rows][:, pert_idx], t[rows]
            diff = source_p.score(task, xc, xtb, tc) - source_q.score(task, xc, xtb, tc)
            out[rows, 0] = _sq_norm_rows(diff)
        return out

    reps = np.empty(n_seeds)
    for r in range(n_seeds):
        rep_stream = rng.child(r)
        _bind_fills(source_p, rep_stream.child(2))
        _bind_fills(source_q, rep_stream.child(3))
        reps[r] = _replicate_terms(
            source_p, dataset, term_fn, mc_steps, rep_stream, time_sampling, stratified
        )[0]
    value, se = _aggregate(reps)
    return MeasureEstimate(value, se, dataset.n_samples, mc_steps, time_sampling)


def _gradient_mi_sum_terms(source, part: VariablePartition, i: int):
    """Per-sample gradient contributions via the MI-sum formulation.

    grad_i = (2 - N) I(X^i; rest) + sum_j I(X^i; rest minus j), all terms
    sharing the perturbation of block i and one marginal-score evaluation.
    """
    n = part.n_vars
    others = [j for j in range(n) if j != i]
    marg = tk.Marginal(i)
    cond_full = tk.conditional_on_rest(i, n)
    cond_drop = {j: tk.Conditional(i, frozenset(others) - {j}) for j in others}
    blk = part.block(i)

    def term_fn(x, x_t, t):
        out = np.empty((x.shape[0], 1))
        for rows in _chunked(x.shape[0]):
            xc, xtb, tc = x[rows], x_t[rows, blk], t[rows]
            s_marg = source.score(marg, xc, xtb, tc)
            total = (2.0 - n) * _sq_norm_rows(source.score(cond_full, xc, xtb, tc) - s_marg)
            for j in others:
                total += _sq_norm_rows(source.score(cond_drop[j], xc, xtb, tc) - s_marg)
            out[rows, 0] = total
        return out

    return term_fn


def _gradient_subsystem_terms(source, part: VariablePartition, i: int):
    """Per-sample gradient contributions as Omega(X) - Omega(X without i).

    Requires subsystem-joint scores, so this route needs an exact source or a
    model trained with subsystem tasks.
    """
    n = part.n_vars
    joint = tk.Joint()
    sub = tk.SubsystemJoint(i)
    others = [j for j in range(n) if j != i]
    sub_idx = part.indices(tuple(others))
    marginals = {j: tk.Marginal(j) for j in range(n)}
    cond_full = {j: tk.conditional_on_rest(j, n) for j in range(n)}
    cond_sub = {j: tk.Conditional(j, frozenset(others) - {j}) for j in others}

    def term_fn(x, x_t, t):
        out = np.empty((x.shape[0], 1))
        for rows in _chunked(x.shape[0]):
            xc, xtc, tc = x[rows], x_t[rows], t[rows]
            s_joint = source.score(joint, xc, xtc, tc)
            s_sub = source.score(sub, xc, xtc[:, sub_idx], tc)
            m_full = np.empty_like(s_joint)
            c_full = np.empty_like(s_joint)
            m_sub = np.empty_like(s_sub)
            c_sub = np.empty_like(s_sub)
            off = 0
            for j in range(n):
                blk = part.block(j)
                m_full[:, blk] = source.score(marginals[j], xc, xtc[:, blk], tc)
                c_full[:, blk] = source.score(cond_full[j], xc, xtc[:, blk], tc)
                if j != i:
                    w = part.dims[j]
                    m_sub[:, off : off + w] = m_full[:, blk]
                    c_sub[:, off : off + w] = source.score(cond_sub[j], xc, xtc[:, blk], tc)
                    off += w
            omega_full = _sq_norm_rows(s_joint - m_full) - _sq_norm_rows(s_joint - c_full)
            omega_sub = _sq_norm_rows(s_sub - m_sub) - _sq_norm_rows(s_sub - c_sub)
            out[rows, 0] = omega_full - omega_sub
        return out

    return term_fn


def estimate_gradient(
    source,
    i: int,
    dataset: Dataset,
    mc_steps: int = DEFAULT_MC_STEPS,
    rng: RngStream = RngStream(0),
    *,
    formulation: str = "mi_sum",
    n_seeds: int = DEFAULT_SEEDS,
    time_sampling: str | None = None,
    stratified: bool = True,
) -> MeasureEstimate:
    """O-information gradient of variable i.

    ``mi_sum`` (default) assembles the gradient from mutual-information terms
    and only needs marginal and conditional scores; ``subsystem`` takes the
    difference of full- and reduced-system O-information and additionally
    needs subsystem-joint scores.
    """
    _check_inputs(source, dataset)
    time_sampling = _resolve_mode(source, time_sampling)
    part = source.partition
    if part.n_vars < 3:
        raise ValueError("O-information gradient needs at least 3 variables")
    if formulation == "mi_sum":
        term_fn = _gradient_mi_sum_terms(source, part, i)
    elif formulation == "subsystem":
        term_fn = _gradient_subsystem_terms(source, part, i)
    else:
        raise ValueError(f"unknown gradient formulation {formulation!r}")
    reps = np.empty(n_seeds)
    for r in range(n_seeds):
        rep_stream = rng.child(r)
        _bind_fills(source, rep_stream.child(2))
        reps[r] = _replicate_terms(
            source, dataset, term_fn, mc_steps, rep_stream, time_sampling, stratified
        )[0]
    value, se = _aggregate(reps)
    return MeasureEstimate(value, se, dataset.n_samples, mc_steps, time_sampling)


def estimate_gradients(source, dataset, mc_steps=DEFAULT_MC_STEPS, rng=RngStream(0), **kw):
    """Gradient estimates for every variable, one independent run each."""
    return [
        estimate_gradient(source, i, dataset, mc_steps, rng.child(100 + i), **kw)
        for i in range(source.partition.n_vars)
    ]
