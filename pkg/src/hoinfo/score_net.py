"""One denoising network for every score the estimators need.

The network takes the concatenation of all variable blocks (each clean,
perturbed, or replaced by pure noise) together with a per-variable time
vector tau, and predicts the injected noise at every coordinate. Tau encodes
which score is being asked for: the query time at perturbed variables, 0 at
conditioning variables, and the schedule horizon at dropped ones, which makes
joint, conditional, marginal and subsystem scores all reachable with a single
set of weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import autodiff as ad
from . import tasks as tk
from .diffusion import DiffusionSchedule, kernel_arrays
from .estimators import MissingTaskError
from .optim import ParamStore
from .rng import RngStream
from .systems import VariablePartition


@dataclass(frozen=True)
class NetConfig:
    width: int = 128
    n_blocks: int = 4
    time_embed_dim: int = 128

    def __post_init__(self):
        if min(self.width, self.n_blocks, self.time_embed_dim) < 1:
            raise ValueError("all network sizes must be >= 1")
        if self.time_embed_dim % 2:
            raise ValueError("time_embed_dim must be even")


def default_net_config(total_dim: int, *, gradient_mode: bool = False) -> NetConfig:
    """Width rule by total input dimension; gradient mode doubles the width
    to make room for the extra subset-conditional score functions."""
    if total_dim <= 50:
        width = 128
    elif total_dim <= 100:
        width = 192
    else:
        width = 256
    if gradient_mode:
        width *= 2
    return NetConfig(width=width, n_blocks=4, time_embed_dim=width)


def encode_task(
    task: tk.ScoreTask, t, n_vars: int, schedule: DiffusionSchedule
) -> np.ndarray:
    """Per-variable time vector: t at perturbed, 0 at clean, horizon at dropped.

    ``t`` may be a scalar (shape (N,) result) or a length-M vector (shape
    (M, N) result, one tau row per sample).
    """
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < schedule.t_min) or np.any(t_arr > schedule.t_max):
        raise ValueError(f"t outside [{schedule.t_min}, {schedule.t_max}]")
    base = np.zeros(n_vars) if t_arr.ndim == 0 else np.zeros((t_arr.shape[0], n_vars))
    for i in tk.dropped_vars(task, n_vars):
        base[..., i] = schedule.t_max
    for i in tk.perturbed_vars(task, n_vars):
        base[..., i] = t_arr
    return base


def assemble_input(
    x_clean: np.ndarray,
    x_pert: np.ndarray,
    task: tk.ScoreTask,
    partition: VariablePartition,
    gen: np.random.Generator,
) -> np.ndarray:
    """Network input: clean values where tau=0, the perturbed block where
    tau=t, and fresh standard-normal draws (resampled every call) where
    tau is at the horizon."""
    x_clean = np.atleast_2d(np.asarray(x_clean, dtype=np.float64))
    x_pert = np.atleast_2d(np.asarray(x_pert, dtype=np.float64))
    n = partition.n_vars
    pert_idx = partition.indices(tk.perturbed_vars(task, n))
    if x_pert.shape != (x_clean.shape[0], pert_idx.size):
        raise ValueError(
            f"perturbed block shape {x_pert.shape} does not match "
            f"(n_rows, {pert_idx.size})"
        )
    out = np.empty_like(x_clean)
    out[:, pert_idx] = x_pert
    clean_idx = partition.indices(tk.clean_vars(task, n))
    if clean_idx.size:
        out[:, clean_idx] = x_clean[:, clean_idx]
    drop_idx = partition.indices(tk.dropped_vars(task, n))
    if drop_idx.size:
        out[:, drop_idx] = gen.standard_normal((x_clean.shape[0], drop_idx.size))
    return out


@lru_cache(maxsize=8)
def _embed_freqs(half: int) -> np.ndarray:
    return np.exp(np.linspace(0.0, np.log(1000.0), half))


def time_embedding(s: np.ndarray, dim: int) -> np.ndarray:
    """Sinusoidal features of normalized times s in [0, 1]."""
    ang = np.asarray(s, dtype=np.float64)[..., None] * _embed_freqs(dim // 2)
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=-1)


def init_params(cfg: NetConfig, partition: VariablePartition, rng: RngStream) -> ParamStore:
    """He-style initialization; block outputs and the head start at zero so
    the initial noise prediction is exactly zero."""
    gen = rng.generator()
    d, w, e = partition.total_dim, cfg.width, cfg.time_embed_dim
    values: dict[str, np.ndarray] = {
        "w_in": gen.standard_normal((d, w)) * np.sqrt(2.0 / d),
        "b_in": np.zeros(w),
        "w_out": np.zeros((w, d)),
        "b_out": np.zeros(d),
    }
    for i in range(partition.n_vars):
        values[f"tau_w_{i}"] = gen.standard_normal((e, w)) * np.sqrt(1.0 / e)
        values[f"tau_b_{i}"] = np.zeros(w)
    for k in range(cfg.n_blocks):
        values[f"blk{k}_w1"] = gen.standard_normal((w, w)) * np.sqrt(2.0 / w)
        values[f"blk{k}_b1"] = np.zeros(w)
        values[f"blk{k}_w2"] = np.zeros((w, w))
        values[f"blk{k}_b2"] = np.zeros(w)
    return ParamStore(values)


def _graph(
    nodes: dict[str, ad.Node],
    x: np.ndarray,
    tau: np.ndarray,
    cfg: NetConfig,
    partition: VariablePartition,
    schedule: DiffusionSchedule,
) -> ad.Node:
    n = partition.n_vars
    tau = np.asarray(tau, dtype=np.float64)
    if tau.shape[-1] != n:
        raise ValueError(f"tau has {tau.shape[-1]} entries, partition has {n} variables")
    s = np.atleast_2d(tau / schedule.t_max)  # (1, N) or (M, N)
    # constant columns embed once and broadcast; equal columns share one embedding
    embeds: list[tuple[np.ndarray, np.ndarray]] = []
    cond = None
    for i in range(n):
        col = s[:, i]
        if col.size > 1 and np.ptp(col) == 0.0:
            col = col[:1]
        emb = None
        for prev_col, prev_emb in embeds:
            if prev_col.shape == col.shape and np.array_equal(prev_col, col):
                emb = prev_emb
                break
        if emb is None:
            emb = time_embedding(col, cfg.time_embed_dim)
            embeds.append((col, emb))
        proj = ad.affine(ad.leaf(emb), nodes[f"tau_w_{i}"], nodes[f"tau_b_{i}"])
        cond = proj if cond is None else ad.add(cond, proj)
    h = ad.affine(ad.leaf(np.atleast_2d(x)), nodes["w_in"], nodes["b_in"])
    for k in range(cfg.n_blocks):
        u = ad.add(h, cond)
        a1 = ad.silu(ad.affine(u, nodes[f"blk{k}_w1"], nodes[f"blk{k}_b1"]))
        h = ad.add(h, ad.affine(a1, nodes[f"blk{k}_w2"], nodes[f"blk{k}_b2"]))
    return ad.affine(h, nodes["w_out"], nodes["b_out"])


def param_nodes(params: ParamStore | dict, requires_grad: bool) -> dict[str, ad.Node]:
    values = params.values if isinstance(params, ParamStore) else params
    return {k: ad.leaf(v, requires_grad=requires_grad) for k, v in values.items()}


def forward_graph(
    nodes: dict[str, ad.Node],
    x: np.ndarray,
    tau: np.ndarray,
    cfg: NetConfig,
    partition: VariablePartition,
    schedule: DiffusionSchedule,
) -> ad.Node:
    """Differentiable forward pass; ``nodes`` are the parameter leaves."""
    return _graph(nodes, x, tau, cfg, partition, schedule)


def forward(
    params: ParamStore | dict,
    x: np.ndarray,
    tau: np.ndarray,
    cfg: NetConfig,
    partition: VariablePartition,
    schedule: DiffusionSchedule,
) -> np.ndarray:
    """Noise prediction for every coordinate; deterministic in its inputs."""
    out = _graph(param_nodes(params, False), x, tau, cfg, partition, schedule).value
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("network produced non-finite activations")
    return out


def score_from_eps(eps_hat: np.ndarray, sigma_t) -> np.ndarray:
    """Convert a noise prediction to a score: s = -eps_hat / sigma_t."""
    sigma_t = np.asarray(sigma_t, dtype=np.float64)
    if np.any(sigma_t <= 0):
        raise ValueError("sigma_t must be positive")
    if sigma_t.ndim == 0:
        return -np.asarray(eps_hat) / float(sigma_t)
    return -np.asarray(eps_hat) / sigma_t[:, None]


class ModelScoreSource:
    """Adapter exposing a trained network through the estimator interface.

    Pure-noise fills are resampled from an internal stream on every call;
    ``bind_rng`` rebinds that stream so estimation runs are reproducible
    independent of call history. Raises MissingTaskError for tasks outside
    the model's trained task set.
    """

    kind = "model"

    def __init__(
        self,
        params: dict[str, np.ndarray],
        net_config: NetConfig,
        partition: VariablePartition,
        schedule: DiffusionSchedule,
        available_tasks=None,
        rng: RngStream = RngStream(0),
    ):
        self.params = params
        self.net_config = net_config
        self.partition = partition
        self.schedule = schedule
        self.available = None if available_tasks is None else frozenset(available_tasks)
        self._gen = rng.generator()

    def bind_rng(self, rng: RngStream) -> None:
        self._gen = rng.generator()

    def score(self, task: tk.ScoreTask, x: np.ndarray, x_pert: np.ndarray, t) -> np.ndarray:
        if self.available is not None and task not in self.available:
            raise MissingTaskError(f"model was not trained for task {tk.task_label(task)}")
        n = self.partition.n_vars
        inp = assemble_input(x, x_pert, task, self.partition, self._gen)
        tau = encode_task(task, t, n, self.schedule)
        eps_hat = forward(self.params, inp, tau, self.net_config, self.partition, self.schedule)
        pert_idx = self.partition.indices(tk.perturbed_vars(task, n))
        _, sigma, _ = kernel_arrays(self.schedule, t)
        return score_from_eps(eps_hat[:, pert_idx], sigma)
