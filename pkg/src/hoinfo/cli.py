"""Command-line experiment runner.

Subcommands: ``oracle`` (closed-form ground truth), ``gen`` (sample a
benchmark system to a dataset file), ``train`` (fit the denoising network),
``estimate`` (measure estimation from a checkpoint or exact scores), ``grad``
(O-information gradients), and ``sweep`` (grids over interaction strength to
a long-format CSV).

Configuration comes from an optional YAML file plus flag overrides; every
report embeds the fully resolved configuration and is byte-identical across
reruns with the same seed, timestamps aside. Exit codes: 0 success, 2
configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import yaml

from . import data_io, oracle, systems, trainer
from .diffusion import DiffusionSchedule
from .estimators import estimate_gradient, estimate_oinfo
from .linalg import NotPositiveDefiniteError
from .rng import RngStream
from .score_net import NetConfig, default_net_config
from .systems import SystemSpec, SingularSystemError
from .trainer import TrainConfig

OUTPUT_DIR_ENV = "HOINFO_OUT_DIR"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- config ---

DEFAULT_ESTIMATION = {
    "n_samples": 10_000,
    "mc_steps": 10,
    "seeds": 5,
    "time_sampling": None,
    "seed": 0,
}


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {p} does not exist")
    try:
        data = yaml.safe_load(p.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"could not parse config {p}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    return data


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, val in override.items():
        if val is None:
            continue
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def system_from_config(cfg: dict) -> SystemSpec:
    cfg = dict(cfg)
    kind = cfg.get("kind")
    if kind is None:
        raise ConfigError("system needs a 'kind'")
    if kind == "mixed":
        blocks = cfg.get("blocks") or []
        if not blocks:
            raise ConfigError("mixed system needs a 'blocks' list")
        subs = tuple(system_from_config(b) for b in blocks)
        return SystemSpec(kind="mixed", blocks=subs, transform=cfg.get("transform", "none"))
    try:
        return SystemSpec(
            kind=kind,
            n_vars=int(cfg.get("n_vars", 0)),
            dim=int(cfg.get("dim", 1)),
            sigma=float(cfg.get("sigma", 1.0)),
            transform=cfg.get("transform", "none"),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad system spec: {exc}") from exc


def system_to_dict(spec: SystemSpec) -> dict:
    if spec.kind == "mixed":
        return {
            "kind": "mixed",
            "transform": spec.transform,
            "blocks": [system_to_dict(b) for b in spec.blocks],
        }
    return {
        "kind": spec.kind,
        "n_vars": spec.n_vars,
        "dim": spec.dim,
        "sigma": spec.sigma,
        "transform": spec.transform,
    }


def schedule_from_config(cfg: dict) -> DiffusionSchedule:
    try:
        return DiffusionSchedule(**{**asdict(DiffusionSchedule()), **(cfg or {})})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad schedule: {exc}") from exc


def train_config_from(cfg: dict) -> TrainConfig:
    try:
        return TrainConfig(**{**asdict(TrainConfig()), **{k: v for k, v in (cfg or {}).items() if k != "n_samples"}})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad train config: {exc}") from exc


def net_config_from(cfg: dict | None, total_dim: int, gradient_mode: bool) -> NetConfig:
    if not cfg:
        return default_net_config(total_dim, gradient_mode=gradient_mode)
    base = asdict(default_net_config(total_dim, gradient_mode=gradient_mode))
    try:
        return NetConfig(**{**base, **cfg})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad net config: {exc}") from exc


def resolve_out_dir(cfg: dict) -> Path:
    out = cfg.get("output_dir") or os.environ.get(OUTPUT_DIR_ENV) or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def config_hash(resolved: dict) -> str:
    return hashlib.sha256(json.dumps(resolved, sort_keys=True).encode()).hexdigest()[:16]


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_json(payload: dict, path: Path | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text, encoding="utf-8")
        print(f"wrote {path}")


# ------------------------------------------------------------- commands ---


def cmd_oracle(cfg: dict, out: Path | None) -> int:
    spec = system_from_config(cfg.get("system") or {})
    cov = systems.build_cov(spec)
    m = oracle.measures(cov)
    payload: dict = {
        "measures": {"tc": m.tc, "dtc": m.dtc, "s_info": m.s_info, "o_info": m.o_info},
        "gradients": None,
        "meta": {
            "system": system_to_dict(spec),
            "n_vars": cov.partition.n_vars,
            "total_dim": cov.partition.total_dim,
        },
    }
    if cov.partition.n_vars >= 3:
        payload["gradients"] = oracle.gradient_vector(cov).tolist()
    if spec.kind == "mixed":
        blocks = []
        for sub in spec.blocks:
            bm = oracle.measures(systems.build_cov(sub))
            blocks.append(
                {
                    "system": system_to_dict(sub),
                    "tc": bm.tc,
                    "dtc": bm.dtc,
                    "s_info": bm.s_info,
                    "o_info": bm.o_info,
                }
            )
        payload["blocks"] = blocks
    write_json(payload, out)
    return EXIT_OK


def cmd_gen(cfg: dict, n_samples: int, seed: int, out: Path, payload_format: str) -> int:
    spec = system_from_config(cfg.get("system") or {})
    ds = systems.sample_system(spec, n_samples, RngStream(seed))
    data_io.save(ds, out, payload_format=payload_format)
    print(f"wrote {out} ({n_samples} samples, D={ds.partition.total_dim})")
    return EXIT_OK


def _training_data(cfg: dict, train_cfg: TrainConfig, n_samples: int):
    """Dataset for training plus the system spec when one was configured."""
    has_system = bool(cfg.get("system"))
    has_dataset = bool(cfg.get("dataset"))
    if has_system == has_dataset:
        raise ConfigError("exactly one of 'system' or 'dataset' must be configured")
    if has_system:
        spec = system_from_config(cfg["system"])
        raw = systems.sample_system(spec, n_samples, RngStream(train_cfg.seed).child(100))
        return raw, spec
    path = Path(cfg["dataset"])
    if not path.exists():
        raise ConfigError(f"dataset file {path} does not exist")
    part = None
    if cfg.get("partition"):
        part = systems.VariablePartition(tuple(int(d) for d in cfg["partition"]))
    return data_io.load(path, part), None


def cmd_train(cfg: dict, out: Path, log_path: Path | None) -> int:
    train_cfg = train_config_from(cfg.get("train") or {})
    n_samples = int((cfg.get("train") or {}).get("n_samples", 50_000))
    schedule = schedule_from_config(cfg.get("schedule") or {})
    raw, spec = _training_data(cfg, train_cfg, n_samples)
    ds = data_io.standardize(raw)
    net_cfg = net_config_from(
        cfg.get("net"), ds.partition.total_dim, train_cfg.task_mode != "standard"
    )
    model, history = trainer.fit(ds, net_cfg, train_cfg, schedule)
    mean, scale = ds.standardization
    model.meta["standardization"] = {"mean": mean.tolist(), "scale": scale.tolist()}
    if spec is not None:
        model.meta["system"] = system_to_dict(spec)
    trainer.save_model(model, out)
    if log_path is not None:
        with open(log_path, "w", encoding="utf-8") as fh:
            fh.write("iteration,task,loss,wall_time\n")
            for rec in history:
                fh.write(f"{rec.iteration},{rec.task},{rec.loss:.10g},{rec.wall_time:.3f}\n")
        print(f"wrote {log_path}")
    print(f"wrote {out} (final loss {history[-1].loss:.4f})")
    return EXIT_OK


def _estimation_source_and_data(cfg: dict, args) -> tuple[object, systems.Dataset, dict]:
    est_cfg = {**DEFAULT_ESTIMATION, **(cfg.get("estimation") or {})}
    schedule = schedule_from_config(cfg.get("schedule") or {})
    seed = int(est_cfg["seed"])
    n_samples = int(est_cfg["n_samples"])
    has_system = bool(cfg.get("system"))
    has_dataset = bool(cfg.get("dataset"))
    if has_system == has_dataset:
        raise ConfigError("exactly one of 'system' or 'dataset' must be configured")

    if args.exact_scores:
        if not has_system:
            raise ConfigError("--exact-scores needs a system spec (the true covariance)")
        spec = system_from_config(cfg["system"])
        if spec.kind != "mixed" and spec.transform != "none":
            raise ConfigError(
                "--exact-scores is only valid for untransformed Gaussian systems"
            )
        cov = systems.build_cov(spec)
        ds = systems.sample(cov, n_samples, RngStream(seed).child(200))
        source = oracle.GaussianScoreSource(cov, schedule)
        return source, ds, est_cfg

    if not args.checkpoint:
        raise ConfigError("need --checkpoint CKPT or --exact-scores")
    ckpt = Path(args.checkpoint)
    if not ckpt.exists():
        raise ConfigError(f"checkpoint {ckpt} does not exist")
    model = trainer.load_model(ckpt)
    std = model.meta.get("standardization")
    if std is None:
        raise ConfigError("checkpoint lacks a standardization record")
    mean = np.asarray(std["mean"])
    scale = np.asarray(std["scale"])
    if has_system:
        spec = system_from_config(cfg["system"])
        raw = systems.sample_system(spec, n_samples, RngStream(seed).child(200))
    else:
        path = Path(cfg["dataset"])
        if not path.exists():
            raise ConfigError(f"dataset file {path} does not exist")
        raw = data_io.load(path)
    if raw.partition != model.partition:
        raise ConfigError(
            f"data partition {raw.partition.dims} does not match "
            f"checkpoint partition {model.partition.dims}"
        )
    ds = data_io.apply_standardization(raw, mean, scale)
    source = model.score_source(RngStream(seed).child(300))
    return source, ds, est_cfg


def _meta(cfg: dict, est_cfg: dict, source, ds) -> dict:
    resolved = {
        "config": cfg,
        "estimation": {k: est_cfg[k] for k in sorted(est_cfg)},
        "schedule": asdict(schedule_from_config(cfg.get("schedule") or {})),
    }
    return {
        "n_samples": ds.n_samples,
        "mc_steps": int(est_cfg["mc_steps"]),
        "seeds": int(est_cfg["seeds"]),
        "schedule": resolved["schedule"],
        "source": source.kind,
        "config": resolved["config"],
        "config_hash": config_hash(resolved),
        "created_at": _timestamp(),
    }


def cmd_estimate(cfg: dict, args, out: Path | None) -> int:
    source, ds, est_cfg = _estimation_source_and_data(cfg, args)
    est = estimate_oinfo(
        source,
        ds,
        mc_steps=int(est_cfg["mc_steps"]),
        rng=RngStream(int(est_cfg["seed"])),
        n_seeds=int(est_cfg["seeds"]),
        time_sampling=est_cfg["time_sampling"],
    )
    payload = {
        "measures": {
            "tc": {"value": est.tc.value, "std_error": est.tc.std_error},
            "dtc": {"value": est.dtc.value, "std_error": est.dtc.std_error},
            "s": {"value": est.s.value, "std_error": est.s.std_error},
            "o_info": {"value": est.o_info.value, "std_error": est.o_info.std_error},
        },
        "gradients": None,
        "meta": {**_meta(cfg, est_cfg, source, ds), "time_sampling": est.tc.time_sampling},
    }
    write_json(payload, out)
    return EXIT_OK


def cmd_grad(cfg: dict, args, out: Path | None) -> int:
    source, ds, est_cfg = _estimation_source_and_data(cfg, args)
    n = source.partition.n_vars
    if n < 3:
        raise ConfigError("gradients need at least 3 variables")
    grads = []
    for i in range(n):
        g = estimate_gradient(
            source,
            i,
            ds,
            mc_steps=int(est_cfg["mc_steps"]),
            rng=RngStream(int(est_cfg["seed"])).child(100 + i),
            formulation=args.formulation,
            n_seeds=int(est_cfg["seeds"]),
            time_sampling=est_cfg["time_sampling"],
        )
        grads.append({"variable": i, "value": g.value, "std_error": g.std_error})
    payload = {
        "measures": None,
        "gradients": grads,
        "meta": {
            **_meta(cfg, est_cfg, source, ds),
            "formulation": args.formulation,
        },
    }
    write_json(payload, out)
    return EXIT_OK


def _sweep_system(kind: str, n_vars: int, dim: int, sigma: float,
                  subsets: list[int] | None, syn_sigma: float) -> SystemSpec:
    if subsets:
        if sum(subsets) != n_vars:
            raise ConfigError(f"subsets {subsets} do not sum to n_vars={n_vars}")
        if kind == "mixed":
            blocks = [SystemSpec("redundant", n, dim, sigma) for n in subsets[:-1]]
            blocks.append(SystemSpec("synergistic", subsets[-1], dim, syn_sigma))
        else:
            blocks = [SystemSpec(kind, n, dim, sigma) for n in subsets]
        return SystemSpec(kind="mixed", blocks=tuple(blocks))
    if kind == "mixed":
        raise ConfigError("mixed sweeps need --subsets")
    return SystemSpec(kind, n_vars, dim, sigma)


def cmd_sweep(cfg: dict, args, out: Path) -> int:
    est_cfg = {**DEFAULT_ESTIMATION, **(cfg.get("estimation") or {})}
    schedule = schedule_from_config(cfg.get("schedule") or {})
    sigmas = (
        [float(s) for s in args.sigmas.split(",")]
        if args.sigmas
        else systems.default_sigma_grid().tolist()
    )
    dims = [int(d) for d in args.dims.split(",")] if args.dims else [1]
    subsets = [int(s) for s in args.subsets.split(",")] if args.subsets else None
    n_seeds = int(args.seeds if args.seeds is not None else est_cfg["seeds"])
    mc_steps = int(est_cfg["mc_steps"])
    n_samples = int(est_cfg["n_samples"])
    base_seed = int(est_cfg["seed"])

    rows = []
    for dim in dims:
        for sigma in sigmas:
            spec = _sweep_system(args.benchmark, args.n_vars, dim, sigma, subsets, args.syn_sigma)
            cov = systems.build_cov(spec)
            truth = oracle.measures(cov)
            for seed in range(n_seeds):
                stream = RngStream(base_seed).child(dims.index(dim), sigmas.index(sigma), seed)
                ds = systems.sample(cov, n_samples, stream.child(0))
                source = oracle.GaussianScoreSource(cov, schedule)
                t0 = time.perf_counter()
                est = estimate_oinfo(
                    source,
                    ds,
                    mc_steps=mc_steps,
                    rng=stream.child(1),
                    n_seeds=1,
                    time_sampling=est_cfg["time_sampling"],
                )
                wall = time.perf_counter() - t0
                rows.append(
                    (
                        args.benchmark,
                        args.n_vars,
                        dim,
                        sigma,
                        seed,
                        "exact",
                        est.tc.value,
                        est.dtc.value,
                        est.s.value,
                        est.o_info.value,
                        truth.tc,
                        truth.dtc,
                        truth.o_info,
                        wall,
                    )
                )
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(
            "benchmark,n_vars,dim,sigma,seed,estimator,"
            "tc_hat,dtc_hat,s_hat,o_hat,tc_true,dtc_true,o_true,wall_time\n"
        )
        for row in rows:
            fh.write(
                ",".join(
                    f"{v:.10g}" if isinstance(v, float) else str(v) for v in row
                )
                + "\n"
            )
    print(f"wrote {out} ({len(rows)} rows)")
    return EXIT_OK


# ---------------------------------------------------------------- parser ---


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hoinfo",
        description="Score-based estimation of higher-order information measures.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="YAML config file")
        p.add_argument("--kind", help="system kind (redundant|synergistic|independent)")
        p.add_argument("--n-vars", type=int, dest="n_vars_flag")
        p.add_argument("--dim", type=int)
        p.add_argument("--sigma", type=float)
        p.add_argument("--transform", choices=systems.TRANSFORMS)
        p.add_argument("--output-dir", help="default output directory")

    p = sub.add_parser("oracle", help="closed-form ground truth for a system spec")
    add_common(p)
    p.add_argument("-o", "--out", help="write JSON here instead of stdout")

    p = sub.add_parser("gen", help="sample a benchmark system to a dataset file")
    add_common(p)
    p.add_argument("--n-samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", default="f32", choices=["f32", "f64", "csv"])
    p.add_argument("-o", "--out", required=True)

    p = sub.add_parser("train", help="train the amortized denoising network")
    add_common(p)
    p.add_argument("--dataset", help="dataset header file (alternative to a system spec)")
    p.add_argument("--iterations", type=int, dest="n_iterations")
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--task-mode", choices=trainer.TASK_MODES)
    p.add_argument("--train-samples", type=int, help="samples generated from a system spec")
    p.add_argument("-o", "--out", required=True, help="checkpoint path")
    p.add_argument("--log", help="training-log CSV path")

    for name, help_text in (
        ("estimate", "estimate the interaction measures"),
        ("grad", "estimate per-variable O-information gradients"),
    ):
        p = sub.add_parser(name, help=help_text)
        add_common(p)
        p.add_argument("--dataset")
        p.add_argument("--checkpoint")
        p.add_argument("--exact-scores", action="store_true")
        p.add_argument("--n-samples", type=int, dest="est_samples")
        p.add_argument("--mc-steps", type=int)
        p.add_argument("--seeds", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--time-sampling", choices=["uniform", "importance"])
        p.add_argument("-o", "--out")
        if name == "grad":
            p.add_argument(
                "--formulation", default="mi_sum", choices=["mi_sum", "subsystem"]
            )

    p = sub.add_parser("sweep", help="estimate over a sigma grid to a long CSV")
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--output-dir", help="default output directory")
    p.add_argument("--benchmark", required=True,
                   choices=["redundant", "synergistic", "mixed"])
    p.add_argument("--n-vars", type=int, required=True)
    p.add_argument("--sigmas", help="comma-separated grid (default log-spaced 0.1..10)")
    p.add_argument("--dims", help="comma-separated variable dimensions (default 1)")
    p.add_argument("--subsets", help="comma-separated block sizes, e.g. 3,3,4")
    p.add_argument("--syn-sigma", type=float, default=0.5,
                   help="fixed synergy strength for mixed sweeps")
    p.add_argument("--seeds", type=int)
    p.add_argument("--mc-steps", type=int)
    p.add_argument("--n-samples", type=int, dest="est_samples")
    p.add_argument("--exact-scores", action="store_true", default=True)
    p.add_argument("-o", "--out", required=True)
    return parser


def _apply_flag_overrides(cfg: dict, args) -> dict:
    over: dict = {}
    system_over = {}
    for flag, key in (("kind", "kind"), ("n_vars_flag", "n_vars"), ("dim", "dim"),
                      ("sigma", "sigma"), ("transform", "transform")):
        val = getattr(args, flag, None)
        if val is not None:
            system_over[key] = val
    if system_over:
        over["system"] = system_over
    if getattr(args, "dataset", None):
        over["dataset"] = args.dataset
    if getattr(args, "output_dir", None):
        over["output_dir"] = args.output_dir
    train_over = {}
    for flag, key in (("n_iterations", "n_iterations"), ("learning_rate", "learning_rate"),
                      ("seed", "seed"), ("task_mode", "task_mode"),
                      ("train_samples", "n_samples")):
        val = getattr(args, flag, None)
        if val is not None:
            train_over[key] = val
    if train_over and args.command == "train":
        over["train"] = train_over
    est_over = {}
    for flag, key in (("est_samples", "n_samples"), ("mc_steps", "mc_steps"),
                      ("seeds", "seeds"), ("seed", "seed"),
                      ("time_sampling", "time_sampling")):
        val = getattr(args, flag, None)
        if val is not None:
            est_over[key] = val
    if est_over and args.command in ("estimate", "grad", "sweep"):
        over["estimation"] = est_over
    merged = _merge(cfg, over)
    if args.command in ("estimate", "grad") and getattr(args, "exact_scores", False):
        merged.pop("dataset", None)
    return merged


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _apply_flag_overrides(load_config(args.config), args)
        out_dir = resolve_out_dir(cfg)

        def out_path(name: str | None, required: bool = False) -> Path | None:
            if name is None:
                if required:
                    raise ConfigError("an output path is required")
                return None
            p = Path(name)
            return p if p.is_absolute() else out_dir / p

        if args.command == "oracle":
            return cmd_oracle(cfg, out_path(args.out))
        if args.command == "gen":
            return cmd_gen(cfg, args.n_samples, args.seed, out_path(args.out, True), args.format)
        if args.command == "train":
            return cmd_train(cfg, out_path(args.out, True), out_path(args.log))
        if args.command == "estimate":
            return cmd_estimate(cfg, args, out_path(args.out))
        if args.command == "grad":
            return cmd_grad(cfg, args, out_path(args.out))
        if args.command == "sweep":
            return cmd_sweep(cfg, args, out_path(args.out, True))
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NotPositiveDefiniteError, SingularSystemError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
