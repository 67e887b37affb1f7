"""Dataset files, standardization, and splitting.

A dataset on disk is a JSON header file plus a payload it points at:

    {
      "n_samples": 1000,
      "total_dim": 3,
      "partition": [1, 1, 1],
      "columns": ["x0", "x1", "x2"],          // optional
      "standardization": {"mean": [...], "scale": [...]},  // optional
      "payload": {"format": "csv" | "f32" | "f64", "path": "name.csv"}
    }

CSV payloads are UTF-8 with a header row; binary payloads are raw
little-endian float matrices in row-major order. Values are always float64
in memory regardless of the payload width.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .rng import RngStream
from .systems import Dataset, VariablePartition

_BINARY_DTYPES = {"f32": "<f4", "f64": "<f8"}


def save(dataset: Dataset, path: str | Path, *, payload_format: str = "f32",
         columns: list[str] | None = None) -> Path:
    """Write header + payload next to each other; returns the header path."""
    path = Path(path)
    if payload_format not in ("csv", "f32", "f64"):
        raise ValueError(f"unknown payload format {payload_format!r}")
    ext = ".csv" if payload_format == "csv" else ".bin"
    payload_path = path.with_suffix(ext)
    if columns is not None and len(columns) != dataset.partition.total_dim:
        raise ValueError("column names do not match dimension count")
    names = columns or [f"x{i}" for i in range(dataset.partition.total_dim)]
    header = {
        "n_samples": dataset.n_samples,
        "total_dim": dataset.partition.total_dim,
        "partition": list(dataset.partition.dims),
        "columns": names,
        "standardization": None
        if dataset.standardization is None
        else {
            "mean": dataset.standardization[0].tolist(),
            "scale": dataset.standardization[1].tolist(),
        },
        "payload": {"format": payload_format, "path": payload_path.name},
    }
    if payload_format == "csv":
        with open(payload_path, "w", encoding="utf-8") as fh:
            fh.write(",".join(names) + "\n")
            for row in dataset.samples:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    else:
        dataset.samples.astype(_BINARY_DTYPES[payload_format]).tofile(payload_path)
    path.write_text(json.dumps(header, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load(path: str | Path, partition: VariablePartition | None = None) -> Dataset:
    """Read a header file back to a Dataset; rejects non-finite entries.

    ``partition`` overrides the header's variable split; it must still cover
    the payload's total dimension.
    """
    path = Path(path)
    try:
        header = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"malformed dataset header {path}: {exc}") from exc
    for key in ("n_samples", "total_dim", "partition", "payload"):
        if key not in header:
            raise ValueError(f"dataset header missing field {key!r}")
    total_dim = int(header["total_dim"])
    n_samples = int(header["n_samples"])
    payload = header["payload"]
    payload_path = path.parent / payload["path"]
    fmt = payload["format"]
    if fmt == "csv":
        matrix = np.loadtxt(payload_path, delimiter=",", skiprows=1, dtype=np.float64)
        matrix = matrix.reshape(-1, total_dim) if matrix.size else matrix.reshape(0, total_dim)
    elif fmt in _BINARY_DTYPES:
        raw = np.fromfile(payload_path, dtype=_BINARY_DTYPES[fmt])
        if raw.size != n_samples * total_dim:
            raise ValueError(
                f"payload holds {raw.size} values, header promises {n_samples}x{total_dim}"
            )
        matrix = raw.astype(np.float64).reshape(n_samples, total_dim)
    else:
        raise ValueError(f"unknown payload format {fmt!r}")
    if matrix.shape[0] != n_samples:
        raise ValueError(f"payload has {matrix.shape[0]} rows, header promises {n_samples}")
    bad = ~np.isfinite(matrix)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise ValueError(f"non-finite value at row {r}, column {c}")
    part = partition or VariablePartition(tuple(int(d) for d in header["partition"]))
    if part.total_dim != total_dim:
        raise ValueError(
            f"partition dims sum to {part.total_dim}, payload has {total_dim} columns"
        )
    std = header.get("standardization")
    record = None
    if std is not None:
        record = (np.asarray(std["mean"], dtype=np.float64),
                  np.asarray(std["scale"], dtype=np.float64))
    return Dataset(matrix, part, standardization=record)


def standardize(dataset: Dataset) -> Dataset:
    """Zero mean, unit variance per dimension; the affine record is kept so
    the transform can be undone. Constant columns are rejected."""
    x = dataset.samples
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    flat = np.nonzero(scale <= 1e-12)[0]
    if flat.size:
        raise ValueError(f"column {flat[0]} is constant; cannot standardize")
    return Dataset((x - mean) / scale, dataset.partition, standardization=(mean, scale))


def unstandardize(dataset: Dataset) -> Dataset:
    """Invert a recorded standardization."""
    if dataset.standardization is None:
        raise ValueError("dataset carries no standardization record")
    mean, scale = dataset.standardization
    return Dataset(dataset.samples * scale + mean, dataset.partition)


def apply_standardization(dataset: Dataset, mean: np.ndarray, scale: np.ndarray) -> Dataset:
    """Standardize with externally supplied moments (e.g. from a checkpoint)."""
    return Dataset(
        (dataset.samples - mean) / scale, dataset.partition, standardization=(mean, scale)
    )


def split(dataset: Dataset, train_fraction: float, rng: RngStream) -> tuple[Dataset, Dataset]:
    """Disjoint random row split; deterministic given the stream."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train fraction must lie in (0, 1)")
    m = dataset.n_samples
    perm = rng.generator().permutation(m)
    cut = int(round(train_fraction * m))
    train = Dataset(dataset.samples[perm[:cut]], dataset.partition, dataset.standardization)
    test = Dataset(dataset.samples[perm[cut:]], dataset.partition, dataset.standardization)
    return train, test
